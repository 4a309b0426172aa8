//! Game-state-guided recovery of lost and partially corrupted cloud-gaming
//! video frames.
//!
//! The crate is organised as a pipeline:
//!
//! * [`scene`] holds the synthetic 3D world and a reference rasterizer that
//!   produces ground-truth RGB frames.
//! * [`gamestate`] projects visible object vertices into a sparse 2D
//!   game-state frame without rendering.
//! * [`codec`] is a small motion-compensated block codec whose decoder emits a
//!   per-4x4 corruption mask, following losses through reference chains.
//! * [`recovery`] warps the previous frame with flow estimated between game
//!   states, then enhances, inpaints and overwrites with whatever decoded
//!   correctly.
//! * [`metrics`] provides PSNR, SSIM and the Charbonnier distance.
//! * [`netsim`] replays synthetic network traces through the whole pipeline
//!   under a latency budget and timeout scheduler, with an FEC baseline.
//! * [`pipeline`] ties the stages together for the command-line tool.

pub mod codec;
pub mod error;
pub mod fixtures;
pub mod gamestate;
pub mod geom;
pub mod image;
pub mod metrics;
pub mod netsim;
pub mod pipeline;
pub mod recovery;
pub mod scene;

pub use error::{Error, Result};
