//! Frame recovery from the previous frame, guided by game states.
//!
//! The prediction warps the previous frame with flow estimated between the
//! previous and current game states, applies a gain/bias correction fitted
//! on whatever decoded correctly, inpaints pixels the warp could not reach,
//! and finally pastes back every valid sub-block of the partial frame.

mod enhance;
mod flow;
mod inpaint;
mod warp;

use crate::codec::CorruptionMask;
use crate::error::{Error, Result};
use crate::gamestate::GameStateFrame;
use crate::image::RgbFrame;
use crate::scene::Palette;

pub use enhance::{channel_gradient, channel_loss, enhance_loss, fit_enhance, EnhanceConfig, EnhanceParams};
pub use flow::{estimate_flow, estimate_flow_planes, upsample_flow, FlowConfig, FlowField, Plane};
pub use inpaint::{inpaint, InpaintConfig};
pub use warp::{warp_frame, CoverageMask};

/// What the flow is estimated from.
#[derive(Debug, Clone, Copy)]
pub enum Guidance<'a> {
    /// Previous and current game states.
    GameStates {
        prev: &'a GameStateFrame,
        curr: &'a GameStateFrame,
        palette: &'a Palette,
    },
    /// No game states: motion between the two most recent frames is assumed
    /// to continue.
    PreviousFrames { before_prev: &'a RgbFrame },
}

#[derive(Debug, Clone, Copy)]
pub struct PartialFrame<'a> {
    pub frame: &'a RgbFrame,
    pub mask: &'a CorruptionMask,
}

#[derive(Debug, Clone, Copy)]
pub struct RecoveryInput<'a> {
    pub guidance: Guidance<'a>,
    pub prev_frame: &'a RgbFrame,
    pub partial: Option<PartialFrame<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    pub flow: FlowConfig,
    pub enhance: EnhanceConfig,
    pub inpaint: InpaintConfig,
    /// Working resolution for frame-based flow when no game states exist.
    pub frame_flow_resolution: (usize, usize),
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            flow: FlowConfig::default(),
            enhance: EnhanceConfig::default(),
            inpaint: InpaintConfig::default(),
            frame_flow_resolution: crate::fixtures::DEFAULT_STATE_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryOutput {
    pub frame: RgbFrame,
    /// Composite before the partial-frame overwrite.
    pub composite: RgbFrame,
    pub warped: RgbFrame,
    pub coverage: CoverageMask,
    pub flow: FlowField,
    pub params: EnhanceParams,
}

fn frame_flow(before_prev: &RgbFrame, prev: &RgbFrame, cfg: &RecoveryConfig) -> Result<FlowField> {
    let (fw, fh) = prev.dims();
    let (w, h) = (cfg.frame_flow_resolution.0.min(fw), cfg.frame_flow_resolution.1.min(fh));
    let a = Plane::from_luma(before_prev).resize_area(w, h);
    let b = Plane::from_luma(prev).resize_area(w, h);
    estimate_flow_planes(&a, &b, &cfg.flow)
}

pub fn recover(input: &RecoveryInput<'_>, cfg: &RecoveryConfig) -> Result<RecoveryOutput> {
    let prev = input.prev_frame;
    let (w, h) = prev.dims();
    if let Some(p) = &input.partial {
        prev.ensure_same_dims(p.frame)?;
        if (p.mask.width * crate::codec::SUB_SIZE, p.mask.height * crate::codec::SUB_SIZE) != (w, h) {
            return Err(Error::DimensionMismatch {
                left: (w, h),
                right: (p.mask.width * crate::codec::SUB_SIZE, p.mask.height * crate::codec::SUB_SIZE),
            });
        }
    }
    let (small, palette, curr_state) = match input.guidance {
        Guidance::GameStates { prev: sp, curr, palette } => {
            (estimate_flow(sp, curr, palette, &cfg.flow)?, Some(palette), Some(curr))
        }
        Guidance::PreviousFrames { before_prev } => {
            prev.ensure_same_dims(before_prev)?;
            (frame_flow(before_prev, prev, cfg)?, None, None)
        }
    };
    let flow = upsample_flow(&small, (w, h))?;
    let (warped, coverage) = warp_frame(prev, &flow);

    let params = match &input.partial {
        Some(p) => {
            let overlap: Vec<bool> = (0..w * h)
                .map(|i| coverage.covered[i] && p.mask.pixel_valid(i % w, i / w))
                .collect();
            fit_enhance(&warped, p.frame, &overlap, &cfg.enhance)
        }
        None => EnhanceParams::IDENTITY,
    };

    let mut enhanced = warped.clone();
    for y in 0..h {
        for x in 0..w {
            if coverage.get(x, y) {
                enhanced.set(x, y, params.apply(warped.get(x, y)));
            }
        }
    }
    let hole: Vec<bool> = coverage.covered.iter().map(|&c| !c).collect();
    let state = curr_state.zip(palette);
    let composite = inpaint(&enhanced, &hole, state, &cfg.inpaint);

    let mut frame = composite.clone();
    if let Some(p) = &input.partial {
        for y in 0..h {
            for x in 0..w {
                if p.mask.pixel_valid(x, y) {
                    frame.set(x, y, p.frame.get(x, y));
                }
            }
        }
    }
    Ok(RecoveryOutput {
        frame,
        composite,
        warped,
        coverage,
        flow,
        params,
    })
}
