//! Recovers one lost village frame three ways: with game states, from the
//! two previous frames only, and by repeating the previous frame. Then
//! recovers a half-decoded version of the same frame.
//!
//! cargo run --example recover_frame [frame]

use statecast::codec::CorruptionMask;
use statecast::fixtures::{self, FixtureOptions, SceneKind};
use statecast::gamestate::extract_state;
use statecast::metrics::{psnr, ssim};
use statecast::recovery::{recover, Guidance, PartialFrame, RecoveryConfig, RecoveryInput};
use statecast::scene::render_ground_truth;

fn main() -> statecast::Result<()> {
    let f: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(40);
    let mut opts = FixtureOptions::for_kind(SceneKind::VillageToy);
    opts.frames = f + 1;
    let scene = fixtures::village_toy(&opts);
    let truth = render_ground_truth(&scene, f)?;
    let prev = render_ground_truth(&scene, f - 1)?;
    let before = render_ground_truth(&scene, f - 2)?;
    let s_prev = extract_state(&scene, f - 1, 5, scene.state_resolution)?;
    let s_curr = extract_state(&scene, f, 5, scene.state_resolution)?;
    let cfg = RecoveryConfig::default();
    let states = Guidance::GameStates { prev: &s_prev, curr: &s_curr, palette: &scene.palette };
    let frames_only = Guidance::PreviousFrames { before_prev: &before };

    let report = |name: &str, out: &statecast::image::RgbFrame| -> statecast::Result<()> {
        println!("{name:<28} PSNR {:>6.2} dB  SSIM {:.4}", psnr(out, &truth)?, ssim(out, &truth)?);
        Ok(())
    };
    report("reuse previous frame", &prev)?;
    for (name, guidance) in [("recover without states", frames_only), ("recover with game states", states)] {
        let out = recover(&RecoveryInput { guidance, prev_frame: &prev, partial: None }, &cfg)?;
        report(name, &out.frame)?;
    }

    // Lower half of the frame decoded, upper half lost.
    let (w, h) = truth.dims();
    let mut mask = CorruptionMask::all_valid(w, h, f);
    for cy in 0..mask.height / 2 {
        for cx in 0..mask.width {
            mask.set_corrupt(cx, cy, true);
        }
    }
    let partial = PartialFrame { frame: &truth, mask: &mask };
    let out = recover(&RecoveryInput { guidance: states, prev_frame: &prev, partial: Some(partial) }, &cfg)?;
    report("with states + half partial", &out.frame)?;
    println!("coverage {:.1}%, enhance gain {:.3?} bias {:.2?}", 100.0 * out.coverage.fraction(), out.params.gain, out.params.bias);
    Ok(())
}
