//! Replays an LEO trace over the village scene once per concealment scheme
//! and prints the session summaries and the loss-burst histogram.
//!
//! cargo run --release --example session [seed]

use statecast::codec::CodecConfig;
use statecast::fixtures::{self, FixtureOptions, SceneKind};
use statecast::netsim::{burst_report, generate_trace, simulate_session, Profile, Scheme, SessionConfig, SessionInputs};

fn main() -> statecast::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let scene = fixtures::village_toy(&FixtureOptions::for_kind(SceneKind::VillageToy));
    let inputs = SessionInputs::prepare(&scene, &CodecConfig::default(), 5)?;
    let trace = generate_trace(Profile::Leo, 300.0, seed)?;
    println!("{:<10} {:>9} {:>7} {:>9} {:>8} {:>9}", "scheme", "PSNR dB", "SSIM", "partial", "lost", "extra B");
    let mut recovered = None;
    for scheme in [Scheme::Recover, Scheme::NoStates, Scheme::Reuse, Scheme::Fec(0.7)] {
        let report = simulate_session(&inputs, &trace, &SessionConfig::new(scheme, seed))?;
        let s = &report.summary;
        println!(
            "{:<10} {:>9.2} {:>7.4} {:>9} {:>8} {:>9}",
            s.scheme, s.mean_psnr_db, s.mean_ssim, s.partial_recovered, s.predicted, s.extra_bytes
        );
        recovered.get_or_insert(report);
    }
    let report = recovered.expect("the recover scheme ran first");
    let bursts = burst_report(&report);
    println!("\nloss bursts under recovery (mean length {:.1} frames):", bursts.mean_run_length());
    for (len, bin) in &bursts.bins {
        println!("  {len:>3} frames x{:<3} PSNR drop {:.2} dB", bin.runs, bin.mean_psnr_reduction_db);
    }
    Ok(())
}
