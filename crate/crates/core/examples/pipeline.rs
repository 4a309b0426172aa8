//! Runs the whole pipeline on the pan fixture and lists what it wrote.
//!
//! cargo run --example pipeline [out_dir]

use statecast::fixtures::{FixtureOptions, SceneKind};
use statecast::netsim::{Profile, Scheme};
use statecast::pipeline::{cmd_pipeline, cmd_scene_gen, NetworkSource, RunConfig};

fn main() -> statecast::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("statecast-pipeline"), Into::into);
    std::fs::create_dir_all(&out)?;
    let scene = out.join("pan.txt");
    cmd_scene_gen(SceneKind::Pan, &FixtureOptions::for_kind(SceneKind::Pan), &scene)?;

    for scheme in [Scheme::Reuse, Scheme::Recover] {
        let mut cfg = RunConfig::new(&scene, out.join("run"));
        cfg.scheme = scheme;
        cfg.seed = 3;
        cfg.network = NetworkSource::Profile { profile: Profile::Leo, seconds: 30.0 };
        let s = cmd_pipeline(&cfg)?.report.summary;
        println!(
            "{:<8} {} frames: {} delivered, {} partial, {} predicted, {} late; mean PSNR {:.2} dB (loss-free {:.2} dB)",
            s.scheme, s.frames, s.delivered, s.partial_recovered, s.predicted, s.late_discarded, s.mean_psnr_db, s.mean_baseline_psnr_db
        );
    }
    for entry in std::fs::read_dir(out.join("run"))? {
        let path = entry?.path();
        let detail = if path.is_dir() {
            format!("{} files", std::fs::read_dir(&path)?.count())
        } else {
            format!("{} bytes", path.metadata()?.len())
        };
        println!("  {:<14} {detail}", path.file_name().unwrap_or_default().to_string_lossy());
    }
    Ok(())
}
