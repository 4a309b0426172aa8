//! Rasterizes a few village frames to PPM.
//!
//! cargo run --example render [out_dir]

use statecast::fixtures::{self, FixtureOptions, SceneKind};
use statecast::scene::render_ground_truth;

fn main() -> statecast::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("statecast-render"), Into::into);
    std::fs::create_dir_all(&out)?;
    let mut opts = FixtureOptions::for_kind(SceneKind::VillageToy);
    opts.frames = 60;
    let scene = fixtures::village_toy(&opts);
    for f in [0, 20, 40, 59] {
        let t = std::time::Instant::now();
        let frame = render_ground_truth(&scene, f)?;
        let path = out.join(format!("village_{f:03}.ppm"));
        frame.save_ppm(&path)?;
        println!("frame {f:>2}: {}x{} in {:?} -> {}", frame.width(), frame.height(), t.elapsed(), path.display());
    }
    Ok(())
}
