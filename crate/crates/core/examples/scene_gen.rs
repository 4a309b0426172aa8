//! Generates every fixture scene, writes it as text and reloads it.
//!
//! cargo run --example scene_gen [out_dir]

use statecast::fixtures::{self, FixtureOptions, SceneKind};
use statecast::scene::{load_scene, save_scene};

fn main() -> statecast::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("statecast-scenes"), Into::into);
    std::fs::create_dir_all(&out)?;
    for kind in [SceneKind::Pan, SceneKind::Orbit, SceneKind::TwoMotion, SceneKind::VillageToy] {
        let scene = fixtures::generate(kind, &FixtureOptions::for_kind(kind));
        let path = out.join(format!("{kind}.txt"));
        save_scene(&scene, &path)?;
        let back = load_scene(&path)?;
        let vertices: usize = back.objects.iter().map(|o| o.vertices.len()).sum();
        println!(
            "{:<12} {:>2} objects {:>6} vertices {:>3} frames  rgb {:?} state {:?}  -> {}",
            kind.to_string(),
            back.objects.len(),
            vertices,
            back.frame_count(),
            back.rgb_resolution,
            back.state_resolution,
            path.display()
        );
        assert_eq!(back, scene);
    }
    Ok(())
}
