//! Extracts game states at several downsampling ratios and shows how sparse
//! they get, writing each as a coloured image.
//!
//! cargo run --example game_states [out_dir]

use statecast::fixtures::{self, FixtureOptions, SceneKind};
use statecast::gamestate::{extract_state, frustum_cull, state_to_image};

fn main() -> statecast::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("statecast-states"), Into::into);
    std::fs::create_dir_all(&out)?;
    let mut opts = FixtureOptions::for_kind(SceneKind::VillageToy);
    opts.frames = 1;
    let scene = fixtures::village_toy(&opts);
    let visible = frustum_cull(&scene, 0)?;
    println!("{} of {} objects survive culling", visible.visible_object_ids.len(), scene.objects.len());
    for k in [1, 2, 5, 10, 20] {
        let state = extract_state(&scene, 0, k, scene.state_resolution)?;
        let total = state.width * state.height;
        println!("k = {k:>2}: {:>5} of {total} cells occupied ({:.1}%)", state.occupied(), 100.0 * state.occupied() as f64 / total as f64);
        state_to_image(&state, &scene.palette).save_ppm(out.join(format!("state_k{k}.ppm")))?;
    }
    println!("images in {}", out.display());
    Ok(())
}
