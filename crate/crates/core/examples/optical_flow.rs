//! Estimates flow between consecutive game states of the two-motion fixture
//! and prints the dominant motion of each object group.

use statecast::fixtures::{self, FixtureOptions, SceneKind};
use statecast::gamestate::extract_state;
use statecast::recovery::{estimate_flow, FlowConfig};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.get(v.len() / 2).copied().unwrap_or(0.0)
}

fn main() -> statecast::Result<()> {
    let scene = fixtures::two_motion(&FixtureOptions::for_kind(SceneKind::TwoMotion));
    let res = scene.state_resolution;
    for (a, b) in [(0, 4), (10, 14), (20, 24)] {
        let prev = extract_state(&scene, a, 1, res)?;
        let curr = extract_state(&scene, b, 1, res)?;
        let flow = estimate_flow(&prev, &curr, &scene.palette, &FlowConfig::default())?;
        let mut line = format!("frames {a:>2} -> {b:>2}:");
        for (name, colors) in [("sliding", [2, 3]), ("bobbing", [4, 5])] {
            let cells: Vec<usize> = (0..curr.cells.len())
                .filter(|&i| curr.cells[i].is_some_and(|c| colors.contains(&c.color_index)))
                .collect();
            let u = median(cells.iter().map(|&i| flow.u[i]).collect());
            let v = median(cells.iter().map(|&i| flow.v[i]).collect());
            line += &format!("  {name} ({u:+.2}, {v:+.2})");
        }
        println!("{line}");
    }
    Ok(())
}
