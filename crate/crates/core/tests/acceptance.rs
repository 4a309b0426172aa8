//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits non-zero if any failed. A positional
//! argument restricts the run to criteria whose name contains it.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use statecast::codec::{
    decode_with_mask, encode, CodecConfig, CorruptionMask, Decoder, EncodedFrame, FrameKind, MaskCache, MbMode,
    MB_SIZE, SUB_SIZE,
};
use statecast::fixtures::{self, cube_mesh, FixtureOptions, SceneKind};
use statecast::gamestate::{extract_state, frustum_cull, GameStateFrame};
use statecast::geom::{Mat4, Vec3};
use statecast::image::RgbFrame;
use statecast::metrics::{charbonnier_grad, charbonnier_rho};
use statecast::netsim::{
    generate_trace, simulate_session, FrameStatus, NetworkTrace, Profile, SchedulerConfig, Scheme, SessionConfig,
    SessionInputs, SessionReport,
};
use statecast::pipeline::{cmd_pipeline, cmd_scene_gen, RunConfig};
use statecast::recovery::{estimate_flow, fit_enhance, recover, EnhanceConfig, FlowConfig, Guidance, PartialFrame, RecoveryConfig, RecoveryInput};
use statecast::scene::{render_ground_truth, CameraPose, GameObject, SceneModel};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure!(elapsed.as_secs_f64() < limit_s, "took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64());
    Ok(())
}

// ---------------------------------------------------------------------------
// Projection oracle

/// Brute-force projection of one vertex: cell and view depth, if on screen.
fn project(scene: &SceneModel, frame: usize, obj: &GameObject, v: Vec3, (w, h): (usize, usize)) -> Option<(usize, usize, f64)> {
    let pose = &scene.camera_path[frame];
    let world = obj.transform_at(frame).transform_point(v);
    let view = pose.view.transform_point(world.truncate());
    let clip = pose.projection.transform_point(view.truncate());
    let depth = -view.z;
    if clip.w <= 0.0 || depth <= 0.0 {
        return None;
    }
    let (nx, ny) = (clip.x / clip.w, clip.y / clip.w);
    if nx.abs() > 1.0 || ny.abs() > 1.0 {
        return None;
    }
    let x = ((nx + 1.0) / 2.0 * w as f64).floor() as usize;
    let y = ((1.0 - ny) / 2.0 * h as f64).floor() as usize;
    (x < w && y < h).then_some((x, y, depth))
}

fn random_scene(rng: &mut ChaCha8Rng, frames: usize, state_res: (usize, usize)) -> SceneModel {
    let (cv, ct) = cube_mesh(rng.random_range(1..4));
    let count = rng.random_range(3..12);
    let objects = (0..count)
        .map(|i| {
            let pos = Vec3::new(rng.random_range(-12.0..12.0), rng.random_range(-3.0..3.0), rng.random_range(-20.0..6.0));
            let s = rng.random_range(0.5..3.0);
            let t = Mat4::translation(pos) * Mat4::rotation_y(rng.random_range(0.0..6.28)) * Mat4::scale(Vec3::new(s, s, s));
            GameObject::new(i, i % 4, cv.clone(), ct.clone(), vec![t])
        })
        .collect();
    let eye = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..4.0));
    let target = eye + Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.3..0.3), -1.0);
    let view = Mat4::look_at(eye, target, Vec3::new(0.0, 1.0, 0.0));
    let projection = Mat4::perspective(rng.random_range(0.6..1.6), state_res.0 as f64 / state_res.1 as f64, 0.1, 60.0);
    let camera_path = (0..frames)
        .map(|f| CameraPose {
            view,
            projection,
            frame_index: f,
        })
        .collect();
    SceneModel {
        objects,
        palette: [(0, [255, 0, 0]), (1, [0, 255, 0]), (2, [0, 0, 255]), (3, [255, 255, 0])].into_iter().collect(),
        camera_path,
        rgb_resolution: (64, 64),
        state_resolution: state_res,
    }
}

/// Returns the number of occupied cells checked.
fn check_projection(scene: &SceneModel, frame: usize, k: usize, res: (usize, usize)) -> Result<usize, String> {
    let state = extract_state(scene, frame, k, res).map_err(|e| e.to_string())?;
    let visible = frustum_cull(scene, frame).map_err(|e| e.to_string())?.visible_object_ids;
    let mut contenders: BTreeMap<(usize, usize), Vec<(f64, u32)>> = BTreeMap::new();
    for obj in &scene.objects {
        let on_screen = obj.vertices.iter().any(|&v| project(scene, frame, obj, v, res).is_some());
        ensure!(!on_screen || visible.contains(&obj.id), "object {} projects on screen but was culled", obj.id);
        for &v in obj.vertices.iter().step_by(k) {
            if let Some((x, y, d)) = project(scene, frame, obj, v, res) {
                contenders.entry((x, y)).or_default().push((d, obj.color_index));
            }
        }
    }
    for y in 0..res.1 {
        for x in 0..res.0 {
            match (state.cell(x, y), contenders.get(&(x, y))) {
                (None, None) => {}
                (Some(c), Some(list)) => {
                    let min = list.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
                    ensure!(c.depth == min as f32, "cell ({x},{y}) depth {} but nearest contender {min}", c.depth);
                    ensure!(
                        list.iter().any(|&(d, ci)| d == min && ci == c.color_index),
                        "cell ({x},{y}) colour {} is not the nearest contender's",
                        c.color_index
                    );
                }
                (a, b) => return Err(format!("cell ({x},{y}) occupancy differs: state {a:?}, oracle {b:?}")),
            }
        }
    }
    Ok(state.occupied())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let scenes = 24;
    let (mut occupied, mut contested_culls) = (0, 0);
    for i in 0..scenes {
        let res = (rng.random_range(8..=64), rng.random_range(8..=64));
        let k = rng.random_range(1..=5);
        let scene = random_scene(&mut rng, 2, res);
        occupied += check_projection(&scene, 0, k, res).map_err(|e| format!("scene {i}: {e}"))?;
        contested_culls += scene.objects.len() - frustum_cull(&scene, 0).map_err(|e| e.to_string())?.visible_object_ids.len();
        let a = extract_state(&scene, 0, k, res).map_err(|e| e.to_string())?;
        let b = extract_state(&scene, 1, k, res).map_err(|e| e.to_string())?;
        ensure!(a.cells == b.cells, "scene {i}: static world changed between frames");
    }
    let village = fixtures::village_toy(&FixtureOptions {
        frames: 1,
        ..FixtureOptions::for_kind(SceneKind::VillageToy)
    });
    occupied += check_projection(&village, 0, 1, (64, 32))?;
    ensure!(contested_culls > 0, "no object was ever culled");
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "{scenes} random scenes plus village, {occupied} occupied cells checked, {contested_culls} objects culled, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// Codec dependency oracle

fn moving_frames(rng: &mut ChaCha8Rng, w: usize, h: usize, n: usize) -> Vec<RgbFrame> {
    let base: [f64; 3] = [rng.random_range(0.0..255.0), rng.random_range(0.0..255.0), rng.random_range(0.0..255.0)];
    let rects: Vec<(f64, f64, f64, f64, f64, f64, [u8; 3])> = (0..rng.random_range(2..6))
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(6.0..30.0),
                rng.random_range(6.0..30.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                [rng.random(), rng.random(), rng.random()],
            )
        })
        .collect();
    let pan = (rng.random_range(-3i32..=3), rng.random_range(-3i32..=3));
    (0..n)
        .map(|f| {
            RgbFrame::from_fn(w, h, |x, y| {
                let sx = x as i32 + pan.0 * f as i32;
                let sy = y as i32 + pan.1 * f as i32;
                for &(rx, ry, rw, rh, vx, vy, c) in &rects {
                    let (px, py) = (rx + vx * f as f64, ry + vy * f as f64);
                    if (x as f64) >= px && (x as f64) < px + rw && (y as f64) >= py && (y as f64) < py + rh {
                        return c;
                    }
                }
                let t = ((sx * 7 + sy * 3).rem_euclid(64)) as f64;
                [
                    (base[0] + t).rem_euclid(256.0) as u8,
                    (base[1] + 2.0 * t).rem_euclid(256.0) as u8,
                    (base[2] + sx.rem_euclid(32) as f64).rem_euclid(256.0) as u8,
                ]
            })
        })
        .collect()
}

/// Expected CORRUPT cells of one frame, walking every reference pixel.
fn oracle_mask(ef: &EncodedFrame, lost: &BTreeSet<u32>, prev: Option<&Vec<bool>>) -> Vec<bool> {
    let (cw, ch) = (ef.width / SUB_SIZE, ef.height / SUB_SIZE);
    let mut corrupt = vec![false; cw * ch];
    for (i, mb) in ef.macroblocks.iter().enumerate() {
        let packet = ef.packet_map.iter().find(|r| r.start <= i && i < r.end).expect("every macroblock is packed");
        let mut bad = lost.contains(&packet.packet_id);
        if !bad && mb.mode != MbMode::Intra {
            match prev {
                None => bad = true,
                Some(prev) => {
                    let rx = (mb.bx * MB_SIZE) as i32 - mb.motion_vector.0;
                    let ry = (mb.by * MB_SIZE) as i32 - mb.motion_vector.1;
                    'walk: for py in ry..ry + MB_SIZE as i32 {
                        for px in rx..rx + MB_SIZE as i32 {
                            if prev[(py as usize / SUB_SIZE) * cw + px as usize / SUB_SIZE] {
                                bad = true;
                                break 'walk;
                            }
                        }
                    }
                }
            }
        }
        if bad {
            for y in mb.by * 4..mb.by * 4 + 4 {
                for x in mb.bx * 4..mb.bx * 4 + 4 {
                    corrupt[y * cw + x] = true;
                }
            }
        }
    }
    corrupt
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let instances = 220;
    let (mut propagated, mut frames_checked) = (0usize, 0usize);
    for inst in 0..instances {
        let (w, h) = (16 * rng.random_range(2..=8), 16 * rng.random_range(2..=8));
        let n = rng.random_range(2..=9);
        let mut codec = CodecConfig {
            gop: rng.random_range(1..=8),
            q: rng.random_range(1..=12),
            mtu: rng.random_range(200..=1600),
            search_range: rng.random_range(2..=8),
            skip_threshold: rng.random_range(0..=200),
        };
        let frames = moving_frames(&mut rng, w, h, n);
        let encoded = match encode(&frames, &codec) {
            Ok((e, _)) => e,
            Err(_) => {
                codec.mtu = 1600;
                encode(&frames, &codec).map_err(|e| e.to_string())?.0
            }
        };
        let loss = rng.random_range(0.0..0.5);
        let mut cache = MaskCache::default();
        let mut reference: Option<(RgbFrame, CorruptionMask)> = None;
        let mut oracle_prev: Option<Vec<bool>> = None;
        for ef in &encoded {
            ensure!(ef.kind == FrameKind::P || ef.macroblocks.iter().all(|m| m.mode == MbMode::Intra), "I-frame with non-INTRA macroblocks");
            let mut packets = ef.packets();
            let mut lost = BTreeSet::new();
            for p in packets.iter_mut() {
                p.lost = rng.random_bool(loss);
                if p.lost {
                    lost.insert(p.packet_id);
                }
            }
            let refs = match ef.kind {
                FrameKind::I => None,
                FrameKind::P => reference.as_ref().map(|(f, m)| (f, m)),
            };
            let (out, mask) = decode_with_mask(ef, &packets, refs, &mut cache).map_err(|e| e.to_string())?;
            let oracle = oracle_mask(ef, &lost, if ef.kind == FrameKind::P { oracle_prev.as_ref() } else { None });
            let own_only = oracle_mask(ef, &lost, Some(&vec![false; oracle.len()]));
            if oracle != own_only {
                propagated += 1;
            }
            let got: Vec<bool> = (0..mask.height)
                .flat_map(|y| (0..mask.width).map(move |x| (x, y)))
                .map(|(x, y)| mask.is_corrupt(x, y))
                .collect();
            ensure!(got == oracle, "instance {inst} frame {}: CORRUPT set differs from the oracle", ef.frame_index);
            frames_checked += 1;
            oracle_prev = Some(oracle);
            reference = Some((out, mask));
        }
    }
    ensure!(propagated > 0, "no instance exercised reference propagation");
    within(start.elapsed(), 120.0)?;
    Ok(format!(
        "{instances} instances, {frames_checked} frames, {propagated} with propagated corruption, 0 mismatches, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------

fn decode_all(encoded: &[EncodedFrame]) -> Result<Vec<(RgbFrame, CorruptionMask)>, String> {
    let mut dec = Decoder::new();
    encoded
        .iter()
        .map(|ef| dec.decode(ef, &ef.packets()).map_err(|e| e.to_string()))
        .collect()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let noise: Vec<RgbFrame> = (0..4).map(|_| RgbFrame::from_fn(64, 48, |_, _| [rng.random(), rng.random(), rng.random()])).collect();
    let village = fixtures::village_toy(&FixtureOptions {
        frames: 3,
        ..FixtureOptions::for_kind(SceneKind::VillageToy)
    });
    let rendered: Vec<RgbFrame> = (0..3).map(|f| render_ground_truth(&village, f)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for frames in [&noise, &rendered] {
        for gop in [1, 4] {
            let codec = CodecConfig {
                gop,
                q: 1,
                skip_threshold: 0,
                mtu: 1600,
                ..CodecConfig::default()
            };
            let (encoded, _) = encode(frames, &codec).map_err(|e| e.to_string())?;
            for ((out, mask), src) in decode_all(&encoded)?.iter().zip(frames.iter()) {
                ensure!(mask.all_valid_cells(), "mask not all VALID");
                ensure!(out == src, "gop {gop}: reconstruction differs from source");
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} frames bit-exact at q=1"))
}

fn criterion_4() -> Outcome {
    let mut opts = FixtureOptions::for_kind(SceneKind::VillageToy);
    opts.frames = 2;
    let mut scene = fixtures::village_toy(&opts);
    let pose0 = scene.camera_path[0];
    scene.camera_path[1] = CameraPose { frame_index: 1, ..pose0 };
    for obj in &mut scene.objects {
        obj.transforms.truncate(1);
    }
    let s0 = extract_state(&scene, 0, 5, scene.state_resolution).map_err(|e| e.to_string())?;
    let s1 = extract_state(&scene, 1, 5, scene.state_resolution).map_err(|e| e.to_string())?;
    let prev = render_ground_truth(&scene, 0).map_err(|e| e.to_string())?;
    let guidance = Guidance::GameStates {
        prev: &s0,
        curr: &s1,
        palette: &scene.palette,
    };
    let cfg = RecoveryConfig::default();
    let out = recover(
        &RecoveryInput {
            guidance,
            prev_frame: &prev,
            partial: None,
        },
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    ensure!(out.frame == prev, "static scene without a partial frame did not return the previous frame");

    let pan = fixtures::pan(&FixtureOptions {
        frames: 1,
        ..FixtureOptions::for_kind(SceneKind::Pan)
    });
    let partial = render_ground_truth(&pan, 0).map_err(|e| e.to_string())?;
    let mask = CorruptionMask::all_valid(partial.width(), partial.height(), 1);
    let out = recover(
        &RecoveryInput {
            guidance,
            prev_frame: &prev,
            partial: Some(PartialFrame { frame: &partial, mask: &mask }),
        },
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    ensure!(out.frame == partial, "all-VALID partial frame was not returned verbatim");
    Ok("previous frame and all-VALID partial returned bit-exactly".into())
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    for x in [0.0, 1e-6, 0.5, 100.0] {
        let h = if x == 0.0 { 1e-9 } else { x * 1e-4 };
        let numeric = (charbonnier_rho(x + h) - charbonnier_rho(x - h)) / (2.0 * h);
        let analytic = charbonnier_grad(x);
        let scale = analytic.abs().max(numeric.abs());
        let rel = if scale == 0.0 { 0.0 } else { (analytic - numeric).abs() / scale };
        ensure!(rel <= 1e-5, "x = {x}: analytic {analytic} vs numeric {numeric}");
        worst = worst.max(rel);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let bias = [12.0, -7.0, 4.0];
    let warped = RgbFrame::from_fn(96, 64, |_, _| [rng.random_range(30..200), rng.random_range(30..200), rng.random_range(30..200)]);
    let partial = RgbFrame::from_fn(96, 64, |x, y| {
        let p = warped.get(x, y);
        std::array::from_fn(|c| (p[c] as f64 + bias[c]).round() as u8)
    });
    let overlap = vec![true; 96 * 64];
    let params = fit_enhance(&warped, &partial, &overlap, &EnhanceConfig::default());
    for c in 0..3 {
        ensure!((params.gain[c] - 1.0).abs() <= 0.1, "channel {c}: gain {}", params.gain[c]);
        ensure!((params.bias[c] - bias[c]).abs() <= 0.5, "channel {c}: bias {} vs {}", params.bias[c], bias[c]);
    }
    Ok(format!("worst relative gradient error {worst:.1e}; fitted gain {:.3?} bias {:.2?}", params.gain, params.bias))
}

// ---------------------------------------------------------------------------
// Flow

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn shifted(s: &GameStateFrame, dx: i64, dy: i64) -> GameStateFrame {
    let mut out = s.clone();
    let (w, h) = (s.width as i64, s.height as i64);
    for y in 0..h {
        for x in 0..w {
            out.set((x + dx).rem_euclid(w) as usize, (y + dy).rem_euclid(h) as usize, s.cell(x as usize, y as usize));
        }
    }
    out
}

/// Continuous screen position of a vertex on the state grid.
fn screen_pos(scene: &SceneModel, frame: usize, obj: &GameObject, v: Vec3) -> Option<(f64, f64)> {
    let (w, h) = scene.state_resolution;
    project(scene, frame, obj, v, (w, h))?;
    let pose = &scene.camera_path[frame];
    let clip = (pose.projection * pose.view * obj.transform_at(frame)).transform_point(v);
    Some(((clip.x / clip.w + 1.0) / 2.0 * w as f64, (1.0 - clip.y / clip.w) / 2.0 * h as f64))
}

fn criterion_6() -> Outcome {
    let village = fixtures::village_toy(&FixtureOptions {
        frames: 1,
        ..FixtureOptions::for_kind(SceneKind::VillageToy)
    });
    let s = extract_state(&village, 0, 5, (128, 64)).map_err(|e| e.to_string())?;
    let cfg = FlowConfig::default();
    let mut report = Vec::new();
    for (dx, dy) in [(3, 0), (-2, 2)] {
        let t = shifted(&s, dx, dy);
        let flow = estimate_flow(&s, &t, &village.palette, &cfg).map_err(|e| e.to_string())?;
        let occ: Vec<usize> = (0..t.cells.len()).filter(|&i| t.cells[i].is_some()).collect();
        let mu = median(occ.iter().map(|&i| flow.u[i]).collect());
        let mv = median(occ.iter().map(|&i| flow.v[i]).collect());
        ensure!((mu - dx as f64).abs() <= 0.5 && (mv - dy as f64).abs() <= 0.5, "shift ({dx},{dy}): median flow ({mu:.2},{mv:.2})");
        report.push(format!("({dx},{dy})->({mu:.2},{mv:.2})"));
    }

    let scene = fixtures::two_motion(&FixtureOptions::for_kind(SceneKind::TwoMotion));
    let (f0, f1) = (0, 6);
    let res = scene.state_resolution;
    let a = extract_state(&scene, f0, 1, res).map_err(|e| e.to_string())?;
    let b = extract_state(&scene, f1, 1, res).map_err(|e| e.to_string())?;
    let flow = estimate_flow(&a, &b, &scene.palette, &cfg).map_err(|e| e.to_string())?;
    let groups: [Vec<u32>; 2] = [vec![1, 2], vec![3, 4]];
    for (g, ids) in groups.iter().enumerate() {
        let (mut du, mut dv, mut cells) = (Vec::new(), Vec::new(), BTreeSet::new());
        for obj in scene.objects.iter().filter(|o| ids.contains(&o.id)) {
            for &v in &obj.vertices {
                if let (Some(p), Some(q)) = (screen_pos(&scene, f0, obj, v), screen_pos(&scene, f1, obj, v)) {
                    du.push(q.0 - p.0);
                    dv.push(q.1 - p.1);
                }
                if let Some((x, y, _)) = project(&scene, f1, obj, v, res) {
                    if b.cell(x, y).is_some_and(|c| c.color_index == obj.color_index) {
                        cells.insert(y * res.0 + x);
                    }
                }
            }
        }
        ensure!(!cells.is_empty(), "group {g} not visible");
        let (tu, tv) = (median(du), median(dv));
        let eu = median(cells.iter().map(|&i| flow.u[i]).collect());
        let ev = median(cells.iter().map(|&i| flow.v[i]).collect());
        ensure!((eu - tu).abs() <= 1.0 && (ev - tv).abs() <= 1.0, "group {g}: flow ({eu:.2},{ev:.2}) vs truth ({tu:.2},{tv:.2})");
        report.push(format!("group {g} ({eu:.2},{ev:.2}) vs ({tu:.2},{tv:.2})"));
    }
    Ok(report.join("; "))
}

// ---------------------------------------------------------------------------
// Sessions on the village fixture

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Sessions {
    traces: Vec<NetworkTrace>,
    recover: Vec<SessionReport>,
    no_states: Vec<SessionReport>,
    reuse: Vec<SessionReport>,
    elapsed: Duration,
    inputs: SessionInputs,
}

fn mean_psnr(reports: &[SessionReport]) -> f64 {
    reports.iter().map(|r| r.summary.mean_psnr_db).sum::<f64>() / reports.len() as f64
}

fn village_sessions() -> Result<Sessions, String> {
    let start = Instant::now();
    let opts = FixtureOptions::for_kind(SceneKind::VillageToy);
    let scene = fixtures::village_toy(&opts);
    let inputs = SessionInputs::prepare(&scene, &CodecConfig::default(), 5).map_err(|e| e.to_string())?;
    let traces: Vec<NetworkTrace> = SEEDS
        .iter()
        .map(|&s| generate_trace(Profile::Leo, 300.0, s))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let run = |scheme| -> Result<Vec<SessionReport>, String> {
        SEEDS
            .iter()
            .zip(&traces)
            .map(|(&seed, trace)| simulate_session(&inputs, trace, &SessionConfig::new(scheme, seed)).map_err(|e| e.to_string()))
            .collect()
    };
    let recover = run(Scheme::Recover)?;
    let no_states = run(Scheme::NoStates)?;
    let reuse = run(Scheme::Reuse)?;
    Ok(Sessions {
        traces,
        recover,
        no_states,
        reuse,
        elapsed: start.elapsed(),
        inputs,
    })
}

fn criterion_7(s: &Sessions) -> Outcome {
    let (r, n, u) = (mean_psnr(&s.recover), mean_psnr(&s.no_states), mean_psnr(&s.reuse));
    let detail = format!(
        "recover {r:.3} dB > no-states {n:.3} dB > reuse {u:.3} dB over {} seeds, {:.1} s",
        SEEDS.len(),
        s.elapsed.as_secs_f64()
    );
    ensure!(r > n && n > u, "ordering violated: {detail}");
    ensure!(r - u > r - n, "recover's gain over reuse does not exceed its gain over no-states: {detail}");
    within(s.elapsed, 300.0)?;
    Ok(detail)
}

fn criterion_8(s: &Sessions) -> Outcome {
    let overhead = Profile::Leo.oracle_fec_overhead();
    ensure!((overhead - 0.7).abs() < 1e-12, "LEO oracle FEC overhead is {overhead}");
    let fec: Vec<SessionReport> = SEEDS
        .iter()
        .zip(&s.traces)
        .map(|(&seed, trace)| {
            simulate_session(&s.inputs, trace, &SessionConfig::new(Scheme::Fec(overhead), seed)).map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    let (r, f) = (mean_psnr(&s.recover), mean_psnr(&fec));
    ensure!(r >= f, "recover {r:.3} dB below FEC {f:.3} dB");
    let rec_extra: usize = s.recover.iter().map(|r| r.summary.extra_bytes).sum();
    let fec_extra: usize = fec.iter().map(|r| r.summary.extra_bytes).sum();
    ensure!(rec_extra == 0, "recovery sent {rec_extra} extra bytes");
    ensure!(fec_extra > rec_extra, "FEC sent no extra bytes");
    Ok(format!("recover {r:.3} dB >= FEC(70%) {f:.3} dB; extra bytes FEC {fec_extra} vs recover 0"))
}

fn criterion_9(s: &Sessions) -> Outcome {
    let sched = SchedulerConfig::default();
    ensure!(sched.timeout_ms == 80.0 - 22.0, "default timeout {} ms", sched.timeout_ms);
    let limit = sched.budget_ms + sched.frame_interval_ms;
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for report in s.recover.iter().chain(&s.no_states).chain(&s.reuse) {
        for rec in report.frames.iter().map(|r| r.outcome) {
            if matches!(rec.status, FrameStatus::PartialRecovered | FrameStatus::Predicted) {
                ensure!(rec.display_ms <= limit, "frame {} shown at {} ms", rec.frame_index, rec.display_ms);
                worst = worst.max(rec.display_ms);
                count += 1;
            }
        }
    }
    ensure!(count > 0, "no recovered frames to check");
    Ok(format!("{count} recovered frames, latest at {worst:.2} ms <= {limit:.2} ms; timeout 58 ms"))
}

// ---------------------------------------------------------------------------

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("readable run directory").flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).expect("inside").to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).expect("readable artifact"));
            }
        }
    }
    out
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut opts = FixtureOptions::for_kind(SceneKind::Pan);
    opts.frames = 30;
    opts.rgb_resolution = (160, 96);
    let scene = dir.path().join("scene.txt");
    cmd_scene_gen(SceneKind::Pan, &opts, &scene).map_err(|e| e.to_string())?;
    let lossy = dir.path().join("lossy.csv");
    let row = statecast::netsim::TraceRow {
        t_ms: 0.0,
        throughput_mbps: 30.0,
        loss_rate: 0.1,
        rtt_ms: 40.0,
    };
    NetworkTrace::constant("lossy", 10.0, row).save(&lossy).map_err(|e| e.to_string())?;
    let networks = [
        statecast::pipeline::NetworkSource::Profile {
            profile: Profile::Leo,
            seconds: 30.0,
        },
        statecast::pipeline::NetworkSource::File(lossy),
    ];
    let (mut artifacts, mut concealed) = (0, 0);
    for (i, network) in networks.iter().enumerate() {
        let mut runs = Vec::new();
        for name in ["a", "b"] {
            let out_dir = dir.path().join(format!("{name}{i}"));
            let mut cfg = RunConfig::new(&scene, &out_dir);
            cfg.seed = 7;
            cfg.network = network.clone();
            let out = cmd_pipeline(&cfg).map_err(|e| e.to_string())?;
            concealed += out.report.summary.predicted + out.report.summary.partial_recovered;
            runs.push(files(&out_dir));
        }
        ensure!(runs[0] == runs[1], "runs over {network:?} differ");
        artifacts += runs[0].len();
    }
    ensure!(concealed > 0, "no frame needed concealment");
    Ok(format!("{artifacts} artifacts byte-identical across repeated runs ({} concealed frames per run)", concealed / 2))
}

fn criterion_11() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for profile in Profile::ALL {
        let stats = profile.stats();
        for seed in SEEDS {
            let t = generate_trace(profile, 300.0, seed).map_err(|e| e.to_string())?;
            let thr = (t.mean_throughput() - stats.throughput_mbps).abs() / stats.throughput_mbps;
            let loss_pp = (t.mean_loss_rate() - stats.loss_rate).abs() * 100.0;
            ensure!(thr <= 0.15, "{} seed {seed}: throughput {:.2} Mbps", profile.name(), t.mean_throughput());
            ensure!(loss_pp <= 0.3, "{} seed {seed}: loss {:.3}%", profile.name(), t.mean_loss_rate() * 100.0);
            worst = (worst.0.max(thr), worst.1.max(loss_pp));
        }
    }
    Ok(format!(
        "4 profiles x {} seeds; worst throughput error {:.1}%, worst loss error {:.3} pp",
        SEEDS.len(),
        worst.0 * 100.0,
        worst.1
    ))
}

// ---------------------------------------------------------------------------

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1} s]"),
        Err(why) => println!("FAIL  {name}: {why} [{secs:.1} s]"),
    }
    result.is_ok()
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |name: &str| filter.as_deref().is_none_or(|f| name.contains(f));
    let mut ok = true;
    let simple: [(&str, fn() -> Outcome); 6] = [
        ("1 projection and state suite", criterion_1),
        ("2 codec oracle equivalence", criterion_2),
        ("3 lossless round trip", criterion_3),
        ("4 recovery identity chain", criterion_4),
        ("5 charbonnier gradient and enhancement fit", criterion_5),
        ("6 flow accuracy", criterion_6),
    ];
    for (name, f) in simple {
        if wanted(name) {
            ok &= run(name, f);
        }
    }
    let session_names = ["7 direction of effect", "8 fec comparison", "9 timing algebra"];
    if session_names.iter().any(|n| wanted(n)) {
        match catch_unwind(village_sessions) {
            Ok(Ok(s)) => {
                let checks: [fn(&Sessions) -> Outcome; 3] = [criterion_7, criterion_8, criterion_9];
                for (name, f) in session_names.into_iter().zip(checks) {
                    if wanted(name) {
                        ok &= run(name, || f(&s));
                    }
                }
            }
            other => {
                let why = match other {
                    Ok(Err(e)) => e,
                    _ => "session setup panicked".into(),
                };
                for name in session_names.into_iter().filter(|n| wanted(n)) {
                    println!("FAIL  {name}: {why}");
                }
                ok = false;
            }
        }
    }
    let tail: [(&str, fn() -> Outcome); 2] = [("10 determinism", criterion_10), ("11 trace statistics", criterion_11)];
    for (name, f) in tail {
        if wanted(name) {
            ok &= run(name, f);
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
