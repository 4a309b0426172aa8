//! Deterministic scene generators used by the CLI, tests and examples.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::geom::{Mat4, Vec3};
use crate::image::Rgb;
use crate::scene::{CameraPose, GameObject, Palette, SceneModel};

pub const DEFAULT_RGB_RESOLUTION: (usize, usize) = (480, 272);
/// Face tessellation of fixture boxes and ground grid resolution; dense
/// enough that downsampled game states still outline every object.
const BOX_SUBDIV: usize = 10;
const GROUND_CELLS: usize = 120;

const INPUT_PERIOD: usize = 6;
const TURN_RATE: f64 = 0.03;

pub const DEFAULT_STATE_RESOLUTION: (usize, usize) = (128, 64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Pan,
    Orbit,
    TwoMotion,
    VillageToy,
}

impl FromStr for SceneKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "pan" => Ok(Self::Pan),
            "orbit" => Ok(Self::Orbit),
            "two-motion" => Ok(Self::TwoMotion),
            "village_toy" | "village-toy" => Ok(Self::VillageToy),
            other => Err(Error::Config(format!("unknown scene kind {other:?}"))),
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pan => "pan",
            Self::Orbit => "orbit",
            Self::TwoMotion => "two-motion",
            Self::VillageToy => "village_toy",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixtureOptions {
    pub frames: usize,
    pub rgb_resolution: (usize, usize),
    pub state_resolution: (usize, usize),
    pub seed: u64,
}

impl FixtureOptions {
    pub fn for_kind(kind: SceneKind) -> Self {
        Self {
            frames: match kind {
                SceneKind::VillageToy => 300,
                _ => 60,
            },
            rgb_resolution: DEFAULT_RGB_RESOLUTION,
            state_resolution: DEFAULT_STATE_RESOLUTION,
            seed: 0,
        }
    }
}

pub fn generate(kind: SceneKind, opts: &FixtureOptions) -> SceneModel {
    match kind {
        SceneKind::Pan => pan(opts),
        SceneKind::Orbit => orbit(opts),
        SceneKind::TwoMotion => two_motion(opts),
        SceneKind::VillageToy => village_toy(opts),
    }
}

const COLORS: [Rgb; 16] = [
    [96, 160, 72],   // grass
    [200, 60, 50],   // red
    [60, 90, 200],   // blue
    [230, 200, 60],  // yellow
    [150, 90, 50],   // timber
    [220, 220, 220], // plaster
    [120, 60, 150],  // purple
    [40, 170, 170],  // teal
    [240, 140, 40],  // orange
    [90, 90, 100],   // slate
    [250, 120, 170], // pink
    [170, 230, 120], // lime
    [110, 40, 30],   // brick
    [30, 110, 60],   // pine
    [200, 170, 130], // sand
    [20, 40, 120],   // navy
];

fn default_palette() -> Palette {
    COLORS.iter().enumerate().map(|(i, &c)| (i as u32, c)).collect()
}

/// Axis-aligned unit cube `[-0.5, 0.5]^3`. `subdiv == 1` gives the minimal
/// 8-vertex, 12-triangle mesh; larger values tessellate each face into a
/// `subdiv x subdiv` grid so the game state sees more vertices.
pub fn cube_mesh(subdiv: usize) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    if subdiv <= 1 {
        let v = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { -0.5 } else { 0.5 },
                    if i & 2 == 0 { -0.5 } else { 0.5 },
                    if i & 4 == 0 { -0.5 } else { 0.5 },
                )
            })
            .collect();
        let t = vec![
            [0, 1, 3],
            [0, 3, 2],
            [4, 6, 7],
            [4, 7, 5],
            [0, 4, 5],
            [0, 5, 1],
            [2, 3, 7],
            [2, 7, 6],
            [0, 2, 6],
            [0, 6, 4],
            [1, 5, 7],
            [1, 7, 3],
        ];
        return (v, t);
    }
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    // (origin, u axis, v axis) for each face.
    let faces = [
        (Vec3::new(-0.5, -0.5, 0.5), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
        (Vec3::new(0.5, -0.5, -0.5), Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
        (Vec3::new(0.5, -0.5, 0.5), Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 1.0, 0.0)),
        (Vec3::new(-0.5, -0.5, -0.5), Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 0.0)),
        (Vec3::new(-0.5, 0.5, 0.5), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, -1.0)),
        (Vec3::new(-0.5, -0.5, -0.5), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)),
    ];
    let n = subdiv;
    for (origin, u, v) in faces {
        let base = verts.len() as u32;
        for j in 0..=n {
            for i in 0..=n {
                verts.push(origin + u * (i as f64 / n as f64) + v * (j as f64 / n as f64));
            }
        }
        let idx = |i: usize, j: usize| base + (j * (n + 1) + i) as u32;
        for j in 0..n {
            for i in 0..n {
                tris.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                tris.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
    }
    (verts, tris)
}

/// Flat `size x size` grid on the y = 0 plane centred at the origin.
pub fn ground_mesh(size: f64, cells: usize) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let mut verts = Vec::with_capacity((cells + 1) * (cells + 1));
    for j in 0..=cells {
        for i in 0..=cells {
            verts.push(Vec3::new(
                -size / 2.0 + size * i as f64 / cells as f64,
                0.0,
                -size / 2.0 + size * j as f64 / cells as f64,
            ));
        }
    }
    let idx = |i: usize, j: usize| (j * (cells + 1) + i) as u32;
    let mut tris = Vec::with_capacity(cells * cells * 2);
    for j in 0..cells {
        for i in 0..cells {
            tris.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            tris.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    (verts, tris)
}

fn boxed(id: u32, color: u32, center: Vec3, size: Vec3, subdiv: usize) -> GameObject {
    let (v, t) = cube_mesh(subdiv);
    let transform = Mat4::translation(center) * Mat4::scale(size);
    GameObject::new(id, color, v, t, vec![transform])
}

fn projection(opts: &FixtureOptions) -> Mat4 {
    let (w, h) = opts.rgb_resolution;
    Mat4::perspective(60f64.to_radians(), w as f64 / h as f64, 0.1, 80.0)
}

fn poses(views: impl IntoIterator<Item = Mat4>, proj: Mat4) -> Vec<CameraPose> {
    views
        .into_iter()
        .enumerate()
        .map(|(frame_index, view)| CameraPose {
            view,
            projection: proj,
            frame_index,
        })
        .collect()
}

fn scene(objects: Vec<GameObject>, camera_path: Vec<CameraPose>, opts: &FixtureOptions) -> SceneModel {
    SceneModel {
        objects,
        palette: default_palette(),
        camera_path,
        rgb_resolution: opts.rgb_resolution,
        state_resolution: opts.state_resolution,
    }
}

/// Jittered row of boxes along x, seen by a camera translating along +x at
/// constant velocity.
pub fn pan(opts: &FixtureOptions) -> SceneModel {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (gv, gt) = ground_mesh(80.0, GROUND_CELLS);
    let mut objects = vec![GameObject::new(0, 0, gv, gt, vec![])];
    for i in 0..14 {
        let x = -12.0 + i as f64 * 2.6 + rng.random_range(-0.4..0.4);
        let z = -7.0 - rng.random_range(0.0..4.0);
        let size = Vec3::new(rng.random_range(0.8..1.8), rng.random_range(1.0..3.5), rng.random_range(0.8..1.8));
        let color = 1 + (i as u32 % 15);
        objects.push(boxed(i as u32 + 1, color, Vec3::new(x, size.y / 2.0, z), size, BOX_SUBDIV));
    }
    let step = 0.12;
    let views = (0..opts.frames).map(|f| {
        let eye = Vec3::new(-4.0 + f as f64 * step, 1.6, 0.0);
        Mat4::look_at(eye, eye + Vec3::new(0.0, -0.15, -1.0), Vec3::new(0.0, 1.0, 0.0))
    });
    scene(objects, poses(views, projection(opts)), opts)
}

/// Camera circling a cluster of boxes while looking at its centre.
pub fn orbit(opts: &FixtureOptions) -> SceneModel {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (gv, gt) = ground_mesh(80.0, GROUND_CELLS);
    let mut objects = vec![GameObject::new(0, 0, gv, gt, vec![])];
    for i in 0..12 {
        let a = i as f64 / 12.0 * 2.0 * PI;
        let r = rng.random_range(1.0..4.0);
        let size = Vec3::new(rng.random_range(0.6..1.5), rng.random_range(0.8..3.0), rng.random_range(0.6..1.5));
        objects.push(boxed(i + 1, 1 + i % 15, Vec3::new(r * a.cos(), size.y / 2.0, r * a.sin()), size, BOX_SUBDIV));
    }
    let views = (0..opts.frames).map(|f| {
        let a = f as f64 * 0.02;
        let eye = Vec3::new(10.0 * a.sin(), 3.0, 10.0 * a.cos());
        Mat4::look_at(eye, Vec3::new(0.0, 0.8, 0.0), Vec3::new(0.0, 1.0, 0.0))
    });
    scene(objects, poses(views, projection(opts)), opts)
}

/// Static camera; the left group of boxes slides sideways while the right
/// group rises and falls, each with its own per-frame transforms.
pub fn two_motion(opts: &FixtureOptions) -> SceneModel {
    let (gv, gt) = ground_mesh(80.0, GROUND_CELLS);
    let mut objects = vec![GameObject::new(0, 0, gv, gt, vec![])];
    let (cv, ct) = cube_mesh(BOX_SUBDIV);
    let mut id = 1;
    for (group, xs) in [(0, [-4.0, -2.6]), (1, [2.2, 3.8])] {
        for (k, &x0) in xs.iter().enumerate() {
            let base = Vec3::new(x0, 1.0 + k as f64 * 0.8, -8.0 - k as f64);
            let transforms = (0..opts.frames)
                .map(|f| {
                    let t = f as f64;
                    let offset = if group == 0 {
                        Vec3::new(0.06 * t, 0.0, 0.0)
                    } else {
                        Vec3::new(0.0, 0.8 * (t * 0.1).sin(), 0.0)
                    };
                    Mat4::translation(base + offset) * Mat4::scale(Vec3::new(1.2, 1.2, 1.2))
                })
                .collect();
            objects.push(GameObject::new(id, 1 + id, cv.clone(), ct.clone(), transforms));
            id += 1;
        }
    }
    let eye = Vec3::new(0.0, 1.8, 2.0);
    let view = Mat4::look_at(eye, Vec3::new(0.0, 1.2, -8.0), Vec3::new(0.0, 1.0, 0.0));
    scene(objects, poses(std::iter::repeat_n(view, opts.frames), projection(opts)), opts)
}

/// A small village street: ground, 32 houses and 7 moving carts (40 objects).
/// The camera walks down the street with irregular speed and gaze changes so
/// that motion is not predictable from past frames alone.
pub fn village_toy(opts: &FixtureOptions) -> SceneModel {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_0f_7111a6e);
    let (gv, gt) = ground_mesh(90.0, GROUND_CELLS);
    let mut objects = vec![GameObject::new(0, 0, gv, gt, vec![])];
    let mut id = 1;
    for side in [-1.0, 1.0] {
        let mut z = 6.0;
        for _ in 0..16 {
            let depth = rng.random_range(2.0..4.0);
            let size = Vec3::new(rng.random_range(2.5..4.5), rng.random_range(2.0..6.0), depth);
            let x = side * (4.0 + size.x / 2.0 + rng.random_range(0.0..1.5));
            let center = Vec3::new(x, size.y / 2.0, z - depth / 2.0);
            let color = 1 + rng.random_range(0..15u32);
            objects.push(boxed(id, color, center, size, BOX_SUBDIV));
            id += 1;
            z -= depth + rng.random_range(0.3..1.5);
        }
    }
    for _ in 0..7 {
        let size = Vec3::new(rng.random_range(0.8..1.4), rng.random_range(0.7..1.2), rng.random_range(1.2..2.0));
        let lane = rng.random_range(-2.5..2.5);
        let z0 = rng.random_range(-40.0..0.0);
        let speed = rng.random_range(0.04..0.15) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let sway = rng.random_range(0.0..1.5);
        let phase = rng.random_range(0.0..2.0 * PI);
        let color = 1 + rng.random_range(0..15u32);
        let (cv, ct) = cube_mesh(BOX_SUBDIV);
        let transforms = (0..opts.frames)
            .map(|f| {
                let t = f as f64;
                let center = Vec3::new(lane + sway * (t * 0.05 + phase).sin(), size.y / 2.0, z0 + speed * t);
                Mat4::translation(center) * Mat4::scale(size)
            })
            .collect();
        objects.push(GameObject::new(id, color, cv, ct, transforms));
        id += 1;
    }

    // Player-style input: speed and turn rate get a fresh random impulse
    // every few frames and react quickly, so motion changes frame to frame.
    let mut views = Vec::with_capacity(opts.frames);
    let (mut z, mut x, mut yaw, mut pitch) = (8.0, 0.0, 0.0f64, -0.08f64);
    let (mut speed, mut yaw_rate) = (0.1, 0.0);
    let (mut target_speed, mut target_yaw_rate) = (0.1, 0.0);
    for f in 0..opts.frames {
        if f % INPUT_PERIOD == 0 {
            target_speed = rng.random_range(0.0..0.3);
            target_yaw_rate = rng.random_range(-TURN_RATE..TURN_RATE) - yaw * 0.05;
        }
        speed += (target_speed - speed) * 0.6;
        yaw_rate += (target_yaw_rate - yaw_rate) * 0.6;
        yaw += yaw_rate;
        pitch = (pitch + rng.random_range(-0.004..0.004)).clamp(-0.2, 0.05);
        z -= speed * yaw.cos();
        x = (x - speed * yaw.sin()).clamp(-2.5, 2.5);
        let eye = Vec3::new(x, 1.7 + 0.03 * (f as f64 * 0.4).sin(), z);
        let dir = Vec3::new(-yaw.sin() * pitch.cos(), pitch.sin(), -yaw.cos() * pitch.cos());
        views.push(Mat4::look_at(eye, eye + dir, Vec3::new(0.0, 1.0, 0.0)));
    }
    scene(objects, poses(views, projection(opts)), opts)
}
