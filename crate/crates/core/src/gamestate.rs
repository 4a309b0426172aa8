//! Game-state extraction: a sparse 2D projection of visible object vertices
//! computed without rasterizing the scene.
//!
//! Per frame, objects are culled by testing their world-space bounding box
//! against the camera frustum. Every `k`-th vertex of each surviving object is
//! pushed through `P * V * T`, divided by `w`, filtered to the screen and
//! binned into a `w x h` grid. When two vertices share a cell the nearer one
//! wins, and the cell stores the object's color index rather than a colour.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;
use std::{fs, io};

use crate::error::{Error, Result};
use crate::geom::{Mat4, Vec3};
use crate::image::{GrayImage, RgbFrame, BLACK};
use crate::scene::{Aabb, Palette, SceneModel};

pub const DEFAULT_DOWNSAMPLE: usize = 5;
pub const MIN_STATE_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateCell {
    pub color_index: u32,
    /// Positive view-space depth of the winning vertex.
    pub depth: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameStateFrame {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Option<StateCell>>,
    pub frame_index: usize,
    pub downsample: usize,
}

impl GameStateFrame {
    pub fn empty(width: usize, height: usize, frame_index: usize, downsample: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![None; width * height],
            frame_index,
            downsample,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn cell(&self, x: usize, y: usize) -> Option<StateCell> {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, cell: Option<StateCell>) {
        self.cells[y * self.width + x] = cell;
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Color indices as PGM samples: 0 for empty, `index + 1` otherwise.
    pub fn to_index_image(&self) -> GrayImage {
        let data: Vec<u16> = self
            .cells
            .iter()
            .map(|c| c.map_or(0, |c| (c.color_index + 1).min(u16::MAX as u32) as u16))
            .collect();
        let max = data.iter().copied().max().unwrap_or(0);
        GrayImage {
            width: self.width,
            height: self.height,
            maxval: if max <= 255 { 255 } else { u16::MAX },
            data,
        }
    }

    /// Row-major little-endian f32 depths; empty cells are 0.
    pub fn write_depth(&self, mut w: impl Write) -> io::Result<()> {
        let mut buf = Vec::with_capacity(self.cells.len() * 4);
        for c in &self.cells {
            buf.extend_from_slice(&c.map_or(0.0f32, |c| c.depth).to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn save(&self, pgm: impl AsRef<Path>, depth: impl AsRef<Path>) -> Result<()> {
        self.to_index_image().save(pgm)?;
        let mut f = io::BufWriter::new(fs::File::create(depth)?);
        self.write_depth(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn from_parts(index: &GrayImage, mut depth: impl Read, frame_index: usize, downsample: usize) -> Result<Self> {
        let n = index.width * index.height;
        let mut raw = vec![0u8; n * 4];
        depth.read_exact(&mut raw)?;
        let cells = index
            .data
            .iter()
            .zip(raw.chunks_exact(4))
            .map(|(&idx, d)| {
                (idx > 0).then(|| StateCell {
                    color_index: idx as u32 - 1,
                    depth: f32::from_le_bytes([d[0], d[1], d[2], d[3]]),
                })
            })
            .collect();
        Ok(Self {
            width: index.width,
            height: index.height,
            cells,
            frame_index,
            downsample,
        })
    }

    pub fn load(pgm: impl AsRef<Path>, depth: impl AsRef<Path>, frame_index: usize, downsample: usize) -> Result<Self> {
        let index = GrayImage::load(pgm)?;
        Self::from_parts(&index, fs::File::open(depth)?, frame_index, downsample)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilitySet {
    pub frame_index: usize,
    pub visible_object_ids: BTreeSet<u32>,
}

/// Where a single vertex lands on the state grid, if anywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedVertex {
    pub x: usize,
    pub y: usize,
    pub depth: f64,
}

/// Projects a local-space vertex with the object's `MVP` and `MV` matrices.
/// Vertices behind the camera or outside NDC `[-1, 1]` are dropped, as are
/// points landing exactly on the right or bottom screen edge.
pub fn project_vertex(mvp: &Mat4, model_view: &Mat4, v: Vec3, (w, h): (usize, usize)) -> Option<ProjectedVertex> {
    let clip = mvp.transform_point(v);
    let depth = -model_view.transform_point(v).z;
    if clip.w <= 0.0 || depth <= 0.0 {
        return None;
    }
    let nx = clip.x / clip.w;
    let ny = clip.y / clip.w;
    if !(-1.0..=1.0).contains(&nx) || !(-1.0..=1.0).contains(&ny) {
        return None;
    }
    let x = ((nx + 1.0) * 0.5 * w as f64).floor() as usize;
    let y = ((1.0 - ny) * 0.5 * h as f64).floor() as usize;
    (x < w && y < h).then_some(ProjectedVertex { x, y, depth })
}

fn world_aabb(local: &Aabb, transform: &Mat4) -> Aabb {
    let pts: Vec<Vec3> = local.corners().iter().map(|&c| transform.transform_point(c).truncate()).collect();
    Aabb::from_points(&pts).expect("eight corners")
}

/// Conservative frustum test: an object is rejected only when every corner of
/// its world-space AABB lies outside the same clip half-space.
pub fn frustum_cull(scene: &SceneModel, frame: usize) -> Result<VisibilitySet> {
    let pose = scene.pose(frame)?;
    let view_proj = pose.projection * pose.view;
    let mut visible = BTreeSet::new();
    for obj in &scene.objects {
        let bounds = world_aabb(&obj.aabb, &obj.transform_at(frame));
        let corners: Vec<(f64, [f64; 4])> = bounds
            .corners()
            .iter()
            .map(|&c| {
                let clip = view_proj.transform_point(c);
                let depth = -pose.view.transform_point(c).z;
                (depth, [clip.x, clip.y, clip.w, 0.0])
            })
            .collect();
        let all = |pred: &dyn Fn(f64, &[f64; 4]) -> bool| corners.iter().all(|(d, c)| pred(*d, c));
        let outside = all(&|_, c| c[2] <= 0.0)
            || all(&|d, _| d <= 0.0)
            || all(&|_, c| c[0] > c[2])
            || all(&|_, c| c[0] < -c[2])
            || all(&|_, c| c[1] > c[2])
            || all(&|_, c| c[1] < -c[2]);
        if !outside {
            visible.insert(obj.id);
        }
    }
    Ok(VisibilitySet {
        frame_index: frame,
        visible_object_ids: visible,
    })
}

/// Extracts the game state for `frame` at `resolution`, sampling every `k`-th
/// vertex of each visible object (starting at index 0).
pub fn extract_state(scene: &SceneModel, frame: usize, k: usize, resolution: (usize, usize)) -> Result<GameStateFrame> {
    let (w, h) = resolution;
    if w < MIN_STATE_DIM || h < MIN_STATE_DIM {
        return Err(Error::InvalidResolution {
            width: w,
            height: h,
            reason: "game state must be at least 8x8",
        });
    }
    if k == 0 {
        return Err(Error::Config("downsample ratio must be at least 1".into()));
    }
    let pose = scene.pose(frame)?;
    let visible = frustum_cull(scene, frame)?;
    let mut state = GameStateFrame::empty(w, h, frame, k);
    let mut best = vec![f64::INFINITY; w * h];
    for obj in scene.objects.iter().filter(|o| visible.visible_object_ids.contains(&o.id)) {
        let transform = obj.transform_at(frame);
        let model_view = pose.view * transform;
        let mvp = pose.projection * pose.view * transform;
        for &v in obj.vertices.iter().step_by(k) {
            if let Some(p) = project_vertex(&mvp, &model_view, v, resolution) {
                let i = p.y * w + p.x;
                if p.depth < best[i] {
                    best[i] = p.depth;
                    state.cells[i] = Some(StateCell {
                        color_index: obj.color_index,
                        depth: p.depth as f32,
                    });
                }
            }
        }
    }
    Ok(state)
}

/// Colours each occupied cell with its palette entry; empty cells are black.
pub fn state_to_image(state: &GameStateFrame, palette: &Palette) -> RgbFrame {
    RgbFrame::from_fn(state.width, state.height, |x, y| {
        state
            .cell(x, y)
            .and_then(|c| palette.get(c.color_index))
            .unwrap_or(BLACK)
    })
}
