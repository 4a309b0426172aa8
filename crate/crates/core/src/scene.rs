//! Synthetic game world and ground-truth rasterizer.
//!
//! Scene files are line-oriented text:
//!
//! ```text
//! # comment
//! resolution <W> <H> <w> <h>
//! palette <idx> <r> <g> <b>
//! object <id> <color_idx>
//! v <x> <y> <z>
//! t <i> <j> <k>
//! T <16 floats, row-major>
//! aabb <minx> <miny> <minz> <maxx> <maxy> <maxz>
//! camera <16 floats view> <16 floats projection>
//! ```
//!
//! `v`, `t`, `T` and `aabb` records belong to the most recent `object`. An
//! object with a single `T` keeps that transform for every frame; an object
//! with one `T` per camera pose moves, the n-th record applying to frame n.
//! Without any `T` the transform is the identity.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::{fs, io};

use crate::error::{Error, Result};
use crate::geom::{Mat4, Vec3, Vec4};
use crate::image::{Rgb, RgbFrame, GRAY};

/// Shading distance used when the projection carries no far plane.
pub const DEFAULT_SHADE_FAR: f64 = 100.0;

/// Clip-space `w` below which geometry is clipped away before the divide.
const MIN_CLIP_W: f64 = 1e-6;

/// Colour lookup from an object's color index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Palette(BTreeMap<u32, Rgb>);

impl Palette {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, index: u32, color: Rgb) {
        self.0.insert(index, color);
    }

    pub fn get(&self, index: u32) -> Option<Rgb> {
        self.0.get(&index).copied()
    }

    pub fn contains(&self, index: u32) -> bool {
        self.0.contains_key(&index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Rgb)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(u32, Rgb)> for Palette {
    fn from_iter<I: IntoIterator<Item = (u32, Rgb)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points(points: &[Vec3]) -> Option<Self> {
        let first = *points.first()?;
        let (min, max) = points
            .iter()
            .fold((first, first), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        Some(Self { min, max })
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }
}

/// A rigid object. Vertices are in local space and never change after load.
#[derive(Debug, Clone, PartialEq)]
pub struct GameObject {
    pub id: u32,
    pub color_index: u32,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// One transform for a static object, or one per camera pose.
    pub transforms: Vec<Mat4>,
    pub aabb: Aabb,
}

impl GameObject {
    /// Builds an object and computes its bounding box. Panics on an empty
    /// vertex list; use [`load_scene`] for untrusted input.
    pub fn new(id: u32, color_index: u32, vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, transforms: Vec<Mat4>) -> Self {
        let aabb = Aabb::from_points(&vertices).expect("object without vertices");
        Self {
            id,
            color_index,
            vertices,
            triangles,
            transforms,
            aabb,
        }
    }

    /// Local-to-world transform at `frame`.
    pub fn transform_at(&self, frame: usize) -> Mat4 {
        match self.transforms.len() {
            0 => Mat4::IDENTITY,
            1 => self.transforms[0],
            n => self.transforms[frame.min(n - 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub view: Mat4,
    pub projection: Mat4,
    pub frame_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    pub objects: Vec<GameObject>,
    pub palette: Palette,
    pub camera_path: Vec<CameraPose>,
    pub rgb_resolution: (usize, usize),
    pub state_resolution: (usize, usize),
}

impl SceneModel {
    pub fn frame_count(&self) -> usize {
        self.camera_path.len()
    }

    pub fn pose(&self, frame: usize) -> Result<&CameraPose> {
        self.camera_path.get(frame).ok_or(Error::FrameOutOfRange {
            frame,
            len: self.camera_path.len(),
        })
    }

    /// Far distance used for depth attenuation at `frame`.
    pub fn shade_far(&self, frame: usize) -> f64 {
        self.camera_path
            .get(frame)
            .and_then(|p| p.projection.far_plane())
            .unwrap_or(DEFAULT_SHADE_FAR)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.camera_path.is_empty() {
            return fail("camera path is empty".into());
        }
        let (rw, rh) = self.rgb_resolution;
        let (sw, sh) = self.state_resolution;
        if rw == 0 || rh == 0 || sw == 0 || sh == 0 {
            return fail("resolution must be positive".into());
        }
        if sw > rw || sh > rh {
            return fail(format!("state resolution {sw}x{sh} exceeds rgb resolution {rw}x{rh}"));
        }
        let mut ids = HashSet::new();
        for obj in &self.objects {
            if !ids.insert(obj.id) {
                return fail(format!("duplicate object id {}", obj.id));
            }
            if !self.palette.contains(obj.color_index) {
                return fail(format!("unknown color index {} (object {})", obj.color_index, obj.id));
            }
            if obj.vertices.is_empty() {
                return fail(format!("object {} has no vertices", obj.id));
            }
            if !obj.vertices.iter().all(Vec3::is_finite) {
                return fail(format!("object {} has a non-finite vertex", obj.id));
            }
            let n = obj.vertices.len() as u32;
            if let Some(t) = obj.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
                return fail(format!("object {} triangle {t:?} indexes past {n} vertices", obj.id));
            }
            if !obj.vertices.iter().all(|&v| obj.aabb.contains(v)) {
                return fail(format!("object {} aabb does not enclose its vertices", obj.id));
            }
            let nt = obj.transforms.len();
            if nt > 1 && nt != self.camera_path.len() {
                return fail(format!(
                    "object {} has {nt} transforms for {} camera poses",
                    obj.id,
                    self.camera_path.len()
                ));
            }
            if !obj.transforms.iter().all(Mat4::is_finite) {
                return fail(format!("object {} has a non-finite transform", obj.id));
            }
        }
        for (i, pose) in self.camera_path.iter().enumerate() {
            if !pose.view.is_finite() || !pose.projection.is_finite() {
                return fail(format!("camera {i} has non-finite entries"));
            }
            if pose.projection.inverse().is_none() {
                return fail(format!("camera {i} projection is singular"));
            }
        }
        Ok(())
    }
}

fn parse_floats<const N: usize>(fields: &[&str], line: usize) -> Result<[f64; N]> {
    if fields.len() != N {
        return Err(Error::Parse {
            line,
            message: format!("expected {N} numbers, found {}", fields.len()),
        });
    }
    let mut out = [0.0f64; N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f.parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("invalid number {f:?}"),
        })?;
        if !o.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite number {f:?}"),
            });
        }
    }
    Ok(out)
}

fn parse_ints<const N: usize>(fields: &[&str], line: usize) -> Result<[u32; N]> {
    if fields.len() != N {
        return Err(Error::Parse {
            line,
            message: format!("expected {N} integers, found {}", fields.len()),
        });
    }
    let mut out = [0; N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid integer {f:?}"),
        })?;
    }
    Ok(out)
}

struct PendingObject {
    id: u32,
    color_index: u32,
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    transforms: Vec<Mat4>,
    aabb: Option<Aabb>,
}

/// Parses a scene from its text form and validates it.
pub fn parse_scene(text: &str) -> Result<SceneModel> {
    let mut palette = Palette::new();
    let mut pending: Vec<PendingObject> = Vec::new();
    let mut cameras = Vec::new();
    let mut resolution = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let (keyword, args) = (fields[0], &fields[1..]);
        fn current<'a>(pending: &'a mut [PendingObject], keyword: &str, line: usize) -> Result<&'a mut PendingObject> {
            pending.last_mut().ok_or(Error::Parse {
                line,
                message: format!("`{keyword}` record before any `object`"),
            })
        }
        match keyword {
            "resolution" => {
                let [w, h, sw, sh] = parse_ints::<4>(args, line)?;
                resolution = Some(((w as usize, h as usize), (sw as usize, sh as usize)));
            }
            "palette" => {
                let [idx, r, g, b] = parse_ints::<4>(args, line)?;
                if r > 255 || g > 255 || b > 255 {
                    return Err(Error::Parse {
                        line,
                        message: "palette component above 255".into(),
                    });
                }
                palette.insert(idx, [r as u8, g as u8, b as u8]);
            }
            "object" => {
                let [id, color_index] = parse_ints::<2>(args, line)?;
                pending.push(PendingObject {
                    id,
                    color_index,
                    vertices: Vec::new(),
                    triangles: Vec::new(),
                    transforms: Vec::new(),
                    aabb: None,
                });
            }
            "v" => {
                let [x, y, z] = parse_floats::<3>(args, line)?;
                current(&mut pending, keyword, line)?.vertices.push(Vec3::new(x, y, z));
            }
            "t" => {
                let tri = parse_ints::<3>(args, line)?;
                current(&mut pending, keyword, line)?.triangles.push(tri);
            }
            "T" => {
                let m = parse_floats::<16>(args, line)?;
                current(&mut pending, keyword, line)?.transforms.push(Mat4::from_row_major(m));
            }
            "aabb" => {
                let [a, b, c, d, e, f] = parse_floats::<6>(args, line)?;
                current(&mut pending, keyword, line)?.aabb = Some(Aabb {
                    min: Vec3::new(a, b, c),
                    max: Vec3::new(d, e, f),
                });
            }
            "camera" => {
                let m = parse_floats::<32>(args, line)?;
                let mut view = [0.0; 16];
                let mut proj = [0.0; 16];
                view.copy_from_slice(&m[..16]);
                proj.copy_from_slice(&m[16..]);
                cameras.push(CameraPose {
                    view: Mat4::from_row_major(view),
                    projection: Mat4::from_row_major(proj),
                    frame_index: cameras.len(),
                });
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown record `{other}`"),
                })
            }
        }
    }

    let (rgb_resolution, state_resolution) = resolution.ok_or_else(|| Error::Validation("missing `resolution` record".into()))?;
    let mut objects = Vec::with_capacity(pending.len());
    for p in pending {
        let aabb = match p.aabb {
            Some(b) => b,
            None => Aabb::from_points(&p.vertices).ok_or_else(|| Error::Validation(format!("object {} has no vertices", p.id)))?,
        };
        objects.push(GameObject {
            id: p.id,
            color_index: p.color_index,
            vertices: p.vertices,
            triangles: p.triangles,
            transforms: p.transforms,
            aabb,
        });
    }
    let scene = SceneModel {
        objects,
        palette,
        camera_path: cameras,
        rgb_resolution,
        state_resolution,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneModel> {
    parse_scene(&fs::read_to_string(path)?)
}

/// Serializes a scene. Floats use the shortest representation that parses
/// back to the same value, so `parse_scene(write_scene(s)) == s`.
pub fn scene_to_string(scene: &SceneModel) -> String {
    let mut out = String::new();
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let (rw, rh) = scene.rgb_resolution;
    let (sw, sh) = scene.state_resolution;
    let _ = writeln!(out, "resolution {rw} {rh} {sw} {sh}");
    for (idx, [r, g, b]) in scene.palette.iter() {
        let _ = writeln!(out, "palette {idx} {r} {g} {b}");
    }
    for obj in &scene.objects {
        let _ = writeln!(out, "object {} {}", obj.id, obj.color_index);
        let a = obj.aabb;
        let _ = writeln!(out, "aabb {}", join(&[a.min.x, a.min.y, a.min.z, a.max.x, a.max.y, a.max.z]));
        for v in &obj.vertices {
            let _ = writeln!(out, "v {}", join(&[v.x, v.y, v.z]));
        }
        for t in &obj.triangles {
            let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
        }
        for m in &obj.transforms {
            let _ = writeln!(out, "T {}", join(&m.to_row_major()));
        }
    }
    for pose in &scene.camera_path {
        let _ = writeln!(out, "camera {} {}", join(&pose.view.to_row_major()), join(&pose.projection.to_row_major()));
    }
    out
}

pub fn save_scene(scene: &SceneModel, path: impl AsRef<Path>) -> Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(scene_to_string(scene).as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Attenuation applied to palette colours at view depth `depth`.
pub fn shade_factor(depth: f64, far: f64) -> f64 {
    (1.0 - depth / far).clamp(0.2, 1.0)
}

pub fn shade(color: Rgb, depth: f64, far: f64) -> Rgb {
    let f = shade_factor(depth, far);
    color.map(|c| (c as f64 * f).round() as u8)
}

#[derive(Debug, Clone, Copy)]
struct ClipVertex {
    clip: Vec4,
    depth: f64,
}

/// A triangle after projection to screen space, ready for coverage tests.
#[derive(Debug, Clone, Copy)]
pub struct ScreenTriangle {
    /// Screen positions (x right, y down) in pixels.
    pos: [(f64, f64); 3],
    inv_w: [f64; 3],
    depth_over_w: [f64; 3],
    area: f64,
    pub color: Rgb,
}

impl ScreenTriangle {
    fn new(v: [ClipVertex; 3], width: usize, height: usize, color: Rgb) -> Option<Self> {
        let mut pos = [(0.0, 0.0); 3];
        let mut inv_w = [0.0; 3];
        let mut depth_over_w = [0.0; 3];
        for i in 0..3 {
            let c = v[i].clip;
            let iw = 1.0 / c.w;
            let (nx, ny) = (c.x * iw, c.y * iw);
            pos[i] = ((nx + 1.0) * 0.5 * width as f64, (1.0 - ny) * 0.5 * height as f64);
            inv_w[i] = iw;
            depth_over_w[i] = v[i].depth * iw;
        }
        let mut tri = Self {
            pos,
            inv_w,
            depth_over_w,
            area: 0.0,
            color,
        };
        tri.area = edge(pos[0], pos[1], pos[2]);
        if !tri.area.is_finite() || tri.area == 0.0 {
            return None;
        }
        if tri.area < 0.0 {
            tri.pos.swap(1, 2);
            tri.inv_w.swap(1, 2);
            tri.depth_over_w.swap(1, 2);
            tri.area = -tri.area;
        }
        Some(tri)
    }

    /// Pixel bounds `[x0, x1) x [y0, y1)` whose centres may be covered.
    fn pixel_bounds(&self, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let xs = self.pos.map(|p| p.0);
        let ys = self.pos.map(|p| p.1);
        let lo = |v: [f64; 3], n: usize| (v.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5).ceil().clamp(0.0, n as f64) as usize;
        let hi = |v: [f64; 3], n: usize| ((v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 0.5).floor() + 1.0).clamp(0.0, n as f64) as usize;
        (lo(xs, width), hi(xs, width), lo(ys, height), hi(ys, height))
    }

    /// View-space depth at the centre of pixel `(x, y)` if the triangle
    /// covers it under the top-left fill rule.
    pub fn coverage(&self, x: usize, y: usize) -> Option<f64> {
        let p = (x as f64 + 0.5, y as f64 + 0.5);
        let mut bary = [0.0; 3];
        for i in 0..3 {
            let a = self.pos[(i + 1) % 3];
            let b = self.pos[(i + 2) % 3];
            let e = canonical_edge(a, b, p);
            if e < 0.0 || (e == 0.0 && !is_top_left(a, b)) {
                return None;
            }
            bary[i] = e / self.area;
        }
        let inv_w: f64 = (0..3).map(|i| bary[i] * self.inv_w[i]).sum();
        let dw: f64 = (0..3).map(|i| bary[i] * self.depth_over_w[i]).sum();
        Some(dw / inv_w)
    }
}

#[inline]
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Edge function evaluated from the lexicographically smaller endpoint so the
/// two triangles sharing an edge see exactly negated values.
#[inline]
fn canonical_edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    if (a.0, a.1) <= (b.0, b.1) {
        edge(a, b, p)
    } else {
        -edge(b, a, p)
    }
}

/// Top-left rule for a positively oriented triangle in y-down screen space.
#[inline]
fn is_top_left(a: (f64, f64), b: (f64, f64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

/// Sutherland-Hodgman clip of a triangle against `w >= MIN_CLIP_W`.
fn clip_polygon(tri: [ClipVertex; 3]) -> Vec<ClipVertex> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let (da, db) = (a.clip.w - MIN_CLIP_W, b.clip.w - MIN_CLIP_W);
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            let t = da / (da - db);
            out.push(ClipVertex {
                clip: a.clip.lerp(b.clip, t),
                depth: a.depth + (b.depth - a.depth) * t,
            });
        }
    }
    out
}

/// Projects every triangle of the scene at `frame`, in draw order.
pub fn screen_triangles(scene: &SceneModel, frame: usize) -> Result<Vec<ScreenTriangle>> {
    let pose = scene.pose(frame)?;
    let (width, height) = scene.rgb_resolution;
    let mut out = Vec::new();
    for obj in &scene.objects {
        let base = scene
            .palette
            .get(obj.color_index)
            .ok_or_else(|| Error::Validation(format!("unknown color index {}", obj.color_index)))?;
        let model_view = pose.view * obj.transform_at(frame);
        let projected: Vec<ClipVertex> = obj
            .vertices
            .iter()
            .map(|&v| {
                let view = model_view.transform_point(v);
                ClipVertex {
                    clip: pose.projection.transform(view),
                    depth: -view.z,
                }
            })
            .collect();
        for t in &obj.triangles {
            let tri = t.map(|i| projected[i as usize]);
            let poly = if tri.iter().all(|v| v.clip.w >= MIN_CLIP_W) {
                tri.to_vec()
            } else {
                clip_polygon(tri)
            };
            for k in 1..poly.len().saturating_sub(1) {
                if let Some(st) = ScreenTriangle::new([poly[0], poly[k], poly[k + 1]], width, height, base) {
                    out.push(st);
                }
            }
        }
    }
    Ok(out)
}

/// Flat-shaded, z-buffered render of `frame`. Each pixel takes the palette
/// colour of the nearest covering triangle attenuated by view depth; the
/// background is mid-gray. Output is a pure function of its inputs.
pub fn render_ground_truth(scene: &SceneModel, frame: usize) -> Result<RgbFrame> {
    let (width, height) = scene.rgb_resolution;
    let far = scene.shade_far(frame);
    let mut frame_buf = RgbFrame::filled(width, height, GRAY);
    let mut zbuf = vec![f64::INFINITY; width * height];
    for tri in screen_triangles(scene, frame)? {
        let (x0, x1, y0, y1) = tri.pixel_bounds(width, height);
        for y in y0..y1 {
            for x in x0..x1 {
                if let Some(depth) = tri.coverage(x, y) {
                    let slot = &mut zbuf[y * width + x];
                    if depth < *slot {
                        *slot = depth;
                        frame_buf.set(x, y, shade(tri.color, depth, far));
                    }
                }
            }
        }
    }
    Ok(frame_buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn tiny_scene(objects: Vec<GameObject>, view: Mat4) -> SceneModel {
        let mut palette = Palette::new();
        palette.insert(0, [255, 0, 0]);
        palette.insert(1, [0, 0, 255]);
        SceneModel {
            objects,
            palette,
            camera_path: vec![CameraPose {
                view,
                projection: Mat4::perspective(1.0, 1.0, 0.1, 100.0),
                frame_index: 0,
            }],
            rgb_resolution: (32, 32),
            state_resolution: (16, 16),
        }
    }

    const MINIMAL: &str = "\
# one cube, two poses
resolution 32 32 16 16
palette 3 200 10 10
object 1 3
v -1 -1 -1
v 1 -1 -1
v -1 1 -1
v 1 1 -1
v -1 -1 1
v 1 -1 1
v -1 1 1
v 1 1 1
t 0 1 3
t 0 3 2
t 4 6 7
t 4 7 5
t 0 4 5
t 0 5 1
t 2 3 7
t 2 7 6
t 0 2 6
t 0 6 4
t 1 5 7
t 1 7 3
camera 1 0 0 0 0 1 0 0 0 0 1 -5 0 0 0 1  1 0 0 0 0 1 0 0 0 0 -1.002 -0.2002 0 0 -1 0
camera 1 0 0 0.5 0 1 0 0 0 0 1 -5 0 0 0 1  1 0 0 0 0 1 0 0 0 0 -1.002 -0.2002 0 0 -1 0
";

    #[test]
    fn minimal_scene_parses() {
        let s = parse_scene(MINIMAL).unwrap();
        assert_eq!(s.objects.len(), 1);
        assert_eq!(s.objects[0].vertices.len(), 8);
        assert_eq!(s.objects[0].triangles.len(), 12);
        assert_eq!(s.camera_path.len(), 2);
        assert_eq!(s.objects[0].aabb.min, Vec3::new(-1.0, -1.0, -1.0));
    }

    #[test]
    fn unknown_color_index_rejected() {
        let text = MINIMAL.replace("object 1 3", "object 1 7");
        let err = parse_scene(&text).unwrap_err();
        assert!(err.to_string().contains("unknown color index"), "{err}");
    }

    #[test]
    fn parse_error_names_line() {
        let text = MINIMAL.replace("v 1 1 1", "v 1 one 1");
        match parse_scene(&text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 12),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn triangle_index_out_of_range_rejected() {
        let text = MINIMAL.replace("t 1 7 3", "t 1 8 3");
        assert!(matches!(parse_scene(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn text_roundtrip() {
        let s = parse_scene(MINIMAL).unwrap();
        assert_eq!(parse_scene(&scene_to_string(&s)).unwrap(), s);
    }

    #[test]
    fn empty_world_is_gray() {
        let s = tiny_scene(vec![], Mat4::IDENTITY);
        let f = render_ground_truth(&s, 0).unwrap();
        assert!(f.as_raw().iter().all(|&b| b == 128));
    }

    #[test]
    fn frame_out_of_range() {
        let s = tiny_scene(vec![], Mat4::IDENTITY);
        assert!(matches!(render_ground_truth(&s, 1), Err(Error::FrameOutOfRange { .. })));
    }

    #[test]
    fn centered_cube_is_red_corners_gray() {
        let cube = fixtures::cube_mesh(1);
        let obj = GameObject::new(0, 0, cube.0, cube.1, vec![Mat4::translation(Vec3::new(0.0, 0.0, -5.0))]);
        let s = tiny_scene(vec![obj], Mat4::IDENTITY);
        let f = render_ground_truth(&s, 0).unwrap();
        let c = f.get(16, 16);
        assert!(c[0] > 150 && c[1] == 0 && c[2] == 0, "{c:?}");
        for (x, y) in [(0, 0), (31, 0), (0, 31), (31, 31)] {
            assert_eq!(f.get(x, y), GRAY);
        }
    }

    #[test]
    fn nearer_object_occludes() {
        let cube = fixtures::cube_mesh(1);
        let near = GameObject::new(0, 1, cube.0.clone(), cube.1.clone(), vec![Mat4::translation(Vec3::new(0.3, 0.0, -4.0))]);
        let far = GameObject::new(1, 0, cube.0, cube.1, vec![Mat4::translation(Vec3::new(0.0, 0.0, -7.0))]);
        // Far object drawn last must still lose the depth test.
        let s = tiny_scene(vec![near, far], Mat4::IDENTITY);
        let f = render_ground_truth(&s, 0).unwrap();
        let c = f.get(17, 16);
        assert!(c[2] > 100 && c[0] == 0, "{c:?}");
    }

    #[test]
    fn shared_edge_covers_each_pixel_once() {
        // A quad split along its diagonal; every pixel centre inside must be
        // claimed by exactly one of the two triangles.
        let verts = vec![Vec3::new(-0.6, -0.6, -2.0), Vec3::new(0.6, -0.6, -2.0), Vec3::new(0.6, 0.6, -2.0), Vec3::new(-0.6, 0.6, -2.0)];
        let obj = GameObject::new(0, 0, verts, vec![[0, 1, 2], [0, 2, 3]], vec![]);
        let mut s = tiny_scene(vec![obj], Mat4::IDENTITY);
        s.camera_path[0].projection = Mat4::IDENTITY;
        let tris = screen_triangles(&s, 0).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let hits = tris.iter().filter(|t| t.coverage(x, y).is_some()).count();
                let inside = (6..26).contains(&x) && (6..26).contains(&y);
                assert_eq!(hits, usize::from(inside), "pixel ({x},{y})");
            }
        }
    }
}
