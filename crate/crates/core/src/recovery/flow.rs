//! Coarse-to-fine Lucas-Kanade flow between two small images.
//!
//! Flow follows the backward-warp convention: `curr(x) ~ prev(x - flow(x))`.

use crate::error::{Error, Result};
use crate::gamestate::{state_to_image, GameStateFrame};
use crate::image::RgbFrame;
use crate::metrics::{gaussian_kernel, luma};
use crate::scene::Palette;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowField {
    pub fn zero(width: usize, height: usize) -> Self {
        Self::uniform(width, height, 0.0, 0.0)
    }

    pub fn uniform(width: usize, height: usize, u: f64, v: f64) -> Self {
        Self {
            width,
            height,
            u: vec![u; width * height],
            v: vec![v; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    /// Bilinear sample at continuous grid coordinates, clamped to the field.
    pub fn sample(&self, fx: f64, fy: f64) -> (f64, f64) {
        (
            bilinear(&self.u, self.width, self.height, fx, fy),
            bilinear(&self.v, self.width, self.height, fx, fy),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().chain(&self.v).all(|&c| c == 0.0)
    }

    fn clamp_to_bounds(&mut self) {
        let (w, h) = (self.width as f64, self.height as f64);
        for u in &mut self.u {
            *u = u.clamp(-w, w);
        }
        for v in &mut self.v {
            *v = v.clamp(-h, h);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub levels: usize,
    pub blur_sigma: f64,
    pub window: usize,
    pub iterations: usize,
    /// Structure tensors whose smaller eigenvalue falls below this are
    /// treated as singular.
    pub min_eigenvalue: f64,
    /// Largest per-iteration update, in pixels of the current level.
    pub max_step: f64,
    /// Side of the median filter applied to the flow after every iteration;
    /// 0 or 1 disables it.
    pub median: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            blur_sigma: 1.5,
            window: 5,
            iterations: 3,
            min_eigenvalue: 1.0,
            max_step: 1.0,
            median: 15,
        }
    }
}

/// A single-channel image of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn from_luma(frame: &RgbFrame) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            data: luma(frame),
        }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn blur(&self, sigma: f64) -> Plane {
        let radius = (3.0 * sigma).ceil() as usize;
        let k = gaussian_kernel(sigma, radius);
        let (w, h) = (self.width, self.height);
        let r = radius as isize;
        let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = k
                    .iter()
                    .enumerate()
                    .map(|(i, kv)| kv * self.at(clampi(x as isize + i as isize - r, w), y))
                    .sum();
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                out[y * w + x] = k
                    .iter()
                    .enumerate()
                    .map(|(i, kv)| kv * tmp[clampi(y as isize + i as isize - r, h) * w + x])
                    .sum();
            }
        }
        Plane {
            width: w,
            height: h,
            data: out,
        }
    }

    fn half(&self) -> Plane {
        let (w, h) = (self.width / 2, self.height / 2);
        let data = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| {
                (self.at(2 * x, 2 * y) + self.at(2 * x + 1, 2 * y) + self.at(2 * x, 2 * y + 1) + self.at(2 * x + 1, 2 * y + 1))
                    / 4.0
            })
            .collect();
        Plane {
            width: w,
            height: h,
            data,
        }
    }

    /// Area-average downsampling to an arbitrary smaller size.
    pub fn resize_area(&self, w: usize, h: usize) -> Plane {
        let sx = self.width as f64 / w as f64;
        let sy = self.height as f64 / h as f64;
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            let (y0, y1) = ((y as f64 * sy) as usize, (((y + 1) as f64 * sy).ceil() as usize).min(self.height));
            for x in 0..w {
                let (x0, x1) = ((x as f64 * sx) as usize, (((x + 1) as f64 * sx).ceil() as usize).min(self.width));
                let mut s = 0.0;
                for yy in y0..y1 {
                    for xx in x0..x1 {
                        s += self.at(xx, yy);
                    }
                }
                data.push(s / ((y1 - y0) * (x1 - x0)) as f64);
            }
        }
        Plane {
            width: w,
            height: h,
            data,
        }
    }
}

fn bilinear(data: &[f64], w: usize, h: usize, fx: f64, fy: f64) -> f64 {
    let fx = fx.clamp(0.0, (w - 1) as f64);
    let fy = fy.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    let top = data[y0 * w + x0] * (1.0 - tx) + data[y0 * w + x1] * tx;
    let bottom = data[y1 * w + x0] * (1.0 - tx) + data[y1 * w + x1] * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Resamples a flow field onto a `w x h` grid with pixel-centre bilinear
/// interpolation, scaling the vectors by the size ratio.
fn resample(flow: &FlowField, w: usize, h: usize) -> FlowField {
    let (sx, sy) = (flow.width as f64 / w as f64, flow.height as f64 / h as f64);
    let mut out = FlowField::zero(w, h);
    for y in 0..h {
        let fy = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..w {
            let fx = (x as f64 + 0.5) * sx - 0.5;
            let (u, v) = flow.sample(fx, fy);
            out.u[y * w + x] = u / sx;
            out.v[y * w + x] = v / sy;
        }
    }
    out
}

/// Bilinear upsampling to RGB resolution.
pub fn upsample_flow(flow: &FlowField, target: (usize, usize)) -> Result<FlowField> {
    let (w, h) = target;
    if w < flow.width || h < flow.height {
        return Err(Error::InvalidResolution {
            width: w,
            height: h,
            reason: "flow upsampling target is smaller than the source",
        });
    }
    Ok(resample(flow, w, h))
}

fn warp_plane(p: &Plane, flow: &FlowField) -> Plane {
    let mut data = Vec::with_capacity(p.data.len());
    for y in 0..p.height {
        for x in 0..p.width {
            let (u, v) = flow.at(x, y);
            data.push(bilinear(&p.data, p.width, p.height, x as f64 - u, y as f64 - v));
        }
    }
    Plane {
        width: p.width,
        height: p.height,
        data,
    }
}

fn gradients(p: &Plane) -> (Plane, Plane) {
    let (w, h) = (p.width, p.height);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            gx[y * w + x] = (p.at(xr, y) - p.at(xl, y)) / (xr - xl).max(1) as f64;
            gy[y * w + x] = (p.at(x, yd) - p.at(x, yu)) / (yd - yu).max(1) as f64;
        }
    }
    let plane = |data| Plane {
        width: w,
        height: h,
        data,
    };
    (plane(gx), plane(gy))
}

/// Solves the 2x2 normal equations, or `None` if the tensor is near singular.
fn solve(a11: f64, a12: f64, a22: f64, b1: f64, b2: f64, min_eig: f64) -> Option<(f64, f64)> {
    let tr = a11 + a22;
    let det = a11 * a22 - a12 * a12;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    if tr / 2.0 - disc < min_eig {
        return None;
    }
    Some(((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det))
}

/// Per-pixel products for the normal equations. Spatial gradients come from
/// `prev` and are sampled at the same displaced positions as the intensities.
fn linear_terms(prev: &Plane, grads: &(Plane, Plane), curr: &Plane, flow: &FlowField) -> [Vec<f64>; 5] {
    let warped = warp_plane(prev, flow);
    let gx = warp_plane(&grads.0, flow).data;
    let gy = warp_plane(&grads.1, flow).data;
    let n = warped.data.len();
    let mut terms = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let it = curr.data[i] - warped.data[i];
        terms[0][i] = gx[i] * gx[i];
        terms[1][i] = gx[i] * gy[i];
        terms[2][i] = gy[i] * gy[i];
        terms[3][i] = -gx[i] * it;
        terms[4][i] = -gy[i] * it;
    }
    terms
}

/// One translation for the whole image, used to seed the coarsest level.
fn global_motion(prev: &Plane, curr: &Plane, cfg: &FlowConfig) -> (f64, f64) {
    let (mut u, mut v) = (0.0, 0.0);
    let grads = gradients(prev);
    for _ in 0..cfg.iterations + 2 {
        let flow = FlowField::uniform(prev.width, prev.height, u, v);
        let t = linear_terms(prev, &grads, curr, &flow);
        let s: Vec<f64> = t.iter().map(|c| c.iter().sum()).collect();
        match solve(s[0], s[1], s[2], s[3], s[4], cfg.min_eigenvalue) {
            Some((du, dv)) => {
                let lim = cfg.max_step * 2.0;
                u += du.clamp(-lim, lim);
                v += dv.clamp(-lim, lim);
            }
            None => break,
        }
    }
    (u, v)
}

fn refine(prev: &Plane, curr: &Plane, flow: &mut FlowField, cfg: &FlowConfig) {
    let (w, h) = (prev.width, prev.height);
    let r = (cfg.window / 2) as isize;
    let (gx, gy) = gradients(prev);
    // Interleaved so one bilinear footprint reads all three quantities.
    let packed: Vec<[f64; 3]> = (0..w * h).map(|i| [gx.data[i], gy.data[i], prev.data[i]]).collect();
    let (maxx, maxy) = ((w - 1) as f64, (h - 1) as f64);
    for _ in 0..cfg.iterations {
        let mut next = flow.clone();
        for y in 0..h {
            for x in 0..w {
                let (u, v) = flow.at(x, y);
                // The whole window moves with the centre pixel's flow, so the
                // interpolation weights are shared.
                let (fu, fv) = (u.floor(), v.floor());
                let (tx, ty) = (fu + 1.0 - u, fv + 1.0 - v);
                let (tx, ty) = (if tx >= 1.0 { 0.0 } else { tx }, if ty >= 1.0 { 0.0 } else { ty });
                let (ox, oy) = (-(fu as isize) - if tx > 0.0 { 1 } else { 0 }, -(fv as isize) - if ty > 0.0 { 1 } else { 0 });
                let mut a = [0.0; 5];
                for dy in -r..=r {
                    let yy = y as isize + dy;
                    if yy < 0 || yy >= h as isize {
                        continue;
                    }
                    let sy = yy + oy;
                    let interior_y = sy >= 0 && sy + 1 < h as isize;
                    for dx in -r..=r {
                        let xx = x as isize + dx;
                        if xx < 0 || xx >= w as isize {
                            continue;
                        }
                        let sx = xx + ox;
                        let s = if interior_y && sx >= 0 && sx + 1 < w as isize {
                            let i = sy as usize * w + sx as usize;
                            let (p00, p10, p01, p11) = (&packed[i], &packed[i + 1], &packed[i + w], &packed[i + w + 1]);
                            let mut s = [0.0; 3];
                            for k in 0..3 {
                                let top = p00[k] * (1.0 - tx) + p10[k] * tx;
                                let bottom = p01[k] * (1.0 - tx) + p11[k] * tx;
                                s[k] = top * (1.0 - ty) + bottom * ty;
                            }
                            s
                        } else {
                            let (px, py) = ((xx as f64 - u).clamp(0.0, maxx), (yy as f64 - v).clamp(0.0, maxy));
                            [
                                bilinear(&gx.data, w, h, px, py),
                                bilinear(&gy.data, w, h, px, py),
                                bilinear(&prev.data, w, h, px, py),
                            ]
                        };
                        let it = curr.at(xx as usize, yy as usize) - s[2];
                        a[0] += s[0] * s[0];
                        a[1] += s[0] * s[1];
                        a[2] += s[1] * s[1];
                        a[3] -= s[0] * it;
                        a[4] -= s[1] * it;
                    }
                }
                if let Some((du, dv)) = solve(a[0], a[1], a[2], a[3], a[4], cfg.min_eigenvalue) {
                    let i = y * w + x;
                    next.u[i] = u + du.clamp(-cfg.max_step, cfg.max_step);
                    next.v[i] = v + dv.clamp(-cfg.max_step, cfg.max_step);
                }
            }
        }
        *flow = next;
    }
    if cfg.median > 1 {
        median_filter(flow, cfg.median / 2);
    }
    flow.clamp_to_bounds();
}

fn median_filter(flow: &mut FlowField, radius: usize) {
    let (w, h) = (flow.width, flow.height);
    let mut buf = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1));
    for comp in [&mut flow.u, &mut flow.v] {
        let src = comp.clone();
        for y in 0..h {
            let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(h - 1));
            for x in 0..w {
                let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(w - 1));
                buf.clear();
                for yy in y0..=y1 {
                    buf.extend_from_slice(&src[yy * w + x0..=yy * w + x1]);
                }
                let mid = buf.len() / 2;
                buf.select_nth_unstable_by(mid, f64::total_cmp);
                comp[y * w + x] = buf[mid];
            }
        }
    }
}

/// Pyramidal flow between two luma planes of equal size.
pub fn estimate_flow_planes(prev: &Plane, curr: &Plane, cfg: &FlowConfig) -> Result<FlowField> {
    if (prev.width, prev.height) != (curr.width, curr.height) {
        return Err(Error::DimensionMismatch {
            left: (prev.width, prev.height),
            right: (curr.width, curr.height),
        });
    }
    let levels = cfg.levels.max(1);
    let (tw, th) = (prev.width >> (levels - 1), prev.height >> (levels - 1));
    if tw < 8 || th < 8 {
        return Err(Error::InvalidResolution {
            width: prev.width,
            height: prev.height,
            reason: "coarsest pyramid level would be smaller than 8x8",
        });
    }
    let mut pyr_prev = vec![prev.blur(cfg.blur_sigma)];
    let mut pyr_curr = vec![curr.blur(cfg.blur_sigma)];
    for _ in 1..levels {
        let p = pyr_prev.last().expect("non-empty").half();
        let c = pyr_curr.last().expect("non-empty").half();
        pyr_prev.push(p);
        pyr_curr.push(c);
    }
    let top = levels - 1;
    let (gu, gv) = global_motion(&pyr_prev[top], &pyr_curr[top], cfg);
    let mut flow = FlowField::uniform(pyr_prev[top].width, pyr_prev[top].height, gu, gv);
    for level in (0..levels).rev() {
        let (p, c) = (&pyr_prev[level], &pyr_curr[level]);
        if (flow.width, flow.height) != (p.width, p.height) {
            flow = resample(&flow, p.width, p.height);
        }
        refine(p, c, &mut flow, cfg);
    }
    Ok(flow)
}

/// Flow between two game states, estimated on their colourised images.
pub fn estimate_flow(prev: &GameStateFrame, curr: &GameStateFrame, palette: &Palette, cfg: &FlowConfig) -> Result<FlowField> {
    if prev.dims() != curr.dims() {
        return Err(Error::DimensionMismatch {
            left: prev.dims(),
            right: curr.dims(),
        });
    }
    let p = Plane::from_luma(&state_to_image(prev, palette));
    let c = Plane::from_luma(&state_to_image(curr, palette));
    estimate_flow_planes(&p, &c, cfg)
}
