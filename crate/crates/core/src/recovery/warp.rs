use crate::image::{RgbFrame, BLACK};

use super::flow::FlowField;

/// Per-pixel flag: 1 where the backward warp sampled fully inside the frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMask {
    pub width: usize,
    pub height: usize,
    pub covered: Vec<bool>,
}

impl CoverageMask {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.covered[y * self.width + x]
    }

    pub fn fraction(&self) -> f64 {
        if self.covered.is_empty() {
            return 0.0;
        }
        self.covered.iter().filter(|&&c| c).count() as f64 / self.covered.len() as f64
    }
}

/// Backward warp: `out(x, y) = prev(x - u, y - v)` with bilinear taps.
/// Pixels whose sample point leaves the frame are black and uncovered.
pub fn warp_frame(prev: &RgbFrame, flow: &FlowField) -> (RgbFrame, CoverageMask) {
    let (w, h) = prev.dims();
    assert_eq!((flow.width, flow.height), (w, h), "flow must be at frame resolution");
    let mut out = RgbFrame::filled(w, h, BLACK);
    let mut covered = vec![false; w * h];
    let (maxx, maxy) = ((w - 1) as f64, (h - 1) as f64);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.at(x, y);
            let (sx, sy) = (x as f64 - u, y as f64 - v);
            if !(0.0..=maxx).contains(&sx) || !(0.0..=maxy).contains(&sy) {
                continue;
            }
            covered[y * w + x] = true;
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (tx, ty) = (sx - x0 as f64, sy - y0 as f64);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (p00, p10, p01, p11) = (prev.get(x0, y0), prev.get(x1, y0), prev.get(x0, y1), prev.get(x1, y1));
            let mut px = [0u8; 3];
            for c in 0..3 {
                let top = p00[c] as f64 * (1.0 - tx) + p10[c] as f64 * tx;
                let bottom = p01[c] as f64 * (1.0 - tx) + p11[c] as f64 * tx;
                px[c] = (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8;
            }
            out.set(x, y, px);
        }
    }
    (
        out,
        CoverageMask {
            width: w,
            height: h,
            covered,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> RgbFrame {
        RgbFrame::from_fn(40, 20, |x, y| [(x * 6) as u8, (y * 12) as u8, 77])
    }

    #[test]
    fn zero_flow_is_identity() {
        let f = ramp();
        let (out, m) = warp_frame(&f, &FlowField::zero(40, 20));
        assert_eq!(out, f);
        assert!(m.covered.iter().all(|&c| c));
    }

    #[test]
    fn integer_shift_uncovers_the_trailing_edge() {
        let f = ramp();
        let (out, m) = warp_frame(&f, &FlowField::uniform(40, 20, 5.0, 0.0));
        for y in 0..20 {
            for x in 0..40 {
                assert_eq!(m.get(x, y), x >= 5);
                let want = if x >= 5 { f.get(x - 5, y) } else { BLACK };
                assert_eq!(out.get(x, y), want);
            }
        }
    }

    #[test]
    fn out_of_bounds_flow_is_black() {
        let (out, m) = warp_frame(&ramp(), &FlowField::uniform(40, 20, 100.0, -50.0));
        assert!(out.as_raw().iter().all(|&b| b == 0));
        assert_eq!(m.fraction(), 0.0);
    }
}
