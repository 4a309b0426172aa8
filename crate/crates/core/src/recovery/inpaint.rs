use crate::gamestate::GameStateFrame;
use crate::image::{RgbFrame, GRAY};
use crate::scene::{shade, Palette};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InpaintConfig {
    pub iterations: usize,
    /// Darken seed colours with depth like the renderer does, using this far
    /// distance. `None` seeds with flat palette colours.
    pub seed_shading_far: Option<f64>,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            seed_shading_far: None,
        }
    }
}

/// Fills `hole` pixels of `frame`.
///
/// Hole pixels whose scaled game-state cell is occupied are seeded with that
/// cell's palette colour and held fixed. The rest are filled by Jacobi
/// diffusion from known neighbours; anything still unreached afterwards
/// becomes mid-gray.
pub fn inpaint(
    frame: &RgbFrame,
    hole: &[bool],
    state: Option<(&GameStateFrame, &Palette)>,
    cfg: &InpaintConfig,
) -> RgbFrame {
    let (w, h) = frame.dims();
    assert_eq!(hole.len(), w * h, "hole mask must match the frame");
    if !hole.iter().any(|&x| x) {
        return frame.clone();
    }
    let mut value: Vec<[f64; 3]> = frame.as_raw().chunks_exact(3).map(|p| [p[0] as f64, p[1] as f64, p[2] as f64]).collect();
    // Known pixels: outside the hole, or seeded from the game state.
    let mut fixed: Vec<bool> = hole.iter().map(|&x| !x).collect();
    if let Some((st, palette)) = state {
        for y in 0..h {
            let sy = y * st.height / h;
            for x in 0..w {
                let i = y * w + x;
                if !hole[i] {
                    continue;
                }
                let sx = x * st.width / w;
                if let Some(cell) = st.cell(sx, sy) {
                    if let Some(color) = palette.get(cell.color_index) {
                        let c = match cfg.seed_shading_far {
                            Some(far) => shade(color, cell.depth as f64, far),
                            None => color,
                        };
                        value[i] = c.map(f64::from);
                        fixed[i] = true;
                    }
                }
            }
        }
    }
    let targets: Vec<usize> = (0..w * h).filter(|&i| !fixed[i]).collect();
    let mut filled = fixed.clone();
    let mut next = value.clone();
    let mut next_filled = filled.clone();
    for _ in 0..cfg.iterations {
        let mut changed = false;
        for &i in &targets {
            let (x, y) = (i % w, i / w);
            let mut sum = [0.0; 3];
            let mut n = 0.0;
            let mut add = |j: usize| {
                if filled[j] {
                    for c in 0..3 {
                        sum[c] += value[j][c];
                    }
                    n += 1.0;
                }
            };
            if x > 0 {
                add(i - 1);
            }
            if x + 1 < w {
                add(i + 1);
            }
            if y > 0 {
                add(i - w);
            }
            if y + 1 < h {
                add(i + w);
            }
            if n > 0.0 {
                let v = sum.map(|s| s / n);
                changed |= v != value[i] || !filled[i];
                next[i] = v;
                next_filled[i] = true;
            }
        }
        std::mem::swap(&mut value, &mut next);
        std::mem::swap(&mut filled, &mut next_filled);
        next.copy_from_slice(&value);
        next_filled.copy_from_slice(&filled);
        if !changed {
            break;
        }
    }
    let mut out = frame.clone();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if hole[i] {
                let px = if filled[i] { value[i].map(|v| v.round().clamp(0.0, 255.0) as u8) } else { GRAY };
                out.set(x, y, px);
            }
        }
    }
    out
}
