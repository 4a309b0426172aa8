//! Frame quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RgbFrame;

pub const PSNR_CAP_DB: f64 = 99.0;
pub const CHARBONNIER_EPS: f64 = 1e-12;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub frame_index: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub pixel_loss: f64,
}

impl FrameScore {
    pub fn compute(frame_index: usize, output: &RgbFrame, reference: &RgbFrame, pixel_loss: f64) -> Result<Self> {
        Ok(Self {
            frame_index,
            psnr: psnr(output, reference)?,
            ssim: ssim(output, reference)?,
            pixel_loss,
        })
    }
}

pub fn mse(a: &RgbFrame, b: &RgbFrame) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let n = a.as_raw().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: u64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    Ok(sum as f64 / n as f64)
}

/// Peak signal-to-noise ratio over all channels, capped at 99 dB.
pub fn psnr(a: &RgbFrame, b: &RgbFrame) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (255.0f64 * 255.0 / m).log10()).min(PSNR_CAP_DB))
}

pub fn luma(f: &RgbFrame) -> Vec<f64> {
    f.as_raw()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

pub(crate) fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable filtering keeping only positions where the window fits.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = line[x..x + n].iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        let dst = &mut out[y * ow..(y + 1) * ow];
        for (i, kv) in k.iter().enumerate() {
            let src = &rows[(y + i) * ow..(y + i + 1) * ow];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * kv;
            }
        }
    }
    (out, ow, oh)
}

/// Mean SSIM on BT.601 luma with an 11x11 Gaussian window.
pub fn ssim(a: &RgbFrame, b: &RgbFrame) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidResolution {
            width: w,
            height: h,
            reason: "ssim needs at least 11x11 pixels",
        });
    }
    let k = gaussian_kernel(SSIM_SIGMA, SSIM_WINDOW / 2);
    let (ya, yb) = (luma(a), luma(b));
    let aa: Vec<f64> = ya.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = yb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = ya.iter().zip(&yb).map(|(x, y)| x * y).collect();
    let (mu_a, ow, oh) = filter_valid(&ya, w, h, &k);
    let (mu_b, ..) = filter_valid(&yb, w, h, &k);
    let (s_aa, ..) = filter_valid(&aa, w, h, &k);
    let (s_bb, ..) = filter_valid(&bb, w, h, &k);
    let (s_ab, ..) = filter_valid(&ab, w, h, &k);
    let mut total = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = s_aa[i] - ma * ma;
        let vb = s_bb[i] - mb * mb;
        let cov = s_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    Ok((total / (ow * oh) as f64).clamp(-1.0, 1.0))
}

#[inline]
pub fn charbonnier_rho(x: f64) -> f64 {
    (x * x + CHARBONNIER_EPS * CHARBONNIER_EPS).sqrt()
}

#[inline]
pub fn charbonnier_grad(x: f64) -> f64 {
    x / charbonnier_rho(x)
}

/// Sum of `sqrt(d^2 + eps^2)` over every channel value.
pub fn charbonnier(a: &RgbFrame, b: &RgbFrame) -> Result<f64> {
    a.ensure_same_dims(b)?;
    Ok(a.as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&x, &y)| charbonnier_rho(x as f64 - y as f64))
        .sum())
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}
