//! Per-channel gain and bias fitted to the correctly decoded pixels of a
//! partial frame.

use serde::{Deserialize, Serialize};

use crate::image::RgbFrame;
use crate::metrics::{charbonnier_grad, charbonnier_rho};

/// `out_c = gain_c * in_c + bias_c`, with bias in 8-bit pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhanceParams {
    pub gain: [f64; 3],
    pub bias: [f64; 3],
}

impl Default for EnhanceParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl EnhanceParams {
    pub const IDENTITY: EnhanceParams = EnhanceParams {
        gain: [1.0; 3],
        bias: [0.0; 3],
    };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    #[inline]
    pub fn apply(&self, px: [u8; 3]) -> [u8; 3] {
        if self.is_identity() {
            return px;
        }
        let mut out = [0u8; 3];
        for c in 0..3 {
            out[c] = (self.gain[c] * px[c] as f64 + self.bias[c]).round().clamp(0.0, 255.0) as u8;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhanceConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    /// Overlap pixels beyond this many are subsampled with a fixed stride.
    pub max_samples: usize,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            iterations: 100,
            max_samples: 8192,
        }
    }
}

/// Samples of one channel on the overlap, normalized to `[0, 1]`.
struct Channel {
    input: Vec<f64>,
    target: Vec<f64>,
}

fn channels(warped: &RgbFrame, partial: &RgbFrame, overlap: &[bool], max_samples: usize) -> [Channel; 3] {
    let mut out = [(); 3].map(|_| Channel {
        input: Vec::new(),
        target: Vec::new(),
    });
    let count = overlap.iter().filter(|&&o| o).count();
    let stride = count.div_ceil(max_samples.max(1)).max(1);
    for (i, _) in overlap.iter().enumerate().filter(|(_, &o)| o).step_by(stride) {
        for (c, ch) in out.iter_mut().enumerate() {
            ch.input.push(warped.as_raw()[i * 3 + c] as f64 / 255.0);
            ch.target.push(partial.as_raw()[i * 3 + c] as f64 / 255.0);
        }
    }
    out
}

/// Mean Charbonnier loss of `gain * x + bias - y` in normalized units.
pub fn channel_loss(input: &[f64], target: &[f64], gain: f64, bias: f64) -> f64 {
    let n = input.len().max(1) as f64;
    input.iter().zip(target).map(|(x, y)| charbonnier_rho(gain * x + bias - y)).sum::<f64>() / n
}

/// Analytic gradient of [`channel_loss`] with respect to `(gain, bias)`.
pub fn channel_gradient(input: &[f64], target: &[f64], gain: f64, bias: f64) -> (f64, f64) {
    let (_, ga, gb) = loss_and_gradient(input, target, gain, bias);
    (ga, gb)
}

fn loss_and_gradient(input: &[f64], target: &[f64], gain: f64, bias: f64) -> (f64, f64, f64) {
    let n = input.len().max(1) as f64;
    let (mut l, mut ga, mut gb) = (0.0, 0.0, 0.0);
    for (x, y) in input.iter().zip(target) {
        let r = gain * x + bias - y;
        l += charbonnier_rho(r);
        let d = charbonnier_grad(r);
        ga += d * x;
        gb += d;
    }
    (l / n, ga / n, gb / n)
}

/// Gradient descent on one channel. The offset is parameterized around the
/// input mean so gain and offset steps are decoupled; a step that fails to
/// lower the loss is rejected and the learning rate halved.
fn fit_channel(ch: &Channel, cfg: &EnhanceConfig) -> (f64, f64) {
    let n = ch.input.len() as f64;
    let mean = ch.input.iter().sum::<f64>() / n;
    let (mut gain, mut offset) = (1.0, mean);
    let to_bias = |gain: f64, offset: f64| offset - gain * mean;
    let (mut loss, mut ga, mut gb) = loss_and_gradient(&ch.input, &ch.target, 1.0, 0.0);
    let mut lr = cfg.learning_rate;
    for _ in 0..cfg.iterations {
        let g_gain = ga - mean * gb;
        let (ng, no) = (gain - lr * g_gain, offset - lr * gb);
        let (nl, nga, ngb) = loss_and_gradient(&ch.input, &ch.target, ng, to_bias(ng, no));
        if nl < loss {
            (gain, offset, loss, ga, gb) = (ng, no, nl, nga, ngb);
        } else {
            lr *= 0.5;
        }
    }
    (gain, to_bias(gain, offset))
}

/// Fits per-channel gain and bias mapping `warped` onto `partial` over the
/// pixels flagged in `overlap`. An empty overlap yields the identity.
pub fn fit_enhance(warped: &RgbFrame, partial: &RgbFrame, overlap: &[bool], cfg: &EnhanceConfig) -> EnhanceParams {
    if !overlap.iter().any(|&o| o) {
        return EnhanceParams::IDENTITY;
    }
    let mut params = EnhanceParams::IDENTITY;
    for (c, ch) in channels(warped, partial, overlap, cfg.max_samples).iter().enumerate() {
        let (gain, bias) = fit_channel(ch, cfg);
        params.gain[c] = gain;
        params.bias[c] = bias * 255.0;
    }
    params
}

/// Mean overlap loss of `params` per channel, in normalized units.
pub fn enhance_loss(warped: &RgbFrame, partial: &RgbFrame, overlap: &[bool], params: &EnhanceParams) -> [f64; 3] {
    let chans = channels(warped, partial, overlap, usize::MAX);
    [0, 1, 2].map(|c| channel_loss(&chans[c].input, &chans[c].target, params.gain[c], params.bias[c] / 255.0))
}
