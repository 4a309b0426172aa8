use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::latency::{LatencyModel, SchedulerConfig};
use super::report::{FrameRecord, SessionReport};
use super::trace::NetworkTrace;
use crate::codec::{encode, pixel_loss_rate, CodecConfig, CorruptionMask, Decoder, EncodedFrame};
use crate::error::{Error, Result};
use crate::gamestate::{extract_state, GameStateFrame};
use crate::image::RgbFrame;
use crate::metrics::{psnr, FrameScore};
use crate::recovery::{recover, Guidance, PartialFrame, RecoveryConfig, RecoveryInput};
use crate::scene::{render_ground_truth, Palette, SceneModel};

/// How the client fills frames that did not decode cleanly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Flow from game states.
    Recover,
    /// Flow extrapolated from the two previous frames.
    NoStates,
    /// Show the previous frame, overwritten with whatever decoded.
    Reuse,
    /// Redundancy of the given fraction; undeliverable frames fall back to reuse.
    Fec(f64),
}

impl Scheme {
    pub fn fec_overhead(&self) -> f64 {
        match self {
            Scheme::Fec(o) => *o,
            _ => 0.0,
        }
    }

    fn uses_states(&self) -> bool {
        matches!(self, Scheme::Recover)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Recover => f.write_str("recover"),
            Scheme::NoStates => f.write_str("no-states"),
            Scheme::Reuse => f.write_str("reuse"),
            Scheme::Fec(o) => write!(f, "fec:{}", o * 100.0),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recover" => Ok(Scheme::Recover),
            "no-states" => Ok(Scheme::NoStates),
            "reuse" => Ok(Scheme::Reuse),
            _ => {
                let pct = s
                    .strip_prefix("fec:")
                    .and_then(|p| p.trim_end_matches('%').parse::<f64>().ok())
                    .filter(|p| (0.0..=100.0).contains(p))
                    .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}; expected recover, no-states, reuse or fec:<pct>")))?;
                Ok(Scheme::Fec(pct / 100.0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameStatus {
    Delivered,
    PartialRecovered,
    Predicted,
    DeliveredLateDiscarded,
}

impl FrameStatus {
    pub fn is_lost(self) -> bool {
        self != FrameStatus::Delivered
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameOutcome {
    pub frame_index: usize,
    pub status: FrameStatus,
    /// Modeled arrival of the last packet, relative to the user input.
    pub arrival_ms: f64,
    pub display_ms: f64,
    /// Arrived after the timeout but before the deadline.
    pub late: bool,
    pub pixel_loss: f64,
    pub extraction_triggered: bool,
    pub packets_sent: usize,
    pub packets_lost: usize,
    pub bytes_sent: usize,
    pub extra_bytes: usize,
}

/// Everything a session needs that does not depend on the network: ground
/// truth, the encoded stream and game states for every frame.
#[derive(Debug, Clone)]
pub struct SessionInputs {
    pub palette: Palette,
    pub ground_truth: Vec<RgbFrame>,
    pub encoded: Vec<EncodedFrame>,
    pub states: Vec<GameStateFrame>,
    /// PSNR of the loss-free decode against ground truth.
    pub baseline_psnr: Vec<f64>,
}

impl SessionInputs {
    pub fn prepare(scene: &SceneModel, codec: &CodecConfig, downsample: usize) -> Result<Self> {
        let n = scene.frame_count();
        let ground_truth = (0..n).map(|f| render_ground_truth(scene, f)).collect::<Result<Vec<_>>>()?;
        let states = (0..n)
            .map(|f| extract_state(scene, f, downsample, scene.state_resolution))
            .collect::<Result<Vec<_>>>()?;
        let (encoded, recon) = encode(&ground_truth, codec)?;
        let baseline_psnr = recon.iter().zip(&ground_truth).map(|(r, g)| psnr(r, g)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            palette: scene.palette.clone(),
            ground_truth,
            encoded,
            states,
            baseline_psnr,
        })
    }

    pub fn len(&self) -> usize {
        self.encoded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoded.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    pub scheme: Scheme,
    pub scheduler: SchedulerConfig,
    pub latency: LatencyModel,
    pub recovery: RecoveryConfig,
    /// Seeds the packet-loss draws. Draws depend only on the seed and frame
    /// index, so every scheme sees the same losses.
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(scheme: Scheme, seed: u64) -> Self {
        Self {
            scheme,
            scheduler: SchedulerConfig::default(),
            latency: LatencyModel::default(),
            recovery: RecoveryConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scheduler.validate()?;
        self.latency.validate()?;
        let o = self.scheme.fec_overhead();
        if !(0.0..=1.0).contains(&o) {
            return Err(Error::Config(format!("fec overhead {o} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Loss pattern of one frame's transmission.
struct Transmission {
    lost: Vec<bool>,
    parity: usize,
    parity_lost: usize,
}

fn draw_losses(seed: u64, frame: usize, packets: usize, parity: usize, loss_rate: f64) -> Transmission {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64);
    let lost = (0..packets).map(|_| rng.random_bool(loss_rate)).collect();
    let parity_lost = (0..parity).filter(|_| rng.random_bool(loss_rate)).count();
    Transmission {
        lost,
        parity,
        parity_lost,
    }
}

fn paste_valid(base: &mut RgbFrame, decoded: &RgbFrame, mask: &CorruptionMask) {
    let (w, h) = base.dims();
    for y in 0..h {
        for x in 0..w {
            if mask.pixel_valid(x, y) {
                base.set(x, y, decoded.get(x, y));
            }
        }
    }
}

struct Client<'a> {
    inputs: &'a SessionInputs,
    cfg: &'a SessionConfig,
    shown: Vec<Option<RgbFrame>>,
    state_ready: Vec<bool>,
}

impl Client<'_> {
    fn shown(&self, f: usize) -> &RgbFrame {
        self.shown[f].as_ref().expect("recent frames are kept")
    }

    fn reuse(&self, f: usize, decoded: &RgbFrame, mask: &CorruptionMask, paste: bool) -> RgbFrame {
        if f == 0 {
            return decoded.clone();
        }
        let mut out = self.shown(f - 1).clone();
        if paste {
            paste_valid(&mut out, decoded, mask);
        }
        out
    }

    /// Fills a frame that did not decode cleanly. `partial` is the decode when
    /// it arrived before the timeout; `late` is a decode that arrived after
    /// the timeout but in time to overwrite recovered pixels.
    fn conceal(
        &self,
        f: usize,
        decoded: &RgbFrame,
        mask: &CorruptionMask,
        partial: bool,
        late: bool,
        triggered: bool,
    ) -> Result<RgbFrame> {
        let with_states = self.cfg.scheme.uses_states() && triggered;
        let guide = if with_states {
            (f.saturating_sub(2)..f).rev().find(|&q| self.state_ready[q])
        } else {
            None
        };
        let (guidance, prev) = match (self.cfg.scheme, guide) {
            (Scheme::Reuse | Scheme::Fec(_), _) => return Ok(self.reuse(f, decoded, mask, partial || late)),
            (Scheme::Recover, Some(p)) => (
                Guidance::GameStates {
                    prev: &self.inputs.states[p],
                    curr: &self.inputs.states[f],
                    palette: &self.inputs.palette,
                },
                p,
            ),
            _ if f >= 2 => (
                Guidance::PreviousFrames {
                    before_prev: self.shown(f - 2),
                },
                f - 1,
            ),
            _ => return Ok(self.reuse(f, decoded, mask, partial || late)),
        };
        let input = RecoveryInput {
            guidance,
            prev_frame: self.shown(prev),
            partial: partial.then_some(PartialFrame { frame: decoded, mask }),
        };
        let mut out = recover(&input, &self.cfg.recovery)?.frame;
        if late {
            paste_valid(&mut out, decoded, mask);
        }
        Ok(out)
    }
}

/// A frame as the client showed it, with the decoder's mask.
#[derive(Debug, Clone, Copy)]
pub struct ShownFrame<'a> {
    pub frame_index: usize,
    pub frame: &'a RgbFrame,
    pub mask: &'a CorruptionMask,
    pub status: FrameStatus,
}

/// Replays `trace` over the encoded session and reports every frame.
pub fn simulate_session(inputs: &SessionInputs, trace: &NetworkTrace, cfg: &SessionConfig) -> Result<SessionReport> {
    simulate_session_with(inputs, trace, cfg, |_| Ok(()))
}

/// Like [`simulate_session`], handing every shown frame to `sink` as it is
/// produced.
pub fn simulate_session_with(
    inputs: &SessionInputs,
    trace: &NetworkTrace,
    cfg: &SessionConfig,
    mut sink: impl FnMut(ShownFrame<'_>) -> Result<()>,
) -> Result<SessionReport> {
    cfg.validate()?;
    trace.validate()?;
    let n = inputs.len();
    let sched = &cfg.scheduler;
    let needed_ms = n as f64 * sched.frame_interval_ms;
    if trace.duration_ms() < needed_ms {
        return Err(Error::TraceTooShort {
            trace_ms: trace.duration_ms(),
            needed_ms,
        });
    }
    let overhead = cfg.scheme.fec_overhead();
    let mut client = Client {
        inputs,
        cfg,
        shown: vec![None; n],
        state_ready: vec![false; n],
    };
    let mut decoder = Decoder::new();
    let mut records = Vec::with_capacity(n);
    let mut lost_prev = false;
    let mut triggered_prev = false;
    for f in 0..n {
        let row = *trace.row_at(f as f64 * sched.frame_interval_ms).ok_or(Error::TraceTooShort {
            trace_ms: trace.duration_ms(),
            needed_ms,
        })?;
        let ef = &inputs.encoded[f];
        let mut packets = ef.packets();
        let bytes = ef.total_bytes();
        let parity = (overhead * packets.len() as f64).floor() as usize;
        let tx = draw_losses(cfg.seed, f, packets.len(), parity, row.loss_rate);
        let extra_bytes = (overhead * bytes as f64).round() as usize;
        let arrival_ms = cfg.latency.non_recovery_ms(row.rtt_ms, bytes + extra_bytes, row.throughput_mbps);
        let in_time = arrival_ms <= sched.deadline_ms();
        let late = in_time && arrival_ms > sched.timeout_ms;
        let source_lost = tx.lost.iter().filter(|&&l| l).count();
        let fec_repairs = tx.parity > 0 && source_lost + tx.parity_lost <= tx.parity;
        for (p, &l) in packets.iter_mut().zip(&tx.lost) {
            p.lost = !in_time || (l && !fec_repairs);
        }
        let (decoded, mask) = decoder.decode(ef, &packets)?;

        let status = if !in_time {
            FrameStatus::DeliveredLateDiscarded
        } else if mask.all_valid_cells() {
            FrameStatus::Delivered
        } else if packets.iter().all(|p| p.lost) {
            FrameStatus::Predicted
        } else {
            FrameStatus::PartialRecovered
        };

        // Extraction runs for frame f once f-1 is known lost; the first loss of
        // a burst also pulls in the state of the frame before it.
        let triggered = f > 0 && lost_prev;
        if triggered {
            client.state_ready[f] = true;
            if !triggered_prev && f >= 2 {
                client.state_ready[f - 2] = true;
            }
        }

        let (frame, display_ms) = match status {
            FrameStatus::Delivered => (decoded, arrival_ms),
            _ => {
                let partial = status == FrameStatus::PartialRecovered && !late;
                let late_pixels = status == FrameStatus::PartialRecovered && late;
                let out = client.conceal(f, &decoded, &mask, partial, late_pixels, triggered)?;
                let display = match cfg.scheme {
                    Scheme::Reuse | Scheme::Fec(_) => sched.timeout_ms.min(arrival_ms),
                    _ => cfg.latency.recovery_ms(sched.timeout_ms, arrival_ms),
                };
                (out, display)
            }
        };
        let pixel_loss = pixel_loss_rate(&mask);
        let score = FrameScore::compute(f, &frame, &inputs.ground_truth[f], pixel_loss)?;
        records.push(FrameRecord {
            outcome: FrameOutcome {
                frame_index: f,
                status,
                arrival_ms,
                display_ms,
                late: late && status != FrameStatus::DeliveredLateDiscarded,
                pixel_loss,
                extraction_triggered: triggered && cfg.scheme.uses_states(),
                packets_sent: packets.len() + tx.parity,
                packets_lost: source_lost + tx.parity_lost,
                bytes_sent: bytes + extra_bytes,
                extra_bytes,
            },
            score,
            baseline_psnr: inputs.baseline_psnr[f],
        });
        sink(ShownFrame {
            frame_index: f,
            frame: &frame,
            mask: &mask,
            status,
        })?;
        client.shown[f] = Some(frame);
        if f >= 3 {
            client.shown[f - 3] = None;
        }
        lost_prev = status.is_lost();
        triggered_prev = triggered;
    }
    Ok(SessionReport::new(cfg.scheme, &trace.name, cfg.seed, records))
}

/// The FEC comparison scheme with the given redundancy.
pub fn fec_baseline(inputs: &SessionInputs, trace: &NetworkTrace, cfg: &SessionConfig, overhead: f64) -> Result<SessionReport> {
    let cfg = SessionConfig {
        scheme: Scheme::Fec(overhead),
        ..*cfg
    };
    simulate_session(inputs, trace, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, FixtureOptions, SceneKind};
    use crate::netsim::trace::TraceRow;

    fn small_inputs(frames: usize, q: i32) -> SessionInputs {
        let skip_threshold = if q == 1 { 0 } else { CodecConfig::default().skip_threshold };
        let mut opts = FixtureOptions::for_kind(SceneKind::Pan);
        opts.frames = frames;
        opts.rgb_resolution = (96, 64);
        opts.state_resolution = (96, 64);
        let scene = fixtures::pan(&opts);
        let codec = CodecConfig {
            q,
            gop: 8,
            skip_threshold,
            ..CodecConfig::default()
        };
        SessionInputs::prepare(&scene, &codec, 1).unwrap()
    }

    fn clean_trace() -> NetworkTrace {
        NetworkTrace::constant(
            "clean",
            10.0,
            TraceRow {
                t_ms: 0.0,
                throughput_mbps: 1000.0,
                loss_rate: 0.0,
                rtt_ms: 10.0,
            },
        )
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in ["recover", "no-states", "reuse", "fec:70", "fec:0", "fec:100"] {
            assert_eq!(s.parse::<Scheme>().unwrap().to_string(), s);
        }
        assert_eq!("fec:25".parse::<Scheme>().unwrap(), Scheme::Fec(0.25));
        assert!("fec:150".parse::<Scheme>().is_err());
        assert!("magic".parse::<Scheme>().is_err());
    }

    #[test]
    fn lossless_trace_delivers_everything_at_q1() {
        let inputs = small_inputs(12, 1);
        let report = simulate_session(&inputs, &clean_trace(), &SessionConfig::new(Scheme::Recover, 1)).unwrap();
        assert!(report.frames.iter().all(|r| r.outcome.status == FrameStatus::Delivered));
        assert_eq!(report.summary.mean_psnr_db, 99.0);
        assert_eq!(report.summary.mean_baseline_psnr_db, 99.0);
        assert_eq!(report.summary.extra_bytes, 0);
    }

    #[test]
    fn poisoned_row_predicts_and_triggers() {
        let inputs = small_inputs(12, 8);
        let mut trace = clean_trace();
        // Row 1 covers frames 3, 4 and 5.
        trace.rows[1].loss_rate = 1.0;
        let report = simulate_session(&inputs, &trace, &SessionConfig::new(Scheme::Recover, 3)).unwrap();
        let st = |f: usize| report.frames[f].outcome.status;
        assert_eq!(st(2), FrameStatus::Delivered);
        for f in 3..6 {
            assert_eq!(st(f), FrameStatus::Predicted);
        }
        assert!(!report.frames[3].outcome.extraction_triggered);
        assert!(report.frames[4].outcome.extraction_triggered);
        assert!(report.frames[6].outcome.extraction_triggered);
    }

    #[test]
    fn losses_do_not_depend_on_scheme() {
        let inputs = small_inputs(12, 8);
        let mut trace = clean_trace();
        for r in &mut trace.rows {
            r.loss_rate = 0.2;
        }
        let a = simulate_session(&inputs, &trace, &SessionConfig::new(Scheme::Reuse, 5)).unwrap();
        let b = simulate_session(&inputs, &trace, &SessionConfig::new(Scheme::NoStates, 5)).unwrap();
        let lost = |r: &SessionReport| r.frames.iter().map(|x| x.outcome.packets_lost).collect::<Vec<_>>();
        assert_eq!(lost(&a), lost(&b));
        let statuses = |r: &SessionReport| r.frames.iter().map(|x| x.outcome.status).collect::<Vec<_>>();
        assert_eq!(statuses(&a), statuses(&b));
    }

    #[test]
    fn zero_overhead_fec_matches_reuse() {
        let inputs = small_inputs(12, 8);
        let mut trace = clean_trace();
        for r in &mut trace.rows {
            r.loss_rate = 0.3;
        }
        let reuse = simulate_session(&inputs, &trace, &SessionConfig::new(Scheme::Reuse, 8)).unwrap();
        let fec = fec_baseline(&inputs, &trace, &SessionConfig::new(Scheme::Reuse, 8), 0.0).unwrap();
        for (a, b) in reuse.frames.iter().zip(&fec.frames) {
            assert_eq!(a.outcome, b.outcome);
            assert_eq!(a.score, b.score);
        }
    }

    #[test]
    fn late_frames_are_discarded() {
        let inputs = small_inputs(4, 8);
        let mut trace = clean_trace();
        for r in &mut trace.rows {
            r.rtt_ms = 200.0;
        }
        let report = simulate_session(&inputs, &trace, &SessionConfig::new(Scheme::Recover, 1)).unwrap();
        assert!(report.frames.iter().all(|r| r.outcome.status == FrameStatus::DeliveredLateDiscarded));
    }

    #[test]
    fn short_trace_rejected() {
        let inputs = small_inputs(4, 8);
        let mut trace = clean_trace();
        trace.rows.truncate(1);
        assert!(matches!(
            simulate_session(&inputs, &trace, &SessionConfig::new(Scheme::Reuse, 1)),
            Err(Error::TraceTooShort { .. })
        ));
    }
}
