//! End-to-end runs and the artifact plumbing behind the command-line tool.
//!
//! A run renders every frame of a scene, extracts its game states, encodes
//! the frames, replays a network trace through the client and scores what
//! was shown. Every artifact is written in the format its owning module
//! reads back.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::{encode, read_stream, write_stream, CodecConfig, CorruptionMask, EncodedFrame, StreamHeader};
use crate::error::{Error, Result};
use crate::fixtures::{self, FixtureOptions, SceneKind};
use crate::gamestate::{extract_state, GameStateFrame, MIN_STATE_DIM};
use crate::image::{GrayImage, RgbFrame};
use crate::metrics::{psnr, ssim};
use crate::netsim::{
    generate_trace, simulate_session_with, NetworkTrace, Profile, SchedulerConfig, Scheme, SessionConfig, SessionInputs,
    SessionReport, TraceRow, MIN_TRACE_SECONDS,
};
use crate::recovery::{recover, EnhanceParams, Guidance, PartialFrame, RecoveryConfig, RecoveryInput};
use crate::scene::{load_scene, render_ground_truth, save_scene, Palette, SceneModel};

pub const FRAME_DIR: &str = "frames";
pub const TRUTH_DIR: &str = "truth";
pub const STATE_DIR: &str = "states";
pub const MASK_DIR: &str = "masks";
pub const BITSTREAM_FILE: &str = "stream.scv";
pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const SUMMARY_JSON: &str = "summary.json";

pub fn frame_name(f: usize) -> String {
    format!("frame_{f:05}.ppm")
}

pub fn state_names(f: usize) -> (String, String) {
    (format!("state_{f:05}.pgm"), format!("state_{f:05}.depth"))
}

pub fn mask_name(f: usize) -> String {
    format!("mask_{f:05}.pgm")
}

/// Parses `WxH`.
pub fn parse_resolution(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("resolution {s:?} is not of the form WxH"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?))
}

/// Where the session's network conditions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSource {
    Profile { profile: Profile, seconds: f64 },
    File(PathBuf),
    /// Loss-free, fast and constant.
    Lossless,
}

impl NetworkSource {
    fn trace(&self, seed: u64, frames: usize, frame_interval_ms: f64) -> Result<NetworkTrace> {
        match self {
            NetworkSource::Profile { profile, seconds } => generate_trace(*profile, *seconds, seed),
            NetworkSource::File(path) => NetworkTrace::load(path),
            NetworkSource::Lossless => {
                let seconds = (frames as f64 * frame_interval_ms / 1000.0 + 1.0).max(MIN_TRACE_SECONDS);
                let row = TraceRow {
                    t_ms: 0.0,
                    throughput_mbps: 1000.0,
                    loss_rate: 0.0,
                    rtt_ms: 10.0,
                };
                Ok(NetworkTrace::constant("lossless", seconds, row))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scene_path: PathBuf,
    pub out_dir: PathBuf,
    /// Overrides the scene's own game-state resolution.
    pub state_resolution: Option<(usize, usize)>,
    pub downsample: usize,
    pub codec: CodecConfig,
    pub network: NetworkSource,
    pub seed: u64,
    pub scheme: Scheme,
    pub budget_ms: f64,
    /// Defaults to the budget minus the recovery time.
    pub timeout_ms: Option<f64>,
    /// Write ground truth and states as well as shown frames and masks.
    pub write_frames: bool,
}

impl RunConfig {
    pub fn new(scene_path: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            scene_path: scene_path.into(),
            out_dir: out_dir.into(),
            state_resolution: None,
            downsample: crate::gamestate::DEFAULT_DOWNSAMPLE,
            codec: CodecConfig::default(),
            network: NetworkSource::Profile {
                profile: Profile::Leo,
                seconds: 300.0,
            },
            seed: 0,
            scheme: Scheme::Recover,
            budget_ms: 80.0,
            timeout_ms: None,
            write_frames: true,
        }
    }

    pub fn session_config(&self) -> SessionConfig {
        let mut cfg = SessionConfig::new(self.scheme, self.seed);
        cfg.scheduler = SchedulerConfig::new(self.budget_ms, cfg.latency.t_inference_ms);
        if let Some(t) = self.timeout_ms {
            cfg.scheduler.timeout_ms = t;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        if self.downsample == 0 {
            return Err(Error::Config("downsample factor must be at least 1".into()));
        }
        if let Some((w, h)) = self.state_resolution {
            if w < MIN_STATE_DIM || h < MIN_STATE_DIM {
                return Err(Error::InvalidResolution {
                    width: w,
                    height: h,
                    reason: "game states need at least 8x8 cells",
                });
            }
        }
        if let NetworkSource::Profile { seconds, .. } = self.network {
            if !(seconds >= MIN_TRACE_SECONDS) {
                return Err(Error::Config(format!("trace duration must be at least {MIN_TRACE_SECONDS} s")));
            }
        }
        self.session_config().validate()
    }
}

/// Paths and report of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: SessionReport,
    pub report_csv: PathBuf,
    pub summary_json: PathBuf,
    pub bitstream: PathBuf,
}

/// Writes a fixture scene to `out`.
pub fn cmd_scene_gen(kind: SceneKind, opts: &FixtureOptions, out: impl AsRef<Path>) -> Result<SceneModel> {
    let scene = fixtures::generate(kind, opts);
    save_scene(&scene, out)?;
    Ok(scene)
}

fn create_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

pub fn render_frames(scene: &SceneModel) -> Result<Vec<RgbFrame>> {
    (0..scene.frame_count()).map(|f| render_ground_truth(scene, f)).collect()
}

pub fn extract_states(scene: &SceneModel, downsample: usize, resolution: (usize, usize)) -> Result<Vec<GameStateFrame>> {
    (0..scene.frame_count())
        .map(|f| extract_state(scene, f, downsample, resolution))
        .collect()
}

pub fn save_frames(frames: &[RgbFrame], dir: impl AsRef<Path>) -> Result<()> {
    let dir = create_dir(dir.as_ref())?;
    for (f, frame) in frames.iter().enumerate() {
        frame.save_ppm(dir.join(frame_name(f)))?;
    }
    Ok(())
}

/// Reads `frame_*.ppm` from `dir` in index order.
pub fn load_frames(dir: impl AsRef<Path>) -> Result<Vec<RgbFrame>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("frame_") && n.ends_with(".ppm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no frame_*.ppm files in {}", dir.as_ref().display())));
    }
    paths.iter().map(RgbFrame::load_ppm).collect()
}

pub fn save_states(states: &[GameStateFrame], dir: impl AsRef<Path>) -> Result<()> {
    let dir = create_dir(dir.as_ref())?;
    for s in states {
        let (pgm, depth) = state_names(s.frame_index);
        s.save(dir.join(pgm), dir.join(depth))?;
    }
    Ok(())
}

pub fn save_bitstream(frames: &[EncodedFrame], codec: &CodecConfig, path: impl AsRef<Path>) -> Result<()> {
    let (width, height) = frames
        .first()
        .map(|f| (f.width, f.height))
        .ok_or_else(|| Error::Config("nothing to encode".into()))?;
    let header = StreamHeader {
        width,
        height,
        gop: codec.gop,
        q: codec.q,
    };
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_stream(&mut w, &header, frames)?;
    w.flush()?;
    Ok(())
}

pub fn load_bitstream(path: impl AsRef<Path>) -> Result<(StreamHeader, Vec<EncodedFrame>)> {
    read_stream(std::io::BufReader::new(fs::File::open(path)?))
}

/// Runs render, extract, encode, simulate and metrics, writing every
/// artifact under `cfg.out_dir`. Errors carry the name of the failing stage.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let out = create_dir(&cfg.out_dir).map_err(|e| e.in_stage("config"))?;
    let scene = load_scene(&cfg.scene_path).map_err(|e| e.in_stage("scene"))?;

    let ground_truth = render_frames(&scene).map_err(|e| e.in_stage("render"))?;
    let state_res = cfg.state_resolution.unwrap_or(scene.state_resolution);
    let states = extract_states(&scene, cfg.downsample, state_res).map_err(|e| e.in_stage("extract"))?;
    if cfg.write_frames {
        save_frames(&ground_truth, out.join(TRUTH_DIR)).map_err(|e| e.in_stage("render"))?;
        save_states(&states, out.join(STATE_DIR)).map_err(|e| e.in_stage("extract"))?;
    }

    let (encoded, recon) = encode(&ground_truth, &cfg.codec).map_err(|e| e.in_stage("encode"))?;
    let bitstream = out.join(BITSTREAM_FILE);
    save_bitstream(&encoded, &cfg.codec, &bitstream).map_err(|e| e.in_stage("encode"))?;
    let baseline_psnr = recon
        .iter()
        .zip(&ground_truth)
        .map(|(r, g)| psnr(r, g))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("metrics"))?;
    drop(recon);

    let session = cfg.session_config();
    let inputs = SessionInputs {
        palette: scene.palette.clone(),
        ground_truth,
        encoded,
        states,
        baseline_psnr,
    };
    let trace = cfg
        .network
        .trace(cfg.seed, inputs.len(), session.scheduler.frame_interval_ms)
        .map_err(|e| e.in_stage("trace"))?;
    trace.save(out.join(TRACE_FILE)).map_err(|e| e.in_stage("trace"))?;

    let frame_dir = create_dir(&out.join(FRAME_DIR)).map_err(|e| e.in_stage("simulate"))?;
    let mask_dir = create_dir(&out.join(MASK_DIR)).map_err(|e| e.in_stage("simulate"))?;
    let write = cfg.write_frames;
    let report = simulate_session_with(&inputs, &trace, &session, |shown| {
        if write {
            shown.frame.save_ppm(frame_dir.join(frame_name(shown.frame_index)))?;
            shown.mask.save(mask_dir.join(mask_name(shown.frame_index)))?;
        }
        Ok(())
    })
    .map_err(|e| e.in_stage("simulate"))?;

    let report_csv = out.join(REPORT_CSV);
    let summary_json = out.join(SUMMARY_JSON);
    write_report(&report, &report_csv, &summary_json).map_err(|e| e.in_stage("report"))?;
    Ok(RunOutput {
        report,
        report_csv,
        summary_json,
        bitstream,
    })
}

pub fn write_report(report: &SessionReport, csv_path: &Path, json_path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(csv_path)?);
    report.write_csv(&mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(fs::File::create(json_path)?);
    report.write_json(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Inputs of a one-off recovery from files on disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecoverArgs {
    pub frame_index: usize,
    pub prev_frame: PathBuf,
    /// Game states as `(pgm, depth)` pairs for the previous and current frame.
    pub prev_state: Option<(PathBuf, PathBuf)>,
    pub curr_state: Option<(PathBuf, PathBuf)>,
    /// Scene whose palette colours the states.
    pub scene: Option<PathBuf>,
    /// Frame before `prev_frame`, used when no states are given.
    pub before_prev: Option<PathBuf>,
    pub partial: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
}

/// One line of the recovery log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverRecord {
    pub frame_index: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub coverage_fraction: f64,
    pub enhance: EnhanceParams,
}

fn load_state(paths: &(PathBuf, PathBuf), frame_index: usize) -> Result<GameStateFrame> {
    GameStateFrame::load(&paths.0, &paths.1, frame_index, 1)
}

/// Recovers one frame and writes it to `args.out`.
pub fn cmd_recover(args: &RecoverArgs, cfg: &RecoveryConfig) -> Result<RecoverRecord> {
    let prev = RgbFrame::load_ppm(&args.prev_frame)?;
    let partial = match (&args.partial, &args.mask) {
        (Some(p), Some(m)) => Some((RgbFrame::load_ppm(p)?, CorruptionMask::from_pgm(&GrayImage::load(m)?, args.frame_index))),
        (None, None) => None,
        _ => return Err(Error::Config("a partial frame needs both the frame and its mask".into())),
    };
    let palette: Palette;
    let states;
    let before_prev;
    let guidance = match (&args.prev_state, &args.curr_state, &args.before_prev) {
        (Some(p), Some(c), _) => {
            let scene = args
                .scene
                .as_ref()
                .ok_or_else(|| Error::Config("game-state guidance needs the scene for its palette".into()))?;
            palette = load_scene(scene)?.palette;
            states = (load_state(p, args.frame_index.saturating_sub(1))?, load_state(c, args.frame_index)?);
            Guidance::GameStates {
                prev: &states.0,
                curr: &states.1,
                palette: &palette,
            }
        }
        (None, None, Some(b)) => {
            before_prev = RgbFrame::load_ppm(b)?;
            Guidance::PreviousFrames {
                before_prev: &before_prev,
            }
        }
        _ => {
            return Err(Error::Config(
                "give both game states, or the frame before the previous one".into(),
            ))
        }
    };
    let input = RecoveryInput {
        guidance,
        prev_frame: &prev,
        partial: partial.as_ref().map(|(frame, mask)| PartialFrame { frame, mask }),
    };
    let output = recover(&input, cfg)?;
    output.frame.save_ppm(&args.out)?;
    let (psnr_db, ssim_v) = match &args.truth {
        Some(t) => {
            let truth = RgbFrame::load_ppm(t)?;
            (Some(psnr(&output.frame, &truth)?), Some(ssim(&output.frame, &truth)?))
        }
        None => (None, None),
    };
    Ok(RecoverRecord {
        frame_index: args.frame_index,
        psnr: psnr_db,
        ssim: ssim_v,
        coverage_fraction: output.coverage.fraction(),
        enhance: output.params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::FrameStatus;

    fn small_scene(dir: &Path) -> PathBuf {
        let mut opts = FixtureOptions::for_kind(SceneKind::Pan);
        opts.frames = 12;
        opts.rgb_resolution = (96, 64);
        opts.state_resolution = (96, 64);
        let path = dir.join("scene.txt");
        cmd_scene_gen(SceneKind::Pan, &opts, &path).unwrap();
        path
    }

    #[test]
    fn resolution_parsing() {
        assert_eq!(parse_resolution("128x64").unwrap(), (128, 64));
        assert!(parse_resolution("128").is_err());
        assert!(parse_resolution("ax2").is_err());
    }

    #[test]
    fn lossless_run_delivers_everything_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let scene = small_scene(dir.path());
        let mut cfg = RunConfig::new(&scene, dir.path().join("run"));
        cfg.network = NetworkSource::Lossless;
        cfg.codec.gop = 4;
        let out = cmd_pipeline(&cfg).unwrap();
        assert!(out.report.frames.iter().all(|r| r.outcome.status == FrameStatus::Delivered));

        let run = dir.path().join("run");
        let (header, frames) = load_bitstream(&out.bitstream).unwrap();
        assert_eq!((header.width, header.height, header.gop), (96, 64, 4));
        assert_eq!(frames.len(), 12);
        assert_eq!(load_frames(run.join(FRAME_DIR)).unwrap().len(), 12);
        assert_eq!(load_frames(run.join(TRUTH_DIR)).unwrap().len(), 12);
        let (pgm, depth) = state_names(3);
        let s = GameStateFrame::load(run.join(STATE_DIR).join(pgm), run.join(STATE_DIR).join(depth), 3, 5).unwrap();
        assert_eq!(s.dims(), (96, 64));
        let mask = GrayImage::load(run.join(MASK_DIR).join(mask_name(0))).unwrap();
        assert!(CorruptionMask::from_pgm(&mask, 0).all_valid_cells());
        let back = SessionReport::read_csv(fs::File::open(&out.report_csv).unwrap(), "lossless", 0).unwrap();
        assert_eq!(back.frames.len(), 12);
        NetworkTrace::load(run.join(TRACE_FILE)).unwrap();
    }

    #[test]
    fn stage_named_in_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::new(dir.path().join("missing.txt"), dir.path().join("run"));
        let err = cmd_pipeline(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("scene stage failed"), "{err}");

        let mut cfg = RunConfig::new(small_scene(dir.path()), dir.path().join("run"));
        cfg.timeout_ms = Some(90.0);
        let err = cmd_pipeline(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("config stage failed"), "{err}");
    }

    #[test]
    fn recover_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let scene_path = small_scene(dir.path());
        let scene = load_scene(&scene_path).unwrap();
        let frames = render_frames(&scene).unwrap();
        let states = extract_states(&scene, 1, scene.state_resolution).unwrap();
        save_frames(&frames, dir.path().join("f")).unwrap();
        save_states(&states, dir.path().join("s")).unwrap();
        let st = |f: usize| {
            let (a, b) = state_names(f);
            (dir.path().join("s").join(a), dir.path().join("s").join(b))
        };
        let args = RecoverArgs {
            frame_index: 5,
            prev_frame: dir.path().join("f").join(frame_name(4)),
            prev_state: Some(st(4)),
            curr_state: Some(st(5)),
            scene: Some(scene_path),
            truth: Some(dir.path().join("f").join(frame_name(5))),
            out: dir.path().join("out.ppm"),
            ..Default::default()
        };
        let rec = cmd_recover(&args, &RecoveryConfig::default()).unwrap();
        let reuse = psnr(&frames[4], &frames[5]).unwrap();
        assert!(rec.psnr.unwrap() > reuse, "{:?} vs {reuse}", rec.psnr);
        assert!(RgbFrame::load_ppm(&args.out).is_ok());

        let bad = RecoverArgs {
            prev_state: None,
            ..args
        };
        assert!(cmd_recover(&bad, &RecoveryConfig::default()).is_err());
    }
}
