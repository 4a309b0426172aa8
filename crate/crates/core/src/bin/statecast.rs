use std::fs::OpenOptions;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use statecast::codec::{encode, CodecConfig};
use statecast::fixtures::{FixtureOptions, SceneKind};
use statecast::netsim::{burst_report, generate_trace, Profile, Scheme, SessionReport};
use statecast::pipeline::{self, NetworkSource, RecoverArgs, RunConfig};
use statecast::recovery::RecoveryConfig;
use statecast::scene::load_scene;

#[derive(Parser)]
#[command(name = "statecast", version, about = "Game-state-guided recovery of lost cloud-gaming video frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scene and camera path.
    SceneGen(SceneGenArgs),
    /// Rasterize every frame of a scene to PPM.
    Render(RenderArgs),
    /// Extract game states (PGM index image plus depth sidecar) for every frame.
    Extract(ExtractArgs),
    /// Encode a directory of PPM frames into a bitstream.
    Encode(EncodeArgs),
    /// Generate a network trace CSV for a profile.
    Trace(TraceArgs),
    /// Run render, extract, encode, session replay and scoring end to end.
    Simulate(SimulateArgs),
    /// Summarize a report CSV.
    Report(ReportArgs),
    /// Recover a single frame from files on disk.
    Recover(RecoverCmd),
}

fn resolution(s: &str) -> Result<(usize, usize), String> {
    pipeline::parse_resolution(s).map_err(|e| e.to_string())
}

fn scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: statecast::Error| e.to_string())
}

fn profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: statecast::Error| e.to_string())
}

fn scene_kind(s: &str) -> Result<SceneKind, String> {
    s.parse().map_err(|e: statecast::Error| e.to_string())
}

#[derive(Args)]
struct SeedArg {
    /// Random seed.
    #[arg(long, env = "STATECAST_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CodecArgs {
    /// Frames per group of pictures.
    #[arg(long, default_value_t = CodecConfig::default().gop)]
    gop: usize,
    /// Quantizer step (1 is lossless).
    #[arg(long, default_value_t = CodecConfig::default().q)]
    q: i32,
    /// Maximum packet payload in bytes.
    #[arg(long, default_value_t = CodecConfig::default().mtu)]
    mtu: usize,
    /// Motion search range in pixels.
    #[arg(long, default_value_t = CodecConfig::default().search_range)]
    search_range: i32,
    /// SAD below which an unchanged macroblock is skipped.
    #[arg(long, default_value_t = CodecConfig::default().skip_threshold)]
    skip_threshold: u32,
}

impl CodecArgs {
    fn config(&self) -> CodecConfig {
        CodecConfig {
            gop: self.gop,
            q: self.q,
            mtu: self.mtu,
            search_range: self.search_range,
            skip_threshold: self.skip_threshold,
        }
    }
}

#[derive(Args)]
struct SceneGenArgs {
    /// pan, orbit, two-motion or village_toy.
    #[arg(long, value_parser = scene_kind)]
    kind: SceneKind,
    /// Number of frames (defaults to the kind's own length).
    #[arg(long)]
    frames: Option<usize>,
    /// RGB resolution, WxH.
    #[arg(long, value_parser = resolution)]
    resolution: Option<(usize, usize)>,
    /// Game-state resolution, WxH.
    #[arg(long, value_parser = resolution)]
    state_res: Option<(usize, usize)>,
    #[command(flatten)]
    seed: SeedArg,
    /// Output scene file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Scene file
    #[arg(long)]
    scene: PathBuf,
    /// Output directory for frame_*.ppm.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Scene file
    #[arg(long)]
    scene: PathBuf,
    /// Output directory for state_*.pgm and state_*.depth.
    #[arg(long)]
    out: PathBuf,
    /// Game-state resolution, WxH (defaults to the scene's).
    #[arg(long, value_parser = resolution)]
    state_res: Option<(usize, usize)>,
    /// Keep every k-th vertex.
    #[arg(long, default_value_t = statecast::gamestate::DEFAULT_DOWNSAMPLE)]
    downsample: usize,
}

#[derive(Args)]
struct EncodeArgs {
    /// Directory of frame_*.ppm.
    #[arg(long)]
    frames: PathBuf,
    /// Output bitstream.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Args)]
struct TraceArgs {
    /// 4G, 5G, WiFi or LEO.
    #[arg(long, value_parser = profile, default_value = "LEO")]
    profile: Profile,
    #[command(flatten)]
    seed: SeedArg,
    /// Trace length in seconds.
    #[arg(long, default_value_t = 300.0)]
    seconds: f64,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene file
    #[arg(long)]
    scene: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// 4G, 5G, WiFi or LEO.
    #[arg(long, value_parser = profile, default_value = "LEO")]
    profile: Profile,
    /// Replay this trace CSV instead of generating one.
    #[arg(long, conflicts_with = "lossless")]
    trace: Option<PathBuf>,
    /// Length of the generated trace in seconds.
    #[arg(long, default_value_t = 300.0)]
    trace_seconds: f64,
    /// Use a loss-free network.
    #[arg(long)]
    lossless: bool,
    #[command(flatten)]
    seed: SeedArg,
    /// recover, no-states, reuse or fec:<pct>.
    #[arg(long, value_parser = scheme, default_value = "recover")]
    scheme: Scheme,
    /// Input-to-display latency budget in ms.
    #[arg(long, default_value_t = 80.0)]
    budget_ms: f64,
    /// Recovery timeout in ms (defaults to the budget minus recovery time).
    #[arg(long)]
    timeout_ms: Option<f64>,
    /// Game-state resolution, WxH (defaults to the scene's).
    #[arg(long, value_parser = resolution)]
    state_res: Option<(usize, usize)>,
    /// Keep every k-th vertex.
    #[arg(long, default_value_t = statecast::gamestate::DEFAULT_DOWNSAMPLE)]
    downsample: usize,
    #[command(flatten)]
    codec: CodecArgs,
    /// Skip writing per-frame images.
    #[arg(long)]
    no_frames: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Report CSV written by simulate.
    #[arg(long)]
    report: PathBuf,
    /// Also write the loss-burst histogram to this CSV.
    #[arg(long)]
    bursts: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverCmd {
    /// Index recorded with the result
    #[arg(long, default_value_t = 0)]
    frame_index: usize,
    /// Previous shown frame (PPM).
    #[arg(long)]
    prev: PathBuf,
    /// Previous game state PGM; its depth sidecar is the same path with a .depth extension.
    #[arg(long, requires_all = ["curr_state", "scene"])]
    prev_state: Option<PathBuf>,
    /// Current game state PGM.
    #[arg(long, requires = "prev_state")]
    curr_state: Option<PathBuf>,
    /// Scene file supplying the state palette.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Frame before the previous one, for recovery without game states.
    #[arg(long, conflicts_with = "prev_state")]
    before_prev: Option<PathBuf>,
    /// Partially decoded frame (PPM).
    #[arg(long, requires = "mask")]
    partial: Option<PathBuf>,
    /// Corruption mask of the partial frame (PGM).
    #[arg(long, requires = "partial")]
    mask: Option<PathBuf>,
    /// Ground truth for scoring.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output frame (PPM).
    #[arg(long)]
    out: PathBuf,
    /// Append the JSON record to this file instead of printing it.
    #[arg(long)]
    record: Option<PathBuf>,
}

fn with_depth(pgm: PathBuf) -> (PathBuf, PathBuf) {
    let depth = pgm.with_extension("depth");
    (pgm, depth)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SceneGen(a) => {
            let mut opts = FixtureOptions::for_kind(a.kind);
            opts.seed = a.seed.seed;
            if let Some(n) = a.frames {
                opts.frames = n;
            }
            if let Some(r) = a.resolution {
                opts.rgb_resolution = r;
            }
            if let Some(r) = a.state_res {
                opts.state_resolution = r;
            }
            let scene = pipeline::cmd_scene_gen(a.kind, &opts, &a.out).context("scene-gen")?;
            println!("{} objects, {} frames -> {}", scene.objects.len(), scene.frame_count(), a.out.display());
        }
        Command::Render(a) => {
            let scene = load_scene(&a.scene).context("loading scene")?;
            let frames = pipeline::render_frames(&scene).context("render")?;
            pipeline::save_frames(&frames, &a.out).context("writing frames")?;
            println!("{} frames -> {}", frames.len(), a.out.display());
        }
        Command::Extract(a) => {
            let scene = load_scene(&a.scene).context("loading scene")?;
            let res = a.state_res.unwrap_or(scene.state_resolution);
            let states = pipeline::extract_states(&scene, a.downsample, res).context("extract")?;
            pipeline::save_states(&states, &a.out).context("writing states")?;
            println!("{} states -> {}", states.len(), a.out.display());
        }
        Command::Encode(a) => {
            let codec = a.codec.config();
            let frames = pipeline::load_frames(&a.frames).context("reading frames")?;
            let (encoded, _) = encode(&frames, &codec).context("encode")?;
            pipeline::save_bitstream(&encoded, &codec, &a.out).context("writing bitstream")?;
            let bytes: usize = encoded.iter().map(|f| f.total_bytes()).sum();
            println!("{} frames, {bytes} bytes -> {}", encoded.len(), a.out.display());
        }
        Command::Trace(a) => {
            let trace = generate_trace(a.profile, a.seconds, a.seed.seed).context("trace")?;
            trace.save(&a.out).context("writing trace")?;
            println!(
                "{}: throughput {:.1} Mbps, loss {:.2}%, rtt {:.1} ms -> {}",
                trace.name,
                trace.mean_throughput(),
                trace.mean_loss_rate() * 100.0,
                trace.mean_rtt(),
                a.out.display()
            );
        }
        Command::Simulate(a) => {
            let mut cfg = RunConfig::new(&a.scene, &a.out);
            cfg.network = match (a.lossless, a.trace) {
                (true, _) => NetworkSource::Lossless,
                (false, Some(t)) => NetworkSource::File(t),
                (false, None) => NetworkSource::Profile {
                    profile: a.profile,
                    seconds: a.trace_seconds,
                },
            };
            cfg.seed = a.seed.seed;
            cfg.scheme = a.scheme;
            cfg.budget_ms = a.budget_ms;
            cfg.timeout_ms = a.timeout_ms;
            cfg.state_resolution = a.state_res;
            cfg.downsample = a.downsample;
            cfg.codec = a.codec.config();
            cfg.write_frames = !a.no_frames;
            let out = pipeline::cmd_pipeline(&cfg)?;
            serde_json::to_writer_pretty(io::stdout().lock(), &out.report.summary)?;
            println!();
        }
        Command::Report(a) => {
            let file = std::fs::File::open(&a.report).with_context(|| format!("opening {}", a.report.display()))?;
            let report = SessionReport::read_csv(file, "", 0).context("reading report")?;
            report.write_json(io::stdout().lock())?;
            println!();
            if let Some(path) = a.bursts {
                let mut w = BufWriter::new(std::fs::File::create(&path)?);
                burst_report(&report).write_csv(&mut w)?;
                w.flush()?;
            }
        }
        Command::Recover(a) => {
            let args = RecoverArgs {
                frame_index: a.frame_index,
                prev_frame: a.prev,
                prev_state: a.prev_state.map(with_depth),
                curr_state: a.curr_state.map(with_depth),
                scene: a.scene,
                before_prev: a.before_prev,
                partial: a.partial,
                mask: a.mask,
                truth: a.truth,
                out: a.out,
            };
            let record = pipeline::cmd_recover(&args, &RecoveryConfig::default()).context("recover")?;
            let line = serde_json::to_string(&record)?;
            match a.record {
                Some(path) => {
                    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
                    writeln!(f, "{line}")?;
                }
                None => println!("{line}"),
            }
        }
    }
    Ok(())
}

fn main() -> std::process::ExitCode {
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
