use std::path::Path;
use std::process::{Command, Output};

use statecast::fixtures::{FixtureOptions, SceneKind};
use statecast::netsim::{NetworkTrace, Scheme, TraceRow};
use statecast::pipeline::{cmd_pipeline, cmd_scene_gen, NetworkSource, RunConfig};
use statecast::scene::load_scene;

fn statecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_statecast"))
        .args(args)
        .env_remove("STATECAST_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_lists_every_flag() {
    let simulate = stdout(&statecast(&["simulate", "--help"]));
    for flag in [
        "--profile", "--seed", "--scheme", "--budget-ms", "--timeout-ms", "--state-res", "--downsample", "--gop", "--q", "--mtu",
        "--trace", "--lossless", "--scene", "--out",
    ] {
        assert!(simulate.contains(flag), "simulate --help lacks {flag}");
    }
    assert!(simulate.contains("STATECAST_SEED"));
    let top = stdout(&statecast(&["--help"]));
    for sub in ["scene-gen", "render", "extract", "encode", "simulate", "report", "recover"] {
        assert!(top.contains(sub), "--help lacks {sub}");
    }
}

#[test]
fn scene_gen_is_deterministic_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    for p in [&a, &b] {
        let o = statecast(&["scene-gen", "--kind", "pan", "--seed", "3", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let scene = load_scene(&a).unwrap();
    assert_eq!(scene.camera_path.len(), 60);
    let eye = |f: usize| scene.camera_path[f].view.inverse().unwrap().transform_point(statecast::geom::Vec3::new(0.0, 0.0, 0.0));
    let step = eye(1).x - eye(0).x;
    assert!(step > 0.0);
    for f in 1..60 {
        assert!((eye(f).x - eye(f - 1).x - step).abs() < 1e-9);
        assert!((eye(f).y - eye(0).y).abs() < 1e-9 && (eye(f).z - eye(0).z).abs() < 1e-9);
    }

    let v = dir.path().join("village.txt");
    assert!(statecast(&["scene-gen", "--kind", "village_toy", "--frames", "2", "--out", v.to_str().unwrap()]).status.success());
    assert_eq!(load_scene(&v).unwrap().objects.len(), 40);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(statecast(&["trace", "--profile", "5G", "--seconds", "20", "--seed", "11", "--out", a.to_str().unwrap()]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_statecast"))
        .args(["trace", "--profile", "5G", "--seconds", "20", "--out", b.to_str().unwrap()])
        .env("STATECAST_SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn artifacts_chain_through_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let ok = |args: &[&str]| {
        let o = statecast(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    ok(&["scene-gen", "--kind", "orbit", "--frames", "6", "--resolution", "96x64", "--state-res", "96x64", "--out", &p("s.txt")]);
    ok(&["render", "--scene", &p("s.txt"), "--out", &p("frames")]);
    ok(&["extract", "--scene", &p("s.txt"), "--out", &p("states"), "--downsample", "2"]);
    ok(&["encode", "--frames", &p("frames"), "--out", &p("b.scv"), "--gop", "3"]);
    let (_, encoded) = statecast::pipeline::load_bitstream(p("b.scv")).unwrap();
    assert_eq!(encoded.len(), 6);
    ok(&["simulate", "--scene", &p("s.txt"), "--out", &p("run"), "--lossless", "--scheme", "reuse", "--no-frames"]);
    let summary = stdout(&ok(&["report", "--report", &p("run/report.csv"), "--bursts", &p("bursts.csv")]));
    assert!(summary.contains("\"delivered\": 6"), "{summary}");
    assert!(Path::new(&p("bursts.csv")).exists());

    let rec = stdout(&ok(&[
        "recover", "--frame-index", "3", "--prev", &p("frames/frame_00002.ppm"), "--prev-state", &p("states/state_00002.pgm"),
        "--curr-state", &p("states/state_00003.pgm"), "--scene", &p("s.txt"), "--truth", &p("frames/frame_00003.ppm"),
        "--out", &p("r.ppm"),
    ]));
    let record: serde_json::Value = serde_json::from_str(rec.trim()).unwrap();
    assert_eq!(record["frame_index"], 3);
    assert!(record["psnr"].as_f64().unwrap() > 20.0);
    assert!(record["enhance"]["gain"].is_array());
}

#[test]
fn failures_exit_nonzero_with_stage() {
    let o = statecast(&["simulate", "--scene", "/definitely/missing.txt", "--out", "/tmp/statecast-missing"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("scene stage failed"));
    let o = statecast(&["simulate", "--scene", "x", "--out", "y", "--scheme", "fec:abc"]);
    assert!(!o.status.success());
}

#[test]
fn recovery_beats_reuse_on_pan() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = FixtureOptions::for_kind(SceneKind::Pan);
    opts.rgb_resolution = (160, 96);
    let scene = dir.path().join("pan.txt");
    cmd_scene_gen(SceneKind::Pan, &opts, &scene).unwrap();
    let trace = dir.path().join("t.csv");
    let row = TraceRow {
        t_ms: 0.0,
        throughput_mbps: 30.0,
        loss_rate: 0.15,
        rtt_ms: 30.0,
    };
    NetworkTrace::constant("lossy", 10.0, row).save(&trace).unwrap();
    let run = |scheme: Scheme| {
        let mut cfg = RunConfig::new(&scene, dir.path().join(scheme.to_string()));
        cfg.scheme = scheme;
        cfg.seed = 2;
        cfg.network = NetworkSource::File(trace.clone());
        cfg.write_frames = false;
        cmd_pipeline(&cfg).unwrap().report.summary
    };
    let (recover, reuse) = (run(Scheme::Recover), run(Scheme::Reuse));
    assert!(recover.predicted + recover.partial_recovered > 0);
    assert!(recover.mean_psnr_db > reuse.mean_psnr_db, "{} vs {}", recover.mean_psnr_db, reuse.mean_psnr_db);
}
