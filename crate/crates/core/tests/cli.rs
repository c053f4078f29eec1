use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use silhouette_calib::experiment::{EVALUATION_FILE, SUITE_FILE};
use silhouette_calib::pipeline::{CALIBRATION_FILE, CORRESPONDENCES_FILE, SOLUTION_FILE};
use silhouette_calib::trellis::TrellisGraph;
use tempfile::tempdir;

fn silcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silcal")).args(args).output().expect("spawn silcal")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn synth(dir: &Path, preset: &str, seed: u64, frames: usize) {
    let out = silcal(&[
        "synth",
        "--preset",
        preset,
        "--seed",
        &seed.to_string(),
        "--frames",
        &frames.to_string(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn calibrate(bundle: &Path, out: &Path, extra: &[&str]) -> Output {
    let (l, r) = (bundle.join("left"), bundle.join("right"));
    let mut args = vec![
        "calibrate",
        "--left",
        l.to_str().unwrap(),
        "--right",
        r.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--ransac-iters",
        "2000",
    ];
    args.extend_from_slice(extra);
    silcal(&args)
}

#[test]
fn calibrate_and_evaluate_are_deterministic() {
    let tmp = tempdir().unwrap();
    let bundle = tmp.path().join("scene");
    synth(&bundle, "single-ellipsoid", 3, 60);

    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let run = tmp.path().join(name);
        let out = calibrate(&bundle, &run, &[]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let ev = silcal(&["evaluate", "--run", run.to_str().unwrap(), "--truth", bundle.to_str().unwrap()]);
        assert_eq!(code(&ev), 0, "{}", String::from_utf8_lossy(&ev.stderr));
        runs.push(run);
    }
    for file in [CALIBRATION_FILE, CORRESPONDENCES_FILE, SOLUTION_FILE, EVALUATION_FILE] {
        let a = fs::read(runs[0].join(file)).unwrap();
        let b = fs::read(runs[1].join(file)).unwrap();
        assert!(!a.is_empty(), "{file} empty");
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn degenerate_scene_exits_3() {
    let tmp = tempdir().unwrap();
    let scene = tmp.path().join("scene.json");
    let file = silhouette_calib::synth::degenerate_scene(20);
    fs::write(&scene, file.to_json()).unwrap();
    let out = silcal(&["synth", "--scene", scene.to_str().unwrap(), "--out", tmp.path().join("b").to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn precondition_failures_exit_2() {
    let tmp = tempdir().unwrap();
    let bundle = tmp.path().join("scene");
    synth(&bundle, "single-ellipsoid", 0, 12);

    let missing_gt = silcal(&["evaluate", "--run", tmp.path().to_str().unwrap(), "--truth", tmp.path().join("nowhere").to_str().unwrap()]);
    assert_eq!(code(&missing_gt), 2);

    let missing_dir = calibrate(&tmp.path().join("nowhere"), &tmp.path().join("r"), &[]);
    assert_eq!(code(&missing_dir), 2);

    let short = tmp.path().join("short");
    synth(&short, "single-ellipsoid", 0, 8);
    let l = bundle.join("left");
    let r = short.join("right");
    let mismatched = silcal(&["calibrate", "--left", l.to_str().unwrap(), "--right", r.to_str().unwrap(), "--out", tmp.path().join("m").to_str().unwrap()]);
    assert_eq!(code(&mismatched), 2, "{}", String::from_utf8_lossy(&mismatched.stderr));

    let bad_sigma = calibrate(&bundle, &tmp.path().join("s"), &["--sigma=-1"]);
    assert_eq!(code(&bad_sigma), 2);

    let unknown = silcal(&["synth", "--preset", "no-such-preset", "--out", tmp.path().join("u").to_str().unwrap()]);
    assert_eq!(code(&unknown), 2);
}

#[test]
fn exact_budget_exits_4() {
    let tmp = tempdir().unwrap();
    let bundle = tmp.path().join("scene");
    synth(&bundle, "single-ellipsoid", 1, 12);
    let out = calibrate(&bundle, &tmp.path().join("r"), &["--exact", "--exact-budget", "10"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_suite_writes_aggregate_only() {
    let tmp = tempdir().unwrap();
    let out = silcal(&["suite", "--presets", "", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let body = fs::read_to_string(tmp.path().join(SUITE_FILE)).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("preset,seed,status"));
    assert!(lines[1].starts_with("aggregate,"));
}

#[test]
fn suite_reports_crossing_risk() {
    let tmp = tempdir().unwrap();
    let out = silcal(&["suite", "--presets", "crossing-motion", "--seeds", "0", "--ransac-iters", "2000", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(tmp.path().join(SUITE_FILE)).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "degenerate_risk").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(&rows[0][0], "crossing-motion");
    assert_eq!(&rows[0][2], "ok");
    assert_eq!(&rows[0][col], "true");
    assert!(tmp.path().join("crossing-motion/seed_0").join(CALIBRATION_FILE).exists());
}

#[test]
fn dump_trellis_round_trips() {
    let tmp = tempdir().unwrap();
    let bundle = tmp.path().join("scene");
    synth(&bundle, "articulated-pair", 0, 10);
    let (l, r) = (bundle.join("left"), bundle.join("right"));
    let dump = tmp.path().join("trellis.txt");
    let codes = tmp.path().join("barcodes.csv");
    let out = silcal(&[
        "dump-trellis",
        "--left",
        l.to_str().unwrap(),
        "--right",
        r.to_str().unwrap(),
        "--out",
        dump.to_str().unwrap(),
        "--barcodes",
        codes.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let g = TrellisGraph::read_text(std::io::BufReader::new(fs::File::open(&dump).unwrap())).unwrap();
    assert_eq!(g.frame_count(), 10);
    assert!(g.layers().iter().all(|l| l.len() >= 2));
    assert!(fs::read_to_string(&codes).unwrap().lines().count() > 1);
}
