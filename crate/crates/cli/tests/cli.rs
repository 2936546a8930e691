use std::path::Path;
use std::process::{Command, Output};

fn reidtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reidtrack"))
        .args(args)
        .output()
        .expect("spawn reidtrack")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_SPEC: &str = r#"{
  "agents": 2, "frames": 120, "image": [640, 480],
  "events": [{"type": "crossing", "agents": [0, 1], "start": 30, "end": 80}],
  "det_noise": 0.5, "drop_rate": 0.0, "fp_rate": 0.0,
  "emb": {"dim": 16, "class_sep": 5.0, "noise": 1.0},
  "gallery_per_agent": 20, "occlusion_iou": null, "seed": 3
}"#;

fn small_scenario(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("spec.json");
    std::fs::write(&spec, SMALL_SPEC).unwrap();
    let out = dir.join("scenario");
    let o = reidtrack(&["synth", "--spec", p(&spec), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn synth_then_run_prints_two_decimal_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    let o = reidtrack(&["synth", "--preset", "normal_high", "--out", p(&d)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "detections.jsonl",
        "embeddings.emb",
        "gt.csv",
        "gallery.jsonl",
        "scenario.json",
    ] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let o = reidtrack(&["run", "--scenario", p(&d), "--tracker", "centroid", "--no-reid"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("| 100.00% |"), "{table}");
    assert!(table.contains("0/1365"), "{table}");
}

#[test]
fn report_renders_table_columns() {
    let dir = tempfile::tempdir().unwrap();
    let s = small_scenario(dir.path());
    let out = dir.path().join("r");
    let o = reidtrack(&["run", "--scenario", p(&s), "--out", p(&out), "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let o = reidtrack(&["report", p(&out.join("report.json"))]);
    assert!(o.status.success());
    let table = stdout(&o);
    let header: Vec<&str> = table
        .lines()
        .next()
        .unwrap()
        .split('|')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .collect();
    assert_eq!(
        header,
        ["DT", "Tracker", "ReIDer", "ReID Count", "Incorrect ID", "Result"]
    );
    // Baseline and ReID row for each of the three trackers.
    assert_eq!(table.lines().count(), 2 + 6);
    assert_eq!(table, std::fs::read_to_string(out.join("report.txt")).unwrap());
}

#[test]
fn track_then_eval_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let s = small_scenario(dir.path());
    let model = dir.path().join("m.svm");
    let tracks = dir.path().join("t.json");
    let rep = dir.path().join("rep.json");
    let o = reidtrack(&[
        "train-reid",
        "--gallery",
        p(&s.join("gallery.jsonl")),
        "--out",
        p(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = reidtrack(&[
        "track",
        "--detections",
        p(&s.join("detections.jsonl")),
        "--embeddings",
        p(&s.join("embeddings.emb")),
        "--model",
        p(&model),
        "--tracker",
        "sort",
        "--out",
        p(&tracks),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = reidtrack(&[
        "eval",
        "--tracks",
        p(&tracks),
        "--gt",
        p(&s.join("gt.csv")),
        "--out",
        p(&rep),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let single: serde_json::Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();

    let all = dir.path().join("all");
    let o = reidtrack(&[
        "run",
        "--scenario",
        p(&s),
        "--tracker",
        "sort",
        "--no-baseline",
        "--out",
        p(&all),
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let joint: serde_json::Value = serde_json::from_slice(&std::fs::read(all.join("report.json")).unwrap()).unwrap();
    assert_eq!(single["entries"][0]["report"], joint["entries"][0]["report"]);
    assert_eq!(joint["entries"][0]["reider"], "RBF-SVM");
}

#[test]
fn eval_with_mismatched_frame_range_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = small_scenario(dir.path());
    let tracks = dir.path().join("t.json");
    let o = reidtrack(&[
        "track",
        "--detections",
        p(&s.join("detections.jsonl")),
        "--embeddings",
        p(&s.join("embeddings.emb")),
        "--out",
        p(&tracks),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gt = std::fs::read_to_string(s.join("gt.csv"))
        .unwrap()
        .replace("#frames=120", "#frames=150");
    let bad = dir.path().join("gt.csv");
    std::fs::write(&bad, gt).unwrap();
    let o = reidtrack(&["eval", "--tracks", p(&tracks), "--gt", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("frame range mismatch"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_a_usage_error_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# comment\ntracker.kind = sort\ntracker.speed = 3\n").unwrap();
    let o = reidtrack(&["run", "--config", p(&cfg), "--preset", "normal_high"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.cfg:3"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(reidtrack(&["--frobnicate"]).status.code(), Some(1));
    assert_eq!(reidtrack(&["run", "--preset", "no_such_preset"]).status.code(), Some(1));
    assert_eq!(reidtrack(&["run"]).status.code(), Some(1));
    assert_eq!(reidtrack(&["--help"]).status.code(), Some(0));
    assert_eq!(reidtrack(&["--version"]).status.code(), Some(0));
}

#[test]
fn malformed_detections_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("dets.jsonl");
    std::fs::write(
        &f,
        "{\"format\":\"reidtrack-detections\",\"version\":1}\n{\"frame\":0,\"dets\":[]}\n{\"frame\":1,\"dets\":[{\"box\":[1,2\n",
    )
    .unwrap();
    let o = reidtrack(&["track", "--detections", p(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dets.jsonl:3"), "{}", stderr(&o));
}

#[test]
fn synth_is_reproducible_and_seed_driven() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, SMALL_SPEC).unwrap();
    let read = |d: &str| std::fs::read(dir.path().join(d).join("detections.jsonl")).unwrap();
    for (out, seed) in [("a", "9"), ("b", "9"), ("c", "10")] {
        let o = reidtrack(&[
            "synth",
            "--spec",
            p(&spec),
            "--seed",
            seed,
            "--out",
            p(&dir.path().join(out)),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    // The manifest written next to the files is itself a valid spec.
    let again = dir.path().join("d");
    let o = reidtrack(&[
        "synth",
        "--spec",
        p(&dir.path().join("a/scenario.json")),
        "--out",
        p(&again),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read("a"), read("d"));
}

#[test]
fn detections_stream_through_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let s = small_scenario(dir.path());
    let file = std::fs::File::open(s.join("detections.jsonl")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_reidtrack"))
        .args([
            "track",
            "--embeddings",
            p(&s.join("embeddings.emb")),
            "--tracker",
            "centroid",
        ])
        .stdin(file)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["format"], "reidtrack-tracks");
    assert_eq!(v["frames"].as_array().unwrap().len(), 120);
}

#[test]
fn config_echo_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let s = small_scenario(dir.path());
    let first = dir.path().join("first");
    let o = reidtrack(&[
        "run",
        "--scenario",
        p(&s),
        "--tracker",
        "sort,deepsort",
        "--speed-limit",
        "40",
        "--min-conf",
        "0.4",
        "--out",
        p(&first),
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read(first.join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&report).unwrap();
    let cfg: String = v["config"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| format!("{k} = {}\n", v.as_str().unwrap()))
        .collect();
    let cfg_path = dir.path().join("echo.cfg");
    std::fs::write(&cfg_path, cfg).unwrap();
    let second = dir.path().join("second");
    let o = reidtrack(&["run", "--config", p(&cfg_path), "--out", p(&second), "-q"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(report, std::fs::read(second.join("report.json")).unwrap());
}
