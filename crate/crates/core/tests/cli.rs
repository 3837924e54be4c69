use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

const BIN: &str = env!("CARGO_BIN_EXE_slackline");

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A tiny dataset, encoder and autoencoder produced through the CLI itself.
fn workdir() -> &'static PathBuf {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        let cfg = dir.join("cfg.json");
        std::fs::write(
            &cfg,
            r#"{"collect": {"episodes": 12, "goals": 8}, "train": {"d": 8, "hidden": 16, "epochs": 2}}"#,
        )
        .unwrap();
        let (ds, enc, ae) = (dir.join("ds.jsonl"), dir.join("enc.bin"), dir.join("ae.bin"));
        ok(&["collect", "--config", s(&cfg), "--out", s(&ds), "--seed", "4"]);
        ok(&["train", "--config", s(&cfg), "--dataset", s(&ds), "--out", s(&enc)]);
        ok(&["train-ae", "--config", s(&cfg), "--dataset", s(&ds), "--out", s(&ae)]);
        dir
    })
}

fn models(dir: &Path) -> Vec<String> {
    [
        "--dataset",
        "ds.jsonl",
        "--encoder",
        "enc.bin",
        "--autoencoder",
        "ae.bin",
    ]
    .iter()
    .enumerate()
    .map(|(i, a)| {
        if i % 2 == 1 {
            s(&dir.join(a)).to_string()
        } else {
            a.to_string()
        }
    })
    .collect()
}

fn with<'a>(base: &'a [&'a str], extra: &'a [String]) -> Vec<&'a str> {
    base.iter()
        .copied()
        .chain(extra.iter().map(String::as_str))
        .collect()
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = workdir();
    let m = models(dir);
    let args = with(
        &[
            "run",
            "--planner",
            "contrastive",
            "--controller",
            "leader-follower",
            "--seed",
            "7",
        ],
        &m,
    );
    let a = ok(&args).stdout;
    let b = ok(&args).stdout;
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["planner"], "contrastive");
}

#[test]
fn run_renders_and_render_replays_a_result() {
    let dir = workdir();
    let m = models(dir);
    let frames = dir.join("frames_run");
    let result = dir.join("ep.json");
    ok(&with(
        &[
            "run",
            "--planner",
            "template",
            "--seed",
            "3",
            "--out",
            s(&result),
            "--render",
            s(&frames),
        ],
        &m,
    ));
    let n = std::fs::read_dir(&frames).unwrap().count();
    assert!(n >= 2);
    let again = dir.join("frames_render");
    ok(&["render", "--result", s(&result), "--out", s(&again)]);
    assert_eq!(std::fs::read_dir(&again).unwrap().count(), n);
    assert_eq!(
        std::fs::read(frames.join("step_000.svg")).unwrap(),
        std::fs::read(again.join("step_000.svg")).unwrap()
    );
}

#[test]
fn eval_output_does_not_depend_on_workers() {
    let dir = workdir();
    let m = models(dir);
    let (a, b) = (dir.join("eval_a"), dir.join("eval_b"));
    let base = ["eval", "--matrix", "full", "--episodes", "6", "--seed", "2"];
    ok(&with(
        &[&base[..], &["--workers", "1", "--out", s(&a)]].concat(),
        &m,
    ));
    ok(&with(
        &[&base[..], &["--workers", "3", "--out", s(&b)]].concat(),
        &m,
    ));
    for f in [
        "metrics.csv",
        "metrics_success_only.csv",
        "manifest.json",
        "results_contrastive+leader-follower.jsonl",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let csv = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn sweep_writes_csv_and_svg() {
    let dir = workdir();
    let m = models(dir);
    let out = dir.join("sweep");
    ok(&with(
        &[
            "sweep",
            "--param",
            "reach_max",
            "--values",
            "0.4,0.5",
            "--episodes",
            "4",
            "--out",
            s(&out),
        ],
        &m,
    ));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("reach_max,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(std::fs::read_to_string(out.join("sweep.svg"))
        .unwrap()
        .contains("<svg"));
}

#[test]
fn unknown_planner_is_a_usage_error_listing_valid_names() {
    let dir = workdir();
    let m = models(dir);
    let out = cli(&with(&["run", "--planner", "oracle"], &m));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["contrastive", "fixed", "random", "template", "autoencoder"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn missing_dataset_is_a_data_error_naming_the_path() {
    let out = cli(&["run", "--dataset", "/nonexistent/ds.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/ds.jsonl"));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = workdir();
    let bad_cfg = dir.join("bad.json");
    std::fs::write(&bad_cfg, r#"{"task": {"reach_mx": 0.5}}"#).unwrap();
    let out = cli(&[
        "collect",
        "--config",
        s(&bad_cfg),
        "--out",
        s(&dir.join("x.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reach_mx"));

    // The contrastive planner without an encoder.
    let ds = dir.join("ds.jsonl");
    let out = cli(&["run", "--dataset", s(&ds), "--planner", "contrastive"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("encoder"));

    let bad_matrix = cli(&[
        "eval",
        "--dataset",
        s(&ds),
        "--matrix",
        "x+y",
        "--out",
        s(&dir.join("e")),
    ]);
    assert_eq!(bad_matrix.status.code(), Some(1));
}
