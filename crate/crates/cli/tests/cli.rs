use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn write_idx(dir: &Path, prefix: &str, count: usize, seed: u32) {
    let mut images = Vec::new();
    for w in [0x0803u32, count as u32, 28, 28] {
        images.extend_from_slice(&w.to_be_bytes());
    }
    let mut labels = Vec::new();
    for w in [0x0801u32, count as u32] {
        labels.extend_from_slice(&w.to_be_bytes());
    }
    let mut state = seed;
    for i in 0..count {
        let label = (i % 10) as u8;
        labels.push(label);
        for r in 0..28 {
            for c in 0..28 {
                state = state.wrapping_mul(1_103_515_245).wrapping_add(12345);
                let noise = (state >> 24) as u8 / 4;
                // Even digits light the left half, odd digits the right half.
                let lit = (c < 14) == label.is_multiple_of(2) && (4..24).contains(&r);
                images.push(if lit { 190 + noise } else { noise });
            }
        }
    }
    fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), images).unwrap();
    fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), labels).unwrap();
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let data = dir.path().join("data/mnist");
        fs::create_dir_all(&data).unwrap();
        write_idx(&data, "train", 80, 1);
        write_idx(&data, "t10k", 30, 2);
        Self { dir }
    }

    fn path(&self, rel: &str) -> std::path::PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_dtnml"))
            .arg("--data-dir")
            .arg(self.path("data"))
            .arg("--out")
            .arg(self.path("out"))
            .args(args)
            .env_remove("DTNML_DATA_DIR")
            .output()
            .unwrap()
    }
}

const SPLIT: [&str; 4] = ["--train-size", "50", "--val-size", "20"];

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s.lines().last().unwrap()).unwrap()
}

#[test]
fn prepare_reports_split_sizes() {
    let f = Fixture::new();
    let out = ok(&f.run(&[&["prepare"][..], &SPLIT].concat()));
    assert!(out.contains("train 50"));
    assert!(out.contains("validation 20"));
    assert!(out.contains("test 30"));
}

#[test]
fn fully_dephased_checkpoint_agrees_on_both_routes() {
    let f = Fixture::new();
    let train: Vec<&str> =
        [&["train"][..], &SPLIT, &["--p", "1", "--ancillas", "1", "--epochs", "2", "--batch-size", "10"]].concat();
    let report = json(&ok(&f.run(&train)));
    let ckpt = f.path("out/model.ckpt");
    assert!(ckpt.is_file());
    assert!(f.path("out/train.json").is_file());
    let ckpt = ckpt.to_str().unwrap();
    let eval_args: Vec<&str> = [&["eval"][..], &SPLIT, &["--checkpoint", ckpt]].concat();
    let first = ok(&f.run(&eval_args));
    assert_eq!(first, ok(&f.run(&eval_args)), "eval must be reproducible");
    let bayes = json(&ok(&f.run(&[&["bayes"][..], &SPLIT, &["--checkpoint", ckpt]].concat())));
    let dense = json(&first);
    assert_eq!(dense["route"], "density-matrix");
    assert_eq!(bayes["route"], "bayesian-network");
    assert_eq!(dense["test_accuracy"], bayes["test_accuracy"]);
    assert_eq!(dense["test_accuracy"], report["test_accuracy"]);
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let f = Fixture::new();
    let args: Vec<&str> = [
        &["sweep"][..],
        &SPLIT,
        &["--p", "0,1", "--ancillas", "0", "--runs", "1", "--epochs", "1", "--batch-size", "25"],
    ]
    .concat();
    let out = ok(&f.run(&args));
    assert!(out.contains("k=0 slope="));
    let csv = fs::read_to_string(f.path("out/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(fs::read_to_string(f.path("out/accuracy.svg")).unwrap().starts_with("<svg"));
    assert!(f.path("out/summary.json").is_file());
}

#[test]
fn analyze_identity_network() {
    let f = Fixture::new();
    let out = ok(&f.run(&["analyze", "--node", "0", "--p", "0.5", "--lambda", "0.2,0.7", "--stinespring"]));
    assert!(out.contains("wrote"));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f.path("out/analysis-node0.json")).unwrap()).unwrap();
    assert_eq!(doc["node"], 0);
    assert!(doc["stinespring"]["realized_residual"].as_f64().unwrap() == 0.0);
    assert!(doc["lambda"].is_object());
}

#[test]
fn exit_codes_distinguish_failures() {
    let f = Fixture::new();
    let bad_config = f.path("bad.json");
    fs::write(&bad_config, r#"{"unknown": 1}"#).unwrap();
    let out = f.run(&["--config", bad_config.to_str().unwrap(), "prepare"]);
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_dtnml"))
        .args(["--data-dir", f.path("missing").to_str().unwrap(), "prepare"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = f.run(&[&["train"][..], &SPLIT, &["--p", "1.5"]].concat());
    assert_eq!(out.status.code(), Some(2));
}
