#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Outcome {
    pub code: i32,
    pub stderr: String,
}

pub fn nts(args: &[&str], threads: Option<usize>) -> Outcome {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nts"));
    cmd.args(args).env_remove("NTS_THREADS").env("RUST_LOG", "error");
    if let Some(t) = threads {
        cmd.env("NTS_THREADS", t.to_string());
    }
    let out = cmd.output().expect("spawn nts");
    Outcome {
        code: out.status.code().expect("exit code"),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

/// Runs `command` on `config` into `dir/out` and returns the output directory.
pub fn run_ok(command: &str, config: &Path, out: &Path, threads: Option<usize>) -> PathBuf {
    let o = nts(
        &[command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()],
        threads,
    );
    assert_eq!(o.code, 0, "{command} failed: {}", o.stderr);
    out.to_path_buf()
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

pub const BSC_CURVES: &str = r#"{
  "channel": {"name": "bsc", "rows": [[0.9, 0.1], [0.1, 0.9]]},
  "q0": [0.5, 0.5],
  "params": {"rate_grid": {"start": 0.0, "stop": 0.7, "step": 0.01}}
}"#;

/// `I(Q;P)` for the BSC with crossover 0.1 under uniform input, in nats.
pub fn bsc_capacity() -> f64 {
    let h = -(0.1f64 * 0.1f64.ln() + 0.9 * 0.9f64.ln());
    2f64.ln() - h
}
