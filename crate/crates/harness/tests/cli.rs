//! Runs the `minimax` binary and checks exit codes and written files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn minimax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minimax"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    minimax(args).status.code().expect("exit code")
}

/// Copy of a shipped config with one line replaced.
fn edited(dir: &Path, name: &str, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(config(name)).unwrap();
    assert!(text.contains(from), "{from} not found in {name}");
    let p = dir.join(name);
    fs::write(&p, text.replace(from, to)).unwrap();
    p
}

#[test]
fn solve_writes_summary_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = minimax(&[
        "solve",
        "--config",
        config("continuous.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--plot",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("sigma = "));
    for f in ["summary.csv", "state.csv", "weights.csv", "state.gp"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("key,value\nmode,continuous\n"));
}

#[test]
fn mode_specific_subcommands_accept_their_configs() {
    for (cmd, name) in [
        ("point", "point.toml"),
        ("eliminate", "elimination.toml"),
        ("ordern", "neumann.toml"),
        ("rhs", "rhs.toml"),
    ] {
        assert_eq!(
            code(&[cmd, "--config", config(name).to_str().unwrap()]),
            0,
            "{cmd}"
        );
    }
}

#[test]
fn parse_failures_exit_with_four() {
    assert_eq!(code(&["solve"]), 4);
    assert_eq!(code(&["frobnicate", "--config", "x"]), 4);
    assert_eq!(code(&["solve", "--config", "/definitely/not/here.toml"]), 4);
    assert_eq!(
        code(&[
            "point",
            "--config",
            config("continuous.toml").to_str().unwrap()
        ]),
        4
    );
    assert_eq!(
        code(&[
            "solve",
            "--config",
            config("continuous.toml").to_str().unwrap(),
            "--mode-variant",
            "linear"
        ]),
        4
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = edited(
        dir.path(),
        "continuous.toml",
        "mode = \"continuous\"",
        "mode = \"sideways\"",
    );
    assert_eq!(code(&["solve", "--config", bad.to_str().unwrap()]), 4);
}

#[test]
fn empty_admissible_set_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = edited(
        dir.path(),
        "constrained.toml",
        "h = [[1.0, 0.0], [0.0, 1.0]]",
        "h = [[0.0, 0.0], [0.0, 0.0]]",
    );
    assert_eq!(code(&["solve", "--config", p.to_str().unwrap()]), 2);
}

#[test]
fn singular_problem_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = edited(
        dir.path(),
        "continuous.toml",
        "b1 = [[0.0, 1.0]]",
        "b1 = [[1.0, 0.0]]",
    );
    assert_eq!(code(&["solve", "--config", p.to_str().unwrap()]), 3);
}

#[test]
fn oracle_subcommand_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = config("point.toml");
    let args = [
        "oracle",
        "--config",
        cfg.to_str().unwrap(),
        "--nodes",
        "256",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(code(&args), 0);
    let text = fs::read_to_string(out.join("oracle.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let row = rdr.records().next().unwrap().unwrap();
    assert_eq!(&row[0], "256");
    let rel: f64 = row[3].parse().unwrap();
    assert!(rel < 1e-3, "relative difference {rel}");
}

#[test]
fn elimination_variant_flag_is_accepted() {
    let p = config("elimination.toml");
    assert_eq!(
        code(&[
            "eliminate",
            "--config",
            p.to_str().unwrap(),
            "--mode-variant",
            "linear"
        ]),
        0
    );
}
