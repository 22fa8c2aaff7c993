use std::path::Path;
use std::process::{Command, Output};

use l4dict::io::load_matrix;
use l4dict_core::linalg::orthogonality_deviation;
use serde_json::Value;

fn l4dict(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l4dict"))
        .args(args)
        .env_remove("L4DICT_SEED")
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = l4dict(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn help_exits_cleanly() {
    let out = l4dict(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("phase-transition"));
}

#[test]
fn verify_passes_and_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = l4dict(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS")));
    assert!(!stdout.lines().any(|l| l.starts_with("FAIL")));
    assert!(dir.path().join("verify.csv").exists());
}

#[test]
fn solve_writes_dictionary_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = l4dict(&[
        "solve", "--alpha", "inf", "--n", "10", "--p", "5000", "--theta", "0.3", "--out", d,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let a = load_matrix(dir.path().join("A.txt")).unwrap();
    assert_eq!((a.rows(), a.cols()), (10, 10));
    assert!(orthogonality_deviation(&a) < 1e-10);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iter,g_norm,fhat_norm,displacement"));
    let last: Vec<&str> = lines.last().unwrap().split(',').collect();
    let g: f64 = last[1].parse().unwrap();
    assert!(g > 0.95, "g_norm {g}");
    let m = manifest(dir.path());
    assert_eq!(m["command"], "solve");
    assert_eq!(m["seed"], 42);
    assert_eq!(m["config"]["solver"]["alpha"], "inf");
}

#[test]
fn generate_then_solve_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let out = l4dict(&[
        "generate",
        "--n",
        "6",
        "--p",
        "3000",
        "--seed",
        "7",
        "--out",
        gen.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let y = load_matrix(gen.join("Y.txt")).unwrap();
    assert_eq!((y.rows(), y.cols()), (6, 3000));

    let solved = dir.path().join("solved");
    let out = l4dict(&[
        "solve",
        "--y",
        gen.join("Y.txt").to_str().unwrap(),
        "--truth",
        gen.join("D.txt").to_str().unwrap(),
        "--out",
        solved.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(solved.join("trace.csv")).unwrap();
    assert!(trace
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse::<f64>()
        .is_ok());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 9, "n": 4, "p": 200, "theta": 0.5}"#).unwrap();
    let out_dir = dir.path().join("o");
    let out = l4dict(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--p",
        "300",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(&out_dir);
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["n"], 4);
    assert_eq!(m["config"]["p"], 300);
    let x = load_matrix(out_dir.join("X.txt")).unwrap();
    assert_eq!((x.rows(), x.cols()), (4, 300));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    let out = l4dict(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_parameters_are_usage_or_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(l4dict(&["solve", "--order-2k", "3", "--out", d]).status.code(), Some(2));
    assert_eq!(l4dict(&["solve", "--alpha", "-1", "--out", d]).status.code(), Some(2));
    assert_ne!(
        l4dict(&["generate", "--theta", "1.5", "--out", d]).status.code(),
        Some(0)
    );
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let out = l4dict(&[
            "trace",
            "--n",
            "8",
            "--trials",
            "3",
            "--seed",
            "5",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(p.join("trace.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn env_seed_is_used_without_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_l4dict"))
        .args([
            "generate",
            "--n",
            "3",
            "--p",
            "10",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("L4DICT_SEED", "1234")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(manifest(dir.path())["seed"], 1234);
}

#[test]
fn pga_table_and_sweep_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = l4dict(&["pga-table", "--n-grid", "5,10", "--alphas", "1,inf", "--out", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("pga_table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let out = l4dict(&[
        "sweep-2k", "--n", "6", "--p-grid", "500,2000", "--orders", "4,6", "--trials", "2", "--out", d,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("sweep_errors.csv").exists());
    assert!(dir.path().join("sweep_iterations.csv").exists());
}

#[test]
fn phase_transition_and_concentration_run_small_grids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = l4dict(&[
        "phase-transition",
        "--n",
        "6",
        "--theta-grid",
        "0.2,0.8",
        "--p-grid",
        "200,2000",
        "--trials",
        "2",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("grid.json").exists());

    let out = l4dict(&[
        "probe-concentration",
        "--n",
        "5",
        "--p-grid",
        "100,1000",
        "--trials",
        "3",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("concentration.csv").exists());
}

#[test]
fn image_dict_from_idx_file() {
    let dir = tempfile::tempdir().unwrap();
    let (count, side) = (400u32, 3u32);
    let mut bytes = vec![0, 0, 8, 3];
    for v in [count, side, side] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    bytes.extend((0..count * side * side).map(|i| (i.wrapping_mul(2_654_435_761) >> 7) as u8));
    let idx = dir.path().join("imgs.idx");
    std::fs::write(&idx, &bytes).unwrap();
    let out_dir = dir.path().join("o");
    let out = l4dict(&[
        "image-dict",
        "--images",
        idx.to_str().unwrap(),
        "--topk",
        "9",
        "--max-iters",
        "20",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("reconstruction_mse.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,msp_mse,pca_mse"));
    assert_eq!(csv.lines().count(), 10);
    let dict = load_matrix(out_dir.join("dictionary.txt")).unwrap();
    assert!(orthogonality_deviation(&dict) < 1e-10);
}

#[test]
fn missing_image_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = l4dict(&[
        "image-dict",
        "--images",
        "/nonexistent.idx",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
