use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dtn-instab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dtn-instab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = run(&["verify", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_emits_a_json_summary() {
    let out = run(&["verify", "spectrum"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["suites"][0]["suite"], "spectrum");
}

#[test]
fn empty_sweep_is_header_only_csv() {
    let out = run(&[
        "sweep", "--axis", "n", "--from", "10", "--to", "5", "--step", "1", "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("delta_log2"));
}

#[test]
fn bad_config_is_a_usage_error() {
    let path = scratch("bad.toml");
    std::fs::write(&path, "tau = 2.0\n").unwrap();
    let out = run(&["theorem22", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
    let out = run(&["gap", "--precision", "8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bessel_csv_has_header_and_rows() {
    let out = run(&[
        "bessel",
        "--order",
        "0.5",
        "--z",
        "1",
        "2",
        "--format",
        "csv",
        "--precision",
        "128",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "order,z,j,j_prime,y,y_prime,wronskian_rel_error"
    );
    assert_eq!(lines.count(), 2);
    assert_eq!(
        run(&["bessel", "--order", "0.3", "--z", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn small_pipeline_is_deterministic_and_exit_code_follows_verdict() {
    let cfg = scratch("small.toml");
    std::fs::write(
        &cfg,
        "n = 20\nprecision = 128\ndegree_margin = 20\nrerun_tolerance_bits = 20.0\n",
    )
    .unwrap();
    let a = scratch("a.json");
    let b = scratch("b.json");
    let first = run(&[
        "theorem22",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
    ]);
    let second = run(&[
        "theorem22",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    let text_a = std::fs::read(&a).unwrap();
    assert_eq!(text_a, std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&text_a).unwrap();
    let expected = if v["verdict"] == true { 0 } else { 1 };
    assert_eq!(first.status.code(), Some(expected));
    assert_eq!(second.status.code(), Some(expected));
    assert!(v["timings"].is_null());
    assert_eq!(v["n"], 20);
}

#[test]
fn dtn_matrix_csv_respects_the_selection_rule() {
    let out = run(&[
        "dtn",
        "--n",
        "6",
        "--degree-max",
        "81",
        "--precision",
        "128",
        "--format",
        "csv",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let row: i64 = cols[0].parse().unwrap();
        let col: i64 = cols[1].parse().unwrap();
        assert!(row > col && (row - col) % 6 == 0);
        rows += 1;
    }
    assert!(rows > 0);
}
