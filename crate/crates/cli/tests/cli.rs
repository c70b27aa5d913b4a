//! End-to-end tests of the `relaysim` binary: golden CSV regeneration,
//! command output values, and the exit-code contract.

use std::path::PathBuf;
use std::process::{Command, Output};

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn relaysim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaysim"))
        .args(args)
        .output()
        .expect("spawn relaysim")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("missing `{key}` in:\n{text}"))
        .parse()
        .unwrap_or_else(|e| panic!("unparsable `{key}`: {e}"))
}

#[test]
fn golden_csv_regeneration_is_byte_identical() {
    for name in [
        "example41_sm",
        "example41_amc",
        "example42",
        "sec5a_overhead",
        "fig3_sweep",
        "fig7_compare",
    ] {
        let config = config_path(&format!("{name}.cfg"));
        let out = relaysim(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--trials",
            "2000",
        ]);
        assert!(out.status.success(), "{name}: {out:?}");
        let golden_path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("tests/golden")
            .join(format!("{name}.csv"));
        let golden = std::fs::read(&golden_path).expect("golden file");
        assert_eq!(
            out.stdout, golden,
            "{name}: CSV deviates from the committed golden output"
        );
    }
}

#[test]
fn approx_reports_reference_throughputs() {
    let out = relaysim(&[
        "approx",
        "--config",
        config_path("example41_amc.cfg").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!((field(&text, "r_app_amc") - 0.42882).abs() < 0.01, "{text}");

    let out = relaysim(&[
        "approx",
        "--config",
        config_path("example41_sm.cfg").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!((field(&text, "r_app_sm") - 0.25933).abs() < 0.01, "{text}");
}

#[test]
fn overhead_reports_reference_percentages() {
    let out = relaysim(&[
        "overhead",
        "--config",
        config_path("sec5a_overhead.cfg").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert_eq!(field(&text, "ack_interval_us"), 24.3);
    assert_eq!(field(&text, "contention_period_us"), 72.9);
    assert_eq!(field(&text, "data_symbols"), 684.0);
    assert!((field(&text, "data_interval_overhead_pct") - 25.9).abs() <= 0.1);
    assert!((field(&text, "total_overhead_pct") - 31.4).abs() <= 0.1);
}

#[test]
fn optimize_contention_reports_argmax() {
    let out = relaysim(&[
        "optimize",
        "--target",
        "contention",
        "--config",
        config_path("example41_amc.cfg").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("argmax_p = 0, 1.00000"), "{text}");
}

#[test]
fn oracle_agrees_with_closed_form_in_output() {
    let out = relaysim(&[
        "oracle",
        "--config",
        config_path("example42.cfg").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    // relay 0 row: enumerated and closed-form values agree to print precision
    let row = text.lines().nth(1).expect("relay row");
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells[1], cells[2], "{text}");
    assert_eq!(cells[3], cells[4], "{text}");
}

#[test]
fn config_errors_exit_1_and_use_stderr() {
    // Malformed probability names the key; nothing lands on stdout.
    let dir = std::env::temp_dir().join("relaysim-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad_p.cfg");
    let text = std::fs::read_to_string(config_path("example41_amc.cfg")).unwrap();
    std::fs::write(&bad, text.replace("p = 0.0, 1.0", "p = 0.0, 1.5")).unwrap();
    let out = relaysim(&["approx", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("contention.p"), "{err}");

    // Missing file.
    let out = relaysim(&["approx", "--config", "/nonexistent.cfg"]);
    assert_eq!(out.status.code(), Some(1));

    // Unknown subcommand and unknown flag go through usage with exit 1.
    let out = relaysim(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let out = relaysim(&["simulate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));

    // Unknown optimize target.
    let out = relaysim(&[
        "optimize",
        "--target",
        "bogus",
        "--config",
        config_path("example41_amc.cfg").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_writes_identical_csv_to_file_and_stdout() {
    let dir = std::env::temp_dir().join("relaysim-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("out.csv");
    let config = config_path("example41_sm.cfg");
    let to_stdout = relaysim(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "1000",
    ]);
    assert!(to_stdout.status.success());
    let to_file = relaysim(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "1000",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(to_file.status.success());
    assert!(to_file.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), to_stdout.stdout);
}

#[test]
fn seed_override_changes_output() {
    let config = config_path("example41_sm.cfg");
    let a = relaysim(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "1000",
        "--seed",
        "1",
    ]);
    let b = relaysim(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "1000",
        "--seed",
        "2",
    ]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
}
