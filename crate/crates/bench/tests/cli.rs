//! The `ngd-bench` binary end to end.

use std::process::Command;

use pullback_ngd::problems::mps::{generate_target_data, heisenberg_ground_state_rdms, TargetData};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ngd-bench"))
}

#[test]
fn generate_data_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.txt");
    let status = bin()
        .args(["generate-data", "--length", "6", "--noise", "0.1", "--seed", "5", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let parsed = TargetData::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed, generate_target_data(6, 0.1, 5).unwrap());

    let clean = dir.path().join("clean.txt");
    assert!(bin()
        .args(["generate-data", "--length", "5", "--noise", "0", "--seed", "1", "--out"])
        .arg(&clean)
        .status()
        .unwrap()
        .success());
    let parsed = TargetData::parse(&std::fs::read_to_string(&clean).unwrap()).unwrap();
    assert_eq!(parsed.targets, heisenberg_ground_state_rdms(5, 1).unwrap());
}

#[test]
fn generate_data_beyond_guard_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate-data", "--length", "20", "--noise", "0.1", "--seed", "1", "--out"])
        .arg(dir.path().join("t.txt"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn run_writes_outputs_and_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    let results = dir.path().join("out");
    std::fs::write(
        &config,
        format!(
            "seed = 1\noutput_dir = {:?}\n[problem]\nkind = \"rayleigh\"\nn = 6\n[[methods]]\nmethod = \"gd\"\n[[methods]]\nmethod = \"ngd\"\nmetric = \"fisher\"\n",
            results.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["gd.csv", "ngd_fisher.csv", "summary.txt", "summary.json", "resolved_config.toml"] {
        assert!(results.join(f).exists(), "{f}");
    }
    let out = bin().arg("verify").arg(&config).output().unwrap();
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("PASS  projection/rayleigh_pullback"));
    assert!(!report.contains("FAIL"));
}

#[test]
fn verify_skips_oversized_checks_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(
        &config,
        "output_dir = \"unused\"\n[problem]\nkind = \"spin\"\nwidth = 10\nheight = 10\n",
    )
    .unwrap();
    let out = bin().arg("verify").arg(&config).output().unwrap();
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("SKIP  metric_dense/spin_pullback"));
    assert!(report.contains("exceed the dense limit"));
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "output_dir = \"x\"\n[problem]\nkind = \"spin\"\nwidth = 4\nheight = 4\n").unwrap();
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("methods list is empty"));
    let out = bin().arg("run").arg(dir.path().join("missing.toml")).output().unwrap();
    assert!(!out.status.success());
}
