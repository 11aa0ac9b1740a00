//! End-to-end tests of the `chr` binary: exit codes, report files, and the
//! determinism contract.

use std::path::PathBuf;
use std::process::Command;

fn chr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chr"))
}

fn tmp_out(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("chr-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn selftest_subset_passes_and_writes_report() {
    let out = tmp_out("selftest");
    let status = chr()
        .args(["selftest", "--only", "1,3", "--fast", "--seed", "11"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("selftest_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["criteria"].as_array().unwrap().len(), 2);
}

#[test]
fn ibp_b4_runs_and_is_byte_deterministic() {
    let out1 = tmp_out("ibp1");
    let out2 = tmp_out("ibp2");
    for out in [&out1, &out2] {
        let status = chr()
            .args([
                "ibp",
                "--identity",
                "b4",
                "--psi",
                "sin-quarter",
                "--n",
                "20000",
                "--m-points",
                "129",
                "--seed",
                "5",
            ])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(out1.join("ibp_report.json")).unwrap();
    let b = std::fs::read(out2.join("ibp_report.json")).unwrap();
    assert_eq!(a, b, "same (config, seed) must give identical payloads");
}

#[test]
fn ibp_72_reports_three_terms() {
    let out = tmp_out("ibp72");
    let status = chr()
        .args([
            "ibp",
            "--identity",
            "7.2",
            "--phi",
            "sin-e1",
            "--h",
            "e1",
            "--n",
            "30000",
            "--m-points",
            "129",
            "--seed",
            "9",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ibp_report.json")).unwrap())
            .unwrap();
    for key in ["lhs", "bulk", "boundary", "residual"] {
        assert!(
            report["report"].get(key).is_some(),
            "missing {key} in {report}"
        );
    }
}

#[test]
fn measure_nu_c_paths_are_nonnegative() {
    let out = tmp_out("measure");
    let status = chr()
        .args([
            "measure",
            "--kind",
            "nu-c",
            "--n",
            "200",
            "--m-points",
            "129",
            "--c",
            "1.0",
            "--seed",
            "3",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("paths.csv")).unwrap();
    assert!(csv.starts_with("# grid_points = 129"));
    for line in csv.lines().skip(5) {
        for v in line.split(',') {
            assert!(v.parse::<f64>().unwrap() >= 0.0);
        }
    }
}

#[test]
fn simulate_conserves_average_and_writes_outputs() {
    let out = tmp_out("simulate");
    let status = chr()
        .args([
            "simulate",
            "--n-modes",
            "16",
            "--dt",
            "0.002",
            "--horizon",
            "0.5",
            "--eps",
            "0.1",
            "--c",
            "1.0",
            "--seed",
            "2",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("trajectory.csv").exists());
    let eta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eta_summary.json")).unwrap())
            .unwrap();
    let avg = eta["final_average"].as_f64().unwrap();
    assert!((avg - 1.0).abs() < 1e-10);
}

#[test]
fn unknown_config_keys_exit_with_usage_error() {
    let out = tmp_out("badcfg");
    let cfg_path = out.join("bad.toml");
    std::fs::write(&cfg_path, "sedd = 1\n").unwrap();
    let output = chr()
        .args(["selftest", "--only", "1"])
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("sedd"), "stderr: {stderr}");
}

#[test]
fn config_file_values_are_used_and_flags_override() {
    let out = tmp_out("cfgmerge");
    let cfg_path = out.join("run.toml");
    std::fs::write(
        &cfg_path,
        "seed = 77\n[ibp]\nidentity = \"a1\"\nphi = \"one\"\nn = 5000\nm_points = 65\n",
    )
    .unwrap();
    let status = chr()
        .arg("ibp")
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ibp_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["identity"], "a1");
    assert_eq!(report["seed"], 77);
    assert_eq!(report["n"], 5000);
}
