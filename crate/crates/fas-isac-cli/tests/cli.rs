//! Black-box tests of the `fas-isac` binary: exit codes, output files,
//! determinism of the written bytes.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fas-isac"))
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("fas-isac-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn simulate_writes_csv_and_exits_zero() {
    let out = tmp("snr.csv");
    let status = bin()
        .args(["simulate", "--scenario", "snr", "--trials", "1", "--seed", "3"])
        .args(["--set", "snr_db=10", "--set", "schemes=jpps"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(
        "scenario,param,scheme,trials,mean_secrecy_bps_hz,std_secrecy,\
         mean_radar_sinr,miss_frac,mean_ms"
    ));
    assert_eq!(text.lines().count(), 2, "one header + one row expected");
    assert!(text.lines().nth(1).unwrap().starts_with("snr,10,jpps,1,"));
    std::fs::remove_file(&out).ok();
}

#[test]
fn identical_invocations_write_identical_bytes() {
    let out1 = tmp("det1.csv");
    let out2 = tmp("det2.csv");
    for out in [&out1, &out2] {
        let status = bin()
            .args(["simulate", "--scenario", "zeta", "--trials", "2", "--seed", "11"])
            .args(["--set", "zeta_grid=0,2", "--set", "schemes=jpps,gs"])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b);
    std::fs::remove_file(&out1).ok();
    std::fs::remove_file(&out2).ok();
}

#[test]
fn worker_count_env_does_not_change_bytes() {
    let out1 = tmp("w1.csv");
    let out8 = tmp("w8.csv");
    for (out, workers) in [(&out1, "1"), (&out8, "8")] {
        let status = bin()
            .env("FAS_ISAC_WORKERS", workers)
            .args(["simulate", "--scenario", "snr", "--trials", "4", "--seed", "5"])
            .args(["--set", "snr_db=15", "--set", "schemes=jpps"])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out8).unwrap());
    std::fs::remove_file(&out1).ok();
    std::fs::remove_file(&out8).ok();
}

#[test]
fn bad_configuration_exits_two() {
    for args in [
        vec!["simulate", "--scenario", "warp"],
        vec!["simulate", "--scenario", "snr", "--set", "snr_db=banana"],
        vec!["simulate", "--scenario", "snr", "--profile", "/nonexistent/profile.txt"],
        vec!["simulate", "--scenario", "snr", "--set", "noequalsign"],
    ] {
        let out = tmp("err.csv");
        let status = bin().args(&args).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(2), "args: {args:?}");
    }
}

#[test]
fn unattainable_radar_floor_exits_three() {
    let out = tmp("inf.csv");
    let status = bin()
        .args(["simulate", "--scenario", "zeta", "--trials", "1", "--seed", "1"])
        .args(["--set", "zeta_grid=1e9", "--set", "schemes=jpps"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn beampattern_emits_companion_file() {
    let out = tmp("beam.json");
    let pattern = tmp("beam_pattern.json");
    let status = bin()
        .args(["simulate", "--scenario", "beampattern", "--trials", "1", "--seed", "2"])
        .args(["--set", "schemes=jpps", "--set", "beam_step_deg=5"])
        .arg("--out")
        .arg(&out)
        .arg("--json")
        .status()
        .unwrap();
    assert!(status.success());
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows[0]["scheme"], "jpps");
    let pat: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&pattern).unwrap()).unwrap();
    assert_eq!(pat[0]["angle_deg"], -90.0);
    assert!(pat.as_array().unwrap().len() >= 37);
    std::fs::remove_file(&out).ok();
    std::fs::remove_file(&pattern).ok();
}
