use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectral-mixing"))
}

#[test]
fn simulate_switching_writes_variance() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["simulate", "--scenario", "switching", "--N", "8", "--t-final", "5", "--dt", "0.00125"])
        .args(["--record-every", "400", "--output-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,Q,norm2,V"));
    assert_eq!(lines.count(), 11);
}

#[test]
fn verify_bounds_reports_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify-bounds", "--N", "4", "--M", "4", "--trials", "1000", "--seed", "7", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("violations=0"));
    let csv = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(csv.starts_with("quantity,value\nK,"));
    assert!(csv.ends_with("seed,7\n"));
}

#[test]
fn missing_subcommand_exits_one_with_usage() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_flag_value_exits_one() {
    let out = bin().args(["simulate", "--N"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--N"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# custom greedy run\nscenario=custom\nN=3\nM=2\nt_final=0.1\ndt=0.01\ncontrol=greedy\n").unwrap();
    let out = bin()
        .args(["optimize", "--config"])
        .arg(&cfg)
        .args(["--t-final", "0.2", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sol = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    // one segment per step over t in [0, 0.2]
    assert_eq!(sol.lines().count(), 1 + 20 + 1);
}

#[test]
fn unstable_step_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--dt", "0.25", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_and_energy_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["benchmark", "--record-every", "80", "--output-dir"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("enhanced=true"));
    assert!(dir.path().join("trajectory_diffusion.csv").exists());
    let out = bin().args(["verify-energy", "--output-dir"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
}
