use std::path::Path;
use std::process::{Command, Output};

use atomlaser::config::{preset, ExperimentConfig};
use atomlaser::experiment::CSV_COLUMNS;

fn atomlaser(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atomlaser"))
        .args(args)
        .output()
        .expect("failed to launch atomlaser")
}

const SMALL: [&str; 10] = [
    "--set",
    "run.t_end=3000",
    "--set",
    "run.samples=6",
    "--set",
    "trap.m_max=8",
    "--set",
    "trap.virtual_extra=2",
    "--realizations",
    "2",
];

fn run_small(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--preset", "fig3", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    atomlaser(&args)
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn preset_dump_parses_back() {
    let out = atomlaser(&["preset-dump", "fig8"]);
    assert!(out.status.success());
    let cfg = ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, preset("fig8").unwrap());
}

#[test]
fn preset_dump_applies_overrides() {
    let out = atomlaser(&["preset-dump", "fig3", "--set", "trap.m_max=30"]);
    assert!(out.status.success());
    let cfg = ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.trap.m_max, 30);
}

#[test]
fn run_writes_fixed_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path(), &["--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = std::fs::read_to_string(dir.path().join("point_0_mean.csv")).unwrap();
    let first: Vec<&str> = header.lines().next().unwrap().split(',').collect();
    assert_eq!(&first[..CSV_COLUMNS.len()], &CSV_COLUMNS[..]);
    let traj = std::fs::read_to_string(dir.path().join("point_0_trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(traj.lines().count(), 1 + 7);
    let s = summary(dir.path());
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["seed"], 4);
    assert_eq!(s["realizations"], 2);
    assert_eq!(s["points"][0]["onset"]["criterion"]["n_abs"], 20.0);
}

#[test]
fn same_seed_gives_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_small(a.path(), &["--seed", "9"]).status.success());
    assert!(run_small(b.path(), &["--seed", "9"]).status.success());
    for f in ["point_0_trajectory.csv", "point_0_mean.csv", "summary.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
    let c = tempfile::tempdir().unwrap();
    assert!(run_small(c.path(), &["--seed", "10"]).status.success());
    assert_ne!(
        std::fs::read(a.path().join("point_0_trajectory.csv")).unwrap(),
        std::fs::read(c.path().join("point_0_trajectory.csv")).unwrap()
    );
}

#[test]
fn no_loading_means_no_onset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path(), &["--set", "loading.gamma_eff=0"]);
    assert!(out.status.success());
    let s = summary(dir.path());
    assert!(s["points"][0]["onset"]["time"].is_null());
    assert_eq!(s["points"][0]["final"]["n"], 0.0);
}

#[test]
fn config_file_round_trip_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("fig3")
        .unwrap()
        .with_overrides(&["run.t_end=2000", "run.samples=4", "trap.m_max=6", "realizations=1"])
        .unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = atomlaser(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let s = summary(&out_dir);
    assert_eq!(s["config"]["trap"]["m_max"], 6);
}

#[test]
fn scan_writes_one_file_pair_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = atomlaser(&[
        "run",
        "--preset",
        "fig4",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--set",
        "scan.t_end=[500.0, 400.0, 300.0]",
        "--set",
        "trap.m_max=5",
        "--realizations",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for k in 0..3 {
        assert!(dir.path().join(format!("point_{k}_mean.csv")).exists());
    }
    assert_eq!(summary(dir.path())["points"].as_array().unwrap().len(), 3);
}

#[test]
fn bre_scan_writes_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = atomlaser(&[
        "bre-scan",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--set",
        "bre.epsilons=[1e-4, 1e-3]",
        "--set",
        "bre.n0s=[1, 10]",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("bre_points.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(summary(dir.path())["bre"]["a2a_bad"].is_object());
}

#[test]
fn failures_exit_nonzero_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = atomlaser(&["run", "--preset", "nope", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig3"));

    let out = run_small(dir.path(), &["--set", "loading.gamma_eff=-1"]);
    assert!(!out.status.success());
    let out = run_small(dir.path(), &["--set", "trap.nonsense=1"]);
    assert!(!out.status.success());
    assert!(!dir.path().join("summary.json").exists());

    let out = atomlaser(&["bre-scan", "--preset", "fig3"]);
    assert!(!out.status.success());
}
