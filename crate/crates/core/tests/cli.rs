mod common;

use std::process::Command;

use common::{read_csv, sphere_toml};

fn ifepic() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ifepic"))
}

#[test]
fn run_honours_output_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, sphere_toml([2, 1, 1], 3, &dir.path().join("ignored"))).unwrap();
    let out = dir.path().join("override");
    let o = ifepic()
        .args(["run", "--config"])
        .arg(&cfg)
        .env("IFEPIC_OUTPUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Included in the `field-solve' time."));
    assert!(out.join("particles.csv").exists());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn failures_exit_with_category_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ifepic()
        .args(["run", "--config"])
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[io]"));

    let bad = dir.path().join("bad.toml");
    let text = sphere_toml([1, 1, 1], 1, dir.path()).replace("dt_wpe = 0.05", "dt_wpe = -0.05");
    std::fs::write(&bad, text).unwrap();
    let o = ifepic().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[config]"));
}

#[test]
fn oracle_writes_reference_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let o = ifepic().args(["oracle", "--out"]).arg(dir.path()).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (head, rows) = read_csv(&dir.path().join("oml_profile.csv"));
    assert_eq!(head, ["r", "phi", "n_i", "n_e"]);
    assert!(rows.len() > 10);
    // the sheath decays to the ambient potential
    assert!(rows[0][1] < -1.0 && rows.last().unwrap()[1].abs() < 0.1);
    let (head, rows) = read_csv(&dir.path().join("manufactured_profile.csv"));
    assert_eq!(head, ["r", "phi"]);
    assert_eq!(rows.len(), 201);
}

#[test]
fn scale_reports_speedup_and_efficiency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, sphere_toml([1, 1, 1], 2, dir.path())).unwrap();
    let o = ifepic()
        .args(["scale", "--config"])
        .arg(&cfg)
        .args(["--decomps", "1x1x1,2x1x1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "decomposition,workers,total_seconds,speedup,efficiency_percent,reliable"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "1x1x1");
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 1.0);
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), 100.0);
    let t0: f64 = rows[0][2].parse().unwrap();
    let t1: f64 = rows[1][2].parse().unwrap();
    let s: f64 = rows[1][3].parse().unwrap();
    let e: f64 = rows[1][4].parse().unwrap();
    assert!((s - t0 / t1).abs() < 2e-3 * s.max(1.0));
    assert!((e - 100.0 * s / 2.0).abs() < 0.01);
    assert!(dir.path().join("2x1x1").join("timers.csv").exists());
}

#[test]
fn bad_decomposition_list_is_a_usage_error() {
    let o = ifepic()
        .args(["scale", "--config", "x.toml", "--decomps", "2x2"])
        .output()
        .unwrap();
    assert!(!o.status.success());
}
