//! End-to-end checks of the command-line interface: exit codes, forced
//! failure paths, and output files.

use std::path::PathBuf;
use std::process::{Command, Output};

use renvol::mesh::{genus2_octagon, icosahedron};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_renvol"))
}

fn tmp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("renvol-cli-{name}"))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn check_defaults_pass() {
    let out = bin().args(["check", "--out"]).arg(tmp("check")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("checks passed"));
}

#[test]
fn check_tol_zero_fails_with_named_invariant() {
    let out = bin()
        .args(["check", "--tol", "0", "--out"])
        .arg(tmp("tol0"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("failing:"), "{text}");
    assert!(text.contains("forms.involution_round_trip"), "{text}");
}

#[test]
fn malformed_config_exits_2_with_position() {
    let cfg = tmp("bad.toml");
    std::fs::write(&cfg, "seed = 42\ntol = [oops\n").unwrap();
    let out = bin().args(["check", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("column"), "{err}");
}

#[test]
fn unknown_flag_exits_2() {
    let out = bin().args(["check", "--definitely-not-a-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tube_report_values() {
    let dir = tmp("tube");
    let out = bin()
        .args(["tube", "--genus", "2", "--radius", "1", "--rho-max", "10", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report = std::fs::read_to_string(dir.join("tube_report.txt")).unwrap();
    let get = |key: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap_or_else(|| panic!("missing {key} in report"))
            .parse()
            .unwrap()
    };
    let pi = std::f64::consts::PI;
    assert!((get("v_renormalized") - 2.0 * pi).abs() < 1e-6);
    assert!((get("w_volume") - 4.0 * pi).abs() < 1e-9);
    let csv = std::fs::read_to_string(dir.join("tube_curve.csv")).unwrap();
    assert!(csv.starts_with("rho,L\n"));
    assert_eq!(csv.lines().count(), 66); // header + 65 samples

    // Tiny tube: W is linear in r.
    let out = bin()
        .args(["tube", "--genus", "2", "--radius", "1e-6", "--out"])
        .arg(tmp("tube-tiny"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report =
        std::fs::read_to_string(tmp("tube-tiny").join("tube_report.txt")).unwrap();
    let w: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("w_volume = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((w - 4.0 * pi * 1e-6).abs() < 1e-12);
}

#[test]
fn tube_low_genus_exits_2() {
    let out = bin().args(["tube", "--genus", "1", "--radius", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn uniformize_paths() {
    let mesh_path = tmp("g2.mesh");
    std::fs::write(&mesh_path, genus2_octagon(8).mesh.to_text()).unwrap();
    let dir = tmp("uniformize");
    let out = bin()
        .args(["uniformize"])
        .arg(&mesh_path)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let phi = std::fs::read_to_string(dir.join("phi.txt")).unwrap();
    assert_eq!(phi.lines().count(), 254);
    assert!(phi.lines().all(|l| l.parse::<f64>().is_ok()));
    let report = std::fs::read_to_string(dir.join("uniformize_report.txt")).unwrap();
    assert!(report.contains("calibration.liouville"));

    // Sphere: wrong topology, usage-class failure.
    let sphere_path = tmp("sphere.mesh");
    std::fs::write(&sphere_path, icosahedron().to_text()).unwrap();
    let out = bin().args(["uniformize"]).arg(&sphere_path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("wrong topology"));

    // Truncated file: parse diagnostic with a position.
    let trunc_path = tmp("trunc.mesh");
    let full = std::fs::read_to_string(&mesh_path).unwrap();
    let cut: String = full.lines().take(30).map(|l| format!("{l}\n")).collect();
    std::fs::write(&trunc_path, cut).unwrap();
    let out = bin().args(["uniformize"]).arg(&trunc_path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
}

#[test]
fn reports_embed_calibration_conventions() {
    let dir = tmp("calib");
    let out = bin().args(["schwarzian", "--out"]).arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.join("schwarzian_report.txt")).unwrap();
    assert!(report.contains("calibration.liouville"));
    assert!(report.contains("calibration.schwarzian"));
    assert!(report.contains("upper half-plane"));
}
