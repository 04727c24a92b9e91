use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use fano_ep::scattering::{find_extrema_xy, SCAN_CSV_HEADER};
use fano_ep::reduction::TRAJECTORY_CSV_HEADER;
use serde_json::Value;
use tempfile::tempdir;

fn params_file() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/two_oscillators.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fano-ep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn params_arg() -> String {
    params_file().to_str().unwrap().to_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn find_ep_reports_the_known_point() {
    let out = run(&["find-ep", "--params", &params_arg()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let re = v["omega_ep_re"].as_f64().unwrap();
    let im = v["omega_ep_im"].as_f64().unwrap();
    assert!(((re - 2.9).powi(2) + (im + 0.1).powi(2)).sqrt() < 5e-3);
    assert!((v["f_ep"].as_f64().unwrap() - 0.02).abs() < 5e-3);
    assert!((v["g_ep"].as_f64().unwrap() - 0.1).abs() < 5e-3);
    assert_eq!(v["physical"], Value::Bool(true));
    assert!(v["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn reduce_lists_all_matrix_entries() {
    let out = run(&["reduce", "--params", &params_arg(), "--gauge", "as-projected"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["gauge"], "as-projected");
    assert_eq!(v["f_ref"].as_f64(), Some(0.0));
    let m = v["matrices"].as_object().unwrap();
    assert_eq!(m.len(), 8);
    for entry in m.values() {
        assert!(entry["re"].is_f64() && entry["im"].is_f64());
    }
    assert!(!v["effective_eps"].as_array().unwrap().is_empty());
}

#[test]
fn cross_section_at_ep_has_two_peaks_and_writes_svg() {
    let dir = tempdir().unwrap();
    let csv_path = dir.path().join("scan.csv");
    let svg_path = dir.path().join("scan.svg");
    let out = run(&[
        "cross-section",
        "--params",
        &params_arg(),
        "--f-offset",
        "0",
        "-o",
        csv_path.to_str().unwrap(),
        "--svg",
        svg_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().next().unwrap(), SCAN_CSV_HEADER);
    assert_eq!(csv.lines().count(), 2002);
    let ex = find_extrema_xy(&column(&csv, "e"), &column(&csv, "t22_sq"));
    assert_eq!(ex.peaks.len(), 2, "{:?}", ex.peaks);
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn trajectory_has_both_sources_and_four_branch_columns() {
    let out = run(&[
        "trajectory",
        "--params",
        &params_arg(),
        "--f-min",
        "-1",
        "--f-max",
        "1",
        "--points",
        "101",
    ]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, TRAJECTORY_CSV_HEADER);
    assert_eq!(header.split(',').filter(|h| h.contains("omega")).count(), 4);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 202);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",full-4x4")).count(), 101);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",reduced-2x2")).count(), 101);
    let f0: f64 = rows[0].split(',').next().unwrap().parse().unwrap();
    assert_eq!(f0, -1.0);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["cross-section", "--params", &params_arg(), "--f-offset", "0.2", "--points", "301"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let t = ["trajectory", "--params", &params_arg(), "--points", "51"];
    assert_eq!(run(&t).stdout, run(&t).stdout);
}

#[test]
fn malformed_params_name_the_key_and_exit_2() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = fs::read_to_string(params_file()).unwrap().replace("\"omega2\"", "\"omega_two\"");
    fs::write(&path, text).unwrap();
    let out = run(&["find-ep", "--params", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(line["error"], "schema");
    assert!(line["message"].as_str().unwrap().contains("omega_two"), "{stderr}");
}

#[test]
fn missing_file_and_bad_flags_are_usage_errors() {
    let out = run(&["find-ep", "--params", "/nonexistent/params.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["cross-section", "--params", &params_arg(), "--points", "many"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(line["error"], "usage");
}

#[test]
fn verify_stationary_passes_and_fails_on_threshold() {
    let ok = run(&["verify-stationary", "--params", &params_arg(), "--omega-drive", "2.7"]);
    assert!(ok.status.success());
    let v: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(v["residual"].as_f64().unwrap() < 1e-4);

    let short = run(&[
        "verify-stationary",
        "--params",
        &params_arg(),
        "--omega-drive",
        "2.7",
        "--t-settle",
        "5",
    ]);
    assert_eq!(short.status.code(), Some(1));
    let stderr = String::from_utf8(short.stderr).unwrap();
    assert!(stderr.contains("\"threshold\""), "{stderr}");
}

#[test]
fn no_ep_in_window_is_a_numerical_failure() {
    let out = run(&[
        "find-ep",
        "--params",
        &params_arg(),
        "--scan-f-min",
        "0.3",
        "--scan-f-max",
        "0.4",
        "--scan-g-min",
        "0.3",
        "--scan-g-max",
        "0.4",
        "--scan-grid",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
