use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gamow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gamow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn reference() -> Value {
    serde_json::from_str(include_str!("../configs/reference.json")).unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn error_of(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().find(|l| l.starts_with('{')).expect("json error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn free_potential_has_no_poles() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    cfg["potential"] = serde_json::json!({
        "type": "piecewise_constant",
        "segments": [{ "r_lo": 0.0, "r_hi": 1.0, "v": 0.0 }]
    });
    let path = write_config(dir.path(), "free.json", &cfg);
    let out = gamow(dir.path(), &["poles", "--config", &path, "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/poles.csv")).unwrap();
    let rows: Vec<_> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, ["n,re_k,im_k,residual"]);
}

#[test]
fn poles_csv_carries_metadata_and_reference_pole() {
    let dir = tempfile::tempdir().unwrap();
    let out = gamow(dir.path(), &["poles", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/poles.csv")).unwrap();
    assert!(csv.starts_with("# gamow poles\n# config_sha256: "));
    assert!(csv.contains("# units: hbar=2m=1"));
    let first = csv.lines().find(|l| l.starts_with("1,")).unwrap();
    let f: Vec<f64> = first.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
    assert!((f[0] - 2.7579383212949247).abs() < 1e-10);
    assert!((f[1] + 0.1404327324662333).abs() < 1e-10);
}

#[test]
fn invalid_strength_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    cfg["potential"]["strength"] = (-2.0).into();
    let path = write_config(dir.path(), "bad.json", &cfg);
    let out = gamow(dir.path(), &["poles", "--config", &path, "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_of(&out);
    assert_eq!(err["error"]["kind"], "ConfigError");
    assert!(err["error"]["message"].as_str().unwrap().contains("strength"));
    assert!(!dir.path().join("o/poles.csv").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    cfg["oracle"]["grid_points"] = 4000.into();
    let path = write_config(dir.path(), "extra.json", &cfg);
    let out = gamow(dir.path(), &["oracle", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_of(&out)["error"]["message"].as_str().unwrap().contains("grid_points"));
}

#[test]
fn nonescape_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["nonescape", "--nmax", "20", "--tmin", "0.01", "--tmax", "100", "--points", "50"];
    let mut runs = Vec::new();
    for o in ["a", "b"] {
        let mut a = args.to_vec();
        a.extend(["--out", o]);
        let out = gamow(dir.path(), &a);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        runs.push(fs::read(dir.path().join(o).join("nonescape.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    let text = String::from_utf8(runs.swap_remove(0)).unwrap();
    let data = text.lines().filter(|l| !l.starts_with('#')).count();
    assert!(data > 50, "header plus at least one row per time");
}

#[test]
fn sumrule_decreases_with_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let out = gamow(dir.path(), &["sumrule", "--nmax", "40", "--r", "0.25", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/sumrule.csv")).unwrap();
    let abs: Vec<f64> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('N'))
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert!(abs.len() >= 2);
    assert!(abs.last().unwrap() < &abs[0]);
}

#[test]
fn short_oracle_box_is_a_domain_error_for_compare() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reference();
    cfg["oracle"]["box_length"] = 20.0.into();
    cfg["oracle"]["final_time"] = 60.0.into();
    cfg["oracle"]["absorber"] = Value::Null;
    let path = write_config(dir.path(), "short.json", &cfg);
    let out = gamow(dir.path(), &["compare", "--config", &path, "--out", "o"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("o/summary.json").exists());
}

#[test]
fn reference_compare_finds_inverse_cube() {
    let dir = tempfile::tempdir().unwrap();
    let out = gamow(dir.path(), &["compare", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    let slope = summary["slope"].as_f64().unwrap();
    assert!((-3.2..=-2.8).contains(&slope), "slope {slope}");
    assert_eq!(summary["d1_monotone_decreasing"], true);
    assert!(summary["verdict"].as_str().unwrap().starts_with("t^-3"));
    assert!(summary["max_rel_dev_early"].as_f64().unwrap() < 1e-2);
    let csv = fs::read_to_string(dir.path().join("o/compare.csv")).unwrap();
    assert!(csv.contains("t,P_oracle,P_expansion,rel_dev,horizon_flag"));
}
