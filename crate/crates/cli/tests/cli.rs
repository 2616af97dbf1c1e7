use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fracreset_cli::scenario::BUNDLED;
use fracreset_cli::Scenario;
use serde_json::Value;

fn fracreset(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracreset"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap()
}

#[test]
fn bundled_scenarios_round_trip() {
    for (name, text) in BUNDLED {
        let sc = Scenario::parse(text).unwrap();
        assert_eq!(sc.name, *name);
        let again = Scenario::parse(&sc.to_toml()).unwrap();
        assert_eq!(sc, again, "{name}");
    }
}

fn write_variant(dir: &Path, from: &str, to: &str) -> String {
    let text = fracreset_cli::scenario::bundled("example1_fci").unwrap().replace(from, to);
    assert_ne!(text, fracreset_cli::scenario::bundled("example1_fci").unwrap());
    let path = dir.join("variant.scenario");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn out_of_range_order_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "order = 0.5", "order = 1.5");
    let out = fracreset(&["run", &path], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "validation");
}

#[test]
fn unknown_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "order = 0.5", "order = 0.5\nwindup = true");
    let out = fracreset(&["run", &path], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["exit_code"], 2);
}

#[test]
fn invalid_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fracreset"))
        .args(["scenarios"])
        .env("FRAC_RESET_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    drop(dir);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = fracreset(&["simulate", "bundled:example1_ci"], &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "io");
}

#[test]
fn fci_example_overshoot_is_near_nineteen_percent() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracreset(&["simulate", "bundled:example1_fci"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&dir.path().join("example1_fci_metrics.json"));
    let os = m["overshoot"].as_f64().unwrap();
    assert!((os - 0.19).abs() < 0.05, "{os}");
    assert_eq!(m["memory_mode"], "offset");
    let csv = fs::read_to_string(dir.path().join("example1_fci_trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 30_000);
}

#[test]
fn example2_stability_file_reports_the_interval() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracreset(&["stability", "bundled:example2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("example2_stability.json"));
    let iv = r["beta_interval"].as_array().unwrap();
    let (lo, hi) = (iv[0].as_f64().unwrap(), iv[1].as_f64().unwrap());
    assert!((lo + 0.53).abs() < 0.05 && (hi - 0.79).abs() < 0.05, "[{lo}, {hi}]");
    assert_eq!(r["certificate"], "certified");
    let phase = fs::read_to_string(dir.path().join("example2_phase.csv")).unwrap();
    assert!(phase.starts_with("omega,re,im,mag_db,phase_deg"));
}

#[test]
fn narrow_beta_range_override_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracreset(&["stability", "bundled:example2", "--beta-range", "-0.2,0.2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("example2_stability.json"));
    let iv = r["beta_interval"].as_array().unwrap();
    assert!(iv[0].as_f64().unwrap() >= -0.2 - 1e-12 && iv[1].as_f64().unwrap() <= 0.2 + 1e-12);
}

fn strip_timestamps(mut v: Value) -> Value {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("generated_at");
    }
    v
}

#[test]
fn repeated_runs_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = fracreset(&["run", "bundled:example1_ci", "bundled:example3_fci"], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6);
    for name in names {
        let (pa, pb) = (a.path().join(&name), b.path().join(&name));
        if name.to_string_lossy().ends_with(".json") {
            assert_eq!(strip_timestamps(json(&pa)), strip_timestamps(json(&pb)), "{name:?}");
        } else {
            assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap(), "{name:?}");
        }
    }
}

#[test]
fn df_subcommand_writes_closed_form_and_numerical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracreset(
        &["df", "fci", "--alpha", "0.5", "--points", "20", "--numerical", "1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("fci_df.csv")).unwrap();
    assert_eq!(table.lines().count(), 21);
    let num = fs::read_to_string(dir.path().join("fci_df_numerical.csv")).unwrap();
    let row: Vec<&str> = num.lines().nth(1).unwrap().split(',').collect();
    let rel: f64 = row[7].parse().unwrap();
    assert!(rel < 0.02, "{rel}");
}

#[test]
fn df_without_order_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracreset(&["df", "fci"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenarios_lists_bundled_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracreset(&["scenarios"], dir.path());
    let listed = String::from_utf8_lossy(&out.stdout);
    assert_eq!(listed.lines().count(), BUNDLED.len());
    let out = fracreset(&["scenarios", "example2"], dir.path());
    assert!(Scenario::parse(&String::from_utf8_lossy(&out.stdout)).is_ok());
}
