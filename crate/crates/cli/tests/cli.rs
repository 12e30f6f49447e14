use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qopsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qopsim"))
        .args(args)
        .env_remove("QOPSIM_CONFIG_DIR")
        .output()
        .expect("spawn qopsim")
}

fn ok(args: &[&str]) -> Output {
    let out = qopsim(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn metric(r: &Value, section: &str, name: &str) -> f64 {
    r["sections"][section]["metrics"][name].as_f64().unwrap_or_else(|| panic!("{section}.{name} missing"))
}

#[test]
fn full_demo_is_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["full", "--out", a.to_str().unwrap()]);
    ok(&["full", "--out", b.to_str().unwrap()]);
    let ra = fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.join("report.json")).unwrap());
    let r = report(&a);
    for s in ["playback", "cdn", "delivery", "uiae", "publish", "experiment"] {
        assert!(r["sections"][s].is_object(), "section {s} missing");
    }
    assert_eq!(r["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(r["provenance"]["seed"], 42);
    for csv in ["cdn_waveform.csv", "playback_trace.csv", "uiae_pid.csv"] {
        assert_eq!(fs::read(a.join(csv)).unwrap(), fs::read(b.join(csv)).unwrap(), "{csv}");
    }
}

#[test]
fn seed_flag_changes_provenance_and_results() {
    let t = tempfile::tempdir().unwrap();
    let a = t.path().join("a");
    let b = t.path().join("b");
    ok(&["cdn", "--out", a.to_str().unwrap()]);
    ok(&["cdn", "--seed", "7", "--out", b.to_str().unwrap()]);
    let (ra, rb) = (report(&a), report(&b));
    assert_eq!(rb["provenance"]["seed"], 7);
    assert_ne!(ra["provenance"]["config_sha256"], rb["provenance"]["config_sha256"]);
    assert_ne!(metric(&ra, "cdn", "hit_rate_hashed"), metric(&rb, "cdn", "hit_rate_hashed"));
}

#[test]
fn single_vendor_has_no_staggering() {
    let t = tempfile::tempdir().unwrap();
    ok(&[
        "cdn",
        "--set",
        "cdn.vendors=[{id='solo',capacity_mbps=3000.0}]",
        "--set",
        "cdn.unit_prices=[1.0]",
        "--out",
        t.path().to_str().unwrap(),
    ]);
    let r = report(t.path());
    assert_eq!(metric(&r, "cdn", "srr"), 0.0);
    assert_eq!(metric(&r, "cdn", "baseline_srr"), 0.0);
}

#[test]
fn experiment_recovers_injected_effect() {
    let t = tempfile::tempdir().unwrap();
    ok(&["experiment", "--out", t.path().to_str().unwrap()]);
    let r = report(t.path());
    assert_eq!(metric(&r, "experiment", "injected_effect"), 0.05);
    assert!(metric(&r, "experiment", "recovery_error").abs() <= 0.01);
}

#[test]
fn compare_marks_zero_deltas_and_absent_sections() {
    let t = tempfile::tempdir().unwrap();
    let (full, cdn) = (t.path().join("full"), t.path().join("cdn"));
    ok(&["full", "--out", full.to_str().unwrap()]);
    ok(&["cdn", "--out", cdn.to_str().unwrap()]);

    let same: Value = serde_json::from_slice(&ok(&["compare", full.to_str().unwrap(), full.to_str().unwrap()]).stdout)
        .unwrap();
    for (name, s) in same["sections"].as_object().unwrap() {
        assert_eq!(s["status"], "both", "{name}");
        assert_eq!(s["profit_sign_flip"], false);
        for m in s["metrics"].as_object().unwrap().values() {
            assert_eq!(m["delta"], 0.0);
        }
    }

    let diff_path = t.path().join("diff.json");
    ok(&["compare", full.to_str().unwrap(), cdn.join("report.json").to_str().unwrap(), "--out", diff_path.to_str().unwrap()]);
    let diff: Value = serde_json::from_slice(&fs::read(diff_path).unwrap()).unwrap();
    assert_eq!(diff["sections"]["cdn"]["status"], "both");
    assert_eq!(diff["sections"]["playback"]["status"], "absent_in_b");
}

#[test]
fn config_errors_exit_with_config_code() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().to_str().unwrap();
    assert_eq!(qopsim(&["full", "--config", "/does/not/exist.toml", "--out", out]).status.code(), Some(3));

    let bad = t.path().join("bad.toml");
    fs::write(&bad, "name = 'no seed'\n").unwrap();
    assert_eq!(qopsim(&["cdn", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(3));

    fs::write(&bad, "seed = 1\nunknown_section = 3\n").unwrap();
    assert_eq!(qopsim(&["cdn", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(3));

    assert_eq!(qopsim(&["cdn", "--set", "cdn.unit_prices=[1.0]", "--out", out]).status.code(), Some(3));
    assert_eq!(qopsim(&["cdn", "--set", "no-equals-sign", "--out", out]).status.code(), Some(3));
    assert!(!t.path().join("report.json").exists());
    assert_eq!(qopsim(&["bogus"]).status.code(), Some(2));
}

#[test]
fn config_dir_from_environment() {
    let t = tempfile::tempdir().unwrap();
    let demo = ok(&["demo-config"]).stdout;
    let text = String::from_utf8(demo).unwrap().replace("seed = 42", "seed = 9");
    fs::write(t.path().join("scenario.toml"), text).unwrap();
    let out_dir = t.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_qopsim"))
        .args(["publish", "--out", out_dir.to_str().unwrap()])
        .env("QOPSIM_CONFIG_DIR", t.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(report(&out_dir)["provenance"]["seed"], 9);

    let empty = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_qopsim"))
        .args(["publish", "--out", out_dir.to_str().unwrap()])
        .env("QOPSIM_CONFIG_DIR", empty.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
}

#[test]
fn forecast_reads_csv_series() {
    let t = tempfile::tempdir().unwrap();
    let csv = t.path().join("series.csv");
    let mut text = String::from("slot,mbps\n");
    for i in 0..48 {
        text.push_str(&format!("{i},{}\n", 100.0 + (i % 4) as f64));
    }
    fs::write(&csv, text).unwrap();
    let out: Value = serde_json::from_slice(
        &ok(&["forecast", csv.to_str().unwrap(), "--window", "4", "--horizon", "2", "--day-slots", "4"]).stdout,
    )
    .unwrap();
    let values = out["forecast"]["values"].as_array().unwrap();
    assert_eq!(values.len(), 2);
    assert!((values[0].as_f64().unwrap() - 101.5).abs() < 1e-9);

    let seasonal: Value = serde_json::from_slice(
        &ok(&["forecast", csv.to_str().unwrap(), "--column", "mbps", "--period", "4", "--horizon", "4", "--day-slots", "4"])
            .stdout,
    )
    .unwrap();
    assert_eq!(seasonal["rolling_mae"], 0.0);

    assert_eq!(qopsim(&["forecast", csv.to_str().unwrap(), "--column", "nope"]).status.code(), Some(3));
}
