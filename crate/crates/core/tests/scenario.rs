use std::fs;

use qopsim::scenario::{
    compare_runs, run_scenario, section_seed, write_run, MetricDiff, Report, ScenarioConfig, SectionDiff, Subcommand,
    REPORT_FILE,
};
use qopsim::Error;

fn demo(overrides: &[&str]) -> qopsim::scenario::LoadedConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ScenarioConfig::from_text(ScenarioConfig::demo_text(), None, &o).unwrap()
}

#[test]
fn section_alone_equals_section_in_full() {
    let cfg = demo(&[]);
    let full = run_scenario(&cfg, Subcommand::Full).unwrap();
    let cdn = run_scenario(&cfg, Subcommand::Cdn).unwrap();
    assert_eq!(full.report.sections["cdn"], cdn.report.sections["cdn"]);
    assert_eq!(cdn.report.sections.len(), 1);
    assert_ne!(section_seed(42, "cdn"), section_seed(42, "uiae"));
}

#[test]
fn report_roundtrips_and_diffs() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_scenario(&demo(&[]), Subcommand::Publish).unwrap();
    let written = write_run(&a, dir.path()).unwrap();
    assert!(written.iter().any(|p| p.ends_with(REPORT_FILE)));
    let back = Report::load(&dir.path().join(REPORT_FILE)).unwrap();
    assert_eq!(back, a.report);
    assert!(compare_runs(&a.report, &back).unwrap().is_zero());

    let b = run_scenario(&demo(&["seed=5"]), Subcommand::Publish).unwrap();
    let diff = compare_runs(&a.report, &b.report).unwrap();
    assert_ne!(a.report.provenance.config_sha256, b.report.provenance.config_sha256);
    match &diff.sections["publish"] {
        SectionDiff::Both { metrics, .. } => assert!(metrics.values().all(|m| matches!(m, MetricDiff::Both { .. }))),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn schema_mismatch_is_rejected() {
    let a = run_scenario(&demo(&[]), Subcommand::Publish).unwrap();
    let text = a.report.to_json().unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
    assert!(matches!(Report::from_json(&text), Err(Error::SchemaMismatch(_))));
}

#[test]
fn config_files_and_baseline_resolve_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("baseline.toml"), qopsim::model::BaselineConfig::shipped_toml()).unwrap();
    let text = format!("baseline = \"baseline.toml\"\n{}", ScenarioConfig::demo_text());
    let path = dir.path().join("scenario.toml");
    fs::write(&path, text).unwrap();
    let loaded = ScenarioConfig::load(&path, &[]).unwrap();
    let out = run_scenario(&loaded, Subcommand::Cdn).unwrap();
    assert_eq!(out.report.provenance.seed, 42);

    fs::remove_file(dir.path().join("baseline.toml")).unwrap();
    let loaded = ScenarioConfig::load(&path, &[]);
    let failed = loaded.and_then(|l| run_scenario(&l, Subcommand::Cdn));
    assert!(matches!(failed, Err(Error::Config(_))), "{failed:?}");
}

#[test]
fn json_configs_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    fs::write(&path, r#"{ "seed": 3, "cdn": { "unit_prices": [2.0, 1.0] } }"#).unwrap();
    let loaded = ScenarioConfig::load(&path, &["cdn.cache.requests=2000".into()]).unwrap();
    assert_eq!(loaded.config.cdn.unit_prices, vec![2.0, 1.0]);
    assert_eq!(loaded.config.cdn.cache.requests, 2000);
}
