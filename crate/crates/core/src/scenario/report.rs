//! Run reports, CSV series, atomic output and run comparison.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::ProfitBreakdown;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the config file bytes as loaded, before overrides.
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub subcommand: String,
    #[serde(default)]
    pub overrides: Vec<String>,
}

/// One module's results. `metrics` holds flat scalars for comparison;
/// `detail` keeps the structured module output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profit: Option<ProfitBreakdown<f64>>,
    /// Metrics that came out NaN or infinite and were left out.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
    #[serde(default)]
    pub detail: serde_json::Value,
}

impl Section {
    pub fn put(&mut self, name: &str, v: f64) {
        if v.is_finite() {
            self.metrics.insert(name.to_string(), v);
        } else {
            self.undefined.push(name.to_string());
        }
    }

    pub fn detail<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        if !self.detail.is_object() {
            self.detail = serde_json::json!({});
        }
        self.detail[name] = serde_json::to_value(value)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub sections: BTreeMap<String, Section>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let version = v.get("schema_version").and_then(|x| x.as_u64());
        if version != Some(REPORT_SCHEMA_VERSION as u64) {
            return Err(Error::SchemaMismatch(format!(
                "report schema {version:?} (expected {REPORT_SCHEMA_VERSION})"
            )));
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A plot-ready table written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: Report,
    pub series: Vec<Series>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to a sibling temp file, syncs it and renames it over
/// `path`, so readers see the old file or the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Series first, report last: a present `report.json` implies every series
/// it belongs to was written.
pub fn write_run(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for s in &out.series {
        let p = dir.join(format!("{}.csv", s.name));
        write_atomic(&p, &s.to_csv()?)?;
        written.push(p);
    }
    let p = dir.join(REPORT_FILE);
    write_atomic(&p, out.report.to_json()?.as_bytes())?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MetricDiff {
    Both {
        a: f64,
        b: f64,
        delta: f64,
        /// `delta / |a|`; absent when `a` is zero.
        relative: Option<f64>,
    },
    AbsentInA { b: f64 },
    AbsentInB { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SectionDiff {
    Both {
        metrics: BTreeMap<String, MetricDiff>,
        profit_a: Option<f64>,
        profit_b: Option<f64>,
        /// Profit is positive on one side and negative on the other.
        profit_sign_flip: bool,
    },
    AbsentInA,
    AbsentInB,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiff {
    pub schema_version: u32,
    pub a: Provenance,
    pub b: Provenance,
    pub sections: BTreeMap<String, SectionDiff>,
}

impl RunDiff {
    /// True when both runs have the same sections and metrics with zero deltas
    /// and no profit flips.
    pub fn is_zero(&self) -> bool {
        self.sections.values().all(|s| match s {
            SectionDiff::Both { metrics, profit_sign_flip, .. } => {
                !profit_sign_flip
                    && metrics.values().all(|m| matches!(m, MetricDiff::Both { delta, .. } if *delta == 0.0))
            }
            _ => false,
        })
    }

    pub fn sign_flips(&self) -> Vec<&str> {
        self.sections
            .iter()
            .filter(|(_, s)| matches!(s, SectionDiff::Both { profit_sign_flip: true, .. }))
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

fn diff_metrics(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> BTreeMap<String, MetricDiff> {
    let mut out = BTreeMap::new();
    for (k, &va) in a {
        let d = match b.get(k) {
            Some(&vb) => {
                let delta = vb - va;
                MetricDiff::Both { a: va, b: vb, delta, relative: (va != 0.0).then(|| delta / va.abs()) }
            }
            None => MetricDiff::AbsentInB { a: va },
        };
        out.insert(k.clone(), d);
    }
    for (k, &vb) in b {
        if !a.contains_key(k) {
            out.insert(k.clone(), MetricDiff::AbsentInA { b: vb });
        }
    }
    out
}

pub fn compare_runs(a: &Report, b: &Report) -> Result<RunDiff> {
    if a.schema_version != b.schema_version {
        return Err(Error::SchemaMismatch(format!(
            "report schemas differ: {} vs {}",
            a.schema_version, b.schema_version
        )));
    }
    let mut sections = BTreeMap::new();
    for (name, sa) in &a.sections {
        let d = match b.sections.get(name) {
            None => SectionDiff::AbsentInB,
            Some(sb) => {
                let pa = sa.profit.map(|p| p.profit);
                let pb = sb.profit.map(|p| p.profit);
                let flip = matches!((pa, pb), (Some(x), Some(y)) if (x > 0.0 && y < 0.0) || (x < 0.0 && y > 0.0));
                SectionDiff::Both {
                    metrics: diff_metrics(&sa.metrics, &sb.metrics),
                    profit_a: pa,
                    profit_b: pb,
                    profit_sign_flip: flip,
                }
            }
        };
        sections.insert(name.clone(), d);
    }
    for name in b.sections.keys() {
        if !a.sections.contains_key(name) {
            sections.insert(name.clone(), SectionDiff::AbsentInA);
        }
    }
    Ok(RunDiff { schema_version: a.schema_version, a: a.provenance.clone(), b: b.provenance.clone(), sections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{profit, EconomyParams};

    fn report(metric: f64, p: f64) -> Report {
        let econ = EconomyParams { lt_base: 1.0, arpu_base: 1.0, roi_gamma: 0.0, discount_rate: 0.0 };
        let mut s = Section::default();
        s.put("m", metric);
        s.profit = Some(profit(p, 0.0, 0.0, &econ));
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            provenance: Provenance {
                config_sha256: "x".into(),
                seed: 1,
                version: "0".into(),
                subcommand: "t".into(),
                overrides: vec![],
            },
            sections: [("s".to_string(), s)].into_iter().collect(),
        }
    }

    #[test]
    fn identical_reports_diff_to_zero() {
        let a = report(2.0, 1.0);
        assert!(compare_runs(&a, &a).unwrap().is_zero());
    }

    #[test]
    fn deltas_relative_and_flip() {
        let d = compare_runs(&report(2.0, 1.0), &report(3.0, -1.0)).unwrap();
        let SectionDiff::Both { metrics, profit_sign_flip, .. } = &d.sections["s"] else { panic!() };
        assert!(profit_sign_flip);
        assert_eq!(metrics["m"], MetricDiff::Both { a: 2.0, b: 3.0, delta: 1.0, relative: Some(0.5) });
        assert_eq!(d.sign_flips(), vec!["s"]);
    }

    #[test]
    fn missing_section_marked_absent() {
        let a = report(1.0, 1.0);
        let mut b = a.clone();
        b.sections.clear();
        let d = compare_runs(&a, &b).unwrap();
        assert_eq!(d.sections["s"], SectionDiff::AbsentInB);
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("absent_in_b"));
    }

    #[test]
    fn schema_mismatch() {
        let a = report(1.0, 1.0);
        let mut b = a.clone();
        b.schema_version = 99;
        assert!(matches!(compare_runs(&a, &b), Err(Error::SchemaMismatch(_))));
        let text = b.to_json().unwrap();
        assert!(matches!(Report::from_json(&text), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn undefined_metrics_kept_out() {
        let mut s = Section::default();
        s.put("nan", f64::NAN);
        assert!(s.metrics.is_empty());
        assert_eq!(s.undefined, vec!["nan"]);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
