//! Scenario configuration: one file holding the seed, workload specs and
//! module settings, with flat `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::uplift::UpliftSpec;
use crate::cdn::{HashScheduleConfig, ShareConfig, ShiftMode, VendorCapacity};
use crate::delivery::{ForecastMethod, ForecastModel};
use crate::error::{Error, Result};
use crate::experiment::QuasiSimSpec;
use crate::model::BaselineConfig;
use crate::publish::{
    Codec, DegradationModel, EncodeOption, ModeConfig, ParamObjective, PreUploadInputs, PriorityLevel,
    PublishJob, ResponseSurfaces, UploadNode,
};
use crate::uiae::{AllocationConfig, CostPrices, LadderUpdateConfig};
use crate::workload::{CatalogSpec, WaveformSpec};

const DEMO: &str = include_str!("../../config/demo.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default)]
    pub name: String,
    /// Impact/economy baseline file; the shipped table when absent.
    #[serde(default)]
    pub baseline: Option<PathBuf>,
    #[serde(default)]
    pub playback: PlaybackSection,
    #[serde(default)]
    pub cdn: CdnSection,
    #[serde(default)]
    pub delivery: DeliverySection,
    #[serde(default)]
    pub uiae: UiaeSection,
    #[serde(default)]
    pub publish: PublishSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaybackSection {
    pub uplift: UpliftSpec,
    /// Users whose aware-decider session traces are digested into the report.
    pub traced_users: usize,
}

impl Default for PlaybackSection {
    fn default() -> Self {
        Self { uplift: UpliftSpec::default(), traced_users: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdnSection {
    pub waveform: WaveformSpec,
    pub vendors: Vec<VendorCapacity>,
    /// Price per Mbps of billed 95-peak, per vendor.
    pub unit_prices: Vec<f64>,
    pub modes: Vec<ShiftMode>,
    pub cache: CacheSection,
    pub shares: ShareSection,
}

impl Default for CdnSection {
    fn default() -> Self {
        Self {
            waveform: WaveformSpec::shipped_month(),
            vendors: crate::workload::shipped_vendors(),
            unit_prices: vec![1.0, 1.0],
            modes: vec![ShiftMode::CrossDayShift, ShiftMode::PhaseShift, ShiftMode::ComplementaryShift],
            cache: CacheSection::default(),
            shares: ShareSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CacheSection {
    pub catalog: CatalogSpec,
    pub requests: usize,
    pub vendors: usize,
    /// Per-vendor edge capacity as a fraction of the catalog's bytes.
    pub capacity_fraction: f64,
    pub hash: HashScheduleConfig,
}

impl Default for CacheSection {
    fn default() -> Self {
        Self {
            catalog: CatalogSpec { items: 20_000, ..Default::default() },
            requests: 200_000,
            vendors: 3,
            capacity_fraction: 0.02,
            hash: HashScheduleConfig { cold_fraction: 0.5, subset_size: 1, salt: 0 },
        }
    }
}

/// A vendor in the request-level share tracking run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareVendor {
    pub id: String,
    pub target_share: f64,
    pub speed_mean: f64,
    pub speed_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShareSection {
    pub vendors: Vec<ShareVendor>,
    pub requests: usize,
    pub config: ShareConfig,
}

impl Default for ShareSection {
    fn default() -> Self {
        let v = |id: &str, target_share, speed_mean, speed_std| ShareVendor {
            id: id.into(),
            target_share,
            speed_mean,
            speed_std,
        };
        Self {
            vendors: vec![v("a", 0.5, 9.0, 2.0), v("b", 0.3, 6.0, 1.0), v("c", 0.2, 12.0, 5.0)],
            requests: 100_000,
            config: ShareConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeliverySection {
    pub catalog: CatalogSpec,
    /// Requests whose ladder subset is optimized.
    pub requests: usize,
    /// Past ladder choices per state bucket used to estimate p.
    pub history: usize,
    pub w_quality: f64,
    pub w_bitrate: f64,
    pub deliver_scale: f64,
    pub forecast: ForecastModel,
}

impl Default for DeliverySection {
    fn default() -> Self {
        Self {
            catalog: CatalogSpec { items: 500, ..Default::default() },
            requests: 200,
            history: 2_000,
            w_quality: 0.01,
            w_bitrate: 0.02,
            deliver_scale: 2e-6,
            forecast: ForecastModel {
                window: 12,
                horizon: 12,
                day_slots: 288,
                method: ForecastMethod::MovingAverage,
                key: "total".into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UiaeSection {
    pub items: usize,
    pub value_samples: usize,
    pub clusters: usize,
    pub consumers: usize,
    pub windows: usize,
    pub bitrate_scales: Vec<f64>,
    pub quality_coefficient: f64,
    pub prices: CostPrices,
    pub ladder: LadderUpdateConfig,
    pub allocation: AllocationConfig,
    /// Quota budget as a fraction of the total requested quota.
    pub budget_fraction: f64,
    pub pid_steps: usize,
    pub pid_disturbance: f64,
}

impl Default for UiaeSection {
    fn default() -> Self {
        Self {
            items: 60,
            value_samples: 2_000,
            clusters: 3,
            consumers: 3_000,
            windows: 6,
            bitrate_scales: vec![0.7, 1.0, 1.4],
            quality_coefficient: 0.0005,
            prices: CostPrices::default(),
            ladder: LadderUpdateConfig::default(),
            allocation: AllocationConfig { granularity: 1.0, ..Default::default() },
            budget_fraction: 0.4,
            pid_steps: 120,
            pid_disturbance: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PublishSection {
    pub job: PublishJob,
    pub options: Vec<EncodeOption>,
    pub mode: ModeConfig,
    pub chunk_sizes: Vec<f64>,
    pub parallelism: Vec<u32>,
    pub nodes: Vec<UploadNode>,
    pub preupload: PreUploadInputs,
    pub qps: Vec<f64>,
    pub fps: Vec<f64>,
    pub bitrates_kbps: Vec<f64>,
    pub codecs: Vec<Codec>,
    pub surfaces: ResponseSurfaces,
    pub objective: ParamObjective,
    pub streaming: bool,
    pub degradation: DegradationModel,
    pub priority_levels: Vec<PriorityLevel>,
    /// Device quota already used by other work.
    pub consume_quota: f64,
    pub max_quota: f64,
    /// Largest tolerated degradation of the foreground experience.
    pub epsilon: f64,
}

impl Default for PublishSection {
    fn default() -> Self {
        use crate::publish::{Dist, EncodeMode, UploadNetwork};
        let mut speed = std::collections::BTreeMap::new();
        speed.insert(EncodeMode::Soft, 2.0);
        speed.insert(EncodeMode::Hard, 6.0);
        Self {
            job: PublishJob {
                material_bytes: 60e6,
                duration_s: 30.0,
                complexity: 0.5,
                weight_quality: 0.5,
                weight_speed: 0.5,
                alpha_ui: 1.0,
                network: UploadNetwork {
                    bandwidth_kbps: Dist::LogNormal { mu: 8.0, sigma: 0.5 },
                    connect_s: Dist::Uniform { lo: 0.1, hi: 0.5 },
                    fail_beta_bytes: Some(2e8),
                },
                encode_speed: speed,
            },
            options: vec![
                EncodeOption { mode: EncodeMode::Soft, size_ratio: 0.3, quality_delta: -1.0 },
                EncodeOption { mode: EncodeMode::Hard, size_ratio: 0.45, quality_delta: -2.0 },
                EncodeOption { mode: EncodeMode::Skip, size_ratio: 1.0, quality_delta: 0.0 },
            ],
            mode: ModeConfig::default(),
            chunk_sizes: vec![256e3, 1e6, 4e6],
            parallelism: vec![1, 2, 4],
            nodes: vec![
                UploadNode { id: 0, up: true, bandwidth_scale: 1.0, extra_connect_s: 0.0 },
                UploadNode { id: 1, up: true, bandwidth_scale: 0.8, extra_connect_s: 0.05 },
            ],
            preupload: PreUploadInputs {
                lead_s: Dist::LogNormal { mu: 2.0, sigma: 0.8 },
                encrypt_s: 0.5,
                upload_s: 12.0,
                cancel_prob: 0.15,
                preupload_bytes: 18e6,
                value_per_s: 0.01,
                cost_per_byte: 1e-9,
            },
            qps: vec![22.0, 28.0, 34.0],
            fps: vec![24.0, 30.0, 60.0],
            bitrates_kbps: vec![1000.0, 3000.0, 6000.0],
            codecs: vec![Codec::H264, Codec::H265],
            surfaces: ResponseSurfaces::default(),
            objective: ParamObjective::default(),
            streaming: true,
            degradation: DegradationModel::default(),
            priority_levels: (1..=10).map(|p| PriorityLevel { priority: p, quota: 5.0 * p as f64 }).collect(),
            consume_quota: 30.0,
            max_quota: 100.0,
            epsilon: 0.01,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub quasi: QuasiSimSpec,
}

/// Parsed configuration plus the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub bytes: Vec<u8>,
    pub path: Option<PathBuf>,
    pub overrides: Vec<String>,
}

impl LoadedConfig {
    /// Digest of the source bytes followed by each override on its own
    /// line, so runs with different effective configs never share a hash.
    pub fn digest(&self) -> String {
        let mut buf = self.bytes.clone();
        for o in &self.overrides {
            buf.push(b'\n');
            buf.extend_from_slice(o.as_bytes());
        }
        super::report::sha256_hex(&buf)
    }
}

enum Format {
    Toml,
    Json,
}

fn format_of(path: Option<&Path>) -> Format {
    match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Toml,
    }
}

fn parse_tree(text: &str, format: &Format) -> Result<serde_json::Value> {
    match format {
        Format::Json => serde_json::from_str(text).map_err(|e| Error::Config(e.to_string())),
        Format::Toml => {
            let v: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            serde_json::to_value(v).map_err(|e| Error::Config(e.to_string()))
        }
    }
}

/// Value text of an override: TOML literal when it parses, else a string.
fn override_value(raw: &str) -> serde_json::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t
            .remove("v")
            .and_then(|v| serde_json::to_value(v).ok())
            .unwrap_or_else(|| serde_json::Value::String(raw.into())),
        Err(_) => serde_json::Value::String(raw.into()),
    }
}

/// Applies `a.b.c=value`; missing intermediate tables are created.
pub fn apply_override(tree: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` has an empty segment")));
    }
    let mut node = tree;
    for p in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
        node = obj.entry(p.to_string()).or_insert_with(|| serde_json::json!({}));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("override `{key}` does not address a table field")))?;
    obj.insert(parts[parts.len() - 1].to_string(), override_value(raw.trim()));
    Ok(())
}

impl ScenarioConfig {
    pub fn demo_text() -> &'static str {
        DEMO
    }

    pub fn demo() -> Self {
        Self::from_text(DEMO, None, &[]).expect("demo config parses").config
    }

    /// Parses `text` (TOML unless `path` ends in `.json`) and applies the
    /// overrides before validation.
    pub fn from_text(text: &str, path: Option<&Path>, overrides: &[String]) -> Result<LoadedConfig> {
        let format = format_of(path);
        let mut tree = parse_tree(text, &format)?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let config: ScenarioConfig = serde_json::from_value(tree).map_err(|e| Error::Config(e.to_string()))?;
        config.validate(path.and_then(|p| p.parent()))?;
        Ok(LoadedConfig {
            config,
            bytes: text.as_bytes().to_vec(),
            path: path.map(Path::to_path_buf),
            overrides: overrides.to_vec(),
        })
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text, Some(path), overrides)
    }

    /// Baseline file path relative to the config's directory.
    pub fn baseline_path(&self, base_dir: Option<&Path>) -> Option<PathBuf> {
        self.baseline.as_ref().map(|p| match base_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.clone(),
        })
    }

    pub fn load_baseline(&self, base_dir: Option<&Path>) -> Result<BaselineConfig> {
        match self.baseline_path(base_dir) {
            Some(p) => BaselineConfig::load(&p).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("baseline {}: {io}", p.display())),
                other => other,
            }),
            None => Ok(BaselineConfig::shipped()),
        }
    }

    pub fn validate(&self, base_dir: Option<&Path>) -> Result<()> {
        if let Some(p) = self.baseline_path(base_dir) {
            if !p.is_file() {
                return Err(Error::Config(format!("baseline file {} does not exist", p.display())));
            }
        }
        let cdn = &self.cdn;
        if cdn.vendors.is_empty() || cdn.unit_prices.len() != cdn.vendors.len() {
            return Err(Error::Config("cdn needs vendors and one unit price per vendor".into()));
        }
        if cdn.cache.vendors == 0 || !(cdn.cache.capacity_fraction > 0.0) {
            return Err(Error::Config("cache needs vendors and a positive capacity fraction".into()));
        }
        let shares: f64 = cdn.shares.vendors.iter().map(|v| v.target_share).sum();
        if cdn.shares.vendors.is_empty() || (shares - 1.0).abs() > 1e-9 {
            return Err(Error::Config("share targets must sum to 1".into()));
        }
        if self.uiae.items == 0 || self.uiae.windows == 0 || self.uiae.clusters == 0 {
            return Err(Error::Config("uiae needs items, windows and clusters".into()));
        }
        if !(self.uiae.budget_fraction > 0.0 && self.uiae.budget_fraction <= 1.0) {
            return Err(Error::Config("uiae budget_fraction must be in (0,1]".into()));
        }
        if self.delivery.requests == 0 {
            return Err(Error::Config("delivery needs requests".into()));
        }
        Ok(())
    }
}
