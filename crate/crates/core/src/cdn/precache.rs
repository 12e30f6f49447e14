use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::billing::percentile95;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileForecast {
    pub file: u64,
    pub region: u16,
    pub predicted_requests: f64,
    /// Forecast confidence in [0, 1].
    pub confidence: f64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecacheConfig {
    /// Files whose `confidence` falls below this are not pushed.
    pub min_confidence: f64,
    pub max_files: usize,
    pub slot_seconds: f64,
    /// Edge nodes per region that receive pushes.
    pub nodes_per_region: usize,
    /// Symmetric pairwise similarity; absent pairs score 0.
    #[serde(default)]
    pub similarity: Vec<(u64, u64, f64)>,
}

impl Default for PrecacheConfig {
    fn default() -> Self {
        Self {
            min_confidence: 0.5,
            max_files: 100,
            slot_seconds: 300.0,
            nodes_per_region: 1,
            similarity: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Push {
    pub file: u64,
    pub region: u16,
    pub node: usize,
    /// `(slot, bytes)` chunks, all in valley slots.
    pub chunks: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecachePlan {
    pub pushes: Vec<Push>,
    /// Projected per-region load after the pushes, Mbps per slot.
    pub projected_mbps: BTreeMap<u16, Vec<f64>>,
    pub diagnostics: Vec<String>,
}

/// Plans pushes of high-confidence, high-demand files into valley slots.
///
/// Each region's projected load (Mbps per slot) fixes its billing watermark
/// W. Pushes only fill slots below W and never lift them above it, so the
/// count of slots above W is unchanged and the 95-peak stays at W. Within a
/// region, files go to the node whose already-assigned files are least
/// similar.
pub fn precache_plan(
    forecasts: &[FileForecast],
    projected_mbps: &BTreeMap<u16, Vec<f64>>,
    cfg: &PrecacheConfig,
) -> Result<PrecachePlan> {
    if cfg.nodes_per_region == 0 || !(cfg.slot_seconds > 0.0) {
        return Err(Error::param("precache needs >= 1 node per region and a positive slot"));
    }
    let sim: BTreeMap<(u64, u64), f64> = cfg
        .similarity
        .iter()
        .flat_map(|&(a, b, s)| [((a, b), s), ((b, a), s)])
        .collect();
    let mut plan = PrecachePlan {
        pushes: Vec::new(),
        projected_mbps: projected_mbps.clone(),
        diagnostics: Vec::new(),
    };
    let mut watermarks = BTreeMap::new();
    for (&region, series) in projected_mbps {
        watermarks.insert(region, percentile95(series)?);
    }

    let mut candidates: Vec<&FileForecast> = forecasts
        .iter()
        .filter(|f| f.confidence >= cfg.min_confidence && f.confidence > 0.0)
        .collect();
    if candidates.is_empty() {
        plan.diagnostics.push("no forecast passes the confidence threshold".into());
        return Ok(plan);
    }
    candidates.sort_by(|a, b| {
        (b.predicted_requests * b.confidence)
            .total_cmp(&(a.predicted_requests * a.confidence))
            .then(a.file.cmp(&b.file))
    });
    candidates.truncate(cfg.max_files);

    let mut nodes: BTreeMap<u16, Vec<Vec<u64>>> = BTreeMap::new();
    for f in candidates {
        let (Some(series), Some(&w)) = (plan.projected_mbps.get_mut(&f.region), watermarks.get(&f.region))
        else {
            plan.diagnostics.push(format!("file {}: no load projection for region {}", f.file, f.region));
            continue;
        };
        let headroom_bytes: f64 = series
            .iter()
            .map(|m| (w - m).max(0.0) * cfg.slot_seconds * 125_000.0)
            .sum();
        if headroom_bytes < f.bytes as f64 {
            plan.diagnostics.push(format!("file {}: not enough valley capacity", f.file));
            continue;
        }
        // deepest valleys first
        let mut order: Vec<usize> = (0..series.len()).filter(|&t| series[t] < w).collect();
        order.sort_by(|&a, &b| series[a].total_cmp(&series[b]).then(a.cmp(&b)));
        let mut left = f.bytes as f64;
        let mut chunks = Vec::new();
        for t in order {
            if left <= 0.0 {
                break;
            }
            let room = (w - series[t]) * cfg.slot_seconds * 125_000.0;
            let take = room.min(left);
            series[t] = (series[t] + take / (cfg.slot_seconds * 125_000.0)).min(w);
            left -= take;
            chunks.push((t, take));
        }
        chunks.sort_by_key(|c| c.0);
        let region_nodes = nodes
            .entry(f.region)
            .or_insert_with(|| vec![Vec::new(); cfg.nodes_per_region]);
        let node = (0..region_nodes.len())
            .min_by(|&a, &b| {
                let score = |n: usize| -> f64 {
                    region_nodes[n]
                        .iter()
                        .map(|g| sim.get(&(f.file, *g)).copied().unwrap_or(0.0))
                        .sum()
                };
                score(a)
                    .total_cmp(&score(b))
                    .then(region_nodes[a].len().cmp(&region_nodes[b].len()))
                    .then(a.cmp(&b))
            })
            .expect("at least one node");
        region_nodes[node].push(f.file);
        plan.pushes.push(Push {
            file: f.file,
            region: f.region,
            node,
            chunks,
        });
    }
    if plan.pushes.is_empty() && plan.diagnostics.is_empty() {
        plan.diagnostics.push("no valley capacity".into());
    }
    Ok(plan)
}
