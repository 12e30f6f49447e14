//! Strategy labels on transcode outputs and request-time resolution.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub strategy: String,
    /// Users of this arm see the group's outputs.
    pub arm: usize,
    /// Active window `[start, end)` in seconds.
    pub window: (u64, u64),
    /// Fraction of the transcoding resource pool reserved for the group.
    pub pool_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub experiment: String,
    pub groups: Vec<GroupSpec>,
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::param("experiment needs at least one group"));
        }
        for g in &self.groups {
            if g.window.0 >= g.window.1 {
                return Err(Error::param(format!("group {} has an empty window", g.name)));
            }
        }
        let total: f64 = self.groups.iter().map(|g| g.pool_fraction).sum();
        if self.groups.iter().any(|g| !(g.pool_fraction >= 0.0)) || total > 1.0 + 1e-9 {
            return Err(Error::param("pool fractions must be >= 0 and sum to at most 1"));
        }
        Ok(())
    }

    /// Integer split of `units` of resource by pool fraction (largest remainder).
    pub fn partition_pool(&self, units: u64) -> Vec<u64> {
        let raw: Vec<f64> = self.groups.iter().map(|g| g.pool_fraction * units as f64).collect();
        let mut out: Vec<u64> = raw.iter().map(|r| r.floor() as u64).collect();
        let target = raw.iter().sum::<f64>().round() as u64;
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
        let mut given: u64 = out.iter().sum();
        for i in order {
            if given >= target {
                break;
            }
            out[i] += 1;
            given += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub item_id: u64,
    pub strategy: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputTag {
    pub experiment: String,
    pub strategy: String,
    pub group: String,
    pub window: (u64, u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedOutput {
    pub file: OutputFile,
    /// One tag per group using the file's strategy; empty when no group does.
    pub tags: Vec<OutputTag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub item_id: u64,
    pub arm: usize,
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Resolution {
    Tagged { output: usize, tag: OutputTag },
    Untagged,
}

/// Read-only lookup from requests to labeled outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolver {
    config: LabelConfig,
    index: BTreeMap<(u64, String), usize>,
    outputs: Vec<TaggedOutput>,
}

impl Resolver {
    pub fn outputs(&self) -> &[TaggedOutput] {
        &self.outputs
    }

    /// First group (in config order) matching the arm and time, then the
    /// item's output for that group's strategy.
    pub fn resolve(&self, req: &Request) -> Resolution {
        let Some(group) = self
            .config
            .groups
            .iter()
            .find(|g| g.arm == req.arm && g.window.0 <= req.t && req.t < g.window.1)
        else {
            return Resolution::Untagged;
        };
        match self.index.get(&(req.item_id, group.strategy.clone())) {
            Some(&i) => Resolution::Tagged {
                output: i,
                tag: OutputTag {
                    experiment: self.config.experiment.clone(),
                    strategy: group.strategy.clone(),
                    group: group.name.clone(),
                    window: group.window,
                },
            },
            None => Resolution::Untagged,
        }
    }
}

pub fn label_outputs(outputs: &[OutputFile], cfg: &LabelConfig) -> Result<Resolver> {
    cfg.validate()?;
    let mut index = BTreeMap::new();
    let mut tagged = Vec::with_capacity(outputs.len());
    for (i, f) in outputs.iter().enumerate() {
        if index.insert((f.item_id, f.strategy.clone()), i).is_some() {
            return Err(Error::input(format!("duplicate output for item {} strategy {}", f.item_id, f.strategy)));
        }
        let tags = cfg
            .groups
            .iter()
            .filter(|g| g.strategy == f.strategy)
            .map(|g| OutputTag {
                experiment: cfg.experiment.clone(),
                strategy: g.strategy.clone(),
                group: g.name.clone(),
                window: g.window,
            })
            .collect();
        tagged.push(TaggedOutput { file: f.clone(), tags });
    }
    Ok(Resolver { config: cfg.clone(), index, outputs: tagged })
}
