use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::qop::{QoPVector, QopMetric};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::HigherIsBetter => 1.0,
            Direction::LowerIsBetter => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ImpactEntry {
    Available { coefficient: f64, direction: Direction },
    NotAvailable,
}

/// Per-metric LT impact for a 1% relative change of the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImpactTable {
    entries: BTreeMap<QopMetric, ImpactEntry>,
}

/// Per-metric multipliers applied on top of the impact coefficients.
/// Metrics without an explicit weight count with weight 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensitivityWeights(pub BTreeMap<QopMetric, f64>);

impl SensitivityWeights {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn weight(&self, m: QopMetric) -> f64 {
        self.0.get(&m).copied().unwrap_or(1.0)
    }

    pub fn with(mut self, m: QopMetric, w: f64) -> Self {
        self.0.insert(m, w);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (m, w) in &self.0 {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::param(format!("sensitivity for {} is {w}", m.name())));
            }
        }
        Ok(())
    }
}

/// Result of mapping a QoP change onto relative LT change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtDelta {
    /// ΔLT / LT.
    pub relative: f64,
    /// Metrics that changed away from a zero baseline; their relative change
    /// is undefined so they were left out of the sum.
    pub skipped: Vec<QopMetric>,
}

impl LtDelta {
    pub fn has_warnings(&self) -> bool {
        !self.skipped.is_empty()
    }
}

impl ImpactTable {
    pub fn new(entries: BTreeMap<QopMetric, ImpactEntry>) -> Result<Self> {
        let table = Self { entries };
        table.validate()?;
        Ok(table)
    }

    /// Table with every metric marked not available.
    pub fn empty() -> Self {
        Self {
            entries: QopMetric::ALL
                .iter()
                .map(|m| (*m, ImpactEntry::NotAvailable))
                .collect(),
        }
    }

    pub fn entry(&self, m: QopMetric) -> ImpactEntry {
        self.entries.get(&m).copied().unwrap_or(ImpactEntry::NotAvailable)
    }

    pub fn set(&mut self, m: QopMetric, entry: ImpactEntry) {
        self.entries.insert(m, entry);
    }

    pub fn with(mut self, m: QopMetric, coefficient: f64, direction: Direction) -> Self {
        self.set(m, ImpactEntry::Available { coefficient, direction });
        self
    }

    pub fn validate(&self) -> Result<()> {
        for m in QopMetric::ALL {
            match self.entries.get(&m) {
                None => {
                    return Err(Error::Config(format!(
                        "impact table has no entry for {} (use status = \"not_available\")",
                        m.name()
                    )))
                }
                Some(ImpactEntry::Available { coefficient, .. }) => {
                    if !coefficient.is_finite() || *coefficient < 0.0 {
                        return Err(Error::Config(format!(
                            "impact coefficient for {} is {coefficient}",
                            m.name()
                        )));
                    }
                }
                Some(ImpactEntry::NotAvailable) => {}
            }
        }
        Ok(())
    }

    /// Relative LT change caused by moving from `before` to `after`.
    pub fn lt_delta(&self, before: &QoPVector, after: &QoPVector) -> LtDelta {
        self.weighted_lt_delta(before, after, &SensitivityWeights::uniform())
    }

    /// As [`Self::lt_delta`] with each metric's contribution multiplied by a
    /// per-user sensitivity weight.
    pub fn weighted_lt_delta(
        &self,
        before: &QoPVector,
        after: &QoPVector,
        weights: &SensitivityWeights,
    ) -> LtDelta {
        let mut relative = 0.0;
        let mut skipped = Vec::new();
        for m in QopMetric::ALL {
            let ImpactEntry::Available { coefficient, direction } = self.entry(m) else {
                continue;
            };
            let (b, a) = (before.get(m), after.get(m));
            if a == b {
                continue;
            }
            if b == 0.0 {
                skipped.push(m);
                continue;
            }
            let pct_change = 100.0 * (a - b) / b;
            relative += weights.weight(m) * direction.sign() * coefficient * pct_change;
        }
        LtDelta { relative, skipped }
    }
}

impl Default for ImpactTable {
    fn default() -> Self {
        super::BaselineConfig::shipped().impacts
    }
}

/// Relative LT change (ΔLT/LT) implied by a QoP change.
pub fn qop_delta_to_lt(before: &QoPVector, after: &QoPVector, impacts: &ImpactTable) -> LtDelta {
    impacts.lt_delta(before, after)
}
