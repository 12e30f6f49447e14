//! QoP records and the economic layer that maps QoP changes onto lifetime,
//! revenue and profit.

mod economy;
mod impact;
mod qop;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use economy::{discounted_value, profit, EconomyParams, ProfitBreakdown};
pub use impact::{
    qop_delta_to_lt, Direction, ImpactEntry, ImpactTable, LtDelta, SensitivityWeights,
};
pub use qop::{QoPVector, QopMetric};

use crate::error::{Error, Result};

const SHIPPED_BASELINE: &str = include_str!("../../config/impact_baseline.toml");

/// Impact table plus economy parameters, as stored in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub economy: EconomyParams<f64>,
    pub impacts: ImpactTable,
}

impl BaselineConfig {
    /// The baseline shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED_BASELINE).expect("shipped baseline parses")
    }

    pub fn shipped_toml() -> &'static str {
        SHIPPED_BASELINE
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `.json` as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.economy.validate()?;
        self.impacts.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_baseline_covers_every_metric() {
        let cfg = BaselineConfig::shipped();
        for m in QopMetric::ALL {
            // entry() would silently default; check the map really has it
            let json = serde_json::to_value(&cfg.impacts).unwrap();
            assert!(json.get(m.name()).is_some(), "{}", m.name());
        }
        assert_eq!(
            cfg.impacts.entry(QopMetric::TemperatureC),
            ImpactEntry::Available {
                coefficient: 0.00183,
                direction: Direction::LowerIsBetter
            }
        );
        assert_eq!(cfg.impacts.entry(QopMetric::TrafficBytes), ImpactEntry::NotAvailable);
    }

    #[test]
    fn json_and_toml_agree() {
        let cfg = BaselineConfig::shipped();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(BaselineConfig::from_json_str(&json).unwrap(), cfg);
    }

    #[test]
    fn load_from_file_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.json");
        std::fs::write(&p, serde_json::to_string(&BaselineConfig::shipped()).unwrap()).unwrap();
        assert_eq!(BaselineConfig::load(&p).unwrap(), BaselineConfig::shipped());
        let p = dir.path().join("b.toml");
        std::fs::write(&p, BaselineConfig::shipped_toml()).unwrap();
        assert_eq!(BaselineConfig::load(&p).unwrap(), BaselineConfig::shipped());
    }
}
