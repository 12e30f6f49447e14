use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SensitivityWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionClass {
    Sd,
    Hd,
    FullHd,
    Uhd,
}

/// One encoded rendition of an item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub index: usize,
    pub bitrate_kbps: f64,
    /// Quality score in `[0, 100]`.
    pub quality_score: f64,
    pub file_bytes: u64,
    pub meta_bytes: u64,
    pub resolution: ResolutionClass,
}

impl Ladder {
    pub fn bytes_per_second(&self) -> f64 {
        self.bitrate_kbps * 1000.0 / 8.0
    }
}

/// Renditions available for one item, ordered by bitrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LadderGroup(pub Vec<Ladder>);

impl LadderGroup {
    pub fn new(ladders: Vec<Ladder>) -> Result<Self> {
        let g = Self(ladders);
        g.validate()?;
        Ok(g)
    }

    /// Builds a group for content of `duration_s` from `(bitrate, quality)` pairs.
    pub fn from_rungs(rungs: &[(f64, f64)], duration_s: f64) -> Result<Self> {
        let ladders = rungs
            .iter()
            .enumerate()
            .map(|(index, &(bitrate_kbps, quality_score))| Ladder {
                index,
                bitrate_kbps,
                quality_score,
                file_bytes: (bitrate_kbps * 1000.0 / 8.0 * duration_s).round() as u64,
                meta_bytes: 2_000 + 64 * index as u64,
                resolution: match bitrate_kbps {
                    b if b < 1000.0 => ResolutionClass::Sd,
                    b if b < 2500.0 => ResolutionClass::Hd,
                    b if b < 6000.0 => ResolutionClass::FullHd,
                    _ => ResolutionClass::Uhd,
                },
            })
            .collect();
        Self::new(ladders)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::input("ladder group is empty"));
        }
        for (i, l) in self.0.iter().enumerate() {
            if l.index != i {
                return Err(Error::input(format!("ladder {i} has index {}", l.index)));
            }
            if !(l.bitrate_kbps > 0.0) || !(0.0..=100.0).contains(&l.quality_score) {
                return Err(Error::input(format!("ladder {i} has invalid bitrate or quality")));
            }
        }
        for w in self.0.windows(2) {
            if w[1].bitrate_kbps <= w[0].bitrate_kbps {
                return Err(Error::input("ladder bitrates must be strictly increasing"));
            }
            if w[1].quality_score < w[0].quality_score {
                return Err(Error::input("ladder quality must be nondecreasing in bitrate"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Ladder> {
        self.0.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Ladder> {
        self.0.iter()
    }

    pub fn top(&self) -> &Ladder {
        self.0.last().expect("validated group is nonempty")
    }

    pub fn mean_quality(&self) -> f64 {
        self.0.iter().map(|l| l.quality_score).sum::<f64>() / self.0.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: u64,
    pub duration_s: f64,
    pub ladders: LadderGroup,
    pub popularity_weight: f64,
    /// Normalized value score, filled in by the value model.
    #[serde(default)]
    pub value_score: f64,
}

impl Item {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::input(format!("item {} has duration {}", self.id, self.duration_s)));
        }
        self.ladders.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Page {
    Feed,
    Detail,
    Publish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkClass {
    Poor,
    Fair,
    Good,
}

impl NetworkClass {
    pub const ALL: [NetworkClass; 3] = [NetworkClass::Poor, NetworkClass::Fair, NetworkClass::Good];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            NetworkClass::Poor => "poor",
            NetworkClass::Fair => "fair",
            NetworkClass::Good => "good",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub page: Page,
    pub hour: u8,
    pub network: NetworkClass,
}

impl Default for Context {
    fn default() -> Self {
        Self {
            page: Page::Feed,
            hour: 20,
            network: NetworkClass::Fair,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub id: u64,
    /// Device capability in `[0, 1]`.
    pub device_score: f64,
    /// Media seconds already buffered for the first item when the session opens.
    pub buffer_s: f64,
    pub portraits: BTreeMap<String, u32>,
    pub qop_sens: SensitivityWeights,
    pub network_trace_id: String,
    pub context: Context,
}

impl UserState {
    pub fn new(id: u64) -> Self {
        Self {
            id,
            device_score: 0.8,
            buffer_s: 0.0,
            portraits: BTreeMap::new(),
            qop_sens: SensitivityWeights::uniform(),
            network_trace_id: String::new(),
            context: Context::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.device_score) {
            return Err(Error::input("device_score outside [0,1]"));
        }
        if !(self.buffer_s >= 0.0) {
            return Err(Error::input("buffer_s must be >= 0"));
        }
        self.qop_sens.validate()
    }

    pub fn portrait(&self, name: &str) -> u32 {
        self.portraits.get(name).copied().unwrap_or(0)
    }
}
