use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::playback::{StateBuckets, StateFeatures};

/// Per-bucket probability that each ladder ends up the client's choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderChoiceModel {
    pub ladders: usize,
    pub buckets: BTreeMap<u32, Vec<f64>>,
}

impl LadderChoiceModel {
    pub fn uniform(ladders: usize) -> Self {
        Self {
            ladders,
            buckets: BTreeMap::new(),
        }
    }

    /// Probability vector for a bucket; uniform for buckets never observed.
    pub fn probs(&self, bucket: u32) -> Vec<f64> {
        self.buckets
            .get(&bucket)
            .cloned()
            .unwrap_or_else(|| vec![1.0 / self.ladders as f64; self.ladders])
    }
}

/// Add-one smoothed choice frequencies from `(bucket, chosen ladder)` pairs.
pub fn estimate_p(history: &[(u32, usize)], ladders: usize) -> Result<LadderChoiceModel> {
    if ladders == 0 {
        return Err(Error::param("ladder count must be >= 1"));
    }
    let mut counts: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for &(b, l) in history {
        if l >= ladders {
            return Err(Error::input(format!("observed ladder {l} but only {ladders} exist")));
        }
        counts.entry(b).or_insert_with(|| vec![0; ladders])[l] += 1;
    }
    let buckets = counts
        .into_iter()
        .map(|(b, c)| {
            let n: u64 = c.iter().sum();
            let denom = (n + ladders as u64) as f64;
            (b, c.iter().map(|x| (x + 1) as f64 / denom).collect())
        })
        .collect();
    Ok(LadderChoiceModel { ladders, buckets })
}

/// [`estimate_p`] over raw client states bucketed with `scheme`.
pub fn estimate_p_inductive(
    history: &[(StateFeatures, usize)],
    scheme: &StateBuckets,
    ladders: usize,
) -> Result<LadderChoiceModel> {
    let bucketed: Vec<(u32, usize)> = history
        .iter()
        .map(|(f, l)| (scheme.state_of(f), *l))
        .collect();
    estimate_p(&bucketed, ladders)
}
