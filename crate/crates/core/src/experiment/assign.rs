//! Hash-based arm assignment and within-feed interleaving.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cdn::stable_hash;
use crate::error::{Error, Result};

/// Final avalanche so consecutive user ids spread over the unit interval.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn validate_ratios(ratios: &[f64]) -> Result<()> {
    if ratios.is_empty() || ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::param("arm ratios must be nonnegative and sum to 1"));
    }
    Ok(())
}

/// Deterministic arm for `(user, salt)`; independent of call order.
pub fn ab_assign(user: u64, salt: &str, ratios: &[f64]) -> Result<usize> {
    validate_ratios(ratios)?;
    let mut key = user.to_le_bytes().to_vec();
    key.extend_from_slice(salt.as_bytes());
    let u = (mix64(stable_hash(&key)) >> 11) as f64 / (1u64 << 53) as f64;
    let mut acc = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        acc += r;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(ratios.iter().rposition(|r| *r > 0.0).unwrap_or(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Treatment,
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterleaveMode {
    Alternate,
    Random,
}

/// Tags each feed position with a strategy. Alternate mode starts with
/// treatment on even sessions and control on odd ones, so single-item feeds
/// balance across sessions.
pub fn interleave(n_items: usize, mode: InterleaveMode, seed: u64, session: u64) -> Vec<Strategy> {
    match mode {
        InterleaveMode::Alternate => (0..n_items)
            .map(|i| {
                if (i as u64 + session).is_multiple_of(2) {
                    Strategy::Treatment
                } else {
                    Strategy::Control
                }
            })
            .collect(),
        InterleaveMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(session)));
            (0..n_items)
                .map(|_| if rng.random_bool(0.5) { Strategy::Treatment } else { Strategy::Control })
                .collect()
        }
    }
}
