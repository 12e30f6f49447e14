use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fixed penalty weights of the classic QoE objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeWeights<T> {
    pub rebuffer: T,
    pub switch: T,
    pub cost: T,
}

impl<T: Scalar> QoeWeights<T> {
    pub fn validate(&self) -> Result<()> {
        if self.rebuffer < T::zero() || self.switch < T::zero() || self.cost < T::zero() {
            return Err(Error::param("qoe weights must be >= 0"));
        }
        Ok(())
    }
}

/// `quality − α·block_dur − β·quality_switch − γ·cost`.
pub fn qoe<T: Scalar>(quality: T, block_dur: T, quality_switch: T, cost: T, w: &QoeWeights<T>) -> T {
    quality - w.rebuffer * block_dur - w.switch * quality_switch - w.cost * cost
}
