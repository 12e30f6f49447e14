use rand::Rng;
use rand_distr::{Distribution, LogNormal as LogNormalDist};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Nonnegative random quantity with closed-form moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dist {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    /// `exp(N(mu, sigma²))`
    LogNormal { mu: f64, sigma: f64 },
}

fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

impl Dist {
    pub fn constant(value: f64) -> Self {
        Dist::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Dist::Constant { value } => value >= 0.0 && value.is_finite(),
            Dist::Uniform { lo, hi } => lo >= 0.0 && hi >= lo && hi.is_finite(),
            Dist::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid distribution {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Dist::Constant { value } => value,
            Dist::Uniform { lo, hi } => 0.5 * (lo + hi),
            Dist::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// `E[1/X]`; infinite when `X` can be 0.
    pub fn mean_inverse(&self) -> f64 {
        match *self {
            Dist::Constant { value } => 1.0 / value,
            Dist::Uniform { lo, hi } if hi > lo => {
                if lo <= 0.0 {
                    f64::INFINITY
                } else {
                    (hi / lo).ln() / (hi - lo)
                }
            }
            Dist::Uniform { lo, .. } => 1.0 / lo,
            Dist::LogNormal { mu, sigma } => (-mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// `E[max(0, c − X)]`.
    pub fn expected_shortfall(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        match *self {
            Dist::Constant { value } => (c - value).max(0.0),
            Dist::Uniform { lo, hi } => {
                if c <= lo {
                    0.0
                } else if hi == lo || c >= hi {
                    c - self.mean()
                } else {
                    (c - lo) * (c - lo) / (2.0 * (hi - lo))
                }
            }
            Dist::LogNormal { mu, sigma } => {
                let d = (c.ln() - mu) / sigma;
                c * phi(d) - self.mean() * phi(d - sigma)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Constant { value } => value,
            Dist::Uniform { lo, hi } => {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            }
            Dist::LogNormal { mu, sigma } => {
                LogNormalDist::new(mu, sigma).expect("validated lognormal").sample(rng)
            }
        }
    }
}
