use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Baseline economics used to turn experience changes into profit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomyParams<T> {
    /// Baseline user lifetime, days.
    pub lt_base: T,
    /// Baseline revenue per user-day.
    pub arpu_base: T,
    /// ROI launch threshold.
    pub roi_gamma: T,
    /// Per-period discount rate used by [`discounted_value`].
    pub discount_rate: T,
}

impl<T: Scalar> EconomyParams<T> {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.lt_base, self.arpu_base, self.roi_gamma, self.discount_rate]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("economy parameters must be finite"));
        }
        if self.lt_base <= T::zero() {
            return Err(Error::param("lt_base must be > 0"));
        }
        if self.arpu_base < T::zero() {
            return Err(Error::param("arpu_base must be >= 0"));
        }
        if self.roi_gamma < T::zero() {
            return Err(Error::param("roi_gamma must be >= 0"));
        }
        if self.discount_rate < T::zero() || self.discount_rate >= T::one() {
            return Err(Error::param("discount_rate must be in [0, 1)"));
        }
        Ok(())
    }

    /// Baseline lifetime value.
    pub fn ltv(&self) -> T {
        self.lt_base * self.arpu_base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitBreakdown<T> {
    pub delta_lt: T,
    pub delta_arpu: T,
    pub delta_cost: T,
    pub profit: T,
    /// `profit / delta_cost`, only defined for a positive cost change.
    pub roi: Option<T>,
    pub passes_gate: bool,
}

/// Linearized profit of a change: `LT·ΔARPU + ΔLT·ARPU − ΔCOST`, with the
/// launch gate `profit > 0` and, when the change costs money, `roi > γ`.
pub fn profit<T: Scalar>(
    delta_lt: T,
    delta_arpu: T,
    delta_cost: T,
    params: &EconomyParams<T>,
) -> ProfitBreakdown<T> {
    let profit = params.lt_base * delta_arpu + delta_lt * params.arpu_base - delta_cost;
    let roi = (delta_cost > T::zero()).then(|| profit / delta_cost);
    let passes_gate = profit > T::zero()
        && match roi {
            None => true,
            Some(r) => r > params.roi_gamma,
        };
    ProfitBreakdown {
        delta_lt,
        delta_arpu,
        delta_cost,
        profit,
        roi,
        passes_gate,
    }
}

/// Present value `Σ_t D_t / (1+r)^t` with `t` starting at 1.
pub fn discounted_value<T: Scalar>(cashflows: &[T], r: T) -> Result<T> {
    if !r.is_finite() || r < T::zero() || r >= T::one() {
        return Err(Error::param(format!("discount rate {:?} outside [0, 1)", r)));
    }
    let factor = T::one() + r;
    let mut denom = T::one();
    let mut total = T::zero();
    for d in cashflows {
        denom = denom * factor;
        total = total + *d / denom;
    }
    Ok(total)
}
