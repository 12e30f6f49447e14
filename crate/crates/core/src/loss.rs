//! Regression losses shared by decider training and the video value model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind<T> {
    /// `½ (y − ŷ)²`
    Squared,
    /// Quadratic inside `|y − ŷ| < δ`, linear outside.
    Huber { delta: T },
    /// `−y·log p − log(1 − p)` with `p = σ(ŷ)`; the prediction `ŷ` is a logit
    /// and `exp(ŷ)` estimates `y` at the optimum.
    WeightedLog,
}

impl<T: Scalar> LossKind<T> {
    pub fn validate(&self) -> Result<()> {
        if let LossKind::Huber { delta } = self {
            if !(*delta > T::zero()) {
                return Err(Error::param("huber delta must be > 0"));
            }
        }
        Ok(())
    }

    pub fn value(&self, y: T, yhat: T) -> T {
        let half = T::lit(0.5);
        match *self {
            LossKind::Squared => half * (y - yhat) * (y - yhat),
            LossKind::Huber { delta } => {
                let r = (y - yhat).abs();
                if r < delta {
                    half * r * r
                } else {
                    delta * (r - half * delta)
                }
            }
            LossKind::WeightedLog => {
                // −y·log σ(z) − log(1 − σ(z)) = y·softplus(−z) + softplus(z)
                y * softplus(-yhat) + softplus(yhat)
            }
        }
    }

    /// Derivative of the loss with respect to the prediction `ŷ`.
    pub fn grad(&self, y: T, yhat: T) -> T {
        match *self {
            LossKind::Squared => yhat - y,
            LossKind::Huber { delta } => {
                let r = y - yhat;
                if r.abs() < delta {
                    -r
                } else {
                    -delta * r.signum()
                }
            }
            LossKind::WeightedLog => {
                let p = sigmoid(yhat);
                p * (T::one() + y) - y
            }
        }
    }

    /// Maps a raw model output onto the target scale.
    pub fn link(&self, yhat: T) -> T {
        match self {
            LossKind::WeightedLog => yhat.exp(),
            _ => yhat,
        }
    }
}

pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Scalar>(z: T) -> T {
    // log(1 + e^z), stable for large |z|
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn huber_matches_mse_inside_and_clips_outside() {
        let delta = 1.5_f64;
        let h = LossKind::Huber { delta };
        let m = LossKind::<f64>::Squared;
        let y = 3.0;
        // residual y − ŷ = δ/2
        let yhat = y - delta / 2.0;
        assert_eq!(h.grad(y, yhat), m.grad(y, yhat));
        // residual ±2δ
        assert_eq!(h.grad(y, y - 2.0 * delta), -delta);
        assert_eq!(h.grad(y, y + 2.0 * delta), delta);
    }

    #[test]
    fn weighted_log_with_zero_target() {
        let z = 0.7_f64;
        let p = sigmoid(z);
        let l = LossKind::WeightedLog.value(0.0, z);
        assert!((l - (-(1.0 - p).ln())).abs() < 1e-12);
    }

    #[test]
    fn weighted_log_optimum_at_log_target() {
        let y = 4.0_f64;
        let g = LossKind::WeightedLog.grad(y, y.ln());
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn huber_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 100 {
            let delta: f64 = rng.random_range(0.1..3.0);
            let y: f64 = rng.random_range(-10.0..10.0);
            let yhat: f64 = rng.random_range(-10.0..10.0);
            if ((y - yhat).abs() - delta).abs() < 1e-3 {
                continue;
            }
            let loss = LossKind::Huber { delta };
            let fd = (loss.value(y, yhat + h) - loss.value(y, yhat - h)) / (2.0 * h);
            assert!((fd - loss.grad(y, yhat)).abs() < 1e-6, "{fd} vs {}", loss.grad(y, yhat));
            checked += 1;
        }
    }

    #[test]
    fn invalid_huber_delta() {
        assert!(LossKind::Huber { delta: 0.0_f64 }.validate().is_err());
        assert!(LossKind::<f64>::Squared.validate().is_ok());
    }
}
