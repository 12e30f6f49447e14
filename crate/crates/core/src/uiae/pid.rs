//! PID adjustment of the transcoding quota and the plant model it is tuned on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adjusts the quota budget toward a target utilization.
///
/// Each step computes `u = kp·e + ki·∫e + kd·de/dt` on `e = target − measured`
/// and moves the budget by `scale·u`, clamped to `[0, max_budget]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotaController<T> {
    pub kp: T,
    pub ki: T,
    pub kd: T,
    pub target: T,
    /// Budget units per unit of controller output.
    pub scale: T,
    pub max_budget: T,
    pub integral: T,
    pub last_error: Option<T>,
}

impl<T: Scalar> QuotaController<T> {
    pub fn new(kp: T, ki: T, kd: T, target: T, scale: T, max_budget: T) -> Result<Self> {
        let c = Self { kp, ki, kd, target, scale, max_budget, integral: T::zero(), last_error: None };
        c.validate()?;
        Ok(c)
    }

    /// Default gains, tuned on [`PlantModel::shipped`].
    pub fn shipped(target: T, scale: T, max_budget: T) -> Self {
        Self::new(T::lit(0.12), T::lit(0.004), T::lit(0.02), target, scale, max_budget)
            .expect("shipped gains are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if [self.kp, self.ki, self.kd].iter().any(|g| !(*g >= T::zero())) {
            return Err(Error::param("PID gains must be >= 0"));
        }
        if !(self.max_budget > T::zero()) || !(self.scale > T::zero()) {
            return Err(Error::param("scale and max budget must be > 0"));
        }
        Ok(())
    }

    pub fn reset(&mut self) {
        self.integral = T::zero();
        self.last_error = None;
    }

    /// Returns the next budget.
    pub fn step(&mut self, budget: T, measured: T, dt: T) -> Result<T> {
        if !(dt > T::zero()) {
            return Err(Error::param("dt must be > 0"));
        }
        let e = self.target - measured;
        self.integral = self.integral + e * dt;
        let d = self.last_error.map_or(T::zero(), |prev| (e - prev) / dt);
        self.last_error = Some(e);
        let u = self.kp * e + self.ki * self.integral + self.kd * d;
        Ok((budget + self.scale * u).max(T::zero()).min(self.max_budget))
    }
}

/// First-order model of transcoding cluster utilization:
/// `util' = util + lag·((background + cores_per_quota·budget)/cores − util)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantModel<T> {
    pub cores: T,
    pub cores_per_quota: T,
    pub lag: T,
    pub background: T,
}

impl<T: Scalar> PlantModel<T> {
    pub fn shipped() -> Self {
        Self { cores: T::lit(100.0), cores_per_quota: T::lit(1.0), lag: T::lit(0.5), background: T::lit(20.0) }
    }

    pub fn next(&self, util: T, budget: T) -> T {
        let load = (self.background + self.cores_per_quota * budget) / self.cores;
        util + self.lag * (load - util)
    }

    /// Budget units that move steady-state utilization by 1.
    pub fn budget_per_util(&self) -> T {
        self.cores / self.cores_per_quota
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopRun<T> {
    pub utilization: Vec<T>,
    pub budget: Vec<T>,
    /// Steps after the disturbance until utilization stays within the band.
    pub settle_steps: Option<usize>,
}

/// Runs the loop from steady state, raises the background load by `step`
/// at `disturb_at`, and reports how long the loop takes to re-enter and stay
/// within `band·target`.
pub fn simulate_step_response<T: Scalar>(
    controller: &QuotaController<T>,
    plant: &PlantModel<T>,
    disturb_at: usize,
    step: T,
    steps: usize,
    band: T,
) -> Result<ClosedLoopRun<T>> {
    let mut c = *controller;
    c.reset();
    let mut p = *plant;
    let mut budget = ((c.target * p.cores - p.background) / p.cores_per_quota).max(T::zero()).min(c.max_budget);
    let mut util = c.target;
    let mut utilization = Vec::with_capacity(steps);
    let mut budgets = Vec::with_capacity(steps);
    for k in 0..steps {
        if k == disturb_at {
            p.background = p.background + step;
        }
        util = p.next(util, budget);
        budget = c.step(budget, util, T::one())?;
        utilization.push(util);
        budgets.push(budget);
    }
    let tol = band * c.target.abs();
    let last_out = utilization
        .iter()
        .enumerate()
        .skip(disturb_at)
        .filter(|(_, u)| (**u - c.target).abs() > tol)
        .map(|(k, _)| k)
        .last();
    let settle_steps = match last_out {
        None => Some(0),
        Some(k) if k + 1 < steps => Some(k + 1 - disturb_at),
        Some(_) => None,
    };
    Ok(ClosedLoopRun { utilization, budget: budgets, settle_steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> QuotaController<f64> {
        let p = PlantModel::<f64>::shipped();
        QuotaController::shipped(0.8, p.budget_per_util(), 200.0)
    }

    #[test]
    fn zero_error_keeps_budget() {
        let mut c = ctl();
        assert_eq!(c.step(50.0, 0.8, 1.0).unwrap(), 50.0);
    }

    #[test]
    fn proportional_only() {
        let mut c = QuotaController::<f64>::new(1.0, 0.0, 0.0, 0.5, 100.0, 1000.0).unwrap();
        assert!((c.step(20.0, 0.4, 1.0).unwrap() - 30.0).abs() < 1e-12);
        assert!((c.step(30.0, 0.4, 1.0).unwrap() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn output_is_clamped() {
        let mut c = QuotaController::new(10.0, 0.0, 0.0, 1.0, 100.0, 50.0).unwrap();
        assert_eq!(c.step(40.0, 0.0, 1.0).unwrap(), 50.0);
        assert_eq!(c.step(40.0, 5.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_dt_and_gains() {
        assert!(ctl().step(1.0, 0.5, 0.0).is_err());
        assert!(QuotaController::new(-1.0, 0.0, 0.0, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn step_disturbance_settles_with_default_gains() {
        let c = ctl();
        let p = PlantModel::shipped();
        for step in [20.0, -15.0, 35.0] {
            let run = simulate_step_response(&c, &p, 10, step, 200, 0.05).unwrap();
            let s = run.settle_steps.expect("settles");
            assert!(s <= 50, "step {step}: settled after {s}");
        }
    }

    #[test]
    fn runs_in_f32() {
        let p = PlantModel::<f32>::shipped();
        let c = QuotaController::<f32>::shipped(0.8, p.budget_per_util(), 200.0);
        let run = simulate_step_response(&c, &p, 10, 20.0, 200, 0.05).unwrap();
        assert!(run.settle_steps.unwrap() <= 50);
    }
}
