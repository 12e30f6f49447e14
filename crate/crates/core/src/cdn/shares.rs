use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::schedule::{RequestState, ShareConfig, ShareScheduler};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VendorOffer {
    pub id: String,
    /// Currency per Mbps carried.
    pub unit_price: f64,
    pub speed_mean: f64,
    pub speed_std: f64,
    pub capacity_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub vendors: Vec<VendorOffer>,
    /// Total demand `B_all` in Mbps.
    pub demand_mbps: f64,
    /// Minimum number of vendors carrying traffic.
    pub min_vendors: usize,
    pub grid_step: f64,
    /// Lifetime-value equivalent of one unit of mean delivered speed.
    pub value_per_speed: f64,
    /// Requests in the per-candidate scheduling simulation.
    pub sim_requests: usize,
    pub seed: u64,
    pub share: ShareConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareEvaluation {
    pub shares: Vec<f64>,
    pub mean_speed: f64,
    pub cost: f64,
    pub utility: f64,
}

impl AllocationProblem {
    fn validate(&self) -> Result<usize> {
        let n = self.vendors.len();
        if n == 0 {
            return Err(Error::param("no vendors"));
        }
        if self.min_vendors == 0 || self.min_vendors > n {
            return Err(Error::param(format!(
                "min_vendors {} must be in 1..={n}",
                self.min_vendors
            )));
        }
        let units = (1.0 / self.grid_step).round();
        if !(self.grid_step > 0.0) || (units * self.grid_step - 1.0).abs() > 1e-9 {
            return Err(Error::param("grid step must divide 1"));
        }
        if !(self.demand_mbps >= 0.0) || self.sim_requests == 0 {
            return Err(Error::param("demand must be >= 0 and the simulation nonempty"));
        }
        Ok(units as usize)
    }

    /// Utility of a share vector: value of the simulated mean delivered speed
    /// minus `Σ p_j · b_j · B_all`. The request stream and the per-request
    /// speed shocks are the same for every candidate.
    pub fn evaluate(&self, shares: &[f64]) -> Result<ShareEvaluation> {
        let mut sched = ShareScheduler::new(shares.to_vec(), self.share)?;
        let predicted: Vec<(f64, f64)> = self
            .vendors
            .iter()
            .map(|v| (v.speed_mean, v.speed_std))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut speed_sum = 0.0;
        for id in 0..self.sim_requests {
            let req = RequestState {
                id: id as u64,
                bytes: rng.random_range(2e5..2e6),
                buffer_s: rng.random_range(0.0..8.0),
                rebuffer_sens: rng.random_range(0.0..2.0),
                region: 0,
                hour: 0,
            };
            let z: f64 = rng.sample(StandardNormal);
            let j = sched.schedule_with(&req, &predicted)?;
            let v = &self.vendors[j];
            speed_sum += (v.speed_mean + v.speed_std * z).max(0.0);
        }
        let mean_speed = speed_sum / self.sim_requests as f64;
        let cost: f64 = self
            .vendors
            .iter()
            .zip(shares)
            .map(|(v, b)| v.unit_price * b * self.demand_mbps)
            .sum();
        Ok(ShareEvaluation {
            shares: shares.to_vec(),
            mean_speed,
            cost,
            utility: self.value_per_speed * mean_speed - cost,
        })
    }
}

/// Visits every share vector on the simplex grid in lexicographic order.
pub fn simplex_grid(n: usize, units: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, n: usize, visit: &mut dyn FnMut(&[usize])) {
        if k == n - 1 {
            cur.push(left);
            visit(cur);
            cur.pop();
            return;
        }
        for u in 0..=left {
            cur.push(u);
            rec(k + 1, left - u, cur, n, visit);
            cur.pop();
        }
    }
    if n == 0 {
        return;
    }
    rec(0, units, &mut Vec::with_capacity(n), n, &mut visit);
}

/// Grid search for the utility-maximizing share vector with at least
/// `min_vendors` positive shares and every vendor within capacity. Ties
/// within 1e-9 go to the lexicographically smallest vector.
pub fn allocate_shares(problem: &AllocationProblem) -> Result<ShareEvaluation> {
    let units = problem.validate()?;
    let total_cap: f64 = problem.vendors.iter().map(|v| v.capacity_mbps).sum();
    if total_cap < problem.demand_mbps {
        return Err(Error::Infeasible(format!(
            "total capacity {total_cap} Mbps below demand {} Mbps",
            problem.demand_mbps
        )));
    }
    let mut best: Option<ShareEvaluation> = None;
    let mut failure: Option<Error> = None;
    simplex_grid(problem.vendors.len(), units, |u| {
        if failure.is_some() || u.iter().filter(|x| **x > 0).count() < problem.min_vendors {
            return;
        }
        let shares: Vec<f64> = u.iter().map(|x| *x as f64 / units as f64).collect();
        let fits = problem
            .vendors
            .iter()
            .zip(&shares)
            .all(|(v, b)| b * problem.demand_mbps <= v.capacity_mbps + 1e-9);
        if !fits {
            return;
        }
        match problem.evaluate(&shares) {
            // lexicographic visiting order means a strictly better score is
            // the only reason to replace the incumbent
            Ok(e) => {
                if best.as_ref().is_none_or(|b| e.utility > b.utility + 1e-9) {
                    best = Some(e);
                }
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    best.ok_or_else(|| {
        Error::Infeasible("no grid share vector satisfies capacity and vendor-count limits".into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offer(id: &str, price: f64, speed: f64) -> VendorOffer {
        VendorOffer {
            id: id.into(),
            unit_price: price,
            speed_mean: speed,
            speed_std: 0.5,
            capacity_mbps: 1000.0,
        }
    }

    fn problem(vendors: Vec<VendorOffer>, eta: usize, step: f64) -> AllocationProblem {
        AllocationProblem {
            vendors,
            demand_mbps: 500.0,
            min_vendors: eta,
            grid_step: step,
            value_per_speed: 100.0,
            sim_requests: 2000,
            seed: 11,
            share: ShareConfig::default(),
        }
    }

    #[test]
    fn grid_is_lexicographic_and_complete() {
        let mut seen = Vec::new();
        simplex_grid(3, 2, |u| seen.push(u.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 0, 2]);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn identical_vendors_split_evenly() {
        let p = problem(vec![offer("a", 1.0, 5.0), offer("b", 1.0, 5.0)], 2, 0.5);
        assert_eq!(allocate_shares(&p).unwrap().shares, vec![0.5, 0.5]);
        let p = problem(vec![offer("a", 1.0, 5.0), offer("b", 1.0, 5.0)], 1, 0.5);
        assert_eq!(allocate_shares(&p).unwrap().shares, vec![0.0, 1.0]);
    }

    #[test]
    fn free_fastest_vendor_takes_all() {
        let p = problem(
            vec![offer("a", 1.0, 4.0), offer("free", 0.0, 8.0), offer("c", 0.5, 5.0)],
            1,
            0.25,
        );
        assert_eq!(allocate_shares(&p).unwrap().shares, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn infeasible_capacity() {
        let mut p = problem(vec![offer("a", 1.0, 5.0)], 1, 0.5);
        p.demand_mbps = 5000.0;
        assert!(matches!(allocate_shares(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn bad_grid_step() {
        let p = problem(vec![offer("a", 1.0, 5.0), offer("b", 1.0, 5.0)], 1, 0.3);
        assert!(allocate_shares(&p).is_err());
    }
}
