use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponentially weighted mean/variance of download speed keyed by
/// (region, hour).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityStats {
    pub half_life_s: f64,
    /// Used for keys with no observations yet.
    pub prior_mean: f64,
    pub prior_std: f64,
    #[serde(with = "keyed_stats")]
    cells: BTreeMap<(u16, u8), EwCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct EwCell {
    mean: f64,
    var: f64,
    last_t: f64,
}

mod keyed_stats {
    use super::EwCell;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Row {
        region: u16,
        hour: u8,
        #[serde(flatten)]
        cell: EwCell,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<(u16, u8), EwCell>, s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|(&(region, hour), &cell)| Row { region, hour, cell })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(u16, u8), EwCell>, D::Error> {
        Ok(Vec::<Row>::deserialize(d)?
            .into_iter()
            .map(|r| ((r.region, r.hour), r.cell))
            .collect())
    }
}

impl QualityStats {
    pub fn new(prior_mean: f64, prior_std: f64) -> Self {
        Self {
            half_life_s: 3600.0,
            prior_mean,
            prior_std,
            cells: BTreeMap::new(),
        }
    }

    /// Records a measured speed at time `t_s`; older evidence decays with the
    /// configured half-life.
    pub fn observe(&mut self, region: u16, hour: u8, t_s: f64, speed: f64) {
        let half_life = self.half_life_s;
        let cell = self.cells.entry((region, hour)).or_insert(EwCell {
            mean: speed,
            var: 0.0,
            last_t: t_s,
        });
        let age = (t_s - cell.last_t).max(0.0);
        // weight kept by the old estimate: half after one half-life, and at
        // least a small floor so back-to-back samples still move the mean
        let keep = (0.5f64).powf(age / half_life).min(0.95);
        let w = 1.0 - keep;
        let diff = speed - cell.mean;
        cell.mean += w * diff;
        cell.var = keep * (cell.var + w * diff * diff);
        cell.last_t = t_s;
    }

    /// Predicted (mean, std) speed.
    pub fn predict(&self, region: u16, hour: u8) -> (f64, f64) {
        match self.cells.get(&(region, hour)) {
            Some(c) => (c.mean, c.var.max(0.0).sqrt()),
            None => (self.prior_mean, self.prior_std),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VendorState {
    pub id: String,
    /// Per Mbps of 95-peak, or per GB in traffic billing.
    pub unit_price: f64,
    pub target_share: f64,
    pub capacity_mbps: f64,
    pub quality: QualityStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestState {
    pub id: u64,
    pub bytes: f64,
    /// Seconds of media the client still has buffered.
    pub buffer_s: f64,
    /// The user's rebuffer sensitivity weight.
    pub rebuffer_sens: f64,
    pub region: u16,
    pub hour: u8,
}

impl RequestState {
    /// Low buffer means high urgency, in (0, 1].
    pub fn urgency(&self) -> f64 {
        1.0 / (1.0 + self.buffer_s.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShareConfig {
    /// Allowed excess over target as a fraction of the tracking horizon;
    /// `>= 1` disables share tracking.
    pub slack: f64,
    /// Horizon in requests over which the slack is measured.
    pub horizon_requests: f64,
    /// Penalty on speed variability for sensitive, urgent requests.
    pub risk_aversion: f64,
}

impl Default for ShareConfig {
    fn default() -> Self {
        Self {
            slack: 0.02,
            horizon_requests: 1000.0,
            risk_aversion: 1.0,
        }
    }
}

/// Sequential per-request vendor choice that tracks target byte shares.
///
/// A vendor is eligible while its served bytes stay within
/// `slack · min(total, horizon)` of its target, so the absolute share error
/// shrinks as traffic accumulates instead of settling at the slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareScheduler {
    pub config: ShareConfig,
    targets: Vec<f64>,
    served: Vec<f64>,
    total: f64,
    requests: u64,
}

impl ShareScheduler {
    pub fn new(targets: Vec<f64>, config: ShareConfig) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::param("no vendors"));
        }
        if targets.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::param("target shares must lie in [0,1]"));
        }
        let sum: f64 = targets.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("target shares sum to {sum}, not 1")));
        }
        if !(config.slack >= 0.0) || !(config.horizon_requests > 0.0) || !(config.risk_aversion >= 0.0) {
            return Err(Error::param("invalid share config"));
        }
        let n = targets.len();
        Ok(Self {
            config,
            targets,
            served: vec![0.0; n],
            total: 0.0,
            requests: 0,
        })
    }

    pub fn for_vendors(vendors: &[VendorState], config: ShareConfig) -> Result<Self> {
        Self::new(vendors.iter().map(|v| v.target_share).collect(), config)
    }

    pub fn realized_shares(&self) -> Vec<f64> {
        if self.total == 0.0 {
            return vec![0.0; self.served.len()];
        }
        self.served.iter().map(|s| s / self.total).collect()
    }

    pub fn served_bytes(&self) -> &[f64] {
        &self.served
    }

    fn excess_after(&self, j: usize, bytes: f64) -> f64 {
        self.served[j] + bytes - self.targets[j] * (self.total + bytes)
    }

    /// Picks a vendor for `req` given predicted (mean, std) speed per vendor
    /// and records the assignment.
    pub fn schedule_with(&mut self, req: &RequestState, predicted: &[(f64, f64)]) -> Result<usize> {
        if predicted.len() != self.targets.len() {
            return Err(Error::input("one prediction per vendor required"));
        }
        if !(req.bytes > 0.0) {
            return Err(Error::input("request bytes must be > 0"));
        }
        let n = self.targets.len();
        let tracking = self.config.slack < 1.0;
        let mean_bytes = if self.requests == 0 {
            req.bytes
        } else {
            self.total / self.requests as f64
        };
        let allowance = self.config.slack
            * (self.total + req.bytes).min(self.config.horizon_requests * mean_bytes);
        let risk = self.config.risk_aversion * req.rebuffer_sens * req.urgency();
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..n {
            if self.targets[j] == 0.0 && tracking {
                continue;
            }
            let excess = self.excess_after(j, req.bytes);
            if tracking && excess > allowance {
                continue;
            }
            let (mean, std) = predicted[j];
            let value = mean - risk * std;
            let better = match best {
                None => true,
                Some((_, bv, be)) => value > bv || (value == bv && excess < be),
            };
            if better {
                best = Some((j, value, excess));
            }
        }
        let pick = match best {
            Some((j, _, _)) => j,
            // everyone is over: most under target wins
            None => (0..n)
                .min_by(|&a, &b| {
                    self.excess_after(a, req.bytes)
                        .total_cmp(&self.excess_after(b, req.bytes))
                })
                .expect("nonempty"),
        };
        self.served[pick] += req.bytes;
        self.total += req.bytes;
        self.requests += 1;
        Ok(pick)
    }

    /// Uses each vendor's rolling quality stats for the request's key.
    pub fn schedule_request(&mut self, req: &RequestState, vendors: &[VendorState]) -> Result<usize> {
        let predicted: Vec<(f64, f64)> = vendors
            .iter()
            .map(|v| v.quality.predict(req.region, req.hour))
            .collect();
        self.schedule_with(req, &predicted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vendor(id: &str, share: f64, speed: f64, std: f64) -> VendorState {
        VendorState {
            id: id.into(),
            unit_price: 1.0,
            target_share: share,
            capacity_mbps: 1e6,
            quality: QualityStats::new(speed, std),
        }
    }

    fn req(rng: &mut ChaCha8Rng, id: u64) -> RequestState {
        RequestState {
            id,
            bytes: rng.random_range(1e5..3e6),
            buffer_s: rng.random_range(0.0..10.0),
            rebuffer_sens: rng.random_range(0.0..3.0),
            region: rng.random_range(0..4),
            hour: rng.random_range(0..24),
        }
    }

    #[test]
    fn single_vendor_takes_everything() {
        let vs = vec![vendor("a", 1.0, 5.0, 1.0)];
        let mut s = ShareScheduler::for_vendors(&vs, ShareConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..100 {
            assert_eq!(s.schedule_request(&req(&mut rng, i), &vs).unwrap(), 0);
        }
        assert_eq!(s.realized_shares(), vec![1.0]);
    }

    #[test]
    fn equal_vendors_split_evenly() {
        let vs = vec![vendor("a", 0.5, 5.0, 1.0), vendor("b", 0.5, 5.0, 1.0)];
        let mut s = ShareScheduler::for_vendors(&vs, ShareConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..100_000 {
            s.schedule_request(&req(&mut rng, i), &vs).unwrap();
        }
        for share in s.realized_shares() {
            assert!((share - 0.5).abs() <= 0.01);
        }
    }

    #[test]
    fn unconstrained_prefers_faster() {
        let vs = vec![vendor("slow", 0.5, 3.0, 0.5), vendor("fast", 0.5, 6.0, 0.5)];
        let cfg = ShareConfig { slack: 1.0, ..Default::default() };
        let mut s = ShareScheduler::for_vendors(&vs, cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..1000 {
            assert_eq!(s.schedule_request(&req(&mut rng, i), &vs).unwrap(), 1);
        }
    }

    #[test]
    fn sensitive_urgent_requests_avoid_jittery_vendor() {
        let vs = vec![vendor("steady", 0.5, 5.0, 0.2), vendor("jittery", 0.5, 5.5, 3.0)];
        let cfg = ShareConfig { slack: 1.0, ..Default::default() };
        let mut s = ShareScheduler::for_vendors(&vs, cfg).unwrap();
        let calm = RequestState { id: 0, bytes: 1e6, buffer_s: 30.0, rebuffer_sens: 0.1, region: 0, hour: 0 };
        let urgent = RequestState { buffer_s: 0.0, rebuffer_sens: 2.0, ..calm };
        assert_eq!(s.schedule_request(&calm, &vs).unwrap(), 1);
        assert_eq!(s.schedule_request(&urgent, &vs).unwrap(), 0);
    }

    #[test]
    fn ew_stats_track_level_shift() {
        let mut q = QualityStats::new(1.0, 1.0);
        for i in 0..50 {
            q.observe(1, 20, i as f64 * 60.0, 4.0);
        }
        assert!((q.predict(1, 20).0 - 4.0).abs() < 1e-9);
        for i in 50..400 {
            q.observe(1, 20, i as f64 * 60.0, 8.0);
        }
        assert!((q.predict(1, 20).0 - 8.0).abs() < 0.01);
        assert_eq!(q.predict(2, 20), (1.0, 1.0));
    }

    #[test]
    fn rejects_bad_targets() {
        assert!(ShareScheduler::new(vec![0.6, 0.6], ShareConfig::default()).is_err());
        assert!(ShareScheduler::new(vec![], ShareConfig::default()).is_err());
    }
}
