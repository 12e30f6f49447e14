//! Synthetic users: device scores, sensitivity portraits and network classes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QopMetric, SensitivityWeights};
use crate::playback::{Context, NetworkClass, NetworkTrace, UserState};

/// A group of users sharing one QoP sensitivity profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitClass {
    pub name: String,
    pub share: f64,
    pub sensitivities: SensitivityWeights,
}

/// Throughput process of one network class: lognormal step-to-step
/// variation around `mean_kbps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub class: NetworkClass,
    pub share: f64,
    pub mean_kbps: f64,
    pub sigma: f64,
    pub step_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpec {
    pub users: usize,
    /// Uniform range of device scores.
    pub device_score: (f64, f64),
    pub portraits: Vec<PortraitClass>,
    pub networks: Vec<NetworkProfile>,
    /// Portrait map key holding the class index.
    pub portrait_key: String,
}

fn sens(rebuffer: f64, quality: f64) -> SensitivityWeights {
    SensitivityWeights::uniform()
        .with(QopMetric::RebufferRatio, rebuffer)
        .with(QopMetric::RebufferDurPerVvMs, rebuffer)
        .with(QopMetric::VideoQuality, quality)
}

impl Default for PopulationSpec {
    /// Two opposed clusters: users who mostly mind stalls and users who
    /// mostly mind picture quality.
    fn default() -> Self {
        let net = |class, share, mean_kbps| NetworkProfile { class, share, mean_kbps, sigma: 0.35, step_ms: 1000 };
        Self {
            users: 10_000,
            device_score: (0.4, 1.0),
            portraits: vec![
                PortraitClass { name: "rebuffer_sensitive".into(), share: 0.5, sensitivities: sens(4.0, 0.25) },
                PortraitClass { name: "quality_sensitive".into(), share: 0.5, sensitivities: sens(0.25, 4.0) },
            ],
            networks: vec![
                net(NetworkClass::Poor, 0.3, 1200.0),
                net(NetworkClass::Fair, 0.4, 2600.0),
                net(NetworkClass::Good, 0.3, 6000.0),
            ],
            portrait_key: "uplift".into(),
        }
    }
}

fn check_mixture(shares: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let v: Vec<f64> = shares.collect();
    if v.is_empty() || v.iter().any(|s| !(*s >= 0.0)) || (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::param(format!("{what} shares must be >= 0 and sum to 1")));
    }
    Ok(())
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.device_score;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::param("device score range must lie in [0,1]"));
        }
        check_mixture(self.portraits.iter().map(|p| p.share), "portrait")?;
        check_mixture(self.networks.iter().map(|n| n.share), "network")?;
        for p in &self.portraits {
            p.sensitivities.validate()?;
        }
        for n in &self.networks {
            if !(n.mean_kbps > 0.0) || !(n.sigma >= 0.0) || n.step_ms == 0 {
                return Err(Error::param("network profiles need mean > 0, sigma >= 0, step > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub users: Vec<UserState>,
    /// Index into the spec's network profiles, per user.
    pub network: Vec<usize>,
}

impl Population {
    /// Share of users in each portrait class.
    pub fn portrait_shares(&self, spec: &PopulationSpec) -> Vec<f64> {
        let mut n = vec![0usize; spec.portraits.len()];
        for u in &self.users {
            n[u.portrait(&spec.portrait_key) as usize] += 1;
        }
        n.iter().map(|c| *c as f64 / self.users.len().max(1) as f64).collect()
    }
}

fn picker(shares: impl Iterator<Item = f64>) -> Result<WeightedAliasIndex<f64>> {
    WeightedAliasIndex::new(shares.collect()).map_err(|e| Error::param(e.to_string()))
}

pub fn generate_population(spec: &PopulationSpec, seed: u64) -> Result<Population> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let portrait = picker(spec.portraits.iter().map(|p| p.share))?;
    let network = picker(spec.networks.iter().map(|n| n.share))?;
    let (lo, hi) = spec.device_score;
    let mut users = Vec::with_capacity(spec.users);
    let mut nets = Vec::with_capacity(spec.users);
    for id in 0..spec.users as u64 {
        let p = portrait.sample(&mut rng);
        let n = network.sample(&mut rng);
        let mut u = UserState::new(id);
        u.device_score = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        u.portraits.insert(spec.portrait_key.clone(), p as u32);
        u.qop_sens = spec.portraits[p].sensitivities.clone();
        u.network_trace_id = format!("{}-{id}", spec.networks[n].class.name());
        u.context = Context { network: spec.networks[n].class, ..Context::default() };
        users.push(u);
        nets.push(n);
    }
    Ok(Population { users, network: nets })
}

/// Seeded throughput trace of `duration_ms` for one profile.
pub fn generate_network_trace(
    profile: &NetworkProfile,
    id: impl Into<String>,
    duration_ms: u64,
    seed: u64,
) -> Result<NetworkTrace> {
    let steps = duration_ms.div_ceil(profile.step_ms).max(1) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kbps: Vec<f64> = if profile.sigma == 0.0 {
        vec![profile.mean_kbps; steps]
    } else {
        let d = LogNormal::new(-0.5 * profile.sigma * profile.sigma, profile.sigma)
            .map_err(|e| Error::param(e.to_string()))?;
        (0..steps).map(|_| profile.mean_kbps * d.sample(&mut rng)).collect()
    };
    NetworkTrace::from_steps(id, profile.step_ms, &kbps)
}

/// Trace for `user`, seeded by the run seed and the user id.
pub fn user_trace(pop: &Population, spec: &PopulationSpec, user: usize, duration_ms: u64, seed: u64) -> Result<NetworkTrace> {
    let u = pop.users.get(user).ok_or_else(|| Error::input(format!("no user {user}")))?;
    let profile = &spec.networks[pop.network[user]];
    let s = seed ^ u.id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    generate_network_trace(profile, u.network_trace_id.clone(), duration_ms, s)
}
