use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::types::{Item, UserState};
use crate::error::{Error, Result};

/// A playtime distribution in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlaytimeDist {
    /// Whole seconds watched until a per-second stop with probability
    /// `stop_prob`, truncated at `max_s` when set (the truncated mass sits at
    /// `max_s`, i.e. a full watch).
    Geometric { stop_prob: f64, max_s: Option<f64> },
    Empirical { samples: Vec<f64> },
    Fixed { seconds: f64 },
}

impl PlaytimeDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            PlaytimeDist::Geometric { stop_prob, max_s } => {
                if !(*stop_prob > 0.0 && *stop_prob <= 1.0) {
                    return Err(Error::param("geometric stop_prob must be in (0,1]"));
                }
                if matches!(max_s, Some(m) if !(*m >= 0.0)) {
                    return Err(Error::param("geometric max_s must be >= 0"));
                }
            }
            PlaytimeDist::Empirical { samples } => {
                if samples.is_empty() || samples.iter().any(|s| !(*s >= 0.0)) {
                    return Err(Error::param("empirical playtime needs nonnegative samples"));
                }
            }
            PlaytimeDist::Fixed { seconds } => {
                if !(*seconds >= 0.0) {
                    return Err(Error::param("fixed playtime must be >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            PlaytimeDist::Geometric { stop_prob: p, max_s } => match max_s {
                None => 1.0 / p,
                Some(d) => {
                    // E[min(G, d)] = Σ_{k=1}^{⌊d⌋} (1-p)^{k-1} + (d - ⌊d⌋)(1-p)^{⌊d⌋}
                    let q = 1.0 - p;
                    let whole = d.floor();
                    let head = if *p >= 1.0 {
                        whole.min(1.0)
                    } else {
                        (1.0 - q.powf(whole)) / p
                    };
                    head + (d - whole) * q.powf(whole)
                }
            },
            PlaytimeDist::Empirical { samples } => {
                samples.iter().sum::<f64>() / samples.len() as f64
            }
            PlaytimeDist::Fixed { seconds } => *seconds,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PlaytimeDist::Geometric { stop_prob, max_s } => {
                let g = if *stop_prob >= 1.0 {
                    1.0
                } else {
                    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
                    1.0 + (u.ln() / (1.0 - stop_prob).ln()).floor()
                };
                match max_s {
                    Some(m) => g.min(*m),
                    None => g,
                }
            }
            PlaytimeDist::Empirical { samples } => samples[rng.random_range(0..samples.len())],
            PlaytimeDist::Fixed { seconds } => *seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationBucket {
    /// Items with `duration_s <= max_duration_s` (and above the previous
    /// bucket's bound) fall here.
    pub max_duration_s: f64,
    pub dist: PlaytimeDist,
}

/// Fuses bucket-, item- and user-level playtime distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaytimeModel {
    pub buckets: Vec<DurationBucket>,
    #[serde(default)]
    pub items: BTreeMap<u64, PlaytimeDist>,
    #[serde(default)]
    pub users: BTreeMap<u64, PlaytimeDist>,
    /// Weights of the bucket, item and user components.
    pub alphas: [f64; 3],
}

impl PlaytimeModel {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.alphas.iter().sum();
        if self.alphas.iter().any(|a| !(*a >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param("playtime alphas must be >= 0 and sum to 1"));
        }
        if self.buckets.is_empty() {
            return Err(Error::param("playtime model needs at least one duration bucket"));
        }
        for w in self.buckets.windows(2) {
            if w[1].max_duration_s <= w[0].max_duration_s {
                return Err(Error::param("duration buckets must be increasing"));
            }
        }
        for d in self
            .buckets
            .iter()
            .map(|b| &b.dist)
            .chain(self.items.values())
            .chain(self.users.values())
        {
            d.validate()?;
        }
        Ok(())
    }

    pub fn bucket_for(&self, duration_s: f64) -> Option<&DurationBucket> {
        self.buckets.iter().find(|b| duration_s <= b.max_duration_s)
    }
}

/// Mixture handle returned by [`estimate_playtime`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaytimeEstimate {
    pub mean_s: f64,
    pub components: Vec<(f64, PlaytimeDist)>,
    /// Item duration; samples never exceed it.
    pub cap_s: f64,
}

impl PlaytimeEstimate {
    /// Draws a playtime from the mixture, capped at the item duration.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = &self.components[self.components.len() - 1].1;
        for (w, d) in &self.components {
            acc += w;
            if u < acc {
                chosen = d;
                break;
            }
        }
        chosen.sample(rng).min(self.cap_s).max(0.0)
    }
}

/// `α1·E[bucket] + α2·E[item] + α3·E[user]`. A missing item or user history
/// hands its weight to the bucket component.
pub fn estimate_playtime(
    user: &UserState,
    item: &Item,
    model: &PlaytimeModel,
) -> Result<PlaytimeEstimate> {
    let bucket = model.bucket_for(item.duration_s).ok_or_else(|| {
        Error::input(format!(
            "item {} duration {} s has no duration bucket",
            item.id, item.duration_s
        ))
    })?;
    let [mut a_bucket, a_item, a_user] = model.alphas;
    let mut components = Vec::with_capacity(3);
    match model.items.get(&item.id) {
        Some(d) if a_item > 0.0 => components.push((a_item, d.clone())),
        Some(_) => {}
        None => a_bucket += a_item,
    }
    match model.users.get(&user.id) {
        Some(d) if a_user > 0.0 => components.push((a_user, d.clone())),
        Some(_) => {}
        None => a_bucket += a_user,
    }
    if a_bucket > 0.0 {
        components.insert(0, (a_bucket, bucket.dist.clone()));
    }
    let mean_s = components.iter().map(|(w, d)| w * d.mean()).sum();
    Ok(PlaytimeEstimate {
        mean_s,
        components,
        cap_s: item.duration_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::playback::types::LadderGroup;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn item(id: u64, duration_s: f64) -> Item {
        Item {
            id,
            duration_s,
            ladders: LadderGroup::from_rungs(&[(1000.0, 70.0)], duration_s).unwrap(),
            popularity_weight: 1.0,
            value_score: 0.0,
        }
    }

    fn model(alphas: [f64; 3]) -> PlaytimeModel {
        let mut m = PlaytimeModel {
            buckets: vec![
                DurationBucket { max_duration_s: 30.0, dist: PlaytimeDist::Fixed { seconds: 9.0 } },
                DurationBucket { max_duration_s: 600.0, dist: PlaytimeDist::Fixed { seconds: 40.0 } },
            ],
            items: BTreeMap::new(),
            users: BTreeMap::new(),
            alphas,
        };
        m.items.insert(1, PlaytimeDist::Fixed { seconds: 12.0 });
        m.users.insert(7, PlaytimeDist::Fixed { seconds: 15.0 });
        m
    }

    #[test]
    fn degenerate_weights_give_bucket_mean() {
        let e = estimate_playtime(&UserState::new(7), &item(1, 20.0), &model([1.0, 0.0, 0.0])).unwrap();
        assert_eq!(e.mean_s, 9.0);
    }

    #[test]
    fn equal_weights_average_components() {
        let third = 1.0 / 3.0;
        let e = estimate_playtime(&UserState::new(7), &item(1, 20.0), &model([third, third, third]))
            .unwrap();
        assert!((e.mean_s - 12.0).abs() < 1e-12);
    }

    #[test]
    fn missing_history_falls_back_to_bucket() {
        let e = estimate_playtime(&UserState::new(99), &item(42, 20.0), &model([0.2, 0.3, 0.5]))
            .unwrap();
        assert_eq!(e.mean_s, 9.0);
        assert_eq!(e.components.len(), 1);
    }

    #[test]
    fn unbucketed_item_errors() {
        assert!(estimate_playtime(&UserState::new(1), &item(1, 900.0), &model([1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn alphas_must_sum_to_one() {
        assert!(model([0.5, 0.2, 0.2]).validate().is_err());
        assert!(model([0.5, 0.3, 0.2]).validate().is_ok());
    }

    #[test]
    fn truncated_geometric_mean_matches_direct_sum() {
        let p = 0.2;
        let d = PlaytimeDist::Geometric { stop_prob: p, max_s: Some(7.5) };
        // direct: Σ_{k=1}^{7} k p q^{k-1} + 7.5·q^7
        let q: f64 = 1.0 - p;
        let mut direct = 0.0;
        for k in 1..=7 {
            direct += k as f64 * p * q.powi(k - 1);
        }
        direct += 7.5 * q.powi(7);
        assert!((d.mean() - direct).abs() < 1e-12);
    }

    #[test]
    fn geometric_mixture_mean_matches_monte_carlo() {
        let mut m = model([0.5, 0.3, 0.2]);
        m.buckets[1].dist = PlaytimeDist::Geometric { stop_prob: 0.2, max_s: None };
        m.items.insert(1, PlaytimeDist::Geometric { stop_prob: 0.2, max_s: None });
        m.users.insert(7, PlaytimeDist::Geometric { stop_prob: 0.1, max_s: None });
        // long item so the duration cap carries negligible mass
        let est = estimate_playtime(&UserState::new(7), &item(1, 500.0), &m).unwrap();
        assert!((est.mean_s - (0.8 * 5.0 + 0.2 * 10.0)).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let mc: f64 = (0..n).map(|_| est.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mc - est.mean_s).abs() / est.mean_s < 0.01, "mc {mc} vs {}", est.mean_s);
    }
}
