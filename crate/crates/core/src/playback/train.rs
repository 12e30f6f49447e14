//! Offline decider optimization: gradient descent for linear deciders,
//! Q-learning for tabular ones, and validation-set search over candidates.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decider::{Decider, LinearDecider, QTableDecider, RulePolicy, StateBuckets};
use super::network::NetworkTrace;
use super::session::{run_session, Episode, SessionConfig};
use super::types::{Item, UserState};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientConfig<T> {
    pub epochs: usize,
    /// Mini-batch size; `0` or anything ≥ the data size means full batch.
    pub batch: usize,
    pub lr: T,
    pub seed: u64,
}

/// Linear model fit result with the full-data loss after every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub epoch_loss: Vec<T>,
}

fn predict<T: Scalar>(w: &[T], b: T, x: &[T]) -> T {
    w.iter().zip(x).fold(b, |acc, (wi, xi)| acc + *wi * *xi)
}

pub fn mean_loss<T: Scalar>(w: &[T], b: T, data: &[(Vec<T>, T)], loss: &LossKind<T>) -> T {
    let total = data
        .iter()
        .fold(T::zero(), |acc, (x, y)| acc + loss.value(*y, predict(w, b, x)));
    total / T::from_usize_lossy(data.len())
}

/// Mini-batch gradient descent on `mean loss(y, w·x + b)` starting from the
/// given parameters. Batches are drawn from a seeded shuffle each epoch.
pub fn fit_linear<T: Scalar>(
    weights: &[T],
    bias: T,
    data: &[(Vec<T>, T)],
    loss: &LossKind<T>,
    cfg: &GradientConfig<T>,
) -> Result<LinearFit<T>> {
    if !(cfg.lr > T::zero()) {
        return Err(Error::param("learning rate must be > 0"));
    }
    if data.is_empty() {
        return Err(Error::param("training data is empty"));
    }
    loss.validate()?;
    let dim = weights.len();
    if let Some((x, _)) = data.iter().find(|(x, _)| x.len() != dim) {
        return Err(Error::input(format!(
            "feature length {} does not match {dim} weights",
            x.len()
        )));
    }
    let mut w = weights.to_vec();
    let mut b = bias;
    let batch = if cfg.batch == 0 { data.len() } else { cfg.batch.min(data.len()) };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut gw = vec![T::zero(); dim];
    for _ in 0..cfg.epochs {
        if batch < data.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            gw.iter_mut().for_each(|g| *g = T::zero());
            let mut gb = T::zero();
            for &i in chunk {
                let (x, y) = &data[i];
                let g = loss.grad(*y, predict(&w, b, x));
                for (gj, xj) in gw.iter_mut().zip(x) {
                    *gj = *gj + g * *xj;
                }
                gb = gb + g;
            }
            let scale = cfg.lr / T::from_usize_lossy(chunk.len());
            for (wj, gj) in w.iter_mut().zip(&gw) {
                *wj = *wj - scale * *gj;
            }
            b = b - scale * gb;
        }
        epoch_loss.push(mean_loss(&w, b, data, loss));
    }
    if w.iter().chain(std::iter::once(&b)).any(|v| !v.is_finite()) {
        return Err(Error::Undefined("gradient descent diverged; lower the learning rate".into()));
    }
    Ok(LinearFit { weights: w, bias: b, epoch_loss })
}

/// Trains a linear decider on `(state vector, target bitrate)` pairs.
pub fn optimize_decider_gradient(
    decider: &LinearDecider,
    data: &[(Vec<f64>, f64)],
    loss: &LossKind<f64>,
    cfg: &GradientConfig<f64>,
) -> Result<(LinearDecider, Vec<f64>)> {
    let fit = fit_linear(&decider.weights, decider.bias, data, loss, cfg)?;
    Ok((
        LinearDecider {
            weights: fit.weights,
            bias: fit.bias,
        },
        fit.epoch_loss,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl QConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param("q-learning alpha must be in (0,1]"));
        }
        if !(0.0..1.0).contains(&self.gamma) && self.gamma != 0.0 {
            return Err(Error::param("q-learning gamma must be in [0,1)"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::param("q-learning epsilon must be in [0,1]"));
        }
        Ok(())
    }
}

fn max_q(q: &BTreeMap<(u32, usize), f64>, s: u32) -> f64 {
    q.range((s, 0)..=(s, usize::MAX))
        .map(|(_, v)| *v)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .unwrap_or(0.0)
}

fn q_update(q: &mut BTreeMap<(u32, usize), f64>, s: u32, a: usize, r: f64, next: Option<u32>, cfg: &QConfig) {
    let target = r + next.map_or(0.0, |n| cfg.gamma * max_q(q, n));
    let entry = q.entry((s, a)).or_insert(0.0);
    *entry += cfg.alpha * (target - *entry);
}

/// Replays logged episodes through the Q update, `passes` times in order.
/// Logged actions stand in for the behavior policy, so `epsilon` is unused.
pub fn optimize_decider_q(
    episodes: &[Episode],
    buckets: StateBuckets,
    fallback: RulePolicy,
    cfg: &QConfig,
    passes: usize,
) -> Result<QTableDecider> {
    cfg.validate()?;
    let mut table = QTableDecider::new(buckets, fallback);
    for _ in 0..passes {
        for ep in episodes {
            let s = table.buckets.state_of(&ep.state);
            let next = ep.next_state.as_ref().map(|n| table.buckets.state_of(n));
            q_update(&mut table.q, s, ep.action, ep.reward, next, cfg);
        }
    }
    Ok(table)
}

/// A finite MDP for online Q-learning.
pub trait QEnvironment {
    fn n_actions(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> u32;
    /// Returns the reward and the next state, or `None` when terminal.
    fn step(&mut self, state: u32, action: usize, rng: &mut ChaCha8Rng) -> (f64, Option<u32>);
}

/// ε-greedy online Q-learning; greedy ties go to the lowest action.
pub fn q_learning_online<E: QEnvironment>(
    env: &mut E,
    cfg: &QConfig,
    episodes: usize,
    max_steps: usize,
) -> Result<BTreeMap<(u32, usize), f64>> {
    cfg.validate()?;
    let n_actions = env.n_actions();
    if n_actions == 0 {
        return Err(Error::param("environment has no actions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut q = BTreeMap::new();
    for _ in 0..episodes {
        let mut s = env.reset(&mut rng);
        for _ in 0..max_steps {
            let a = if rng.random::<f64>() < cfg.epsilon {
                rng.random_range(0..n_actions)
            } else {
                (0..n_actions).fold(0, |best, a| {
                    let v = q.get(&(s, a)).copied().unwrap_or(0.0);
                    let bv = q.get(&(s, best)).copied().unwrap_or(0.0);
                    if v > bv { a } else { best }
                })
            };
            let (r, next) = env.step(s, a, &mut rng);
            q_update(&mut q, s, a, r, next, cfg);
            match next {
                Some(n) => s = n,
                None => break,
            }
        }
    }
    Ok(q)
}

/// A validation session: one user, one feed, one network trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCase {
    pub user: UserState,
    pub items: Vec<Item>,
    pub trace: NetworkTrace,
}

/// Mean per-session EstProfit over the validation set, each session run with
/// the same config (and therefore the same seed) for every decider.
pub fn evaluate_decider(decider: &Decider, cases: &[ValidationCase], cfg: &SessionConfig) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::param("validation set is empty"));
    }
    let mut total = 0.0;
    for c in cases {
        total += run_session(decider, &c.user, &c.items, &c.trace, cfg)?.est_profit;
    }
    Ok(total / cases.len() as f64)
}

/// Index and score of the best candidate; earlier candidates win ties.
pub fn heuristic_search<F>(candidates: &[Decider], mut score: F) -> Result<(usize, Vec<f64>)>
where
    F: FnMut(&Decider) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(Error::param("heuristic search needs at least one candidate"));
    }
    let scores = candidates.iter().map(&mut score).collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::playback::decider::StateFeatures;

    fn features(buffer_s: f64, bw: f64) -> StateFeatures {
        StateFeatures {
            buffer_s,
            bandwidth_kbps: bw,
            device_score: 0.5,
            portrait: 0,
            sens_rebuffer: 1.0,
            sens_quality: 1.0,
        }
    }

    #[test]
    fn single_point_one_step() {
        let x = vec![2.0, -1.0, 0.5];
        let lr = 1.0 / (x.iter().map(|v| v * v).sum::<f64>() + 1.0);
        let cfg = GradientConfig { epochs: 1, batch: 1, lr, seed: 0 };
        let fit = fit_linear(&[0.0; 3], 0.0, &[(x.clone(), 7.0)], &LossKind::Squared, &cfg).unwrap();
        assert!((predict(&fit.weights, fit.bias, &x) - 7.0).abs() < 1e-12);
        assert!(fit.epoch_loss[0] < 1e-20);
    }

    #[test]
    fn fixed_point_is_stable() {
        let data: Vec<(Vec<f64>, f64)> = (0..10)
            .map(|i| (vec![i as f64], 3.0 * i as f64 + 1.0))
            .collect();
        let cfg = GradientConfig { epochs: 5, batch: 3, lr: 0.01, seed: 4 };
        let fit = fit_linear(&[3.0], 1.0, &data, &LossKind::Squared, &cfg).unwrap();
        assert_eq!(fit.weights, vec![3.0]);
        assert_eq!(fit.bias, 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = GradientConfig { epochs: 1, batch: 0, lr: 0.0, seed: 0 };
        assert!(fit_linear(&[0.0], 0.0, &[(vec![1.0], 1.0)], &LossKind::Squared, &cfg).is_err());
        let cfg = GradientConfig { lr: 0.1, ..cfg };
        assert!(fit_linear::<f64>(&[0.0], 0.0, &[], &LossKind::Squared, &cfg).is_err());
    }

    #[test]
    fn q_replay_with_no_discount_copies_rewards() {
        let b = StateBuckets::default();
        let eps = vec![
            Episode { state: features(1.0, 1000.0), action: 0, reward: 0.3, next_state: Some(features(3.0, 1000.0)) },
            Episode { state: features(3.0, 1000.0), action: 1, reward: -0.2, next_state: None },
            Episode { state: features(9.0, 5000.0), action: 2, reward: 0.7, next_state: None },
        ];
        let cfg = QConfig { alpha: 1.0, gamma: 0.0, epsilon: 0.0, seed: 0 };
        let q = optimize_decider_q(&eps, b.clone(), RulePolicy::Fixed { ladder: 0 }, &cfg, 1).unwrap();
        for e in &eps {
            assert_eq!(q.value(b.state_of(&e.state), e.action), e.reward);
        }
        assert_eq!(q.q.len(), 3);
    }

    #[test]
    fn zero_rewards_keep_q_zero() {
        let eps: Vec<Episode> = (0..20)
            .map(|i| Episode {
                state: features(i as f64 * 0.5, 800.0 * i as f64),
                action: i % 3,
                reward: 0.0,
                next_state: Some(features(1.0, 2000.0)),
            })
            .collect();
        let cfg = QConfig { alpha: 0.5, gamma: 0.9, epsilon: 0.1, seed: 0 };
        let q = optimize_decider_q(&eps, StateBuckets::default(), RulePolicy::Fixed { ladder: 0 }, &cfg, 3).unwrap();
        assert!(q.q.values().all(|v| *v == 0.0));
    }

    #[test]
    fn search_prefers_first_on_ties() {
        let c = vec![
            Decider::rule("a", RulePolicy::Fixed { ladder: 0 }),
            Decider::rule("b", RulePolicy::Fixed { ladder: 1 }),
            Decider::rule("c", RulePolicy::Fixed { ladder: 2 }),
        ];
        let (best, _) = heuristic_search(&c, |d| Ok(if d.name == "a" { 1.0 } else { 2.0 })).unwrap();
        assert_eq!(best, 1);
        let (best, _) = heuristic_search(&c[..1], |_| Ok(-5.0)).unwrap();
        assert_eq!(best, 0);
    }
}
