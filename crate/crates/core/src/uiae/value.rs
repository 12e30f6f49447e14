//! Video value prediction: feature extraction, linear regressor training with
//! a selectable loss, and ranking evaluation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::playback::{fit_linear, GradientConfig};

/// One training/evaluation row. Counts and targets are non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSample {
    pub item_id: u64,
    pub author_id: u64,
    pub author_activity: f64,
    pub author_posts: f64,
    pub author_fans: f64,
    pub duration_s: f64,
    pub playback_volume: f64,
    pub like_count: f64,
    pub vv_growth: f64,
    pub category: u32,
    pub hour: u32,
    pub holiday: bool,
    pub target_vv: f64,
    pub target_playtime_s: f64,
    pub target_likes: f64,
}

/// Column order of the CSV form, written as the header row.
pub const VALUE_SAMPLE_HEADER: [&str; 15] = [
    "item_id",
    "author_id",
    "author_activity",
    "author_posts",
    "author_fans",
    "duration_s",
    "playback_volume",
    "like_count",
    "vv_growth",
    "category",
    "hour",
    "holiday",
    "target_vv",
    "target_playtime_s",
    "target_likes",
];

const CATEGORY_BUCKETS: usize = 8;
pub const FEATURE_LEN: usize = 10 + CATEGORY_BUCKETS;

impl ValueSample {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            self.author_activity,
            self.author_posts,
            self.author_fans,
            self.duration_s,
            self.playback_volume,
            self.like_count,
            self.target_vv,
            self.target_playtime_s,
            self.target_likes,
        ];
        if nonneg.iter().any(|v| !v.is_finite() || *v < 0.0) || !self.vv_growth.is_finite() {
            return Err(Error::input(format!(
                "sample {}: counts and targets must be finite and >= 0",
                self.item_id
            )));
        }
        if self.hour > 23 {
            return Err(Error::input(format!("sample {}: hour {} > 23", self.item_id, self.hour)));
        }
        Ok(())
    }

    pub fn target(&self, head: ValueHead) -> f64 {
        match head {
            ValueHead::ViewVolume => self.target_vv,
            ValueHead::PlayTime => self.target_playtime_s,
            ValueHead::Likes => self.target_likes,
        }
    }

    /// Raw (unstandardized) feature vector of length [`FEATURE_LEN`].
    pub fn features(&self) -> Vec<f64> {
        let angle = std::f64::consts::TAU * self.hour as f64 / 24.0;
        let mut x = vec![
            self.author_activity,
            self.author_posts.ln_1p(),
            self.author_fans.ln_1p(),
            self.duration_s,
            self.playback_volume.ln_1p(),
            self.like_count.ln_1p(),
            self.vv_growth,
            angle.sin(),
            angle.cos(),
        ];
        x.extend((0..CATEGORY_BUCKETS).map(|c| {
            if self.category as usize % CATEGORY_BUCKETS == c {
                1.0
            } else {
                0.0
            }
        }));
        x.push(if self.holiday { 1.0 } else { 0.0 });
        x
    }
}

pub fn write_samples_csv<W: Write>(samples: &[ValueSample], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(input: R) -> Result<Vec<ValueSample>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(VALUE_SAMPLE_HEADER.iter().copied()) {
        return Err(Error::SchemaMismatch(format!(
            "value sample header {:?} does not match the expected columns",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for row in r.deserialize() {
        let s: ValueSample = row?;
        s.validate()?;
        out.push(s);
    }
    Ok(out)
}

/// Which target the model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueHead {
    ViewVolume,
    PlayTime,
    Likes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueTrainConfig {
    pub head: ValueHead,
    pub loss: LossKind<f64>,
    /// Train on `ln(1 + y)` instead of `y`.
    pub log_target: bool,
    pub epochs: usize,
}

impl ValueTrainConfig {
    pub fn new(head: ValueHead, loss: LossKind<f64>) -> Self {
        Self { head, loss, log_target: true, epochs: 2000 }
    }
}

pub const VALUE_MODEL_FORMAT_VERSION: u32 = 1;

/// Standardized linear regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRegressor {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Full-data loss after each epoch.
    pub epoch_loss: Vec<f64>,
    /// Set when the targets were all equal and a constant model was returned.
    pub degenerate: bool,
}

impl LinearRegressor {
    /// Raw model output on the training scale, before the loss link.
    pub fn raw(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x.iter().zip(self.mean.iter().zip(&self.scale)))
            .fold(self.bias, |acc, (w, (xi, (m, s)))| acc + w * (xi - m) / s)
    }

    /// Weights and bias expressed on the unstandardized features.
    pub fn raw_weights(&self) -> (Vec<f64>, f64) {
        let w: Vec<f64> = self.weights.iter().zip(&self.scale).map(|(w, s)| w / s).collect();
        let b = self.bias - w.iter().zip(&self.mean).map(|(w, m)| w * m).sum::<f64>();
        (w, b)
    }
}

/// Fits `y ≈ w·x + b` by full-batch gradient descent on standardized
/// features. The step is `1/(c·(1 + Σ var))`, an upper bound on the inverse
/// gradient Lipschitz constant, so the squared loss never increases.
pub fn fit_regressor(
    x: &[Vec<f64>],
    y: &[f64],
    loss: &LossKind<f64>,
    epochs: usize,
) -> Result<LinearRegressor> {
    loss.validate()?;
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::param("regressor needs a nonempty, equal-length x and y"));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::input("ragged feature rows"));
    }
    let n = x.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in x {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; dim];
    for r in x {
        for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let mut trace = 1.0;
    for s in scale.iter_mut() {
        if *s > 1e-24 {
            *s = s.sqrt();
            trace += 1.0;
        } else {
            *s = 1.0;
        }
    }

    let y_mean = y.iter().sum::<f64>() / n;
    let init_bias = |target: f64| match loss {
        LossKind::WeightedLog => target.max(1e-12).ln(),
        _ => target,
    };
    if y.iter().all(|v| *v == y[0]) {
        return Ok(LinearRegressor {
            mean,
            scale,
            weights: vec![0.0; dim],
            bias: init_bias(y[0]),
            epoch_loss: Vec::new(),
            degenerate: true,
        });
    }
    let curvature = match loss {
        LossKind::WeightedLog => (1.0 + y.iter().cloned().fold(0.0, f64::max)) / 4.0,
        _ => 1.0,
    };
    let data: Vec<(Vec<f64>, f64)> = x
        .iter()
        .zip(y)
        .map(|(r, t)| {
            let z = r.iter().zip(mean.iter().zip(&scale)).map(|(v, (m, s))| (v - m) / s).collect();
            (z, *t)
        })
        .collect();
    let cfg = GradientConfig { epochs, batch: 0, lr: 1.0 / (curvature * trace), seed: 0 };
    let fit = fit_linear(&vec![0.0; dim], init_bias(y_mean), &data, loss, &cfg)?;
    Ok(LinearRegressor {
        mean,
        scale,
        weights: fit.weights,
        bias: fit.bias,
        epoch_loss: fit.epoch_loss,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueModel {
    pub version: u32,
    pub config: ValueTrainConfig,
    pub regressor: LinearRegressor,
}

impl ValueModel {
    /// Maps a target onto the scale the model was trained on.
    pub fn train_scale(&self, y: f64) -> f64 {
        if self.config.log_target {
            y.ln_1p()
        } else {
            y
        }
    }

    /// Prediction on the training scale.
    pub fn predict_scaled(&self, s: &ValueSample) -> f64 {
        self.config.loss.link(self.regressor.raw(&s.features()))
    }

    /// Prediction on the original target scale.
    pub fn predict(&self, s: &ValueSample) -> f64 {
        let v = self.predict_scaled(s);
        if self.config.log_target {
            v.exp_m1().max(0.0)
        } else {
            v
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.version != VALUE_MODEL_FORMAT_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "value model version {} (expected {VALUE_MODEL_FORMAT_VERSION})",
                m.version
            )));
        }
        Ok(m)
    }
}

pub fn train_value_model(samples: &[ValueSample], cfg: &ValueTrainConfig) -> Result<ValueModel> {
    if samples.is_empty() {
        return Err(Error::param("value model needs at least one sample"));
    }
    for s in samples {
        s.validate()?;
    }
    let x: Vec<Vec<f64>> = samples.iter().map(ValueSample::features).collect();
    let y: Vec<f64> = samples
        .iter()
        .map(|s| {
            let t = s.target(cfg.head);
            if cfg.log_target {
                t.ln_1p()
            } else {
                t
            }
        })
        .collect();
    let regressor = fit_regressor(&x, &y, &cfg.loss, cfg.epochs)?;
    if regressor.degenerate {
        log::warn!("value model targets are constant; returning a constant model");
    }
    Ok(ValueModel { version: VALUE_MODEL_FORMAT_VERSION, config: *cfg, regressor })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueEvaluation {
    pub rec_auc: f64,
    pub mae: f64,
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn midranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Ranking AUC of `scores` against the label "true value is among the top
/// `top_fraction` of `truth`". Items tied with the cutoff value are positive.
pub fn rec_auc(scores: &[f64], truth: &[f64], top_fraction: f64) -> Result<f64> {
    if scores.len() != truth.len() || scores.is_empty() {
        return Err(Error::param("scores and truth must be nonempty and equal length"));
    }
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(Error::param("top fraction must be in (0, 1)"));
    }
    let mut sorted = truth.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((top_fraction * truth.len() as f64).ceil() as usize).max(1);
    let cutoff = sorted[k - 1];
    let labels: Vec<bool> = truth.iter().map(|t| *t >= cutoff).collect();
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("top-fraction labels contain a single class".into()));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(&labels).filter(|(_, l)| **l).map(|(r, _)| r).sum();
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

pub fn evaluate_value_model(
    model: &ValueModel,
    test: &[ValueSample],
    top_fraction: f64,
) -> Result<ValueEvaluation> {
    if test.is_empty() {
        return Err(Error::param("test set is empty"));
    }
    let pred: Vec<f64> = test.iter().map(|s| model.predict_scaled(s)).collect();
    let truth: Vec<f64> = test.iter().map(|s| model.train_scale(s.target(model.config.head))).collect();
    let rec_auc = rec_auc(&pred, &truth, top_fraction)?;
    let mae = pred.iter().zip(&truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / test.len() as f64;
    Ok(ValueEvaluation { rec_auc, mae })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(i: u64, rng: &mut ChaCha8Rng) -> ValueSample {
        let fans: f64 = rng.random_range(0.0..1e5);
        let vv: f64 = rng.random_range(0.0..1e4);
        ValueSample {
            item_id: i,
            author_id: i % 17,
            author_activity: rng.random_range(0.0..1.0),
            author_posts: rng.random_range(0.0..500.0),
            author_fans: fans,
            duration_s: rng.random_range(5.0..120.0),
            playback_volume: vv,
            like_count: vv * rng.random_range(0.0..0.1),
            vv_growth: rng.random_range(-0.5..2.0),
            category: rng.random_range(0..12),
            hour: rng.random_range(0..24),
            holiday: rng.random_bool(0.2),
            target_vv: (vv * 3.0 + fans * 0.1) * rng.random_range(0.8..1.2),
            target_playtime_s: 0.0,
            target_likes: 0.0,
        }
    }

    #[test]
    fn planted_linear_weights_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let planted = [2.0, -1.5, 0.25];
        let x: Vec<Vec<f64>> =
            (0..400).map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let y: Vec<f64> =
            x.iter().map(|r| 0.7 + r.iter().zip(&planted).map(|(a, b)| a * b).sum::<f64>()).collect();
        let fit = fit_regressor(&x, &y, &LossKind::Squared, 2000).unwrap();
        let (w, b) = fit.raw_weights();
        for (got, want) in w.iter().zip(&planted) {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
        assert!((b - 0.7).abs() < 1e-3);
        for pair in fit.epoch_loss.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9);
        }
    }

    #[test]
    fn constant_targets_flagged() {
        let x = vec![vec![1.0], vec![2.0]];
        let fit = fit_regressor(&x, &[4.0, 4.0], &LossKind::Squared, 10).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.raw(&[7.0]), 4.0);
    }

    #[test]
    fn all_losses_train_and_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let train: Vec<ValueSample> = (0..600).map(|i| sample(i, &mut rng)).collect();
        let test: Vec<ValueSample> = (600..900).map(|i| sample(i, &mut rng)).collect();
        for loss in [LossKind::Squared, LossKind::Huber { delta: 1.0 }, LossKind::WeightedLog] {
            let mut cfg = ValueTrainConfig::new(ValueHead::ViewVolume, loss);
            cfg.epochs = 500;
            let m = train_value_model(&train, &cfg).unwrap();
            let ev = evaluate_value_model(&m, &test, 0.1).unwrap();
            assert!(ev.rec_auc > 0.8, "{loss:?}: {ev:?}");
            assert!(ev.mae.is_finite());
            if matches!(loss, LossKind::Squared) {
                for pair in m.regressor.epoch_loss.windows(2) {
                    assert!(pair[1] <= pair[0] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn auc_perfect_and_random() {
        let truth: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(rec_auc(&truth, &truth, 0.1).unwrap(), 1.0);
        let rev: Vec<f64> = truth.iter().map(|v| -v).collect();
        assert_eq!(rec_auc(&rev, &truth, 0.1).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let noise: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let auc = rec_auc(&noise, &truth, 0.1).unwrap();
        assert!((auc - 0.5).abs() < 0.02, "{auc}");
    }

    #[test]
    fn auc_matches_pair_count() {
        let scores = [0.1, 0.4, 0.4, 0.9, 0.3, 0.8];
        let truth = [1.0, 5.0, 2.0, 9.0, 3.0, 4.0];
        // top half: truth >= 4 -> items 1, 3, 5
        let mut wins = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if truth[i] >= 4.0 && truth[j] < 4.0 {
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        assert!((rec_auc(&scores, &truth, 0.5).unwrap() - wins / 9.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(rec_auc(&[1.0, 2.0], &[3.0, 3.0], 0.1), Err(Error::Undefined(_))));
    }

    #[test]
    fn csv_roundtrip_and_header_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<ValueSample> = (0..5).map(|i| sample(i, &mut rng)).collect();
        let mut buf = Vec::new();
        write_samples_csv(&v, &mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with(&VALUE_SAMPLE_HEADER.join(",")));
        assert_eq!(read_samples_csv(buf.as_slice()).unwrap(), v);
        assert!(read_samples_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn model_json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<ValueSample> = (0..50).map(|i| sample(i, &mut rng)).collect();
        let m = train_value_model(&v, &ValueTrainConfig::new(ValueHead::ViewVolume, LossKind::Squared)).unwrap();
        assert_eq!(ValueModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }
}
