//! Quasi-experimental estimation: balanced video splits, history
//! adjustment by view filtering, and the extrapolated group contrast.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::assign::ab_assign;
use crate::error::{Error, Result};

/// Metric totals per group and video set. `t_c`/`c_c` are on the untouched
/// remainder, `t_bp` is the treatment group on the adjusted B set and `c_ap`
/// the control group on the adjusted A set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiTotals {
    pub t_c: f64,
    pub c_c: f64,
    pub t_bp: f64,
    pub c_ap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuasiScale {
    /// Sizes of A+B, B' and A' (same measure, e.g. views per capita).
    Sizes { ab: f64, bp: f64, ap: f64 },
    Lambda { lambda: f64 },
}

pub const DEFAULT_LAMBDA: f64 = 2.5;

pub fn quasi_delta(x: &QuasiTotals, scale: &QuasiScale) -> Result<f64> {
    if [x.t_c, x.c_c, x.t_bp, x.c_ap].iter().any(|v| !v.is_finite()) {
        return Err(Error::input("quasi totals must be finite"));
    }
    let base = x.t_c - x.c_c;
    match *scale {
        QuasiScale::Sizes { ab, bp, ap } => {
            if !(bp > 0.0) || !(ap > 0.0) || !(ab >= 0.0) {
                return Err(Error::input("adjusted subsets must be nonempty"));
            }
            Ok(base + x.t_bp * ab / bp - x.c_ap * ab / ap)
        }
        QuasiScale::Lambda { lambda } => {
            if !(lambda > 0.0) {
                return Err(Error::param("lambda must be > 0"));
            }
            Ok(base + (x.t_bp - x.c_ap) * lambda)
        }
    }
}

/// `T_{C+B'} − C_{C+A'}`.
pub fn quasi_delta_perf(t_cbp: f64, c_cap: f64) -> f64 {
    t_cbp - c_cap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoCovariates {
    pub id: u64,
    pub duration_s: f64,
    pub category: u32,
    pub resolution: u32,
    pub pre_views: f64,
    pub pre_playtime_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceConfig {
    /// Largest allowed relative mean difference of a numeric covariate.
    pub tolerance: f64,
    pub max_swaps: usize,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self { tolerance: 0.02, max_swaps: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSplit {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub max_imbalance: f64,
    pub balanced: bool,
    pub swaps: usize,
}

const NUMERIC: usize = 3;

fn numeric_row(v: &VideoCovariates) -> [f64; NUMERIC] {
    [v.duration_s, v.pre_views, v.pre_playtime_s]
}

fn stratum(v: &VideoCovariates) -> (u32, u32) {
    (v.category, v.resolution)
}

/// Worst and squared-sum relative mean difference over numeric covariates.
fn imbalance(sa: &[f64; NUMERIC], sb: &[f64; NUMERIC], na: f64, nb: f64) -> (f64, f64) {
    let mut worst = 0.0f64;
    let mut sq = 0.0;
    for k in 0..NUMERIC {
        let (ma, mb) = (sa[k] / na, sb[k] / nb);
        let scale = 0.5 * (ma.abs() + mb.abs());
        let d = if scale > 0.0 { (ma - mb).abs() / scale } else { 0.0 };
        worst = worst.max(d);
        sq += d * d;
    }
    (worst, sq)
}

/// Random halves stratified by (category, resolution), so per-stratum counts
/// differ by at most one, then best-improvement swaps within a stratum until
/// every numeric
/// covariate mean is within tolerance, no swap helps, or the budget runs out.
pub fn balance_video_split(videos: &[VideoCovariates], seed: u64, cfg: &BalanceConfig) -> Result<VideoSplit> {
    if videos.len() < 2 {
        return Err(Error::param("need at least two videos to split"));
    }
    let rows: Vec<[f64; NUMERIC]> = videos.iter().map(numeric_row).collect();
    let mut idx: Vec<usize> = (0..videos.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.sort_by_key(|&i| stratum(&videos[i]));
    // deal each category alternately, continuing the parity across
    // categories so the halves differ in size by at most one
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (k, &i) in idx.iter().enumerate() {
        if k % 2 == 0 {
            a.push(i);
        } else {
            b.push(i);
        }
    }
    let sum = |set: &[usize]| {
        let mut s = [0.0; NUMERIC];
        for &i in set {
            for k in 0..NUMERIC {
                s[k] += rows[i][k];
            }
        }
        s
    };
    let (mut sa, mut sb) = (sum(&a), sum(&b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut worst, mut score) = imbalance(&sa, &sb, na, nb);
    let mut swaps = 0;
    while worst > cfg.tolerance && swaps < cfg.max_swaps {
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for (pi, &i) in a.iter().enumerate() {
            for (pj, &j) in b.iter().enumerate() {
                if stratum(&videos[i]) != stratum(&videos[j]) {
                    continue;
                }
                let mut ta = sa;
                let mut tb = sb;
                for k in 0..NUMERIC {
                    let d = rows[j][k] - rows[i][k];
                    ta[k] += d;
                    tb[k] -= d;
                }
                let (w, s) = imbalance(&ta, &tb, na, nb);
                if s < best.map_or(score, |x| x.2) {
                    best = Some((pi, pj, s, w));
                }
            }
        }
        let Some((pi, pj, s, w)) = best else { break };
        let (i, j) = (a[pi], b[pj]);
        for k in 0..NUMERIC {
            let d = rows[j][k] - rows[i][k];
            sa[k] += d;
            sb[k] -= d;
        }
        a[pi] = j;
        b[pj] = i;
        score = s;
        worst = w;
        swaps += 1;
    }
    let balanced = worst <= cfg.tolerance;
    if !balanced {
        log::warn!("video split imbalance {worst:.4} above tolerance {}", cfg.tolerance);
    }
    let ids = |set: &[usize]| {
        let mut v: Vec<u64> = set.iter().map(|&i| videos[i].id).collect();
        v.sort_unstable();
        v
    };
    Ok(VideoSplit { a: ids(&a), b: ids(&b), max_imbalance: worst, balanced, swaps })
}

/// Synthetic population for validating the quasi pipeline end to end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuasiSimSpec {
    pub users: usize,
    pub views_per_user: usize,
    /// Videos under evaluation (split into A and B).
    pub evaluated_videos: usize,
    /// Remainder of the catalog (set C).
    pub other_videos: usize,
    pub zipf_exponent: f64,
    /// Relative playtime change caused by the new strategy.
    pub effect: f64,
    pub user_sigma: f64,
    pub view_sigma: f64,
    pub balance_tolerance: f64,
}

impl Default for QuasiSimSpec {
    fn default() -> Self {
        Self {
            users: 80_000,
            views_per_user: 20,
            evaluated_videos: 300,
            other_videos: 300,
            zipf_exponent: 0.6,
            effect: 0.05,
            user_sigma: 0.15,
            view_sigma: 0.3,
            balance_tolerance: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiRun {
    pub split: VideoSplit,
    pub totals: QuasiTotals,
    pub scale: QuasiScale,
    pub delta_exact: f64,
    pub delta_lambda: f64,
    pub delta_perf: f64,
    /// `delta_exact` relative to the extrapolated control playtime on A+B.
    pub relative_effect: f64,
    pub injected_effect: f64,
}

struct SimVideo {
    duration_s: f64,
    completion: f64,
    category: u32,
    resolution: u32,
}

/// One view: (user, video, playtime seconds).
type View = (usize, usize, f64);

fn draw_views(
    rng: &mut ChaCha8Rng,
    spec: &QuasiSimSpec,
    videos: &[SimVideo],
    popularity: &WeightedAliasIndex<f64>,
    activity: &[f64],
    uplift: impl Fn(usize, usize) -> f64,
) -> Result<Vec<View>> {
    let noise = LogNormal::new(-0.5 * spec.view_sigma * spec.view_sigma, spec.view_sigma)
        .map_err(|e| Error::param(e.to_string()))?;
    let mut out = Vec::with_capacity(spec.users * spec.views_per_user);
    for (u, act) in activity.iter().enumerate() {
        for _ in 0..spec.views_per_user {
            let v = popularity.sample(rng);
            let base = videos[v].duration_s * videos[v].completion * act * noise.sample(rng);
            out.push((u, v, base * uplift(u, v)));
        }
    }
    Ok(out)
}

/// Generates a population with a known effect, splits the evaluated videos,
/// filters the viewing history and estimates the effect.
///
/// Totals are per capita of each user group and sizes are views per capita,
/// so unequal group sizes do not leak into the contrast.
pub fn run_quasi_pipeline(spec: &QuasiSimSpec, seed: u64) -> Result<QuasiRun> {
    if spec.users < 2 || spec.evaluated_videos < 2 || spec.views_per_user == 0 {
        return Err(Error::param("quasi simulation needs users, views and at least two evaluated videos"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_videos = spec.evaluated_videos + spec.other_videos;
    let videos: Vec<SimVideo> = (0..n_videos)
        .map(|_| SimVideo {
            duration_s: rng.random_range(10.0..120.0),
            completion: rng.random_range(0.3..0.9),
            category: rng.random_range(0..6),
            resolution: rng.random_range(0..3),
        })
        .collect();
    // popularity ranks shuffled across the catalog
    let mut ranks: Vec<usize> = (1..=n_videos).collect();
    ranks.shuffle(&mut rng);
    let weights: Vec<f64> = ranks.iter().map(|r| (*r as f64).powf(-spec.zipf_exponent)).collect();
    let popularity = WeightedAliasIndex::new(weights).map_err(|e| Error::param(e.to_string()))?;
    let act_dist = LogNormal::new(-0.5 * spec.user_sigma * spec.user_sigma, spec.user_sigma)
        .map_err(|e| Error::param(e.to_string()))?;
    let activity: Vec<f64> = (0..spec.users).map(|_| act_dist.sample(&mut rng)).collect();
    let salt = format!("quasi-{seed}");
    let treated: Vec<bool> = (0..spec.users)
        .map(|u| ab_assign(u as u64, &salt, &[0.5, 0.5]).map(|a| a == 1))
        .collect::<Result<_>>()?;

    // pre-period history drives the covariate balance
    let pre = draw_views(&mut rng, spec, &videos, &popularity, &activity, |_, _| 1.0)?;
    let mut pre_views = vec![0.0; n_videos];
    let mut pre_play = vec![0.0; n_videos];
    for &(_, v, p) in &pre {
        pre_views[v] += 1.0;
        pre_play[v] += p;
    }
    let covs: Vec<VideoCovariates> = (0..spec.evaluated_videos)
        .map(|v| VideoCovariates {
            id: v as u64,
            duration_s: videos[v].duration_s,
            category: videos[v].category,
            resolution: videos[v].resolution,
            pre_views: pre_views[v],
            pre_playtime_s: pre_play[v],
        })
        .collect();
    let split = balance_video_split(
        &covs,
        seed ^ 0x5eed,
        &BalanceConfig { tolerance: spec.balance_tolerance, max_swaps: 2000 },
    )?;
    let mut in_b = vec![false; n_videos];
    for id in &split.b {
        in_b[*id as usize] = true;
    }
    let evaluated = |v: usize| v < spec.evaluated_videos;

    // the new strategy serves B to the treatment group
    let effect = spec.effect;
    let views = draw_views(&mut rng, spec, &videos, &popularity, &activity, |u, v| {
        if treated[u] && evaluated(v) && in_b[v] {
            1.0 + effect
        } else {
            1.0
        }
    })?;

    let n_t = treated.iter().filter(|t| **t).count() as f64;
    let n_c = spec.users as f64 - n_t;
    if n_t == 0.0 || n_c == 0.0 {
        return Err(Error::Undefined("one user group is empty".into()));
    }
    let (mut t_c, mut c_c, mut t_bp, mut c_ap) = (0.0, 0.0, 0.0, 0.0);
    let (mut views_ab, mut views_bp, mut views_ap) = (0.0, 0.0, 0.0);
    for &(u, v, p) in &views {
        if !evaluated(v) {
            if treated[u] {
                t_c += p;
            } else {
                c_c += p;
            }
            continue;
        }
        views_ab += 1.0;
        // history adjustment: treatment keeps B views, control keeps A views
        match (treated[u], in_b[v]) {
            (true, true) => {
                t_bp += p;
                views_bp += 1.0;
            }
            (false, false) => {
                c_ap += p;
                views_ap += 1.0;
            }
            _ => {}
        }
    }
    let totals = QuasiTotals { t_c: t_c / n_t, c_c: c_c / n_c, t_bp: t_bp / n_t, c_ap: c_ap / n_c };
    let scale = QuasiScale::Sizes {
        ab: views_ab / (n_t + n_c),
        bp: views_bp / n_t,
        ap: views_ap / n_c,
    };
    let delta_exact = quasi_delta(&totals, &scale)?;
    let delta_lambda = quasi_delta(&totals, &QuasiScale::Lambda { lambda: DEFAULT_LAMBDA })?;
    let delta_perf = quasi_delta_perf(totals.t_c + totals.t_bp, totals.c_c + totals.c_ap);
    let QuasiScale::Sizes { ab, ap, .. } = scale else { unreachable!() };
    let baseline = totals.c_ap * ab / ap;
    Ok(QuasiRun {
        split,
        totals,
        scale,
        delta_exact,
        delta_lambda,
        delta_perf,
        relative_effect: delta_exact / baseline,
        injected_effect: spec.effect,
    })
}
