//! Sensitivity-aware versus fixed-weight QoE rendition choice on a
//! heterogeneous population, compared at equal traffic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BaselineConfig, Direction, QoPVector, QopMetric};
use crate::playback::{
    run_session, Decider, DurationBucket, EstProfitModel, Item, NetworkTrace, PlaytimeDist,
    PlaytimeModel, QoeWeights, RulePolicy, SessionConfig, SessionTrace, UserState,
};
use crate::workload::{generate_catalog, generate_population, user_trace, CatalogSpec, PopulationSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpliftSpec {
    pub population: PopulationSpec,
    pub catalog: CatalogSpec,
    pub feed_len: usize,
    pub session_ms: u64,
    pub qoe: QoeWeights<f64>,
    pub safety: f64,
    /// LT impact per 1% of video quality; the shipped table has none.
    pub quality_coefficient: f64,
    pub reference: QoPVector,
    /// Aware traffic must land within this fraction below the QoE traffic.
    pub traffic_tolerance: f64,
    pub price_iterations: usize,
}

impl Default for UpliftSpec {
    fn default() -> Self {
        Self {
            population: PopulationSpec { users: 120, ..Default::default() },
            catalog: CatalogSpec { items: 400, ..Default::default() },
            feed_len: 6,
            session_ms: 240_000,
            qoe: QoeWeights { rebuffer: 4.3, switch: 1.0, cost: 0.0 },
            safety: 0.9,
            quality_coefficient: 0.0006,
            reference: reference_qop(),
            traffic_tolerance: 0.01,
            price_iterations: 30,
        }
    }
}

/// Typical session outcome used as the "before" side of every EstProfit.
pub fn reference_qop() -> QoPVector {
    QoPVector {
        first_feed_ms: 600.0,
        first_frame_ms: 400.0,
        rebuffer_ratio: 0.02,
        rebuffer_dur_per_vv_ms: 300.0,
        frame_drop_rate: 0.01,
        anr_crash_rate: 0.001,
        power_avg: 1.1,
        storage_pct: 0.4,
        cpu_pct: 0.25,
        mem_pct: 0.3,
        oom_rate: 0.0005,
        fps: 30.0,
        traffic_bytes: 2.0e7,
        temperature_c: 36.0,
        publish_success_ratio: 0.99,
        video_quality: 70.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    pub mean_est_profit: f64,
    pub traffic_bytes: f64,
    pub mean_quality: f64,
    pub mean_rebuffer_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftComparison {
    pub qoe: ArmOutcome,
    pub aware: ArmOutcome,
    /// Per-MB price that brought the aware decider to the QoE traffic.
    pub traffic_price: f64,
    pub per_class: Vec<ClassOutcome>,
}

/// Per portrait class means under each decider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassOutcome {
    pub qoe_est_profit: f64,
    pub aware_est_profit: f64,
    pub qoe_quality: f64,
    pub aware_quality: f64,
}

/// One user's feed and network for the comparison.
#[derive(Debug, Clone)]
pub struct Case {
    pub user: UserState,
    pub items: Vec<Item>,
    pub trace: NetworkTrace,
}

fn session_config(spec: &UpliftSpec, baseline: &BaselineConfig, seed: u64, playtime: PlaytimeModel) -> SessionConfig {
    let impacts = baseline
        .impacts
        .clone()
        .with(QopMetric::VideoQuality, spec.quality_coefficient, Direction::HigherIsBetter);
    let mut cfg = SessionConfig::new(playtime, EstProfitModel { impacts, reference: spec.reference });
    cfg.seed = seed;
    cfg.record_slots = false;
    cfg.portrait_key = spec.population.portrait_key.clone();
    cfg
}

/// Arm totals plus per-class (mean EstProfit, mean quality).
type ArmRun = (ArmOutcome, Vec<(f64, f64)>);

fn run_arm(decider: &Decider, cases: &[Case], cfg: &SessionConfig, classes: usize, key: &str) -> Result<ArmRun> {
    let mut out = ArmOutcome { mean_est_profit: 0.0, traffic_bytes: 0.0, mean_quality: 0.0, mean_rebuffer_ratio: 0.0 };
    let mut by_class = vec![(0.0, 0.0, 0usize); classes];
    for c in cases {
        let t = run_session(decider, &c.user, &c.items, &c.trace, cfg)?;
        out.mean_est_profit += t.est_profit;
        out.traffic_bytes += t.traffic_bytes();
        out.mean_quality += t.qop.video_quality;
        out.mean_rebuffer_ratio += t.qop.rebuffer_ratio;
        let k = c.user.portrait(key) as usize;
        by_class[k].0 += t.est_profit;
        by_class[k].1 += t.qop.video_quality;
        by_class[k].2 += 1;
    }
    let n = cases.len() as f64;
    out.mean_est_profit /= n;
    out.mean_quality /= n;
    out.mean_rebuffer_ratio /= n;
    let per = by_class
        .iter()
        .map(|&(p, q, k)| if k > 0 { (p / k as f64, q / k as f64) } else { (0.0, 0.0) })
        .collect();
    Ok((out, per))
}

impl UpliftSpec {
    pub fn qoe_decider(&self) -> Decider {
        Decider::rule("qoe", RulePolicy::Qoe { weights: self.qoe, safety: self.safety })
    }

    pub fn aware_decider(&self, traffic_price: f64) -> Decider {
        Decider::rule("aware", RulePolicy::SensitivityAware { traffic_price, safety: self.safety })
    }
}

/// Users, popularity-sampled feeds, per-user traces and the session config
/// shared by every arm.
pub fn build_cases(spec: &UpliftSpec, baseline: &BaselineConfig, seed: u64) -> Result<(Vec<Case>, SessionConfig)> {
    if spec.feed_len == 0 || spec.session_ms == 0 {
        return Err(Error::param("feed_len and session_ms must be > 0"));
    }
    let pop = generate_population(&spec.population, seed)?;
    let catalog = generate_catalog(&spec.catalog, seed ^ 0xca7a)?;
    let pick = WeightedAliasIndex::new(catalog.items.iter().map(|i| i.popularity_weight).collect())
        .map_err(|e| Error::input(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let mut playtime = PlaytimeModel {
        buckets: vec![DurationBucket { max_duration_s: f64::MAX, dist: PlaytimeDist::Fixed { seconds: 15.0 } }],
        items: Default::default(),
        users: Default::default(),
        alphas: [0.0, 1.0, 0.0],
    };
    let mut cases = Vec::with_capacity(pop.users.len());
    for (i, user) in pop.users.iter().enumerate() {
        let items: Vec<Item> = (0..spec.feed_len)
            .map(|_| {
                let k = pick.sample(&mut rng);
                playtime.items.insert(catalog.items[k].id, catalog.playtime[k].clone());
                catalog.items[k].clone()
            })
            .collect();
        let trace = user_trace(&pop, &spec.population, i, spec.session_ms, seed)?;
        cases.push(Case { user: user.clone(), items, trace });
    }
    Ok((cases, session_config(spec, baseline, seed, playtime)))
}

/// Full session traces of the first `users` cases under `decider`.
pub fn trace_sessions(cases: &[Case], cfg: &SessionConfig, decider: &Decider, users: usize) -> Result<Vec<SessionTrace>> {
    cases
        .iter()
        .take(users)
        .map(|c| run_session(decider, &c.user, &c.items, &c.trace, cfg))
        .collect()
}

/// [`compare_deciders_with`] on the shipped baseline.
pub fn compare_deciders(spec: &UpliftSpec, seed: u64) -> Result<UpliftComparison> {
    compare_deciders_with(spec, &BaselineConfig::shipped(), seed)
}

/// Runs both deciders on the same users, feeds, traces and swipe draws. The
/// aware decider's traffic price is the smallest (by bisection) that keeps
/// its traffic at or below the QoE decider's.
pub fn compare_deciders_with(spec: &UpliftSpec, baseline: &BaselineConfig, seed: u64) -> Result<UpliftComparison> {
    let (cases, cfg) = build_cases(spec, baseline, seed)?;
    let classes = spec.population.portraits.len();
    let key = &spec.population.portrait_key;

    let qoe = spec.qoe_decider();
    let (qoe_out, qoe_class) = run_arm(&qoe, &cases, &cfg, classes, key)?;
    let aware = |price: f64| spec.aware_decider(price);
    let budget = qoe_out.traffic_bytes;

    let mut best = run_arm(&aware(0.0), &cases, &cfg, classes, key)?;
    let mut price = 0.0;
    if best.0.traffic_bytes > budget {
        let mut hi = 1e-4;
        let mut at_hi = run_arm(&aware(hi), &cases, &cfg, classes, key)?;
        while at_hi.0.traffic_bytes > budget {
            hi *= 4.0;
            if hi > 1e6 {
                return Err(Error::Infeasible("no traffic price meets the QoE traffic".into()));
            }
            at_hi = run_arm(&aware(hi), &cases, &cfg, classes, key)?;
        }
        let mut lo = 0.0;
        for _ in 0..spec.price_iterations {
            if at_hi.0.traffic_bytes >= budget * (1.0 - spec.traffic_tolerance) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let r = run_arm(&aware(mid), &cases, &cfg, classes, key)?;
            if r.0.traffic_bytes > budget {
                lo = mid;
            } else {
                hi = mid;
                at_hi = r;
            }
        }
        best = at_hi;
        price = hi;
    }
    Ok(UpliftComparison {
        qoe: qoe_out,
        aware: best.0,
        traffic_price: price,
        per_class: qoe_class
            .into_iter()
            .zip(best.1)
            .map(|(q, a)| ClassOutcome { qoe_est_profit: q.0, aware_est_profit: a.0, qoe_quality: q.1, aware_quality: a.1 })
            .collect(),
    })
}
