//! Ladder-group rewards, cost components and the windowed ladder update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{profit, EconomyParams, ImpactTable, QoPVector, SensitivityWeights};
use crate::playback::LadderGroup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderPreset {
    Fast,
    Medium,
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceType {
    Cpu,
    Fpga,
    Gpu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalcEntry {
    pub preset: EncoderPreset,
    pub resource: ResourceType,
    /// Quota units per second of content per rendition.
    pub cost_per_s: f64,
}

/// Encoder cost table keyed by (preset, resource).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalcTable(pub Vec<CalcEntry>);

impl CalcTable {
    /// Synthetic table: slower presets cost more, FPGA is cheapest, GPU next.
    pub fn shipped() -> Self {
        let mut v = Vec::new();
        for (preset, base) in
            [(EncoderPreset::Fast, 1.0), (EncoderPreset::Medium, 2.0), (EncoderPreset::Slow, 4.0)]
        {
            for (resource, f) in
                [(ResourceType::Cpu, 1.0), (ResourceType::Fpga, 0.4), (ResourceType::Gpu, 0.55)]
            {
                v.push(CalcEntry { preset, resource, cost_per_s: base * f });
            }
        }
        Self(v)
    }

    pub fn lookup(&self, preset: EncoderPreset, resource: ResourceType) -> Result<f64> {
        self.0
            .iter()
            .find(|e| e.preset == preset && e.resource == resource)
            .map(|e| e.cost_per_s)
            .ok_or_else(|| {
                Error::Config(format!("calc table has no entry for ({preset:?}, {resource:?})"))
            })
    }
}

/// A ladder group together with how it would be encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderCandidate {
    pub group: LadderGroup,
    pub preset: EncoderPreset,
    pub resource: ResourceType,
}

impl LadderCandidate {
    pub fn mean_bitrate(&self) -> f64 {
        self.group.iter().map(|l| l.bitrate_kbps).sum::<f64>() / self.group.len().max(1) as f64
    }
}

/// Predicted consumption of one item over the next window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionForecast {
    pub plays: f64,
    pub mean_watch_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostComponents {
    pub bw_bytes: f64,
    /// Quota units.
    pub calc: f64,
    pub store_bytes: f64,
}

impl CostComponents {
    pub fn minus(&self, o: &CostComponents) -> CostComponents {
        CostComponents {
            bw_bytes: self.bw_bytes - o.bw_bytes,
            calc: self.calc - o.calc,
            store_bytes: self.store_bytes - o.store_bytes,
        }
    }
}

/// Currency per unit of each cost component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostPrices {
    pub bw_per_gb: f64,
    pub calc_per_unit: f64,
    pub store_per_gb: f64,
}

impl CostPrices {
    pub fn money(&self, c: &CostComponents) -> f64 {
        c.bw_bytes / 1e9 * self.bw_per_gb + c.calc * self.calc_per_unit + c.store_bytes / 1e9 * self.store_per_gb
    }
}

impl Default for CostPrices {
    fn default() -> Self {
        Self { bw_per_gb: 0.02, calc_per_unit: 0.0005, store_per_gb: 0.005 }
    }
}

/// `selection[l]` is the predicted share of plays served by rendition `l`.
pub fn cost_components(
    candidate: &LadderCandidate,
    selection: &[f64],
    forecast: &ConsumptionForecast,
    calc_table: &CalcTable,
) -> Result<CostComponents> {
    if !(forecast.plays >= 0.0) || !(forecast.mean_watch_s >= 0.0) || !(forecast.duration_s >= 0.0) {
        return Err(Error::param("forecast plays, watch time and duration must be >= 0"));
    }
    if selection.len() != candidate.group.len() {
        return Err(Error::input("selection shares must have one entry per rendition"));
    }
    let bw_bytes = candidate
        .group
        .iter()
        .zip(selection)
        .map(|(l, p)| p * forecast.plays * l.bytes_per_second() * forecast.mean_watch_s)
        .sum();
    let per_s = calc_table.lookup(candidate.preset, candidate.resource)?;
    let calc = per_s * forecast.duration_s * candidate.group.len() as f64;
    let store_bytes = candidate.group.iter().map(|l| l.bytes_per_second() * forecast.duration_s).sum();
    Ok(CostComponents { bw_bytes, calc, store_bytes })
}

/// Typical viewer in one consumer cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub sensitivities: SensitivityWeights,
    pub bandwidth_kbps: f64,
    /// Throughput fraction a client is willing to commit to video.
    pub safety: f64,
    pub startup_s: f64,
}

/// Rendition a cluster's clients would pick: the highest bitrate within
/// `safety·bandwidth`, or the lowest when none fits.
pub fn cluster_choice(group: &LadderGroup, profile: &ClusterProfile) -> usize {
    let budget = profile.safety * profile.bandwidth_kbps;
    group
        .iter()
        .enumerate()
        .filter(|(_, l)| l.bitrate_kbps <= budget)
        .max_by(|a, b| a.1.bitrate_kbps.total_cmp(&b.1.bitrate_kbps))
        .or_else(|| group.iter().enumerate().min_by(|a, b| a.1.bitrate_kbps.total_cmp(&b.1.bitrate_kbps)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Predicted per-play QoP of `group` for a cluster. Metrics the ladder does
/// not move are copied from `base`.
pub fn predict_cluster_qop(
    group: &LadderGroup,
    profile: &ClusterProfile,
    watch_s: f64,
    base: &QoPVector,
) -> QoPVector {
    let l = &group.0[cluster_choice(group, profile)];
    let bw = profile.bandwidth_kbps.max(1e-9);
    let stall = (l.bitrate_kbps * watch_s / bw - watch_s).max(0.0);
    let mut q = *base;
    q.first_frame_ms = profile.startup_s * l.bitrate_kbps / bw * 1000.0;
    q.rebuffer_dur_per_vv_ms = stall * 1000.0;
    q.rebuffer_ratio = if stall > 0.0 { stall / (stall + watch_s) } else { 0.0 };
    q.traffic_bytes = l.bytes_per_second() * watch_s;
    q.video_quality = l.quality_score;
    q
}

/// Everything `reward` needs beyond the candidate and histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardContext {
    pub impacts: ImpactTable,
    pub economy: EconomyParams<f64>,
    pub clusters: Vec<ClusterProfile>,
    pub forecast: ConsumptionForecast,
    pub prices: CostPrices,
    pub calc_table: CalcTable,
    /// QoP record the per-cluster predictions are completed from.
    pub base_qop: QoPVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub experience_value: f64,
    pub delta_cost: CostComponents,
    pub delta_cost_money: f64,
    pub reward: f64,
}

/// `Σ_g h_g · value_g − money(Δcost)`, with `value_g` the audience-scaled
/// profit of cluster g's LT change.
pub fn reward_from_parts(
    histogram: &[f64],
    cluster_value: &[f64],
    delta_cost: &CostComponents,
    prices: &CostPrices,
) -> f64 {
    let value: f64 = histogram.iter().zip(cluster_value).map(|(h, v)| h * v).sum();
    value - prices.money(delta_cost)
}

fn validate_histogram(h: &[f64], k: usize) -> Result<()> {
    if h.len() != k {
        return Err(Error::input(format!("histogram has {} bins for {k} clusters", h.len())));
    }
    if h.iter().any(|v| !(*v >= 0.0)) || (h.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::input("cluster histogram must be nonnegative and sum to 1"));
    }
    Ok(())
}

/// Predicted selection share per rendition under the histogram.
pub fn selection_shares(group: &LadderGroup, clusters: &[ClusterProfile], histogram: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; group.len()];
    for (c, h) in clusters.iter().zip(histogram) {
        p[cluster_choice(group, c)] += h;
    }
    p
}

/// Reward of switching an item from `current` to `candidate`.
pub fn reward(
    ctx: &RewardContext,
    candidate: &LadderCandidate,
    current: &LadderCandidate,
    histogram: &[f64],
) -> Result<RewardBreakdown> {
    validate_histogram(histogram, ctx.clusters.len())?;
    let watch = ctx.forecast.mean_watch_s;
    let per_play_profit: Vec<f64> = ctx
        .clusters
        .iter()
        .map(|c| {
            let before = predict_cluster_qop(&current.group, c, watch, &ctx.base_qop);
            let after = predict_cluster_qop(&candidate.group, c, watch, &ctx.base_qop);
            let rel = ctx.impacts.weighted_lt_delta(&before, &after, &c.sensitivities).relative;
            profit(rel * ctx.economy.lt_base, 0.0, 0.0, &ctx.economy).profit * ctx.forecast.plays
        })
        .collect();
    let cost_new = cost_components(
        candidate,
        &selection_shares(&candidate.group, &ctx.clusters, histogram),
        &ctx.forecast,
        &ctx.calc_table,
    )?;
    let cost_old = cost_components(
        current,
        &selection_shares(&current.group, &ctx.clusters, histogram),
        &ctx.forecast,
        &ctx.calc_table,
    )?;
    let delta_cost = cost_new.minus(&cost_old);
    let experience_value: f64 = histogram.iter().zip(&per_play_profit).map(|(h, v)| h * v).sum();
    let reward = reward_from_parts(histogram, &per_play_profit, &delta_cost, &ctx.prices);
    Ok(RewardBreakdown {
        experience_value,
        delta_cost,
        delta_cost_money: ctx.prices.money(&delta_cost),
        reward,
    })
}

/// Observed state of one consumption window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub t: usize,
    pub ug: Vec<f64>,
    pub qop: QoPVector,
    pub profit: f64,
    pub qd_prob: f64,
    pub fd_prob: f64,
    pub ladder: LadderCandidate,
}

impl WindowRecord {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.qd_prob) || !unit(self.fd_prob) {
            return Err(Error::input(format!("window {}: preference fractions outside [0,1]", self.t)));
        }
        validate_histogram(&self.ug, self.ug.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeDirection {
    Quality,
    Fluency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LadderUpdateConfig {
    pub score_th: f64,
    pub smoothing: f64,
    pub vv_window: u64,
}

impl Default for LadderUpdateConfig {
    fn default() -> Self {
        Self { score_th: 0.5, smoothing: 0.3, vv_window: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderUpdate {
    pub ladder: LadderCandidate,
    pub withdrawn: bool,
    /// Set when no candidate survived the direction filter.
    pub no_candidates: bool,
    pub direction: Option<OptimizeDirection>,
    pub ug_forecast: Vec<f64>,
    pub qd_forecast: f64,
    pub fd_forecast: f64,
    /// `(candidate index, reward)` for every evaluated candidate.
    pub rewards: Vec<(usize, f64)>,
}

fn smooth(values: impl Iterator<Item = f64>, alpha: f64) -> f64 {
    let mut level: Option<f64> = None;
    for v in values {
        level = Some(match level {
            None => v,
            Some(l) => alpha * v + (1.0 - alpha) * l,
        });
    }
    level.unwrap_or(0.0)
}

/// Chooses the ladder for the next window.
///
/// Items scoring below `score_th` keep their current ladder. Otherwise the
/// cluster histogram and the quality/fluency preference are forecast by
/// exponential smoothing, the candidates are filtered to those moving in the
/// preferred direction (higher mean quality, or lower mean bitrate), and the
/// highest-reward candidate wins; ties go to the earlier candidate.
pub fn update_ladder(
    history: &[WindowRecord],
    value_score: f64,
    candidates: &[LadderCandidate],
    ctx: &RewardContext,
    cfg: &LadderUpdateConfig,
) -> Result<LadderUpdate> {
    let last = history.last().ok_or_else(|| Error::param("window history is empty"))?;
    if candidates.is_empty() {
        return Err(Error::param("candidate parameter space is empty"));
    }
    if !(cfg.smoothing > 0.0 && cfg.smoothing <= 1.0) {
        return Err(Error::param("smoothing must be in (0, 1]"));
    }
    for w in history {
        w.validate()?;
    }
    let current = &last.ladder;
    let keep = |withdrawn: bool, no_candidates: bool| LadderUpdate {
        ladder: current.clone(),
        withdrawn,
        no_candidates,
        direction: None,
        ug_forecast: last.ug.clone(),
        qd_forecast: last.qd_prob,
        fd_forecast: last.fd_prob,
        rewards: Vec::new(),
    };
    if value_score < cfg.score_th {
        return Ok(keep(true, false));
    }

    let k = last.ug.len();
    let mut ug: Vec<f64> = (0..k)
        .map(|g| smooth(history.iter().filter(|w| w.ug.len() == k).map(|w| w.ug[g]), cfg.smoothing))
        .collect();
    let total: f64 = ug.iter().sum();
    if total > 0.0 {
        ug.iter_mut().for_each(|v| *v /= total);
    }
    let qd = smooth(history.iter().map(|w| w.qd_prob), cfg.smoothing);
    let fd = smooth(history.iter().map(|w| w.fd_prob), cfg.smoothing);
    let direction = if qd > fd { OptimizeDirection::Quality } else { OptimizeDirection::Fluency };

    let cur_q = current.group.mean_quality();
    let cur_b = current.mean_bitrate();
    let admissible: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| match direction {
            OptimizeDirection::Quality => c.group.mean_quality() >= cur_q,
            OptimizeDirection::Fluency => c.mean_bitrate() <= cur_b,
        })
        .map(|(i, _)| i)
        .collect();
    if admissible.is_empty() {
        log::warn!("no ladder candidate in the {direction:?} direction; keeping the current ladder");
        let mut u = keep(false, true);
        u.direction = Some(direction);
        return Ok(u);
    }

    let mut rewards = Vec::with_capacity(admissible.len());
    for &i in &admissible {
        rewards.push((i, reward(ctx, &candidates[i], current, &ug)?.reward));
    }
    let mut best = rewards[0];
    for r in &rewards[1..] {
        if r.1 > best.1 {
            best = *r;
        }
    }
    Ok(LadderUpdate {
        ladder: candidates[best.0].clone(),
        withdrawn: false,
        no_candidates: false,
        direction: Some(direction),
        ug_forecast: ug,
        qd_forecast: qd,
        fd_forecast: fd,
        rewards,
    })
}

/// Candidate groups obtained by scaling every rung of `base` and encoding
/// with each preset; slower presets add a fixed quality bonus.
pub fn candidate_space(
    base_rungs: &[(f64, f64)],
    duration_s: f64,
    bitrate_scales: &[f64],
    presets: &[EncoderPreset],
    resource: ResourceType,
) -> Result<Vec<LadderCandidate>> {
    let mut out = Vec::new();
    for &s in bitrate_scales {
        for &preset in presets {
            let bonus = match preset {
                EncoderPreset::Fast => 0.0,
                EncoderPreset::Medium => 2.0,
                EncoderPreset::Slow => 4.0,
            };
            let rungs: Vec<(f64, f64)> = base_rungs
                .iter()
                .map(|&(b, q)| {
                    // quality moves ~10 points per doubling of bitrate
                    let q2 = q + 10.0 * s.log2() + bonus;
                    (b * s, q2.clamp(0.0, 100.0))
                })
                .collect();
            out.push(LadderCandidate {
                group: LadderGroup::from_rungs(&rungs, duration_s)?,
                preset,
                resource,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BaselineConfig, Direction, QopMetric};

    fn candidate(rungs: &[(f64, f64)]) -> LadderCandidate {
        LadderCandidate {
            group: LadderGroup::from_rungs(rungs, 60.0).unwrap(),
            preset: EncoderPreset::Medium,
            resource: ResourceType::Cpu,
        }
    }

    fn profile(bw: f64, sens_q: f64, sens_r: f64) -> ClusterProfile {
        ClusterProfile {
            sensitivities: SensitivityWeights::uniform()
                .with(QopMetric::VideoQuality, sens_q)
                .with(QopMetric::RebufferRatio, sens_r)
                .with(QopMetric::RebufferDurPerVvMs, sens_r),
            bandwidth_kbps: bw,
            safety: 0.8,
            startup_s: 1.0,
        }
    }

    fn ctx(clusters: Vec<ClusterProfile>) -> RewardContext {
        let base = BaselineConfig::shipped();
        RewardContext {
            impacts: base.impacts.with(QopMetric::VideoQuality, 0.0005, Direction::HigherIsBetter),
            economy: base.economy,
            clusters,
            forecast: ConsumptionForecast { plays: 10_000.0, mean_watch_s: 30.0, duration_s: 60.0 },
            prices: CostPrices::default(),
            calc_table: CalcTable::shipped(),
            base_qop: QoPVector { first_feed_ms: 800.0, fps: 30.0, ..Default::default() },
        }
    }

    fn window(t: usize, ladder: &LadderCandidate, qd: f64, fd: f64) -> WindowRecord {
        WindowRecord {
            t,
            ug: vec![0.5, 0.5],
            qop: QoPVector::default(),
            profit: 0.0,
            qd_prob: qd,
            fd_prob: fd,
            ladder: ladder.clone(),
        }
    }

    #[test]
    fn store_unit_conversion() {
        let c = candidate(&[(1000.0, 60.0)]);
        let f = ConsumptionForecast { plays: 0.0, mean_watch_s: 20.0, duration_s: 60.0 };
        let cc = cost_components(&c, &[1.0], &f, &CalcTable::shipped()).unwrap();
        assert_eq!(cc.store_bytes, 7_500_000.0);
        assert_eq!(cc.bw_bytes, 0.0);
        assert_eq!(cc.calc, 2.0 * 60.0);
    }

    #[test]
    fn bw_weighted_by_selection() {
        let c = candidate(&[(1000.0, 60.0), (3000.0, 80.0)]);
        let f = ConsumptionForecast { plays: 100.0, mean_watch_s: 10.0, duration_s: 60.0 };
        let cc = cost_components(&c, &[0.7, 0.3], &f, &CalcTable::shipped()).unwrap();
        let oracle = 100.0 * 10.0 * (0.7 * 125_000.0 + 0.3 * 375_000.0);
        assert!((cc.bw_bytes - oracle).abs() < 1e-6);
    }

    #[test]
    fn missing_calc_entry_names_pair() {
        let table = CalcTable(vec![]);
        let err = table.lookup(EncoderPreset::Slow, ResourceType::Gpu).unwrap_err().to_string();
        assert!(err.contains("Slow") && err.contains("Gpu"), "{err}");
    }

    #[test]
    fn identical_candidate_has_zero_reward() {
        let c = candidate(&[(800.0, 60.0), (2000.0, 75.0)]);
        let cx = ctx(vec![profile(3000.0, 1.0, 1.0), profile(1200.0, 1.0, 1.0)]);
        let r = reward(&cx, &c, &c, &[0.4, 0.6]).unwrap();
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn cheaper_ladder_pays_when_quality_barely_matters() {
        let cur = candidate(&[(800.0, 60.0), (3000.0, 80.0)]);
        let low = candidate(&[(800.0, 60.0), (2000.0, 74.0)]);
        let cx = ctx(vec![profile(10_000.0, 0.01, 1.0), profile(1200.0, 0.01, 1.0)]);
        let r = reward(&cx, &low, &cur, &[0.5, 0.5]).unwrap();
        assert!(r.delta_cost.bw_bytes < 0.0);
        assert!(r.reward > 0.0, "{r:?}");
    }

    #[test]
    fn degenerate_histogram_equals_single_cluster() {
        let cur = candidate(&[(800.0, 60.0), (3000.0, 80.0)]);
        let cand = candidate(&[(600.0, 55.0), (4000.0, 85.0)]);
        let a = profile(5000.0, 2.0, 0.5);
        let b = profile(900.0, 0.5, 2.0);
        let two = reward(&ctx(vec![a.clone(), b]), &cand, &cur, &[1.0, 0.0]).unwrap();
        let one = reward(&ctx(vec![a]), &cand, &cur, &[1.0]).unwrap();
        assert!((two.reward - one.reward).abs() < 1e-9);
    }

    #[test]
    fn reward_nonincreasing_in_each_cost() {
        let prices = CostPrices::default();
        let base = CostComponents { bw_bytes: 1e9, calc: 10.0, store_bytes: 1e8 };
        let r0 = reward_from_parts(&[0.3, 0.7], &[5.0, -1.0], &base, &prices);
        for bump in [
            CostComponents { bw_bytes: 1e6, ..Default::default() },
            CostComponents { calc: 1.0, ..Default::default() },
            CostComponents { store_bytes: 1e6, ..Default::default() },
        ] {
            let more = CostComponents {
                bw_bytes: base.bw_bytes + bump.bw_bytes,
                calc: base.calc + bump.calc,
                store_bytes: base.store_bytes + bump.store_bytes,
            };
            assert!(reward_from_parts(&[0.3, 0.7], &[5.0, -1.0], &more, &prices) <= r0);
        }
    }

    #[test]
    fn withdrawal_keeps_ladder_identically() {
        let cur = candidate(&[(800.0, 60.0), (3000.0, 80.0)]);
        let cands = candidate_space(&[(800.0, 60.0), (3000.0, 80.0)], 60.0, &[0.5, 1.0, 2.0],
            &[EncoderPreset::Fast], ResourceType::Cpu).unwrap();
        let cx = ctx(vec![profile(5000.0, 1.0, 1.0), profile(1000.0, 1.0, 1.0)]);
        let hist = vec![window(0, &cur, 0.9, 0.1)];
        let u = update_ladder(&hist, 0.2, &cands, &cx, &LadderUpdateConfig::default()).unwrap();
        assert!(u.withdrawn);
        assert_eq!(u.ladder, cur);
    }

    #[test]
    fn argmax_matches_exhaustive_rewards() {
        let cur = candidate(&[(800.0, 60.0), (3000.0, 80.0)]);
        let cands = vec![
            candidate(&[(800.0, 60.0), (3000.0, 80.0)]),
            candidate(&[(1000.0, 66.0), (4000.0, 86.0)]),
            candidate(&[(1200.0, 70.0), (6000.0, 92.0)]),
        ];
        let cx = ctx(vec![profile(8000.0, 3.0, 0.5), profile(2000.0, 1.0, 1.0)]);
        let hist = vec![window(0, &cur, 0.8, 0.2), window(1, &cur, 0.7, 0.3)];
        let u = update_ladder(&hist, 0.9, &cands, &cx, &LadderUpdateConfig::default()).unwrap();
        assert_eq!(u.direction, Some(OptimizeDirection::Quality));
        let oracle: Vec<f64> = cands.iter().map(|c| reward(&cx, c, &cur, &u.ug_forecast).unwrap().reward).collect();
        let mut best = 0;
        for i in 1..3 {
            if oracle[i] > oracle[best] {
                best = i;
            }
        }
        assert_eq!(u.ladder, cands[best]);
    }

    #[test]
    fn stationary_history_is_a_fixed_point() {
        let base = [(800.0, 60.0), (3000.0, 80.0)];
        let cands = candidate_space(&base, 60.0, &[0.5, 0.75, 1.0, 1.5], &[EncoderPreset::Fast], ResourceType::Cpu)
            .unwrap();
        let cx = ctx(vec![profile(4000.0, 1.0, 1.0), profile(1500.0, 1.0, 1.0)]);
        let mut ladder = cands[2].clone();
        let mut hist = vec![window(0, &ladder, 0.3, 0.7)];
        let mut seen = Vec::new();
        for t in 1..6 {
            let u = update_ladder(&hist, 1.0, &cands, &cx, &LadderUpdateConfig::default()).unwrap();
            ladder = u.ladder.clone();
            seen.push(ladder.clone());
            hist.push(window(t, &ladder, 0.3, 0.7));
        }
        // once the fluency walk reaches the cheapest rung it stays there
        assert_eq!(seen[seen.len() - 1], seen[seen.len() - 2]);
    }

    #[test]
    fn empty_direction_set_keeps_ladder_flagged() {
        let cur = candidate(&[(800.0, 60.0), (3000.0, 80.0)]);
        let cands = vec![candidate(&[(400.0, 50.0), (1000.0, 62.0)])];
        let cx = ctx(vec![profile(4000.0, 1.0, 1.0)]);
        let mut w = window(0, &cur, 0.9, 0.1);
        w.ug = vec![1.0];
        let u = update_ladder(&[w], 1.0, &cands, &cx, &LadderUpdateConfig::default()).unwrap();
        assert!(u.no_candidates);
        assert_eq!(u.ladder, cur);
    }
}
