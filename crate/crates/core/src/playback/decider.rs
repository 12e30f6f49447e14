//! Decision functions mapping client state to streaming actions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::device::DeviceModel;
use super::qoe::{qoe, QoeWeights};
use super::types::{Item, Ladder, NetworkClass, UserState};
use crate::error::{Error, Result};
use crate::model::{ImpactTable, QoPVector, QopMetric, SensitivityWeights};

pub const DECIDER_FORMAT_VERSION: u32 = 1;

/// Scores a QoP outcome for one user: the sensitivity-weighted ΔLT/LT of the
/// outcome against a reference QoP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstProfitModel {
    pub impacts: ImpactTable,
    pub reference: QoPVector,
}

impl EstProfitModel {
    pub fn est_profit(&self, qop: &QoPVector, sens: &SensitivityWeights) -> f64 {
        self.impacts.weighted_lt_delta(&self.reference, qop, sens).relative
    }
}

/// Observable state handed to a decider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateFeatures {
    pub buffer_s: f64,
    pub bandwidth_kbps: f64,
    pub device_score: f64,
    pub portrait: u32,
    pub sens_rebuffer: f64,
    pub sens_quality: f64,
}

impl StateFeatures {
    pub fn vector(&self) -> Vec<f64> {
        vec![
            self.bandwidth_kbps / 1000.0,
            self.buffer_s,
            self.device_score,
            self.sens_rebuffer,
            self.sens_quality,
        ]
    }

    pub const VECTOR_LEN: usize = 5;
}

/// Finite bucketing of client state: buffer × network class × portrait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBuckets {
    /// Buffer bucket upper edges in seconds, e.g. `[2, 6]` → {0–2, 2–6, >6}.
    pub buffer_edges_s: Vec<f64>,
    /// Bandwidth edges separating poor/fair/good.
    pub network_edges_kbps: [f64; 2],
    pub portrait_buckets: u32,
}

impl Default for StateBuckets {
    fn default() -> Self {
        Self {
            buffer_edges_s: vec![2.0, 6.0],
            network_edges_kbps: [1500.0, 4000.0],
            portrait_buckets: 2,
        }
    }
}

impl StateBuckets {
    pub fn network_class(&self, kbps: f64) -> NetworkClass {
        if kbps < self.network_edges_kbps[0] {
            NetworkClass::Poor
        } else if kbps < self.network_edges_kbps[1] {
            NetworkClass::Fair
        } else {
            NetworkClass::Good
        }
    }

    pub fn state_count(&self) -> u32 {
        (self.buffer_edges_s.len() as u32 + 1) * 3 * self.portrait_buckets.max(1)
    }

    /// Every feature vector maps to some state; out-of-range portraits clamp
    /// to the last bucket.
    pub fn state_of(&self, f: &StateFeatures) -> u32 {
        let buffer = self.buffer_edges_s.partition_point(|e| f.buffer_s >= *e) as u32;
        let net = self.network_class(f.bandwidth_kbps).index() as u32;
        let portrait = f.portrait.min(self.portrait_buckets.max(1) - 1);
        let nb = self.buffer_edges_s.len() as u32 + 1;
        buffer + nb * (net + 3 * portrait)
    }
}

/// Per-decision inputs beyond the raw state.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub features: StateFeatures,
    pub user: &'a UserState,
    /// Item whose rendition is being chosen.
    pub item: &'a Item,
    pub prev_quality: Option<f64>,
    pub expected_playtime_s: f64,
    pub est: &'a EstProfitModel,
    pub device: &'a DeviceModel,
    pub startup: StartupRule,
}

/// Prefix that must arrive before the first frame renders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartupRule {
    pub max_bytes: f64,
    pub max_media_s: f64,
}

impl Default for StartupRule {
    fn default() -> Self {
        Self {
            max_bytes: 200_000.0,
            max_media_s: 1.0,
        }
    }
}

impl StartupRule {
    pub fn bytes_for(&self, ladder: &Ladder) -> f64 {
        self.max_bytes
            .min(self.max_media_s * ladder.bytes_per_second())
            .min(ladder.file_bytes as f64)
    }
}

/// Download-side knobs shared by every decider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownloadControl {
    /// Items ahead of the current one to prefetch.
    pub preload_depth: usize,
    /// Byte cap per prefetched (not yet playing) item.
    pub cap_bytes: Option<f64>,
    pub prerender: bool,
}

impl Default for DownloadControl {
    fn default() -> Self {
        Self {
            preload_depth: 2,
            cap_bytes: Some(600_000.0),
            prerender: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionParams {
    pub ladder: usize,
    pub preload_depth: usize,
    pub cap_bytes: Option<f64>,
    pub prerender: bool,
    /// Set when a tabular decider had no entry for the state and the rule
    /// fallback decided instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum RulePolicy {
    Fixed { ladder: usize },
    /// Highest rendition whose bitrate fits `safety × bandwidth`.
    Throughput { safety: f64 },
    /// Maximizes the classic QoE score with fixed weights.
    Qoe { weights: QoeWeights<f64>, safety: f64 },
    /// Maximizes the user's sensitivity-weighted EstProfit of the predicted
    /// outcome minus `traffic_price` per predicted MB.
    SensitivityAware { traffic_price: f64, safety: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDecider {
    /// Weights over [`StateFeatures::vector`]; output is a target bitrate in kbps.
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearDecider {
    pub fn zeros() -> Self {
        Self {
            weights: vec![0.0; StateFeatures::VECTOR_LEN],
            bias: 0.0,
        }
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub state: u32,
    pub action: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTableDecider {
    pub buckets: StateBuckets,
    #[serde(with = "q_table_serde")]
    pub q: BTreeMap<(u32, usize), f64>,
    pub fallback: RulePolicy,
}

mod q_table_serde {
    use super::QEntry;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(q: &BTreeMap<(u32, usize), f64>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<QEntry> = q
            .iter()
            .map(|(&(state, action), &value)| QEntry { state, action, value })
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(u32, usize), f64>, D::Error> {
        let v = Vec::<QEntry>::deserialize(d)?;
        Ok(v.into_iter().map(|e| ((e.state, e.action), e.value)).collect())
    }
}

impl QTableDecider {
    pub fn new(buckets: StateBuckets, fallback: RulePolicy) -> Self {
        Self {
            buckets,
            q: BTreeMap::new(),
            fallback,
        }
    }

    pub fn value(&self, state: u32, action: usize) -> f64 {
        self.q.get(&(state, action)).copied().unwrap_or(0.0)
    }

    /// Greedy action for a visited state; lowest action index on ties.
    pub fn best_action(&self, state: u32) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (&(_, a), &v) in self.q.range((state, 0)..=(state, usize::MAX)) {
            match best {
                Some((_, bv)) if v <= bv => {}
                _ => best = Some((a, v)),
            }
        }
        best.map(|(a, _)| a)
    }

    pub fn max_value(&self, state: u32) -> f64 {
        self.q
            .range((state, 0)..=(state, usize::MAX))
            .map(|(_, v)| *v)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeciderKind {
    Rule(RulePolicy),
    Linear(LinearDecider),
    TabularQ(QTableDecider),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decider {
    pub name: String,
    pub kind: DeciderKind,
    pub download: DownloadControl,
}

/// Serialized decider parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeciderDocument {
    pub version: u32,
    pub decider: Decider,
}

impl Decider {
    pub fn rule(name: impl Into<String>, policy: RulePolicy) -> Self {
        Self {
            name: name.into(),
            kind: DeciderKind::Rule(policy),
            download: DownloadControl::default(),
        }
    }

    pub fn with_download(mut self, download: DownloadControl) -> Self {
        self.download = download;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DeciderDocument {
            version: DECIDER_FORMAT_VERSION,
            decider: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: DeciderDocument = serde_json::from_str(s)?;
        if doc.version != DECIDER_FORMAT_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "decider document version {} (expected {DECIDER_FORMAT_VERSION})",
                doc.version
            )));
        }
        Ok(doc.decider)
    }

    pub fn decide(&self, ctx: &DecisionContext<'_>) -> DecisionParams {
        let (ladder, fallback) = match &self.kind {
            DeciderKind::Rule(policy) => (rule_ladder(policy, ctx), false),
            DeciderKind::Linear(lin) => {
                let target = lin.output(&ctx.features.vector());
                (highest_fitting(&ctx.item.ladders.0, target), false)
            }
            DeciderKind::TabularQ(q) => {
                let s = q.buckets.state_of(&ctx.features);
                match q.best_action(s) {
                    Some(a) => (a.min(ctx.item.ladders.len() - 1), false),
                    None => {
                        log::debug!("q decider {}: unvisited state {s}, using fallback", self.name);
                        (rule_ladder(&q.fallback, ctx), true)
                    }
                }
            }
        };
        DecisionParams {
            ladder,
            preload_depth: self.download.preload_depth,
            cap_bytes: self.download.cap_bytes,
            prerender: self.download.prerender,
            fallback,
        }
    }
}

fn highest_fitting(ladders: &[Ladder], kbps: f64) -> usize {
    ladders
        .iter()
        .rposition(|l| l.bitrate_kbps <= kbps)
        .unwrap_or(0)
}

/// Predicted per-item outcome of playing `ladder` under the current estimate.
pub fn predict_item_qop(ladder: &Ladder, ctx: &DecisionContext<'_>, safety: f64) -> QoPVector {
    let bw = (ctx.features.bandwidth_kbps * safety).max(1e-9);
    let t = ctx.expected_playtime_s.max(1e-3);
    let download_s = ladder.bitrate_kbps * t / bw;
    let stall_s = (download_s - t - ctx.features.buffer_s).max(0.0);
    let startup_bytes = ctx.startup.bytes_for(ladder);
    let dev = ctx.device.metrics(
        ladder.bitrate_kbps,
        ctx.features.device_score,
        false,
        0,
    );
    let mut q = ctx.est.reference;
    q.rebuffer_ratio = stall_s / (t + stall_s);
    q.rebuffer_dur_per_vv_ms = stall_s * 1000.0;
    q.first_frame_ms = startup_bytes * 8.0 / bw;
    q.video_quality = ladder.quality_score;
    q.traffic_bytes = ladder.bytes_per_second() * t;
    q.cpu_pct = dev.cpu_pct;
    q.power_avg = dev.power_avg;
    q.temperature_c = dev.temperature_c;
    q.frame_drop_rate = dev.frame_drop_rate;
    q.fps = dev.fps;
    q
}

fn rule_ladder(policy: &RulePolicy, ctx: &DecisionContext<'_>) -> usize {
    let ladders = &ctx.item.ladders.0;
    match policy {
        RulePolicy::Fixed { ladder } => (*ladder).min(ladders.len() - 1),
        RulePolicy::Throughput { safety } => {
            highest_fitting(ladders, ctx.features.bandwidth_kbps * safety)
        }
        RulePolicy::Qoe { weights, safety } => argmax(ladders, |l| {
            let p = predict_item_qop(l, ctx, *safety);
            let stall_s = p.rebuffer_dur_per_vv_ms / 1000.0;
            let switch = ctx.prev_quality.map_or(0.0, |q| (l.quality_score - q).abs());
            let cost = l.bitrate_kbps / 1000.0 * ctx.expected_playtime_s;
            qoe(l.quality_score, stall_s, switch, cost, weights)
        }),
        RulePolicy::SensitivityAware {
            traffic_price,
            safety,
        } => argmax(ladders, |l| {
            let p = predict_item_qop(l, ctx, *safety);
            ctx.est.est_profit(&p, &ctx.user.qop_sens) - traffic_price * p.traffic_bytes / 1e6
        }),
    }
}

/// First index with the strictly largest score.
fn argmax(ladders: &[Ladder], mut score: impl FnMut(&Ladder) -> f64) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, l) in ladders.iter().enumerate() {
        let v = score(l);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Sensitivity of a user to the two metrics the example deciders trade off.
pub fn features_for(user: &UserState, buffer_s: f64, bandwidth_kbps: f64, portrait_key: &str) -> StateFeatures {
    StateFeatures {
        buffer_s,
        bandwidth_kbps,
        device_score: user.device_score,
        portrait: user.portrait(portrait_key),
        sens_rebuffer: user.qop_sens.weight(QopMetric::RebufferRatio),
        sens_quality: user.qop_sens.weight(QopMetric::VideoQuality),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::playback::types::LadderGroup;

    fn item() -> Item {
        Item {
            id: 1,
            duration_s: 20.0,
            ladders: LadderGroup::from_rungs(&[(800.0, 60.0), (1600.0, 75.0), (2400.0, 85.0)], 20.0)
                .unwrap(),
            popularity_weight: 1.0,
            value_score: 0.0,
        }
    }

    fn est() -> EstProfitModel {
        let impacts = ImpactTable::default().with(
            QopMetric::VideoQuality,
            0.0002,
            crate::model::Direction::HigherIsBetter,
        );
        let reference = QoPVector {
            first_feed_ms: 600.0,
            first_frame_ms: 300.0,
            rebuffer_ratio: 0.02,
            rebuffer_dur_per_vv_ms: 200.0,
            video_quality: 75.0,
            fps: 30.0,
            cpu_pct: 0.25,
            power_avg: 1.1,
            temperature_c: 36.0,
            mem_pct: 0.3,
            storage_pct: 0.4,
            ..Default::default()
        };
        EstProfitModel { impacts, reference }
    }

    fn ctx<'a>(
        user: &'a UserState,
        item: &'a Item,
        est: &'a EstProfitModel,
        dev: &'a DeviceModel,
        bw: f64,
    ) -> DecisionContext<'a> {
        DecisionContext {
            features: features_for(user, 1.0, bw, "uplift"),
            user,
            item,
            prev_quality: None,
            expected_playtime_s: 10.0,
            est,
            device: dev,
            startup: StartupRule::default(),
        }
    }

    #[test]
    fn throughput_rule_picks_highest_fitting() {
        let (u, it, e, d) = (UserState::new(1), item(), est(), DeviceModel::default());
        let dec = Decider::rule("tp", RulePolicy::Throughput { safety: 1.0 });
        assert_eq!(dec.decide(&ctx(&u, &it, &e, &d, 2000.0)).ladder, 1);
        assert_eq!(dec.decide(&ctx(&u, &it, &e, &d, 100.0)).ladder, 0);
        assert_eq!(dec.decide(&ctx(&u, &it, &e, &d, 1e9)).ladder, 2);
    }

    #[test]
    fn sensitivity_aware_follows_user_weights() {
        let (it, e, d) = (item(), est(), DeviceModel::default());
        let policy = RulePolicy::SensitivityAware { traffic_price: 0.0, safety: 1.0 };
        let dec = Decider::rule("aware", policy);
        let mut rebuf = UserState::new(1);
        rebuf.qop_sens = SensitivityWeights::uniform()
            .with(QopMetric::RebufferRatio, 20.0)
            .with(QopMetric::RebufferDurPerVvMs, 20.0)
            .with(QopMetric::VideoQuality, 0.1);
        let mut quality = UserState::new(2);
        quality.qop_sens = SensitivityWeights::uniform()
            .with(QopMetric::RebufferRatio, 0.1)
            .with(QopMetric::RebufferDurPerVvMs, 0.1)
            .with(QopMetric::VideoQuality, 20.0);
        let a = dec.decide(&ctx(&rebuf, &it, &e, &d, 1800.0)).ladder;
        let b = dec.decide(&ctx(&quality, &it, &e, &d, 1800.0)).ladder;
        assert!(a < b, "rebuffer-sensitive {a} vs quality-sensitive {b}");
    }

    #[test]
    fn q_decider_falls_back_on_unvisited_state() {
        let (u, it, e, d) = (UserState::new(1), item(), est(), DeviceModel::default());
        let mut q = QTableDecider::new(StateBuckets::default(), RulePolicy::Fixed { ladder: 0 });
        let c = ctx(&u, &it, &e, &d, 2000.0);
        let s = q.buckets.state_of(&c.features);
        q.q.insert((s, 2), 1.0);
        q.q.insert((s, 1), 0.5);
        let dec = Decider {
            name: "q".into(),
            kind: DeciderKind::TabularQ(q),
            download: DownloadControl::default(),
        };
        let p = dec.decide(&c);
        assert_eq!((p.ladder, p.fallback), (2, false));
        let p = dec.decide(&ctx(&u, &it, &e, &d, 100.0));
        assert_eq!((p.ladder, p.fallback), (0, true));
    }

    #[test]
    fn bucketing_is_total_and_in_range() {
        let b = StateBuckets::default();
        let n = b.state_count();
        for buffer in [0.0, 1.9, 2.0, 5.0, 6.0, 100.0] {
            for bw in [0.0, 1499.0, 1500.0, 3999.0, 4000.0, 1e9] {
                for portrait in [0, 1, 7] {
                    let f = StateFeatures {
                        buffer_s: buffer,
                        bandwidth_kbps: bw,
                        device_score: 0.5,
                        portrait,
                        sens_rebuffer: 1.0,
                        sens_quality: 1.0,
                    };
                    assert!(b.state_of(&f) < n);
                }
            }
        }
    }

    #[test]
    fn document_roundtrip_and_version_check() {
        let mut q = QTableDecider::new(StateBuckets::default(), RulePolicy::Throughput { safety: 0.8 });
        q.q.insert((3, 1), 0.25);
        let dec = Decider {
            name: "q".into(),
            kind: DeciderKind::TabularQ(q),
            download: DownloadControl::default(),
        };
        let json = dec.to_json().unwrap();
        assert!(json.contains("\"version\": 1"));
        assert_eq!(Decider::from_json(&json).unwrap(), dec);
        let bumped = json.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(Decider::from_json(&bumped), Err(Error::SchemaMismatch(_))));
    }
}
