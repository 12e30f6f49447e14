//! Fixed-step fluid-flow session simulator.
//!
//! Each slot: read the slot bandwidth, let the decider choose renditions for
//! any item entering the download window, pour bytes into the current item
//! and then into prefetched items, and advance playback.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decider::{
    features_for, DecisionContext, DecisionParams, Decider, EstProfitModel, StartupRule,
    StateFeatures,
};
use super::device::DeviceModel;
use super::network::NetworkTrace;
use super::playtime::{estimate_playtime, PlaytimeModel};
use super::types::{Item, UserState};
use crate::error::{Error, Result};
use crate::model::QoPVector;

/// Bytes per second delivered by one kbps.
const BYTES_PER_KBPS_S: f64 = 125.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub clock_step_ms: u64,
    pub seed: u64,
    pub startup: StartupRule,
    /// Continuous waiting (startup or stall) after which the user swipes away.
    pub abandon_after_s: f64,
    pub playtime: PlaytimeModel,
    pub device: DeviceModel,
    pub est: EstProfitModel,
    /// Portrait used as the decider's state feature.
    pub portrait_key: String,
    /// Weight of the newest slot in the bandwidth estimate.
    pub bandwidth_smoothing: f64,
    /// Hard cap on session download volume; off by default.
    #[serde(default)]
    pub global_traffic_cap_bytes: Option<f64>,
    #[serde(default = "default_true")]
    pub record_slots: bool,
}

fn default_true() -> bool {
    true
}

impl SessionConfig {
    pub fn new(playtime: PlaytimeModel, est: EstProfitModel) -> Self {
        Self {
            clock_step_ms: 100,
            seed: 0,
            startup: StartupRule::default(),
            abandon_after_s: 8.0,
            playtime,
            device: DeviceModel::default(),
            est,
            portrait_key: "uplift".into(),
            bandwidth_smoothing: 0.3,
            global_traffic_cap_bytes: None,
            record_slots: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clock_step_ms == 0 {
            return Err(Error::param("clock_step_ms must be > 0"));
        }
        if !(self.abandon_after_s > 0.0) {
            return Err(Error::param("abandon_after_s must be > 0"));
        }
        if !(self.bandwidth_smoothing > 0.0 && self.bandwidth_smoothing <= 1.0) {
            return Err(Error::param("bandwidth_smoothing must be in (0,1]"));
        }
        if matches!(self.global_traffic_cap_bytes, Some(c) if !(c >= 0.0)) {
            return Err(Error::param("global_traffic_cap_bytes must be >= 0"));
        }
        self.playtime.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub t_ms: u64,
    /// Position of the current item in the feed.
    pub position: usize,
    pub bandwidth_kbps: f64,
    pub buffer_before_s: f64,
    /// Media seconds of the current item that arrived in this slot.
    pub dl_playable_s: f64,
    pub played_s: f64,
    pub buffer_after_s: f64,
    /// Bytes received across all items in this slot.
    pub downloaded_bytes: f64,
    pub rebuffering: bool,
    pub first_frame: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t_ms: u64,
    pub position: usize,
    pub item_id: u64,
    pub features: StateFeatures,
    pub params: DecisionParams,
}

/// Outcome of one item that became current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub position: usize,
    pub item_id: u64,
    pub ladder: usize,
    pub bitrate_kbps: f64,
    pub quality_score: f64,
    pub target_playtime_s: f64,
    pub played_s: f64,
    pub rebuffer_s: f64,
    pub stall_events: u32,
    /// `None` when the first frame never rendered.
    pub first_frame_ms: Option<f64>,
    /// Time spent waiting for the first frame (equals `first_frame_ms` when
    /// it rendered, else the censored wait).
    pub startup_wait_ms: f64,
    pub bytes: f64,
    pub abandoned: bool,
    pub qop: QoPVector,
}

/// One `(s, a, r, s')` tuple per viewed item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub state: StateFeatures,
    pub action: usize,
    pub reward: f64,
    pub next_state: Option<StateFeatures>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub user_id: u64,
    pub decider: String,
    pub slots: Vec<SlotRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub items: Vec<ItemRecord>,
    /// Bytes received per feed position, including prefetched items that
    /// were never viewed.
    pub bytes_per_position: Vec<f64>,
    pub episodes: Vec<Episode>,
    pub elapsed_ms: u64,
    /// Set when the network trace ran out before the feed ended.
    pub truncated: bool,
    pub qop: QoPVector,
    pub est_profit: f64,
}

impl SessionTrace {
    pub fn traffic_bytes(&self) -> f64 {
        self.bytes_per_position.iter().sum()
    }
}

#[derive(Debug, Clone, Default)]
struct Slot {
    decision: Option<(DecisionParams, StateFeatures)>,
    bytes: f64,
}

struct Current {
    pos: usize,
    started: bool,
    became_current_ms: u64,
    first_frame_ms: Option<f64>,
    wait_s: f64,
    played_s: f64,
    rebuffer_s: f64,
    stall_events: u32,
    stalled: bool,
    target_s: f64,
}

/// Deterministic per-(seed, user, position) stream for swipe sampling.
fn swipe_rng(seed: u64, user: u64, position: usize) -> ChaCha8Rng {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [user, position as u64] {
        h = (h ^ v).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 31;
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Wall time to play `r` media seconds from buffer `b0` while media arrives
/// at `a` seconds per second.
fn finish_time(b0: f64, a: f64, r: f64) -> f64 {
    if a >= 1.0 || b0 >= r {
        return r;
    }
    let drained = b0 / (1.0 - a);
    if drained >= r {
        r
    } else {
        drained + (r - drained) / a
    }
}

fn playable_s(item: &Item, ladder: usize, bytes: f64) -> f64 {
    let l = &item.ladders.0[ladder];
    (bytes / l.bytes_per_second()).min(item.duration_s)
}

/// Runs one feed session. Sessions share no state, so callers may run many
/// in parallel.
pub fn run_session(
    decider: &Decider,
    user: &UserState,
    items: &[Item],
    net: &NetworkTrace,
    cfg: &SessionConfig,
) -> Result<SessionTrace> {
    cfg.validate()?;
    user.validate()?;
    for it in items {
        it.validate()?;
    }
    let mut expected = Vec::with_capacity(items.len());
    for it in items {
        expected.push(estimate_playtime(user, it, &cfg.playtime)?);
    }

    let dt_ms = cfg.clock_step_ms;
    let dt = dt_ms as f64 / 1000.0;
    let mut slots_state = vec![Slot::default(); items.len()];
    let mut trace = SessionTrace {
        user_id: user.id,
        decider: decider.name.clone(),
        slots: Vec::new(),
        decisions: Vec::new(),
        items: Vec::new(),
        bytes_per_position: vec![0.0; items.len()],
        episodes: Vec::new(),
        elapsed_ms: 0,
        truncated: false,
        qop: cfg.est.reference,
        est_profit: 0.0,
    };
    if items.is_empty() {
        return Ok(trace);
    }

    let mut bw_est = net.bandwidth_at(0).unwrap_or(0.0);
    let mut total_bytes = 0.0;
    let mut t_ms: u64 = 0;

    let decide = |pos: usize,
                  t_ms: u64,
                  buffer_s: f64,
                  bw_est: f64,
                  prev_quality: Option<f64>,
                  slots_state: &mut Vec<Slot>,
                  trace: &mut SessionTrace| {
        if slots_state[pos].decision.is_some() {
            return;
        }
        let features = features_for(user, buffer_s, bw_est, &cfg.portrait_key);
        let ctx = DecisionContext {
            features,
            user,
            item: &items[pos],
            prev_quality,
            expected_playtime_s: expected[pos].mean_s,
            est: &cfg.est,
            device: &cfg.device,
            startup: cfg.startup,
        };
        let params = decider.decide(&ctx);
        slots_state[pos].decision = Some((params, features));
        trace.decisions.push(DecisionRecord {
            t_ms,
            position: pos,
            item_id: items[pos].id,
            features,
            params,
        });
    };

    // The first item is decided before the session opens so the initial
    // buffer can be laid down in its rendition.
    decide(0, 0, user.buffer_s, bw_est, None, &mut slots_state, &mut trace);
    {
        let (p, _) = slots_state[0].decision.expect("decided");
        let l = &items[0].ladders.0[p.ladder];
        slots_state[0].bytes =
            (user.buffer_s * l.bytes_per_second()).min(l.file_bytes as f64);
    }

    let mut cur = begin_item(0, 0, user, items, &slots_state, cfg, &expected);

    loop {
        let Some(bw) = net.bandwidth_at(t_ms) else {
            trace.truncated = true;
            break;
        };
        let pos = cur.pos;
        let (params, _) = slots_state[pos].decision.expect("current item decided");
        let cur_ladder = &items[pos].ladders.0[params.ladder];
        let buffer_before =
            playable_s(&items[pos], params.ladder, slots_state[pos].bytes) - cur.played_s;
        let last = (pos + params.preload_depth).min(items.len() - 1);
        for k in pos + 1..=last {
            decide(k, t_ms, buffer_before, bw_est, Some(cur_ladder.quality_score), &mut slots_state, &mut trace);
        }

        // Download: current item first, then the prefetch window in order.
        let mut budget = bw * BYTES_PER_KBPS_S * dt;
        if let Some(cap) = cfg.global_traffic_cap_bytes {
            budget = budget.min((cap - total_bytes).max(0.0));
        }
        let mut slot_bytes = 0.0;
        for k in pos..=last {
            if !(budget > 0.0) {
                break;
            }
            let (p, _) = slots_state[k].decision.expect("window decided");
            let file = items[k].ladders.0[p.ladder].file_bytes as f64;
            let limit = if k == pos {
                file
            } else {
                p.cap_bytes.map_or(file, |c| c.min(file))
            };
            let take = (limit - slots_state[k].bytes).max(0.0).min(budget);
            if take > 0.0 {
                slots_state[k].bytes += take;
                trace.bytes_per_position[k] += take;
                budget -= take;
                slot_bytes += take;
            }
        }
        total_bytes += slot_bytes;

        let avail = playable_s(&items[pos], params.ladder, slots_state[pos].bytes) - cur.played_s;
        let dl_playable = avail - buffer_before;
        let mut played = 0.0;
        let mut rebuffering = false;
        let mut first_frame = false;
        if cur.started {
            let remaining = (cur.target_s - cur.played_s).max(0.0);
            let want = dt.min(remaining);
            let avail = avail.max(0.0);
            let short = if avail + 1e-12 < want {
                played = avail;
                dt - avail
            } else {
                played = want;
                // Finishing inside the slot can still stall while the tail
                // trickles in.
                finish_time(buffer_before.max(0.0), dl_playable / dt, want) - want
            };
            if short > 1e-12 {
                rebuffering = true;
                cur.rebuffer_s += short;
                cur.wait_s += short;
                if !cur.stalled {
                    cur.stall_events += 1;
                }
                cur.stalled = true;
            } else {
                cur.stalled = false;
                cur.wait_s = 0.0;
            }
            cur.played_s += played;
        } else if slots_state[pos].bytes >= cfg.startup.bytes_for(cur_ladder) {
            cur.started = true;
            first_frame = true;
            let ff = (t_ms + dt_ms - cur.became_current_ms) as f64;
            cur.first_frame_ms = Some(ff);
        } else {
            cur.wait_s += dt;
        }
        let buffer_after = buffer_before + dl_playable - played;
        if cfg.record_slots {
            trace.slots.push(SlotRecord {
                t_ms,
                position: pos,
                bandwidth_kbps: bw,
                buffer_before_s: buffer_before,
                dl_playable_s: dl_playable,
                played_s: played,
                buffer_after_s: buffer_after,
                downloaded_bytes: slot_bytes,
                rebuffering,
                first_frame,
            });
        }

        let a = cfg.bandwidth_smoothing;
        bw_est = if bw.is_finite() { a * bw + (1.0 - a) * bw_est } else { bw };
        t_ms += dt_ms;

        let finished = cur.started && cur.played_s >= cur.target_s - 1e-9;
        let abandoned = !finished && cur.wait_s >= cfg.abandon_after_s - 1e-9;
        if finished || abandoned {
            finish_item(&cur, abandoned, t_ms, user, items, &slots_state, cfg, &mut trace);
            let prev_quality = Some(cur_ladder.quality_score);
            let next = pos + 1;
            if next >= items.len() {
                break;
            }
            decide(next, t_ms, 0.0, bw_est, prev_quality, &mut slots_state, &mut trace);
            cur = begin_item(next, t_ms, user, items, &slots_state, cfg, &expected);
        }
    }
    if trace.truncated {
        finish_item(&cur, false, t_ms, user, items, &slots_state, cfg, &mut trace);
    }
    trace.elapsed_ms = t_ms;

    trace.qop = aggregate_qop(&trace.items, trace.traffic_bytes(), &cfg.est.reference, &cfg.device);
    trace.est_profit = cfg.est.est_profit(&trace.qop, &user.qop_sens);
    trace.episodes = build_episodes(&trace, cfg, user);
    Ok(trace)
}

fn begin_item(
    pos: usize,
    t_ms: u64,
    user: &UserState,
    items: &[Item],
    slots_state: &[Slot],
    cfg: &SessionConfig,
    expected: &[super::playtime::PlaytimeEstimate],
) -> Current {
    let mut rng = swipe_rng(cfg.seed, user.id, pos);
    let target_s = expected[pos].sample(&mut rng);
    let (p, _) = slots_state[pos].decision.expect("decided before start");
    let ladder = &items[pos].ladders.0[p.ladder];
    let ready = slots_state[pos].bytes >= cfg.startup.bytes_for(ladder);
    let instant = ready && p.prerender;
    Current {
        pos,
        started: instant,
        became_current_ms: t_ms,
        first_frame_ms: instant.then_some(0.0),
        wait_s: 0.0,
        played_s: 0.0,
        rebuffer_s: 0.0,
        stall_events: 0,
        stalled: false,
        target_s,
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_item(
    cur: &Current,
    abandoned: bool,
    t_ms: u64,
    user: &UserState,
    items: &[Item],
    slots_state: &[Slot],
    cfg: &SessionConfig,
    trace: &mut SessionTrace,
) {
    let item = &items[cur.pos];
    let (p, _) = slots_state[cur.pos].decision.expect("decided");
    let ladder = &item.ladders.0[p.ladder];
    let startup_wait_ms = cur
        .first_frame_ms
        .unwrap_or((t_ms - cur.became_current_ms) as f64);
    let mut rec = ItemRecord {
        position: cur.pos,
        item_id: item.id,
        ladder: p.ladder,
        bitrate_kbps: ladder.bitrate_kbps,
        quality_score: ladder.quality_score,
        target_playtime_s: cur.target_s,
        played_s: cur.played_s,
        rebuffer_s: cur.rebuffer_s,
        stall_events: cur.stall_events,
        first_frame_ms: cur.first_frame_ms,
        startup_wait_ms,
        bytes: trace.bytes_per_position[cur.pos],
        abandoned,
        qop: cfg.est.reference,
    };
    rec.qop = item_qop(&rec, &cfg.est.reference, &cfg.device, user.device_score, p);
    trace.items.push(rec);
}

fn item_qop(
    rec: &ItemRecord,
    reference: &QoPVector,
    device: &DeviceModel,
    device_score: f64,
    p: DecisionParams,
) -> QoPVector {
    let mut q = *reference;
    q.first_frame_ms = rec.startup_wait_ms;
    q.first_feed_ms = rec.startup_wait_ms;
    let denom = rec.played_s + rec.rebuffer_s;
    q.rebuffer_ratio = if denom > 0.0 { rec.rebuffer_s / denom } else { 0.0 };
    q.rebuffer_dur_per_vv_ms = rec.rebuffer_s * 1000.0;
    q.traffic_bytes = rec.bytes;
    q.video_quality = rec.quality_score;
    let d = device.metrics(rec.bitrate_kbps, device_score, p.prerender, p.preload_depth);
    q.cpu_pct = d.cpu_pct;
    q.power_avg = d.power_avg;
    q.temperature_c = d.temperature_c;
    q.mem_pct = d.mem_pct;
    q.frame_drop_rate = d.frame_drop_rate;
    q.fps = d.fps;
    q.storage_pct = device.storage_pct(rec.bytes);
    q
}

/// Session QoP from per-item records: lower median of first-frame waits,
/// playtime-weighted means for device and quality metrics, totals for
/// rebuffering and traffic.
pub fn aggregate_qop(
    items: &[ItemRecord],
    traffic_bytes: f64,
    reference: &QoPVector,
    device: &DeviceModel,
) -> QoPVector {
    let mut q = *reference;
    q.traffic_bytes = traffic_bytes;
    q.storage_pct = device.storage_pct(traffic_bytes);
    if items.is_empty() {
        return q;
    }
    let mut waits: Vec<f64> = items.iter().map(|r| r.startup_wait_ms).collect();
    waits.sort_by(f64::total_cmp);
    q.first_frame_ms = waits[waits.len().div_ceil(2) - 1];
    q.first_feed_ms = items[0].startup_wait_ms;
    let played: f64 = items.iter().map(|r| r.played_s).sum();
    let rebuffer: f64 = items.iter().map(|r| r.rebuffer_s).sum();
    q.rebuffer_ratio = if played + rebuffer > 0.0 { rebuffer / (played + rebuffer) } else { 0.0 };
    q.rebuffer_dur_per_vv_ms = rebuffer * 1000.0 / items.len() as f64;
    if played > 0.0 {
        let wmean = |f: fn(&QoPVector) -> f64| {
            items.iter().map(|r| r.played_s * f(&r.qop)).sum::<f64>() / played
        };
        q.video_quality = wmean(|x| x.video_quality);
        q.cpu_pct = wmean(|x| x.cpu_pct);
        q.power_avg = wmean(|x| x.power_avg);
        q.temperature_c = wmean(|x| x.temperature_c);
        q.mem_pct = wmean(|x| x.mem_pct);
        q.frame_drop_rate = wmean(|x| x.frame_drop_rate);
        q.fps = wmean(|x| x.fps);
    }
    q
}

fn build_episodes(trace: &SessionTrace, cfg: &SessionConfig, user: &UserState) -> Vec<Episode> {
    let state_of = |pos: usize| {
        trace
            .decisions
            .iter()
            .find(|d| d.position == pos)
            .map(|d| d.features)
    };
    trace
        .items
        .iter()
        .filter_map(|rec| {
            let state = state_of(rec.position)?;
            let next_state = trace
                .items
                .iter()
                .any(|r| r.position == rec.position + 1)
                .then(|| state_of(rec.position + 1))
                .flatten();
            Some(Episode {
                state,
                action: rec.ladder,
                reward: cfg.est.est_profit(&rec.qop, &user.qop_sens),
                next_state,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ImpactTable;
    use crate::playback::decider::{DownloadControl, RulePolicy};
    use crate::playback::playtime::{DurationBucket, PlaytimeDist};
    use crate::playback::types::LadderGroup;
    use proptest::prelude::*;

    fn cfg(playtime_s: f64) -> SessionConfig {
        let pm = PlaytimeModel {
            buckets: vec![DurationBucket {
                max_duration_s: 1e6,
                dist: PlaytimeDist::Fixed { seconds: playtime_s },
            }],
            items: Default::default(),
            users: Default::default(),
            alphas: [1.0, 0.0, 0.0],
        };
        let est = EstProfitModel {
            impacts: ImpactTable::default(),
            reference: QoPVector {
                first_frame_ms: 500.0,
                first_feed_ms: 500.0,
                rebuffer_ratio: 0.02,
                rebuffer_dur_per_vv_ms: 300.0,
                ..Default::default()
            },
        };
        SessionConfig::new(pm, est)
    }

    fn items(n: usize, kbps: f64, duration_s: f64) -> Vec<Item> {
        (0..n)
            .map(|i| Item {
                id: i as u64,
                duration_s,
                ladders: LadderGroup::from_rungs(&[(kbps, 70.0)], duration_s).unwrap(),
                popularity_weight: 1.0,
                value_score: 0.0,
            })
            .collect()
    }

    fn fixed(depth: usize, prerender: bool) -> Decider {
        Decider::rule("fixed", RulePolicy::Fixed { ladder: 0 }).with_download(DownloadControl {
            preload_depth: depth,
            cap_bytes: Some(400_000.0),
            prerender,
        })
    }

    #[test]
    fn unconstrained_network_one_item() {
        let net = NetworkTrace::constant("inf", f64::INFINITY, 60_000);
        let t = run_session(&fixed(0, false), &UserState::new(1), &items(1, 2000.0, 10.0), &net, &cfg(10.0))
            .unwrap();
        assert_eq!(t.qop.rebuffer_ratio, 0.0);
        assert_eq!(t.items[0].first_frame_ms, Some(100.0));
        assert!((t.items[0].played_s - 10.0).abs() < 1e-9);
        assert!(!t.truncated);
    }

    #[test]
    fn starved_network() {
        let net = NetworkTrace::constant("zero", 0.0, 60_000);
        let mut u = UserState::new(1);
        u.buffer_s = 3.0;
        let t = run_session(&fixed(1, false), &u, &items(3, 2000.0, 10.0), &net, &cfg(10.0)).unwrap();
        let first = &t.items[0];
        assert!(first.first_frame_ms.is_some());
        assert!((first.played_s - 3.0).abs() < 1e-9);
        assert!(first.rebuffer_s > 0.0 && first.abandoned);
        assert_eq!(t.items[1].first_frame_ms, None);
        assert_eq!(t.traffic_bytes(), 0.0);
    }

    #[test]
    fn fill_and_drain_match_closed_form() {
        // 4 Mbps link, 2 Mbps rendition: 0.2 s of media arrives per 100 ms slot
        // until the 10 s file is complete; the 200 KB prefix needs 4 slots.
        let net = NetworkTrace::constant("4m", 4000.0, 60_000);
        let t = run_session(&fixed(0, false), &UserState::new(1), &items(1, 2000.0, 10.0), &net, &cfg(10.0))
            .unwrap();
        assert_eq!(t.items[0].first_frame_ms, Some(400.0));
        assert_eq!(t.slots.len(), 104);
        for (k, s) in t.slots.iter().enumerate() {
            let downloaded = (0.2 * (k + 1) as f64).min(10.0);
            let played = if k < 4 { 0.0 } else { (0.1 * (k - 3) as f64).min(10.0) };
            assert!((s.buffer_after_s - (downloaded - played)).abs() < 1e-9, "slot {k}");
        }
        assert_eq!(t.qop.rebuffer_ratio, 0.0);
    }

    #[test]
    fn slow_link_drains_then_stalls() {
        let net = NetworkTrace::constant("1m", 1000.0, 60_000);
        let mut c = cfg(10.0);
        c.abandon_after_s = 100.0;
        let t = run_session(&fixed(0, false), &UserState::new(1), &items(1, 2000.0, 10.0), &net, &c).unwrap();
        assert_eq!(t.items[0].first_frame_ms, Some(1600.0));
        let mut played = 0.0f64;
        for (k, s) in t.slots.iter().enumerate() {
            let downloaded = (0.05 * (k + 1) as f64).min(10.0);
            if k >= 16 {
                played = (played + 0.1).min(downloaded);
            }
            assert!((s.buffer_after_s - (downloaded - played)).abs() < 1e-9, "slot {k}");
        }
        // 20 s to fetch 10 s of media after a 1.6 s startup
        assert!((t.items[0].rebuffer_s - 8.4).abs() < 1e-6, "{}", t.items[0].rebuffer_s);
        assert_eq!(t.items[0].stall_events, 1);
    }

    #[test]
    fn prefetched_prerendered_item_starts_instantly() {
        let net = NetworkTrace::constant("8m", 8000.0, 120_000);
        let t = run_session(&fixed(1, true), &UserState::new(1), &items(3, 1000.0, 10.0), &net, &cfg(5.0)).unwrap();
        assert_eq!(t.items.len(), 3);
        assert_eq!(t.items[1].first_frame_ms, Some(0.0));
        assert_eq!(t.items[2].first_frame_ms, Some(0.0));
    }

    #[test]
    fn trace_exhaustion_truncates() {
        let net = NetworkTrace::constant("short", 4000.0, 2_000);
        let t = run_session(&fixed(1, false), &UserState::new(1), &items(5, 2000.0, 10.0), &net, &cfg(10.0)).unwrap();
        assert!(t.truncated);
        assert_eq!(t.elapsed_ms, 2_000);
        assert_eq!(t.items.len(), 1);
        assert!(t.items[0].played_s < 10.0);
    }

    #[test]
    fn global_cap_limits_traffic() {
        let net = NetworkTrace::constant("8m", 8000.0, 30_000);
        let mut c = cfg(10.0);
        c.global_traffic_cap_bytes = Some(1_000_000.0);
        let t = run_session(&fixed(2, false), &UserState::new(1), &items(4, 2000.0, 10.0), &net, &c).unwrap();
        assert!(t.traffic_bytes() <= 1_000_000.0 + 1e-6);
    }

    fn step_trace() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..6000.0, 5..60)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn conservation_and_accounting(kbps in step_trace(), depth in 0usize..3, buffer in 0.0f64..4.0) {
            let net = NetworkTrace::from_steps("p", 1000, &kbps).unwrap();
            let mut u = UserState::new(3);
            u.buffer_s = buffer;
            let t = run_session(&fixed(depth, true), &u, &items(6, 1500.0, 8.0), &net, &cfg(6.0)).unwrap();
            let mut slot_bytes = 0.0;
            for s in &t.slots {
                let expect = (s.buffer_before_s + s.dl_playable_s - s.played_s).max(0.0);
                prop_assert!((s.buffer_after_s - expect).abs() < 1e-9);
                slot_bytes += s.downloaded_bytes;
            }
            prop_assert!((t.traffic_bytes() - slot_bytes).abs() < 1e-6 * slot_bytes.max(1.0));
            prop_assert_eq!(t.qop.traffic_bytes, t.traffic_bytes());
            for w in t.slots.windows(2) {
                prop_assert!(w[1].t_ms > w[0].t_ms);
            }
        }

        #[test]
        fn faster_constant_link_never_rebuffers_more(slow in 300.0f64..5000.0, factor in 1.0f64..4.0, depth in 0usize..3) {
            let mut c = cfg(7.0);
            c.abandon_after_s = 1e6;
            let it = items(4, 2000.0, 9.0);
            let u = UserState::new(2);
            let a = run_session(&fixed(depth, false), &u, &it, &NetworkTrace::constant("s", slow, 600_000), &c).unwrap();
            let b = run_session(&fixed(depth, false), &u, &it, &NetworkTrace::constant("f", slow * factor, 600_000), &c).unwrap();
            prop_assert!(b.qop.rebuffer_ratio <= a.qop.rebuffer_ratio + 1e-12,
                "slow {} fast {}", a.qop.rebuffer_ratio, b.qop.rebuffer_ratio);
        }
    }

    #[test]
    fn runs_are_bit_identical() {
        let kbps: Vec<f64> = (0..40).map(|i| 500.0 + 300.0 * ((i * 7) % 11) as f64).collect();
        let net = NetworkTrace::from_steps("d", 1000, &kbps).unwrap();
        let mut c = cfg(6.0);
        c.playtime.buckets[0].dist = PlaytimeDist::Geometric { stop_prob: 0.15, max_s: None };
        c.seed = 99;
        let d = Decider::rule("tp", RulePolicy::Throughput { safety: 0.8 });
        let it = items(8, 1200.0, 12.0);
        let a = run_session(&d, &UserState::new(5), &it, &net, &c).unwrap();
        let b = run_session(&d, &UserState::new(5), &it, &net, &c).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.episodes.len(), a.items.len());
    }
}
