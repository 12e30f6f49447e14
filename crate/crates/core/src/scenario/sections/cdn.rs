use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{RunContext, SectionOutput};
use crate::cdn::{
    cost_95peak, hash_schedule, proportional_split, simulate_edge_cache, stagger_peaks, CacheReport, EdgeRequest,
    QualityStats, RequestState, ShareScheduler, VendorSeries, VendorState,
};
use crate::error::{Error, Result};
use crate::model::profit;
use crate::scenario::config::{CacheSection, ShareSection};
use crate::scenario::report::{Section, Series};
use crate::workload::generate_catalog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheComparison {
    pub hashed: CacheReport,
    pub random: CacheReport,
    pub capacity_bytes: u64,
    pub zipf_exponent: f64,
    pub head_mass: f64,
}

/// Edge hit rates of cold-file hashing versus uniform random vendor choice
/// on one request stream. Hot files follow the same random draw in both
/// arms, so the only difference is where cold files land.
pub fn compare_cache_assignment(spec: &CacheSection, seed: u64) -> Result<CacheComparison> {
    let n = spec.vendors;
    if n == 0 || !(spec.capacity_fraction > 0.0) {
        return Err(Error::param("cache comparison needs vendors and a positive capacity"));
    }
    let catalog = generate_catalog(&spec.catalog, seed)?;
    let index: HashMap<u64, usize> = catalog.items.iter().enumerate().map(|(i, it)| (it.id, i)).collect();
    // one mid-ladder rendition per file
    let bytes: Vec<u64> = catalog
        .items
        .iter()
        .map(|it| it.ladders.get(it.ladders.len() / 2).map_or(0, |l| l.file_bytes))
        .collect();
    let total: u64 = bytes.iter().sum();
    let capacity = (spec.capacity_fraction * total as f64) as u64;
    let files: Vec<(u64, f64)> = catalog.items.iter().map(|it| (it.id, it.popularity_weight)).collect();
    let pinned = hash_schedule(&files, n, &spec.hash)?;

    let stream = catalog.sample_requests(spec.requests, seed ^ 0x5eed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1ce);
    let mut hashed = Vec::with_capacity(stream.len());
    let mut random = Vec::with_capacity(stream.len());
    for (t, id) in stream.iter().enumerate() {
        let i = index[id];
        let r = rng.random_range(0..n);
        let slot = (t * 288 / stream.len().max(1)) as u32;
        let req = |vendor| EdgeRequest { slot, file: *id, bytes: bytes[i], vendor };
        hashed.push(req(pinned[i].unwrap_or(r)));
        random.push(req(r));
    }
    let caps = vec![capacity; n];
    Ok(CacheComparison {
        hashed: simulate_edge_cache(&hashed, &caps)?,
        random: simulate_edge_cache(&random, &caps)?,
        capacity_bytes: capacity,
        zipf_exponent: catalog.exponent,
        head_mass: catalog.head_mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareTracking {
    pub targets: Vec<f64>,
    pub realized: Vec<f64>,
    pub max_abs_error: f64,
    /// Mean observed download speed over all requests.
    pub mean_speed: f64,
    /// Realized shares after every tenth of the run.
    pub trajectory: Vec<Vec<f64>>,
}

/// Request-level scheduling with live speed feedback: every served request
/// reports a speed drawn from its vendor's distribution.
pub fn track_shares(spec: &ShareSection, seed: u64) -> Result<ShareTracking> {
    let mut vendors: Vec<VendorState> = spec
        .vendors
        .iter()
        .map(|v| VendorState {
            id: v.id.clone(),
            unit_price: 1.0,
            target_share: v.target_share,
            capacity_mbps: 1e9,
            quality: QualityStats::new(v.speed_mean, v.speed_std),
        })
        .collect();
    let speed: Vec<Normal<f64>> = spec
        .vendors
        .iter()
        .map(|v| Normal::new(v.speed_mean, v.speed_std).map_err(|e| Error::param(e.to_string())))
        .collect::<Result<_>>()?;
    let mut sched = ShareScheduler::for_vendors(&vendors, spec.config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total_speed = 0.0;
    let mut trajectory = Vec::new();
    let step = (spec.requests / 10).max(1);
    for i in 0..spec.requests {
        let req = RequestState {
            id: i as u64,
            bytes: rng.random_range(1e5..3e6),
            buffer_s: rng.random_range(0.0..10.0),
            rebuffer_sens: rng.random_range(0.0..3.0),
            region: rng.random_range(0..4),
            hour: rng.random_range(0..24),
        };
        let k = sched.schedule_request(&req, &vendors)?;
        let v = speed[k].sample(&mut rng).max(0.01);
        total_speed += v;
        vendors[k].quality.observe(req.region, req.hour, i as f64 * 0.1, v);
        if (i + 1) % step == 0 {
            trajectory.push(sched.realized_shares());
        }
    }
    let targets: Vec<f64> = spec.vendors.iter().map(|v| v.target_share).collect();
    let realized = sched.realized_shares();
    let max_abs_error = targets.iter().zip(&realized).map(|(t, r)| (t - r).abs()).fold(0.0, f64::max);
    Ok(ShareTracking {
        targets,
        realized,
        max_abs_error,
        mean_speed: total_speed / spec.requests.max(1) as f64,
        trajectory,
    })
}

fn bill(ids: &[String], prices: &[f64], series: &[Vec<f64>]) -> Result<f64> {
    let vs: Vec<VendorSeries<f64>> = ids
        .iter()
        .zip(prices)
        .zip(series)
        .map(|((id, p), s)| VendorSeries::new(id.clone(), *p, s.clone()))
        .collect();
    Ok(cost_95peak(&vs)?.total)
}

pub(super) fn run(ctx: &RunContext) -> Result<SectionOutput> {
    let cfg = &ctx.config.cdn;
    let wave = cfg.waveform.generate(ctx.seed)?;
    let ids: Vec<String> = cfg.vendors.iter().map(|v| v.id.clone()).collect();
    let caps: Vec<f64> = cfg.vendors.iter().map(|v| v.capacity_mbps).collect();
    let baseline = proportional_split(&wave, &caps);
    let baseline_bill = bill(&ids, &cfg.unit_prices, &baseline)?;

    let mut s = Section::default();
    s.put("proportional_bill", baseline_bill);
    let mut best: Option<(f64, f64, crate::cdn::StaggerResult)> = None;
    let mut plans = Vec::new();
    for &mode in &cfg.modes {
        let r = stagger_peaks(&wave, &cfg.vendors, mode)?;
        let b = bill(&ids, &cfg.unit_prices, &r.plan.vendor_mbps)?;
        let name = serde_json::to_value(mode)?.as_str().unwrap_or("mode").to_string();
        s.put(&format!("srr_{name}"), r.srr);
        s.put(&format!("bill_{name}"), b);
        s.put("baseline_srr", r.baseline_srr);
        plans.push(serde_json::json!({ "mode": name, "srr": r.srr, "bill": b, "vendor_peaks": r.vendor_peaks }));
        if best.as_ref().is_none_or(|(srr, _, _)| r.srr > *srr) {
            best = Some((r.srr, b, r));
        }
    }
    let (best_srr, best_bill, best_plan) = best.ok_or_else(|| Error::Config("cdn needs at least one shift mode".into()))?;
    s.put("srr", best_srr);
    s.put("bill", best_bill);
    s.profit = Some(profit(0.0, 0.0, best_bill - baseline_bill, &ctx.baseline.economy));
    s.detail("plans", &plans)?;
    s.detail("best_mode", &best_plan.plan.mode)?;

    let cache = compare_cache_assignment(&cfg.cache, ctx.seed ^ 0xcac4e)?;
    s.put("hit_rate_hashed", cache.hashed.hit_rate);
    s.put("hit_rate_random", cache.random.hit_rate);
    s.put("zipf_exponent", cache.zipf_exponent);
    s.put("head_mass", cache.head_mass);

    let shares = track_shares(&cfg.shares, ctx.seed ^ 0x54a2e)?;
    s.put("share_max_abs_error", shares.max_abs_error);
    s.put("share_mean_speed", shares.mean_speed);
    for (v, r) in cfg.shares.vendors.iter().zip(&shares.realized) {
        s.put(&format!("share_{}", v.id), *r);
    }

    let mut header = vec!["slot".to_string(), "total_mbps".into(), "proportional_0_mbps".into()];
    header.extend(ids.iter().map(|id| format!("{id}_mbps")));
    let mut waveform = Series { name: "cdn_waveform".into(), header, rows: Vec::new() };
    for t in 0..wave.mbps.len() {
        let mut row = vec![t as f64, wave.mbps[t], baseline[0][t]];
        row.extend(best_plan.plan.vendor_mbps.iter().map(|v| v[t]));
        waveform.push(row);
    }
    let mut traj = Series {
        name: "cdn_shares".into(),
        header: std::iter::once("fraction".to_string())
            .chain(cfg.shares.vendors.iter().map(|v| v.id.clone()))
            .collect(),
        rows: Vec::new(),
    };
    let n = shares.trajectory.len() as f64;
    for (i, r) in shares.trajectory.iter().enumerate() {
        traj.push(std::iter::once((i + 1) as f64 / n).chain(r.iter().copied()).collect());
    }
    Ok((s, vec![waveform, traj]))
}
