use super::{RunContext, SectionOutput};
use crate::error::Result;
use crate::model::profit;
use crate::scenario::report::{sha256_hex, Section, Series};
use crate::scenario::uplift::{build_cases, compare_deciders_with, trace_sessions};

/// QoE versus sensitivity-aware rendition choice at equal traffic, plus a
/// digest of full session traces for determinism checks.
pub(super) fn run(ctx: &RunContext) -> Result<SectionOutput> {
    let cfg = &ctx.config.playback;
    let spec = &cfg.uplift;
    let cmp = compare_deciders_with(spec, &ctx.baseline, ctx.seed)?;
    let users = spec.population.users as f64;

    let mut s = Section::default();
    s.put("qoe_mean_est_profit", cmp.qoe.mean_est_profit);
    s.put("aware_mean_est_profit", cmp.aware.mean_est_profit);
    s.put("est_profit_uplift", cmp.aware.mean_est_profit - cmp.qoe.mean_est_profit);
    s.put("qoe_traffic_bytes", cmp.qoe.traffic_bytes);
    s.put("aware_traffic_bytes", cmp.aware.traffic_bytes);
    s.put("qoe_mean_quality", cmp.qoe.mean_quality);
    s.put("aware_mean_quality", cmp.aware.mean_quality);
    s.put("qoe_mean_rebuffer_ratio", cmp.qoe.mean_rebuffer_ratio);
    s.put("aware_mean_rebuffer_ratio", cmp.aware.mean_rebuffer_ratio);
    s.put("traffic_price", cmp.traffic_price);

    // per user: relative LT change in days, traffic change in money
    let econ = &ctx.baseline.economy;
    let dlt = (cmp.aware.mean_est_profit - cmp.qoe.mean_est_profit) * econ.lt_base;
    let per_byte = ctx.config.uiae.prices.bw_per_gb / 1e9;
    let dcost = (cmp.aware.traffic_bytes - cmp.qoe.traffic_bytes) / users * per_byte;
    s.profit = Some(profit(dlt, 0.0, dcost, econ));

    let (cases, mut session_cfg) = build_cases(spec, &ctx.baseline, ctx.seed)?;
    session_cfg.record_slots = true;
    let traces = trace_sessions(&cases, &session_cfg, &spec.aware_decider(cmp.traffic_price), cfg.traced_users)?;
    s.detail("trace_sha256", &sha256_hex(serde_json::to_string(&traces)?.as_bytes()))?;
    s.detail("comparison", &cmp)?;

    let mut classes = Series::new(
        "playback_classes",
        &["class", "qoe_est_profit", "aware_est_profit", "qoe_quality", "aware_quality"],
    );
    for (i, c) in cmp.per_class.iter().enumerate() {
        classes.push(vec![i as f64, c.qoe_est_profit, c.aware_est_profit, c.qoe_quality, c.aware_quality]);
    }
    let mut slots = Series::new(
        "playback_trace",
        &["t_ms", "position", "bandwidth_kbps", "buffer_after_s", "played_s", "rebuffering"],
    );
    if let Some(t) = traces.first() {
        for r in &t.slots {
            slots.push(vec![
                r.t_ms as f64,
                r.position as f64,
                r.bandwidth_kbps,
                r.buffer_after_s,
                r.played_s,
                if r.rebuffering { 1.0 } else { 0.0 },
            ]);
        }
    }
    Ok((s, vec![classes, slots]))
}
