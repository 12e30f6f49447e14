use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, LogNormal};

use super::{RunContext, SectionOutput};
use crate::delivery::{
    default_replace_cost, deliver_cost, estimate_p, forecast, greedy_delivery, optimal_delivery, rolling_mae,
    DeliveryProblem, ForecastMethod, ForecastModel, LadderChoiceModel,
};
use crate::error::{Error, Result};
use crate::model::profit;
use crate::playback::Item;
use crate::scenario::report::{Section, Series};
use crate::workload::{generate_catalog, NetworkProfile};

/// Highest rung that fits the safety share of the throughput, else the lowest.
fn client_choice(item: &Item, kbps: f64) -> usize {
    item.ladders.iter().rposition(|l| l.bitrate_kbps <= 0.8 * kbps).unwrap_or(0)
}

fn sample_kbps(net: &NetworkProfile, rng: &mut ChaCha8Rng) -> Result<f64> {
    let d = LogNormal::new(net.mean_kbps.ln() - 0.5 * net.sigma * net.sigma, net.sigma)
        .map_err(|e| Error::param(e.to_string()))?;
    Ok(d.sample(rng))
}

/// Chooses which renditions to send with each request, from choice
/// probabilities estimated per network class on simulated history, and
/// compares against sending the whole ladder.
pub(super) fn run(ctx: &RunContext) -> Result<SectionOutput> {
    let cfg = &ctx.config.delivery;
    let pop = &ctx.config.playback.uplift.population;
    let catalog = generate_catalog(&cfg.catalog, ctx.seed)?;
    let pick_item = WeightedAliasIndex::new(catalog.items.iter().map(|i| i.popularity_weight).collect())
        .map_err(|e| Error::input(e.to_string()))?;
    let pick_net = WeightedAliasIndex::new(pop.networks.iter().map(|n| n.share).collect())
        .map_err(|e| Error::param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x4157);

    // choice history keyed by rung count, bucketed by network class
    let mut history: BTreeMap<usize, Vec<(u32, usize)>> = BTreeMap::new();
    for _ in 0..cfg.history {
        let item = &catalog.items[pick_item.sample(&mut rng)];
        let n = pick_net.sample(&mut rng);
        let l = client_choice(item, sample_kbps(&pop.networks[n], &mut rng)?);
        history.entry(item.ladders.len()).or_default().push((n as u32, l));
    }
    let mut models: BTreeMap<usize, LadderChoiceModel> = BTreeMap::new();
    for (k, h) in &history {
        models.insert(*k, estimate_p(h, *k)?);
    }

    let max_mean = pop.networks.iter().map(|n| n.mean_kbps).fold(0.0, f64::max);
    let (mut opt_cost, mut all_cost, mut greedy_cost) = (0.0, 0.0, 0.0);
    let (mut sent, mut offered, mut meta_sent, mut meta_all) = (0usize, 0usize, 0.0, 0.0);
    let mut approximate = 0usize;
    let mut per_request = Series::new(
        "delivery_requests",
        &["request", "ladders", "sent", "optimal_cost", "send_all_cost", "greedy_cost"],
    );
    for r in 0..cfg.requests {
        let item = &catalog.items[pick_item.sample(&mut rng)];
        let n = pick_net.sample(&mut rng);
        let device: f64 = rng.random_range(pop.device_score.0..=pop.device_score.1).max(0.05);
        let k = item.ladders.len();
        let p = models.get(&k).map_or_else(|| LadderChoiceModel::uniform(k).probs(n as u32), |m| m.probs(n as u32));
        let q: Vec<f64> = item.ladders.iter().map(|l| l.quality_score).collect();
        let b: Vec<f64> = item.ladders.iter().map(|l| l.bitrate_kbps).collect();
        let a_net = pop.networks[n].mean_kbps / max_mean;
        let deliver = item
            .ladders
            .iter()
            .map(|l| deliver_cost(l.meta_bytes as f64, device, a_net, cfg.deliver_scale))
            .collect::<Result<Vec<_>>>()?;
        let problem = DeliveryProblem { p, replace: default_replace_cost(&q, &b, cfg.w_quality, cfg.w_bitrate), deliver };
        let best = optimal_delivery(&problem)?;
        let greedy = greedy_delivery(&problem);
        let all = problem.cost(&vec![true; k]);
        opt_cost += best.cost;
        all_cost += all;
        greedy_cost += greedy.cost;
        sent += best.count();
        offered += k;
        approximate += best.approximate as usize;
        meta_all += item.ladders.iter().map(|l| l.meta_bytes as f64).sum::<f64>();
        meta_sent += best.delivered().map(|i| item.ladders.0[i].meta_bytes as f64).sum::<f64>();
        per_request.push(vec![r as f64, k as f64, best.count() as f64, best.cost, all, greedy.cost]);
    }
    let m = cfg.requests.max(1) as f64;
    let mut s = Section::default();
    s.put("mean_cost_optimal", opt_cost / m);
    s.put("mean_cost_send_all", all_cost / m);
    s.put("mean_cost_greedy", greedy_cost / m);
    s.put("ladders_sent_fraction", sent as f64 / offered.max(1) as f64);
    s.put("meta_bytes_saved_fraction", 1.0 - meta_sent / meta_all);
    s.put("approximate_decisions", approximate as f64);
    s.profit = Some(profit(0.0, 0.0, (opt_cost - all_cost) / m, &ctx.baseline.economy));
    s.detail("choice_models", &models)?;

    // bandwidth forecast on the cdn waveform
    let wave = ctx.config.cdn.waveform.generate(ctx.seed ^ 0xf0ca)?;
    let series = &wave.mbps;
    let fm = &cfg.forecast;
    let seasonal = ForecastModel {
        method: ForecastMethod::SeasonalNaive { period: fm.day_slots },
        ..fm.clone()
    };
    let start = fm.day_slots.max(fm.window).min(series.len().saturating_sub(1));
    let mae = rolling_mae(series, fm, start)?;
    let mae_seasonal = rolling_mae(series, &seasonal, start)?;
    let mean = series[start..].iter().sum::<f64>() / (series.len() - start) as f64;
    s.put("forecast_mae", mae);
    s.put("forecast_mae_seasonal_naive", mae_seasonal);
    s.put("forecast_relative_mae", mae / mean);
    let ahead = forecast(series, fm)?;
    s.detail("forecast_ahead", &ahead)?;

    let one = ForecastModel { horizon: 1, ..fm.clone() };
    let mut fc = Series::new("delivery_forecast", &["slot", "actual_mbps", "forecast_mbps", "seasonal_naive_mbps"]);
    for t in start..series.len() {
        let a = forecast(&series[..t], &one)?.values[0];
        let b = forecast(&series[..t], &ForecastModel { horizon: 1, ..seasonal.clone() })?.values[0];
        fc.push(vec![t as f64, series[t], a, b]);
    }
    Ok((s, vec![per_request, fc]))
}
