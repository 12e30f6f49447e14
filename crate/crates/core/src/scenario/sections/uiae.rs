use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::{RunContext, SectionOutput};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::model::{profit, Direction, QoPVector, QopMetric, SensitivityWeights};
use crate::scenario::report::{Section, Series};
use crate::uiae::{
    allocate_transcodes, candidate_space, cluster_consumers, cost_components, evaluate_value_model,
    selection_shares, simulate_step_response, train_value_model, update_ladder, CalcTable, ClusterProfile,
    ConsumptionForecast, EncoderPreset, LadderCandidate, PlantModel, QuotaController, ResourceType,
    RewardContext, TranscodeTask, ValueHead, ValueSample, ValueTrainConfig, WindowRecord,
};
use crate::workload::{generate_catalog, generate_population, Catalog, CatalogSpec};

/// Synthetic value rows for catalog items: early signals are noisy
/// functions of popularity, and future views follow early views.
pub fn synth_value_samples(catalog: &Catalog, n: usize, seed: u64) -> Result<Vec<ValueSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = LogNormal::new(0.0, 0.5).map_err(|e| Error::param(e.to_string()))?;
    let m = catalog.items.len();
    Ok((0..n)
        .map(|i| {
            let it = &catalog.items[i % m];
            let vv = it.popularity_weight * 1e7 * noise.sample(&mut rng);
            let fans: f64 = rng.random_range(0.0..1e5);
            let growth: f64 = rng.random_range(-0.5..2.0);
            ValueSample {
                item_id: it.id,
                author_id: it.id % 97,
                author_activity: rng.random_range(0.0..1.0),
                author_posts: rng.random_range(0.0..500.0),
                author_fans: fans,
                duration_s: it.duration_s,
                playback_volume: vv,
                like_count: vv * rng.random_range(0.0..0.1),
                vv_growth: growth,
                category: rng.random_range(0..12),
                hour: rng.random_range(0..24),
                holiday: rng.random_bool(0.2),
                target_vv: ((vv * 3.0 * (1.0 + 0.3 * growth)).max(0.0) + fans * 0.1) * noise.sample(&mut rng),
                target_playtime_s: 0.0,
                target_likes: 0.0,
            }
        })
        .collect())
}

fn cluster_profiles(ctx: &RunContext, consumers: usize, k: usize) -> Result<(Vec<ClusterProfile>, Vec<f64>)> {
    let spec = crate::workload::PopulationSpec { users: consumers, ..ctx.config.playback.uplift.population.clone() };
    let pop = generate_population(&spec, ctx.seed ^ 0xc105)?;
    let points: Vec<Vec<f64>> = pop
        .users
        .iter()
        .zip(&pop.network)
        .map(|(u, &n)| {
            vec![
                spec.networks[n].mean_kbps.ln(),
                u.qop_sens.weight(QopMetric::RebufferRatio).ln(),
                u.qop_sens.weight(QopMetric::VideoQuality).ln(),
            ]
        })
        .collect();
    let c = cluster_consumers(&points, k, ctx.seed, 100)?;
    let profiles = c
        .centers
        .iter()
        .map(|z| ClusterProfile {
            sensitivities: SensitivityWeights::uniform()
                .with(QopMetric::RebufferRatio, z[1].exp())
                .with(QopMetric::RebufferDurPerVvMs, z[1].exp())
                .with(QopMetric::VideoQuality, z[2].exp()),
            bandwidth_kbps: z[0].exp(),
            safety: 0.8,
            startup_s: 0.5,
        })
        .collect();
    Ok((profiles, c.histogram))
}

/// Random walk of the cluster histogram around `base`.
fn jitter(base: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = base.iter().map(|h| h * rng.random_range(0.7..1.3) + 1e-6).collect();
    let t: f64 = v.iter().sum();
    v.into_iter().map(|x| x / t).collect()
}

pub(super) fn run(ctx: &RunContext) -> Result<SectionOutput> {
    let cfg = &ctx.config.uiae;
    let mut s = Section::default();

    let catalog = generate_catalog(&CatalogSpec { items: cfg.items, ..Default::default() }, ctx.seed ^ 0x1a)?;
    let samples = synth_value_samples(&catalog, cfg.value_samples.max(cfg.items), ctx.seed ^ 0x5a)?;
    let cut = samples.len() * 4 / 5;
    let vcfg = ValueTrainConfig { epochs: 500, ..ValueTrainConfig::new(ValueHead::ViewVolume, LossKind::Huber { delta: 1.0 }) };
    let model = train_value_model(&samples[..cut], &vcfg)?;
    let eval = evaluate_value_model(&model, &samples[cut..], 0.1)?;
    s.put("value_rec_auc", eval.rec_auc);
    s.put("value_mae", eval.mae);
    // percentile of each item's predicted value among the catalog
    let first: Vec<f64> = (0..cfg.items).map(|i| model.predict_scaled(&samples[i])).collect();
    let score = |i: usize| first.iter().filter(|v| **v < first[i]).count() as f64 / cfg.items.max(1) as f64;

    let (clusters, hist) = cluster_profiles(ctx, cfg.consumers, cfg.clusters)?;
    s.put("clusters", clusters.len() as f64);
    let rctx = |forecast| RewardContext {
        impacts: ctx.baseline.impacts.clone().with(QopMetric::VideoQuality, cfg.quality_coefficient, Direction::HigherIsBetter),
        economy: ctx.baseline.economy,
        clusters: clusters.clone(),
        forecast,
        prices: cfg.prices,
        calc_table: CalcTable::shipped(),
        base_qop: QoPVector { first_feed_ms: 800.0, fps: 30.0, ..Default::default() },
    };

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x1add);
    let presets = [EncoderPreset::Fast, EncoderPreset::Medium, EncoderPreset::Slow];
    let mut tasks = Vec::new();
    let (mut kept, mut withdrawn, mut changed) = (0usize, 0usize, 0usize);
    let plays_total = 1e6;
    for (i, item) in catalog.items.iter().enumerate() {
        let rungs: Vec<(f64, f64)> = item.ladders.iter().map(|l| (l.bitrate_kbps, l.quality_score)).collect();
        let current = LadderCandidate { group: item.ladders.clone(), preset: EncoderPreset::Medium, resource: ResourceType::Cpu };
        let candidates = candidate_space(&rungs, item.duration_s, &cfg.bitrate_scales, &presets, ResourceType::Cpu)?;
        let history: Vec<WindowRecord> = (0..cfg.windows)
            .map(|t| {
                let qd: f64 = rng.random_range(0.0..1.0);
                WindowRecord {
                    t,
                    ug: jitter(&hist, &mut rng),
                    qop: QoPVector::default(),
                    profit: 0.0,
                    qd_prob: qd,
                    fd_prob: 1.0 - qd,
                    ladder: current.clone(),
                }
            })
            .collect();
        let forecast = ConsumptionForecast {
            plays: item.popularity_weight * plays_total,
            mean_watch_s: catalog.playtime[i].mean(),
            duration_s: item.duration_s,
        };
        let rc = rctx(forecast);
        let up = update_ladder(&history, score(i), &candidates, &rc, &cfg.ladder)?;
        if up.withdrawn {
            withdrawn += 1;
            continue;
        }
        let Some(&(c, reward)) = up.rewards.iter().find(|(c, _)| candidates[*c] == up.ladder) else {
            kept += 1;
            continue;
        };
        if candidates[c] == current || !(reward > 0.0) {
            kept += 1;
            continue;
        }
        changed += 1;
        let shares = selection_shares(&candidates[c].group, &clusters, &up.ug_forecast);
        let quota = cost_components(&candidates[c], &shares, &rc.forecast, &rc.calc_table)?.calc;
        tasks.push(TranscodeTask { item_id: item.id, candidate: c, reward, quota, resource: ResourceType::Cpu });
    }
    s.put("items_withdrawn", withdrawn as f64);
    s.put("items_kept", kept as f64);
    s.put("items_changed", changed as f64);

    let requested: f64 = tasks.iter().map(|t| t.quota).sum();
    let budget = cfg.budget_fraction * requested;
    let (reward_sum, quota_used) = if tasks.is_empty() {
        (0.0, 0.0)
    } else {
        let a = allocate_transcodes(&tasks, budget, &cfg.allocation)?;
        s.put("tasks_accepted", a.accepted.len() as f64);
        s.put("allocation_exact", if a.exact { 1.0 } else { 0.0 });
        s.detail("accepted_items", &a.accepted.iter().map(|&i| tasks[i].item_id).collect::<Vec<_>>())?;
        (a.reward_sum, a.quota_used)
    };
    s.put("tasks", tasks.len() as f64);
    s.put("quota_requested", requested);
    s.put("quota_budget", budget);
    s.put("quota_used", quota_used);
    s.put("reward_sum", reward_sum);
    // the reward already nets out money costs; report it as value over zero cost
    let econ = &ctx.baseline.economy;
    s.profit = Some(profit(reward_sum / econ.arpu_base, 0.0, 0.0, econ));

    let plant = PlantModel::<f64>::shipped();
    let controller = QuotaController::shipped(0.8, plant.budget_per_util(), 200.0);
    let disturb_at = cfg.pid_steps / 6;
    let run = simulate_step_response(&controller, &plant, disturb_at, cfg.pid_disturbance, cfg.pid_steps, 0.05)?;
    match run.settle_steps {
        Some(k) => s.put("pid_settle_steps", k as f64),
        None => s.undefined.push("pid_settle_steps".into()),
    }
    let mut pid = Series::new("uiae_pid", &["step", "utilization", "budget"]);
    for (k, (u, b)) in run.utilization.iter().zip(&run.budget).enumerate() {
        pid.push(vec![k as f64, *u, *b]);
    }
    Ok((s, vec![pid]))
}
