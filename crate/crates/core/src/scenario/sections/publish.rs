use super::{RunContext, SectionOutput};
use crate::error::Result;
use crate::publish::{
    adapt_priority, choose_encoding_mode, choose_encoding_params, param_grid, plan_upload, preupload_gain, AppState,
};
use crate::scenario::report::{Section, Series};

/// Encoding mode and parameters, upload plan, pre-upload gain and upload
/// priority per app state for one publish job.
pub(super) fn run(ctx: &RunContext) -> Result<SectionOutput> {
    let cfg = &ctx.config.publish;
    let mut s = Section::default();

    let mode = choose_encoding_mode(&cfg.job, &cfg.options, &cfg.mode)?;
    let chosen = &mode.evaluations[mode.chosen];
    s.put("mode_publish_s", chosen.publish_s);
    s.put("mode_encode_s", chosen.effective_encode_s);
    s.put("mode_upload_s", chosen.upload_s);
    s.put("mode_size_ratio", chosen.option.size_ratio);
    s.detail("mode", &chosen.option.mode)?;
    let mut modes = Series::new("publish_modes", &["option", "size_ratio", "encode_s", "upload_s", "publish_s", "passes_floor"]);
    for (i, e) in mode.evaluations.iter().enumerate() {
        modes.push(vec![
            i as f64,
            e.option.size_ratio,
            e.effective_encode_s,
            e.upload_s,
            e.publish_s,
            if e.passes_floor { 1.0 } else { 0.0 },
        ]);
    }

    let grid = param_grid(&cfg.qps, &cfg.fps, &cfg.bitrates_kbps, &cfg.codecs);
    let params = choose_encoding_params(&cfg.job, &grid, &cfg.surfaces, &cfg.objective)?;
    s.put("params_quality", params.best.quality);
    s.put("params_output_bytes", params.best.output_bytes);
    s.put("params_publish_s", params.best.publish_s);
    s.put("params_skipped", params.skipped.len() as f64);
    s.detail("params", &params.best.params)?;

    let bytes = cfg.job.material_bytes * chosen.option.size_ratio;
    let plan = plan_upload(bytes, &cfg.job.network, &cfg.chunk_sizes, &cfg.parallelism, &cfg.nodes, cfg.streaming)?;
    s.put("upload_expected_s", plan.expected_duration_s);
    s.put("upload_chunk_bytes", plan.chunk_bytes);
    s.put("upload_parallelism", plan.parallelism as f64);
    s.put("upload_repeats_per_chunk", plan.expected_repeats_per_chunk);
    s.detail("upload", &plan)?;

    let pre = preupload_gain(&cfg.preupload)?;
    s.put("preupload_saving_s", pre.saving_s);
    s.put("preupload_waste_bytes", pre.expected_waste_bytes);
    s.put("preupload_recommended", if pre.recommend { 1.0 } else { 0.0 });

    for state in [AppState::ForegroundPublish, AppState::Background, AppState::OtherPage] {
        let d = adapt_priority(state, &cfg.priority_levels, &cfg.degradation, cfg.consume_quota, cfg.max_quota, cfg.epsilon)?;
        let name = serde_json::to_value(state)?.as_str().unwrap_or("state").to_string();
        s.put(&format!("priority_{name}"), d.priority as f64);
        s.put(&format!("suspended_{name}"), if d.suspended { 1.0 } else { 0.0 });
    }
    Ok((s, vec![modes]))
}
