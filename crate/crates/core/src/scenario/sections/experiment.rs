use super::{RunContext, SectionOutput};
use crate::error::Result;
use crate::experiment::{run_quasi_pipeline, QuasiScale};
use crate::scenario::report::Section;

/// Quasi-experiment on synthetic playtime with a known injected effect.
pub(super) fn run(ctx: &RunContext) -> Result<SectionOutput> {
    let spec = &ctx.config.experiment.quasi;
    let r = run_quasi_pipeline(spec, ctx.seed)?;
    let mut s = Section::default();
    s.put("delta_exact", r.delta_exact);
    s.put("delta_lambda", r.delta_lambda);
    s.put("delta_perf", r.delta_perf);
    s.put("relative_effect", r.relative_effect);
    s.put("injected_effect", r.injected_effect);
    s.put("recovery_error", r.relative_effect - r.injected_effect);
    if let QuasiScale::Lambda { lambda } = r.scale {
        s.put("lambda", lambda);
    }
    s.detail("totals", &r.totals)?;
    s.detail("scale", &r.scale)?;
    Ok((s, Vec::new()))
}
