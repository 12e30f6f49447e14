//! Scenario configuration, module runners and reports.

mod config;
mod report;
mod sections;
mod uplift;

pub use config::{
    apply_override, CacheSection, CdnSection, DeliverySection, ExperimentSection, LoadedConfig, PlaybackSection,
    PublishSection, ScenarioConfig, ShareSection, ShareVendor, UiaeSection,
};
pub use report::{
    compare_runs, sha256_hex, write_atomic, write_run, MetricDiff, Provenance, Report, RunDiff, RunOutput, Section,
    SectionDiff, Series, REPORT_FILE, REPORT_SCHEMA_VERSION,
};
pub use sections::{
    compare_cache_assignment, run_scenario, section_seed, synth_value_samples, track_shares, CacheComparison,
    RunContext, ShareTracking, Subcommand,
};
pub use uplift::{
    build_cases, compare_deciders, compare_deciders_with, reference_qop, trace_sessions, ArmOutcome, Case,
    ClassOutcome, UpliftComparison, UpliftSpec,
};
