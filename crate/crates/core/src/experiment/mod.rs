//! Evaluation harness: arm assignment, interleaving, output labeling and
//! quasi-experimental estimation.

mod assign;
mod label;
mod quasi;

pub use assign::{ab_assign, interleave, validate_ratios, InterleaveMode, Strategy};
pub use label::{
    label_outputs, GroupSpec, LabelConfig, OutputFile, OutputTag, Request, Resolution, Resolver,
    TaggedOutput,
};
pub use quasi::{
    balance_video_split, quasi_delta, quasi_delta_perf, run_quasi_pipeline, BalanceConfig,
    QuasiRun, QuasiScale, QuasiSimSpec, QuasiTotals, VideoCovariates, VideoSplit, DEFAULT_LAMBDA,
};
