//! Publishing-side planners: encoding mode and parameters, upload plans,
//! pre-upload and upload process priority.

mod dist;
mod encode;
mod priority;
mod upload;

pub use dist::Dist;
pub use encode::{
    choose_encoding_mode, choose_encoding_params, evaluate_mode, evaluate_params, param_grid, Codec,
    EncodeMode, EncodeOption, EncodeParams, ModeConfig, ModeDecision, ModeEvaluation,
    ParamDecision, ParamEvaluation, ParamFeatures, ParamObjective, PublishJob, ResponseSurfaces,
    UploadNetwork,
};
pub use priority::{adapt_priority, AppState, DegradationModel, PriorityDecision, PriorityLevel};
pub use upload::{
    chunked_duration, expected_repeat, plan_upload, preupload_gain, streaming_duration, ChunkPlan,
    PreUploadGain, PreUploadInputs, UploadMode, UploadNode,
};
