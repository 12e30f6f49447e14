//! Client-side streaming: decision inputs (action matrix, portraits,
//! playtime), deciders, the session simulator and decider training.

mod action;
mod decider;
mod device;
mod network;
mod playtime;
mod qoe;
mod session;
mod train;
mod types;
mod uplift;

pub use action::{top_k_actions, ActionEntry, ActionMatrix};
pub use decider::{
    features_for, predict_item_qop, DecisionContext, DecisionParams, Decider, DeciderDocument,
    DeciderKind, DownloadControl, EstProfitModel, LinearDecider, QEntry, QTableDecider,
    RulePolicy, StartupRule, StateBuckets, StateFeatures, DECIDER_FORMAT_VERSION,
};
pub use device::{DeviceMetrics, DeviceModel};
pub use network::{NetworkTrace, TraceSample};
pub use playtime::{estimate_playtime, DurationBucket, PlaytimeDist, PlaytimeEstimate, PlaytimeModel};
pub use qoe::{qoe, QoeWeights};
pub use session::{
    aggregate_qop, run_session, DecisionRecord, Episode, ItemRecord, SessionConfig, SessionTrace,
    SlotRecord,
};
pub use train::{
    evaluate_decider, fit_linear, heuristic_search, mean_loss, optimize_decider_gradient,
    optimize_decider_q, q_learning_online, GradientConfig, LinearFit, QConfig, QEnvironment,
    ValidationCase,
};
pub use types::{
    Context, Item, Ladder, LadderGroup, NetworkClass, Page, ResolutionClass, UserState,
};
pub use uplift::{uplift_bucket, LinearPredictor, UpliftPortraitModel};
