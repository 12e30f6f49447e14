//! User-item-aware encoding: value prediction, windowed ladder updates,
//! reward and cost accounting, quota-limited admission and quota control.

mod alloc;
mod cluster;
mod ladder;
mod pid;
mod value;

pub use alloc::{
    allocate_transcodes, knapsack_dp, knapsack_greedy, Allocation, AllocationConfig, TranscodeTask,
};
pub use cluster::{cluster_consumers, Clustering};
pub use ladder::{
    candidate_space, cluster_choice, cost_components, predict_cluster_qop, reward,
    reward_from_parts, selection_shares, update_ladder, CalcEntry, CalcTable, ClusterProfile,
    ConsumptionForecast, CostComponents, CostPrices, EncoderPreset, LadderCandidate, LadderUpdate,
    LadderUpdateConfig, OptimizeDirection, RewardBreakdown, RewardContext, ResourceType,
    WindowRecord,
};
pub use pid::{simulate_step_response, ClosedLoopRun, PlantModel, QuotaController};
pub use value::{
    evaluate_value_model, fit_regressor, read_samples_csv, rec_auc, train_value_model,
    write_samples_csv, LinearRegressor, ValueEvaluation, ValueHead, ValueModel, ValueSample,
    ValueTrainConfig, FEATURE_LEN, VALUE_MODEL_FORMAT_VERSION, VALUE_SAMPLE_HEADER,
};
