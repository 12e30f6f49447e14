//! Multi-CDN cost and quality: billing, per-request scheduling under share
//! targets, share search, popularity hashing, edge caches, valley pre-caching
//! and peak staggering.

mod billing;
mod cache;
mod precache;
mod schedule;
mod shares;
mod stagger;

pub use billing::{
    cost_95peak, cost_traffic, percentile95, percentile95_index, srr, Bill, VendorBill,
    VendorSeries,
};
pub use cache::{
    hash_schedule, simulate_edge_cache, simulate_edge_cache_warm, stable_hash, CacheReport,
    EdgeRequest, HashScheduleConfig, LruCache,
};
pub use precache::{precache_plan, FileForecast, PrecacheConfig, PrecachePlan, Push};
pub use schedule::{QualityStats, RequestState, ShareConfig, ShareScheduler, VendorState};
pub use shares::{allocate_shares, simplex_grid, AllocationProblem, ShareEvaluation, VendorOffer};
pub use stagger::{
    free_slots, proportional_split, split_at_watermark, stagger_peaks, BandwidthWaveform,
    PeakPlan, ShiftMode, StaggerResult, VendorCapacity,
};
