//! Seeded synthetic workloads: catalogs, bandwidth waveforms and users.

mod catalog;
mod population;
mod waveform;

pub use catalog::{
    generate_catalog, solve_zipf_exponent, zipf_head_mass, Catalog, CatalogSpec, DurationClass,
    FALLBACK_EXPONENT, MIN_CALIBRATED_ITEMS,
};
pub use population::{
    generate_network_trace, generate_population, user_trace, NetworkProfile, Population,
    PopulationSpec, PortraitClass,
};
pub use waveform::{
    generate_waveform, shipped_vendors, DiurnalPeak, DiurnalShape, WaveformNoise, WaveformSpec,
};
