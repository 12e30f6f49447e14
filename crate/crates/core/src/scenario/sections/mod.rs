//! One runner per module. Each is a pure function of the config and the
//! run seed, so a section is identical whether run alone or inside `full`.

mod cdn;
mod delivery;
mod experiment;
mod playback;
mod publish;
mod uiae;

use std::path::Path;
use std::str::FromStr;

use super::config::{LoadedConfig, ScenarioConfig};
use super::report::{Provenance, Report, RunOutput, Section, Series, REPORT_SCHEMA_VERSION};
use crate::cdn::stable_hash;
use crate::error::{Error, Result};
use crate::model::BaselineConfig;

pub use cdn::{compare_cache_assignment, track_shares, CacheComparison, ShareTracking};
pub use uiae::synth_value_samples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subcommand {
    Playback,
    Cdn,
    Delivery,
    Uiae,
    Publish,
    Experiment,
    Full,
}

impl Subcommand {
    pub const MODULES: [Subcommand; 6] = [
        Subcommand::Playback,
        Subcommand::Cdn,
        Subcommand::Delivery,
        Subcommand::Uiae,
        Subcommand::Publish,
        Subcommand::Experiment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Playback => "playback",
            Subcommand::Cdn => "cdn",
            Subcommand::Delivery => "delivery",
            Subcommand::Uiae => "uiae",
            Subcommand::Publish => "publish",
            Subcommand::Experiment => "experiment",
            Subcommand::Full => "full",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::MODULES
            .iter()
            .chain(&[Subcommand::Full])
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand `{s}`")))
    }
}

/// What every runner sees.
pub struct RunContext<'a> {
    pub config: &'a ScenarioConfig,
    pub baseline: BaselineConfig,
    /// Seed of this section, derived from the run seed and the section name.
    pub seed: u64,
}

pub type SectionOutput = (Section, Vec<Series>);

pub fn section_seed(seed: u64, name: &str) -> u64 {
    seed ^ stable_hash(name.as_bytes())
}

fn run_module(cmd: Subcommand, ctx: &RunContext) -> Result<SectionOutput> {
    match cmd {
        Subcommand::Playback => playback::run(ctx),
        Subcommand::Cdn => cdn::run(ctx),
        Subcommand::Delivery => delivery::run(ctx),
        Subcommand::Uiae => uiae::run(ctx),
        Subcommand::Publish => publish::run(ctx),
        Subcommand::Experiment => experiment::run(ctx),
        Subcommand::Full => unreachable!("full expands to modules"),
    }
}

/// Runs `cmd` and assembles the report. Nothing is written here.
pub fn run_scenario(loaded: &LoadedConfig, cmd: Subcommand) -> Result<RunOutput> {
    let config = &loaded.config;
    let base_dir = loaded.path.as_deref().and_then(Path::parent);
    let baseline = config.load_baseline(base_dir)?;
    let modules: Vec<Subcommand> = match cmd {
        Subcommand::Full => Subcommand::MODULES.to_vec(),
        c => vec![c],
    };
    let mut report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        provenance: Provenance {
            config_sha256: loaded.digest(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: cmd.name().to_string(),
            overrides: loaded.overrides.clone(),
        },
        sections: Default::default(),
    };
    let mut series = Vec::new();
    for m in modules {
        let ctx = RunContext { config, baseline: baseline.clone(), seed: section_seed(config.seed, m.name()) };
        log::info!("running {}", m.name());
        let (section, s) = run_module(m, &ctx)?;
        report.sections.insert(m.name().to_string(), section);
        series.extend(s);
    }
    Ok(RunOutput { report, series })
}
