//! `qopsim`: run scenarios, compare reports and forecast series.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration or input, 4 infeasible,
//! 5 runtime.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};
use qopsim::delivery::{forecast, read_series_csv, rolling_mae, ForecastMethod, ForecastModel};
use qopsim::scenario::{
    compare_runs, run_scenario, write_atomic, write_run, LoadedConfig, Report, ScenarioConfig, Subcommand,
    REPORT_FILE,
};
use qopsim::Error;

const CONFIG_DIR_ENV: &str = "QOPSIM_CONFIG_DIR";
const DEFAULT_CONFIG_NAMES: [&str; 2] = ["scenario.toml", "scenario.json"];

#[derive(Parser)]
#[command(name = "qopsim", version, about = "Deterministic short-video delivery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario file (TOML, or JSON by extension). Defaults to
    /// `scenario.toml` in $QOPSIM_CONFIG_DIR, else the built-in demo.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and CSV series.
    #[arg(long, short, default_value = "qopsim-out")]
    out: PathBuf,
    /// Dotted-path override, e.g. `--set cdn.cache.requests=5000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Sensitivity-aware versus QoE rendition choice at equal traffic.
    Playback(RunArgs),
    /// Peak staggering, 95th-percentile billing, edge caching and share tracking.
    Cdn(RunArgs),
    /// Rendition subset delivery and bandwidth forecasting.
    Delivery(RunArgs),
    /// Value model, ladder updates, transcode allocation and quota control.
    Uiae(RunArgs),
    /// Encoding choice, upload planning and upload priority.
    Publish(RunArgs),
    /// Quasi-experiment with a known injected effect.
    Experiment(RunArgs),
    /// Every module section in one report.
    Full(RunArgs),
    /// Per-metric differences between two reports (files or run directories).
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the diff here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Forecast a CSV series (e.g. `slot,mbps`).
    Forecast {
        input: PathBuf,
        /// Column to read; defaults to the last one.
        #[arg(long)]
        column: Option<String>,
        #[arg(long, default_value_t = 12)]
        window: usize,
        #[arg(long, default_value_t = 12)]
        horizon: usize,
        #[arg(long, default_value_t = 288)]
        day_slots: usize,
        /// Seasonal-naive period; moving average when absent.
        #[arg(long)]
        period: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the built-in demo scenario.
    DemoConfig,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::SchemaMismatch(_) | Error::InvalidParameter(_) | Error::InvalidInput(_) => 3,
        Error::Infeasible(_) => 4,
        Error::Undefined(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 5,
    }
}

fn default_config() -> Result<Option<PathBuf>, Error> {
    let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) else {
        return Ok(None);
    };
    let dir = PathBuf::from(dir);
    DEFAULT_CONFIG_NAMES
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
        .map(Some)
        .ok_or_else(|| {
            Error::Config(format!("{CONFIG_DIR_ENV}={} has no scenario.toml or scenario.json", dir.display()))
        })
}

fn load(args: &RunArgs) -> Result<LoadedConfig, Error> {
    let mut overrides = args.set.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let path = match &args.config {
        Some(p) => Some(p.clone()),
        None => default_config()?,
    };
    match path {
        Some(p) => ScenarioConfig::load(&p, &overrides),
        None => ScenarioConfig::from_text(ScenarioConfig::demo_text(), None, &overrides),
    }
}

fn run(cmd: Subcommand, args: &RunArgs) -> Result<(), Error> {
    let loaded = load(args)?;
    let out = run_scenario(&loaded, cmd)?;
    let written = write_run(&out, &args.out)?;
    let mut stdout = std::io::stdout().lock();
    for (name, s) in &out.report.sections {
        writeln!(stdout, "[{name}]")?;
        for (k, v) in &s.metrics {
            writeln!(stdout, "  {k} = {v}")?;
        }
        if let Some(p) = &s.profit {
            writeln!(stdout, "  profit = {} (passes gate: {})", p.profit, p.passes_gate)?;
        }
    }
    for p in written {
        log::info!("wrote {}", p.display());
    }
    writeln!(stdout, "report: {}", args.out.join(REPORT_FILE).display())?;
    Ok(())
}

fn report_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(REPORT_FILE)
    } else {
        p.to_path_buf()
    }
}

fn emit(text: String, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn compare(a: &Path, b: &Path, out: Option<&Path>) -> Result<(), Error> {
    let load = |p: &Path| {
        let p = report_path(p);
        Report::load(&p).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read report {}: {io}", p.display())),
            other => other,
        })
    };
    let diff = compare_runs(&load(a)?, &load(b)?)?;
    for s in diff.sign_flips() {
        log::warn!("profit changes sign in section {s}");
    }
    emit(serde_json::to_string_pretty(&diff)? + "\n", out)
}

#[allow(clippy::too_many_arguments)]
fn run_forecast(
    input: &Path,
    column: Option<&str>,
    window: usize,
    horizon: usize,
    day_slots: usize,
    period: Option<usize>,
    out: Option<&Path>,
) -> Result<(), Error> {
    let file = std::fs::File::open(input)
        .map_err(|e| Error::Config(format!("cannot read series {}: {e}", input.display())))?;
    let series = read_series_csv(file, column)?;
    let method = period.map_or(ForecastMethod::MovingAverage, |period| ForecastMethod::SeasonalNaive { period });
    let model = ForecastModel { window, horizon, day_slots, method, key: column.unwrap_or("series").to_string() };
    let f = forecast(&series, &model)?;
    let need = period.unwrap_or(window);
    let mae = if series.len() > need { Some(rolling_mae(&series, &model, need)?) } else { None };
    let doc = serde_json::json!({ "model": model, "forecast": f, "rolling_mae": mae, "points": series.len() });
    emit(serde_json::to_string_pretty(&doc)? + "\n", out)
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Playback(a) => run(Subcommand::Playback, &a),
        Command::Cdn(a) => run(Subcommand::Cdn, &a),
        Command::Delivery(a) => run(Subcommand::Delivery, &a),
        Command::Uiae(a) => run(Subcommand::Uiae, &a),
        Command::Publish(a) => run(Subcommand::Publish, &a),
        Command::Experiment(a) => run(Subcommand::Experiment, &a),
        Command::Full(a) => run(Subcommand::Full, &a),
        Command::Compare { a, b, out } => compare(&a, &b, out.as_deref()),
        Command::Forecast { input, column, window, horizon, day_slots, period, out } => {
            run_forecast(&input, column.as_deref(), window, horizon, day_slots, period, out.as_deref())
        }
        Command::DemoConfig => emit(ScenarioConfig::demo_text().to_string(), None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
