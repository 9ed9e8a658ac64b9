//! `idmcal`: extract car-following events, generate synthetic benchmarks,
//! calibrate IDM / IDM+ and report safety compliance.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use idmcal::synth::BenchmarkSpec;
use idmcal::trajectory::{SelectionCriteria, Source};
use idmcal::ModelKind;

use config::{load_bounds, load_config, resolve_objective, resolve_selection, resolve_space, ConfigFile, ObjectiveFlags};

const EXIT_CONFIG: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Parse(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Parse(_) => EXIT_PARSE,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Parse(e) | Failure::Runtime(e) => e,
        }
    }
}

fn config_err<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(e.into()))
}

#[derive(Parser)]
#[command(name = "idmcal", version, about = "Calibrate IDM / IDM+ car-following models and evaluate safety compliance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select car-following events from trajectory CSV files.
    Extract(ExtractCmd),
    /// Calibrate a model on every event.
    Calibrate(CalibrateCmd),
    /// Generate the seeded synthetic benchmark.
    Synth(SynthCmd),
    /// Summarize and pair calibration result sets.
    Report(ReportCmd),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractCmd {
    /// Trajectory CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "drone")]
    source: Source,
    #[arg(long)]
    tg_min: Option<f64>,
    #[arg(long)]
    tg_max: Option<f64>,
    #[arg(long)]
    min_duration: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CalibrateCmd {
    /// Event manifests, directories holding one, or single event CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Source tag for bare CSV inputs.
    #[arg(long, default_value = "drone")]
    source: Source,
    #[arg(long)]
    model: Option<ModelKind>,
    /// spacing, speed, timegap or combined.
    #[arg(long)]
    objective: Option<String>,
    /// Spacing weight of the combined objective.
    #[arg(long)]
    alpha: Option<f64>,
    /// Safety-spacing weight of the combined objective.
    #[arg(long)]
    beta: Option<f64>,
    /// simulator6, drone4 or custom.
    #[arg(long)]
    space: Option<String>,
    /// TOML file with [lower] and [upper] parameter tables.
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    model: Option<ModelKind>,
    /// Position noise standard deviation, m.
    #[arg(long)]
    position_noise: Option<f64>,
    /// Speed noise standard deviation, m/s.
    #[arg(long)]
    speed_noise: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportCmd {
    /// results.jsonl files or the directories holding them. The first is
    /// the baseline for paired comparisons.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Run labels, in input order.
    #[arg(long = "label")]
    labels: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

fn load(path: &Option<PathBuf>) -> Result<ConfigFile, Failure> {
    match path {
        Some(p) => config_err(load_config(p)),
        None => Ok(ConfigFile::default()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Extract(cmd) => {
            let file = load(&cmd.common.config)?;
            let criteria = config_err(resolve_selection(
                SelectionCriteria::for_source(cmd.source),
                &file.selection,
                cmd.tg_min,
                cmd.tg_max,
                cmd.min_duration,
            ))?;
            let n = commands::extract(&commands::ExtractArgs {
                inputs: cmd.inputs,
                source: cmd.source,
                criteria,
                out: cmd.common.out,
            })?;
            println!("extracted {n} events");
        }
        Command::Calibrate(cmd) => {
            let file = load(&cmd.common.config)?;
            let objective = config_err(resolve_objective(
                &file.objective,
                &ObjectiveFlags {
                    objective: cmd.objective,
                    alpha: cmd.alpha,
                    beta: cmd.beta,
                },
            ))?;
            let bounds = match &cmd.bounds {
                Some(p) => Some(config_err(load_bounds(p))?),
                None => file.bounds.clone(),
            };
            let space = config_err(resolve_space(cmd.space.as_deref().or(file.space.as_deref()), bounds))?;
            let optimizer = file.optimizer.unwrap_or_default();
            config_err(optimizer.validate())?;
            let jobs = cmd.jobs.or(file.jobs).unwrap_or(1);
            if jobs == 0 {
                return Err(Failure::Config(anyhow::anyhow!("--jobs must be at least 1")));
            }
            let out = commands::calibrate(&commands::CalibrateArgs {
                inputs: cmd.inputs,
                source: cmd.source,
                model: cmd.model.or(file.model).unwrap_or(ModelKind::Idm),
                space,
                objective,
                optimizer,
                jobs,
                out: cmd.common.out,
            })?;
            for (id, err) in &out.failures {
                eprintln!("event {id} failed: {err}");
            }
            println!("calibrated {} events, {} failed", out.calibrated, out.failures.len());
        }
        Command::Synth(cmd) => {
            let file = load(&cmd.common.config)?;
            let base = file.synth.unwrap_or_default();
            let spec = BenchmarkSpec {
                count: cmd.count.unwrap_or(base.count),
                seed: cmd.seed.or(file.seed).unwrap_or(base.seed),
                dt: cmd.dt.unwrap_or(base.dt),
                model: cmd.model.or(file.model).unwrap_or(base.model),
                position_noise_std: cmd.position_noise.unwrap_or(base.position_noise_std),
                speed_noise_std: cmd.speed_noise.unwrap_or(base.speed_noise_std),
            };
            if spec.count == 0 || !(spec.dt > 0.0) || !(spec.position_noise_std >= 0.0 && spec.speed_noise_std >= 0.0) {
                return Err(Failure::Config(anyhow::anyhow!(
                    "count and dt must be positive and noise levels non-negative"
                )));
            }
            let hash = commands::synth(&spec, &cmd.common.out)?;
            println!("wrote {} events; manifest sha256 {hash}", spec.count);
        }
        Command::Report(cmd) => {
            let out = commands::report(&commands::ReportArgs {
                inputs: cmd.inputs,
                labels: cmd.labels,
                out: cmd.out,
            })?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            println!("reported {} runs, {} paired rows", out.runs, out.paired_rows);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
