//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
//! usage.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agentnas_core::Topology;
use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::artifacts::{write_csv, write_json};
use crate::config::{self, parse_override, ConfigError, LoadedConfig};
use crate::experiment::{run_repeats_parallel, write_run_artifacts, WriteOptions};
use crate::figures::{run_gsd, write_gsd, AlgorithmKind, GsdSettings};
use crate::generate::{generate, GenSettings, Generator};

#[derive(Debug, Parser)]
#[command(name = "agentnas", version, about = "Multi-agent architecture search experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Regret curves on the Gaussian squeeze domain.
    Gsd(GsdArgs),
    /// Run a config once per value of one parameter.
    Sweep(SweepArgs),
    /// Write a synthetic tabular benchmark.
    GenTabular(GenArgs),
    /// Parse and validate a config without running it.
    ValidateConfig(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML config file (or a resolved-config.json).
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set algorithm.eta=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Overrides the config's seed (applied after --set).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's repeat count (applied after --set).
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Worker threads for repeats; 0 uses every core.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write trace.json with snapshots and refits.
    #[arg(long)]
    pub trace_json: bool,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct GsdArgs {
    #[arg(long, default_value = "gsd-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub agents: usize,
    #[arg(long, default_value_t = 10)]
    pub actions: usize,
    #[arg(long, default_value_t = config::DEFAULT_MU, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = config::DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long, default_value_t = 5000)]
    pub horizon: usize,
    #[arg(long, default_value_t = 8)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of manas, manas_ls, random_search.
    #[arg(long, value_delimiter = ',', default_value = "manas,manas_ls,random_search")]
    pub algorithms: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Dotted config key to vary, e.g. `algorithm.eta`.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values for the parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[arg(long, default_value = "sweep-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GeneratorArg {
    RandomUniform,
    PlantedOptimum,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub agents: usize,
    #[arg(long)]
    pub actions: usize,
    #[arg(long, value_enum, default_value = "random-uniform")]
    pub generator: GeneratorArg,
    /// Loss gap below the planted optimum.
    #[arg(long, default_value_t = 0.2)]
    pub gap: f64,
    /// Entries to draw when the joint space exceeds 10^6.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long)]
    pub loss_std: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

pub enum CliError {
    Config(ConfigError),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn note(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn load_config(args: &ConfigArgs, extra: &[(String, toml::Value)]) -> Result<LoadedConfig, ConfigError> {
    let mut overrides = args
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    overrides.extend_from_slice(extra);
    if let Some(seed) = args.seed {
        let seed = i64::try_from(seed)
            .map_err(|_| ConfigError::BadOverride(format!("seed {seed} exceeds the config integer range")))?;
        overrides.push(("seed".into(), toml::Value::Integer(seed)));
    }
    if let Some(r) = args.repeats {
        overrides.push(("repeats".into(), toml::Value::Integer(r as i64)));
    }
    if let Some(t) = args.threads {
        overrides.push(("threads".into(), toml::Value::Integer(t as i64)));
    }
    config::load(&args.config, &overrides)
}

fn describe(loaded: &LoadedConfig) -> String {
    let e = &loaded.experiment;
    format!(
        "{} on {}x{} for {} rounds, seeds {}..{}",
        e.algorithm.name(),
        e.topology.num_agents(),
        e.topology.num_actions(),
        e.horizon,
        e.seed,
        e.seed.wrapping_add(e.repeats as u64)
    )
}

fn run_loaded(loaded: &LoadedConfig, out: &Path, trace_json: bool, quiet: bool) -> Result<(), CliError> {
    note(quiet, format!("running {}", describe(loaded)));
    let outcome = run_repeats_parallel(&loaded.experiment, loaded.threads)?;
    let report = write_run_artifacts(out, loaded, &outcome, WriteOptions { trace_json })?;
    for f in &report.failures {
        eprintln!(
            "warning: seed {} failed after {} rounds: {}",
            f.seed, f.completed_rounds, f.error
        );
    }
    if let Some(agg) = &report.aggregate {
        note(
            quiet,
            format!(
                "cumulative regret {:.4} (std {:.4}), simple regret {:.4} (std {:.4}) over {} runs; artifacts in {}",
                agg.mean_cumulative_regret,
                agg.std_cumulative_regret,
                agg.mean_simple_regret,
                agg.std_simple_regret,
                agg.repeats,
                out.display()
            ),
        );
    }
    if !report.failures.is_empty() {
        return Err(CliError::Runtime(anyhow!(
            "{} of {} runs failed",
            report.failures.len(),
            report.repeats
        )));
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let loaded = load_config(&args.config, &[])?;
    run_loaded(&loaded, &args.out, args.trace_json, args.quiet)
}

fn cmd_gsd(args: &GsdArgs) -> Result<(), CliError> {
    let algorithms = args
        .algorithms
        .iter()
        .map(|a| {
            AlgorithmKind::parse(a.trim()).ok_or_else(|| ConfigError::Invalid {
                field: "algorithms".into(),
                message: format!("unknown algorithm `{a}`"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let settings = GsdSettings {
        num_agents: args.agents,
        num_actions: args.actions,
        mu: args.mu,
        sigma: args.sigma,
        horizon: args.horizon,
        repeats: args.repeats,
        seed: args.seed,
        algorithms,
        threads: args.threads,
    };
    for kind in &settings.algorithms {
        settings.experiment(*kind).map_err(|e| ConfigError::Invalid {
            field: "gsd".into(),
            message: e.to_string(),
        })?;
    }
    let figs = run_gsd(&settings, |k| {
        note(args.quiet, format!("gsd: {}", k.file_name().trim_end_matches(".csv")))
    })?;
    let summaries = write_gsd(&args.out, &figs)?;
    for s in &summaries {
        note(
            args.quiet,
            format!(
                "{:<8} final-10% mean regret {:.4}, mean cumulative regret {:.2}",
                s.algorithm, s.final_tenth_mean_regret, s.mean_cumulative_regret
            ),
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    param: String,
    value: String,
    completed_runs: usize,
    failed_runs: usize,
    mean_cumulative_regret: f64,
    std_cumulative_regret: f64,
    mean_simple_regret: f64,
    std_simple_regret: f64,
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    // validate every point before running any
    let mut points = Vec::new();
    for value in &args.values {
        let (_, parsed) = parse_override(&format!("{}={value}", args.param))?;
        let loaded = load_config(&args.config, &[(args.param.clone(), parsed)])?;
        points.push((value.clone(), loaded));
    }
    std::fs::create_dir_all(&args.out).map_err(anyhow::Error::from)?;
    let mut rows = Vec::new();
    let mut failed = 0;
    for (i, (value, loaded)) in points.iter().enumerate() {
        let dir = args.out.join(format!("{i:03}"));
        note(args.quiet, format!("{} = {value}", args.param));
        let outcome = run_repeats_parallel(&loaded.experiment, loaded.threads)?;
        let report = write_run_artifacts(&dir, loaded, &outcome, WriteOptions::default())?;
        failed += report.failures.len();
        let agg = report.aggregate.as_ref();
        rows.push(SweepRow {
            param: args.param.clone(),
            value: value.clone(),
            completed_runs: report.runs.len(),
            failed_runs: report.failures.len(),
            mean_cumulative_regret: agg.map_or(f64::NAN, |a| a.mean_cumulative_regret),
            std_cumulative_regret: agg.map_or(f64::NAN, |a| a.std_cumulative_regret),
            mean_simple_regret: agg.map_or(f64::NAN, |a| a.mean_simple_regret),
            std_simple_regret: agg.map_or(f64::NAN, |a| a.std_simple_regret),
        });
    }
    write_csv(&args.out.join("summary.csv"), &rows)?;
    write_json(&args.out.join("summary.json"), &rows)?;
    if failed > 0 {
        return Err(CliError::Runtime(anyhow!("{failed} runs failed across the sweep")));
    }
    Ok(())
}

fn cmd_gen_tabular(args: &GenArgs) -> Result<(), CliError> {
    let topology = Topology::new(args.agents, args.actions).map_err(|e| ConfigError::Invalid {
        field: "topology".into(),
        message: e.to_string(),
    })?;
    let generator = match args.generator {
        GeneratorArg::RandomUniform => Generator::RandomUniform,
        GeneratorArg::PlantedOptimum => Generator::PlantedOptimum { gap: args.gap },
    };
    let file = generate(&GenSettings {
        topology,
        generator,
        seed: args.seed,
        samples: args.samples,
        loss_std: args.loss_std,
    })?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(anyhow::Error::from)?;
    }
    std::fs::write(&args.out, file.to_json())
        .map_err(|e| anyhow!("cannot write {}: {e}", args.out.display()))?;
    Ok(())
}

fn cmd_validate(args: &ConfigArgs) -> Result<(), CliError> {
    let loaded = load_config(args, &[])?;
    println!("ok: {}", describe(&loaded));
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Gsd(a) => cmd_gsd(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::GenTabular(a) => cmd_gen_tabular(a),
        Command::ValidateConfig(a) => cmd_validate(a),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Config(c) => eprintln!("error: {c}"),
                CliError::Runtime(r) => eprintln!("error: {r:#}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
