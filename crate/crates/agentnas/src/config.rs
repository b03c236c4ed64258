//! Experiment configuration files.
//!
//! Configs are TOML. Top-level keys hold run settings; `[topology]`,
//! `[algorithm]` and `[environment]` describe the experiment:
//!
//! ```toml
//! seed = 0
//! repeats = 4
//! horizon = 5000
//!
//! [topology]
//! num_agents = 2
//! num_actions = 2
//!
//! [algorithm]
//! name = "manas"          # manas | manas_ls | random_search
//!
//! [environment]
//! kind = "linear"         # gsd | linear | tabular
//! noise_std = 0.0
//! beta_schedule = { kind = "stationary", beta = [0.1, 0.9, 0.2, 0.8] }
//! ```
//!
//! Unknown keys are rejected. Relative file paths inside a config resolve
//! against the config file's directory.

use std::fmt;
use std::path::{Path, PathBuf};

use agentnas_core::environment::{BetaSchedule, EnvironmentSpec, GsdConfig, LinearEnvConfig};
use agentnas_core::policy::{manas_defaults, ManasHyperparams, RecommendMode};
use agentnas_core::runner::{Algorithm, ExperimentConfig, LsSettings, LsWindow};
use agentnas_core::Topology;
use serde::{Deserialize, Serialize};

use crate::tabular::{load_benchmark, load_container};

pub const DEFAULT_MU: f64 = 1.0;
pub const DEFAULT_SIGMA: f64 = 10.0;

/// Anything wrong with a config before a run starts. Maps to exit code 2.
#[derive(Debug)]
pub enum ConfigError {
    Read { path: PathBuf, source: std::io::Error },
    /// TOML syntax or schema violation; the message carries line and column.
    Parse(String),
    Missing(&'static str),
    Invalid { field: String, message: String },
    BadOverride(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read { path, source } => {
                write!(f, "cannot read config {}: {source}", path.display())
            }
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
            ConfigError::Missing(field) => write!(f, "missing required field `{field}`"),
            ConfigError::Invalid { field, message } => write!(f, "invalid `{field}`: {message}"),
            ConfigError::BadOverride(msg) => write!(f, "bad --set override: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_agents: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_actions: Option<usize>,
    /// Shorthand for `num_agents = 14 * cells`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Sliding,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSection {
    Manas {
        /// Defaults to `0.95 sqrt(ln K) / (n K)` with `n = horizon`.
        #[serde(skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
        /// Defaults to `min(1, 1.05 K ln K / n)`.
        #[serde(skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    ManasLs {
        #[serde(skip_serializing_if = "Option::is_none")]
        solve_period: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        min_samples: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        window: Option<WindowKind>,
        #[serde(skip_serializing_if = "Option::is_none")]
        window_size: Option<usize>,
    },
    RandomSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSection {
    Gsd {
        #[serde(skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        contributions: Option<Vec<f64>>,
    },
    Linear {
        #[serde(skip_serializing_if = "Option::is_none")]
        noise_std: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        beta_schedule: Option<BetaSchedule>,
        /// JSON container holding a `beta_schedule` key.
        #[serde(skip_serializing_if = "Option::is_none")]
        schedule_file: Option<PathBuf>,
    },
    Tabular {
        benchmark: PathBuf,
        #[serde(skip_serializing_if = "Option::is_none")]
        noisy: Option<bool>,
    },
}

/// The file as written; every field optional so that missing ones can be
/// named precisely.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recommend: Option<RecommendMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_interval: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub require_unit_losses: Option<bool>,
    /// Worker threads for repeats; 0 uses every core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentSection>,
}

/// A validated config ready to run.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub experiment: ExperimentConfig,
    pub threads: usize,
    /// The file with every default filled in and paths made absolute.
    pub resolved: ConfigFile,
}

/// `key=value` from `--set`. The value is read as a TOML value, falling back
/// to a bare string.
pub fn parse_override(raw: &str) -> Result<(String, toml::Value), ConfigError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(format!("`{raw}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::BadOverride(format!("`{raw}` has an empty key segment")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let next = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next.as_table_mut().ok_or_else(|| {
            ConfigError::BadOverride(format!("`{key}`: `{part}` is not a table"))
        })?;
    }
    Ok(())
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Parses `text`, applying overrides in order.
    pub fn from_toml_with_overrides(
        text: &str,
        overrides: &[(String, toml::Value)],
    ) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Self::from_toml_str(text);
        }
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v.clone())?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(format!("after overrides: {e}")))
    }

    /// Reads a `.toml` file, or a `.json` file as written to
    /// `resolved-config.json`.
    pub fn read(path: &Path, overrides: &[(String, toml::Value)]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            let json: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
            let as_toml = toml::Value::try_from(json)
                .map_err(|e| ConfigError::Parse(format!("json config: {e}")))?;
            let as_text = toml::to_string(&as_toml)
                .map_err(|e| ConfigError::Parse(format!("json config: {e}")))?;
            return Self::from_toml_with_overrides(&as_text, overrides);
        }
        Self::from_toml_with_overrides(&text, overrides)
    }

    /// Validates and builds the experiment. `base_dir` anchors relative paths.
    pub fn resolve(&self, base_dir: &Path) -> Result<LoadedConfig, ConfigError> {
        let topo_sec = self.topology.as_ref().ok_or(ConfigError::Missing("topology"))?;
        let num_actions = topo_sec
            .num_actions
            .ok_or(ConfigError::Missing("topology.num_actions"))?;
        let topology = match (topo_sec.num_agents, topo_sec.cells) {
            (Some(_), Some(_)) => {
                return Err(invalid("topology", "give num_agents or cells, not both"))
            }
            (Some(n), None) => Topology::new(n, num_actions),
            (None, Some(c)) => Topology::from_cells(c, num_actions),
            (None, None) => return Err(ConfigError::Missing("topology.num_agents")),
        }
        .map_err(|e| invalid("topology", e))?;

        let horizon = self.horizon.ok_or(ConfigError::Missing("horizon"))?;
        if horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        let repeats = self.repeats.unwrap_or(1);
        if repeats == 0 {
            return Err(invalid("repeats", "must be at least 1"));
        }

        let alg_sec = self.algorithm.as_ref().ok_or(ConfigError::Missing("algorithm"))?;
        let (algorithm, resolved_alg) = resolve_algorithm(alg_sec, &topology, horizon)?;
        let env_sec = self.environment.as_ref().ok_or(ConfigError::Missing("environment"))?;
        let (environment, resolved_env) = resolve_environment(env_sec, &topology, base_dir)?;

        let mut experiment = ExperimentConfig::new(topology, algorithm, horizon, environment);
        experiment.seed = self.seed.unwrap_or(0);
        experiment.repeats = repeats;
        experiment.recommend = self.recommend.unwrap_or_default();
        experiment.snapshot_interval = self.snapshot_interval.unwrap_or(0);
        experiment.require_unit_losses = self.require_unit_losses.unwrap_or(false);
        experiment
            .validate()
            .map_err(|e| invalid(format!("algorithm.{}", alg_sec_name(alg_sec)), e))?;
        // surface environment construction errors (bad beta, tiny brute-force
        // limits) before any run starts
        experiment
            .build_environment()
            .map_err(|e| invalid("environment", e))?;

        let threads = self.threads.unwrap_or(0);
        let resolved = ConfigFile {
            seed: Some(experiment.seed),
            repeats: Some(repeats),
            horizon: Some(horizon),
            recommend: Some(experiment.recommend),
            snapshot_interval: Some(experiment.snapshot_interval),
            require_unit_losses: Some(experiment.require_unit_losses),
            threads: Some(threads),
            topology: Some(TopologySection {
                num_agents: Some(topology.num_agents()),
                num_actions: Some(topology.num_actions()),
                cells: None,
            }),
            algorithm: Some(resolved_alg),
            environment: Some(resolved_env),
        };
        Ok(LoadedConfig {
            experiment,
            threads,
            resolved,
        })
    }
}

fn alg_sec_name(sec: &AlgorithmSection) -> &'static str {
    match sec {
        AlgorithmSection::Manas { .. } => "manas",
        AlgorithmSection::ManasLs { .. } => "manas_ls",
        AlgorithmSection::RandomSearch => "random_search",
    }
}

fn resolve_algorithm(
    sec: &AlgorithmSection,
    topo: &Topology,
    horizon: usize,
) -> Result<(Algorithm, AlgorithmSection), ConfigError> {
    match *sec {
        AlgorithmSection::Manas { eta, gamma } => {
            let d = manas_defaults(topo, horizon).map_err(|e| invalid("algorithm", e))?;
            let hp = ManasHyperparams {
                eta: eta.unwrap_or(d.eta),
                gamma: gamma.unwrap_or(d.gamma),
                horizon_n: horizon,
                degenerate: d.degenerate,
            };
            if !(hp.eta.is_finite() && hp.eta >= 0.0) {
                return Err(invalid("algorithm.eta", format!("must be finite and >= 0, got {}", hp.eta)));
            }
            if !(0.0..=1.0).contains(&hp.gamma) {
                return Err(invalid("algorithm.gamma", format!("must lie in [0, 1], got {}", hp.gamma)));
            }
            Ok((
                Algorithm::Manas(hp),
                AlgorithmSection::Manas {
                    eta: Some(hp.eta),
                    gamma: Some(hp.gamma),
                },
            ))
        }
        AlgorithmSection::ManasLs {
            solve_period,
            min_samples,
            window,
            window_size,
        } => {
            let d = LsSettings::defaults(topo);
            let default_size = match d.window {
                LsWindow::Sliding { size } => size,
                LsWindow::Full => 0,
            };
            let window = match (window.unwrap_or(WindowKind::Sliding), window_size) {
                (WindowKind::Full, Some(_)) => {
                    return Err(invalid("algorithm.window_size", "only applies to a sliding window"))
                }
                (WindowKind::Full, None) => LsWindow::Full,
                (WindowKind::Sliding, size) => LsWindow::Sliding {
                    size: size.unwrap_or(default_size),
                },
            };
            let ls = LsSettings {
                solve_period: solve_period.unwrap_or(d.solve_period),
                min_samples: min_samples.unwrap_or(d.min_samples),
                window,
            };
            if ls.solve_period == 0 {
                return Err(invalid("algorithm.solve_period", "must be at least 1"));
            }
            if ls.min_samples == 0 {
                return Err(invalid("algorithm.min_samples", "must be at least 1"));
            }
            if let LsWindow::Sliding { size } = ls.window {
                if size < ls.min_samples {
                    return Err(invalid(
                        "algorithm.window_size",
                        format!("{size} is smaller than min_samples {}", ls.min_samples),
                    ));
                }
            }
            let (kind, size) = match ls.window {
                LsWindow::Sliding { size } => (WindowKind::Sliding, Some(size)),
                LsWindow::Full => (WindowKind::Full, None),
            };
            Ok((
                Algorithm::ManasLs(ls),
                AlgorithmSection::ManasLs {
                    solve_period: Some(ls.solve_period),
                    min_samples: Some(ls.min_samples),
                    window: Some(kind),
                    window_size: size,
                },
            ))
        }
        AlgorithmSection::RandomSearch => Ok((Algorithm::RandomSearch, AlgorithmSection::RandomSearch)),
    }
}

fn anchor(path: &Path, base_dir: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

fn resolve_environment(
    sec: &EnvironmentSection,
    topo: &Topology,
    base_dir: &Path,
) -> Result<(EnvironmentSpec, EnvironmentSection), ConfigError> {
    match sec {
        EnvironmentSection::Gsd {
            mu,
            sigma,
            contributions,
        } => {
            let cfg = GsdConfig {
                mu: mu.unwrap_or(DEFAULT_MU),
                sigma: sigma.unwrap_or(DEFAULT_SIGMA),
                contributions: contributions.clone(),
            };
            cfg.validate(topo).map_err(|e| invalid("environment", e))?;
            let resolved = EnvironmentSection::Gsd {
                mu: Some(cfg.mu),
                sigma: Some(cfg.sigma),
                contributions: cfg.contributions.clone(),
            };
            Ok((EnvironmentSpec::Gsd(cfg), resolved))
        }
        EnvironmentSection::Linear {
            noise_std,
            beta_schedule,
            schedule_file,
        } => {
            let schedule = match (beta_schedule, schedule_file) {
                (Some(_), Some(_)) => {
                    return Err(invalid(
                        "environment",
                        "give beta_schedule or schedule_file, not both",
                    ))
                }
                (Some(s), None) => s.clone(),
                (None, Some(path)) => {
                    let path = anchor(path, base_dir);
                    let container = load_container(&path)
                        .map_err(|e| invalid("environment.schedule_file", e))?;
                    if container.topology() != Some(*topo) {
                        return Err(invalid(
                            "environment.schedule_file",
                            format!(
                                "{} declares {}x{} but the experiment is {}x{}",
                                path.display(),
                                container.num_agents,
                                container.num_actions,
                                topo.num_agents(),
                                topo.num_actions()
                            ),
                        ));
                    }
                    container.beta_schedule.ok_or_else(|| {
                        invalid(
                            "environment.schedule_file",
                            format!("{} has no beta_schedule", path.display()),
                        )
                    })?
                }
                (None, None) => return Err(ConfigError::Missing("environment.beta_schedule")),
            };
            let cfg = LinearEnvConfig {
                beta_schedule: schedule,
                noise_std: noise_std.unwrap_or(0.0),
            };
            cfg.validate(topo).map_err(|e| invalid("environment", e))?;
            let resolved = EnvironmentSection::Linear {
                noise_std: Some(cfg.noise_std),
                beta_schedule: Some(cfg.beta_schedule.clone()),
                schedule_file: None,
            };
            Ok((EnvironmentSpec::Linear(cfg), resolved))
        }
        EnvironmentSection::Tabular { benchmark, noisy } => {
            let path = anchor(benchmark, base_dir);
            let bench = load_benchmark(&path).map_err(|e| invalid("environment.benchmark", e))?;
            if bench.topology() != *topo {
                return Err(invalid(
                    "environment.benchmark",
                    format!(
                        "{} declares {}x{} but the experiment is {}x{}",
                        path.display(),
                        bench.topology().num_agents(),
                        bench.topology().num_actions(),
                        topo.num_agents(),
                        topo.num_actions()
                    ),
                ));
            }
            let noisy = noisy.unwrap_or(false);
            let abs = std::path::absolute(&path).unwrap_or(path);
            Ok((
                EnvironmentSpec::Tabular {
                    benchmark: bench,
                    noisy,
                },
                EnvironmentSection::Tabular {
                    benchmark: abs,
                    noisy: Some(noisy),
                },
            ))
        }
    }
}

/// Reads, overrides, and validates a config file.
pub fn load(
    path: &Path,
    overrides: &[(String, toml::Value)],
) -> Result<LoadedConfig, ConfigError> {
    let file = ConfigFile::read(path, overrides)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    file.resolve(base)
}
