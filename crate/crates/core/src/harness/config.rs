use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::{ConvexTarget, GeometryError};
use crate::mdp::{make_gridworld, make_random_mdp, make_rps, make_worstcase, VectorMdp, DEFAULT_GRID_HORIZON, DEFAULT_MAP};
use crate::oracle::QLearnConfig;
use crate::solver::SolveConfig;

fn default_repeats() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("trace.csv")
}

fn default_gamma() -> f64 {
    1.0
}

fn default_random_gamma() -> f64 {
    0.9
}

fn default_horizon() -> usize {
    DEFAULT_GRID_HORIZON
}

fn default_rounds() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    /// `map_path` is resolved against the config file's directory; without it
    /// the bundled 54-cell navigation map is used.
    Gridworld {
        #[serde(default)]
        map_path: Option<PathBuf>,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_horizon")]
        horizon_cap: usize,
    },
    Rps {
        #[serde(default = "default_rounds")]
        rounds: usize,
    },
    Worstcase {
        m: usize,
    },
    RandomMdp {
        num_states: usize,
        num_actions: usize,
        m: usize,
        #[serde(default = "default_random_gamma")]
        gamma: f64,
        seed: u64,
    },
}

impl EnvironmentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Gridworld { .. } => "gridworld",
            Self::Rps { .. } => "rps",
            Self::Worstcase { .. } => "worstcase",
            Self::RandomMdp { .. } => "random_mdp",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    #[default]
    ValueIteration,
    /// The learner's seed is XORed with the per-run seed.
    QLearning(QLearnConfig),
}

/// Top-level experiment description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Trace CSV path; the JSON summary goes next to it with a `.json`
    /// extension. Relative paths are taken from the working directory.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Off by default so that repeated runs write identical bytes.
    #[serde(default)]
    pub record_timing: bool,
    pub environment: EnvironmentSpec,
    pub target: ConvexTarget,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base).map_err(|e| match e {
            HarnessError::Parse(msg) => HarnessError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn summary_path(&self) -> PathBuf {
        self.output.with_extension("json")
    }

    /// Per-run seed for run `run_index`.
    pub fn run_seed(&self, run_index: usize) -> u64 {
        self.seed ^ run_index as u64
    }

    fn config_error(field: &str, message: impl Into<String>) -> HarnessError {
        HarnessError::Config { field: field.to_string(), message: message.into() }
    }

    pub fn resolve_map(&self) -> Result<Option<PathBuf>, HarnessError> {
        let EnvironmentSpec::Gridworld { map_path: Some(p), .. } = &self.environment else {
            return Ok(None);
        };
        let resolved = if p.is_absolute() { p.clone() } else { self.base_dir.join(p) };
        if !resolved.is_file() {
            return Err(Self::config_error("environment.map_path", format!("{} does not exist", resolved.display())));
        }
        Ok(Some(resolved))
    }

    /// Builds the environment described by the config.
    pub fn build_environment(&self) -> Result<VectorMdp, HarnessError> {
        let env_err = |e: crate::mdp::MdpError| Self::config_error("environment", e.to_string());
        match &self.environment {
            EnvironmentSpec::Gridworld { gamma, horizon_cap, .. } => {
                let text = match self.resolve_map()? {
                    Some(path) => fs::read_to_string(&path).map_err(|source| HarnessError::Io { path, source })?,
                    None => DEFAULT_MAP.to_string(),
                };
                Ok(make_gridworld(&text, *gamma, *horizon_cap).map_err(env_err)?.mdp)
            }
            EnvironmentSpec::Rps { rounds } => make_rps(*rounds).map_err(env_err),
            EnvironmentSpec::Worstcase { m } => make_worstcase(*m).map_err(env_err),
            EnvironmentSpec::RandomMdp { num_states, num_actions, m, gamma, seed } => {
                make_random_mdp(*num_states, *num_actions, *m, *gamma, *seed).map_err(env_err)
            }
        }
    }

    /// Checks every field, builds the environment and returns it.
    pub fn validate(&self) -> Result<VectorMdp, HarnessError> {
        if self.repeats == 0 {
            return Err(Self::config_error("repeats", "must be >= 1"));
        }
        self.solver.validate().map_err(|e| Self::config_error("solver", e.to_string()))?;
        if let OracleSpec::QLearning(q) = &self.oracle {
            q.validate().map_err(|m| Self::config_error("oracle", m))?;
        }
        let mdp = self.build_environment()?;
        let dim = self.target.validate("target").map_err(|e| match e {
            GeometryError::InvalidTarget { field, reason } => Self::config_error(&field, reason),
            other => Self::config_error("target", other.to_string()),
        })?;
        if dim != mdp.measurement_dim() {
            return Err(Self::config_error(
                "target",
                format!("dimension mismatch: target has {dim}, environment measures {}", mdp.measurement_dim()),
            ));
        }
        Ok(mdp)
    }
}
