//! Experiment configuration, read from TOML with strict key checking.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use smc_forget::fkmodel::{binary_model, forgetting_time_scale, DiscreteFkModel};
use smc_forget::{DiscretePmf, Scheme};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
    pub scenario: Option<ScenarioSection>,
    #[serde(default)]
    pub checks: ChecksSection,
}

/// Two-state flip model: `P(0→1) = P(1→0) = epsilon`, potentials
/// `(g0, g1)` at every time, `P(X_0 = 1) = initial`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub epsilon: f64,
    #[serde(default = "one")]
    pub g0: f64,
    #[serde(default = "one")]
    pub g1: f64,
    #[serde(default = "half")]
    pub initial: f64,
    pub horizon: Option<usize>,
}

/// Grid values; anything left out falls back to the command's default.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Option<Vec<usize>>,
    pub k: Option<Vec<usize>>,
    pub q: Option<Vec<usize>>,
    pub p: Option<u32>,
    pub schemes: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub replicates: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    pub threads: Option<usize>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub init: InitPair,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            replicates: None,
            master_seed: 0,
            threads: None,
            max_steps: default_max_steps(),
            init: InitPair::default(),
        }
    }
}

/// Initial particle vectors for coupling-time runs.
#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum InitPair {
    /// All zeros against all ones.
    #[default]
    Extreme,
    /// The same vector on both sides.
    Identical,
    /// Two independent draws from the initial law.
    Independent,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    pub csv: Option<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: default_dir(), csv: None }
    }
}

/// Delayed-measurement scenarios for `oos-demo`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    /// Late-measurement likelihoods `(G₀′(0), G₀′(1))`.
    pub likelihoods: Vec<[f64; 2]>,
    /// Arrival steps `k+1`.
    pub arrivals: Vec<usize>,
    #[serde(default = "default_scheme")]
    pub scheme: String,
}

/// Settings for `verify-bounds`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default = "default_cases")]
    pub cases: usize,
    /// Multiplies every asserted upper bound; values below 1 tighten the
    /// checks and are meant for exercising the failure path.
    #[serde(default = "one")]
    pub bound_scale: f64,
    #[serde(default = "default_small_n")]
    pub small_n_max: usize,
    #[serde(default = "default_small_k")]
    pub small_k_max: usize,
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            cases: default_cases(),
            bound_scale: 1.0,
            small_n_max: default_small_n(),
            small_k_max: default_small_k(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_max_steps() -> usize {
    smc_forget::coupling::DEFAULT_MAX_STEPS
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_scheme() -> String {
    "state".into()
}
fn default_cases() -> usize {
    10_000
}
fn default_small_n() -> usize {
    8
}
fn default_small_k() -> usize {
    50
}

/// Powers of two `2^lo ..= 2^hi`.
pub fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|e| 1usize << e).collect()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        let m = &self.model;
        if !(m.epsilon > 0.0 && m.epsilon < 0.5) {
            return Err(CliError::Config(format!("model.epsilon = {} must lie in (0, 0.5)", m.epsilon)));
        }
        if !(m.g0 > 0.0 && m.g1 > 0.0 && m.g0.is_finite() && m.g1.is_finite()) {
            return Err(CliError::Config("model.g0 and model.g1 must be positive".into()));
        }
        if !(0.0..=1.0).contains(&m.initial) {
            return Err(CliError::Config(format!("model.initial = {} must lie in [0, 1]", m.initial)));
        }
        let positive = |name: &str, v: &Option<Vec<usize>>| match v {
            Some(v) if v.is_empty() || v.contains(&0) => {
                Err(CliError::Config(format!("grid.{name} must be a nonempty list of positive integers")))
            }
            _ => Ok(()),
        };
        positive("n", &self.grid.n)?;
        positive("q", &self.grid.q)?;
        if let Some(k) = &self.grid.k {
            if k.is_empty() {
                return Err(CliError::Config("grid.k must be nonempty".into()));
            }
        }
        if self.grid.p == Some(0) {
            return Err(CliError::Config("grid.p must be positive".into()));
        }
        if let Some(s) = &self.grid.schemes {
            if s.is_empty() {
                return Err(CliError::Config("grid.schemes must be nonempty".into()));
            }
            self.schemes()?;
        }
        if self.run.replicates == Some(0) {
            return Err(CliError::Config("run.replicates must be positive".into()));
        }
        if self.run.threads == Some(0) {
            return Err(CliError::Config("run.threads must be positive".into()));
        }
        if let Some(sc) = &self.scenario {
            if sc.likelihoods.is_empty() || sc.arrivals.is_empty() || sc.arrivals.contains(&0) {
                return Err(CliError::Config("scenario needs likelihoods and positive arrivals".into()));
            }
            if sc.likelihoods.iter().flatten().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(CliError::Config("scenario likelihoods must be positive".into()));
            }
            sc.scheme.parse::<Scheme>().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if !(self.checks.bound_scale > 0.0) {
            return Err(CliError::Config("checks.bound_scale must be positive".into()));
        }
        Ok(())
    }

    /// The configured model with the given horizon (the config's own
    /// horizon wins when larger).
    pub fn model(&self, horizon: usize) -> Result<DiscreteFkModel, CliError> {
        let m = &self.model;
        let horizon = m.horizon.unwrap_or(0).max(horizon).max(1);
        let model = binary_model(m.epsilon, m.g0, m.g1, horizon)
            .and_then(|b| b.with_initial(DiscretePmf::bernoulli(m.initial)?))
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(model)
    }

    /// `δ_ε` of the configured flip probability.
    pub fn delta(&self) -> f64 {
        forgetting_time_scale(self.model.epsilon)
    }

    pub fn uniform_potentials(&self) -> bool {
        self.model.g0 == self.model.g1
    }

    pub fn n_grid(&self, default: Vec<usize>) -> Vec<usize> {
        self.grid.n.clone().unwrap_or(default)
    }

    pub fn replicates(&self, default: usize) -> usize {
        self.run.replicates.unwrap_or(default)
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>, CliError> {
        match &self.grid.schemes {
            None => Ok(vec![Scheme::State]),
            Some(s) => {
                s.iter().map(|x| x.parse::<Scheme>().map_err(|e| CliError::Config(e.to_string()))).collect()
            }
        }
    }
}
