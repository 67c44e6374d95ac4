//! Run configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! n_total = 10000
//! n_runs = 20
//! master_seed = 1
//! blocks = true
//! waveplates = false
//! checkpoints = 25
//! fit_window = [100.0, 10000.0]   # optional
//!
//! [strategy]
//! kind = "adaptive"              # or "random", "mub_cycle"
//!
//! [prior]
//! kind = "bures_haar"
//!
//! [filter]
//! particles = 1000
//!
//! [noise]                        # simulated apparatus
//! efficiency = true
//! efficiencies = [1.0, 0.8]
//!
//! [assumed_noise]                # optional; model used by the filter
//!
//! [truth]
//! kind = "random_pure"           # or kind = "fixed", stokes = [..]
//!
//! [output]
//! event_logs = true
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::Strategy;
use crate::error::{Result, TomoError};
use crate::inference::FilterConfig;
use crate::likelihood::NoiseModel;
use crate::priors::PriorKind;
use crate::qubit::QubitState;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthSpec {
    /// A fresh uniformly random pure state per run.
    RandomPure,
    Fixed {
        stokes: [f64; 3],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub event_logs: bool,
    pub trajectories: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            event_logs: true,
            trajectories: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub n_total: u64,
    #[serde(default = "one")]
    pub n_runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "yes")]
    pub blocks: bool,
    #[serde(default)]
    pub waveplates: bool,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<(f64, f64)>,
    #[serde(default = "Strategy::adaptive")]
    pub strategy: Strategy,
    #[serde(default = "bures")]
    pub prior: PriorKind,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumed_noise: Option<NoiseModel>,
    #[serde(default = "random_pure")]
    pub truth: TruthSpec,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_checkpoints() -> usize {
    25
}
fn bures() -> PriorKind {
    PriorKind::BuresHaar
}
fn random_pure() -> TruthSpec {
    TruthSpec::RandomPure
}

impl RunConfig {
    /// Defaults for everything except the measurement budget.
    pub fn new(n_total: u64) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            n_total,
            n_runs: 1,
            master_seed: 0,
            blocks: true,
            waveplates: false,
            checkpoints: default_checkpoints(),
            fit_window: None,
            strategy: Strategy::adaptive(),
            prior: PriorKind::BuresHaar,
            filter: FilterConfig::default(),
            noise: NoiseModel::ideal(),
            assumed_noise: None,
            truth: TruthSpec::RandomPure,
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| TomoError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| TomoError::Config(e.to_string()))
    }

    /// The noise model the filter and selector believe in.
    pub fn inference_noise(&self) -> &NoiseModel {
        self.assumed_noise.as_ref().unwrap_or(&self.noise)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(TomoError::Config(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_total == 0 {
            return Err(TomoError::Config("n_total must be >= 1".into()));
        }
        if self.n_runs == 0 {
            return Err(TomoError::Config("n_runs must be >= 1".into()));
        }
        if self.checkpoints < 2 {
            return Err(TomoError::Config("need at least 2 checkpoints".into()));
        }
        if let Some((lo, hi)) = self.fit_window {
            if !(lo > 0.0 && hi >= lo) {
                return Err(TomoError::Config(format!("bad fit window [{lo}, {hi}]")));
            }
        }
        if let TruthSpec::Fixed { stokes } = self.truth {
            QubitState::from_stokes(stokes)?;
        }
        self.strategy.validate()?;
        self.prior.validate()?;
        self.filter.validate()?;
        self.noise.validate()?;
        if let Some(n) = &self.assumed_noise {
            n.validate()?;
        }
        Ok(())
    }
}
