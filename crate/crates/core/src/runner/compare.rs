//! Several strategies on identical seeds and true states.
//!
//! ```toml
//! schema_version = 1
//!
//! [base]
//! schema_version = 1
//! n_total = 10000
//! n_runs = 20
//!
//! [[variant]]
//! name = "adaptive"
//! strategy = { kind = "adaptive" }
//!
//! [[variant]]
//! name = "mub_worst"
//! strategy = { kind = "mub_cycle", alignment = "worst" }
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::CONFIG_SCHEMA_VERSION;
use super::output::write_experiment;
use super::{run_experiment, ExperimentResult, RunConfig, TruthSpec};
use crate::design::Strategy;
use crate::error::{Result, TomoError};
use crate::likelihood::NoiseModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumed_noise: Option<NoiseModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthSpec>,
}

impl Variant {
    pub fn new(name: &str, strategy: Strategy) -> Self {
        Self {
            name: name.into(),
            strategy,
            blocks: None,
            assumed_noise: None,
            truth: None,
        }
    }

    /// The base config with this variant's overrides applied.
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        cfg.strategy = self.strategy.clone();
        if let Some(b) = self.blocks {
            cfg.blocks = b;
        }
        if let Some(n) = &self.assumed_noise {
            cfg.assumed_noise = Some(n.clone());
        }
        if let Some(t) = &self.truth {
            cfg.truth = t.clone();
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub schema_version: u32,
    pub base: RunConfig,
    #[serde(rename = "variant")]
    pub variants: Vec<Variant>,
}

impl CompareConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| TomoError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(TomoError::Config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.variants.is_empty() {
            return Err(TomoError::Config(
                "compare needs at least one [[variant]]".into(),
            ));
        }
        for (i, v) in self.variants.iter().enumerate() {
            if v.name.is_empty() || v.name.contains(['/', '\\']) {
                return Err(TomoError::Config(format!(
                    "variant name `{}` is not a valid directory name",
                    v.name
                )));
            }
            if self.variants[..i].iter().any(|u| u.name == v.name) {
                return Err(TomoError::Config(format!(
                    "duplicate variant name `{}`",
                    v.name
                )));
            }
            v.apply(&self.base).validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    pub exponent: Option<f64>,
    pub exponent_std_err: Option<f64>,
    pub prefactor: Option<f64>,
    pub final_n: u64,
    pub final_infid_to_true: Option<f64>,
    pub failed_runs: usize,
}

impl ComparisonRow {
    pub fn from_result(name: &str, res: &ExperimentResult) -> Self {
        let fit = res.fit_to_true.as_ref();
        let last = res.final_point();
        Self {
            name: name.into(),
            exponent: fit.map(|f| f.exponent),
            exponent_std_err: fit.map(|f| f.exponent_std_err),
            prefactor: fit.map(|f| f.prefactor),
            final_n: last.map_or(0, |p| p.n),
            final_infid_to_true: last.map(|p| p.infid_to_true),
            failed_runs: res.runs.iter().filter(|r| r.failure.is_some()).count(),
        }
    }
}

/// Runs every variant with the base config's master seed.
pub fn compare_strategies(cfg: &CompareConfig) -> Result<Vec<(String, ExperimentResult)>> {
    cfg.validate()?;
    cfg.variants
        .iter()
        .map(|v| Ok((v.name.clone(), run_experiment(&v.apply(&cfg.base))?)))
        .collect()
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "name",
        "exponent",
        "exponent_std_err",
        "prefactor",
        "final_n",
        "final_infid_to_true",
        "failed_runs",
    ])?;
    let o = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.name.clone(),
            o(r.exponent),
            o(r.exponent_std_err),
            o(r.prefactor),
            r.final_n.to_string(),
            o(r.final_infid_to_true),
            r.failed_runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `comparison.csv` plus one experiment directory per variant.
pub fn write_comparison(
    results: &[(String, ExperimentResult)],
    dir: &Path,
) -> Result<Vec<ComparisonRow>> {
    std::fs::create_dir_all(dir)?;
    let rows: Vec<ComparisonRow> = results
        .iter()
        .map(|(n, r)| ComparisonRow::from_result(n, r))
        .collect();
    for (name, res) in results {
        write_experiment(res, &dir.join(name))?;
    }
    write_comparison_csv(
        &rows,
        std::io::BufWriter::new(std::fs::File::create(dir.join("comparison.csv"))?),
    )?;
    Ok(rows)
}
