//! Multi-run experiments: select, draw, update, log at checkpoints, then
//! average across runs and fit a power law.
//!
//! Seeds: run `i` uses `run_seed = derive_seed(master_seed, i)`, and each of
//! its four streams (truth, filter, apparatus, selector) takes
//! `derive_seed(run_seed, j)` for `j = 0..4`. Strategies never see each
//! other's streams, so two strategies run with the same master seed face the
//! same true states.

pub mod compare;
pub mod config;
pub mod fit;
pub mod output;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{block_size, random_axis, Selector};
use crate::error::{Result, TomoError};
use crate::inference::{FilterConfig, Posterior};
use crate::likelihood::NoiseModel;
use crate::numerics::{derive_seed, KahanSum};
use crate::priors::PriorKind;
use crate::qubit::{MeasurementConfig, QubitState};
use crate::simlab::{Apparatus, EventRecord};
use crate::waveplate::realize_with_waveplates;

pub use compare::{compare_strategies, CompareConfig, ComparisonRow, Variant};
pub use config::{OutputConfig, RunConfig, TruthSpec, CONFIG_SCHEMA_VERSION};
pub use fit::{default_fit_window, fit_power_law, PowerLawFit};

/// Logged state after the block that brought the total to `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub n: u64,
    /// Configuration of the block ending at `n`; `None` for the `n = 0` row.
    pub config: Option<MeasurementConfig>,
    pub k: u64,
    pub counts: [u64; 2],
    pub infid_to_mean: f64,
    /// `None` when the true state is unknown (replay without a truth).
    pub infid_to_true: Option<f64>,
    pub ess: f64,
    /// Seconds since the run started. Not written to any output file.
    pub wall_clock: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub run: u64,
    pub truth: u64,
    pub filter: u64,
    pub apparatus: u64,
    pub selector: u64,
}

impl RunSeeds {
    pub fn derive(master: u64, index: usize) -> Self {
        let run = derive_seed(master, index as u64);
        Self {
            run,
            truth: derive_seed(run, 0),
            filter: derive_seed(run, 1),
            apparatus: derive_seed(run, 2),
            selector: derive_seed(run, 3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    /// Measurements completed when the failure happened.
    pub step: u64,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub index: usize,
    pub seeds: RunSeeds,
    pub truth: QubitState,
    pub records: Vec<RunRecord>,
    pub events: Vec<EventRecord>,
    pub resamples: u64,
    pub failure: Option<RunFailure>,
}

/// Cross-run average at one logged `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragePoint {
    pub n: u64,
    pub runs: usize,
    pub infid_to_mean: f64,
    pub infid_to_true: f64,
    /// Standard error of `infid_to_true` across runs; 0 for a single run.
    pub infid_to_true_sem: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: RunConfig,
    pub runs: Vec<RunResult>,
    pub average: Vec<AveragePoint>,
    pub fit_window: (f64, f64),
    pub fit_to_true: Option<PowerLawFit>,
    pub fit_to_mean: Option<PowerLawFit>,
    /// Why a fit is missing, if one is.
    pub fit_note: Option<String>,
}

impl ExperimentResult {
    /// First run failure as an error, for callers that want all-or-nothing.
    pub fn first_failure(&self) -> Option<TomoError> {
        self.runs.iter().find_map(|r| {
            r.failure.as_ref().map(|f| TomoError::RunFailed {
                run: r.index,
                step: f.step,
                message: f.message.clone(),
            })
        })
    }

    pub fn average_curve(&self) -> Vec<(f64, f64)> {
        self.average
            .iter()
            .map(|p| (p.n as f64, p.infid_to_true))
            .collect()
    }

    pub fn final_point(&self) -> Option<&AveragePoint> {
        self.average.last()
    }
}

/// `{0}` plus `count` log-spaced values from 1 to `n_total`, deduplicated.
pub fn checkpoints(n_total: u64, count: usize) -> Vec<u64> {
    let mut out = vec![0];
    let top = (n_total as f64).ln();
    for i in 0..count {
        let v = (top * i as f64 / (count - 1) as f64).exp().round() as u64;
        let v = v.clamp(1, n_total);
        if *out.last().unwrap() != v {
            out.push(v);
        }
    }
    out
}

fn truth_for(spec: &TruthSpec, seed: u64) -> Result<QubitState> {
    match spec {
        TruthSpec::Fixed { stokes } => QubitState::from_stokes(*stokes),
        TruthSpec::RandomPure => {
            QubitState::pure(random_axis(&mut ChaCha8Rng::seed_from_u64(seed)))
        }
    }
}

fn snapshot(
    post: &Posterior,
    truth: Option<&QubitState>,
    n: u64,
    last: Option<(&MeasurementConfig, u64, [u64; 2])>,
    start: Instant,
) -> RunRecord {
    let mean = post.mean_state();
    RunRecord {
        n,
        config: last.map(|l| *l.0),
        k: last.map_or(0, |l| l.1),
        counts: last.map_or([0, 0], |l| l.2),
        infid_to_mean: post.mean_infidelity(&mean),
        infid_to_true: truth.map(|t| post.mean_infidelity(t)),
        ess: post.ess(),
        wall_clock: start.elapsed().as_secs_f64(),
    }
}

/// One complete run. Errors after the posterior exists are recorded in
/// `failure` and the records logged so far are kept.
pub fn run_single(cfg: &RunConfig, index: usize) -> Result<RunResult> {
    let seeds = RunSeeds::derive(cfg.master_seed, index);
    let truth = truth_for(&cfg.truth, seeds.truth)?;
    let start = Instant::now();
    let mut post = Posterior::init(cfg.prior, cfg.filter.clone(), seeds.filter)?;
    let mut app = Apparatus::new(truth, cfg.noise.clone(), seeds.apparatus)?;
    let mut records = vec![snapshot(&post, Some(&truth), 0, None, start)];
    let marks = checkpoints(cfg.n_total, cfg.checkpoints);
    let mut next_mark = 1;

    let mut body = || -> Result<()> {
        let selector = Selector::new(cfg.strategy.clone(), Some(&truth))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seeds.selector);
        let noise = cfg.inference_noise();
        let mut n = 0;
        let mut block = 0;
        while n < cfg.n_total {
            let chosen = selector.select_measurement(&post, noise, block, &mut rng)?;
            let chosen = if cfg.waveplates {
                realize_with_waveplates(chosen.axis())?
            } else {
                chosen
            };
            let k = if cfg.blocks { block_size(n) } else { 1 }.min(cfg.n_total - n);
            let counts = app.draw_block(&chosen, k)?;
            post.update(&chosen, &counts, noise)?;
            n += k;
            block += 1;
            if next_mark < marks.len() && n >= marks[next_mark] {
                let c = counts.counts();
                records.push(snapshot(
                    &post,
                    Some(&truth),
                    n,
                    Some((&chosen, k, [c[0], c[1]])),
                    start,
                ));
                while next_mark < marks.len() && marks[next_mark] <= n {
                    next_mark += 1;
                }
            }
        }
        Ok(())
    };
    let failure = body().err().map(|e| RunFailure {
        step: app.measured(),
        message: e.to_string(),
    });
    Ok(RunResult {
        index,
        seeds,
        truth,
        records,
        events: app.event_log().to_vec(),
        resamples: post.resample_count(),
        failure,
    })
}

/// Averages `infid_to_true` and `infid_to_mean` across runs at each logged
/// `n`. Rows missing from failed runs are averaged over the runs present.
pub fn aggregate(runs: &[RunResult]) -> Vec<AveragePoint> {
    let mut by_n: std::collections::BTreeMap<u64, Vec<&RunRecord>> = Default::default();
    for r in runs {
        for rec in &r.records {
            if rec.infid_to_true.is_some() {
                by_n.entry(rec.n).or_default().push(rec);
            }
        }
    }
    by_n.into_iter()
        .map(|(n, recs)| {
            let m = recs.len() as f64;
            let mut to_mean = KahanSum::default();
            let mut to_true = KahanSum::default();
            for r in &recs {
                to_mean.add(r.infid_to_mean);
                to_true.add(r.infid_to_true.unwrap_or(0.0));
            }
            let mean_true = to_true.value() / m;
            let sem = if recs.len() > 1 {
                let ss: f64 = recs
                    .iter()
                    .map(|r| (r.infid_to_true.unwrap_or(0.0) - mean_true).powi(2))
                    .sum();
                (ss / (m - 1.0) / m).sqrt()
            } else {
                0.0
            };
            AveragePoint {
                n,
                runs: recs.len(),
                infid_to_mean: to_mean.value() / m,
                infid_to_true: mean_true,
                infid_to_true_sem: sem,
            }
        })
        .collect()
}

/// Runs `cfg.n_runs` independent runs in parallel and aggregates them. The
/// result does not depend on the thread count.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let runs = (0..cfg.n_runs)
        .into_par_iter()
        .map(|i| run_single(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let average = aggregate(&runs);
    let fit_window = cfg
        .fit_window
        .unwrap_or_else(|| default_fit_window(cfg.n_total));
    let curve_true: Vec<(f64, f64)> = average
        .iter()
        .map(|p| (p.n as f64, p.infid_to_true))
        .collect();
    let curve_mean: Vec<(f64, f64)> = average
        .iter()
        .map(|p| (p.n as f64, p.infid_to_mean))
        .collect();
    let (fit_to_true, fit_note) = match fit_power_law(&curve_true, fit_window) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let fit_to_mean = fit_power_law(&curve_mean, fit_window).ok();
    Ok(ExperimentResult {
        config: cfg.clone(),
        runs,
        average,
        fit_window,
        fit_to_true,
        fit_to_mean,
        fit_note,
    })
}

/// Rebuilds the posterior trajectory from an event log, one record per
/// logged block. With the run's filter seed this reproduces the original
/// posterior exactly.
pub fn replay(
    events: &[EventRecord],
    prior: PriorKind,
    filter: FilterConfig,
    noise: &NoiseModel,
    filter_seed: u64,
    truth: Option<&QubitState>,
) -> Result<Vec<RunRecord>> {
    let start = Instant::now();
    let mut post = Posterior::init(prior, filter, filter_seed)?;
    let mut out = vec![snapshot(&post, truth, 0, None, start)];
    let mut n = 0;
    for e in events {
        let counts = e.counts();
        if counts.total() != e.k || e.n != n + e.k {
            return Err(TomoError::Config(format!(
                "event log inconsistent at step {}",
                e.step
            )));
        }
        let config = e.config()?;
        post.update(&config, &counts, noise)
            .map_err(|err| TomoError::RunFailed {
                run: 0,
                step: n,
                message: err.to_string(),
            })?;
        n = e.n;
        out.push(snapshot(
            &post,
            truth,
            n,
            Some((&config, e.k, [e.count_0, e.count_1])),
            start,
        ));
    }
    Ok(out)
}
