//! Measurement selection: expected information gain, random and MUB
//! baselines, and the block-size schedule.
//!
//! The information gain of configuration `a` is the mutual information
//! between the state and the next outcome,
//!
//! ```text
//! H[p(g | a, D)] - E_{p(rho | D)} H[p(g | a, rho)]
//! ```
//!
//! which only needs predictive entropies under the current particle set.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::inference::Posterior;
use crate::likelihood::{BinaryChannel, NoiseModel};
use crate::numerics::{
    cross3, dot3, mat_vec3, normalize3, plogp_neg, rotation_between, scale3, KahanSum, Vec3,
};
use crate::qubit::{canonical_axis, MeasurementConfig, QubitState};

/// Candidate set for adaptive selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CandidateConfig {
    /// Fixed quasi-uniform axes on the canonical hemisphere.
    pub n_grid: usize,
    /// Fresh uniform-random axes drawn at every step.
    pub n_fresh: usize,
    /// Also consider the axis of the current posterior mean.
    pub include_mean_axis: bool,
    /// Compass-search iterations around the best candidate; 0 disables.
    pub refine_iters: usize,
    /// Initial compass step in radians, halved after each failed iteration.
    pub refine_step: f64,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self {
            n_grid: 30,
            n_fresh: 10,
            include_mean_axis: true,
            refine_iters: 8,
            refine_step: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MubAlignment {
    /// The x, y, z axes.
    Generic,
    /// One MUB axis along the true state.
    Best,
    /// The true state along `(1, 1, 1)/sqrt(3)` of the MUB frame.
    Worst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Adaptive {
        #[serde(default)]
        candidates: CandidateConfig,
    },
    Random,
    MubCycle {
        #[serde(default = "generic")]
        alignment: MubAlignment,
    },
}

fn generic() -> MubAlignment {
    MubAlignment::Generic
}

impl Strategy {
    pub fn adaptive() -> Self {
        Strategy::Adaptive {
            candidates: CandidateConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Strategy::Adaptive { candidates } = self {
            let total =
                candidates.n_grid + candidates.n_fresh + usize::from(candidates.include_mean_axis);
            if total == 0 {
                return Err(TomoError::Config(
                    "adaptive strategy needs at least one candidate".into(),
                ));
            }
            if !(candidates.refine_step > 0.0 && candidates.refine_step.is_finite()) {
                return Err(TomoError::Config(format!(
                    "refine_step must be > 0, got {}",
                    candidates.refine_step
                )));
            }
        }
        Ok(())
    }
}

/// Block size after `n` measurements: `max(floor(n / 100), 1)`.
pub fn block_size(n: u64) -> u64 {
    (n / 100).max(1)
}

/// `n` quasi-uniform unit vectors on the full sphere (spherical Fibonacci).
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// `n` quasi-uniform unit vectors on the upper hemisphere `z > 0`.
pub fn fibonacci_hemisphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

pub fn random_axis<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let g: Vec3 = std::array::from_fn(|_| rng.sample(StandardNormal));
        if let Some(v) = normalize3(&g) {
            return v;
        }
    }
}

/// Information gain in nats from a weighted cloud of Stokes vectors.
pub(crate) fn info_gain_cloud(
    weights: &[f64],
    stokes: &[Vec3],
    axis: &Vec3,
    channel: &BinaryChannel,
) -> f64 {
    let mut pred0 = KahanSum::default();
    let mut pred1 = KahanSum::default();
    let mut cond = KahanSum::default();
    for (w, s) in weights.iter().zip(stokes) {
        if *w == 0.0 {
            continue;
        }
        let [p0, p1] = channel.probs(dot3(axis, s));
        pred0.add(w * p0);
        pred1.add(w * p1);
        cond.add(w * (plogp_neg(p0) + plogp_neg(p1)));
    }
    plogp_neg(pred0.value()) + plogp_neg(pred1.value()) - cond.value()
}

/// Expected information gain of measuring `config` next.
pub fn info_gain(post: &Posterior, config: &MeasurementConfig, noise: &NoiseModel) -> Result<f64> {
    let channel = BinaryChannel::new(noise)?;
    let (w, s) = post.weighted_stokes();
    Ok(info_gain_cloud(&w, &s, &config.axis(), &channel))
}

/// Compass search on the sphere starting from `start` (gain `g`). Moves only
/// on strict improvement, so a flat landscape leaves `start` untouched.
fn refine_axis(
    start: Vec3,
    mut g: f64,
    iters: usize,
    step: f64,
    gain: impl Fn(&Vec3) -> f64 + Sync,
) -> Vec3 {
    let mut b = start;
    let mut delta = step;
    for _ in 0..iters {
        let seed = if b[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let Some(u) = normalize3(&cross3(&b, &seed)) else {
            break;
        };
        let v = cross3(&b, &u);
        let (c, sn) = (delta.cos(), delta.sin());
        let probes: Vec<Vec3> = [u, scale3(&u, -1.0), v, scale3(&v, -1.0)]
            .iter()
            .map(|t| std::array::from_fn(|k| c * b[k] + sn * t[k]))
            .collect();
        let gains: Vec<f64> = probes.par_iter().map(&gain).collect();
        match argmax_first(&gains) {
            Some(i) if gains[i] > g => {
                b = probes[i];
                g = gains[i];
            }
            _ => delta *= 0.5,
        }
    }
    b
}

/// Index of the first maximum; ties go to the lowest index.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ if v.is_nan() => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Strategy bound to a run. MUB best/worst frames need the true state, which
/// only simulations know.
#[derive(Clone, Debug)]
pub struct Selector {
    strategy: Strategy,
    grid: Vec<Vec3>,
    mub_frame: [Vec3; 3],
}

impl Selector {
    pub fn new(strategy: Strategy, truth: Option<&QubitState>) -> Result<Self> {
        strategy.validate()?;
        let grid = match &strategy {
            Strategy::Adaptive { candidates } => fibonacci_hemisphere(candidates.n_grid),
            _ => Vec::new(),
        };
        let standard = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mub_frame = match &strategy {
            Strategy::MubCycle { alignment } if *alignment != MubAlignment::Generic => {
                let t = truth.and_then(|t| normalize3(&t.stokes())).ok_or_else(|| {
                    TomoError::Config(
                        "MUB best/worst alignment needs a non-mixed true state".into(),
                    )
                })?;
                let anchor = match alignment {
                    MubAlignment::Best => [0.0, 0.0, 1.0],
                    _ => [1.0 / 3f64.sqrt(); 3],
                };
                let r = rotation_between(&anchor, &t);
                standard.map(|e| mat_vec3(&r, &e))
            }
            _ => standard,
        };
        Ok(Self {
            strategy,
            grid,
            mub_frame,
        })
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn mub_frame(&self) -> [Vec3; 3] {
        self.mub_frame
    }

    /// Candidate axes for the adaptive strategy, in tie-break order:
    /// fixed grid, fresh random axes, posterior-mean axis.
    pub fn candidates(&self, post: &Posterior, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
        let Strategy::Adaptive { candidates } = &self.strategy else {
            return Vec::new();
        };
        let mut axes = self.grid.clone();
        for _ in 0..candidates.n_fresh {
            axes.push(canonical_axis(random_axis(rng)));
        }
        if candidates.include_mean_axis {
            if let Some(m) = normalize3(&post.mean_state().stokes()) {
                axes.push(canonical_axis(m));
            }
        }
        axes
    }

    /// Chooses the configuration for selection step `step` (0-based).
    pub fn select_measurement(
        &self,
        post: &Posterior,
        noise: &NoiseModel,
        step: u64,
        rng: &mut ChaCha8Rng,
    ) -> Result<MeasurementConfig> {
        match &self.strategy {
            Strategy::Random => MeasurementConfig::from_axis(random_axis(rng)),
            Strategy::MubCycle { .. } => {
                MeasurementConfig::from_axis(self.mub_frame[(step % 3) as usize])
            }
            Strategy::Adaptive { candidates } => {
                let axes = self.candidates(post, rng);
                let channel = BinaryChannel::new(noise)?;
                let (w, s) = post.weighted_stokes();
                let gains: Vec<f64> = axes
                    .par_iter()
                    .map(|a| info_gain_cloud(&w, &s, a, &channel))
                    .collect();
                let best = argmax_first(&gains).unwrap_or(0);
                let axis = refine_axis(
                    axes[best],
                    gains[best],
                    candidates.refine_iters,
                    candidates.refine_step,
                    |a| info_gain_cloud(&w, &s, a, &channel),
                );
                MeasurementConfig::from_axis(canonical_axis(axis))
            }
        }
    }
}
