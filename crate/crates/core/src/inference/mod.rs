//! Particle-filter posterior over qubit states.
//!
//! Sequential importance sampling with log-space weights. When the effective
//! sample size drops below `ess_threshold_fraction * S`, particles are redrawn
//! multinomially and rejuvenated by Metropolis-Hastings moves on the
//! radius-1/2 3-sphere, targeting the full posterior under the uniform
//! (Bures) base measure. The full-data likelihood used by the moves is
//! evaluated from a compressed history keyed by measurement configuration, so
//! neither updates nor moves re-scan raw observations.

mod snapshot;

pub use snapshot::{PosteriorSnapshot, SNAPSHOT_VERSION};

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::likelihood::{BinaryChannel, NoiseModel, OutcomeCounts};
use crate::numerics::{compensated_sum, dot3, normalize_log_weights, splitmix64, KahanSum, Vec3};
use crate::priors::{sample_one, PriorKind};
use crate::qubit::{embed, fidelity, project, MeasurementConfig, QubitState, SphereCoord};

/// Particle-filter tuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub particles: usize,
    /// Resample when `ESS < ess_threshold_fraction * particles`.
    pub ess_threshold_fraction: f64,
    /// Metropolis-Hastings sweeps per resample.
    pub mh_steps: usize,
    /// Initial proposal scale, radians on the unit 3-sphere.
    pub mh_step_scale: f64,
    pub target_acceptance: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 1000,
            ess_threshold_fraction: 0.5,
            mh_steps: 20,
            mh_step_scale: 0.1,
            target_acceptance: 0.35,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(TomoError::InvalidCount(format!(
                "need at least 2 particles, got {}",
                self.particles
            )));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold_fraction) {
            return Err(TomoError::Config(
                "ess_threshold_fraction must lie in [0, 1]".into(),
            ));
        }
        if !(self.mh_step_scale.is_finite() && self.mh_step_scale > 0.0) {
            return Err(TomoError::Config("mh_step_scale must be > 0".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(TomoError::Config(
                "target_acceptance must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub coord: SphereCoord,
    pub state: QubitState,
    /// Normalized log weight: `sum exp(log_weight) = 1` across the set.
    pub log_weight: f64,
}

impl Particle {
    fn at(coord: SphereCoord, log_weight: f64) -> Self {
        Self {
            coord,
            state: project(&coord),
            log_weight,
        }
    }
}

/// Accumulated counts for one distinct measurement configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub axis: Vec3,
    pub counts: OutcomeCounts,
}

/// Diagnostics from one resample-move pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveStats {
    /// Acceptance fraction over all particles in the final sweep.
    pub final_acceptance: f64,
    /// Acceptance fraction over every proposal in the pass.
    pub mean_acceptance: f64,
    /// Proposal scale after adaptation.
    pub step_scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateReport {
    pub ess_before_resample: f64,
    pub resampled: Option<MoveStats>,
}

/// Weighted particle approximation of `p(rho | D)`.
#[derive(Clone, Debug)]
pub struct Posterior {
    particles: Vec<Particle>,
    history: BTreeMap<[i64; 3], HistoryEntry>,
    step_count: u64,
    rng: ChaCha8Rng,
    config: FilterConfig,
    step_scale: f64,
    resample_count: u64,
}

impl Posterior {
    /// `config.particles` draws from `prior`, uniform weights, empty history.
    ///
    /// The Bures cloud is a randomly rotated super-Fibonacci point set on the
    /// 3-sphere: each point is marginally uniform, but the set has far lower
    /// discrepancy than iid draws. Induced-measure clouds use antithetic
    /// pairs `(s, -s)`.
    pub fn init(prior: PriorKind, config: FilterConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        prior.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lw = -(config.particles as f64).ln();
        let n = config.particles;
        let mut particles = Vec::with_capacity(n);
        match prior {
            PriorKind::BuresHaar => {
                let left = random_quaternion(&mut rng);
                let right = random_quaternion(&mut rng);
                for q in super_fibonacci(n) {
                    let x = quat_mul(&quat_mul(&left, &q), &right);
                    let c = SphereCoord::from_direction(x).ok_or(TomoError::NonFinite {
                        what: "initial particle",
                    })?;
                    particles.push(Particle::at(c, lw));
                }
            }
            PriorKind::InducedPure { .. } => {
                while particles.len() < n {
                    let c = embed(&sample_one(prior, &mut rng)).coords();
                    particles.push(Particle::at(SphereCoord::new(c)?, lw));
                    if particles.len() < n {
                        particles.push(Particle::at(
                            SphereCoord::new([-c[0], -c[1], -c[2], c[3]])?,
                            lw,
                        ));
                    }
                }
            }
        }
        let step_scale = config.mh_step_scale;
        Ok(Self {
            particles,
            history: BTreeMap::new(),
            step_count: 0,
            rng,
            config,
            step_scale,
            resample_count: 0,
        })
    }

    /// Builds a posterior from explicit states and unnormalized weights.
    pub fn from_weighted_states(
        states: &[(QubitState, f64)],
        config: FilterConfig,
        seed: u64,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(TomoError::InvalidCount("need at least one particle".into()));
        }
        let mut lw: Vec<f64> = states
            .iter()
            .map(|(_, w)| {
                if *w >= 0.0 && w.is_finite() {
                    w.ln()
                } else {
                    f64::NAN
                }
            })
            .collect();
        if lw.iter().any(|x| x.is_nan()) {
            return Err(TomoError::Config(
                "weights must be finite and non-negative".into(),
            ));
        }
        normalize_log_weights(&mut lw).ok_or(TomoError::FilterDegenerate { step: 0 })?;
        let particles = states
            .iter()
            .zip(lw)
            .map(|((s, _), w)| Particle::at(embed(s), w))
            .collect();
        let config = FilterConfig {
            particles: states.len(),
            ..config
        };
        let step_scale = config.mh_step_scale;
        Ok(Self {
            particles,
            history: BTreeMap::new(),
            step_count: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
            step_scale,
            resample_count: 0,
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    /// Number of measurements absorbed so far.
    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn history(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.history.values()
    }

    pub fn distinct_configs(&self) -> usize {
        self.history.len()
    }

    pub fn resample_count(&self) -> u64 {
        self.resample_count
    }

    pub fn step_scale(&self) -> f64 {
        self.step_scale
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight.exp()).collect()
    }

    /// Absorbs one block and resamples if the effective sample size falls
    /// below threshold.
    pub fn update(
        &mut self,
        config: &MeasurementConfig,
        counts: &OutcomeCounts,
        noise: &NoiseModel,
    ) -> Result<UpdateReport> {
        self.reweight(config, counts, noise)?;
        let ess = self.ess();
        let resampled = if ess < self.config.ess_threshold_fraction * self.particles.len() as f64 {
            Some(self.resample_move(noise)?)
        } else {
            None
        };
        Ok(UpdateReport {
            ess_before_resample: ess,
            resampled,
        })
    }

    /// Importance-weight update for one block, without resampling. Costs
    /// `O(S)` regardless of how much data was seen before.
    pub fn reweight(
        &mut self,
        config: &MeasurementConfig,
        counts: &OutcomeCounts,
        noise: &NoiseModel,
    ) -> Result<()> {
        let c = counts.counts();
        if c.len() != 2 {
            return Err(TomoError::OutcomeMismatch {
                expected: 2,
                got: c.len(),
            });
        }
        let channel = BinaryChannel::new(noise)?;
        let b = config.axis();
        let (n0, n1) = (c[0] as f64, c[1] as f64);
        let mut lw: Vec<f64> = self
            .particles
            .par_iter()
            .map(|p| p.log_weight + channel.log_likelihood(dot3(&b, &p.state.stokes()), n0, n1))
            .collect();
        normalize_log_weights(&mut lw).ok_or(TomoError::FilterDegenerate {
            step: self.step_count + counts.total(),
        })?;
        for (p, w) in self.particles.iter_mut().zip(lw) {
            p.log_weight = w;
        }
        let key = config.key();
        match self.history.get_mut(&key) {
            Some(entry) => entry.counts.merge(counts)?,
            None => {
                self.history.insert(
                    key,
                    HistoryEntry {
                        axis: b,
                        counts: counts.clone(),
                    },
                );
            }
        }
        self.step_count += counts.total();
        Ok(())
    }

    /// Effective sample size `1 / sum w^2`.
    pub fn ess(&self) -> f64 {
        1.0 / compensated_sum(self.particles.iter().map(|p| (2.0 * p.log_weight).exp()))
    }

    /// Multinomial redraw followed by `mh_steps` Metropolis-Hastings sweeps.
    pub fn resample_move(&mut self, noise: &NoiseModel) -> Result<MoveStats> {
        let channel = BinaryChannel::new(noise)?;
        let s = self.particles.len();

        // Multinomial redraw.
        let mut cdf = Vec::with_capacity(s);
        let mut acc = KahanSum::default();
        for p in &self.particles {
            acc.add(p.log_weight.exp());
            cdf.push(acc.value());
        }
        let total = acc.value();
        let lw = -(s as f64).ln();
        let redrawn: Vec<Particle> = (0..s)
            .map(|_| {
                let u = self.rng.random::<f64>() * total;
                let idx = cdf.partition_point(|&c| c <= u).min(s - 1);
                Particle {
                    log_weight: lw,
                    ..self.particles[idx]
                }
            })
            .collect();
        self.particles = redrawn;

        // Move phase.
        let data: Vec<(Vec3, f64, f64)> = self
            .history
            .values()
            .map(|e| {
                let c = e.counts.counts();
                (e.axis, c[0] as f64, c[1] as f64)
            })
            .collect();
        let log_lik = |st: &QubitState| -> f64 {
            let sv = st.stokes();
            let mut ll = 0.0;
            for (b, n0, n1) in &data {
                ll += channel.log_likelihood(dot3(b, &sv), *n0, *n1);
            }
            ll
        };

        let base = self.rng.next_u64();
        let mut chains: Vec<(Particle, f64, ChaCha8Rng)> = self
            .particles
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                (
                    *p,
                    log_lik(&p.state),
                    ChaCha8Rng::seed_from_u64(splitmix64(base ^ (i as u64))),
                )
            })
            .collect();

        let mut total_accepted = 0usize;
        let mut final_acceptance = 0.0;
        for sweep in 0..self.config.mh_steps {
            let scale = self.step_scale;
            let accepted: usize = chains
                .par_iter_mut()
                .map(|(p, ll, rng)| {
                    let proposal = propose(&p.coord, scale, rng);
                    let state = project(&proposal);
                    let ll_new = log_lik(&state);
                    let log_u: f64 = rng.random::<f64>().ln();
                    if ll_new.is_finite() && log_u < ll_new - *ll {
                        *p = Particle {
                            coord: proposal,
                            state,
                            log_weight: p.log_weight,
                        };
                        *ll = ll_new;
                        1
                    } else {
                        0
                    }
                })
                .sum();
            total_accepted += accepted;
            final_acceptance = accepted as f64 / s as f64;
            // Robbins-Monro step on the log scale.
            let gain = 1.0 / ((sweep + 1) as f64).sqrt();
            let log_scale =
                self.step_scale.ln() + gain * (final_acceptance - self.config.target_acceptance);
            self.step_scale = log_scale.exp().clamp(1e-7, std::f64::consts::FRAC_PI_2);
        }
        self.particles = chains.into_iter().map(|(p, _, _)| p).collect();
        self.resample_count += 1;
        let proposals = (self.config.mh_steps * s).max(1);
        Ok(MoveStats {
            final_acceptance,
            mean_acceptance: total_accepted as f64 / proposals as f64,
            step_scale: self.step_scale,
        })
    }

    /// Bayesian mean estimate: weighted mean of particle Stokes vectors.
    pub fn mean_state(&self) -> QubitState {
        let mut acc = [KahanSum::default(); 3];
        for p in &self.particles {
            let w = p.log_weight.exp();
            let s = p.state.stokes();
            for k in 0..3 {
                acc[k].add(w * s[k]);
            }
        }
        QubitState::from_stokes_clamped([acc[0].value(), acc[1].value(), acc[2].value()])
    }

    /// `sum_s w_s (1 - F(rho_s, reference))`.
    pub fn mean_infidelity(&self, reference: &QubitState) -> f64 {
        compensated_sum(
            self.particles
                .iter()
                .map(|p| p.log_weight.exp() * (1.0 - fidelity(&p.state, reference))),
        )
        .clamp(0.0, 1.0)
    }

    /// Posterior predictive `p(g | config, D)`.
    pub fn predictive_probs(
        &self,
        config: &MeasurementConfig,
        noise: &NoiseModel,
    ) -> Result<Vec<f64>> {
        let channel = BinaryChannel::new(noise)?;
        let b = config.axis();
        let mut acc = [KahanSum::default(); 2];
        for p in &self.particles {
            let w = p.log_weight.exp();
            let pr = channel.probs(dot3(&b, &p.state.stokes()));
            acc[0].add(w * pr[0]);
            acc[1].add(w * pr[1]);
        }
        Ok(vec![acc[0].value(), acc[1].value()])
    }

    /// Normalized weights and Stokes vectors, for bulk expectation work.
    pub(crate) fn weighted_stokes(&self) -> (Vec<f64>, Vec<Vec3>) {
        self.particles
            .iter()
            .map(|p| (p.log_weight.exp(), p.state.stokes()))
            .unzip()
    }
}

/// Super-Fibonacci spiral: `n` quasi-uniform unit vectors in `R^4`.
fn super_fibonacci(n: usize) -> impl Iterator<Item = [f64; 4]> {
    const PHI: f64 = std::f64::consts::SQRT_2;
    const PSI: f64 = 1.533_751_168_755_204_3;
    let tau = std::f64::consts::TAU;
    (0..n).map(move |i| {
        let s = i as f64 + 0.5;
        let r = (s / n as f64).sqrt();
        let big_r = (1.0 - s / n as f64).sqrt();
        let (a, b) = (tau * s / PHI, tau * s / PSI);
        [r * a.sin(), r * a.cos(), big_r * b.sin(), big_r * b.cos()]
    })
}

fn random_quaternion<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    loop {
        let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return g.map(|x| x / n);
        }
    }
}

/// Hamilton product with the scalar part last.
fn quat_mul(p: &[f64; 4], q: &[f64; 4]) -> [f64; 4] {
    let [px, py, pz, pw] = *p;
    let [qx, qy, qz, qw] = *q;
    [
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
        pw * qw - px * qx - py * qy - pz * qz,
    ]
}

/// Symmetric proposal on the unit 3-sphere: isotropic Gaussian step of scale
/// `scale` in the tangent space at `from`, renormalized onto the sphere and
/// folded into `x4 >= 0`.
fn propose<R: Rng + ?Sized>(from: &SphereCoord, scale: f64, rng: &mut R) -> SphereCoord {
    let u = from.unit();
    let g: [f64; 4] = std::array::from_fn(|_| scale * rng.sample::<f64, _>(StandardNormal));
    let radial: f64 = (0..4).map(|k| g[k] * u[k]).sum();
    let v: [f64; 4] = std::array::from_fn(|k| u[k] + g[k] - radial * u[k]);
    SphereCoord::from_direction(v).unwrap_or(*from)
}
