//! Outcome-probability models: ideal Born rule, detector dark counts,
//! unequal channel efficiencies and their composition.
//!
//! Combined model, per outcome `g` with Born weight `t_g = Tr[M_g rho]`:
//!
//! ```text
//! p_g = (t_g eta_g lambda_s + lambda_d^g) / sum_k (t_k eta_k lambda_s + lambda_d^k)
//! ```
//!
//! Losses act on photons before detection, dark clicks are added at the
//! detector. With only dark counts enabled this is
//! `(t_g lambda_s + lambda_d^g) / (lambda_s + sum lambda_d)`; with only
//! efficiencies enabled it is `t_g eta_g / sum t_k eta_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::qubit::{born_probs, Povm, QubitState};

/// Detector and channel imperfections. Only the ratios
/// `dark_rates[g] / source_rate` and between efficiencies matter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Source photon rate, events per second.
    #[serde(default = "default_source_rate")]
    pub source_rate: f64,
    /// Dark-count rate per detector, events per second.
    #[serde(default = "default_dark")]
    pub dark_rates: Vec<f64>,
    /// Detection efficiency per channel, in `(0, 1]`.
    #[serde(default = "default_eff")]
    pub efficiencies: Vec<f64>,
    #[serde(default)]
    pub dark_counts: bool,
    #[serde(default)]
    pub efficiency: bool,
}

fn default_source_rate() -> f64 {
    1.0
}
fn default_dark() -> Vec<f64> {
    vec![0.0, 0.0]
}
fn default_eff() -> Vec<f64> {
    vec![1.0, 1.0]
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NoiseModel {
    /// Both mechanisms disabled: the plain Born rule.
    pub fn ideal() -> Self {
        Self {
            source_rate: 1.0,
            dark_rates: default_dark(),
            efficiencies: default_eff(),
            dark_counts: false,
            efficiency: false,
        }
    }

    pub fn with_dark_counts(source_rate: f64, dark_rates: Vec<f64>) -> Result<Self> {
        let n = dark_rates.len();
        let m = Self {
            source_rate,
            dark_rates,
            efficiencies: vec![1.0; n],
            dark_counts: true,
            efficiency: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_efficiencies(efficiencies: Vec<f64>) -> Result<Self> {
        let n = efficiencies.len();
        let m = Self {
            source_rate: 1.0,
            dark_rates: vec![0.0; n],
            efficiencies,
            dark_counts: false,
            efficiency: true,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn combined(
        source_rate: f64,
        dark_rates: Vec<f64>,
        efficiencies: Vec<f64>,
    ) -> Result<Self> {
        let m = Self {
            source_rate,
            dark_rates,
            efficiencies,
            dark_counts: true,
            efficiency: true,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn is_ideal(&self) -> bool {
        !self.dark_counts && !self.efficiency
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.source_rate.is_finite() && self.source_rate > 0.0) {
            return Err(TomoError::InvalidNoise(format!(
                "source rate must be finite and > 0, got {}",
                self.source_rate
            )));
        }
        if self
            .dark_rates
            .iter()
            .any(|d| !(d.is_finite() && *d >= 0.0))
        {
            return Err(TomoError::InvalidNoise(
                "dark rates must be finite and >= 0".into(),
            ));
        }
        if self
            .efficiencies
            .iter()
            .any(|e| !(e.is_finite() && *e > 0.0 && *e <= 1.0))
        {
            return Err(TomoError::InvalidNoise(
                "efficiencies must lie in (0, 1]".into(),
            ));
        }
        if self.dark_rates.len() != self.efficiencies.len() {
            return Err(TomoError::InvalidNoise(
                "one dark rate and one efficiency per channel".into(),
            ));
        }
        Ok(())
    }

    fn check_channels(&self, outcomes: usize) -> Result<()> {
        if !self.is_ideal() && self.dark_rates.len() != outcomes {
            return Err(TomoError::OutcomeMismatch {
                expected: outcomes,
                got: self.dark_rates.len(),
            });
        }
        Ok(())
    }
}

/// Applies the noise model to Born weights `t`.
pub fn apply_noise(t: &[f64], noise: &NoiseModel) -> Result<Vec<f64>> {
    noise.check_channels(t.len())?;
    if noise.is_ideal() {
        return Ok(t.to_vec());
    }
    let raw: Vec<f64> = t
        .iter()
        .enumerate()
        .map(|(g, &tg)| {
            let eta = if noise.efficiency {
                noise.efficiencies[g]
            } else {
                1.0
            };
            let dark = if noise.dark_counts {
                noise.dark_rates[g] / noise.source_rate
            } else {
                0.0
            };
            tg * eta + dark
        })
        .collect();
    let z: f64 = raw.iter().sum();
    if !(z.is_finite() && z > 0.0) {
        return Err(TomoError::DegenerateModel);
    }
    Ok(raw.into_iter().map(|r| r / z).collect())
}

pub fn outcome_probs(state: &QubitState, povm: &Povm, noise: &NoiseModel) -> Result<Vec<f64>> {
    apply_noise(&born_probs(state, povm), noise)
}

/// Outcome counts from a block of measurements in one configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    counts: Vec<u64>,
}

impl OutcomeCounts {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(TomoError::InvalidCount("need at least two outcomes".into()));
        }
        Ok(Self { counts })
    }

    /// One observation of `outcome` among `num_outcomes`.
    pub fn single(outcome: usize, num_outcomes: usize) -> Result<Self> {
        if outcome >= num_outcomes {
            return Err(TomoError::InvalidCount(format!(
                "outcome {outcome} out of range"
            )));
        }
        let mut counts = vec![0; num_outcomes];
        counts[outcome] = 1;
        Self::new(counts)
    }

    pub fn binary(c0: u64, c1: u64) -> Self {
        Self {
            counts: vec![c0, c1],
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &OutcomeCounts) -> Result<()> {
        if other.counts.len() != self.counts.len() {
            return Err(TomoError::OutcomeMismatch {
                expected: self.counts.len(),
                got: other.counts.len(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// `sum_g counts_g ln p_g`, without the multinomial coefficient. A positive
/// count on a zero-probability outcome gives `-inf`.
pub fn block_log_likelihood(counts: &OutcomeCounts, probs: &[f64]) -> Result<f64> {
    if counts.counts.len() != probs.len() {
        return Err(TomoError::OutcomeMismatch {
            expected: probs.len(),
            got: counts.counts.len(),
        });
    }
    let mut ll = 0.0;
    for (&c, &p) in counts.counts.iter().zip(probs) {
        if c > 0 {
            ll += c as f64 * p.ln();
        }
    }
    Ok(ll)
}

/// Noise model specialized to two-outcome projective measurements, for the
/// particle-filter hot loops. Probabilities are a function of `b . s` only.
#[derive(Clone, Copy, Debug)]
pub struct BinaryChannel {
    eta: [f64; 2],
    dark: [f64; 2],
    ideal: bool,
}

impl BinaryChannel {
    pub fn new(noise: &NoiseModel) -> Result<Self> {
        noise.validate()?;
        noise.check_channels(2)?;
        let eta = if noise.efficiency {
            [noise.efficiencies[0], noise.efficiencies[1]]
        } else {
            [1.0, 1.0]
        };
        let dark = if noise.dark_counts {
            [
                noise.dark_rates[0] / noise.source_rate,
                noise.dark_rates[1] / noise.source_rate,
            ]
        } else {
            [0.0, 0.0]
        };
        Ok(Self {
            eta,
            dark,
            ideal: noise.is_ideal(),
        })
    }

    /// Outcome probabilities for a projective measurement with `b . s = proj`.
    #[inline]
    pub fn probs(&self, proj: f64) -> [f64; 2] {
        let t0 = (0.5 * (1.0 + proj)).clamp(0.0, 1.0);
        let t1 = (0.5 * (1.0 - proj)).clamp(0.0, 1.0);
        if self.ideal {
            return [t0, t1];
        }
        let r0 = t0 * self.eta[0] + self.dark[0];
        let r1 = t1 * self.eta[1] + self.dark[1];
        let z = r0 + r1;
        [r0 / z, r1 / z]
    }

    /// `n0 ln p0 + n1 ln p1` for a projective measurement with `b . s = proj`.
    #[inline]
    pub fn log_likelihood(&self, proj: f64, n0: f64, n1: f64) -> f64 {
        let [p0, p1] = self.probs(proj);
        let mut ll = 0.0;
        if n0 > 0.0 {
            ll += n0 * p0.ln();
        }
        if n1 > 0.0 {
            ll += n1 * p1.ln();
        }
        ll
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn dark_count_examples() {
        let n = NoiseModel::with_dark_counts(1000.0, vec![10.0, 10.0]).unwrap();
        let p = apply_noise(&[0.5, 0.5], &n).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        let n = NoiseModel::with_dark_counts(1000.0, vec![5.0, 15.0]).unwrap();
        let p = apply_noise(&[0.9, 0.1], &n).unwrap();
        assert_abs_diff_eq!(p[0], 905.0 / 1020.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 115.0 / 1020.0, epsilon = 1e-12);
    }

    #[test]
    fn efficiency_example() {
        let n = NoiseModel::with_efficiencies(vec![1.0, 0.5]).unwrap();
        let p = apply_noise(&[0.8, 0.2], &n).unwrap();
        assert_abs_diff_eq!(p[0], 0.8 / 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.1 / 0.9, epsilon = 1e-12);
    }

    #[test]
    fn combined_applies_losses_before_dark_counts() {
        let n = NoiseModel::combined(1000.0, vec![5.0, 15.0], vec![1.0, 0.5]).unwrap();
        let p = apply_noise(&[0.8, 0.2], &n).unwrap();
        let r0 = 800.0 + 5.0;
        let r1 = 100.0 + 15.0;
        assert_abs_diff_eq!(p[0], r0 / (r0 + r1), epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_examples() {
        assert_eq!(
            block_log_likelihood(&OutcomeCounts::binary(1, 0), &[1.0, 0.0]).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            block_log_likelihood(&OutcomeCounts::binary(1, 1), &[0.5, 0.5]).unwrap(),
            2.0 * 0.5f64.ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            block_log_likelihood(&OutcomeCounts::binary(3, 7), &[0.3, 0.7]).unwrap(),
            3.0 * 0.3f64.ln() + 7.0 * 0.7f64.ln(),
            epsilon = 1e-14
        );
        assert_eq!(
            block_log_likelihood(&OutcomeCounts::binary(0, 2), &[1.0, 0.0]).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(block_log_likelihood(&OutcomeCounts::binary(1, 1), &[1.0]).is_err());
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(NoiseModel::with_dark_counts(0.0, vec![1.0, 1.0]).is_err());
        assert!(NoiseModel::with_dark_counts(10.0, vec![-1.0, 1.0]).is_err());
        assert!(NoiseModel::with_efficiencies(vec![0.0, 1.0]).is_err());
        assert!(NoiseModel::with_efficiencies(vec![1.2, 1.0]).is_err());
        let three = NoiseModel::with_efficiencies(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(apply_noise(&[0.5, 0.5], &three).is_err());
    }

    #[test]
    fn degenerate_model_errors() {
        // All Born weight on an outcome with no signal and no dark clicks.
        let n = NoiseModel::with_efficiencies(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            apply_noise(&[0.0, 0.0], &n),
            Err(TomoError::DegenerateModel)
        ));
    }

    #[test]
    fn binary_channel_matches_general_path() {
        let noise = NoiseModel::combined(1000.0, vec![5.0, 15.0], vec![0.8, 1.0]).unwrap();
        let ch = BinaryChannel::new(&noise).unwrap();
        let s = QubitState::new(0.1, -0.4, 0.7).unwrap();
        let cfg = crate::qubit::MeasurementConfig::from_axis([0.3, 0.2, -0.5]).unwrap();
        let general = outcome_probs(&s, &cfg.povm(), &noise).unwrap();
        let fast = ch.probs(crate::numerics::dot3(&cfg.axis(), &s.stokes()));
        assert_abs_diff_eq!(general[0], fast[0], epsilon = 1e-15);
        assert_abs_diff_eq!(general[1], fast[1], epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn rate_scale_invariance(t0 in 0.0f64..1.0, c in 1e-3f64..1e3, d0 in 0.0f64..50.0, d1 in 0.0f64..50.0) {
            let t = [t0, 1.0 - t0];
            let a = NoiseModel::with_dark_counts(1000.0, vec![d0, d1]).unwrap();
            let b = NoiseModel::with_dark_counts(1000.0 * c, vec![d0 * c, d1 * c]).unwrap();
            let (pa, pb) = (apply_noise(&t, &a).unwrap(), apply_noise(&t, &b).unwrap());
            prop_assert!((pa[0] - pb[0]).abs() < 1e-12 && (pa[1] - pb[1]).abs() < 1e-12);
        }

        #[test]
        fn efficiency_scale_invariance(t0 in 0.0f64..1.0, c in 0.01f64..1.0, e0 in 0.05f64..1.0, e1 in 0.05f64..1.0) {
            let t = [t0, 1.0 - t0];
            let a = NoiseModel::with_efficiencies(vec![e0, e1]).unwrap();
            let b = NoiseModel::with_efficiencies(vec![e0 * c, e1 * c]).unwrap();
            let (pa, pb) = (apply_noise(&t, &a).unwrap(), apply_noise(&t, &b).unwrap());
            prop_assert!((pa[0] - pb[0]).abs() < 1e-12 && (pa[1] - pb[1]).abs() < 1e-12);
        }

        #[test]
        fn no_dark_equal_eta_is_born(t0 in 0.0f64..1.0, e in 0.05f64..1.0) {
            let t = [t0, 1.0 - t0];
            let n = NoiseModel::combined(500.0, vec![0.0, 0.0], vec![e, e]).unwrap();
            let p = apply_noise(&t, &n).unwrap();
            prop_assert!((p[0] - t[0]).abs() < 1e-15 && (p[1] - t[1]).abs() < 1e-15);
        }

        #[test]
        fn single_outcome_block_is_log_prob(t0 in 0.01f64..1.0) {
            let p = [t0, 1.0 - t0];
            let ll = block_log_likelihood(&OutcomeCounts::single(0, 2).unwrap(), &p).unwrap();
            prop_assert_eq!(ll, t0.ln());
        }
    }
}
