//! Prior samplers over single-qubit density matrices.
//!
//! `BuresHaar` draws uniformly from the radius-1/2 3-sphere and projects to
//! the Bloch ball. `InducedPure(d)` partial-traces a Haar-random pure state on
//! `C^2 (x) C^d`; it is kept for comparison only and favors mixed states more
//! strongly as `d` grows.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::qubit::{project, QubitState, SphereCoord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    BuresHaar,
    InducedPure { env_dim: usize },
}

impl PriorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorKind::BuresHaar => Ok(()),
            PriorKind::InducedPure { env_dim } if env_dim >= 2 => Ok(()),
            PriorKind::InducedPure { env_dim } => Err(TomoError::Config(format!(
                "induced prior needs env_dim >= 2, got {env_dim}"
            ))),
        }
    }
}

/// Uniform point on the radius-1/2 hemisphere `x4 >= 0`.
pub fn sample_sphere_coord<R: Rng + ?Sized>(rng: &mut R) -> SphereCoord {
    loop {
        let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if let Some(c) = SphereCoord::from_direction(g) {
            return c;
        }
    }
}

fn sample_induced<R: Rng + ?Sized>(env_dim: usize, rng: &mut R) -> QubitState {
    // psi = sum_{ij} a_ij |i>|j>, rho_ik = sum_j a_ij conj(a_kj)
    let (mut r00, mut r11, mut re01, mut im01) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..env_dim {
        let a0 = (
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let a1 = (
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        r00 += a0.0 * a0.0 + a0.1 * a0.1;
        r11 += a1.0 * a1.0 + a1.1 * a1.1;
        // a0 * conj(a1)
        re01 += a0.0 * a1.0 + a0.1 * a1.1;
        im01 += a0.1 * a1.0 - a0.0 * a1.1;
    }
    let tr = r00 + r11;
    // rho_01 = (s1 - i s2) / 2
    QubitState::from_stokes_clamped([2.0 * re01 / tr, -2.0 * im01 / tr, (r00 - r11) / tr])
}

pub fn sample_one<R: Rng + ?Sized>(kind: PriorKind, rng: &mut R) -> QubitState {
    match kind {
        PriorKind::BuresHaar => project(&sample_sphere_coord(rng)),
        PriorKind::InducedPure { env_dim } => sample_induced(env_dim, rng),
    }
}

pub fn sample_prior_with<R: Rng + ?Sized>(
    kind: PriorKind,
    count: usize,
    rng: &mut R,
) -> Result<Vec<QubitState>> {
    kind.validate()?;
    if count == 0 {
        return Err(TomoError::InvalidCount(
            "prior sample count must be >= 1".into(),
        ));
    }
    Ok((0..count).map(|_| sample_one(kind, rng)).collect())
}

/// `count` prior samples from a ChaCha8 stream seeded with `seed`.
pub fn sample_prior(kind: PriorKind, count: usize, seed: u64) -> Result<Vec<QubitState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_prior_with(kind, count, &mut rng)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialBin {
    pub low: f64,
    pub high: f64,
    pub count: u64,
}

/// Histogram over the in-plane radius `sqrt(s1^2 + s2^2)` of samples inside
/// the slab `|s3| < halfwidth`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialHistogram {
    pub bins: Vec<RadialBin>,
    pub selected: usize,
    pub total: usize,
}

impl RadialHistogram {
    /// Samples per unit disc area in each bin, normalized by the selection size.
    pub fn area_density(&self) -> Vec<f64> {
        self.bins
            .iter()
            .map(|b| {
                let area = std::f64::consts::PI * (b.high * b.high - b.low * b.low);
                b.count as f64 / (area * self.selected as f64)
            })
            .collect()
    }

    /// CSV with header `radius_bin_low,radius_bin_high,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["radius_bin_low", "radius_bin_high", "count"])?;
        for b in &self.bins {
            w.write_record([b.low.to_string(), b.high.to_string(), b.count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn slab_density_profile(
    samples: &[QubitState],
    slab_halfwidth: f64,
    n_bins: usize,
) -> Result<RadialHistogram> {
    if slab_halfwidth.is_nan() || slab_halfwidth <= 0.0 {
        return Err(TomoError::Config(format!(
            "slab half-width must be > 0, got {slab_halfwidth}"
        )));
    }
    if n_bins == 0 {
        return Err(TomoError::Config("need at least one radial bin".into()));
    }
    let mut counts = vec![0u64; n_bins];
    let mut selected = 0;
    for s in samples {
        let [s1, s2, s3] = s.stokes();
        if s3.abs() < slab_halfwidth {
            let r = (s1 * s1 + s2 * s2).sqrt();
            let idx = ((r * n_bins as f64) as usize).min(n_bins - 1);
            counts[idx] += 1;
            selected += 1;
        }
    }
    if selected == 0 {
        return Err(TomoError::EmptySelection);
    }
    let w = 1.0 / n_bins as f64;
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| RadialBin {
            low: i as f64 * w,
            high: (i + 1) as f64 * w,
            count,
        })
        .collect();
    Ok(RadialHistogram {
        bins,
        selected,
        total: samples.len(),
    })
}
