//! Jones-calculus model of the polarization analyzer: a quarter-wave plate
//! at `theta_q`, then a half-wave plate at `theta_h`, then a polarizing beam
//! splitter whose transmitted (horizontal) port is outcome 0.
//!
//! Axis convention: with Jones amplitudes `(h, v)`, the Bloch axis of a
//! polarization state is `s3 = |h|^2 - |v|^2` (H/V), `s1` the circular
//! component and `s2` the (negated) diagonal component. This keeps `s3` on the
//! H/V basis, makes the frame right-handed, and places the analyzer setting
//! `(0, 22.5)` on `+s1`.

use num_complex::Complex64;

use crate::error::{Result, TomoError};
use crate::numerics::{dot3, Vec3};
use crate::qubit::{MeasurementConfig, Povm};

/// Smallest step of the motorized rotation stages, in degrees.
pub const ANGLE_STEP_DEG: f64 = 0.1;

type Jones = [[Complex64; 2]; 2];

fn waveplate(theta_deg: f64, retardance: f64) -> Jones {
    let t = theta_deg.to_radians();
    let (s, c) = t.sin_cos();
    let ph = Complex64::from_polar(1.0, retardance);
    let one = Complex64::new(1.0, 0.0);
    // R(-t) diag(1, e^{i d}) R(t), R(t) = [[c, s], [-s, c]]
    [
        [one * (c * c) + ph * (s * s), (one - ph) * (c * s)],
        [(one - ph) * (c * s), one * (s * s) + ph * (c * c)],
    ]
}

fn matmul(a: &Jones, b: &Jones) -> Jones {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Bloch axis measured by outcome 0 for the given plate angles (degrees).
pub fn analyzer_axis(theta_q: f64, theta_h: f64) -> Vec3 {
    let qwp = waveplate(theta_q, std::f64::consts::FRAC_PI_2);
    let hwp = waveplate(theta_h, std::f64::consts::PI);
    let u = matmul(&hwp, &qwp);
    // Measured state U^dagger |H>: first row of U, conjugated.
    let h = u[0][0].conj();
    let v = u[0][1].conj();
    let hv = h.conj() * v;
    let p1 = h.norm_sqr() - v.norm_sqr();
    let p2 = 2.0 * hv.re;
    let p3 = 2.0 * hv.im;
    let b = [-p3, p2, p1];
    let n = dot3(&b, &b).sqrt();
    [b[0] / n, b[1] / n, b[2] / n]
}

/// Two-outcome POVM realized by the analyzer at `(theta_q, theta_h)` degrees.
pub fn waveplate_povm(theta_q: f64, theta_h: f64) -> Result<Povm> {
    if !theta_q.is_finite() || !theta_h.is_finite() {
        return Err(TomoError::NonFinite {
            what: "waveplate angle",
        });
    }
    Povm::projective(analyzer_axis(theta_q, theta_h))
}

/// Rounds an angle to the stage resolution.
pub fn quantize_angle(theta: f64) -> f64 {
    let q = (theta / ANGLE_STEP_DEG).round() * ANGLE_STEP_DEG;
    // Keep one decimal exactly representable in output.
    (q * 10.0).round() / 10.0
}

fn wrap180(theta: f64) -> f64 {
    theta.rem_euclid(180.0)
}

/// Plate angles (degrees, in `[0, 180)`) whose analyzer measures `axis`.
pub fn angles_for_axis(axis: Vec3) -> Result<(f64, f64)> {
    let b = MeasurementConfig::from_axis(axis)?.axis();
    // Back to standard Poincare coordinates (H/V, D/A, circular).
    let (p1, p2, p3) = (b[2], b[1], -b[0]);
    // Outcome-0 state on the Poincare sphere is
    //   cos(4h - 2q) (cos 2q, sin 2q, 0) +- sin(4h - 2q) e3,
    // so 2q fixes the longitude and 4h - 2q the latitude.
    let two_q = p2.atan2(p1);
    let lat = p3.clamp(-1.0, 1.0).asin();
    let q = two_q.to_degrees() / 2.0;
    let mut best = (f64::NEG_INFINITY, (0.0, 0.0));
    for sign in [1.0, -1.0] {
        let h = (two_q + sign * lat).to_degrees() / 4.0;
        let cand = (wrap180(q), wrap180(h));
        let score = dot3(&analyzer_axis(cand.0, cand.1), &b);
        if score > best.0 {
            best = (score, cand);
        }
    }
    Ok(best.1)
}

/// The configuration the hardware actually realizes when asked for `axis`:
/// angles are solved for, quantized to [`ANGLE_STEP_DEG`], and the axis is
/// recomputed from the quantized angles.
pub fn realize_with_waveplates(axis: Vec3) -> Result<MeasurementConfig> {
    let (q, h) = angles_for_axis(axis)?;
    let (q, h) = (quantize_angle(q), quantize_angle(h));
    MeasurementConfig::with_angles(analyzer_axis(q, h), (q, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::angle_between;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() < tol)
    }

    #[test]
    fn zero_angles_measure_hv() {
        assert!(close(analyzer_axis(0.0, 0.0), [0.0, 0.0, 1.0], 1e-12));
    }

    #[test]
    fn half_wave_at_22_5_measures_s1() {
        assert!(close(analyzer_axis(0.0, 22.5), [1.0, 0.0, 0.0], 1e-12));
    }

    #[test]
    fn half_wave_at_45_measures_v() {
        assert!(close(analyzer_axis(0.0, 45.0), [0.0, 0.0, -1.0], 1e-12));
    }

    #[test]
    fn inverse_recovers_axis() {
        let dirs = crate::design::fibonacci_sphere(200);
        for b in dirs {
            let (q, h) = angles_for_axis(b).unwrap();
            let got = analyzer_axis(q, h);
            assert!(
                angle_between(&got, &b) < 1e-9,
                "{b:?} -> ({q}, {h}) -> {got:?}"
            );
        }
    }

    #[test]
    fn quantized_realization_is_close() {
        for b in crate::design::fibonacci_sphere(100) {
            let cfg = realize_with_waveplates(b).unwrap();
            let (q, h) = cfg.waveplate_angles().unwrap();
            assert!(((q * 10.0).round() - q * 10.0).abs() < 1e-9);
            assert!(((h * 10.0).round() - h * 10.0).abs() < 1e-9);
            // 0.05 degree per plate moves the axis by at most ~0.2 degree
            assert!(angle_between(&cfg.axis(), &b) < 0.01);
        }
    }

    #[test]
    fn one_degree_grid_covers_sphere() {
        let mut axes = Vec::with_capacity(180 * 180);
        for q in 0..180 {
            for h in 0..180 {
                axes.push(analyzer_axis(q as f64, h as f64));
            }
        }
        let mut worst: f64 = 0.0;
        for probe in crate::design::fibonacci_sphere(1000) {
            let best = axes
                .iter()
                .map(|a| dot3(a, &probe))
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(best.clamp(-1.0, 1.0).acos());
        }
        assert!(worst < 0.1, "max gap {worst} rad");
    }
}
