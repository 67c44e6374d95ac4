//! Single-qubit states and measurements in Bloch form.
//!
//! A state is stored as its Stokes vector `s`, with density matrix
//! `rho = (I + s . sigma) / 2`. Polarization convention: `s3 = +1` is the
//! horizontally polarized state, which leaves the polarizing beam splitter
//! through the transmitted port (outcome 0). See [`crate::waveplate`] for the
//! remaining two axes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::numerics::{dot3, norm3, normalize3, Vec3};

/// Numerical slack on the Bloch-ball and unit-norm constraints.
pub const EPS: f64 = 1e-12;

/// A qubit density matrix represented by its Stokes vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct QubitState {
    s: Vec3,
}

impl QubitState {
    pub fn new(s1: f64, s2: f64, s3: f64) -> Result<Self> {
        Self::from_stokes([s1, s2, s3])
    }

    pub fn from_stokes(s: Vec3) -> Result<Self> {
        if s.iter().any(|x| !x.is_finite()) {
            return Err(TomoError::NonFinite {
                what: "Stokes vector",
            });
        }
        let norm_sq = dot3(&s, &s);
        if norm_sq > 1.0 + EPS {
            return Err(TomoError::InvalidState { norm_sq });
        }
        Ok(Self { s })
    }

    /// The maximally mixed state `I/2`.
    pub const fn maximally_mixed() -> Self {
        Self { s: [0.0; 3] }
    }

    /// Pure state along the given direction (normalized internally).
    pub fn pure(direction: Vec3) -> Result<Self> {
        let s = normalize3(&direction)
            .ok_or_else(|| TomoError::InvalidAxis(format!("{direction:?} has no direction")))?;
        Ok(Self { s })
    }

    #[inline]
    pub fn stokes(&self) -> Vec3 {
        self.s
    }

    /// Bloch radius `|s|`; 1 for pure states.
    #[inline]
    pub fn radius(&self) -> f64 {
        norm3(&self.s)
    }

    /// `det rho = (1 - |s|^2) / 4`, clamped at zero.
    #[inline]
    pub fn determinant(&self) -> f64 {
        (0.25 * (1.0 - dot3(&self.s, &self.s))).max(0.0)
    }

    pub fn density_matrix(&self) -> [[Complex64; 2]; 2] {
        let [s1, s2, s3] = self.s;
        [
            [
                Complex64::new((1.0 + s3) / 2.0, 0.0),
                Complex64::new(s1 / 2.0, -s2 / 2.0),
            ],
            [
                Complex64::new(s1 / 2.0, s2 / 2.0),
                Complex64::new((1.0 - s3) / 2.0, 0.0),
            ],
        ]
    }

    /// Builds a state from a Stokes vector already known to lie in the ball
    /// up to rounding; tiny overshoots are pulled back onto the sphere.
    pub(crate) fn from_stokes_clamped(s: Vec3) -> Self {
        let n2 = dot3(&s, &s);
        if n2 > 1.0 {
            let r = n2.sqrt();
            Self {
                s: [s[0] / r, s[1] / r, s[2] / r],
            }
        } else {
            Self { s }
        }
    }
}

impl TryFrom<[f64; 3]> for QubitState {
    type Error = TomoError;
    fn try_from(s: [f64; 3]) -> Result<Self> {
        Self::from_stokes(s)
    }
}

impl From<QubitState> for [f64; 3] {
    fn from(q: QubitState) -> Self {
        q.s
    }
}

/// Point on the 3-sphere of radius 1/2, restricted to the `x4 >= 0` hemisphere.
///
/// `x_i = s_i / 2` for `i = 1..3` and `x4 = sqrt(1 - |s|^2) / 2`; the uniform
/// measure on this hemisphere projects to the Bures (Haar) measure on the
/// Bloch ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereCoord {
    x: [f64; 4],
}

impl SphereCoord {
    pub fn new(x: [f64; 4]) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(TomoError::NonFinite {
                what: "sphere coordinate",
            });
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if (r2 - 0.25).abs() > EPS {
            return Err(TomoError::InvalidSphereCoord(format!(
                "|x|^2 = {r2}, expected 1/4"
            )));
        }
        if x[3] < 0.0 {
            return Err(TomoError::InvalidSphereCoord(format!("x4 = {} < 0", x[3])));
        }
        Ok(Self { x })
    }

    /// Maps any nonzero 4-vector onto the radius-1/2 hemisphere by
    /// normalizing and reflecting `x4 <- |x4|`.
    pub fn from_direction(v: [f64; 4]) -> Option<Self> {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        let h = 0.5 / n;
        Some(Self {
            x: [v[0] * h, v[1] * h, v[2] * h, (v[3] * h).abs()],
        })
    }

    #[inline]
    pub fn coords(&self) -> [f64; 4] {
        self.x
    }

    /// Coordinates scaled onto the unit 3-sphere.
    #[inline]
    pub fn unit(&self) -> [f64; 4] {
        [
            2.0 * self.x[0],
            2.0 * self.x[1],
            2.0 * self.x[2],
            2.0 * self.x[3],
        ]
    }
}

pub fn embed(state: &QubitState) -> SphereCoord {
    let s = state.stokes();
    let x4 = 0.5 * (1.0 - dot3(&s, &s)).max(0.0).sqrt();
    SphereCoord {
        x: [0.5 * s[0], 0.5 * s[1], 0.5 * s[2], x4],
    }
}

pub fn project(coord: &SphereCoord) -> QubitState {
    let x = coord.x;
    QubitState::from_stokes_clamped([2.0 * x[0], 2.0 * x[1], 2.0 * x[2]])
}

/// A Hermitian 2x2 operator `(weight * I + vector . sigma) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochOperator {
    pub weight: f64,
    pub vector: Vec3,
}

impl BlochOperator {
    /// `Tr[M rho] = (weight + vector . s) / 2`.
    #[inline]
    pub fn expectation(&self, state: &QubitState) -> f64 {
        0.5 * (self.weight + dot3(&self.vector, &state.stokes()))
    }

    pub fn is_psd(&self) -> bool {
        self.weight + EPS >= norm3(&self.vector)
    }
}

/// A POVM with elements stored in Bloch form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Povm {
    elements: Vec<BlochOperator>,
}

impl Povm {
    /// Validates PSD elements and completeness (`sum weight = 2`, `sum vector = 0`).
    pub fn new(elements: Vec<BlochOperator>) -> Result<Self> {
        if elements.len() < 2 {
            return Err(TomoError::InvalidPovm("need at least two outcomes".into()));
        }
        for (i, e) in elements.iter().enumerate() {
            if !e.weight.is_finite() || e.vector.iter().any(|v| !v.is_finite()) {
                return Err(TomoError::NonFinite {
                    what: "POVM element",
                });
            }
            if !e.is_psd() {
                return Err(TomoError::InvalidPovm(format!(
                    "element {i} is not positive semidefinite"
                )));
            }
        }
        let w: f64 = elements.iter().map(|e| e.weight).sum();
        let mut v = [0.0; 3];
        for e in &elements {
            for (acc, x) in v.iter_mut().zip(e.vector) {
                *acc += x;
            }
        }
        if (w - 2.0).abs() > 1e-9 || norm3(&v) > 1e-9 {
            return Err(TomoError::InvalidPovm(
                "elements do not sum to the identity".into(),
            ));
        }
        Ok(Self { elements })
    }

    /// Two-outcome projective measurement along unit `axis`:
    /// `M0 = (I + b.sigma)/2`, `M1 = (I - b.sigma)/2`.
    pub fn projective(axis: Vec3) -> Result<Self> {
        let b = unit_axis(axis)?;
        Ok(Self {
            elements: vec![
                BlochOperator {
                    weight: 1.0,
                    vector: b,
                },
                BlochOperator {
                    weight: 1.0,
                    vector: [-b[0], -b[1], -b[2]],
                },
            ],
        })
    }

    pub fn elements(&self) -> &[BlochOperator] {
        &self.elements
    }

    pub fn num_outcomes(&self) -> usize {
        self.elements.len()
    }
}

/// Born-rule probabilities `Tr[M_g rho]`, clamped into `[0, 1]`.
pub fn born_probs(state: &QubitState, povm: &Povm) -> Vec<f64> {
    povm.elements
        .iter()
        .map(|m| m.expectation(state).clamp(0.0, 1.0))
        .collect()
}

/// Uhlmann fidelity in the closed qubit form
/// `F = Tr(rho_a rho_b) + 2 sqrt(det rho_a det rho_b)`.
#[inline]
pub fn fidelity(a: &QubitState, b: &QubitState) -> f64 {
    let (sa, sb) = (a.stokes(), b.stokes());
    let mixed = ((1.0 - dot3(&sa, &sa)).max(0.0) * (1.0 - dot3(&sb, &sb)).max(0.0)).sqrt();
    (0.5 * (1.0 + dot3(&sa, &sb) + mixed)).clamp(0.0, 1.0)
}

/// Bures distance, `d_B^2 = 2 - 2 sqrt(F)`.
pub fn bures_distance(a: &QubitState, b: &QubitState) -> f64 {
    (2.0 - 2.0 * fidelity(a, b).sqrt()).max(0.0).sqrt()
}

fn unit_axis(axis: Vec3) -> Result<Vec3> {
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(TomoError::NonFinite {
            what: "measurement axis",
        });
    }
    normalize3(&axis).ok_or_else(|| TomoError::InvalidAxis("zero axis".into()))
}

/// Resolution of the history key; axes closer than this compare equal.
const AXIS_KEY_RESOLUTION: f64 = 1e-9;

/// A measurement configuration: a projective two-outcome measurement along a
/// Bloch axis, optionally tagged with the analyzer waveplate angles (degrees)
/// that realize it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    axis: Vec3,
    waveplate_angles: Option<(f64, f64)>,
}

impl MeasurementConfig {
    /// Normalizes `axis`; errors on a zero or non-finite vector.
    pub fn from_axis(axis: Vec3) -> Result<Self> {
        Ok(Self {
            axis: unit_axis(axis)?,
            waveplate_angles: None,
        })
    }

    pub(crate) fn with_angles(axis: Vec3, angles: (f64, f64)) -> Result<Self> {
        Ok(Self {
            axis: unit_axis(axis)?,
            waveplate_angles: Some(angles),
        })
    }

    /// Rebuilds a configuration from a logged unit axis without renormalizing,
    /// so replayed likelihoods match the original bit for bit.
    pub fn from_logged(axis: Vec3, angles: Option<(f64, f64)>) -> Result<Self> {
        let n = unit_axis(axis)?;
        if (crate::numerics::norm3(&axis) - 1.0).abs() > 1e-12 {
            return Err(TomoError::InvalidAxis(format!(
                "logged axis {axis:?} is not a unit vector"
            )));
        }
        debug_assert!(crate::numerics::angle_between(&n, &axis) < 1e-12);
        Ok(Self {
            axis,
            waveplate_angles: angles,
        })
    }

    #[inline]
    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn waveplate_angles(&self) -> Option<(f64, f64)> {
        self.waveplate_angles
    }

    pub fn povm(&self) -> Povm {
        let b = self.axis;
        Povm {
            elements: vec![
                BlochOperator {
                    weight: 1.0,
                    vector: b,
                },
                BlochOperator {
                    weight: 1.0,
                    vector: [-b[0], -b[1], -b[2]],
                },
            ],
        }
    }

    /// Integer key of the axis rounded to `1e-9`, used to merge repeated
    /// configurations in the observation history.
    pub fn key(&self) -> [i64; 3] {
        self.axis.map(|v| (v / AXIS_KEY_RESOLUTION).round() as i64)
    }

    /// The same measurement with `b` flipped into the canonical hemisphere
    /// (`z > 0`, then `y > 0`, then `x > 0` on ties). The flip relabels outcomes.
    pub fn canonical(&self) -> Self {
        Self {
            axis: canonical_axis(self.axis),
            waveplate_angles: None,
        }
    }
}

pub(crate) fn canonical_axis(b: Vec3) -> Vec3 {
    let flip = if b[2] != 0.0 {
        b[2] < 0.0
    } else if b[1] != 0.0 {
        b[1] < 0.0
    } else {
        b[0] < 0.0
    };
    if flip {
        [-b[0], -b[1], -b[2]]
    } else {
        b
    }
}

/// The three mutually unbiased qubit bases, along x, y and z.
pub fn mub_axes() -> [MeasurementConfig; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].map(|axis| MeasurementConfig {
        axis,
        waveplate_angles: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state(s: Vec3) -> QubitState {
        QubitState::from_stokes(s).unwrap()
    }

    fn axis(b: Vec3) -> Povm {
        Povm::projective(b).unwrap()
    }

    #[test]
    fn rejects_states_outside_the_ball() {
        assert!(QubitState::new(1.0, 1.0, 0.0).is_err());
        assert!(QubitState::new(f64::NAN, 0.0, 0.0).is_err());
        assert!(QubitState::new(1.0 + 1e-13, 0.0, 0.0).is_ok());
    }

    #[test]
    fn born_examples() {
        assert_eq!(
            born_probs(&state([0.0, 0.0, 1.0]), &axis([0.0, 0.0, 1.0])),
            vec![1.0, 0.0]
        );
        assert_eq!(
            born_probs(&state([0.0, 0.0, 1.0]), &axis([1.0, 0.0, 0.0])),
            vec![0.5, 0.5]
        );
        let p = born_probs(&state([0.3, 0.4, 0.5]), &axis([0.0, 1.0, 0.0]));
        assert_abs_diff_eq!(p[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let up = state([0.0, 0.0, 1.0]);
        let down = state([0.0, 0.0, -1.0]);
        let mixed = QubitState::maximally_mixed();
        assert_eq!(fidelity(&up, &up), 1.0);
        assert_eq!(fidelity(&up, &down), 0.0);
        assert_abs_diff_eq!(fidelity(&up, &mixed), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bures_examples() {
        let up = state([0.0, 0.0, 1.0]);
        let down = state([0.0, 0.0, -1.0]);
        let mixed = QubitState::maximally_mixed();
        assert_eq!(bures_distance(&up, &up), 0.0);
        assert_abs_diff_eq!(bures_distance(&up, &down), 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            bures_distance(&up, &mixed),
            (2.0 - 2.0 * 0.5f64.sqrt()).sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(bures_distance(&up, &mixed), 0.7654, epsilon = 1e-4);
    }

    #[test]
    fn embed_examples() {
        assert_eq!(
            embed(&QubitState::maximally_mixed()).coords(),
            [0.0, 0.0, 0.0, 0.5]
        );
        assert_eq!(
            embed(&state([1.0, 0.0, 0.0])).coords(),
            [0.5, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn mub_examples() {
        let axes = mub_axes();
        let e1 = state([1.0, 0.0, 0.0]);
        assert_eq!(born_probs(&e1, &axes[1].povm()), vec![0.5, 0.5]);
        let e3 = state([0.0, 0.0, 1.0]);
        assert_eq!(born_probs(&e3, &axes[2].povm()), vec![1.0, 0.0]);
        // 6 basis states x 2 other axes
        for (i, a) in axes.iter().enumerate() {
            for sign in [1.0, -1.0] {
                let s = state(a.axis().map(|v| v * sign));
                for (j, b) in axes.iter().enumerate() {
                    if i != j {
                        assert_eq!(born_probs(&s, &b.povm()), vec![0.5, 0.5]);
                    }
                }
            }
        }
    }

    #[test]
    fn povm_validation() {
        let bad = Povm::new(vec![
            BlochOperator {
                weight: 1.0,
                vector: [0.0, 0.0, 1.0],
            },
            BlochOperator {
                weight: 1.0,
                vector: [0.0, 0.0, 0.5],
            },
        ]);
        assert!(bad.is_err());
        let not_psd = Povm::new(vec![
            BlochOperator {
                weight: 1.0,
                vector: [0.0, 0.0, 2.0],
            },
            BlochOperator {
                weight: 1.0,
                vector: [0.0, 0.0, -2.0],
            },
        ]);
        assert!(not_psd.is_err());
        let trine = Povm::new(
            (0..3)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                    BlochOperator {
                        weight: 2.0 / 3.0,
                        vector: [2.0 / 3.0 * t.cos(), 2.0 / 3.0 * t.sin(), 0.0],
                    }
                })
                .collect(),
        )
        .unwrap();
        let p = born_probs(&state([0.2, -0.3, 0.1]), &trine);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(MeasurementConfig::from_axis([0.0; 3]).is_err());
    }

    #[test]
    fn canonical_flips_into_upper_hemisphere() {
        let c = MeasurementConfig::from_axis([0.3, 0.1, -0.5])
            .unwrap()
            .canonical();
        assert!(c.axis()[2] > 0.0);
        let c = MeasurementConfig::from_axis([-1.0, 0.0, 0.0])
            .unwrap()
            .canonical();
        assert_eq!(c.axis(), [1.0, 0.0, 0.0]);
    }

    fn ball_point() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b, c, r)| {
            let n = (a * a + b * b + c * c).sqrt().max(1e-9);
            let rr = r.cbrt();
            [a / n * rr, b / n * rr, c / n * rr]
        })
    }

    proptest! {
        #[test]
        fn born_sums_to_one(s in ball_point(), b in ball_point()) {
            prop_assume!(norm3(&b) > 1e-6);
            let p = born_probs(&state(s), &axis(b));
            prop_assert!((p[0] + p[1] - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn bures_bounds_infidelity(a in ball_point(), b in ball_point()) {
            let (a, b) = (state(a), state(b));
            let f = fidelity(&a, &b);
            let d2 = bures_distance(&a, &b).powi(2);
            prop_assert!(d2 <= 2.0 * (1.0 - f) + 1e-12);
            prop_assert!(2.0 * (1.0 - f) <= 2.0 * d2 + 1e-12);
            prop_assert!((fidelity(&b, &a) - f).abs() < 1e-15);
            prop_assert!(d2 <= 2.0 + 1e-12);
        }

        #[test]
        fn embed_project_round_trip(s in ball_point()) {
            let q = state(s);
            let c = embed(&q);
            prop_assert!(SphereCoord::new(c.coords()).is_ok());
            let back = project(&c).stokes();
            for i in 0..3 {
                prop_assert!((back[i] - s[i]).abs() < 1e-12);
            }
        }
    }
}
