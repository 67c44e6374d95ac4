//! Small numeric helpers shared across modules: 3-vector algebra,
//! compensated summation, entropies and seed derivation.

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm3(a: &Vec3) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub fn scale3(a: &Vec3, c: f64) -> Vec3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

#[inline]
pub fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Returns `a / |a|`, or `None` when `a` is zero or not finite.
pub fn normalize3(a: &Vec3) -> Option<Vec3> {
    let n = norm3(a);
    if !n.is_finite() || n == 0.0 {
        return None;
    }
    Some(scale3(a, 1.0 / n))
}

/// Angle between two unit vectors, in radians. Uses `atan2` so that nearly
/// parallel vectors keep full precision.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    norm3(&cross3(a, b)).atan2(dot3(a, b))
}

/// Rotation matrix taking unit vector `from` onto unit vector `to` (Rodrigues).
pub fn rotation_between(from: &Vec3, to: &Vec3) -> [[f64; 3]; 3] {
    let v = cross3(from, to);
    let c = dot3(from, to);
    let s2 = dot3(&v, &v);
    if s2 < 1e-30 {
        if c > 0.0 {
            return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        }
        // Antiparallel: rotate by pi about any axis orthogonal to `from`.
        let helper = if from[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let k = normalize3(&cross3(from, &helper)).expect("nonzero orthogonal axis");
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = 2.0 * k[i] * k[j] - if i == j { 1.0 } else { 0.0 };
            }
        }
        return r;
    }
    let vx = [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]];
    let f = (1.0 - c) / s2;
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut vx2 = 0.0;
            for (k, vxk) in vx.iter().enumerate() {
                vx2 += vx[i][k] * vxk[j];
            }
            r[i][j] = if i == j { 1.0 } else { 0.0 } + vx[i][j] + f * vx2;
        }
    }
    r
}

#[inline]
pub fn mat_vec3(m: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [dot3(&m[0], v), dot3(&m[1], v), dot3(&m[2], v)]
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = KahanSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// `-p ln p` with the convention `0 ln 0 = 0`.
#[inline]
pub fn plogp_neg(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    compensated_sum(probs.iter().map(|&p| plogp_neg(p)))
}

/// Shifts `log_weights` so that they exponentiate to a normalized set and
/// returns the log normalizer that was subtracted. Returns `None` when every
/// entry is `-inf`.
pub fn normalize_log_weights(log_weights: &mut [f64]) -> Option<f64> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    let sum = compensated_sum(log_weights.iter().map(|&lw| (lw - max).exp()));
    let log_sum = sum.ln();
    for lw in log_weights.iter_mut() {
        *lw = (*lw - max) - log_sum;
    }
    Some(max + log_sum)
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed: `splitmix64(master ^ splitmix64(index))`.
///
/// Used for per-run seeds (`run_seed = derive_seed(master_seed, run_index)`)
/// and for per-stream seeds inside a run.
#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_maps_from_onto_to() {
        let cases = [
            ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
            ([0.0, 0.0, 1.0], [0.0, 0.0, -1.0]),
            ([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
            ([0.6, 0.0, 0.8], [0.0, 0.6, -0.8]),
        ];
        for (a, b) in cases {
            let r = rotation_between(&a, &b);
            let out = mat_vec3(&r, &a);
            for i in 0..3 {
                assert!((out[i] - b[i]).abs() < 1e-12, "{a:?}->{b:?} gave {out:?}");
            }
            // orthogonal
            for i in 0..3 {
                for j in 0..3 {
                    let g: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                    assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let xs = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 10_000));
        assert!((compensated_sum(xs) - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn log_weight_normalization() {
        let mut lw = vec![-1000.0, -1000.0, f64::NEG_INFINITY];
        normalize_log_weights(&mut lw).unwrap();
        assert!((lw[0].exp() - 0.5).abs() < 1e-15);
        assert_eq!(lw[2].exp(), 0.0);
        let mut dead = vec![f64::NEG_INFINITY; 3];
        assert!(normalize_log_weights(&mut dead).is_none());
    }

    #[test]
    fn entropy_of_fair_coin() {
        assert!((entropy(&[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }
}
