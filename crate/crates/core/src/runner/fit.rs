use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};

/// `1 - F ~ c N^a` fitted by least squares in log-log space. The exponent is
/// signed: decaying curves give `a < 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub exponent_std_err: f64,
    pub window: (f64, f64),
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 5;

/// Ordinary least squares of `ln y` on `ln n` over points with
/// `window.0 <= n <= window.1`.
pub fn fit_power_law(curve: &[(f64, f64)], window: (f64, f64)) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .copied()
        .filter(|(n, _)| *n >= window.0 && *n <= window.1)
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(TomoError::Fit(format!(
            "need at least {MIN_FIT_POINTS} points in window [{}, {}], got {}",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if let Some((n, y)) = pts
        .iter()
        .find(|(n, y)| !(*n > 0.0 && *y > 0.0 && y.is_finite()))
    {
        return Err(TomoError::Fit(format!("nonpositive value at N = {n}: {y}")));
    }
    let xs: Vec<f64> = pts.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, y)| y.ln()).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(TomoError::Fit("all points share one N".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = (rss / (m - 2.0) / sxx).sqrt();
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        exponent_std_err: se,
        window,
        points: pts.len(),
    })
}

/// Default fit window `[max(ceil(N / 100), 32), N]`.
pub fn default_fit_window(n_total: u64) -> (f64, f64) {
    (n_total.div_ceil(100).max(32) as f64, n_total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Vec<f64> {
        (0..25).map(|i| 10f64.powf(i as f64 / 6.0)).collect()
    }

    #[test]
    fn exact_power_laws() {
        let c1: Vec<(f64, f64)> = grid().into_iter().map(|n| (n, 0.5 / n)).collect();
        let f = fit_power_law(&c1, (1.0, 1e4)).unwrap();
        assert!((f.exponent + 1.0).abs() < 1e-9);
        assert!((f.prefactor - 0.5).abs() < 1e-9);
        let c2: Vec<(f64, f64)> = grid()
            .into_iter()
            .map(|n| (n, 2.0 * n.powf(-0.5)))
            .collect();
        let f = fit_power_law(&c2, (1.0, 1e4)).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-9);
        assert!((f.prefactor - 2.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_slope_within_three_standard_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut misses = 0;
        for _ in 0..200 {
            let c: Vec<(f64, f64)> = grid()
                .into_iter()
                .map(|n| {
                    let noise = 1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt();
                    (n, 0.3 * n.powf(-0.9) * noise)
                })
                .collect();
            let f = fit_power_law(&c, (1.0, 1e4)).unwrap();
            if (f.exponent + 0.9).abs() > 3.0 * f.exponent_std_err {
                misses += 1;
            }
        }
        // ~0.3% expected outside 3 sigma
        assert!(misses <= 4, "{misses}");
    }

    #[test]
    fn error_paths() {
        let c: Vec<(f64, f64)> = grid().into_iter().map(|n| (n, 1.0 / n)).collect();
        assert!(fit_power_law(&c[..4], (1.0, 1e4)).is_err());
        let mut bad = c.clone();
        bad[10].1 = 0.0;
        assert!(fit_power_law(&bad, (1.0, 1e4)).is_err());
        assert!(fit_power_law(&c, (5000.0, 1e4)).is_err());
    }

    #[test]
    fn default_window() {
        assert_eq!(default_fit_window(10_000), (100.0, 10_000.0));
        assert_eq!(default_fit_window(1000), (32.0, 1000.0));
    }
}
