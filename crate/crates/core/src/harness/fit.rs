//! Least-squares power-law fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln y = intercept + slope ln x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Minimum number of points for a reported exponent.
pub const MIN_FIT_POINTS: usize = 4;

/// Fits `y ~ x^slope` over the pairs with both entries positive and finite.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::FitUnderdetermined {
            points: pts.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::FitUnderdetermined {
            points: 1,
            required: MIN_FIT_POINTS,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}

/// Number of adjacent decreases in `y` (ordered by increasing `x`).
pub fn inversions(y: &[f64]) -> usize {
    y.windows(2).filter(|w| w[1] < w[0]).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let x = [1e-4, 1e-3, 1e-2, 1e-1];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.7)).collect();
        let fit = loglog_fit(&x, &y).unwrap();
        assert!((fit.slope - 0.7).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let err = loglog_fit(&[1.0, 2.0, 3.0, 0.0], &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert!(matches!(err, Error::FitUnderdetermined { points: 3, required: 4 }));
    }

    proptest! {
        #[test]
        fn slope_invariant_under_scaling(a in 0.1f64..10.0, b in 0.1f64..10.0, p in -2.0f64..2.0) {
            let x = [0.1f64, 0.3, 1.0, 3.0, 10.0];
            let y: Vec<f64> = x.iter().map(|v| v.powf(p) * (1.0 + 0.1 * v.sin())).collect();
            let f1 = loglog_fit(&x, &y).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| a * v).collect();
            let ys: Vec<f64> = y.iter().map(|v| b * v).collect();
            let f2 = loglog_fit(&xs, &ys).unwrap();
            prop_assert!((f1.slope - f2.slope).abs() < 1e-9);
            prop_assert!((f1.r_squared - f2.r_squared).abs() < 1e-9);
        }
    }
}
