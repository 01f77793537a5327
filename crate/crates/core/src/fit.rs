//! Small least-squares helpers shared by the diagnostics.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual sum of squares (weighted when weights were given).
    pub rss: f64,
    pub slope_stderr: f64,
    pub n: usize,
}

impl LinearFit {
    /// Two-sided confidence interval for the slope from Student's t.
    pub fn slope_interval(&self, level: f64) -> (f64, f64) {
        if self.n < 3 || !self.slope_stderr.is_finite() {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let dof = (self.n - 2) as f64;
        let t = StudentsT::new(0.0, 1.0, dof)
            .expect("positive dof")
            .inverse_cdf(0.5 + level / 2.0);
        (
            self.slope - t * self.slope_stderr,
            self.slope + t * self.slope_stderr,
        )
    }
}

/// Ordinary least squares `y ≈ a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let w = vec![1.0; x.len()];
    weighted_linear_fit(x, y, &w)
}

/// Weighted least squares `y ≈ a + b x` with weights `w ≥ 0`.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() != w.len() || x.len() < 2 {
        return None;
    }
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return None;
    }
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        sxx += wi * (xi - mx) * (xi - mx);
        sxy += wi * (xi - mx) * (yi - my);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&xi, &yi), &wi)| wi * (yi - intercept - slope * xi).powi(2))
        .sum();
    let n = w.iter().filter(|&&v| v > 0.0).count();
    let slope_stderr = if n > 2 {
        // effective scale for weights normalized to sum n
        let sigma2 = rss / (n as f64 - 2.0) * (n as f64 / sw);
        (sigma2 / (sxx * n as f64 / sw)).sqrt()
    } else {
        f64::INFINITY
    };
    Some(LinearFit {
        slope,
        intercept,
        rss,
        slope_stderr,
        n,
    })
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}
