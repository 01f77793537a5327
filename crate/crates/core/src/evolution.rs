//! Unitary evolution of state functionals and decoherence diagnostics.
//!
//! Evolution only rotates phases of the off-diagonal blocks; diagonal blocks
//! are never touched, so normalization is conserved bitwise.

use std::fmt::Write as _;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{
    pair_blocks, same_space, Blocks, HasBlocks, Kernel, Observable, StateFunctional,
};
use crate::error::{invalid, LabError, Result};
use crate::fit::linear_fit;
use crate::scalar::{phase, Real};

/// `ρ(t)`: phases `e^{-i(ω-ω₀)t}`, `e^{-i(ω₀-ω′)t}` and `e^{-i(ω-ω′)t}` on the
/// stored density-matrix elements of the cross and continuum kernels.
pub fn evolve<T: Real>(rho: &StateFunctional<T>, t: T) -> StateFunctional<T> {
    let b = rho.blocks();
    let nodes = rho.grid().nodes();
    let e0 = rho.csco().bound_energy.unwrap_or_else(T::zero);
    let rotate = |blocks: &Option<Vec<_>>, sign: T| {
        blocks.as_ref().map(|v: &Vec<crate::algebra::CMat<T>>| {
            v.iter()
                .zip(nodes)
                .map(|(x, &w)| {
                    let p = phase(sign * (w - e0) * t);
                    x.map(|z| z * p)
                })
                .collect()
        })
    };
    let fwd: Vec<Complex<T>> = nodes.iter().map(|&w| phase(-w * t)).collect();
    let bwd: Vec<Complex<T>> = nodes.iter().map(|&w| phase(w * t)).collect();
    let blocks = Blocks {
        bound: b.bound.clone(),
        diag: b.diag.clone(),
        cross_lo: rotate(&b.cross_lo, -T::one()),
        cross_ol: rotate(&b.cross_ol, T::one()),
        full: b.full.modulate(&fwd, &bwd),
    };
    rho.with_blocks(blocks).expect("evolution preserves shapes")
}

/// `(ρ(t)|O)` evaluated with phase-weighted quadrature, without building `ρ(t)`.
pub fn mean_at<T: Real>(rho: &StateFunctional<T>, obs: &Observable<T>, t: T) -> Result<T> {
    same_space(rho, obs)?;
    Ok(pair_blocks(rho.grid(), rho.csco(), rho.blocks(), obs.blocks(), Some(t)).re)
}

/// Diagonal equilibrium state `ρ*`: bound and diagonal blocks only.
pub fn asymptotic_state<T: Real>(rho: &StateFunctional<T>) -> StateFunctional<T> {
    let b = rho.blocks();
    let blocks = Blocks {
        bound: b.bound.clone(),
        diag: b.diag.clone(),
        cross_lo: None,
        cross_ol: None,
        full: Kernel::Zero,
    };
    rho.with_blocks(blocks)
        .expect("dropping blocks preserves shapes")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeModel {
    /// `r(t) = A e^{-b t²}`
    Gaussian,
    /// `r(t) = A t^{-p}`
    PowerLaw,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub model: EnvelopeModel,
    /// `b` for the Gaussian model, `p` for the power law.
    pub rate: f64,
    pub half_life: f64,
    /// Residual sum of squares of `ln r` for the reported model.
    pub log_rss: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecoherenceCurve {
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub asymptotic_mean: f64,
    pub residuals: Vec<f64>,
    pub revival_horizon: f64,
    /// Some sample lies beyond half the revival horizon (only with the override).
    pub beyond_revival: bool,
    pub fitted_decay: Option<DecayFit>,
}

impl DecoherenceCurve {
    /// CSV with columns `t,mean,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean,residual\n");
        for ((t, m), r) in self.times.iter().zip(&self.means).zip(&self.residuals) {
            let _ = writeln!(out, "{t:.12e},{m:.12e},{r:.12e}");
        }
        out
    }
}

/// Residuals `|(ρ(t)|O) - (ρ*|O)|` along `times`.
///
/// Times beyond half the grid's revival horizon are refused unless
/// `allow_beyond_revival` is set.
pub fn decoherence_curve<T: Real>(
    rho: &StateFunctional<T>,
    obs: &Observable<T>,
    times: &[T],
    allow_beyond_revival: bool,
) -> Result<DecoherenceCurve> {
    same_space(rho, obs)?;
    if times.is_empty() {
        return Err(invalid("decoherence curve needs at least one time"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("times must be strictly increasing"));
    }
    let horizon = rho.grid().revival_horizon();
    let limit = horizon * T::lit(0.5);
    let worst = times.iter().fold(T::zero(), |m, t| m.max(t.abs()));
    let beyond = worst > limit;
    if beyond && !allow_beyond_revival {
        return Err(LabError::RevivalHorizon {
            time: worst.as_f64(),
            horizon: horizon.as_f64(),
        });
    }
    let star = asymptotic_state(rho);
    let asymptotic = pair_blocks(star.grid(), star.csco(), star.blocks(), obs.blocks(), None).re;
    let means: Vec<T> = times
        .par_iter()
        .map(|&t| pair_blocks(rho.grid(), rho.csco(), rho.blocks(), obs.blocks(), Some(t)).re)
        .collect();
    let residuals: Vec<f64> = means
        .iter()
        .map(|&m| (m - asymptotic).abs().as_f64())
        .collect();
    let times: Vec<f64> = times.iter().map(|t| t.as_f64()).collect();
    let fitted_decay = fit_envelope(&times, &residuals);
    Ok(DecoherenceCurve {
        means: means.iter().map(|m| m.as_f64()).collect(),
        asymptotic_mean: asymptotic.as_f64(),
        residuals,
        revival_horizon: horizon.as_f64(),
        beyond_revival: beyond,
        fitted_decay,
        times,
    })
}

/// Least-squares fits of `ln r` against `t²` and `ln t`; returns the better one.
pub fn fit_envelope(times: &[f64], residuals: &[f64]) -> Option<DecayFit> {
    let peak = residuals.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(residuals)
        .filter(|(&t, &r)| t > 0.0 && r > peak * 1e-13)
        .map(|(&t, &r)| (t, r.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let ln_r: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let t_sq: Vec<f64> = pts.iter().map(|p| p.0 * p.0).collect();
    let ln_t: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let gauss = linear_fit(&t_sq, &ln_r)?;
    let power = linear_fit(&ln_t, &ln_r)?;
    let t0 = pts[0].0;
    let fit = if gauss.rss <= power.rss {
        let b = -gauss.slope;
        DecayFit {
            model: EnvelopeModel::Gaussian,
            rate: b,
            half_life: if b > 0.0 {
                (std::f64::consts::LN_2 / b).sqrt()
            } else {
                f64::INFINITY
            },
            log_rss: gauss.rss,
        }
    } else {
        let p = -power.slope;
        DecayFit {
            model: EnvelopeModel::PowerLaw,
            rate: p,
            half_life: if p > 0.0 {
                t0 * 2f64.powf(1.0 / p)
            } else {
                f64::INFINITY
            },
            log_rss: power.rss,
        }
    };
    Some(fit)
}
