//! Thermal correlation functions on the strip `0 < Im z < β` and the KMS
//! boundary identity `G(t) = F(t + iβ)`.

use std::fmt::Write as _;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::kernel::{dagger, frobenius, trace};
use crate::algebra::{same_space, HasBlocks, Observable};
use crate::error::{invalid, Result};
use crate::scalar::{phase, Real};

use super::maxent::ThermalParams;

/// `F`, `G` on the real line, `F` on the upper boundary `t + iβ`, and `F` on
/// interior strip rows `t + iγ`.
#[derive(Clone, Debug)]
pub struct KmsCorrelators<T: Real> {
    pub beta: T,
    pub t_grid: Vec<T>,
    pub gamma_grid: Vec<T>,
    /// `F(t + i0)`.
    pub f_values: Vec<Complex<T>>,
    pub g_values: Vec<Complex<T>>,
    /// `F(t + iβ)`.
    pub f_boundary: Vec<Complex<T>>,
    /// `strip[j][i] = F(t_i + iγ_j)`.
    pub strip: Vec<Vec<Complex<T>>>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KmsReport {
    /// `max_t |G(t) - F(t+iβ)| / max_t |G(t)|`.
    pub boundary_residual: f64,
    pub boundary_abs: f64,
    /// Largest Cauchy–Riemann defect `|∂_γF - i∂_tF|` on interior lattice
    /// points, relative to `max |F|` on the strip.
    pub analyticity_residual: f64,
    pub analyticity_abs: f64,
    pub t_step: f64,
    pub gamma_step: f64,
}

/// Precomputed traces entering the correlators.
struct CorrelatorTerms<T: Real> {
    nodes: Vec<T>,
    weights: Vec<T>,
    /// `Tr(B_d(ω_k) A_d(ω_k))`.
    diag: Vec<Complex<T>>,
    bound: Complex<T>,
    bound_energy: Option<T>,
    /// `w_k w_l Tr(B(k,l) A(l,k))`, row-major.
    forward: Vec<Complex<T>>,
    /// `w_k w_l Tr(A(k,l) B(l,k))`, row-major.
    backward: Vec<Complex<T>>,
    log_norm: T,
    floor: T,
}

impl<T: Real> CorrelatorTerms<T> {
    fn new(a: &Observable<T>, b: &Observable<T>, beta: T) -> Result<Self> {
        same_space(a, b)?;
        if a.blocks().has_cross() || b.blocks().has_cross() {
            return Err(invalid(
                "correlators take continuum-kernel observables without cross blocks",
            ));
        }
        let grid = a.grid();
        let k = grid.len();
        let nodes = grid.nodes().to_vec();
        let weights = grid.weights().to_vec();
        let (ba, bb) = (a.blocks(), b.blocks());
        let diag = ba
            .diag
            .iter()
            .zip(&bb.diag)
            .map(|(x, y)| trace(&(y * x)))
            .collect();
        let bound = match (&ba.bound, &bb.bound) {
            (Some(x), Some(y)) => trace(&(y * x)),
            _ => Complex::new(T::zero(), T::zero()),
        };
        let mut forward = vec![Complex::new(T::zero(), T::zero()); k * k];
        let mut backward = forward.clone();
        if !ba.full.is_zero() && !bb.full.is_zero() {
            let m = a.csco().degeneracy;
            let ad = ba.full.to_dense(k, m);
            let bd = bb.full.to_dense(k, m);
            let rows: Vec<(Vec<Complex<T>>, Vec<Complex<T>>)> = (0..k)
                .into_par_iter()
                .map(|i| {
                    let mut f = Vec::with_capacity(k);
                    let mut g = Vec::with_capacity(k);
                    for j in 0..k {
                        let w = weights[i] * weights[j];
                        // Tr(XY) = Σ conj(X†)·Y
                        f.push(frobenius(&dagger(&bd[i * k + j]), &ad[j * k + i]) * w);
                        g.push(frobenius(&dagger(&ad[i * k + j]), &bd[j * k + i]) * w);
                    }
                    (f, g)
                })
                .collect();
            for (i, (f, g)) in rows.into_iter().enumerate() {
                forward[i * k..(i + 1) * k].copy_from_slice(&f);
                backward[i * k..(i + 1) * k].copy_from_slice(&g);
            }
        }
        let m = T::from_usize_lossy(a.csco().degeneracy);
        let floor = a.csco().bound_energy.unwrap_or(nodes[0]);
        let mut z = T::zero();
        if let Some(e0) = a.csco().bound_energy {
            z += m * (-beta * (e0 - floor)).exp();
        }
        for (&w, &wt) in nodes.iter().zip(&weights) {
            z += m * wt * (-beta * (w - floor)).exp();
        }
        Ok(Self {
            nodes,
            weights,
            diag,
            bound,
            bound_energy: a.csco().bound_energy,
            forward,
            backward,
            log_norm: z.ln(),
            floor,
        })
    }

    /// Time-independent diagonal contribution `Σ_k w_k e^{-βω_k} Tr(B_d A_d)`.
    fn diagonal_part(&self, beta: T) -> Complex<T> {
        let mut s = Complex::new(T::zero(), T::zero());
        if let Some(e0) = self.bound_energy {
            s += self.bound * (-beta * (e0 - self.floor) - self.log_norm).exp();
        }
        for ((d, &w), &wt) in self.diag.iter().zip(&self.nodes).zip(&self.weights) {
            s += *d * (wt * (-beta * (w - self.floor) - self.log_norm).exp());
        }
        s
    }

    /// `F(t + iγ)`: kernel factor `e^{-(β-γ)ω_k} e^{-iω_k t} e^{iω_l t} e^{-γω_l}`.
    fn f_at(&self, diag: Complex<T>, beta: T, t: T, gamma: T) -> Complex<T> {
        let k = self.nodes.len();
        let norm = (-self.log_norm).exp();
        let left: Vec<Complex<T>> = self
            .nodes
            .iter()
            .map(|&w| phase(-w * t) * (-(beta - gamma) * (w - self.floor)).exp())
            .collect();
        let right: Vec<Complex<T>> = self
            .nodes
            .iter()
            .map(|&w| phase(w * t) * (-gamma * (w - self.floor)).exp())
            .collect();
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..k {
            let mut row = Complex::new(T::zero(), T::zero());
            for j in 0..k {
                row += self.forward[i * k + j] * right[j];
            }
            acc += left[i] * row;
        }
        diag + acc * norm
    }

    /// `G(t)`: kernel factor `e^{-βω_k} e^{iω_k t} e^{-iω_l t}`.
    fn g_at(&self, diag: Complex<T>, beta: T, t: T) -> Complex<T> {
        let k = self.nodes.len();
        let norm = (-self.log_norm).exp();
        let left: Vec<Complex<T>> = self
            .nodes
            .iter()
            .map(|&w| phase(w * t) * (-beta * (w - self.floor)).exp())
            .collect();
        let right: Vec<Complex<T>> = self.nodes.iter().map(|&w| phase(-w * t)).collect();
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..k {
            let mut row = Complex::new(T::zero(), T::zero());
            for j in 0..k {
                row += self.backward[i * k + j] * right[j];
            }
            acc += left[i] * row;
        }
        diag + acc * norm
    }
}

/// Evaluates `F_{A,B}(z) = w_β[B α_z(A)]` and `G_{A,B}(t) = w_β[α_t(A) B]`.
///
/// The diagonal blocks contribute the time-independent part
/// `Σ_k w_k e^{-βω_k} Tr(B_d A_d)`; the continuum kernels contribute the
/// double sum with the analytic phase factors. Every `γ` must lie strictly
/// inside `(0, β)`.
pub fn kms_correlators<T: Real>(
    a: &Observable<T>,
    b: &Observable<T>,
    params: &ThermalParams<T>,
    t_grid: &[T],
    gamma_grid: &[T],
) -> Result<KmsCorrelators<T>> {
    let beta = params.beta;
    if !(beta > T::zero()) {
        return Err(invalid(format!("correlators need beta > 0, got {beta}")));
    }
    if !params.gammas.is_empty() {
        return Err(invalid(
            "correlators are defined for the canonical state only",
        ));
    }
    if let Some(g) = gamma_grid.iter().find(|&&g| !(g > T::zero() && g < beta)) {
        return Err(invalid(format!(
            "strip sample gamma = {g} is outside (0, {beta})"
        )));
    }
    if t_grid.is_empty() {
        return Err(invalid("empty time grid"));
    }
    let terms = CorrelatorTerms::new(a, b, beta)?;
    let diag = terms.diagonal_part(beta);
    let f_values = t_grid
        .par_iter()
        .map(|&t| terms.f_at(diag, beta, t, T::zero()))
        .collect();
    let g_values = t_grid
        .par_iter()
        .map(|&t| terms.g_at(diag, beta, t))
        .collect();
    let f_boundary = t_grid
        .par_iter()
        .map(|&t| terms.f_at(diag, beta, t, beta))
        .collect();
    let strip = gamma_grid
        .par_iter()
        .map(|&g| {
            t_grid
                .iter()
                .map(|&t| terms.f_at(diag, beta, t, g))
                .collect()
        })
        .collect();
    Ok(KmsCorrelators {
        beta,
        t_grid: t_grid.to_vec(),
        gamma_grid: gamma_grid.to_vec(),
        f_values,
        g_values,
        f_boundary,
        strip,
    })
}

fn uniform_step<T: Real>(xs: &[T]) -> Option<T> {
    if xs.len() < 3 {
        return None;
    }
    let h = xs[1] - xs[0];
    let ok = h > T::zero()
        && xs
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= T::lit(1e-9) * h.abs().max(T::one()));
    ok.then_some(h)
}

/// Boundary identity and Cauchy–Riemann residuals of the correlators.
pub fn verify_kms<T: Real>(
    corr: &KmsCorrelators<T>,
    params: &ThermalParams<T>,
) -> Result<KmsReport> {
    if corr.beta != params.beta {
        return Err(invalid("correlators were computed at a different beta"));
    }
    let n = corr.t_grid.len();
    if corr.g_values.len() != n
        || corr.f_boundary.len() != n
        || corr.strip.iter().any(|r| r.len() != n)
    {
        return Err(invalid("correlator series do not match the time grid"));
    }
    let ht = uniform_step(&corr.t_grid)
        .ok_or_else(|| invalid("time grid must be uniform with at least 3 points"))?;
    let hg = uniform_step(&corr.gamma_grid)
        .ok_or_else(|| invalid("strip rows must be uniform with at least 3 rows"))?;

    let mut boundary_abs = T::zero();
    let mut g_scale = T::zero();
    for (g, f) in corr.g_values.iter().zip(&corr.f_boundary) {
        boundary_abs = boundary_abs.max((g - f).norm());
        g_scale = g_scale.max(g.norm());
    }

    let i = Complex::new(T::zero(), T::one());
    let two = T::lit(2.0);
    let mut cr_abs = T::zero();
    let mut f_scale = T::zero();
    for row in &corr.strip {
        for v in row {
            f_scale = f_scale.max(v.norm());
        }
    }
    for j in 1..corr.strip.len() - 1 {
        for k in 1..n - 1 {
            let d_gamma = (corr.strip[j + 1][k] - corr.strip[j - 1][k]) / (two * hg);
            let d_t = (corr.strip[j][k + 1] - corr.strip[j][k - 1]) / (two * ht);
            cr_abs = cr_abs.max((d_gamma - i * d_t).norm());
        }
    }
    let rel = |x: T, s: T| {
        if s > T::zero() {
            (x / s).as_f64()
        } else {
            x.as_f64()
        }
    };
    Ok(KmsReport {
        boundary_residual: rel(boundary_abs, g_scale),
        boundary_abs: boundary_abs.as_f64(),
        analyticity_residual: rel(cr_abs, f_scale),
        analyticity_abs: cr_abs.as_f64(),
        t_step: ht.as_f64(),
        gamma_step: hg.as_f64(),
    })
}

/// Cauchy–Riemann defects `t, gamma, cr_residual` on interior lattice points.
pub fn strip_residual_csv<T: Real>(corr: &KmsCorrelators<T>) -> Result<String> {
    let ht = uniform_step(&corr.t_grid).ok_or_else(|| invalid("time grid must be uniform"))?;
    let hg = uniform_step(&corr.gamma_grid).ok_or_else(|| invalid("strip rows must be uniform"))?;
    let i = Complex::new(T::zero(), T::one());
    let two = T::lit(2.0);
    let mut out = String::from("t,gamma,cr_residual\n");
    for j in 1..corr.strip.len() - 1 {
        for k in 1..corr.t_grid.len() - 1 {
            let d_gamma = (corr.strip[j + 1][k] - corr.strip[j - 1][k]) / (two * hg);
            let d_t = (corr.strip[j][k + 1] - corr.strip[j][k - 1]) / (two * ht);
            let _ = writeln!(
                out,
                "{:.12e},{:.12e},{:.12e}",
                corr.t_grid[k].as_f64(),
                corr.gamma_grid[j].as_f64(),
                (d_gamma - i * d_t).norm().as_f64()
            );
        }
    }
    Ok(out)
}

/// CSV `t,re_f,im_f,re_g,im_g` on the real line.
pub fn correlator_csv<T: Real>(corr: &KmsCorrelators<T>) -> String {
    let mut out = String::from("t,re_f,im_f,re_g,im_g\n");
    for ((t, f), g) in corr.t_grid.iter().zip(&corr.f_values).zip(&corr.g_values) {
        let _ = writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            t.as_f64(),
            f.re.as_f64(),
            f.im.as_f64(),
            g.re.as_f64(),
            g.im.as_f64()
        );
    }
    out
}

/// Uniform lattice `[start, end]` with `steps` intervals.
pub fn uniform_lattice<T: Real>(start: T, end: T, steps: usize) -> Vec<T> {
    let h = (end - start) / T::from_usize_lossy(steps.max(1));
    (0..=steps)
        .map(|i| start + h * T::from_usize_lossy(i))
        .collect()
}

/// `rows` interior strip heights `γ_j = β j/(rows+1)`.
pub fn strip_rows<T: Real>(beta: T, rows: usize) -> Vec<T> {
    let d = T::from_usize_lossy(rows + 1);
    (1..=rows)
        .map(|j| beta * T::from_usize_lossy(j) / d)
        .collect()
}
