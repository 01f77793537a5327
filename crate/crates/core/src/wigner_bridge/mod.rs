//! Wigner map between position-space kernels and phase-space functions for
//! one degree of freedom, with an explicit `ħ_eff`.
//!
//! Operators are stored as matrices on a uniform position grid in the
//! density-matrix normalization (`Tr ρ = Σ_a ρ_aa = 1`); the continuum kernel
//! is `matrix / Δq`. Momentum uses the sinc-DVR derivative, which is exact
//! for band-limited functions on the grid.

mod correspondence;
mod model;
mod star;
mod symbol;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::CMat;
use crate::error::{invalid, Result};
use crate::scalar::{cplx, phase, Real};

pub use correspondence::{
    correspondence_suite, mixed_gaussian_state, CorrespondenceReport, ScalingSeries, SuiteGrid,
    PROBE_STATE,
};
pub use model::{
    classical_grand_density, classical_thermal_density, quantum_thermal_state, ClassicalModel,
    BOUNDARY_MASS_LIMIT,
};
pub use star::{
    build_classical_star_density, moment_check, shell_density, shells_from_state, MomentRow, Shell,
    StarDensity, StarModel,
};
pub use symbol::PolySymbol;

/// Fraction of each row's λ-window covered by the cosine taper.
pub const TAPER_FRACTION: f64 = 0.1;

/// Uniform symmetric phase-space grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseGrid<T> {
    pub q_nodes: Vec<T>,
    pub p_nodes: Vec<T>,
    pub dq: T,
    pub dp: T,
    pub hbar: T,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(q_extent: T, nq: usize, p_extent: T, np: usize, hbar: T) -> Result<Self> {
        if nq < 3 || np < 2 {
            return Err(invalid("phase grid needs at least 3 q nodes and 2 p nodes"));
        }
        if !(q_extent > T::zero() && p_extent > T::zero() && hbar > T::zero()) {
            return Err(invalid("phase grid extents and hbar must be positive"));
        }
        let line = |ext: T, n: usize| -> Vec<T> {
            let h = ext * T::lit(2.0) / T::from_usize_lossy(n - 1);
            (0..n).map(|i| -ext + h * T::from_usize_lossy(i)).collect()
        };
        let q_nodes = line(q_extent, nq);
        let p_nodes = line(p_extent, np);
        let dq = q_nodes[1] - q_nodes[0];
        let dp = p_nodes[1] - p_nodes[0];
        Ok(Self {
            q_nodes,
            p_nodes,
            dq,
            dp,
            hbar,
        })
    }

    pub fn nq(&self) -> usize {
        self.q_nodes.len()
    }

    pub fn np(&self) -> usize {
        self.p_nodes.len()
    }

    /// `Δq·Δp ≤ ħ/4`.
    pub fn resolves_hbar(&self) -> bool {
        self.dq * self.dp <= self.hbar / T::lit(4.0)
    }

    /// Largest momentum a state transform represents without wrap-around.
    pub fn momentum_nyquist(&self) -> T {
        T::PI() * self.hbar / (T::lit(2.0) * self.dq)
    }

    pub fn aliasing_free(&self) -> bool {
        let pmax = self.p_nodes.iter().fold(T::zero(), |m, p| m.max(p.abs()));
        pmax < self.momentum_nyquist()
    }

    /// Same grid at a different `ħ_eff`.
    pub fn with_hbar(&self, hbar: T) -> Self {
        Self {
            hbar,
            ..self.clone()
        }
    }

    /// Trapezoid weights along q and p.
    fn weights(n: usize, h: T) -> Vec<T> {
        (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    h * T::lit(0.5)
                } else {
                    h
                }
            })
            .collect()
    }

    pub fn q_weights(&self) -> Vec<T> {
        Self::weights(self.nq(), self.dq)
    }

    pub fn p_weights(&self) -> Vec<T> {
        Self::weights(self.np(), self.dp)
    }

    /// `∬ f dq dp` by the trapezoid rule.
    pub fn integrate(&self, f: &DMatrix<T>) -> Result<T> {
        if f.nrows() != self.nq() || f.ncols() != self.np() {
            return Err(invalid("phase-space array does not match the grid"));
        }
        let wq = self.q_weights();
        let wp = self.p_weights();
        let mut acc = T::zero();
        for i in 0..self.nq() {
            let mut row = T::zero();
            for j in 0..self.np() {
                row += wp[j] * f[(i, j)];
            }
            acc += wq[i] * row;
        }
        Ok(acc)
    }

    /// Samples `f(q, p)` on the grid.
    pub fn sample<F: Fn(T, T) -> T + Sync>(&self, f: F) -> DMatrix<T> {
        DMatrix::from_fn(self.nq(), self.np(), |i, j| {
            f(self.q_nodes[i], self.p_nodes[j])
        })
    }
}

/// Operator on the position grid, stored as its matrix `⟨q_a|O|q_b⟩Δq`.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionKernel<T: Real> {
    pub matrix: CMat<T>,
    pub dq: T,
}

impl<T: Real> PositionKernel<T> {
    pub fn new(matrix: CMat<T>, dq: T) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(invalid("position kernel must be square"));
        }
        Ok(Self { matrix, dq })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    /// Continuum kernel value `⟨q_a|O|q_b⟩`.
    pub fn kernel(&self, a: usize, b: usize) -> Complex<T> {
        self.matrix[(a, b)] / self.dq
    }

    pub fn identity(n: usize, dq: T) -> Self {
        Self {
            matrix: CMat::identity(n, n),
            dq,
        }
    }

    /// Multiplication operator `f(Q)`.
    pub fn multiplication<F: Fn(T) -> T>(grid: &PhaseGrid<T>, f: F) -> Self {
        let n = grid.nq();
        let mut m = CMat::from_element(n, n, cplx(T::zero()));
        for (a, &q) in grid.q_nodes.iter().enumerate() {
            m[(a, a)] = cplx(f(q));
        }
        Self {
            matrix: m,
            dq: grid.dq,
        }
    }

    pub fn position(grid: &PhaseGrid<T>) -> Self {
        Self::multiplication(grid, |q| q)
    }

    /// Sinc-DVR first derivative `D_ab = (-1)^{a-b} / ((a-b)Δq)`.
    pub fn derivative_matrix(n: usize, dq: T) -> CMat<T> {
        CMat::from_fn(n, n, |a, b| {
            if a == b {
                cplx(T::zero())
            } else {
                let d = a as i64 - b as i64;
                let sign = if d % 2 == 0 { T::one() } else { -T::one() };
                cplx(sign / (T::lit(d as f64) * dq))
            }
        })
    }

    /// `P = -iħ D`.
    pub fn momentum(grid: &PhaseGrid<T>) -> Self {
        let d = Self::derivative_matrix(grid.nq(), grid.dq);
        let f = Complex::new(T::zero(), -grid.hbar);
        Self {
            matrix: d.map(|z| z * f),
            dq: grid.dq,
        }
    }

    /// Pure state `|ψ⟩⟨ψ|` from samples of `ψ`, normalized on the grid.
    pub fn from_wavefunction(psi: &[Complex<T>], dq: T) -> Result<Self> {
        let norm: T = psi.iter().map(|z| z.norm_sqr()).sum::<T>() * dq;
        if !(norm > T::zero()) {
            return Err(invalid("wavefunction has zero norm"));
        }
        let n = psi.len();
        let s = dq / norm;
        Ok(Self {
            matrix: CMat::from_fn(n, n, |a, b| psi[a] * psi[b].conj() * s),
            dq,
        })
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix * &other.matrix,
            dq: self.dq,
        }
    }

    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Self {
        Self {
            matrix: self.matrix.map(|z| z * a) + other.matrix.map(|z| z * b),
            dq: self.dq,
        }
    }

    /// `(AB + BA)/2`.
    pub fn symmetrized(&self, other: &Self) -> Self {
        let ab = self.compose(other);
        let ba = other.compose(self);
        ab.lin_comb(T::lit(0.5), &ba, T::lit(0.5))
    }

    /// `[A, B]/(iħ)`.
    pub fn commutator_over_ihbar(&self, other: &Self, hbar: T) -> Self {
        let c = &self.matrix * &other.matrix - &other.matrix * &self.matrix;
        let f = Complex::new(T::zero(), -T::one() / hbar);
        Self {
            matrix: c.map(|z| z * f),
            dq: self.dq,
        }
    }

    pub fn trace(&self) -> Complex<T> {
        crate::algebra::kernel::trace(&self.matrix)
    }

    pub fn hermiticity_defect(&self) -> T {
        crate::algebra::kernel::hermiticity_defect(&self.matrix)
    }
}

/// Quantum mean `Tr(ρ O)`.
pub fn quantum_pair<T: Real>(rho: &PositionKernel<T>, obs: &PositionKernel<T>) -> Result<T> {
    if rho.len() != obs.len() {
        return Err(invalid("kernels live on different grids"));
    }
    let n = rho.len();
    let mut acc = Complex::new(T::zero(), T::zero());
    for a in 0..n {
        for b in 0..n {
            acc += rho.matrix[(a, b)] * obs.matrix[(b, a)];
        }
    }
    Ok(acc.re)
}

/// Real phase-space function sampled on a [`PhaseGrid`].
#[derive(Clone, Debug)]
pub struct PhaseFunction<T: Real> {
    /// `values[(i, j)] = f(q_i, p_j)`.
    pub values: DMatrix<T>,
    /// Largest discarded imaginary part.
    pub imag_residual: T,
    /// `∬ f dq dp` for state transforms.
    pub norm: Option<T>,
    pub taper_fraction: f64,
}

/// Wigner density of a state.
pub type WignerDensity<T> = PhaseFunction<T>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    State,
    Observable,
}

/// Cosine taper on the outer fraction of the window `|j| ≤ half`.
fn taper<T: Real>(j: i64, half: i64) -> T {
    if half == 0 {
        return T::one();
    }
    let a = j.unsigned_abs() as f64;
    let h = half as f64;
    let start = (1.0 - TAPER_FRACTION) * h;
    if a <= start {
        T::one()
    } else {
        T::lit(0.5 * (1.0 + (std::f64::consts::PI * (a - start) / (h - start)).cos()))
    }
}

fn check_grid<T: Real>(kernel: &PositionKernel<T>, grid: &PhaseGrid<T>) -> Result<()> {
    let tol = T::lit(1e-12) * grid.dq.abs();
    if kernel.len() != grid.nq() || (kernel.dq - grid.dq).abs() > tol {
        return Err(invalid(
            "kernel and phase grid use different position grids",
        ));
    }
    Ok(())
}

/// Sums `Σ_j c_j e^{i j θ}` for every p node, row by row in parallel.
fn fourier_rows<T: Real, C>(grid: &PhaseGrid<T>, step: T, coeffs: C) -> DMatrix<Complex<T>>
where
    C: Fn(usize) -> Vec<(i64, Complex<T>)> + Sync,
{
    let nq = grid.nq();
    let np = grid.np();
    let rows: Vec<Vec<Complex<T>>> = (0..nq)
        .into_par_iter()
        .map(|i| {
            let terms = coeffs(i);
            grid.p_nodes
                .iter()
                .map(|&p| {
                    let theta = step * p / grid.hbar;
                    terms
                        .iter()
                        .fold(Complex::new(T::zero(), T::zero()), |acc, &(j, c)| {
                            acc + c * phase(theta * T::lit(j as f64))
                        })
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(nq, np, |i, j| rows[i][j])
}

fn split_real<T: Real>(z: DMatrix<Complex<T>>) -> (DMatrix<T>, T) {
    let imag = z.iter().fold(T::zero(), |m, c| m.max(c.im.abs()));
    (z.map(|c| c.re), imag)
}

/// Coefficients `ρ(q_i - y_j, q_i + y_j)` of the state transform, `y_j = jΔq`,
/// scaled by `factor(j)` and the taper.
fn state_coeffs<T: Real, F: Fn(i64) -> Complex<T>>(
    m: &CMat<T>,
    i: usize,
    factor: F,
) -> Vec<(i64, Complex<T>)> {
    let n = m.nrows();
    let half = i.min(n - 1 - i) as i64;
    (-half..=half)
        .map(|j| {
            let a = (i as i64 - j) as usize;
            let b = (i as i64 + j) as usize;
            (j, m[(a, b)] * factor(j) * taper::<T>(j, half))
        })
        .collect()
}

/// `W(q_i, p) = (1/πħ) Σ_j ρ(q_i - y_j, q_i + y_j) e^{2i y_j p/ħ} Δq`.
pub fn wigner_state<T: Real>(
    rho: &PositionKernel<T>,
    grid: &PhaseGrid<T>,
) -> Result<WignerDensity<T>> {
    check_grid(rho, grid)?;
    let pref = T::one() / (T::PI() * grid.hbar);
    let (values, imag) = split_real(fourier_rows(grid, grid.dq * T::lit(2.0), |i| {
        state_coeffs(&rho.matrix, i, |_| cplx(pref))
    }));
    let norm = grid.integrate(&values)?;
    Ok(PhaseFunction {
        values,
        imag_residual: imag,
        norm: Some(norm),
        taper_fraction: TAPER_FRACTION,
    })
}

/// `O^W(q_i, p) = Σ_n Õ(q_i, λ_n) e^{iλ_n p/ħ} Δq` with `λ_n = nΔq`; odd
/// offsets average the two neighbouring anti-diagonal entries.
pub fn wigner_observable<T: Real>(
    obs: &PositionKernel<T>,
    grid: &PhaseGrid<T>,
) -> Result<PhaseFunction<T>> {
    let (values, imag) = split_real(wigner_symbol(obs, grid)?);
    Ok(PhaseFunction {
        values,
        imag_residual: imag,
        norm: None,
        taper_fraction: TAPER_FRACTION,
    })
}

/// Complex Weyl symbol, for operators that are not Hermitian.
pub fn wigner_symbol<T: Real>(
    obs: &PositionKernel<T>,
    grid: &PhaseGrid<T>,
) -> Result<DMatrix<Complex<T>>> {
    check_grid(obs, grid)?;
    let m = &obs.matrix;
    let n = m.nrows();
    let half_t = T::lit(0.5);
    Ok(fourier_rows(grid, grid.dq, |i| {
        let half = i.min(n - 1 - i) as i64;
        let window = 2 * half;
        let ii = i as i64;
        (-window..=window)
            .filter(|&k| k % 2 == 0 || (k.abs() + 1) / 2 <= half)
            .map(|k| {
                let v = if k % 2 == 0 {
                    m[((ii - k / 2) as usize, (ii + k / 2) as usize)]
                } else {
                    let lo = k.div_euclid(2);
                    // indices i - (k+1)/2, i + (k-1)/2 and i - (k-1)/2, i + (k+1)/2
                    let a1 = ii - (lo + 1);
                    let b1 = ii + lo;
                    let a2 = ii - lo;
                    let b2 = ii + lo + 1;
                    (m[(a1 as usize, b1 as usize)] + m[(a2 as usize, b2 as usize)]) * half_t
                };
                (k, v * taper::<T>(k, window.max(1)))
            })
            .collect()
    }))
}

/// Dispatches on the transform convention.
pub fn wigner_transform<T: Real>(
    kernel: &PositionKernel<T>,
    grid: &PhaseGrid<T>,
    kind: TransformKind,
) -> Result<PhaseFunction<T>> {
    match kind {
        TransformKind::State => wigner_state(kernel, grid),
        TransformKind::Observable => wigner_observable(kernel, grid),
    }
}

/// `∂W/∂q` as the transform of `[D, ρ]`.
pub fn wigner_state_dq<T: Real>(
    rho: &PositionKernel<T>,
    grid: &PhaseGrid<T>,
) -> Result<PhaseFunction<T>> {
    let d = PositionKernel::<T>::derivative_matrix(grid.nq(), grid.dq);
    let comm = &d * &rho.matrix - &rho.matrix * &d;
    wigner_state(
        &PositionKernel {
            matrix: comm,
            dq: rho.dq,
        },
        grid,
    )
    .map(|mut f| {
        f.norm = None;
        f
    })
}

/// `∂W/∂p` from the factor `2i y_j/ħ` inside the transform sum.
pub fn wigner_state_dp<T: Real>(
    rho: &PositionKernel<T>,
    grid: &PhaseGrid<T>,
) -> Result<PhaseFunction<T>> {
    check_grid(rho, grid)?;
    let pref = T::one() / (T::PI() * grid.hbar);
    let two_dq_over_h = T::lit(2.0) * grid.dq / grid.hbar;
    let (values, imag) = split_real(fourier_rows(grid, grid.dq * T::lit(2.0), |i| {
        state_coeffs(&rho.matrix, i, |j| {
            Complex::new(T::zero(), two_dq_over_h * T::lit(j as f64) * pref)
        })
    }));
    Ok(PhaseFunction {
        values,
        imag_residual: imag,
        norm: None,
        taper_fraction: TAPER_FRACTION,
    })
}

/// `∬ ρ^W O^W dq dp`.
pub fn classical_mean<T: Real>(
    rho_w: &PhaseFunction<T>,
    obs_w: &DMatrix<T>,
    grid: &PhaseGrid<T>,
) -> Result<T> {
    if rho_w.values.shape() != obs_w.shape() {
        return Err(invalid("phase-space arrays have different shapes"));
    }
    grid.integrate(&rho_w.values.component_mul(obs_w))
}

impl<T: Real> PhaseFunction<T> {
    /// CSV rows `q,p,value`.
    pub fn to_csv(&self, grid: &PhaseGrid<T>) -> String {
        let mut out = String::from("q,p,value\n");
        for (i, q) in grid.q_nodes.iter().enumerate() {
            for (j, p) in grid.p_nodes.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{:.12e},{:.12e},{:.12e}",
                    q.as_f64(),
                    p.as_f64(),
                    self.values[(i, j)].as_f64()
                );
            }
        }
        out
    }

    /// Little-endian `f64` array in row-major `(q, p)` order plus its JSON header.
    pub fn to_binary(&self, grid: &PhaseGrid<T>) -> (Vec<u8>, serde_json::Value) {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for i in 0..self.values.nrows() {
            for j in 0..self.values.ncols() {
                bytes.extend_from_slice(&self.values[(i, j)].as_f64().to_le_bytes());
            }
        }
        let header = serde_json::json!({
            "shape": [self.values.nrows(), self.values.ncols()],
            "order": "row-major",
            "dtype": "f64-le",
            "q_min": grid.q_nodes[0].as_f64(),
            "p_min": grid.p_nodes[0].as_f64(),
            "dq": grid.dq.as_f64(),
            "dp": grid.dp.as_f64(),
            "hbar_eff": grid.hbar.as_f64(),
            "taper_fraction": self.taper_fraction,
            "norm": self.norm.map(|n| n.as_f64()),
        });
        (bytes, header)
    }

    /// Largest absolute value over the sub-box `|q| ≤ qmax`, `|p| ≤ pmax`.
    pub fn max_abs_in(&self, grid: &PhaseGrid<T>, qmax: T, pmax: T) -> T {
        let mut worst = T::zero();
        for (i, q) in grid.q_nodes.iter().enumerate() {
            if q.abs() > qmax {
                continue;
            }
            for (j, p) in grid.p_nodes.iter().enumerate() {
                if p.abs() <= pmax {
                    worst = worst.max(self.values[(i, j)].abs());
                }
            }
        }
        worst
    }
}

/// Harmonic-oscillator eigenfunction samples `φ_n(q)` for `n ∈ {0, 1}` with unit mass and frequency.
pub fn oscillator_state<T: Real>(grid: &PhaseGrid<T>, level: usize) -> Result<PositionKernel<T>> {
    let psi: Vec<Complex<T>> = grid
        .q_nodes
        .iter()
        .map(|&q| {
            let g = (-q * q / (T::lit(2.0) * grid.hbar)).exp();
            match level {
                0 => Ok(cplx(g)),
                1 => Ok(cplx(q * g)),
                _ => Err(invalid(
                    "only the two lowest oscillator levels are provided",
                )),
            }
        })
        .collect::<Result<_>>()?;
    PositionKernel::from_wavefunction(&psi, grid.dq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(hbar: f64) -> PhaseGrid<f64> {
        let ext = 7.0 * hbar.sqrt();
        PhaseGrid::new(ext, 161, 5.0 * hbar.sqrt(), 81, hbar).unwrap()
    }

    #[test]
    fn ground_state_matches_gaussian() {
        for hbar in [1.0, 0.2] {
            let g = grid(hbar);
            let rho = oscillator_state(&g, 0).unwrap();
            let w = wigner_state(&rho, &g).unwrap();
            let exact =
                g.sample(|q, p| (-(q * q + p * p) / hbar).exp() / (std::f64::consts::PI * hbar));
            let err = (&w.values - &exact).abs().max();
            assert!(err < 1e-6, "hbar={hbar}: {err}");
            assert!(w.imag_residual < 1e-10);
            assert!((w.norm.unwrap() - 1.0).abs() < 1e-6);
            assert!(w.values.iter().all(|&v| v > -1e-10));
        }
    }

    #[test]
    fn first_excited_state_is_negative_at_origin() {
        let hbar = 0.5;
        let g = grid(hbar);
        let rho = oscillator_state(&g, 1).unwrap();
        let w = wigner_state(&rho, &g).unwrap();
        let (i0, j0) = (g.nq() / 2, g.np() / 2);
        assert_eq!(g.q_nodes[i0], 0.0);
        assert!(g.p_nodes[j0].abs() < 1e-15);
        assert!((w.values[(i0, j0)] + 1.0 / (std::f64::consts::PI * hbar)).abs() < 1e-4);
        // closed form (1/πħ)(2(q²+p²)/ħ - 1) e^{-(q²+p²)/ħ}
        let exact = g.sample(|q, p| {
            let r = (q * q + p * p) / hbar;
            (2.0 * r - 1.0) * (-r).exp() / (std::f64::consts::PI * hbar)
        });
        assert!((&w.values - &exact).abs().max() < 1e-6);
    }

    #[test]
    fn identity_and_multiplication_symbols() {
        let g = grid(0.3);
        let id = PositionKernel::identity(g.nq(), g.dq);
        let w = wigner_observable(&id, &g).unwrap();
        assert!(w.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let q2 = PositionKernel::multiplication(&g, |q| q * q);
        let w = wigner_observable(&q2, &g).unwrap();
        let exact = g.sample(|q, _| q * q);
        assert!((&w.values - &exact).abs().max() < 1e-13);
    }

    #[test]
    fn momentum_symbol_is_p_in_the_interior() {
        let g = PhaseGrid::<f64>::new(4.0, 201, 1.0, 21, 0.1).unwrap();
        let w = wigner_observable(&PositionKernel::momentum(&g), &g).unwrap();
        assert!(w.imag_residual < 1e-10);
        for (i, &q) in g.q_nodes.iter().enumerate() {
            if q.abs() > 2.0 {
                continue;
            }
            for (j, &p) in g.p_nodes.iter().enumerate() {
                assert!(
                    (w.values[(i, j)] - p).abs() < 1e-2,
                    "q={q} p={p}: {}",
                    w.values[(i, j)]
                );
            }
        }
    }

    #[test]
    fn transform_is_linear() {
        let g = grid(0.5);
        let a = oscillator_state(&g, 0).unwrap();
        let b = oscillator_state(&g, 1).unwrap();
        let mix = a.lin_comb(0.3, &b, 0.7);
        let wa = wigner_state(&a, &g).unwrap().values;
        let wb = wigner_state(&b, &g).unwrap().values;
        let wm = wigner_state(&mix, &g).unwrap().values;
        assert!((wm - (wa * 0.3 + wb * 0.7)).abs().max() < 1e-14);
    }

    #[test]
    fn ground_state_moments() {
        let hbar = 0.4;
        let g = grid(hbar);
        let rho = oscillator_state(&g, 0).unwrap();
        let w = wigner_state(&rho, &g).unwrap();
        let q2 = classical_mean(&w, &g.sample(|q, _| q * q), &g).unwrap();
        assert!((q2 - hbar / 2.0).abs() < 1e-8);
        let h = classical_mean(&w, &g.sample(|q, p| 0.5 * (q * q + p * p)), &g).unwrap();
        let hq = quantum_pair(
            &rho,
            &PositionKernel::momentum(&g)
                .compose(&PositionKernel::momentum(&g))
                .lin_comb(0.5, &PositionKernel::multiplication(&g, |q| q * q), 0.5),
        )
        .unwrap();
        assert!((h - hbar / 2.0).abs() < 1e-8);
        assert!((hq - hbar / 2.0).abs() < 1e-8);
        let one = classical_mean(&w, &g.sample(|_, _| 1.0), &g).unwrap();
        assert!((one - 1.0).abs() < 1e-10);
    }

    #[test]
    fn q_derivative_matches_finite_difference() {
        let hbar = 0.5;
        let g = grid(hbar);
        let rho = oscillator_state(&g, 0).unwrap();
        let dq = wigner_state_dq(&rho, &g).unwrap();
        let dp = wigner_state_dp(&rho, &g).unwrap();
        let exact_q = g.sample(|q, p| {
            -2.0 * q / hbar * (-(q * q + p * p) / hbar).exp() / (std::f64::consts::PI * hbar)
        });
        let exact_p = g.sample(|q, p| {
            -2.0 * p / hbar * (-(q * q + p * p) / hbar).exp() / (std::f64::consts::PI * hbar)
        });
        assert!((&dq.values - &exact_q).abs().max() < 1e-6);
        assert!((&dp.values - &exact_p).abs().max() < 1e-6);
    }

    #[test]
    fn grid_mismatch_and_exports() {
        let g = grid(1.0);
        let other = PhaseGrid::new(3.0, 11, 1.0, 5, 1.0).unwrap();
        let rho = oscillator_state(&g, 0).unwrap();
        assert!(wigner_state(&rho, &other).is_err());
        let small = oscillator_state(&other, 0).unwrap();
        let w = wigner_state(&small, &other).unwrap();
        let csv = w.to_csv(&other);
        assert_eq!(csv.lines().count(), 1 + 11 * 5);
        let (bytes, header) = w.to_binary(&other);
        assert_eq!(bytes.len(), 11 * 5 * 8);
        assert_eq!(header["shape"], serde_json::json!([11, 5]));
        let first = f64::from_le_bytes(bytes[0..8].try_into().unwrap());
        assert_eq!(first, w.values[(0, 0)]);
    }

    #[test]
    fn grid_flags() {
        let g = PhaseGrid::new(5.0, 101, 1.0, 61, 0.1).unwrap();
        assert!(g.resolves_hbar());
        assert!(g.aliasing_free());
        let coarse = PhaseGrid::new(5.0, 11, 3.0, 7, 0.1).unwrap();
        assert!(!coarse.resolves_hbar());
        assert!(!coarse.aliasing_free());
        assert!(PhaseGrid::<f64>::new(5.0, 2, 3.0, 7, 0.1).is_err());
    }
}
