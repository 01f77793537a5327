//! Discretization of the continuous energy half-line.
//!
//! Every integral `∫ dω f(ω)` over the continuum is evaluated as a weighted
//! sum over the nodes of a [`SpectrumGrid`]. The half-line is truncated at
//! `omega_max`; thermal computations report the tail bound
//! `e^{-β ω_max} / β` through [`SpectrumGrid::truncation_bound`].

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Quadrature rule used to place the continuum nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Composite trapezoid on `[0, ω_max]`; the node at `0` stands for `0⁺`.
    UniformTrapezoid,
    /// Gauss–Legendre mapped affinely onto `(0, ω_max)`.
    GaussLegendre,
    /// Gauss–Laguerre rule rescaled so the largest node sits at `ω_max`.
    /// The weights absorb the `e^{x}` factor, so the rule integrates `f`
    /// directly and is exact for `e^{-ω/s}·poly(ω)`.
    GaussLaguerreMapped,
}

impl Scheme {
    pub fn is_finite_interval(self) -> bool {
        !matches!(self, Scheme::GaussLaguerreMapped)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::UniformTrapezoid => "uniform-trapezoid",
            Scheme::GaussLegendre => "gauss-legendre",
            Scheme::GaussLaguerreMapped => "gauss-laguerre-mapped",
        })
    }
}

impl FromStr for Scheme {
    type Err = crate::error::LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform-trapezoid" => Ok(Scheme::UniformTrapezoid),
            "gauss-legendre" => Ok(Scheme::GaussLegendre),
            "gauss-laguerre-mapped" => Ok(Scheme::GaussLaguerreMapped),
            other => Err(invalid(format!("unknown quadrature scheme `{other}`"))),
        }
    }
}

/// Quadrature discretization of the continuum `0 ≤ ω ≤ ω_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumGrid<T> {
    omega_max: T,
    nodes: Vec<T>,
    weights: Vec<T>,
    scheme: Scheme,
}

impl<T: Real> SpectrumGrid<T> {
    pub fn build(scheme: Scheme, node_count: usize, omega_max: T) -> Result<Self> {
        if node_count < 2 {
            return Err(invalid(format!(
                "node_count must be >= 2, got {node_count}"
            )));
        }
        if !(omega_max > T::zero()) || !omega_max.is_finite() {
            return Err(invalid(format!(
                "omega_max must be positive and finite, got {omega_max}"
            )));
        }
        let wmax = omega_max.as_f64();
        let (x, w): (Vec<f64>, Vec<f64>) = match scheme {
            Scheme::UniformTrapezoid => {
                let h = wmax / (node_count - 1) as f64;
                let nodes = (0..node_count)
                    .map(|k| {
                        if k == node_count - 1 {
                            wmax
                        } else {
                            k as f64 * h
                        }
                    })
                    .collect();
                let weights = (0..node_count)
                    .map(|k| {
                        if k == 0 || k == node_count - 1 {
                            0.5 * h
                        } else {
                            h
                        }
                    })
                    .collect();
                (nodes, weights)
            }
            Scheme::GaussLegendre => {
                let (x, w) = gauss_legendre(node_count);
                let half = 0.5 * wmax;
                (
                    x.iter().map(|&t| half * (t + 1.0)).collect(),
                    w.iter().map(|&v| half * v).collect(),
                )
            }
            Scheme::GaussLaguerreMapped => {
                let (x, w_scaled) = gauss_laguerre_scaled(node_count);
                let s = wmax / x[node_count - 1];
                (
                    x.iter()
                        .map(|&t| if t == x[node_count - 1] { wmax } else { s * t })
                        .collect(),
                    w_scaled.iter().map(|&v| s * v).collect(),
                )
            }
        };
        Ok(Self {
            omega_max,
            nodes: x.into_iter().map(T::lit).collect(),
            weights: w.into_iter().map(T::lit).collect(),
            scheme,
        })
    }

    /// Assembles a grid from explicit nodes and weights (validated).
    pub fn from_parts(
        scheme: Scheme,
        omega_max: T,
        nodes: Vec<T>,
        weights: Vec<T>,
    ) -> Result<Self> {
        let grid = Self {
            omega_max,
            nodes,
            weights,
            scheme,
        };
        let report = grid.check_invariants();
        if !report.is_empty() {
            return Err(invalid(report.join("; ")));
        }
        Ok(grid)
    }

    pub fn omega_max(&self) -> T {
        self.omega_max
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ_k w_k f(ω_k)`.
    pub fn integrate(&self, f: &[T]) -> Result<T> {
        self.check_len(f.len())?;
        Ok(self.weights.iter().zip(f).map(|(&w, &v)| w * v).sum())
    }

    pub fn integrate_complex(&self, f: &[Complex<T>]) -> Result<Complex<T>> {
        self.check_len(f.len())?;
        Ok(self
            .weights
            .iter()
            .zip(f)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (&w, &v)| {
                acc + v * w
            }))
    }

    /// Integrates a function evaluated at every node.
    pub fn integrate_fn<F: Fn(T) -> T>(&self, f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn sample<F: Fn(T) -> T>(&self, f: F) -> Vec<T> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Smallest gap between consecutive nodes.
    pub fn min_spacing(&self) -> T {
        self.nodes
            .windows(2)
            .map(|p| p[1] - p[0])
            .fold(T::infinity(), T::min)
    }

    /// Recurrence time `2π / min Δω` of the discrete phase sums.
    pub fn revival_horizon(&self) -> T {
        T::TAU() / self.min_spacing()
    }

    /// Upper bound `e^{-β ω_max}/β` of the discarded tail `∫_{ω_max}^∞ e^{-βω} dω`.
    pub fn truncation_bound(&self, beta: T) -> T {
        (-beta * self.omega_max).exp() / beta
    }

    /// Human-readable list of violated grid invariants (empty when valid).
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.nodes.len() != self.weights.len() {
            out.push("nodes and weights differ in length".to_string());
        }
        if self.nodes.windows(2).any(|p| !(p[1] > p[0])) {
            out.push("nodes not strictly increasing".to_string());
        }
        if self
            .nodes
            .iter()
            .any(|&x| x < T::zero() || x > self.omega_max)
        {
            out.push("node outside [0, omega_max]".to_string());
        }
        if self.nodes.first().is_some_and(|&x| x == T::zero())
            && self.scheme != Scheme::UniformTrapezoid
        {
            out.push("only the trapezoid scheme may place a node at 0".to_string());
        }
        if self.weights.iter().any(|&w| !(w > T::zero())) {
            out.push("non-positive quadrature weight".to_string());
        }
        if self.scheme.is_finite_interval() {
            let total: T = self.weights.iter().copied().sum();
            let rel = ((total - self.omega_max) / self.omega_max).abs();
            if rel > T::lit(1e-10).max(T::epsilon() * T::lit(64.0)) {
                out.push(format!("weight sum {total} differs from omega_max"));
            }
        }
        out
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if n != self.nodes.len() {
            return Err(invalid(format!(
                "expected {} samples (one per node), got {n}",
                self.nodes.len()
            )));
        }
        Ok(())
    }
}

/// Free-function form of [`SpectrumGrid::build`].
pub fn build_grid<T: Real>(
    scheme: Scheme,
    node_count: usize,
    omega_max: T,
) -> Result<SpectrumGrid<T>> {
    SpectrumGrid::build(scheme, node_count, omega_max)
}

/// Free-function form of [`SpectrumGrid::integrate`].
pub fn integrate<T: Real>(grid: &SpectrumGrid<T>, f: &[T]) -> Result<T> {
    grid.integrate(f)
}

/// Complete set of commuting observables: bound state, degeneracy labels,
/// number of momentum observables and how many constants are isolating.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CscoSpec<T> {
    pub bound_energy: Option<T>,
    pub degeneracy: usize,
    pub n_momenta: usize,
    pub n_isolating: usize,
}

impl<T: Real> CscoSpec<T> {
    pub fn new(
        bound_energy: Option<T>,
        degeneracy: usize,
        n_momenta: usize,
        n_isolating: usize,
    ) -> Result<Self> {
        if let Some(e0) = bound_energy {
            if !(e0 < T::zero()) {
                return Err(invalid(format!(
                    "bound energy must be strictly negative, got {e0}"
                )));
            }
        }
        if degeneracy < 1 {
            return Err(invalid("degeneracy must be >= 1"));
        }
        if n_isolating < 1 || n_isolating > n_momenta + 1 {
            return Err(invalid(format!(
                "n_isolating = A+1 must lie in [1, N+1] = [1, {}], got {n_isolating}",
                n_momenta + 1
            )));
        }
        Ok(Self {
            bound_energy,
            degeneracy,
            n_momenta,
            n_isolating,
        })
    }

    /// Continuum only, `M` labels, a single momentum observable when `M > 1`.
    pub fn continuum(degeneracy: usize) -> Self {
        let n_momenta = usize::from(degeneracy > 1);
        Self {
            bound_energy: None,
            degeneracy,
            n_momenta,
            n_isolating: n_momenta + 1,
        }
    }

    pub fn with_bound(mut self, energy: T) -> Result<Self> {
        if !(energy < T::zero()) {
            return Err(invalid(format!(
                "bound energy must be strictly negative, got {energy}"
            )));
        }
        self.bound_energy = Some(energy);
        Ok(self)
    }

    pub fn has_bound(&self) -> bool {
        self.bound_energy.is_some()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p0) / (z * z - 1.0))
}

/// Gauss–Laguerre nodes with weights already multiplied by `e^{x}`, so that
/// `Σ w_k f(x_k) ≈ ∫_0^∞ f(x) dx`.
pub fn gauss_laguerre_scaled(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + ((1.0 + 2.55 * ai) / (1.9 * ai)) * (z - x[i - 2])
            }
        };
        let mut pp = 0.0;
        let mut p2 = 0.0;
        for _ in 0..200 {
            let mut p1 = 1.0;
            p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = (nf * p1 - nf * p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        // w_i e^{x_i} = -e^{x_i} / (n L'_n(x_i) L_{n-1}(x_i))
        w[i] = (z - (-pp * nf * p2).ln()).exp();
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_three_nodes() {
        let g = SpectrumGrid::<f64>::build(Scheme::UniformTrapezoid, 3, 2.0).unwrap();
        assert_eq!(g.nodes(), &[0.0, 1.0, 2.0]);
        assert_eq!(g.weights(), &[0.5, 1.0, 0.5]);
        assert!(g.check_invariants().is_empty());
    }

    #[test]
    fn legendre_weight_sum_and_interior() {
        let g = SpectrumGrid::<f64>::build(Scheme::GaussLegendre, 64, 30.0).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - 30.0).abs() / 30.0 < 1e-10);
        assert!(g.nodes().iter().all(|&x| x > 0.0 && x < 30.0));
        assert!(g.check_invariants().is_empty());
    }

    #[test]
    fn legendre_exponential_against_antiderivative() {
        let g = SpectrumGrid::<f64>::build(Scheme::GaussLegendre, 64, 30.0).unwrap();
        let f = g.sample(|w| (-w).exp());
        let exact = 1.0 - (-30.0f64).exp();
        assert!((g.integrate(&f).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn legendre_polynomial_exactness() {
        let (x, w) = gauss_legendre(7);
        // exact through degree 13
        let i12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((i12 - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn laguerre_integrates_decaying_functions() {
        let (x, w) = gauss_laguerre_scaled(40);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x * (-x).exp()).sum();
        assert!((i - 1.0).abs() < 1e-12, "{i}");
        let g = SpectrumGrid::<f64>::build(Scheme::GaussLaguerreMapped, 48, 60.0).unwrap();
        assert!(g.check_invariants().is_empty());
        assert_eq!(*g.nodes().last().unwrap(), 60.0);
        let v = g.integrate_fn(|w| (-w).exp());
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn zero_and_linear_integrands() {
        let g = SpectrumGrid::<f64>::build(Scheme::UniformTrapezoid, 201, 2.0).unwrap();
        assert_eq!(g.integrate(&vec![0.0; 201]).unwrap(), 0.0);
        let lin = g.sample(|w| w);
        assert!((g.integrate(&lin).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(SpectrumGrid::<f64>::build(Scheme::GaussLegendre, 1, 2.0).is_err());
        assert!(SpectrumGrid::<f64>::build(Scheme::GaussLegendre, 8, 0.0).is_err());
        assert!(SpectrumGrid::<f64>::build(Scheme::GaussLegendre, 8, -1.0).is_err());
        let g = SpectrumGrid::<f64>::build(Scheme::GaussLegendre, 8, 2.0).unwrap();
        assert!(g.integrate(&[1.0; 7]).is_err());
    }

    #[test]
    fn refinement_converges() {
        let f = |w: f64| (w * 0.7).sin() * (-0.3 * w).exp();
        let mut prev_gap = f64::INFINITY;
        for n in [8usize, 16, 32] {
            let a = SpectrumGrid::<f64>::build(Scheme::UniformTrapezoid, n, 10.0).unwrap();
            let b = SpectrumGrid::<f64>::build(Scheme::UniformTrapezoid, 2 * n, 10.0).unwrap();
            let gap = (a.integrate_fn(f) - b.integrate_fn(f)).abs();
            assert!(gap < prev_gap / 3.0, "{gap} vs {prev_gap}");
            prev_gap = gap;
        }
    }

    #[test]
    fn csco_validation() {
        assert!(CscoSpec::<f64>::new(Some(0.5), 1, 0, 1).is_err());
        assert!(CscoSpec::<f64>::new(Some(-0.5), 0, 0, 1).is_err());
        assert!(CscoSpec::<f64>::new(None, 2, 1, 3).is_err());
        assert!(CscoSpec::<f64>::new(Some(-1.0), 4, 2, 2).is_ok());
    }

    #[test]
    fn f32_grid_builds() {
        let g = SpectrumGrid::<f32>::build(Scheme::GaussLegendre, 16, 5.0).unwrap();
        let v = g.integrate_fn(|w| w);
        assert!((v - 12.5).abs() < 1e-4);
    }
}
