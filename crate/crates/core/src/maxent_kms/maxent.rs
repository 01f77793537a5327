//! Maximum-entropy inference of the canonical and grand-canonical final state.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::algebra::kernel::{scaled_identity, zeros};
use crate::algebra::{Blocks, HasBlocks, Kernel, Observable, StateFunctional};
use crate::error::{invalid, LabError, Result};
use crate::pointer_basis::PointerLabels;
use crate::scalar::{cplx, Real};
use crate::spectral_model::{CscoSpec, SpectrumGrid};

const MOMENT_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;

/// Lagrange multipliers of the maximum-entropy state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThermalParams<T> {
    pub beta: T,
    /// Partition normalization in grid energy units, including the label sum.
    pub z: T,
    /// One multiplier per momentum label; empty for the canonical state.
    pub gammas: Vec<T>,
    /// `e^{-β ω_max}/β`, the neglected tail of the half-line.
    pub truncation_bound: T,
}

/// Moment targets for [`solve_thermal_params`].
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalTargets<T> {
    pub energy: T,
    /// Target means of the pointer labels `r_i`; empty for the canonical state.
    pub momentum_means: Vec<T>,
}

impl<T: Real> ThermalTargets<T> {
    pub fn energy(energy: T) -> Self {
        Self {
            energy,
            momentum_means: Vec::new(),
        }
    }
}

/// Solution of a one-dimensional exponential-family moment problem.
#[derive(Clone, Copy, Debug)]
pub struct MultiplierSolution {
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// `ln Σ_j v_j e^{-λ x_j}` evaluated with a max shift.
fn log_sum<F: Fn(usize) -> f64>(
    n: usize,
    v: &[f64],
    x: &[f64],
    lambda: f64,
    extra: F,
) -> (f64, f64, f64) {
    let shift = (0..n)
        .map(|j| -lambda * x[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for j in 0..n {
        let e = v[j] * (-lambda * x[j] - shift).exp() * extra(j);
        s0 += e;
        s1 += e * x[j];
        s2 += e * x[j] * x[j];
    }
    (shift + s0.ln(), s1 / s0, s2 / s0)
}

/// Finds `λ` with `Σ v x e^{-λx} / Σ v e^{-λx} = target` by safeguarded Newton
/// with bisection fallback. The mean is strictly decreasing in `λ`.
pub fn solve_multiplier(
    points: &[f64],
    weights: &[f64],
    target: f64,
) -> Result<MultiplierSolution> {
    let n = points.len();
    if n == 0 || weights.len() != n || weights.iter().any(|&w| !(w > 0.0)) {
        return Err(invalid(
            "moment problem needs matching points and positive weights",
        ));
    }
    let lo_x = points.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_x = points.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(target > lo_x && target < hi_x) {
        return Err(LabError::InfeasibleTarget(format!(
            "mean {target} is outside the open attainable range ({lo_x}, {hi_x})"
        )));
    }
    let scale = hi_x.abs().max(lo_x.abs()).max(1e-300);
    let mean_var = |lambda: f64| {
        let (_, m1, m2) = log_sum(n, weights, points, lambda, |_| 1.0);
        (m1, (m2 - m1 * m1).max(0.0))
    };

    // bracket: mean(lo) > target > mean(hi)
    let mut lo = -1.0 / scale;
    let mut hi = 1.0 / scale;
    let mut guard = 0;
    while mean_var(lo).0 <= target {
        lo *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(LabError::SolverFailure {
                iterations: guard,
                residual: f64::NAN,
            });
        }
    }
    while mean_var(hi).0 >= target {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(LabError::SolverFailure {
                iterations: guard,
                residual: f64::NAN,
            });
        }
    }

    let mut lambda = 0.0f64.clamp(lo, hi);
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let (m, var) = mean_var(lambda);
        let f = m - target;
        residual = f.abs() / scale;
        if residual < MOMENT_TOL {
            return Ok(MultiplierSolution {
                lambda,
                iterations: it,
                residual,
            });
        }
        if f > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        // dm/dλ = -var
        let newton = if var > 0.0 {
            lambda + f / var
        } else {
            f64::NAN
        };
        lambda = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * lambda.abs().max(1.0) {
            let (m, _) = mean_var(lambda);
            residual = (m - target).abs() / scale;
            if residual < MOMENT_TOL * 10.0 {
                return Ok(MultiplierSolution {
                    lambda,
                    iterations: it,
                    residual,
                });
            }
            break;
        }
    }
    Err(LabError::SolverFailure {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Energy support of the moment problem: the bound state (with weight 1)
/// followed by the continuum nodes.
fn energy_support<T: Real>(grid: &SpectrumGrid<T>, csco: &CscoSpec<T>) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(grid.len() + 1);
    let mut v = Vec::with_capacity(grid.len() + 1);
    if let Some(e0) = csco.bound_energy {
        x.push(e0.as_f64());
        v.push(1.0);
    }
    x.extend(grid.nodes().iter().map(|w| w.as_f64()));
    v.extend(grid.weights().iter().map(|w| w.as_f64()));
    (x, v)
}

/// `ln Σ_r e^{-γ·r}` over the label digits, or `ln M` without multipliers.
fn log_label_sum<T: Real>(csco: &CscoSpec<T>, gammas: &[T]) -> f64 {
    if gammas.is_empty() {
        return (csco.degeneracy as f64).ln();
    }
    let labels = PointerLabels::from_csco(csco);
    labels
        .dims
        .iter()
        .zip(gammas)
        .map(|(&d, g)| {
            let g = g.as_f64();
            let (ls, _, _) = log_sum(
                d,
                &vec![1.0; d],
                &(0..d).map(|r| r as f64).collect::<Vec<_>>(),
                g,
                |_| 1.0,
            );
            ls
        })
        .sum()
}

/// `ln Z(β) = ln[(e^{-βω₀} + Σ_k w_k e^{-βω_k}) Σ_r e^{-γ·r}]`.
pub fn log_partition<T: Real>(
    grid: &SpectrumGrid<T>,
    csco: &CscoSpec<T>,
    beta: T,
    gammas: &[T],
) -> T {
    let (x, v) = energy_support(grid, csco);
    let (ls, _, _) = log_sum(x.len(), &v, &x, beta.as_f64(), |_| 1.0);
    T::lit(ls + log_label_sum(csco, gammas))
}

/// Mean energy of the canonical density at inverse temperature `β`.
pub fn mean_energy<T: Real>(grid: &SpectrumGrid<T>, csco: &CscoSpec<T>, beta: T) -> T {
    let (x, v) = energy_support(grid, csco);
    T::lit(log_sum(x.len(), &v, &x, beta.as_f64(), |_| 1.0).1)
}

/// Solves the moment equations for `β` and, when momentum targets are
/// given, one `γ_i` per label digit.
///
/// `β` is returned over the whole real line: a target above the midpoint of a
/// truncated grid needs `β < 0`. Operations that need convergence on the
/// half-line reject `β ≤ 0` themselves.
pub fn solve_thermal_params<T: Real>(
    grid: &SpectrumGrid<T>,
    csco: &CscoSpec<T>,
    targets: &ThermalTargets<T>,
) -> Result<ThermalParams<T>> {
    let (x, v) = energy_support(grid, csco);
    let beta = T::lit(solve_multiplier(&x, &v, targets.energy.as_f64())?.lambda);
    let mut gammas = Vec::with_capacity(targets.momentum_means.len());
    if !targets.momentum_means.is_empty() {
        let labels = PointerLabels::from_csco(csco);
        if labels.dims.len() != targets.momentum_means.len() {
            return Err(invalid(format!(
                "{} momentum targets given for {} label digits",
                targets.momentum_means.len(),
                labels.dims.len()
            )));
        }
        for (&d, target) in labels.dims.iter().zip(&targets.momentum_means) {
            let r: Vec<f64> = (0..d).map(|i| i as f64).collect();
            gammas.push(T::lit(
                solve_multiplier(&r, &vec![1.0; d], target.as_f64())?.lambda,
            ));
        }
    }
    let z = log_partition(grid, csco, beta, &gammas).exp();
    Ok(ThermalParams {
        beta,
        z,
        gammas,
        truncation_bound: grid.truncation_bound(beta),
    })
}

/// `e^{-γ·r}` for every flat label `r`.
fn label_weights<T: Real>(csco: &CscoSpec<T>, gammas: &[T]) -> Vec<T> {
    let m = csco.degeneracy;
    if gammas.is_empty() {
        return vec![T::one(); m];
    }
    let labels = PointerLabels::from_csco(csco);
    (0..m)
        .map(|r| {
            let s: T = labels
                .digits(r)
                .iter()
                .zip(gammas)
                .map(|(&d, &g)| g * T::from_usize_lossy(d))
                .sum();
            (-s).exp()
        })
        .collect()
}

/// Diagonal state `ρ(ω)_{rr} = e^{-βω - γ·r}/Z`.
pub fn build_kms_state<T: Real>(
    grid: Arc<SpectrumGrid<T>>,
    csco: CscoSpec<T>,
    params: &ThermalParams<T>,
) -> Result<StateFunctional<T>> {
    let m = csco.degeneracy;
    if !params.gammas.is_empty()
        && params.gammas.len() != PointerLabels::from_csco(&csco).dims.len()
    {
        return Err(invalid(
            "number of label multipliers does not match the CSCO",
        ));
    }
    let lw = label_weights(&csco, &params.gammas);
    let lnz = log_partition(&grid, &csco, params.beta, &params.gammas);
    let block = |w: T| {
        let mut b = zeros::<T>(m);
        let e = (-params.beta * w - lnz).exp();
        for r in 0..m {
            b[(r, r)] = cplx(e * lw[r]);
        }
        b
    };
    let blocks = Blocks {
        bound: csco.bound_energy.map(block),
        diag: grid.nodes().iter().map(|&w| block(w)).collect(),
        cross_lo: None,
        cross_ol: None,
        full: Kernel::Zero,
    };
    StateFunctional::new(grid, csco, blocks)
}

/// `w_β[A] = (I|e^{-βH} A)/(I|e^{-βH})`, evaluated from the diagonal blocks.
pub fn thermal_functional<T: Real>(obs: &Observable<T>, params: &ThermalParams<T>) -> Result<T> {
    if !(params.beta > T::zero()) {
        return Err(invalid(format!(
            "thermal functional needs beta > 0, got {}",
            params.beta
        )));
    }
    let csco = obs.csco();
    let grid = obs.grid();
    let lw = label_weights(csco, &params.gammas);
    let weighted_trace =
        |a: &crate::algebra::CMat<T>| (0..a.nrows()).map(|r| a[(r, r)].re * lw[r]).sum::<T>();
    let label_sum: T = lw.iter().copied().sum();
    // energies shifted by the lowest one so every factor is at most 1
    let floor = csco.bound_energy.unwrap_or_else(|| grid.nodes()[0]);
    let b = obs.blocks();
    let mut num = T::zero();
    let mut den = T::zero();
    if let (Some(bb), Some(e0)) = (&b.bound, csco.bound_energy) {
        let e = (-params.beta * (e0 - floor)).exp();
        num += e * weighted_trace(bb);
        den += e * label_sum;
    }
    for ((a, &w), &wt) in b.diag.iter().zip(grid.nodes()).zip(grid.weights()) {
        let e = wt * (-params.beta * (w - floor)).exp();
        num += e * weighted_trace(a);
        den += e * label_sum;
    }
    Ok(num / den)
}

/// `-Σ_k w_k ρ_k ln ρ_k` with `0 ln 0 = 0`.
pub fn shannon_entropy<T: Real>(grid: &SpectrumGrid<T>, density: &[T]) -> Result<T> {
    grid.check_len(density.len())?;
    if let Some(bad) = density.iter().find(|&&p| p < T::zero()) {
        return Err(invalid(format!("density has a negative entry {bad}")));
    }
    Ok(-density
        .iter()
        .zip(grid.weights())
        .map(|(&p, &w)| {
            if p > T::zero() {
                w * p * p.ln()
            } else {
                T::zero()
            }
        })
        .sum::<T>())
}

/// Canonical density `e^{-βω}/Σ w e^{-βω}` sampled at the nodes.
pub fn canonical_density<T: Real>(grid: &SpectrumGrid<T>, beta: T) -> Vec<T> {
    let csco = CscoSpec::continuum(1);
    let lnz = log_partition(grid, &csco, beta, &[]);
    grid.nodes()
        .iter()
        .map(|&w| (-beta * w - lnz).exp())
        .collect()
}

/// Random nonnegative densities with the same normalization and mean energy
/// as `base`: `base·(1 + ε η)` with `η` a random smooth profile projected onto
/// the constraint null space.
pub fn constrained_competitors<T: Real, R: Rng + ?Sized>(
    grid: &SpectrumGrid<T>,
    base: &[T],
    count: usize,
    amplitude: f64,
    rng: &mut R,
) -> Vec<Vec<T>> {
    let x: Vec<f64> = grid.nodes().iter().map(|v| v.as_f64()).collect();
    let w: Vec<f64> = grid.weights().iter().map(|v| v.as_f64()).collect();
    let p: Vec<f64> = base.iter().map(|v| v.as_f64()).collect();
    let wmax = grid.omega_max().as_f64();
    let moment = |f: &dyn Fn(usize) -> f64| (0..x.len()).map(|k| w[k] * p[k] * f(k)).sum::<f64>();
    let (m0, m1, m2) = (
        moment(&|_| 1.0),
        moment(&|k| x[k]),
        moment(&|k| x[k] * x[k]),
    );
    let det = m0 * m2 - m1 * m1;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let modes = rng.random_range(1..6);
        let coeffs: Vec<(f64, f64, f64)> = (0..modes)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.2..6.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let eta: Vec<f64> = x
            .iter()
            .map(|&xi| {
                coeffs
                    .iter()
                    .map(|&(a, f, ph)| a * (f * xi / wmax * std::f64::consts::PI + ph).cos())
                    .sum()
            })
            .collect();
        let e0 = moment(&|k| eta[k]);
        let e1 = moment(&|k| eta[k] * x[k]);
        let a = (m2 * e0 - m1 * e1) / det;
        let b = (m0 * e1 - m1 * e0) / det;
        let proj: Vec<f64> = eta.iter().zip(&x).map(|(&e, &xi)| e - a - b * xi).collect();
        let peak = proj.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(peak > 0.0) {
            continue;
        }
        let eps = amplitude * rng.random_range(0.1..1.0) / peak;
        let cand: Vec<T> = p
            .iter()
            .zip(&proj)
            .map(|(&pk, &d)| T::lit(pk * (1.0 + eps * d)))
            .collect();
        // rejection step
        if cand.iter().all(|&v| v >= T::zero()) {
            out.push(cand);
        }
    }
    out
}

/// Identity-weighted label matrix used by callers that need `e^{-γ·r}` blocks.
pub fn label_weight_matrix<T: Real>(csco: &CscoSpec<T>, gammas: &[T]) -> crate::algebra::CMat<T> {
    let lw = label_weights(csco, gammas);
    let mut b = scaled_identity(csco.degeneracy, cplx(T::zero()));
    for (r, &v) in lw.iter().enumerate() {
        b[(r, r)] = cplx(v);
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random::random_observable;
    use crate::algebra::{make_hamiltonian, make_identity, pair, validate};
    use crate::spectral_model::Scheme;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, wmax: f64) -> Arc<SpectrumGrid<f64>> {
        Arc::new(SpectrumGrid::build(Scheme::GaussLegendre, n, wmax).unwrap())
    }

    /// Newton on `E(β) = 1/β - W/(e^{βW} - 1)` for the exact truncated exponential.
    fn analytic_beta(e: f64, wmax: f64) -> f64 {
        let mut b = 1.0 / e;
        for _ in 0..100 {
            let ex = (b * wmax).exp();
            let f = 1.0 / b - wmax / (ex - 1.0) - e;
            let df = -1.0 / (b * b) + wmax * wmax * ex / ((ex - 1.0) * (ex - 1.0));
            b -= f / df;
        }
        b
    }

    #[test]
    fn unit_energy_gives_unit_beta() {
        let g = grid(128, 40.0);
        let csco = CscoSpec::continuum(1);
        let p = solve_thermal_params(&g, &csco, &ThermalTargets::energy(1.0)).unwrap();
        let oracle = analytic_beta(1.0, 40.0);
        assert!((oracle - 1.0).abs() < 1e-12);
        assert!((p.beta - oracle).abs() < 1e-6);
        assert!((mean_energy(&g, &csco, p.beta) - 1.0).abs() < 1e-10);
        assert!(p.truncation_bound < 1e-17);
    }

    #[test]
    fn other_energies_match_truncated_oracle() {
        let g = grid(128, 10.0);
        let csco = CscoSpec::continuum(1);
        for e in [0.5, 2.0, 3.5] {
            let p = solve_thermal_params(&g, &csco, &ThermalTargets::energy(e)).unwrap();
            assert!((p.beta - analytic_beta(e, 10.0)).abs() < 1e-9, "E={e}");
        }
    }

    #[test]
    fn midpoint_energy_gives_zero_beta() {
        let g = grid(64, 12.0);
        let p = solve_thermal_params(&g, &CscoSpec::continuum(1), &ThermalTargets::energy(6.0))
            .unwrap();
        assert!(p.beta.abs() < 1e-6);
        let hot = solve_thermal_params(&g, &CscoSpec::continuum(1), &ThermalTargets::energy(8.0))
            .unwrap();
        assert!(hot.beta < 0.0);
    }

    #[test]
    fn unreachable_energies_are_infeasible() {
        let g = grid(32, 10.0);
        let csco = CscoSpec::continuum(1);
        for e in [10.0, 12.0, -1.0, 0.0] {
            let err = solve_thermal_params(&g, &csco, &ThermalTargets::energy(e)).unwrap_err();
            assert!(matches!(err, LabError::InfeasibleTarget(_)), "E={e}");
        }
    }

    #[test]
    fn log_partition_gradient_is_minus_energy() {
        let g = grid(96, 40.0);
        let csco = CscoSpec::continuum(2).with_bound(-0.3).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let h = 1e-5;
            let fd = (log_partition(&g, &csco, beta + h, &[])
                - log_partition(&g, &csco, beta - h, &[]))
                / (2.0 * h);
            let e = mean_energy(&g, &csco, beta);
            assert!((fd + e).abs() / e.abs() < 1e-6, "beta={beta}");
        }
    }

    #[test]
    fn entropy_closed_forms() {
        let e = std::f64::consts::E;
        let g = Arc::new(SpectrumGrid::build(Scheme::UniformTrapezoid, 101, e).unwrap());
        let uniform = vec![1.0 / e; g.len()];
        assert!((shannon_entropy(&g, &uniform).unwrap() - 1.0).abs() < 1e-12);

        let g = grid(128, 60.0);
        let dens = canonical_density(&g, 1.0);
        assert!((shannon_entropy(&g, &dens).unwrap() - 1.0).abs() < 1e-10);
        let dens = canonical_density(&g, 2.0);
        assert!((shannon_entropy(&g, &dens).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-10);

        let mut bad = dens.clone();
        bad[3] = -1e-3;
        assert!(shannon_entropy(&g, &bad).is_err());
    }

    #[test]
    fn canonical_density_beats_constrained_competitors() {
        let g = grid(128, 40.0);
        let base = canonical_density(&g, 1.0);
        let h0 = shannon_entropy(&g, &base).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let comps = constrained_competitors(&g, &base, 200, 0.5, &mut rng);
        let norm0: f64 = g.integrate(&base).unwrap();
        let e0: f64 = base
            .iter()
            .zip(g.nodes())
            .zip(g.weights())
            .map(|((p, x), w)| p * x * w)
            .sum();
        for c in &comps {
            let n: f64 = g.integrate(c).unwrap();
            let e: f64 = c
                .iter()
                .zip(g.nodes())
                .zip(g.weights())
                .map(|((p, x), w)| p * x * w)
                .sum();
            assert!((n - norm0).abs() < 1e-12 && (e - e0).abs() < 1e-12);
            assert!(shannon_entropy(&g, c).unwrap() < h0);
        }
    }

    #[test]
    fn kms_state_is_valid_and_reproduces_energy() {
        let g = grid(128, 40.0);
        let csco = CscoSpec::continuum(3);
        let params = solve_thermal_params(&g, &csco, &ThermalTargets::energy(1.0)).unwrap();
        let rho = build_kms_state(g.clone(), csco, &params).unwrap();
        let rep = validate(&rho);
        assert!(rep.passes(1e-12), "{rep:?}");
        assert!((pair(&rho, &make_hamiltonian(g.clone(), csco)).unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(
            thermal_functional(&make_identity(g, csco), &params).unwrap(),
            1.0
        );
    }

    #[test]
    fn thermal_functional_matches_state_pairing() {
        let g = grid(64, 30.0);
        let csco = CscoSpec::new(Some(-0.5), 4, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let targets = ThermalTargets {
            energy: 1.5,
            momentum_means: vec![0.3, 0.6],
        };
        let params = solve_thermal_params(&g, &csco, &targets).unwrap();
        assert_eq!(params.gammas.len(), 2);
        let rho = build_kms_state(g.clone(), csco, &params).unwrap();
        assert!(validate(&rho).normalization_deviation.unwrap() < 1e-12);
        let id = make_identity(g.clone(), csco);
        assert!((thermal_functional(&id, &params).unwrap() - 1.0).abs() < 1e-14);
        for _ in 0..5 {
            let a = random_observable(g.clone(), csco, &mut rng, 2);
            let direct = thermal_functional(&a, &params).unwrap();
            let via_state = pair(&rho, &a).unwrap();
            assert!((direct - via_state).abs() < 1e-12);
        }
        // label means reproduce the momentum targets
        let basis_labels = PointerLabels::from_csco(&csco);
        for (i, target) in targets.momentum_means.iter().enumerate() {
            let mut diag = Blocks::zero(g.len(), 4, true);
            for blk in diag.diag.iter_mut().chain(diag.bound.iter_mut()) {
                for r in 0..4 {
                    blk[(r, r)] = cplx(basis_labels.digits(r)[i] as f64);
                }
            }
            let p = Observable::new(g.clone(), csco, diag).unwrap();
            assert!((pair(&rho, &p).unwrap() - target).abs() < 1e-10);
        }
    }

    #[test]
    fn large_gamma_suppresses_excited_labels() {
        let g = grid(64, 30.0);
        let csco = CscoSpec::continuum(2);
        let mut params = solve_thermal_params(&g, &csco, &ThermalTargets::energy(1.0)).unwrap();
        params.gammas = vec![50.0];
        let rho = build_kms_state(g.clone(), csco, &params).unwrap();
        for b in &rho.blocks().diag {
            assert!(b[(1, 1)].re <= (-50.0f64).exp() * b[(0, 0)].re * (1.0 + 1e-12));
        }
        assert!(validate(&rho).normalization_deviation.unwrap() < 1e-12);
    }

    #[test]
    fn nonpositive_beta_is_rejected() {
        let g = grid(16, 10.0);
        let csco = CscoSpec::continuum(1);
        let params = ThermalParams {
            beta: 0.0,
            z: 10.0,
            gammas: vec![],
            truncation_bound: f64::INFINITY,
        };
        assert!(thermal_functional(&make_identity(g, csco), &params).is_err());
    }

    #[test]
    fn solver_reports_iterations() {
        let sol = solve_multiplier(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0], 0.7).unwrap();
        assert!(sol.residual < 1e-12 && sol.iterations <= MAX_ITERATIONS);
        let z: f64 = (0..3).map(|j| (-sol.lambda * j as f64).exp()).sum();
        let m: f64 = (0..3)
            .map(|j| j as f64 * (-sol.lambda * j as f64).exp())
            .sum::<f64>()
            / z;
        assert!((m - 0.7).abs() < 1e-12);
    }
}
