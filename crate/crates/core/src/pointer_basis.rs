//! Per-energy diagonalization of the asymptotic state, pointer observables
//! and the partial trace over non-isolating labels.

use std::cmp::Ordering;

use num_complex::Complex;
use num_traits::Float;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::kernel::{dagger, hermiticity_defect, max_abs, scaled_identity, trace, zeros};
use crate::algebra::{
    compose, pair_complex, Blocks, CMat, HasBlocks, Kernel, Observable, StateFunctional,
};
use crate::error::{invalid, LabError, Result};
use crate::linalg::{hermitian_eigen, EigenReal};
use crate::scalar::{cplx, Real};
use crate::spectral_model::CscoSpec;

const DEGENERACY_GAP: f64 = 1e-10;

/// Unitaries `U(ω)` whose columns diagonalize the diagonal blocks of a state.
#[derive(Clone, Debug)]
pub struct PointerBasis<T: Real> {
    pub u_bound: Option<CMat<T>>,
    pub u_nodes: Vec<CMat<T>>,
    pub eigenvalues_bound: Option<Vec<T>>,
    /// `ρ_r(ω_k)` in column order of `u_nodes[k]`.
    pub eigenvalues: Vec<Vec<T>>,
    /// `|⟨u_r(ω_{k-1}), u_r(ω_k)⟩|` averaged over columns; 1 at the first node.
    pub overlap_scores: Vec<T>,
    /// Nodes where two eigenvalues are closer than the degeneracy gap.
    pub degenerate_nodes: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointerNodeReport {
    pub omega: f64,
    pub eigenvalues: Vec<f64>,
    pub unitarity_residual: f64,
    pub overlap_score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointerReport {
    pub bound: Option<PointerNodeReport>,
    pub nodes: Vec<PointerNodeReport>,
    pub degenerate_nodes: Vec<usize>,
    pub max_unitarity_residual: f64,
    pub max_offdiagonal_residual: f64,
}

/// `max |U†U - I|`.
pub fn unitarity_residual<T: Real>(u: &CMat<T>) -> T {
    let n = u.nrows();
    max_abs(&(dagger(u) * u - scaled_identity(n, cplx(T::one()))))
}

/// Largest off-diagonal modulus of `U† A U`.
pub fn offdiagonal_residual<T: Real>(a: &CMat<T>, u: &CMat<T>) -> T {
    let d = dagger(u) * a * u;
    let mut worst = T::zero();
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            if i != j {
                worst = Float::max(worst, d[(i, j)].norm());
            }
        }
    }
    worst
}

impl<T: EigenReal> PointerBasis<T> {
    pub fn report(
        &self,
        nodes: &[T],
        bound_energy: Option<T>,
        rho: &StateFunctional<T>,
    ) -> PointerReport {
        let node_report = |omega: T, u: &CMat<T>, ev: &[T], score: T| PointerNodeReport {
            omega: omega.as_f64(),
            eigenvalues: ev.iter().map(|v| v.as_f64()).collect(),
            unitarity_residual: unitarity_residual(u).as_f64(),
            overlap_score: score.as_f64(),
        };
        let bound = match (&self.u_bound, &self.eigenvalues_bound, bound_energy) {
            (Some(u), Some(ev), Some(e0)) => Some(node_report(e0, u, ev, T::one())),
            _ => None,
        };
        let node_reports: Vec<PointerNodeReport> = (0..self.u_nodes.len())
            .map(|k| {
                node_report(
                    nodes[k],
                    &self.u_nodes[k],
                    &self.eigenvalues[k],
                    self.overlap_scores[k],
                )
            })
            .collect();
        let max_unitarity_residual = node_reports
            .iter()
            .chain(bound.iter())
            .fold(0.0f64, |m, r| m.max(r.unitarity_residual));
        let b = rho.blocks();
        let mut max_off = 0.0f64;
        for (a, u) in b.diag.iter().zip(&self.u_nodes) {
            max_off = max_off.max(offdiagonal_residual(a, u).as_f64());
        }
        if let (Some(a), Some(u)) = (&b.bound, &self.u_bound) {
            max_off = max_off.max(offdiagonal_residual(a, u).as_f64());
        }
        PointerReport {
            bound,
            nodes: node_reports,
            degenerate_nodes: self.degenerate_nodes.clone(),
            max_unitarity_residual,
            max_offdiagonal_residual: max_off,
        }
    }
}

fn is_diagonal<T: Real>(a: &CMat<T>) -> bool {
    (0..a.nrows())
        .all(|i| (0..a.ncols()).all(|j| i == j || a[(i, j)] == Complex::new(T::zero(), T::zero())))
}

/// Rotates each column so that its largest-modulus component is real positive.
fn fix_phases<T: Real>(u: &mut CMat<T>) {
    for c in 0..u.ncols() {
        let mut best = 0;
        let mut best_mod = T::zero();
        for r in 0..u.nrows() {
            let m = u[(r, c)].norm();
            // first index wins among near-equal moduli
            if m > best_mod * (T::one() + T::lit(1e-12)) {
                best = r;
                best_mod = m;
            }
        }
        if best_mod > T::zero() {
            let ph = u[(best, c)].conj() / best_mod;
            for r in 0..u.nrows() {
                u[(r, c)] = u[(r, c)] * ph;
            }
            u[(best, c)] = cplx(u[(best, c)].re);
        }
    }
}

fn lexicographic<T: Real>(u: &CMat<T>, a: usize, b: usize) -> Ordering {
    for r in 0..u.nrows() {
        let (x, y) = (u[(r, a)], u[(r, b)]);
        let ord =
            y.re.partial_cmp(&x.re)
                .unwrap_or(Ordering::Equal)
                .then(y.im.partial_cmp(&x.im).unwrap_or(Ordering::Equal));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

/// Eigenpairs of one block with phases fixed, columns in descending
/// eigenvalue order and ties broken lexicographically on the eigenvectors.
fn eigen_block<T: EigenReal>(a: &CMat<T>) -> (Vec<T>, CMat<T>, bool) {
    let m = a.nrows();
    let (values, mut vectors) = if is_diagonal(a) {
        (
            (0..m).map(|i| a[(i, i)].re).collect(),
            scaled_identity(m, cplx(T::one())),
        )
    } else {
        hermitian_eigen(a)
    };
    fix_phases(&mut vectors);
    let gap = T::lit(DEGENERACY_GAP);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        if Float::abs(values[i] - values[j]) < gap {
            lexicographic(&vectors, i, j)
        } else {
            values[j].partial_cmp(&values[i]).unwrap_or(Ordering::Equal)
        }
    });
    let sorted: Vec<T> = order.iter().map(|&i| values[i]).collect();
    let u = CMat::from_fn(m, m, |r, c| vectors[(r, order[c])]);
    let degenerate = sorted.windows(2).any(|w| Float::abs(w[0] - w[1]) < gap);
    (sorted, u, degenerate)
}

/// Greedy assignment of the columns of `next` to the columns of `prev` by
/// maximal overlap modulus. Returns the permutation and the mean overlap.
fn match_columns<T: Real>(prev: &CMat<T>, next: &CMat<T>) -> (Vec<usize>, T) {
    let m = prev.ncols();
    let overlaps = dagger(prev) * next;
    let mut assigned = vec![usize::MAX; m];
    let mut used = vec![false; m];
    let mut total = T::zero();
    for _ in 0..m {
        let mut best = (0, 0);
        let mut best_val = -T::one();
        for i in 0..m {
            if assigned[i] != usize::MAX {
                continue;
            }
            for j in 0..m {
                if used[j] {
                    continue;
                }
                let v = overlaps[(i, j)].norm();
                if v > best_val {
                    best_val = v;
                    best = (i, j);
                }
            }
        }
        assigned[best.0] = best.1;
        used[best.1] = true;
        total += best_val;
    }
    (assigned, total / T::from_usize_lossy(m))
}

/// Diagonalizes every diagonal block of `ρ`: `U(ω)† ρ(ω) U(ω)` is diagonal.
///
/// The first node is ordered by descending eigenvalue; later nodes follow
/// the previous node's columns by maximal eigenvector overlap.
pub fn diagonalize_sections<T: EigenReal>(rho: &StateFunctional<T>) -> Result<PointerBasis<T>> {
    let b = rho.blocks();
    for (k, block) in b.diag.iter().enumerate() {
        let scale = Float::max(T::one(), max_abs(block));
        if hermiticity_defect(block) > T::lit(1e-10) * scale {
            return Err(LabError::InvalidState(format!(
                "diagonal block at node {k} is not Hermitian"
            )));
        }
    }
    if let Some(bb) = &b.bound {
        if hermiticity_defect(bb) > T::lit(1e-10) * Float::max(T::one(), max_abs(bb)) {
            return Err(LabError::InvalidState(
                "bound block is not Hermitian".into(),
            ));
        }
    }

    let solved: Vec<(Vec<T>, CMat<T>, bool)> = b.diag.par_iter().map(eigen_block).collect();
    let mut eigenvalues = Vec::with_capacity(solved.len());
    let mut u_nodes: Vec<CMat<T>> = Vec::with_capacity(solved.len());
    let mut overlap_scores = Vec::with_capacity(solved.len());
    let mut degenerate_nodes = Vec::new();
    for (k, (values, u, degenerate)) in solved.into_iter().enumerate() {
        if degenerate {
            degenerate_nodes.push(k);
        }
        match u_nodes.last() {
            None => {
                eigenvalues.push(values);
                u_nodes.push(u);
                overlap_scores.push(T::one());
            }
            Some(prev) => {
                let (perm, score) = match_columns(prev, &u);
                let m = u.ncols();
                eigenvalues.push(perm.iter().map(|&j| values[j]).collect());
                u_nodes.push(CMat::from_fn(m, m, |r, c| u[(r, perm[c])]));
                overlap_scores.push(score);
            }
        }
    }
    let (eigenvalues_bound, u_bound) = match &b.bound {
        Some(bb) => {
            let (v, u, _) = eigen_block(bb);
            (Some(v), Some(u))
        }
        None => (None, None),
    };
    Ok(PointerBasis {
        u_bound,
        u_nodes,
        eigenvalues_bound,
        eigenvalues,
        overlap_scores,
        degenerate_nodes,
    })
}

/// Mixed-radix decomposition of the pointer label `r` into one label per momentum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointerLabels {
    pub dims: Vec<usize>,
}

impl PointerLabels {
    /// `N ≥ 2` momenta with `M = d^N` labels split into `N` digits of base `d`;
    /// otherwise a single label `0..M`.
    pub fn from_csco<T: Real>(csco: &CscoSpec<T>) -> Self {
        let m = csco.degeneracy;
        let n = csco.n_momenta;
        if n >= 2 {
            let d = (m as f64).powf(1.0 / n as f64).round() as usize;
            if d >= 1 && d.checked_pow(n as u32) == Some(m) {
                return Self { dims: vec![d; n] };
            }
        }
        Self { dims: vec![m] }
    }

    /// Digits `r_i` of the flat label `r`, most significant first.
    pub fn digits(&self, r: usize) -> Vec<usize> {
        let mut rest = r;
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = rest % d;
            rest /= d;
        }
        out
    }
}

/// Pointer observables `P_i = Σ_r r_i |ω, r⟩⟨ω, r|`, one per label digit.
pub fn pointer_observables<T: EigenReal>(
    basis: &PointerBasis<T>,
    grid: std::sync::Arc<crate::spectral_model::SpectrumGrid<T>>,
    csco: CscoSpec<T>,
) -> Result<Vec<Observable<T>>> {
    let labels = PointerLabels::from_csco(&csco);
    let m = csco.degeneracy;
    if basis.u_nodes.len() != grid.len() {
        return Err(invalid("pointer basis and grid have different node counts"));
    }
    let digits: Vec<Vec<usize>> = (0..m).map(|r| labels.digits(r)).collect();
    let build = |u: &CMat<T>, i: usize| {
        let mut d = zeros::<T>(m);
        for r in 0..m {
            d[(r, r)] = cplx(T::from_usize_lossy(digits[r][i]));
        }
        u * d * dagger(u)
    };
    (0..labels.dims.len())
        .map(|i| {
            let blocks = Blocks {
                bound: basis.u_bound.as_ref().map(|u| build(u, i)),
                diag: basis.u_nodes.iter().map(|u| build(u, i)).collect(),
                cross_lo: None,
                cross_ol: None,
                full: Kernel::Zero,
            };
            Observable::new(grid.clone(), csco, blocks)
        })
        .collect()
}

/// `max_O |(ρ*|[P, O])|` over the test set.
pub fn commutator_mean_residual<T: Real>(
    rho_star: &StateFunctional<T>,
    p: &Observable<T>,
    testset: &[Observable<T>],
) -> Result<T> {
    let mut worst = T::zero();
    for o in testset {
        let c = compose(p, o)?.lin_comb(T::one(), &compose(o, p)?, -T::one())?;
        worst = Float::max(worst, pair_complex(rho_star, &c)?.norm());
    }
    Ok(worst)
}

fn conjugate_blocks<T: Real>(b: &Blocks<T>, basis: &PointerBasis<T>) -> Blocks<T> {
    let k = b.diag.len();
    let m = b.diag.first().map_or(1, |d| d.nrows());
    let us = &basis.u_nodes;
    let ub = basis.u_bound.as_ref();
    Blocks {
        bound: b.bound.as_ref().zip(ub).map(|(x, u)| dagger(u) * x * u),
        diag: b
            .diag
            .iter()
            .zip(us)
            .map(|(x, u)| dagger(u) * x * u)
            .collect(),
        cross_lo: b
            .cross_lo
            .as_ref()
            .zip(ub)
            .map(|(v, w)| v.iter().zip(us).map(|(x, u)| dagger(u) * x * w).collect()),
        cross_ol: b
            .cross_ol
            .as_ref()
            .zip(ub)
            .map(|(v, w)| v.iter().zip(us).map(|(x, u)| dagger(w) * x * u).collect()),
        full: b
            .full
            .map_dense(k, m, |i, j, x| dagger(&us[i]) * x * &us[j]),
    }
}

/// State expressed in the pointer co-basis.
pub fn transform_state<T: Real>(
    rho: &StateFunctional<T>,
    basis: &PointerBasis<T>,
) -> Result<StateFunctional<T>> {
    rho.with_blocks(conjugate_blocks(rho.blocks(), basis))
}

/// Observable expressed in the pointer basis.
pub fn transform_observable<T: Real>(
    obs: &Observable<T>,
    basis: &PointerBasis<T>,
) -> Result<Observable<T>> {
    Observable::new(
        obs.grid().clone(),
        *obs.csco(),
        conjugate_blocks(obs.blocks(), basis),
    )
}

/// Split of the label space `m ↦ (r, μ)` with `m = r·traced + μ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelSplit {
    pub kept: usize,
    pub traced: usize,
}

impl LabelSplit {
    pub fn check<T: Real>(&self, csco: &CscoSpec<T>) -> Result<()> {
        if self.kept == 0 || self.traced == 0 || self.kept * self.traced != csco.degeneracy {
            return Err(invalid(format!(
                "degeneracy {} does not factor as {} x {}",
                csco.degeneracy, self.kept, self.traced
            )));
        }
        Ok(())
    }

    fn reduced_csco<T: Real>(&self, csco: &CscoSpec<T>) -> CscoSpec<T> {
        CscoSpec {
            bound_energy: csco.bound_energy,
            degeneracy: self.kept,
            n_momenta: csco.n_isolating - 1,
            n_isolating: csco.n_isolating,
        }
    }

    fn partial_trace<T: Real>(&self, x: &CMat<T>) -> CMat<T> {
        let t = self.traced;
        CMat::from_fn(self.kept, self.kept, |r, s| {
            (0..t).fold(Complex::new(T::zero(), T::zero()), |acc, mu| {
                acc + x[(r * t + mu, s * t + mu)]
            })
        })
    }

    fn embed<T: Real>(&self, x: &CMat<T>) -> CMat<T> {
        let t = self.traced;
        let m = self.kept * t;
        CMat::from_fn(m, m, |a, b| {
            if a % t == b % t {
                x[(a / t, b / t)]
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
    }
}

/// Partial trace of every block over the non-isolating labels `μ`.
pub fn trace_away_nonisolating<T: Real>(
    rho: &StateFunctional<T>,
    split: LabelSplit,
) -> Result<StateFunctional<T>> {
    split.check(rho.csco())?;
    let b = rho.blocks();
    let k = b.diag.len();
    let m = rho.csco().degeneracy;
    let reduce_vec = |v: &Option<Vec<CMat<T>>>| {
        v.as_ref()
            .map(|v| v.iter().map(|x| split.partial_trace(x)).collect())
    };
    let full = if b.full.is_zero() {
        Kernel::Zero
    } else {
        Kernel::Dense(
            b.full
                .to_dense(k, m)
                .iter()
                .map(|x| split.partial_trace(x))
                .collect(),
        )
    };
    let blocks = Blocks {
        bound: b.bound.as_ref().map(|x| split.partial_trace(x)),
        diag: b.diag.iter().map(|x| split.partial_trace(x)).collect(),
        cross_lo: reduce_vec(&b.cross_lo),
        cross_ol: reduce_vec(&b.cross_ol),
        full,
    };
    StateFunctional::new(rho.grid().clone(), split.reduced_csco(rho.csco()), blocks)
}

/// `O_{rr′} δ_{μμ′}` on the full label space from a reduced observable.
pub fn embed_restricted<T: Real>(
    obs: &Observable<T>,
    split: LabelSplit,
    full: CscoSpec<T>,
) -> Result<Observable<T>> {
    split.check(&full)?;
    if obs.csco().degeneracy != split.kept {
        return Err(invalid(
            "reduced observable does not match the kept label count",
        ));
    }
    let b = obs.blocks();
    let k = b.diag.len();
    let embed_vec = |v: &Option<Vec<CMat<T>>>| {
        v.as_ref()
            .map(|v| v.iter().map(|x| split.embed(x)).collect())
    };
    let blocks = Blocks {
        bound: b.bound.as_ref().map(|x| split.embed(x)),
        diag: b.diag.iter().map(|x| split.embed(x)).collect(),
        cross_lo: embed_vec(&b.cross_lo),
        cross_ol: embed_vec(&b.cross_ol),
        full: b.full.map_dense(k, split.kept, |_, _, x| split.embed(&x)),
    };
    Observable::new(obs.grid().clone(), full, blocks)
}

/// `Σ_r ρ_r(ω)` equals `Tr ρ(ω)` at every node; returns the largest deviation.
pub fn eigenvalue_sum_defect<T: Real>(rho: &StateFunctional<T>, basis: &PointerBasis<T>) -> T {
    rho.blocks()
        .diag
        .iter()
        .zip(&basis.eigenvalues)
        .fold(T::zero(), |m, (x, ev)| {
            Float::max(m, Float::abs(trace(x).re - ev.iter().copied().sum::<T>()))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random::{random_observable, random_state};
    use crate::algebra::{make_hamiltonian, make_identity, pair, validate};
    use crate::evolution::asymptotic_state;
    use crate::spectral_model::{Scheme, SpectrumGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<SpectrumGrid<f64>> {
        Arc::new(SpectrumGrid::build(Scheme::GaussLegendre, n, 8.0).unwrap())
    }

    fn state_with_diag(
        g: Arc<SpectrumGrid<f64>>,
        csco: CscoSpec<f64>,
        f: impl Fn(f64) -> CMat<f64>,
    ) -> StateFunctional<f64> {
        let diag: Vec<CMat<f64>> = g.nodes().iter().map(|&w| f(w)).collect();
        let z: f64 = diag
            .iter()
            .zip(g.weights())
            .map(|(d, &w)| w * trace(d).re)
            .sum();
        let blocks = Blocks {
            bound: csco.has_bound().then(|| zeros(csco.degeneracy)),
            diag: diag.iter().map(|d| d.map(|x| x / z)).collect(),
            cross_lo: None,
            cross_ol: None,
            full: Kernel::Zero,
        };
        StateFunctional::new(g, csco, blocks).unwrap()
    }

    #[test]
    fn diagonal_blocks_give_permutation_and_sorted_diagonal() {
        let g = grid(6);
        let csco = CscoSpec::continuum(3);
        let rho = state_with_diag(g, csco, |_| {
            CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
                cplx(0.2),
                cplx(0.5),
                cplx(0.3),
            ]))
        });
        let basis = diagonalize_sections(&rho).unwrap();
        let s = trace(&rho.blocks().diag[0]).re;
        for (u, ev) in basis.u_nodes.iter().zip(&basis.eigenvalues) {
            let scaled: Vec<f64> = ev.iter().map(|v| v / s).collect();
            for (a, b) in scaled.iter().zip([0.5, 0.3, 0.2]) {
                assert!((a - b).abs() < 1e-14);
            }
            assert!(u
                .iter()
                .all(|z| z.im == 0.0 && (z.re == 0.0 || z.re == 1.0)));
        }
    }

    #[test]
    fn constant_two_by_two_block() {
        let g = grid(5);
        let csco = CscoSpec::continuum(2);
        let block = CMat::from_row_slice(2, 2, &[cplx(0.6), cplx(0.2), cplx(0.2), cplx(0.4)]);
        let rho = state_with_diag(g.clone(), csco, |_| block.clone());
        let basis = diagonalize_sections(&rho).unwrap();
        let total: f64 = g.weights().iter().sum();
        // closed form for [[a, c], [c, b]]: (a+b)/2 ± sqrt(((a-b)/2)² + c²)
        let hi = 0.5 + 0.05f64.sqrt();
        let lo = 0.5 - 0.05f64.sqrt();
        for ev in &basis.eigenvalues {
            assert!((ev[0] * total - hi).abs() < 1e-12);
            assert!((ev[1] * total - lo).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_of_random_psd_blocks() {
        let g = grid(12);
        let csco = CscoSpec::continuum(4).with_bound(-1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_state(g.clone(), csco, &mut rng, 0.0);
        let basis = diagonalize_sections(&rho).unwrap();
        for ((block, u), ev) in rho
            .blocks()
            .diag
            .iter()
            .zip(&basis.u_nodes)
            .zip(&basis.eigenvalues)
        {
            let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                4,
                ev.iter().map(|&v| cplx(v)),
            ));
            let back = u * d * dagger(u);
            assert!(max_abs(&(back - block)) < 1e-10);
            assert!(unitarity_residual(u) < 1e-10);
            assert!(offdiagonal_residual(block, u) < 1e-10);
        }
        assert!(eigenvalue_sum_defect(&rho, &basis) < 1e-14);
        let report = basis.report(g.nodes(), csco.bound_energy, &rho);
        assert!(report.max_unitarity_residual < 1e-10);
        assert!(report.bound.is_some());
        serde_json::to_string(&report).unwrap();
    }

    #[test]
    fn continuity_follows_a_smooth_rotation() {
        // eigenvalues cross at ω = 4; overlap matching keeps the eigenvectors fixed
        let g = grid(40);
        let csco = CscoSpec::continuum(2);
        let rho = state_with_diag(g, csco, |w| {
            CMat::from_row_slice(
                2,
                2,
                &[cplx(1.0 + 0.1 * w), cplx(0.0), cplx(0.0), cplx(1.4)],
            )
        });
        let basis = diagonalize_sections(&rho).unwrap();
        for u in &basis.u_nodes {
            assert!(max_abs(&(u - &basis.u_nodes[0])) < 1e-12);
        }
        assert!(basis
            .overlap_scores
            .iter()
            .all(|&s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn non_hermitian_block_is_rejected() {
        let g = grid(4);
        let csco = CscoSpec::continuum(2);
        let mut rho = state_with_diag(g, csco, |_| CMat::identity(2, 2));
        rho.blocks_mut().diag[1][(0, 1)] = cplx(0.3);
        assert!(matches!(
            diagonalize_sections(&rho),
            Err(LabError::InvalidState(_))
        ));
    }

    #[test]
    fn single_label_gives_trivial_pointer() {
        let g = grid(6);
        let csco = CscoSpec::continuum(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_state(g.clone(), csco, &mut rng, 0.0);
        let basis = diagonalize_sections(&rho).unwrap();
        let ps = pointer_observables(&basis, g, csco).unwrap();
        assert_eq!(ps.len(), 1);
        assert!(ps[0].blocks().diag.iter().all(|d| d[(0, 0)] == cplx(0.0)));
    }

    #[test]
    fn two_label_pointer_round_trip() {
        let g = grid(10);
        let csco = CscoSpec::continuum(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_state(g.clone(), csco, &mut rng, 0.0);
        let basis = diagonalize_sections(&rho).unwrap();
        let p = pointer_observables(&basis, g.clone(), csco)
            .unwrap()
            .remove(0);
        for (block, u) in p.blocks().diag.iter().zip(&basis.u_nodes) {
            let d = dagger(u) * block * u;
            assert!((d[(0, 0)].re - 0.0).abs() < 1e-12 && (d[(1, 1)].re - 1.0).abs() < 1e-12);
            let (vals, _, _) = eigen_block(block);
            assert!((vals[0] - 1.0).abs() < 1e-12 && vals[1].abs() < 1e-12);
        }
        let h = make_hamiltonian(g, csco);
        let c = p.commutator(&h).unwrap();
        assert!(c.blocks().diag.iter().all(|d| max_abs(d) < 1e-12));
    }

    #[test]
    fn pointer_moments_match_eigenvalue_weights() {
        let g = grid(16);
        let csco = CscoSpec::new(Some(-1.0), 4, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = asymptotic_state(&random_state(g.clone(), csco, &mut rng, 0.5));
        let basis = diagonalize_sections(&rho).unwrap();
        let ps = pointer_observables(&basis, g.clone(), csco).unwrap();
        assert_eq!(ps.len(), 2);
        let labels = PointerLabels::from_csco(&csco);
        assert_eq!(labels.dims, vec![2, 2]);
        for (i, p) in ps.iter().enumerate() {
            let mut power = make_identity(g.clone(), csco);
            for n in 0..3u32 {
                let got = pair(&rho, &power).unwrap();
                let mut oracle = 0.0;
                for r in 0..4 {
                    let label = labels.digits(r)[i] as f64;
                    let bound = basis.eigenvalues_bound.as_ref().unwrap()[r];
                    let cont: f64 = basis
                        .eigenvalues
                        .iter()
                        .zip(g.weights())
                        .map(|(ev, &w)| w * ev[r])
                        .sum();
                    oracle += label.powi(n as i32) * (bound + cont);
                }
                assert!((got - oracle).abs() < 1e-12, "P{i}^{n}: {got} vs {oracle}");
                power = compose(&power, p).unwrap();
            }
            for q in &ps {
                let c = p.commutator(q).unwrap();
                assert!(c.blocks().diag.iter().all(|d| max_abs(d) < 1e-12));
            }
        }
    }

    #[test]
    fn commutator_means_vanish_on_asymptotic_state() {
        let g = grid(14);
        let csco = CscoSpec::continuum(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = asymptotic_state(&random_state(g.clone(), csco, &mut rng, 0.5));
        let basis = diagonalize_sections(&rho).unwrap();
        let p = pointer_observables(&basis, g.clone(), csco)
            .unwrap()
            .remove(0);
        let tests: Vec<_> = (0..20)
            .map(|_| random_observable(g.clone(), csco, &mut rng, 2))
            .collect();
        assert!(commutator_mean_residual(&rho, &p, &tests).unwrap() < 1e-8);
        let id = make_identity(g, csco);
        assert_eq!(
            commutator_mean_residual(&rho, &p, &[id, p.clone()]).unwrap(),
            0.0
        );

        // dense oracle: (ρ*|[P,O]) = Σ_k w_k Tr(ρ_k† (P_k O_k - O_k P_k))
        let o = &tests[0];
        let mut oracle = Complex::new(0.0, 0.0);
        for k in 0..rho.grid().len() {
            let pk = &p.blocks().diag[k];
            let ok = &o.blocks().diag[k];
            let c = pk * ok - ok * pk;
            oracle += crate::algebra::kernel::frobenius(&rho.blocks().diag[k], &c)
                * rho.grid().weights()[k];
        }
        assert!(oracle.norm() < 1e-12);
    }

    #[test]
    fn pairing_is_basis_invariant() {
        let g = grid(10);
        let csco = CscoSpec::continuum(3).with_bound(-0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random_state(g.clone(), csco, &mut rng, 0.6);
        let o = random_observable(g.clone(), csco, &mut rng, 2);
        let basis = diagonalize_sections(&rho).unwrap();
        let rho_p = transform_state(&rho, &basis).unwrap();
        let o_p = transform_observable(&o, &basis).unwrap();
        assert!((pair(&rho, &o).unwrap() - pair(&rho_p, &o_p).unwrap()).abs() < 1e-10);
        let star = transform_state(&asymptotic_state(&rho), &basis).unwrap();
        for d in star.blocks().diag.iter().chain(star.blocks().bound.iter()) {
            assert!(offdiagonal_residual(d, &scaled_identity(3, cplx(1.0))) < 1e-10);
        }
    }

    #[test]
    fn partial_trace_of_product_state() {
        let g = grid(8);
        let full = CscoSpec::new(None, 6, 2, 2).unwrap();
        let split = LabelSplit { kept: 2, traced: 3 };
        let sigma = CMat::from_row_slice(
            2,
            2,
            &[
                cplx(0.7),
                Complex::new(0.1, 0.2),
                Complex::new(0.1, -0.2),
                cplx(0.3),
            ],
        );
        let tau = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            cplx(0.5),
            cplx(0.25),
            cplx(0.25),
        ]));
        let prod = sigma.kronecker(&tau);
        let rho = state_with_diag(g.clone(), full, |w| prod.map(|z| z * (-w).exp()));
        let reduced = trace_away_nonisolating(&rho, split).unwrap();
        for (r, f) in reduced.blocks().diag.iter().zip(&rho.blocks().diag) {
            let s = trace(f).re;
            assert!(max_abs(&(r - sigma.map(|z| z * s))) < 1e-15);
        }
        assert!(validate(&reduced).normalization_deviation.unwrap() < 1e-14);
        assert_eq!(reduced.csco().degeneracy, 2);
        assert!(trace_away_nonisolating(&rho, LabelSplit { kept: 4, traced: 2 }).is_err());
    }

    #[test]
    fn trivial_split_is_identity() {
        let g = grid(6);
        let csco = CscoSpec::continuum(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random_state(g, csco, &mut rng, 0.0);
        let reduced = trace_away_nonisolating(&rho, LabelSplit { kept: 2, traced: 1 }).unwrap();
        assert_eq!(reduced.blocks().diag, rho.blocks().diag);
    }

    #[test]
    fn reduced_pairing_matches_embedded_observable() {
        let g = grid(10);
        let full = CscoSpec::new(Some(-0.4), 6, 2, 2).unwrap();
        let reduced_csco = CscoSpec::new(Some(-0.4), 2, 1, 2).unwrap();
        let split = LabelSplit { kept: 2, traced: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_state(g.clone(), full, &mut rng, 0.7);
        let reduced = trace_away_nonisolating(&rho, split).unwrap();
        for _ in 0..5 {
            let o = random_observable(g.clone(), reduced_csco, &mut rng, 2);
            let big = embed_restricted(&o, split, full).unwrap();
            let a = pair(&reduced, &o).unwrap();
            let b = pair(&rho, &big).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");

            // direct double sum over diagonal blocks
            let mut oracle = 0.0;
            for k in 0..g.len() {
                let (x, y) = (&rho.blocks().diag[k], &o.blocks().diag[k]);
                for r in 0..2 {
                    for s in 0..2 {
                        for mu in 0..3 {
                            oracle += (x[(r * 3 + mu, s * 3 + mu)].conj() * y[(r, s)]).re
                                * g.weights()[k];
                        }
                    }
                }
            }
            let mut mine = 0.0;
            for k in 0..g.len() {
                mine += crate::algebra::kernel::frobenius(
                    &reduced.blocks().diag[k],
                    &o.blocks().diag[k],
                )
                .re * g.weights()[k];
            }
            assert!((mine - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn labels_digits() {
        let l = PointerLabels { dims: vec![3, 2] };
        assert_eq!(l.digits(0), vec![0, 0]);
        assert_eq!(l.digits(5), vec![2, 1]);
        let c = CscoSpec::<f64>::new(None, 6, 2, 1).unwrap();
        assert_eq!(PointerLabels::from_csco(&c).dims, vec![6]);
    }
}
