//! Observables, state functionals and the pairing `(ρ|O)`.
//!
//! Both objects share the five-block layout over the basis
//! `|ω₀,mm′)`, `|ω,mm′)`, `|ωω₀,mm′)`, `|ω₀ω′,mm′)`, `|ωω′,mm′)`.
//! State coefficients are stored as density-matrix elements
//! `ρ(ω,ω′)_{mm′} = ⟨ω,m|ρ|ω′,m′⟩`, so the pairing is
//! `(ρ|O) = Σ conj(ρ)_{mm′} O_{mm′}` summed and integrated block by block.

mod io;
pub mod kernel;
pub mod random;

use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

pub use io::{diagonal_profile_csv, from_json, to_json, Decoded};
pub use kernel::{CMat, Kernel, SeparableTerm};

use crate::error::{invalid, Result};
use crate::scalar::{cplx, phase, Real};
use crate::spectral_model::{CscoSpec, SpectrumGrid};
use kernel::{dagger, frobenius, hermiticity_defect, scale, trace, zeros};

/// Coefficient blocks of an observable or a state functional.
#[derive(Clone, Debug, PartialEq)]
pub struct Blocks<T: Real> {
    /// `X(ω₀)_{mm′}`, present iff the CSCO has a bound state.
    pub bound: Option<CMat<T>>,
    /// `X(ω_k)_{mm′}` per continuum node.
    pub diag: Vec<CMat<T>>,
    /// `X(ω_k, ω₀)_{mm′}`.
    pub cross_lo: Option<Vec<CMat<T>>>,
    /// `X(ω₀, ω_l)_{mm′}`.
    pub cross_ol: Option<Vec<CMat<T>>>,
    /// `X(ω_k, ω_l)_{mm′}`.
    pub full: Kernel<T>,
}

impl<T: Real> Blocks<T> {
    pub fn zero(nodes: usize, m: usize, bound: bool) -> Self {
        Self {
            bound: bound.then(|| zeros(m)),
            diag: vec![zeros(m); nodes],
            cross_lo: None,
            cross_ol: None,
            full: Kernel::Zero,
        }
    }

    pub fn has_cross(&self) -> bool {
        self.cross_lo.is_some() || self.cross_ol.is_some()
    }

    pub fn has_off_diagonal(&self) -> bool {
        self.has_cross() || !self.full.is_zero()
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: Complex<T>, other: &Self, b: Complex<T>) -> Self {
        let nodes = self.diag.len();
        let m = self.diag.first().map_or(1, |d| d.nrows());
        let comb_vec = |x: &Option<Vec<CMat<T>>>, y: &Option<Vec<CMat<T>>>| match (x, y) {
            (None, None) => None,
            (Some(x), None) => Some(x.iter().map(|v| scale(v, a)).collect()),
            (None, Some(y)) => Some(y.iter().map(|v| scale(v, b)).collect()),
            (Some(x), Some(y)) => Some(
                x.iter()
                    .zip(y)
                    .map(|(u, v)| scale(u, a) + scale(v, b))
                    .collect(),
            ),
        };
        Self {
            bound: match (&self.bound, &other.bound) {
                (Some(x), Some(y)) => Some(scale(x, a) + scale(y, b)),
                (Some(x), None) => Some(scale(x, a)),
                (None, Some(y)) => Some(scale(y, b)),
                (None, None) => None,
            },
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(u, v)| scale(u, a) + scale(v, b))
                .collect(),
            cross_lo: comb_vec(&self.cross_lo, &other.cross_lo),
            cross_ol: comb_vec(&self.cross_ol, &other.cross_ol),
            full: self.full.scale(a).add(&other.full.scale(b), nodes, m),
        }
    }

    /// Blocks of the adjoint operator.
    pub fn adjoint(&self) -> Self {
        let nodes = self.diag.len();
        Self {
            bound: self.bound.as_ref().map(dagger),
            diag: self.diag.iter().map(dagger).collect(),
            cross_lo: self
                .cross_ol
                .as_ref()
                .map(|v| v.iter().map(dagger).collect()),
            cross_ol: self
                .cross_lo
                .as_ref()
                .map(|v| v.iter().map(dagger).collect()),
            full: self.full.adjoint(nodes),
        }
    }
}

/// Access shared by observables and state functionals.
pub trait HasBlocks<T: Real> {
    fn grid(&self) -> &Arc<SpectrumGrid<T>>;
    fn csco(&self) -> &CscoSpec<T>;
    fn blocks(&self) -> &Blocks<T>;
    /// Whether the object is a state (normalization applies).
    fn is_state(&self) -> bool;
}

macro_rules! block_holder {
    ($name:ident, $is_state:expr) => {
        #[derive(Clone, Debug)]
        pub struct $name<T: Real> {
            grid: Arc<SpectrumGrid<T>>,
            csco: CscoSpec<T>,
            blocks: Blocks<T>,
        }

        impl<T: Real> $name<T> {
            /// Wraps blocks after checking their shapes against the grid and CSCO.
            pub fn new(
                grid: Arc<SpectrumGrid<T>>,
                csco: CscoSpec<T>,
                blocks: Blocks<T>,
            ) -> Result<Self> {
                check_shapes(&grid, &csco, &blocks)?;
                Ok(Self { grid, csco, blocks })
            }

            pub fn blocks_mut(&mut self) -> &mut Blocks<T> {
                &mut self.blocks
            }

            pub fn into_blocks(self) -> Blocks<T> {
                self.blocks
            }

            pub fn degeneracy(&self) -> usize {
                self.csco.degeneracy
            }
        }

        impl<T: Real> HasBlocks<T> for $name<T> {
            fn grid(&self) -> &Arc<SpectrumGrid<T>> {
                &self.grid
            }
            fn csco(&self) -> &CscoSpec<T> {
                &self.csco
            }
            fn blocks(&self) -> &Blocks<T> {
                &self.blocks
            }
            fn is_state(&self) -> bool {
                $is_state
            }
        }
    };
}

block_holder!(Observable, false);
block_holder!(StateFunctional, true);

impl<T: Real> Observable<T> {
    pub fn zero(grid: Arc<SpectrumGrid<T>>, csco: CscoSpec<T>) -> Self {
        let blocks = Blocks::zero(grid.len(), csco.degeneracy, csco.has_bound());
        Self { grid, csco, blocks }
    }

    /// Observable that is `f(ω)·Id` on the continuum and `f(ω₀)·Id` on the bound state.
    pub fn spectral_function<F: Fn(T) -> T>(
        grid: Arc<SpectrumGrid<T>>,
        csco: CscoSpec<T>,
        f: F,
    ) -> Self {
        let m = csco.degeneracy;
        let blocks = Blocks {
            bound: csco
                .bound_energy
                .map(|e| kernel::scaled_identity(m, cplx(f(e)))),
            diag: grid
                .nodes()
                .iter()
                .map(|&w| kernel::scaled_identity(m, cplx(f(w))))
                .collect(),
            cross_lo: None,
            cross_ol: None,
            full: Kernel::Zero,
        };
        Self { grid, csco, blocks }
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        same_space(self, other)?;
        Ok(Self {
            grid: self.grid.clone(),
            csco: self.csco,
            blocks: self.blocks.lin_comb(cplx(a), &other.blocks, cplx(b)),
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            csco: self.csco,
            blocks: self.blocks.adjoint(),
        }
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = compose(self, other)?;
        let ba = compose(other, self)?;
        ab.lin_comb(T::one(), &ba, -T::one())
    }
}

impl<T: Real> StateFunctional<T> {
    pub fn scaled(&self, s: T) -> Self {
        let z = zeros_like(&self.blocks);
        Self {
            grid: self.grid.clone(),
            csco: self.csco,
            blocks: self.blocks.lin_comb(cplx(s), &z, cplx(T::zero())),
        }
    }

    /// `(ρ|I)`.
    pub fn total_probability(&self) -> T {
        let b = &self.blocks;
        let bound = b.bound.as_ref().map_or(T::zero(), |x| trace(x).re);
        let cont: T = b
            .diag
            .iter()
            .zip(self.grid.weights())
            .map(|(x, &w)| w * trace(x).re)
            .sum();
        bound + cont
    }

    /// Same state with its blocks replaced (shape-checked).
    pub fn with_blocks(&self, blocks: Blocks<T>) -> Result<Self> {
        Self::new(self.grid.clone(), self.csco, blocks)
    }
}

fn zeros_like<T: Real>(b: &Blocks<T>) -> Blocks<T> {
    let m = b.diag.first().map_or(1, |d| d.nrows());
    Blocks::zero(b.diag.len(), m, b.bound.is_some())
}

fn check_shapes<T: Real>(grid: &SpectrumGrid<T>, csco: &CscoSpec<T>, b: &Blocks<T>) -> Result<()> {
    let k = grid.len();
    let m = csco.degeneracy;
    let square = |x: &CMat<T>| x.nrows() == m && x.ncols() == m;
    if b.bound.is_some() != csco.has_bound() {
        return Err(invalid(
            "bound block present iff the CSCO declares a bound state",
        ));
    }
    if b.bound.as_ref().is_some_and(|x| !square(x)) {
        return Err(invalid("bound block has wrong label dimension"));
    }
    if b.diag.len() != k || !b.diag.iter().all(square) {
        return Err(invalid("diagonal block must hold one MxM matrix per node"));
    }
    for cross in [&b.cross_lo, &b.cross_ol].into_iter().flatten() {
        if !csco.has_bound() {
            return Err(invalid("cross blocks require a bound state"));
        }
        if cross.len() != k || !cross.iter().all(square) {
            return Err(invalid("cross block must hold one MxM matrix per node"));
        }
    }
    match &b.full {
        Kernel::Zero => {}
        Kernel::Dense(v) => {
            if v.len() != k * k || !v.iter().all(square) {
                return Err(invalid("dense kernel must hold K*K label blocks"));
            }
        }
        Kernel::Separable(terms) => {
            for t in terms {
                if t.left.len() != k
                    || t.right.len() != k
                    || !t.left.iter().chain(&t.right).all(square)
                {
                    return Err(invalid(
                        "separable kernel factors must hold one MxM matrix per node",
                    ));
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn same_space<T: Real, A: HasBlocks<T>, B: HasBlocks<T>>(a: &A, b: &B) -> Result<()> {
    let ga = a.grid();
    let gb = b.grid();
    if !(Arc::ptr_eq(ga, gb) || **ga == **gb) {
        return Err(invalid("operands live on different spectrum grids"));
    }
    let (ca, cb) = (a.csco(), b.csco());
    if ca.degeneracy != cb.degeneracy || ca.bound_energy != cb.bound_energy {
        return Err(invalid("operands use different CSCO label spaces"));
    }
    Ok(())
}

/// `I = Σ_m |ω₀,m⟩⟨ω₀,m| + ∫dω Σ_m |ω,m⟩⟨ω,m|`.
pub fn make_identity<T: Real>(grid: Arc<SpectrumGrid<T>>, csco: CscoSpec<T>) -> Observable<T> {
    Observable::spectral_function(grid, csco, |_| T::one())
}

/// `H = ω₀ Σ_m |ω₀,m⟩⟨ω₀,m| + ∫dω ω Σ_m |ω,m⟩⟨ω,m|`.
pub fn make_hamiltonian<T: Real>(grid: Arc<SpectrumGrid<T>>, csco: CscoSpec<T>) -> Observable<T> {
    Observable::spectral_function(grid, csco, |w| w)
}

/// `e^{-βH}` as a diagonal observable.
pub fn make_boltzmann<T: Real>(
    grid: Arc<SpectrumGrid<T>>,
    csco: CscoSpec<T>,
    beta: T,
) -> Observable<T> {
    Observable::spectral_function(grid, csco, |w| (-beta * w).exp())
}

/// `(ρ|O)` as a complex number; the imaginary part vanishes for valid inputs.
pub fn pair_complex<T: Real>(rho: &StateFunctional<T>, obs: &Observable<T>) -> Result<Complex<T>> {
    same_space(rho, obs)?;
    Ok(pair_blocks(
        rho.grid(),
        rho.csco(),
        rho.blocks(),
        obs.blocks(),
        None,
    ))
}

/// `(ρ|O)`.
pub fn pair<T: Real>(rho: &StateFunctional<T>, obs: &Observable<T>) -> Result<T> {
    pair_complex(rho, obs).map(|z| z.re)
}

/// Pairing of two block sets, optionally with the time phases of `ρ(t)`
/// applied to the off-diagonal blocks.
pub(crate) fn pair_blocks<T: Real>(
    grid: &SpectrumGrid<T>,
    csco: &CscoSpec<T>,
    rho: &Blocks<T>,
    obs: &Blocks<T>,
    time: Option<T>,
) -> Complex<T> {
    let w = grid.weights();
    let nodes = grid.nodes();
    let k = nodes.len();
    let t = time.unwrap_or_else(T::zero);
    let e0 = csco.bound_energy.unwrap_or_else(T::zero);
    let mut acc = Complex::new(T::zero(), T::zero());

    if let (Some(r), Some(o)) = (&rho.bound, &obs.bound) {
        acc += frobenius(r, o);
    }
    for i in 0..k {
        acc += frobenius(&rho.diag[i], &obs.diag[i]) * w[i];
    }
    if let (Some(r), Some(o)) = (&rho.cross_lo, &obs.cross_lo) {
        for i in 0..k {
            acc += frobenius(&r[i], &o[i]) * phase((nodes[i] - e0) * t) * w[i];
        }
    }
    if let (Some(r), Some(o)) = (&rho.cross_ol, &obs.cross_ol) {
        for i in 0..k {
            acc += frobenius(&r[i], &o[i]) * phase((e0 - nodes[i]) * t) * w[i];
        }
    }

    match (&rho.full, &obs.full) {
        (Kernel::Zero, _) | (_, Kernel::Zero) => {}
        (Kernel::Separable(rs), Kernel::Separable(os)) => {
            let fwd: Vec<Complex<T>> = nodes
                .iter()
                .zip(w)
                .map(|(&x, &wi)| phase(x * t) * wi)
                .collect();
            let bwd: Vec<Complex<T>> = nodes
                .iter()
                .zip(w)
                .map(|(&x, &wi)| phase(-x * t) * wi)
                .collect();
            let m = csco.degeneracy;
            for ra in rs {
                for ob in os {
                    let mut left = zeros::<T>(m);
                    let mut right = zeros::<T>(m);
                    for i in 0..k {
                        left += scale(&(dagger(&ra.left[i]) * &ob.left[i]), fwd[i]);
                        right += scale(&(&ob.right[i] * dagger(&ra.right[i])), bwd[i]);
                    }
                    acc += trace(&(left * right));
                }
            }
        }
        (rf, of) => {
            for i in 0..k {
                for j in 0..k {
                    let (Some(r), Some(o)) = (rf.entry(i, j, k), of.entry(i, j, k)) else {
                        continue;
                    };
                    acc += frobenius(&r, &o) * phase((nodes[i] - nodes[j]) * t) * (w[i] * w[j]);
                }
            }
        }
    }
    acc
}

/// Operator product `AB` on the continuum.
///
/// Diagonal blocks multiply pointwise, the diagonal×kernel terms act on the
/// kernel rows/columns and kernel×kernel terms integrate over the middle
/// energy. Bound–continuum cross blocks are not supported.
pub fn compose<T: Real>(a: &Observable<T>, b: &Observable<T>) -> Result<Observable<T>> {
    same_space(a, b)?;
    let (ba, bb) = (a.blocks(), b.blocks());
    if ba.has_cross() || bb.has_cross() {
        return Err(invalid(
            "compose does not support bound-continuum cross blocks",
        ));
    }
    let grid = a.grid();
    let m = a.csco().degeneracy;
    let k = grid.len();
    let diag: Vec<CMat<T>> = ba.diag.iter().zip(&bb.diag).map(|(x, y)| x * y).collect();
    let full = bb
        .full
        .left_mul_diag(&ba.diag)
        .add(&ba.full.right_mul_diag(&bb.diag), k, m)
        .add(&ba.full.compose(&bb.full, grid.weights(), m), k, m);
    let blocks = Blocks {
        bound: match (&ba.bound, &bb.bound) {
            (Some(x), Some(y)) => Some(x * y),
            _ => None,
        },
        diag,
        cross_lo: None,
        cross_ol: None,
        full,
    };
    Observable::new(grid.clone(), *a.csco(), blocks)
}

/// Generalized trace `Tr A = (I|A) = Σ_m A(ω₀)_{mm} + Σ_m ∫ dω A(ω)_{mm}`.
pub fn op_trace<T: Real>(a: &Observable<T>) -> Complex<T> {
    let b = a.blocks();
    let bound = b
        .bound
        .as_ref()
        .map_or(Complex::new(T::zero(), T::zero()), trace);
    let cont = b
        .diag
        .iter()
        .zip(a.grid().weights())
        .fold(Complex::new(T::zero(), T::zero()), |s, (x, &w)| {
            s + trace(x) * w
        });
    bound + cont
}

/// Residuals of the invariants of an observable or a state.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    /// Largest violation of the self-adjointness relations between blocks.
    pub hermiticity_residual: f64,
    /// Smallest real diagonal entry of the diagonal blocks.
    pub min_diagonal: f64,
    /// Largest imaginary part on the diagonal of the diagonal blocks.
    pub diagonal_imag_residual: f64,
    /// `|(ρ|I) - 1|` for states.
    pub normalization_deviation: Option<f64>,
    /// Some diagonal block fails a positive-semidefiniteness test (warning only).
    pub psd_warning: bool,
}

impl InvariantReport {
    pub fn negative_diagonal(&self, tol: f64) -> bool {
        self.min_diagonal < -tol
    }

    /// All hard invariants hold at tolerance `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.hermiticity_residual < tol
            && self.diagonal_imag_residual < tol
            && self.normalization_deviation.is_none_or(|d| d < tol)
            && (self.normalization_deviation.is_none() || !self.negative_diagonal(tol))
    }
}

/// Evaluates every invariant residual of `x`.
pub fn validate<T: Real, X: HasBlocks<T>>(x: &X) -> InvariantReport {
    let b = x.blocks();
    let k = x.grid().len();
    let mut herm = T::zero();
    let mut min_diag = T::infinity();
    let mut imag = T::zero();
    let mut psd_warning = false;
    for block in b.bound.iter().chain(&b.diag) {
        herm = herm.max(hermiticity_defect(block));
        for z in block.diagonal().iter() {
            min_diag = min_diag.min(z.re);
            imag = imag.max(z.im.abs());
        }
        if x.is_state() && !is_psd(block, T::lit(1e-12)) {
            psd_warning = true;
        }
    }
    if let (Some(lo), Some(ol)) = (&b.cross_lo, &b.cross_ol) {
        for (p, q) in lo.iter().zip(ol) {
            herm = herm.max(kernel::max_abs(&(q - dagger(p))));
        }
    } else if b.cross_lo.is_some() || b.cross_ol.is_some() {
        let lone = b.cross_lo.as_ref().or(b.cross_ol.as_ref()).unwrap();
        herm = herm.max(
            lone.iter()
                .fold(T::zero(), |m, x| m.max(kernel::max_abs(x))),
        );
    }
    if !b.full.is_zero() {
        for i in 0..k {
            for j in i..k {
                let p = b.full.entry(i, j, k).unwrap();
                let q = b.full.entry(j, i, k).unwrap();
                herm = herm.max(kernel::max_abs(&(p - dagger(&q))));
            }
        }
    }
    let normalization_deviation = if x.is_state() {
        let w = x.grid().weights();
        let bound = b.bound.as_ref().map_or(T::zero(), |m| trace(m).re);
        let cont: T = b.diag.iter().zip(w).map(|(m, &wi)| wi * trace(m).re).sum();
        Some((bound + cont - T::one()).abs().as_f64())
    } else {
        None
    };
    InvariantReport {
        hermiticity_residual: herm.as_f64(),
        min_diagonal: if min_diag.is_finite() {
            min_diag.as_f64()
        } else {
            0.0
        },
        diagonal_imag_residual: imag.as_f64(),
        normalization_deviation,
        psd_warning,
    }
}

/// Cholesky test on `a + tol·I`.
pub(crate) fn is_psd<T: Real>(a: &CMat<T>, tol: T) -> bool {
    let n = a.nrows();
    let mut l = zeros::<T>(n);
    for j in 0..n {
        let mut d = a[(j, j)].re + tol;
        for p in 0..j {
            d -= l[(j, p)].norm_sqr();
        }
        if !(d > T::zero()) {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = cplx(d);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    true
}
