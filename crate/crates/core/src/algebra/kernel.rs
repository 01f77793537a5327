//! `M×M` label blocks and continuum kernels `O(ω_k, ω_l)`.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::scalar::Real;

/// Complex square matrix over the degeneracy labels `m, m′`.
pub type CMat<T> = DMatrix<Complex<T>>;

pub fn zeros<T: Real>(m: usize) -> CMat<T> {
    CMat::from_element(m, m, Complex::new(T::zero(), T::zero()))
}

pub fn identity<T: Real>(m: usize) -> CMat<T> {
    CMat::identity(m, m)
}

pub fn scaled_identity<T: Real>(m: usize, s: Complex<T>) -> CMat<T> {
    CMat::from_diagonal_element(m, m, s)
}

pub fn dagger<T: Real>(a: &CMat<T>) -> CMat<T> {
    a.transpose().map(|z| z.conj())
}

pub fn trace<T: Real>(a: &CMat<T>) -> Complex<T> {
    a.diagonal()
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |s, &z| s + z)
}

/// Frobenius pairing `Σ_{mm′} conj(a_{mm′}) b_{mm′} = Tr(a† b)`.
pub fn frobenius<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Complex<T> {
    a.iter()
        .zip(b.iter())
        .fold(Complex::new(T::zero(), T::zero()), |s, (x, y)| {
            s + x.conj() * y
        })
}

pub fn max_abs<T: Real>(a: &CMat<T>) -> T {
    a.iter().fold(T::zero(), |m, z| m.max(z.norm()))
}

/// `max |a - a†|`.
pub fn hermiticity_defect<T: Real>(a: &CMat<T>) -> T {
    let n = a.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn scale<T: Real>(a: &CMat<T>, s: Complex<T>) -> CMat<T> {
    a.map(|z| z * s)
}

/// One separable contribution `L(ω_k)·R(ω_l)` to a continuum kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableTerm<T: Real> {
    pub left: Vec<CMat<T>>,
    pub right: Vec<CMat<T>>,
}

impl<T: Real> SeparableTerm<T> {
    /// `u(ω) v(ω′) C` with scalar profiles and a constant label matrix.
    pub fn scalar(u: &[Complex<T>], v: &[Complex<T>], coeff: &CMat<T>) -> Self {
        let m = coeff.nrows();
        Self {
            left: u.iter().map(|&a| scale(coeff, a)).collect(),
            right: v.iter().map(|&b| scaled_identity(m, b)).collect(),
        }
    }

    /// Rank-one label structure `a(ω) a(ω′)†` built from vectors `a(ω_k) ∈ ℂ^M`.
    pub fn outer(vectors: &[Vec<Complex<T>>]) -> Self {
        let m = vectors.first().map_or(1, Vec::len);
        let left = vectors
            .iter()
            .map(|a| {
                let mut mat = zeros(m);
                for (i, &z) in a.iter().enumerate() {
                    mat[(i, 0)] = z;
                }
                mat
            })
            .collect();
        let right = vectors
            .iter()
            .map(|a| {
                let mut mat = zeros(m);
                for (j, &z) in a.iter().enumerate() {
                    mat[(0, j)] = z.conj();
                }
                mat
            })
            .collect();
        Self { left, right }
    }

    pub fn entry(&self, k: usize, l: usize) -> CMat<T> {
        &self.left[k] * &self.right[l]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            left: self.right.iter().map(dagger).collect(),
            right: self.left.iter().map(dagger).collect(),
        }
    }
}

/// Continuum–continuum kernel `O(ω, ω′)_{mm′}` sampled on the grid.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel<T: Real> {
    Zero,
    /// Row-major `K×K` array of label blocks: index `k*K + l`.
    Dense(Vec<CMat<T>>),
    /// `Σ_a L_a(ω) R_a(ω′)`.
    Separable(Vec<SeparableTerm<T>>),
}

impl<T: Real> Kernel<T> {
    pub fn is_zero(&self) -> bool {
        match self {
            Kernel::Zero => true,
            Kernel::Dense(v) => v.is_empty(),
            Kernel::Separable(t) => t.is_empty(),
        }
    }

    /// Block `(k, l)` of the kernel; `None` for the zero kernel.
    pub fn entry(&self, k: usize, l: usize, nodes: usize) -> Option<CMat<T>> {
        match self {
            Kernel::Zero => None,
            Kernel::Dense(v) => v.get(k * nodes + l).cloned(),
            Kernel::Separable(terms) => {
                let mut it = terms.iter();
                let first = it.next()?.entry(k, l);
                Some(it.fold(first, |acc, t| acc + t.entry(k, l)))
            }
        }
    }

    pub fn to_dense(&self, nodes: usize, m: usize) -> Vec<CMat<T>> {
        match self {
            Kernel::Dense(v) => v.clone(),
            _ => {
                let mut out = Vec::with_capacity(nodes * nodes);
                for k in 0..nodes {
                    for l in 0..nodes {
                        out.push(self.entry(k, l, nodes).unwrap_or_else(|| zeros(m)));
                    }
                }
                out
            }
        }
    }

    /// Kernel of the adjoint operator: `(k, l) ↦ O(l, k)†`.
    pub fn adjoint(&self, nodes: usize) -> Self {
        match self {
            Kernel::Zero => Kernel::Zero,
            Kernel::Separable(t) => {
                Kernel::Separable(t.iter().map(SeparableTerm::adjoint).collect())
            }
            Kernel::Dense(v) => {
                let mut out = Vec::with_capacity(v.len());
                for k in 0..nodes {
                    for l in 0..nodes {
                        out.push(dagger(&v[l * nodes + k]));
                    }
                }
                Kernel::Dense(out)
            }
        }
    }

    /// Multiplies block `(k, l)` by `a_k · b_l`.
    pub fn modulate(&self, a: &[Complex<T>], b: &[Complex<T>]) -> Self {
        match self {
            Kernel::Zero => Kernel::Zero,
            Kernel::Separable(terms) => Kernel::Separable(
                terms
                    .iter()
                    .map(|t| SeparableTerm {
                        left: t.left.iter().zip(a).map(|(x, &s)| scale(x, s)).collect(),
                        right: t.right.iter().zip(b).map(|(x, &s)| scale(x, s)).collect(),
                    })
                    .collect(),
            ),
            Kernel::Dense(v) => {
                let n = a.len();
                Kernel::Dense(
                    v.iter()
                        .enumerate()
                        .map(|(idx, x)| scale(x, a[idx / n] * b[idx % n]))
                        .collect(),
                )
            }
        }
    }

    /// `(k, l) ↦ f(X(k, l))` applied blockwise; separable kernels are densified
    /// unless `f` is linear and applied to the left factors (see [`Kernel::scale`]).
    pub fn map_dense<F: Fn(usize, usize, CMat<T>) -> CMat<T>>(
        &self,
        nodes: usize,
        m: usize,
        f: F,
    ) -> Self {
        if self.is_zero() {
            return Kernel::Zero;
        }
        let dense = self.to_dense(nodes, m);
        Kernel::Dense(
            dense
                .into_iter()
                .enumerate()
                .map(|(idx, x)| f(idx / nodes, idx % nodes, x))
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        match self {
            Kernel::Zero => Kernel::Zero,
            Kernel::Dense(v) => Kernel::Dense(v.iter().map(|x| scale(x, s)).collect()),
            Kernel::Separable(terms) => Kernel::Separable(
                terms
                    .iter()
                    .map(|t| SeparableTerm {
                        left: t.left.iter().map(|x| scale(x, s)).collect(),
                        right: t.right.clone(),
                    })
                    .collect(),
            ),
        }
    }

    pub fn add(&self, other: &Self, nodes: usize, m: usize) -> Self {
        match (self, other) {
            (Kernel::Zero, x) | (x, Kernel::Zero) => x.clone(),
            (Kernel::Separable(a), Kernel::Separable(b)) => {
                Kernel::Separable(a.iter().chain(b.iter()).cloned().collect())
            }
            _ => {
                let a = self.to_dense(nodes, m);
                let b = other.to_dense(nodes, m);
                Kernel::Dense(a.iter().zip(&b).map(|(x, y)| x + y).collect())
            }
        }
    }

    /// `(k, l) ↦ D(k)·X(k, l)`.
    pub fn left_mul_diag(&self, diag: &[CMat<T>]) -> Self {
        match self {
            Kernel::Zero => Kernel::Zero,
            Kernel::Separable(terms) => Kernel::Separable(
                terms
                    .iter()
                    .map(|t| SeparableTerm {
                        left: t.left.iter().zip(diag).map(|(x, d)| d * x).collect(),
                        right: t.right.clone(),
                    })
                    .collect(),
            ),
            Kernel::Dense(v) => {
                let n = diag.len();
                Kernel::Dense(
                    v.iter()
                        .enumerate()
                        .map(|(idx, x)| &diag[idx / n] * x)
                        .collect(),
                )
            }
        }
    }

    /// `(k, l) ↦ X(k, l)·D(l)`.
    pub fn right_mul_diag(&self, diag: &[CMat<T>]) -> Self {
        match self {
            Kernel::Zero => Kernel::Zero,
            Kernel::Separable(terms) => Kernel::Separable(
                terms
                    .iter()
                    .map(|t| SeparableTerm {
                        left: t.left.clone(),
                        right: t.right.iter().zip(diag).map(|(x, d)| x * d).collect(),
                    })
                    .collect(),
            ),
            Kernel::Dense(v) => {
                let n = diag.len();
                Kernel::Dense(
                    v.iter()
                        .enumerate()
                        .map(|(idx, x)| x * &diag[idx % n])
                        .collect(),
                )
            }
        }
    }

    /// Kernel product `C(ω, ω″) = Σ_j w_j A(ω, ω_j) B(ω_j, ω″)`.
    pub fn compose(&self, other: &Self, weights: &[T], m: usize) -> Self {
        let nodes = weights.len();
        match (self, other) {
            (Kernel::Zero, _) | (_, Kernel::Zero) => Kernel::Zero,
            (Kernel::Separable(a), Kernel::Separable(b)) => {
                let mut terms = Vec::with_capacity(a.len() * b.len());
                for ta in a {
                    for tb in b {
                        let mut gram = zeros::<T>(m);
                        for j in 0..nodes {
                            gram += scale(
                                &(&ta.right[j] * &tb.left[j]),
                                Complex::new(weights[j], T::zero()),
                            );
                        }
                        terms.push(SeparableTerm {
                            left: ta.left.iter().map(|l| l * &gram).collect(),
                            right: tb.right.clone(),
                        });
                    }
                }
                Kernel::Separable(terms)
            }
            _ => {
                let a = self.to_dense(nodes, m);
                let b = other.to_dense(nodes, m);
                let mut out = Vec::with_capacity(nodes * nodes);
                for k in 0..nodes {
                    for l in 0..nodes {
                        let mut acc = zeros::<T>(m);
                        for j in 0..nodes {
                            acc += scale(
                                &(&a[k * nodes + j] * &b[j * nodes + l]),
                                Complex::new(weights[j], T::zero()),
                            );
                        }
                        out.push(acc);
                    }
                }
                Kernel::Dense(out)
            }
        }
    }
}
