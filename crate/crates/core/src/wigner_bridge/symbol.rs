//! Polynomial phase-space symbols and their Weyl quantization.

use crate::scalar::Real;

use super::{PhaseGrid, PositionKernel};

/// `Σ c · q^a p^b`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySymbol<T> {
    pub terms: Vec<(T, u32, u32)>,
}

impl<T: Real> PolySymbol<T> {
    pub fn monomial(coeff: T, q_pow: u32, p_pow: u32) -> Self {
        Self {
            terms: vec![(coeff, q_pow, p_pow)],
        }
    }

    pub fn q() -> Self {
        Self::monomial(T::one(), 1, 0)
    }

    pub fn p() -> Self {
        Self::monomial(T::one(), 0, 1)
    }

    pub fn plus(mut self, other: Self) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn eval(&self, q: T, p: T) -> T {
        self.terms
            .iter()
            .map(|&(c, a, b)| c * q.powi(a as i32) * p.powi(b as i32))
            .sum()
    }

    /// Highest total degree.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(_, a, b)| a + b).max().unwrap_or(0)
    }

    /// Weyl ordering `q^m p^n ↦ 2^{-m} Σ_k C(m,k) Q^k P^n Q^{m-k}`.
    pub fn quantize(&self, grid: &PhaseGrid<T>) -> PositionKernel<T> {
        let n = grid.nq();
        let p = PositionKernel::momentum(grid);
        let mut out = PositionKernel {
            matrix: crate::algebra::kernel::zeros(n),
            dq: grid.dq,
        };
        for &(c, m, k_p) in &self.terms {
            let mut p_pow = PositionKernel::identity(n, grid.dq);
            for _ in 0..k_p {
                p_pow = p_pow.compose(&p);
            }
            let mut term = crate::algebra::kernel::zeros(n);
            let mut binom = T::one();
            for k in 0..=m {
                let left = PositionKernel::multiplication(grid, |q| q.powi(k as i32));
                let right = PositionKernel::multiplication(grid, |q| q.powi((m - k) as i32));
                let piece = left.compose(&p_pow).compose(&right);
                term += piece.matrix.map(|z| z * binom);
                binom = binom * T::from_usize_lossy((m - k) as usize)
                    / T::from_usize_lossy(k as usize + 1);
            }
            let scale = c / T::lit(2.0).powi(m as i32);
            out.matrix += term.map(|z| z * scale);
        }
        out
    }
}
