//! One-dimensional Hamiltonians `H = p²/2 + V(q)` and their thermal states.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::linalg::{symmetric_eigen_sorted, EigenReal};
use crate::scalar::{cplx, Real};

use super::{PhaseFunction, PhaseGrid, PolySymbol, PositionKernel, TAPER_FRACTION};

/// Largest fraction of thermal mass tolerated on the outer grid frame.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalModel<T> {
    /// `V = ω²q²/2`.
    Harmonic { omega: T },
    /// `V = ω²q²/2 + λq⁴/4`.
    Quartic { omega: T, lambda: T },
}

impl<T: Real> ClassicalModel<T> {
    pub fn potential(&self, q: T) -> T {
        match *self {
            Self::Harmonic { omega } => T::lit(0.5) * omega * omega * q * q,
            Self::Quartic { omega, lambda } => {
                T::lit(0.5) * omega * omega * q * q + lambda * q.powi(4) / T::lit(4.0)
            }
        }
    }

    pub fn force_gradient(&self, q: T) -> T {
        match *self {
            Self::Harmonic { omega } => omega * omega * q,
            Self::Quartic { omega, lambda } => omega * omega * q + lambda * q.powi(3),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        match *self {
            Self::Harmonic { .. } => true,
            Self::Quartic { lambda, .. } => lambda == T::zero(),
        }
    }

    /// Weyl symbol `H^W(q, p)`.
    pub fn energy(&self, q: T, p: T) -> T {
        T::lit(0.5) * p * p + self.potential(q)
    }

    pub fn dh_dq(&self, q: T) -> T {
        self.force_gradient(q)
    }

    pub fn dh_dp(&self, p: T) -> T {
        p
    }

    /// `P·P/2 + V(Q)` on the grid.
    pub fn hamiltonian(&self, grid: &PhaseGrid<T>) -> PositionKernel<T> {
        let p = PositionKernel::momentum(grid);
        let kinetic = p.compose(&p);
        let v = PositionKernel::multiplication(grid, |q| self.potential(q));
        kinetic.lin_comb(T::lit(0.5), &v, T::one())
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Harmonic { omega } => format!("harmonic(omega={})", omega),
            Self::Quartic { omega, lambda } => {
                format!("quartic(omega={}, lambda={})", omega, lambda)
            }
        }
    }
}

/// `e^{-βH}/Z` in the position representation.
pub fn quantum_thermal_state<T: EigenReal>(
    model: &ClassicalModel<T>,
    grid: &PhaseGrid<T>,
    beta: T,
) -> Result<PositionKernel<T>> {
    if !(beta > T::zero()) {
        return Err(invalid("thermal states need beta > 0"));
    }
    let h = model.hamiltonian(grid);
    let n = grid.nq();
    // P·P is real symmetric, so H is too.
    let real = DMatrix::from_fn(n, n, |a, b| {
        (h.matrix[(a, b)].re + h.matrix[(b, a)].re) * T::lit(0.5)
    });
    let (values, vectors) = symmetric_eigen_sorted(&real);
    let e0 = values[0];
    let weights: Vec<T> = values
        .iter()
        .map(|&e| num_traits::Float::exp(-(beta * (e - e0))))
        .collect();
    let z: T = weights.iter().copied().sum();
    let mut rho = DMatrix::from_element(n, n, T::zero());
    for (k, &w) in weights.iter().enumerate() {
        if w < <T as num_traits::Float>::epsilon() * z {
            continue;
        }
        let v = vectors.column(k);
        rho += (&v * v.transpose()) * (w / z);
    }
    Ok(PositionKernel {
        matrix: rho.map(cplx),
        dq: grid.dq,
    })
}

/// `e^{-βH^W}/Z` sampled on the grid; fails when the grid frame carries
/// more than [`BOUNDARY_MASS_LIMIT`] of the mass.
pub fn classical_thermal_density<T: Real>(
    model: &ClassicalModel<T>,
    grid: &PhaseGrid<T>,
    beta: T,
) -> Result<PhaseFunction<T>> {
    classical_grand_density(model, grid, beta, &[])
}

/// `e^{-βH^W - Σ γ_i P_i^W}/Z` for isolating phase-space functions `P_i^W`.
pub fn classical_grand_density<T: Real>(
    model: &ClassicalModel<T>,
    grid: &PhaseGrid<T>,
    beta: T,
    gammas: &[(T, PolySymbol<T>)],
) -> Result<PhaseFunction<T>> {
    if !(beta > T::zero()) {
        return Err(invalid("thermal states need beta > 0"));
    }
    let raw = grid.sample(|q, p| {
        let extra: T = gammas.iter().map(|(g, s)| *g * s.eval(q, p)).sum();
        (-(beta * model.energy(q, p)) - extra).exp()
    });
    let z = grid.integrate(&raw)?;
    if !(z > T::zero()) || !z.is_finite() {
        return Err(invalid(
            "classical partition function is not finite and positive",
        ));
    }
    let values = raw / z;
    let (nq, np) = values.shape();
    let wq = grid.q_weights();
    let wp = grid.p_weights();
    let mut frame = T::zero();
    for i in 0..nq {
        for j in 0..np {
            if i == 0 || j == 0 || i == nq - 1 || j == np - 1 {
                frame += values[(i, j)] * wq[i] * wp[j];
            }
        }
    }
    let frame_mass = frame.as_f64();
    if frame_mass > BOUNDARY_MASS_LIMIT {
        return Err(LabError::DomainTooSmall {
            boundary_mass: frame_mass,
            limit: BOUNDARY_MASS_LIMIT,
        });
    }
    Ok(PhaseFunction {
        values,
        imag_residual: T::zero(),
        norm: Some(T::one()),
        taper_fraction: TAPER_FRACTION,
    })
}
