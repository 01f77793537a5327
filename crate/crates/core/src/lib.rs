//! Spectral-decomposition toolkit for continuous-spectrum quantum systems:
//! observables and states over a spectral grid, unitary evolution and
//! decoherence, pointer bases, maximum-entropy and KMS thermal states,
//! a Wigner-function bridge to classical phase space, classical
//! action–angle dynamics and localization diagnostics.
//!
//! Every numerical type is generic over the scalar (`f32` or `f64`);
//! the `*64` aliases below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod classical_dynamics;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod linalg;
pub mod localization;
pub mod maxent_kms;
pub mod pointer_basis;
pub mod scalar;
pub mod spectral_model;
pub mod wigner_bridge;

pub use error::{LabError, Result};
pub use scalar::Real;

pub type SpectrumGrid64 = spectral_model::SpectrumGrid<f64>;
pub type CscoSpec64 = spectral_model::CscoSpec<f64>;
pub type Observable64 = algebra::Observable<f64>;
pub type StateFunctional64 = algebra::StateFunctional<f64>;
pub type PhaseGrid64 = wigner_bridge::PhaseGrid<f64>;
pub type PositionKernel64 = wigner_bridge::PositionKernel<f64>;
pub type WignerDensity64 = wigner_bridge::WignerDensity<f64>;
pub type FlowSpec64 = classical_dynamics::FlowSpec<f64>;
