//! Random observables and states used by tests, property checks and the CLI.

use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use super::kernel::{dagger, scale, zeros, CMat, Kernel, SeparableTerm};
use super::{Blocks, Observable, StateFunctional};
use crate::scalar::{cplx, phase, Real};
use crate::spectral_model::{CscoSpec, SpectrumGrid};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn random_hermitian<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> CMat<T> {
    let mut a = zeros::<T>(m);
    for i in 0..m {
        a[(i, i)] = cplx(T::lit(normal(rng)));
        for j in (i + 1)..m {
            let z = Complex::new(T::lit(normal(rng)), T::lit(normal(rng)))
                * T::lit(std::f64::consts::FRAC_1_SQRT_2);
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    a
}

/// Positive label matrix with unit trace.
fn random_density<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> CMat<T> {
    let g = random_hermitian::<T, R>(m, rng);
    let p = &g * &g + CMat::<T>::identity(m, m).map(|z| z * T::lit(0.1));
    let tr = super::kernel::trace(&p).re;
    p.map(|z| z / tr)
}

fn random_unit_vector<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<Complex<T>> {
    let v: Vec<Complex<f64>> = (0..m)
        .map(|_| Complex::new(normal(rng), normal(rng)))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter()
        .map(|z| Complex::new(T::lit(z.re / n), T::lit(z.im / n)))
        .collect()
}

/// Smooth bounded profile `a₀ + a₁ cos(κ₁ω) + a₂ sin(κ₂ω)`.
fn smooth_profile<R: Rng + ?Sized>(rng: &mut R, omega_max: f64) -> impl Fn(f64) -> f64 {
    let a = [normal(rng), normal(rng) * 0.5, normal(rng) * 0.5];
    let k1 = rng.random_range(0.5..3.0) / omega_max.max(1e-12);
    let k2 = rng.random_range(0.5..3.0) / omega_max.max(1e-12);
    move |w| a[0] + a[1] * (k1 * w).cos() + a[2] * (k2 * w).sin()
}

/// Random self-adjoint observable: smooth Hermitian diagonal blocks, a random
/// bound block and `kernel_terms` Hermitian separable kernel terms.
pub fn random_observable<T: Real, R: Rng + ?Sized>(
    grid: Arc<SpectrumGrid<T>>,
    csco: CscoSpec<T>,
    rng: &mut R,
    kernel_terms: usize,
) -> Observable<T> {
    let m = csco.degeneracy;
    let wmax = grid.omega_max().as_f64();
    let h0 = random_hermitian::<T, R>(m, rng);
    let h1 = random_hermitian::<T, R>(m, rng);
    let f0 = smooth_profile(rng, wmax);
    let f1 = smooth_profile(rng, wmax);
    let diag = grid
        .nodes()
        .iter()
        .map(|&w| {
            let w = w.as_f64();
            scale(&h0, cplx(T::lit(f0(w)))) + scale(&h1, cplx(T::lit(f1(w))))
        })
        .collect();
    let mut terms = Vec::with_capacity(kernel_terms);
    for _ in 0..kernel_terms {
        let u = random_unit_vector::<T, R>(m, rng);
        let amp = smooth_profile(rng, wmax);
        let freq = T::lit(rng.random_range(0.0..2.0));
        let sign = if rng.random::<bool>() {
            T::one()
        } else {
            -T::one()
        };
        let vectors: Vec<Vec<Complex<T>>> = grid
            .nodes()
            .iter()
            .map(|&w| {
                let c = phase(freq * w) * T::lit(amp(w.as_f64()));
                u.iter().map(|&z| z * c).collect()
            })
            .collect();
        let mut t = SeparableTerm::outer(&vectors);
        t.left = t.left.iter().map(|x| scale(x, cplx(sign))).collect();
        terms.push(t);
    }
    let blocks = Blocks {
        bound: csco.has_bound().then(|| random_hermitian::<T, R>(m, rng)),
        diag,
        cross_lo: None,
        cross_ol: None,
        full: if terms.is_empty() {
            Kernel::Zero
        } else {
            Kernel::Separable(terms)
        },
    };
    Observable::new(grid, csco, blocks).expect("shapes match by construction")
}

/// Random valid state: a smooth probability profile over energy, positive unit-trace
/// label matrices, and a rank-one coherent wave-packet part of relative strength
/// `coherence ∈ [0, 1]` carrying the off-diagonal blocks.
pub fn random_state<T: Real, R: Rng + ?Sized>(
    grid: Arc<SpectrumGrid<T>>,
    csco: CscoSpec<T>,
    rng: &mut R,
    coherence: f64,
) -> StateFunctional<T> {
    let m = csco.degeneracy;
    let wmax = grid.omega_max().as_f64();
    let center = rng.random_range(0.2..0.6) * wmax;
    let width = rng.random_range(0.1..0.3) * wmax;
    let raw: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&w| {
            let x = (w.as_f64() - center) / width;
            (-0.5 * x * x).exp() + 1e-3
        })
        .collect();
    let bound_share = if csco.has_bound() {
        rng.random_range(0.1..0.4)
    } else {
        0.0
    };
    let z: f64 = raw
        .iter()
        .zip(grid.weights())
        .map(|(p, &w)| p * w.as_f64())
        .sum();
    let p: Vec<f64> = raw.iter().map(|x| x * (1.0 - bound_share) / z).collect();

    let diag: Vec<CMat<T>> = p
        .iter()
        .map(|&pk| scale(&random_density::<T, R>(m, rng), cplx(T::lit(pk))))
        .collect();

    let c = coherence.clamp(0.0, 1.0);
    let u = random_unit_vector::<T, R>(m, rng);
    let drift = rng.random_range(0.0..1.0);
    let psi: Vec<Vec<Complex<T>>> = grid
        .nodes()
        .iter()
        .zip(&p)
        .map(|(&w, &pk)| {
            let amp = phase(T::lit(drift) * w) * T::lit((c * pk).sqrt());
            u.iter().map(|&z| z * amp).collect()
        })
        .collect();
    let full = if c > 0.0 {
        Kernel::Separable(vec![SeparableTerm::outer(&psi)])
    } else {
        Kernel::Zero
    };

    let (bound, cross_lo, cross_ol) = if csco.has_bound() {
        let b = random_unit_vector::<T, R>(m, rng);
        let bound = scale(&random_density::<T, R>(m, rng), cplx(T::lit(bound_share)));
        let bvec: Vec<Complex<T>> = b
            .iter()
            .map(|&z| z * T::lit((c * bound_share).sqrt()))
            .collect();
        let lo: Vec<CMat<T>> = psi
            .iter()
            .map(|a| {
                let mut x = zeros::<T>(m);
                for i in 0..m {
                    for j in 0..m {
                        x[(i, j)] = a[i] * bvec[j].conj();
                    }
                }
                x
            })
            .collect();
        let ol = lo.iter().map(dagger).collect();
        if c > 0.0 {
            (Some(bound), Some(lo), Some(ol))
        } else {
            (Some(bound), None, None)
        }
    } else {
        (None, None, None)
    };

    let blocks = Blocks {
        bound,
        diag,
        cross_lo,
        cross_ol,
        full,
    };
    StateFunctional::new(grid, csco, blocks).expect("shapes match by construction")
}

/// Diagonal state `ρ(ω) = p(ω)·Id/M` normalized on the grid.
pub fn diagonal_state<T: Real, F: Fn(T) -> T>(
    grid: Arc<SpectrumGrid<T>>,
    csco: CscoSpec<T>,
    profile: F,
) -> crate::error::Result<StateFunctional<T>> {
    let m = csco.degeneracy;
    let raw = grid.sample(&profile);
    let z = grid.integrate(&raw)? * T::from_usize_lossy(m);
    if !(z > T::zero()) {
        return Err(crate::error::invalid("profile integrates to zero"));
    }
    let blocks = Blocks {
        bound: csco.has_bound().then(|| zeros(m)),
        diag: raw
            .iter()
            .map(|&p| super::kernel::scaled_identity(m, cplx(p / z)))
            .collect(),
        cross_lo: None,
        cross_ol: None,
        full: Kernel::Zero,
    };
    StateFunctional::new(grid, csco, blocks)
}
