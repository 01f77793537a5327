//! Classical images of diagonal spectral states: mixtures of mollified
//! energy shells `δ_ε(H^W - ω)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::algebra::{HasBlocks, StateFunctional};
use crate::error::{invalid, Result};
use crate::scalar::Real;

use super::{ClassicalModel, PhaseFunction, PhaseGrid, PolySymbol, TAPER_FRACTION};

/// Shells whose normalization falls below this are rejected.
const MIN_SHELL_AREA: f64 = 1e-12;

/// Hamiltonian plus optional conserved phase-space functions used as labels.
#[derive(Clone, Debug)]
pub struct StarModel<T> {
    pub hamiltonian: ClassicalModel<T>,
    pub momenta: Vec<PolySymbol<T>>,
}

impl<T: Real> StarModel<T> {
    pub fn new(hamiltonian: ClassicalModel<T>) -> Self {
        Self {
            hamiltonian,
            momenta: Vec::new(),
        }
    }
}

/// One shell `(ω, r)` carrying probability `mass`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Shell<T> {
    pub omega: T,
    pub labels: Vec<T>,
    pub mass: T,
}

#[derive(Clone, Debug)]
pub struct StarDensity<T: Real> {
    pub density: PhaseFunction<T>,
    pub epsilon: T,
    /// Normalization `∬ δ_ε(H - ω)·Π δ_ε(P_i - r_i)` used for each shell.
    pub shell_areas: Vec<T>,
}

fn mollifier<T: Real>(x: T, eps: T) -> T {
    (-(x * x) / (T::lit(2.0) * eps * eps)).exp() / ((T::lit(2.0) * T::PI()).sqrt() * eps)
}

/// Standard normal CDF via `erfc`.
fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Builds `Σ mass · δ_ε(H^W - ω)·Π δ_ε(P_i^W - r_i) / area` on the grid.
pub fn build_classical_star_density<T: Real>(
    grid: &PhaseGrid<T>,
    model: &StarModel<T>,
    shells: &[Shell<T>],
    epsilon: T,
) -> Result<StarDensity<T>> {
    if !(epsilon > T::zero()) {
        return Err(invalid("mollifier width epsilon must be positive"));
    }
    if shells.is_empty() {
        return Err(invalid("star density needs at least one shell"));
    }
    let h = grid.sample(|q, p| model.hamiltonian.energy(q, p));
    let labels: Vec<DMatrix<T>> = model
        .momenta
        .iter()
        .map(|s| grid.sample(|q, p| s.eval(q, p)))
        .collect();
    let mut values = DMatrix::from_element(grid.nq(), grid.np(), T::zero());
    let mut areas = Vec::with_capacity(shells.len());
    for shell in shells {
        if shell.labels.len() != labels.len() {
            return Err(invalid(
                "shell label count differs from the number of momenta",
            ));
        }
        let profile = DMatrix::from_fn(grid.nq(), grid.np(), |i, j| {
            let mut v = mollifier(h[(i, j)] - shell.omega, epsilon);
            for (lab, &r) in labels.iter().zip(&shell.labels) {
                v *= mollifier(lab[(i, j)] - r, epsilon);
            }
            v
        });
        let area = match (model.hamiltonian, labels.is_empty()) {
            // area of {H ≤ E} is 2πE/ω, so the energy density of states is flat
            (ClassicalModel::Harmonic { omega }, true) => {
                T::lit(2.0) * T::PI() / omega * T::lit(normal_cdf((shell.omega / epsilon).as_f64()))
            }
            _ => grid.integrate(&profile)?,
        };
        if !(area.as_f64() > MIN_SHELL_AREA) {
            return Err(invalid(format!(
                "shell at omega={} has no classical phase-space support",
                shell.omega
            )));
        }
        values += profile * (shell.mass / area);
        areas.push(area);
    }
    let norm = grid.integrate(&values)?;
    Ok(StarDensity {
        density: PhaseFunction {
            values,
            imag_residual: T::zero(),
            norm: Some(norm),
            taper_fraction: TAPER_FRACTION,
        },
        epsilon,
        shell_areas: areas,
    })
}

/// Single unit-mass energy shell.
pub fn shell_density<T: Real>(
    grid: &PhaseGrid<T>,
    model: &ClassicalModel<T>,
    omega: T,
    epsilon: T,
) -> Result<StarDensity<T>> {
    build_classical_star_density(
        grid,
        &StarModel::new(*model),
        &[Shell {
            omega,
            labels: Vec::new(),
            mass: T::one(),
        }],
        epsilon,
    )
}

/// Shells from the bound and diagonal blocks of a state with a single label.
pub fn shells_from_state<T: Real>(rho: &StateFunctional<T>) -> Result<Vec<Shell<T>>> {
    let csco = rho.csco();
    if csco.degeneracy != 1 {
        return Err(invalid(
            "shell extraction expects a single degeneracy label",
        ));
    }
    let blocks = rho.blocks();
    let grid = rho.grid();
    let mut shells: Vec<Shell<T>> = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(&blocks.diag)
        .map(|((&omega, &w), d)| Shell {
            omega,
            labels: Vec::new(),
            mass: w * d[(0, 0)].re,
        })
        .collect();
    if let (Some(e0), Some(b)) = (csco.bound_energy, blocks.bound.as_ref()) {
        shells.insert(
            0,
            Shell {
                omega: e0,
                labels: Vec::new(),
                mass: b[(0, 0)].re,
            },
        );
    }
    Ok(shells)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub order: u32,
    pub value: f64,
    pub target: f64,
    pub bias: f64,
}

/// `∬ ρ f^n` against `center^n` for each requested order.
pub fn moment_check<T: Real, F: Fn(T, T) -> T + Sync>(
    star: &StarDensity<T>,
    grid: &PhaseGrid<T>,
    f: F,
    center: T,
    orders: &[u32],
) -> Result<Vec<MomentRow>> {
    let fv = grid.sample(f);
    orders
        .iter()
        .map(|&n| {
            let integrand = star
                .density
                .values
                .zip_map(&fv, |r, x| r * x.powi(n as i32));
            let value = grid.integrate(&integrand)?.as_f64();
            let target = center.as_f64().powi(n as i32);
            Ok(MomentRow {
                order: n,
                value,
                target,
                bias: (value - target).abs(),
            })
        })
        .collect()
}

impl<T: Real> StarDensity<T> {
    /// Mass carried where `|f - center| < width`.
    pub fn mass_within<F: Fn(T, T) -> T + Sync>(
        &self,
        grid: &PhaseGrid<T>,
        f: F,
        center: T,
        width: T,
    ) -> Result<T> {
        let fv = grid.sample(f);
        let masked = self.density.values.zip_map(&fv, |r, x| {
            if (x - center).abs() < width {
                r
            } else {
                T::zero()
            }
        });
        grid.integrate(&masked)
    }

    pub fn min_value(&self) -> T {
        self.density
            .values
            .iter()
            .fold(T::infinity(), |m, &v| m.min(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PhaseGrid<f64> {
        PhaseGrid::new(2.6, n, 2.6, n, 1.0).unwrap()
    }

    #[test]
    fn single_shell_is_concentrated_and_normalized() {
        let g = grid(801);
        let model = ClassicalModel::Harmonic { omega: 1.0 };
        let eps = 0.05;
        let star = shell_density(&g, &model, 2.0, eps).unwrap();
        assert!(star.min_value() >= 0.0);
        assert!((star.density.norm.unwrap() - 1.0).abs() < 1e-3);
        let near = star
            .mass_within(&g, |q, p| model.energy(q, p), 2.0, 3.0 * eps)
            .unwrap();
        assert!(near > 0.99, "{near}");
    }

    #[test]
    fn uniform_profile_has_unit_mass() {
        let g = grid(1201);
        let model = ClassicalModel::Harmonic { omega: 1.0 };
        let eps = 0.01;
        // trapezoid discretization of a uniform profile on [1, 2]
        let k = 101;
        let shells: Vec<Shell<f64>> = (0..k)
            .map(|i| {
                let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 } / (k - 1) as f64;
                Shell {
                    omega: 1.0 + i as f64 / (k - 1) as f64,
                    labels: vec![],
                    mass: w,
                }
            })
            .collect();
        let star = build_classical_star_density(&g, &StarModel::new(model), &shells, eps).unwrap();
        assert!(
            (star.density.norm.unwrap() - 1.0).abs() < 1e-3,
            "{:?}",
            star.density.norm
        );
    }

    #[test]
    fn exponential_profile_depends_on_energy_only() {
        let g = grid(401);
        let model = ClassicalModel::Harmonic { omega: 1.0 };
        let shells: Vec<Shell<f64>> = (0..40)
            .map(|i| {
                let om = 0.05 + 0.05 * i as f64;
                Shell {
                    omega: om,
                    labels: vec![],
                    mass: (-om).exp() * 0.05,
                }
            })
            .collect();
        let star = build_classical_star_density(&g, &StarModel::new(model), &shells, 0.05).unwrap();
        // bin by energy, compare spread within thin shells
        let mut bins: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
        for (i, &q) in g.q_nodes.iter().enumerate() {
            for (j, &p) in g.p_nodes.iter().enumerate() {
                let e = model.energy(q, p);
                if e < 1.5 {
                    bins.entry((e / 1e-4) as i64)
                        .or_default()
                        .push(star.density.values[(i, j)]);
                }
            }
        }
        for vals in bins.values().filter(|v| v.len() > 1) {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(var < 1e-6);
        }
    }

    #[test]
    fn moments_and_bias_scaling() {
        let g = grid(1001);
        let model = ClassicalModel::Harmonic { omega: 1.0 };
        let mut prev: Option<f64> = None;
        for eps in [0.08, 0.04, 0.02] {
            let star = shell_density(&g, &model, 2.0, eps).unwrap();
            let rows = moment_check(&star, &g, |q, p| model.energy(q, p), 2.0, &[0, 1, 2]).unwrap();
            assert!(rows[0].bias < 1e-3);
            assert!(rows[1].bias < 2.0 * eps);
            assert!(rows[2].bias < 2.0 * eps);
            // second moment bias is ε² for a Gaussian mollifier
            assert!((rows[2].bias - eps * eps).abs() < 1e-4, "{:?}", rows[2]);
            if let Some(b) = prev {
                assert!(rows[2].bias <= 0.5 * b);
            }
            prev = Some(rows[2].bias);
        }
    }

    #[test]
    fn labelled_shell_moments() {
        let g = grid(601);
        let h = ClassicalModel::Harmonic { omega: 1.0 };
        let energy_symbol = PolySymbol::monomial(0.5, 2, 0).plus(PolySymbol::monomial(0.5, 0, 2));
        let model = StarModel {
            hamiltonian: h,
            momenta: vec![energy_symbol.clone()],
        };
        let star = build_classical_star_density(
            &g,
            &model,
            &[Shell {
                omega: 1.5,
                labels: vec![1.5],
                mass: 1.0,
            }],
            0.05,
        )
        .unwrap();
        assert!((star.density.norm.unwrap() - 1.0).abs() < 1e-10);
        let rows = moment_check(&star, &g, |q, p| energy_symbol.eval(q, p), 1.5, &[1]).unwrap();
        assert!(rows[0].bias < 0.1);
        assert!(build_classical_star_density(
            &g,
            &model,
            &[Shell {
                omega: 1.5,
                labels: vec![],
                mass: 1.0
            }],
            0.05
        )
        .is_err());
    }

    #[test]
    fn invalid_epsilon_and_empty_support() {
        let g = grid(51);
        let model = ClassicalModel::Harmonic { omega: 1.0 };
        assert!(shell_density(&g, &model, 2.0, 0.0).is_err());
        assert!(shell_density(&g, &model, 2.0, -1.0).is_err());
        assert!(shell_density(&g, &model, -5.0, 0.1).is_err());
    }
}
