//! ħ-scaling of product-rule and Liouville defects.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fit::log_log_slope;
use crate::scalar::{phase, Real};

use super::{
    classical_mean, quantum_pair, wigner_observable, wigner_state, wigner_state_dp,
    wigner_state_dq, wigner_symbol, ClassicalModel, PhaseGrid, PositionKernel,
};

/// Relative size below which a defect counts as numerical noise.
pub const NOISE_FLOOR: f64 = 1e-7;

/// Center `(q0, p0)` and widths `(σ_q, σ_p)` of the mixed Gaussian probe state.
pub const PROBE_STATE: (f64, f64, f64, f64) = (0.4, 0.3, 0.5, 0.25);

/// Position/momentum box shared by every ħ in the suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuiteGrid {
    pub q_extent: f64,
    pub nq: usize,
    pub p_extent: f64,
    pub np: usize,
    /// Half-width of the box on which defects are measured.
    pub probe: f64,
}

impl Default for SuiteGrid {
    fn default() -> Self {
        Self {
            q_extent: 4.0,
            nq: 481,
            p_extent: 2.3,
            np: 93,
            probe: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingSeries {
    pub label: String,
    pub hbar: Vec<f64>,
    pub errors: Vec<f64>,
    /// Fitted exponent of `error ∝ ħ^k`; absent when the defect is at the noise floor.
    pub slope: Option<f64>,
    pub exact: bool,
}

impl ScalingSeries {
    /// Flags the series exact when every error sits below the noise floor
    /// relative to `scales`, otherwise fits the log-log slope.
    pub fn from_errors(label: String, hbar: Vec<f64>, errors: Vec<f64>, scales: &[f64]) -> Self {
        let exact = errors
            .iter()
            .zip(scales)
            .all(|(e, s)| *e <= NOISE_FLOOR * s.max(1.0));
        let slope = if exact {
            None
        } else {
            log_log_slope(&hbar, &errors).map(|f| f.slope)
        };
        Self {
            label,
            hbar,
            errors,
            slope,
            exact,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrespondenceReport {
    pub product_rule: ScalingSeries,
    pub liouville: Vec<ScalingSeries>,
    /// `|∬ρ^W H^W - Tr(ρH)|` per model.
    pub energy_gaps: Vec<ScalingSeries>,
}

/// Gaussian state with fixed position and momentum widths, centred at `(q0, p0)`.
pub fn mixed_gaussian_state<T: Real>(
    grid: &PhaseGrid<T>,
    q0: T,
    p0: T,
    sq: T,
    sp: T,
) -> Result<PositionKernel<T>> {
    if sq * sp < grid.hbar * T::lit(0.5) {
        return Err(invalid("Gaussian widths violate the uncertainty bound"));
    }
    let n = grid.nq();
    let two = T::lit(2.0);
    let mut m = crate::algebra::kernel::zeros(n);
    for a in 0..n {
        for b in 0..n {
            let (x, y) = (grid.q_nodes[a], grid.q_nodes[b]);
            let c = (x + y) / two - q0;
            let d = x - y;
            let amp = (-(c * c) / (two * sq * sq)
                - d * d * sp * sp / (two * grid.hbar * grid.hbar))
                .exp();
            m[(a, b)] = phase(p0 * d / grid.hbar) * amp;
        }
    }
    let tr = crate::algebra::kernel::trace(&m).re;
    Ok(PositionKernel {
        matrix: m.map(|z| z / tr),
        dq: grid.dq,
    })
}

fn max_in_box(grid: &PhaseGrid<f64>, f: impl Fn(usize, usize) -> f64, probe: f64) -> f64 {
    let mut worst = 0.0f64;
    for (i, q) in grid.q_nodes.iter().enumerate() {
        for (j, p) in grid.p_nodes.iter().enumerate() {
            if q.abs() <= probe && p.abs() <= probe {
                worst = worst.max(f(i, j).abs());
            }
        }
    }
    worst
}

/// Product-rule defect `‖(QP)^W - Q^W P^W‖`, Liouville defect
/// `‖{H^W, ρ^W} - ([H, ρ]/iħ)^W‖` and energy-mean gap for each model over an ħ series.
pub fn correspondence_suite(
    models: &[ClassicalModel<f64>],
    hbar_series: &[f64],
    grid_spec: SuiteGrid,
) -> Result<CorrespondenceReport> {
    if hbar_series.len() < 2 || hbar_series.iter().any(|&h| !(h > 0.0)) {
        return Err(invalid("ħ series needs at least two positive values"));
    }
    let base = PhaseGrid::<f64>::new(
        grid_spec.q_extent,
        grid_spec.nq,
        grid_spec.p_extent,
        grid_spec.np,
        1.0,
    )?;
    let (q0, p0, sq, sp) = PROBE_STATE;
    let mut product = Vec::new();
    let mut product_scale = Vec::new();
    let mut liou: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); models.len()];
    let mut gaps: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); models.len()];
    for &hbar in hbar_series {
        let g = base.with_hbar(hbar);
        if !g.aliasing_free() {
            return Err(invalid(format!("position grid too coarse for hbar={hbar}")));
        }
        let q = PositionKernel::position(&g);
        let p = PositionKernel::momentum(&g);
        let qp = wigner_symbol(&q.compose(&p), &g)?;
        let qw = wigner_observable(&q, &g)?;
        let pw = wigner_observable(&p, &g)?;
        product.push(max_in_box(
            &g,
            |i, j| (qp[(i, j)] - qw.values[(i, j)] * pw.values[(i, j)]).norm(),
            grid_spec.probe,
        ));
        product_scale.push(max_in_box(&g, |i, j| qp[(i, j)].norm(), grid_spec.probe));

        let rho = mixed_gaussian_state(&g, q0, p0, sq, sp)?;
        let w = wigner_state(&rho, &g)?;
        let wq = wigner_state_dq(&rho, &g)?;
        let wp = wigner_state_dp(&rho, &g)?;
        for (k, model) in models.iter().enumerate() {
            let h = model.hamiltonian(&g);
            let flow = wigner_state(&h.commutator_over_ihbar(&rho, hbar), &g)?;
            let poisson = |i: usize, j: usize| {
                model.dh_dq(g.q_nodes[i]) * wp.values[(i, j)]
                    - model.dh_dp(g.p_nodes[j]) * wq.values[(i, j)]
            };
            let probe = grid_spec.probe.max(1.5);
            let err = max_in_box(&g, |i, j| poisson(i, j) - flow.values[(i, j)], probe);
            let scale = max_in_box(&g, poisson, probe);
            liou[k].0.push(err);
            liou[k].1.push(scale);
            let classical = classical_mean(&w, &g.sample(|q, p| model.energy(q, p)), &g)?;
            let quantum = quantum_pair(&rho, &h)?;
            gaps[k].0.push((classical - quantum).abs());
            gaps[k].1.push(quantum.abs());
        }
    }
    let series = |label: String, (errs, scales): (Vec<f64>, Vec<f64>)| {
        ScalingSeries::from_errors(label, hbar_series.to_vec(), errs, &scales)
    };
    Ok(CorrespondenceReport {
        product_rule: ScalingSeries::from_errors(
            "(QP)^W - Q^W P^W".into(),
            hbar_series.to_vec(),
            product,
            &product_scale,
        ),
        liouville: models
            .iter()
            .zip(liou)
            .map(|(m, data)| series(format!("liouville {}", m.label()), data))
            .collect(),
        energy_gaps: models
            .iter()
            .zip(gaps)
            .map(|(m, data)| series(format!("energy mean {}", m.label()), data))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_gaussian_has_target_moments() {
        let g = PhaseGrid::<f64>::new(4.0, 321, 4.0, 161, 0.1).unwrap();
        let rho = mixed_gaussian_state(&g, 0.4, 0.3, 0.5, 0.5).unwrap();
        let w = wigner_state(&rho, &g).unwrap();
        assert!((w.norm.unwrap() - 1.0).abs() < 1e-8, "{:?}", w.norm);
        let mq = classical_mean(&w, &g.sample(|q, _| q), &g).unwrap();
        let mp = classical_mean(&w, &g.sample(|_, p| p), &g).unwrap();
        let vp = classical_mean(&w, &g.sample(|_, p| (p - 0.3) * (p - 0.3)), &g).unwrap();
        assert!((mq - 0.4).abs() < 1e-8);
        assert!((mp - 0.3).abs() < 1e-8);
        assert!((vp - 0.25).abs() < 1e-8);
        assert!(mixed_gaussian_state(&g, 0.0, 0.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn suite_scaling() {
        let models = [
            ClassicalModel::Harmonic { omega: 1.0 },
            ClassicalModel::Quartic {
                omega: 1.0,
                lambda: 1.0,
            },
        ];
        let report = correspondence_suite(
            &models,
            &[0.2, 0.1, 0.05],
            SuiteGrid {
                nq: 241,
                ..Default::default()
            },
        )
        .unwrap();
        let s = report.product_rule.slope.unwrap();
        assert!((s - 1.0).abs() < 0.1, "{:?}", report.product_rule);
        assert!(report.liouville[0].exact, "{:?}", report.liouville[0]);
        let s = report.liouville[1].slope.unwrap();
        assert!(s >= 0.9, "{:?}", report.liouville[1]);
        assert!(
            report.energy_gaps.iter().all(|g| g.exact),
            "{:?}",
            report.energy_gaps
        );
    }
}
