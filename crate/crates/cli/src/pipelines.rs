//! Module pipelines dispatched by scenario tag.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectral_lab::algebra::kernel::{identity, max_abs, scale};
use spectral_lab::algebra::random::{diagonal_state, random_observable};
use spectral_lab::algebra::{
    compose, diagonal_profile_csv, make_hamiltonian, make_identity, op_trace, pair, Blocks,
    HasBlocks, Kernel, Observable, SeparableTerm, StateFunctional,
};
use spectral_lab::classical_dynamics::{
    canonical_from_microcanonical, classical_thermal_functional, classification_warnings,
    equidistribution_test, ergodic_average_check, ergodic_gap_trend, FlowSpec,
};
use spectral_lab::error::LabError;
use spectral_lab::evolution::{asymptotic_state, decoherence_curve, evolve, mean_at};
use spectral_lab::localization::{
    gaussian_ensemble, localization_verdict, track_volumes, Identity, Rotation, Shear,
    TOTAL_DRIFT_LIMIT,
};
use spectral_lab::maxent_kms::{
    build_kms_state, canonical_density, constrained_competitors, correlator_csv, kms_correlators,
    log_partition, mean_energy, shannon_entropy, solve_thermal_params, strip_residual_csv,
    strip_rows, uniform_lattice, verify_kms, ThermalParams, ThermalTargets,
};
use spectral_lab::pointer_basis::{
    commutator_mean_residual, diagonalize_sections, pointer_observables,
};
use spectral_lab::spectral_model::SpectrumGrid;
use spectral_lab::wigner_bridge::{
    correspondence_suite, moment_check, oscillator_state, shell_density, wigner_state,
    ClassicalModel, PhaseGrid, SuiteGrid,
};
use spectral_lab::Result;

use crate::report::Report;
use crate::scenario::{FlowKind, Pipeline, Scenario, SpectralParams, ThermalTarget};

/// Runs the scenario's pipeline, filling `report`.
pub fn run(s: &Scenario, report: &mut Report) -> Result<()> {
    match s.pipeline {
        Pipeline::Decohere => decohere(s, report),
        Pipeline::Maxent => maxent(s, report).map(|_| ()),
        Pipeline::Kms => kms(s, report),
        Pipeline::Wigner => wigner(s, report),
        Pipeline::Ergodic => ergodic(s, report),
        Pipeline::Canonical => canonical(s, report),
        Pipeline::Localize => localize(s, report),
        Pipeline::FullChain => {
            let stages: [(&str, fn(&Scenario, &mut Report) -> Result<()>); 7] = [
                ("decohere", decohere),
                ("maxent", |s, r| maxent(s, r).map(|_| ())),
                ("kms", kms),
                ("wigner", wigner),
                ("ergodic", ergodic),
                ("canonical", canonical),
                ("localize", localize),
            ];
            for (name, stage) in stages {
                report.set_stage(name);
                stage(s, report)?;
            }
            report.set_stage("");
            Ok(())
        }
    }
}

fn spectral(s: &Scenario) -> &SpectralParams {
    s.spectral.as_ref().expect("validated scenario has a grid")
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Diagonal `e^{-ω/5}` part plus the rank-one coherence `g(ω)g(ω′)·Id/M`.
pub fn coherent_state(
    grid: Arc<SpectrumGrid<f64>>,
    csco: spectral_lab::spectral_model::CscoSpec<f64>,
    center: f64,
    width: f64,
) -> Result<StateFunctional<f64>> {
    let m = csco.degeneracy;
    let base = diagonal_state(grid.clone(), csco, |w| (-w / 5.0).exp())?;
    let mut blocks = base.into_blocks();
    let g: Vec<Complex<f64>> = grid
        .nodes()
        .iter()
        .map(|&w| Complex::new((-(w - center).powi(2) / (2.0 * width * width)).exp(), 0.0))
        .collect();
    let coeff = scale(&identity(m), Complex::new(1.0 / m as f64, 0.0));
    blocks.full = Kernel::Separable(vec![SeparableTerm::scalar(&g, &g, &coeff)]);
    StateFunctional::new(grid, csco, blocks)
}

/// Observable whose kernel is `1` between every pair of energies.
pub fn unit_kernel_observable(
    grid: Arc<SpectrumGrid<f64>>,
    csco: spectral_lab::spectral_model::CscoSpec<f64>,
) -> Result<Observable<f64>> {
    let m = csco.degeneracy;
    let mut blocks = Blocks::zero(grid.len(), m, csco.has_bound());
    let ones = vec![Complex::new(1.0, 0.0); grid.len()];
    blocks.full = Kernel::Separable(vec![SeparableTerm::scalar(&ones, &ones, &identity(m))]);
    Observable::new(grid, csco, blocks)
}

/// Separable kernel `g(ω) conj g(ω′)` with `g = e^{-(ω-c)²/2σ²} e^{iνω}`.
pub fn gaussian_kernel(
    grid: Arc<SpectrumGrid<f64>>,
    center: f64,
    sigma: f64,
    freq: f64,
) -> Result<Observable<f64>> {
    let g: Vec<Complex<f64>> = grid
        .nodes()
        .iter()
        .map(|&w| {
            Complex::from_polar(
                (-(w - center).powi(2) / (2.0 * sigma * sigma)).exp(),
                freq * w,
            )
        })
        .collect();
    let gc: Vec<Complex<f64>> = g.iter().map(|z| z.conj()).collect();
    let mut blocks = Blocks::zero(grid.len(), 1, false);
    blocks.full = Kernel::Separable(vec![SeparableTerm::scalar(&g, &gc, &identity(1))]);
    Observable::new(
        grid,
        spectral_lab::spectral_model::CscoSpec::continuum(1),
        blocks,
    )
}

fn decohere(s: &Scenario, report: &mut Report) -> Result<()> {
    let sp = spectral(s);
    let ev = s.evolution.as_ref().expect("validated");
    let grid = Arc::new(sp.grid());
    let rho = coherent_state(grid.clone(), sp.csco, ev.center, ev.width)?;
    let obs = unit_kernel_observable(grid.clone(), sp.csco)?;
    let curve = decoherence_curve(&rho, &obs, &ev.times, ev.revival_override)?;
    if curve.beyond_revival {
        report.warn("samples beyond half the revival horizon were requested via override");
    }

    let mut diag_drift = 0.0f64;
    let mut norm_drift = 0.0f64;
    let id = make_identity(grid.clone(), sp.csco);
    let n0 = pair(&rho, &id)?;
    for &t in &ev.times {
        let moved = evolve(&rho, t);
        for (a, b) in moved.blocks().diag.iter().zip(&rho.blocks().diag) {
            diag_drift = diag_drift.max(max_abs(&(a - b)));
        }
        norm_drift = norm_drift.max((mean_at(&rho, &id, t)? - n0).abs());
    }
    report.invariant("diagonal_drift", diag_drift, 0.0, true);
    report.invariant("normalization_drift", norm_drift, 0.0, true);

    let r0 = curve.residuals[0];
    let mut csv = String::from("t,mean,residual,gaussian_envelope\n");
    for ((t, m), r) in curve.times.iter().zip(&curve.means).zip(&curve.residuals) {
        let env = r0 * (-(ev.width * t).powi(2)).exp();
        let _ = writeln!(csv, "{t:.12e},{m:.12e},{r:.12e},{env:.12e}");
    }
    report.csv("decoherence.csv", csv);
    report.metric("asymptotic_mean", curve.asymptotic_mean);
    report.metric("revival_horizon", curve.revival_horizon);
    report.metric(
        "final_residual_ratio",
        curve.residuals.last().copied().unwrap_or(0.0) / r0.max(f64::MIN_POSITIVE),
    );
    report.metric("fitted_decay", &curve.fitted_decay);

    // pointer basis of the asymptotic state
    let star = asymptotic_state(&rho);
    let basis = diagonalize_sections(&star)?;
    let pr = basis.report(grid.nodes(), sp.csco.bound_energy, &star);
    report.invariant(
        "pointer_unitarity_residual",
        pr.max_unitarity_residual,
        1e-10,
        true,
    );
    report.invariant(
        "pointer_offdiagonal_residual",
        pr.max_offdiagonal_residual,
        1e-10,
        true,
    );
    let pointers = pointer_observables(&basis, grid.clone(), sp.csco)?;
    let mut r = rng(s.seed, 1);
    let testset: Vec<Observable<f64>> = (0..20)
        .map(|_| random_observable(grid.clone(), sp.csco, &mut r, 2))
        .collect();
    let mut comm = 0.0f64;
    for p in &pointers {
        comm = comm.max(commutator_mean_residual(&star, p, &testset)?);
    }
    report.invariant("pointer_commutator_mean_residual", comm, 1e-8, true);
    if !pr.degenerate_nodes.is_empty() {
        report.warn(format!(
            "{} nodes have near-degenerate pointer eigenvalues",
            pr.degenerate_nodes.len()
        ));
    }
    let mut pcsv = String::from("omega,r,eigenvalue,overlap\n");
    for node in &pr.nodes {
        for (k, e) in node.eigenvalues.iter().enumerate() {
            let _ = writeln!(
                pcsv,
                "{:.12e},{k},{e:.12e},{:.12e}",
                node.omega, node.overlap_score
            );
        }
    }
    report.csv("pointer.csv", pcsv);
    Ok(())
}

fn thermal_params(s: &Scenario, grid: &SpectrumGrid<f64>) -> Result<ThermalParams<f64>> {
    let sp = spectral(s);
    let th = s.thermal.as_ref().expect("validated");
    let mut params = match th.target {
        ThermalTarget::Energy(e) => {
            solve_thermal_params(grid, &sp.csco, &ThermalTargets::energy(e))?
        }
        ThermalTarget::Beta(b) => ThermalParams {
            beta: b,
            z: 1.0,
            gammas: Vec::new(),
            truncation_bound: grid.truncation_bound(b),
        },
    };
    if !(params.beta > 0.0) {
        return Err(LabError::InfeasibleTarget(format!(
            "solved beta = {} is not positive",
            params.beta
        )));
    }
    params.gammas = th.gammas.clone();
    params.z = log_partition(grid, &sp.csco, params.beta, &params.gammas).exp();
    Ok(params)
}

fn maxent(s: &Scenario, report: &mut Report) -> Result<ThermalParams<f64>> {
    let sp = spectral(s);
    let th = s.thermal.as_ref().expect("validated");
    let grid = Arc::new(sp.grid());
    let params = thermal_params(s, &grid)?;
    let state = build_kms_state(grid.clone(), sp.csco, &params)?;
    let id = make_identity(grid.clone(), sp.csco);
    let h = make_hamiltonian(grid.clone(), sp.csco);
    let energy = pair(&state, &h)?;
    report.invariant(
        "normalization_residual",
        (pair(&state, &id)? - 1.0).abs(),
        1e-12,
        true,
    );
    if let ThermalTarget::Energy(e) = th.target {
        report.invariant(
            "energy_moment_residual",
            (energy - e).abs() / e.abs().max(1.0),
            1e-8,
            true,
        );
    }
    // d ln Z/dβ = -⟨H⟩
    let hstep = 1e-5 * params.beta;
    let dlnz = (log_partition(&grid, &sp.csco, params.beta + hstep, &params.gammas)
        - log_partition(&grid, &sp.csco, params.beta - hstep, &params.gammas))
        / (2.0 * hstep);
    let mean = mean_energy(&grid, &sp.csco, params.beta);
    report.invariant(
        "log_partition_gradient_residual",
        (dlnz + mean).abs() / mean.abs().max(1e-300),
        1e-6,
        true,
    );

    if sp.csco.degeneracy == 1 && !sp.csco.has_bound() {
        let base = canonical_density(&grid, params.beta);
        let h0 = shannon_entropy(&grid, &base)?;
        let mut r = rng(s.seed, 2);
        let comps = constrained_competitors(&grid, &base, th.competitors, 0.5, &mut r);
        let mut best = f64::NEG_INFINITY;
        for c in &comps {
            best = best.max(shannon_entropy(&grid, c)?);
        }
        report.invariant("entropy_excess_of_best_competitor", best - h0, 0.0, true);
        report.metric("entropy", h0);
    }
    report.metric("beta", params.beta);
    report.metric("log_z", params.z.ln());
    report.metric("gammas", &params.gammas);
    report.metric("mean_energy", energy);
    report.metric("truncation_bound", params.truncation_bound);
    report.csv("thermal_density.csv", diagonal_profile_csv(&state));
    Ok(params)
}

fn kms(s: &Scenario, report: &mut Report) -> Result<()> {
    let sp = spectral(s);
    let k = s.kms.as_ref().expect("validated");
    let grid = Arc::new(sp.grid());
    let params = thermal_params(s, &grid)?;
    let wmax = sp.omega_max;
    let a = gaussian_kernel(grid.clone(), 0.15 * wmax, 0.05 * wmax, 0.5)?;
    let b = gaussian_kernel(grid.clone(), 0.2 * wmax, 0.04 * wmax, -0.4)?;
    let lattice = |steps: usize, rows: usize| {
        kms_correlators(
            &a,
            &b,
            &params,
            &uniform_lattice(0.0, k.t_max, steps),
            &strip_rows(params.beta, rows),
        )
    };
    let coarse = lattice(k.t_steps, k.strip_rows)?;
    let fine = lattice(2 * k.t_steps, 2 * k.strip_rows + 1)?;
    let rc = verify_kms(&coarse, &params)?;
    let rf = verify_kms(&fine, &params)?;
    report.invariant("boundary_residual", rc.boundary_residual, 1e-10, true);
    report.invariant(
        "boundary_residual_refined",
        rf.boundary_residual,
        1e-10,
        true,
    );
    let ratio = rc.analyticity_abs / rf.analyticity_abs;
    report.invariant(
        "cr_refinement_ratio_deviation",
        (ratio - 4.0).abs(),
        0.5,
        false,
    );
    report.metric("analyticity_residual", rc.analyticity_residual);
    report.metric("cr_refinement_ratio", ratio);
    report.metric("beta", params.beta);

    let mut r = rng(s.seed, 3);
    let mut cyc = 0.0f64;
    let mut boundary = 0.0f64;
    for _ in 0..k.random_pairs {
        let x = random_observable(grid.clone(), sp.csco, &mut r, 2);
        let y = random_observable(grid.clone(), sp.csco, &mut r, 2);
        let d = op_trace(&compose(&x, &y)?) - op_trace(&compose(&y, &x)?);
        cyc = cyc.max(d.norm());
        let corr = kms_correlators(
            &x,
            &y,
            &params,
            &uniform_lattice(-1.0, 1.0, 8),
            &strip_rows(params.beta, 3),
        )?;
        boundary = boundary.max(verify_kms(&corr, &params)?.boundary_residual);
    }
    report.invariant("cyclic_trace_residual", cyc, 1e-10, true);
    report.invariant("random_pair_boundary_residual", boundary, 1e-10, true);
    report.csv("correlators.csv", correlator_csv(&coarse));
    report.csv("strip_residual.csv", strip_residual_csv(&coarse)?);
    Ok(())
}

fn wigner(s: &Scenario, report: &mut Report) -> Result<()> {
    let w = s.wigner.as_ref().expect("validated");
    let hbar = w.hbar_eff[0];
    let g = PhaseGrid::<f64>::new(w.q_extent, w.nq, w.p_extent, w.np, hbar)?;
    let ground = oscillator_state(&g, 0)?;
    let wg = wigner_state(&ground, &g)?;
    report.invariant(
        "state_hermiticity_defect",
        ground.hermiticity_defect(),
        1e-12,
        true,
    );
    report.invariant("ground_imaginary_residual", wg.imag_residual, 1e-10, true);
    let mut err = 0.0f64;
    for (i, q) in g.q_nodes.iter().enumerate() {
        for (j, p) in g.p_nodes.iter().enumerate() {
            let exact = (-(q * q + p * p) / hbar).exp() / (std::f64::consts::PI * hbar);
            err = err.max((wg.values[(i, j)] - exact).abs());
        }
    }
    report.invariant("ground_state_error", err, 1e-6, false);
    report.invariant(
        "ground_state_norm_residual",
        (wg.norm.unwrap_or(f64::NAN) - 1.0).abs(),
        1e-6,
        false,
    );
    let origin = |nodes: &[f64]| nodes.iter().position(|x| x.abs() < 1e-12);
    if let (Some(i0), Some(j0)) = (origin(&g.q_nodes), origin(&g.p_nodes)) {
        let we = wigner_state(&oscillator_state(&g, 1)?, &g)?;
        let target = -1.0 / (std::f64::consts::PI * hbar);
        report.invariant(
            "excited_origin_error",
            (we.values[(i0, j0)] - target).abs(),
            1e-4,
            false,
        );
    } else {
        report.warn("grid has no node at the origin; excited-state check skipped");
    }
    report.csv("ground_state.csv", wg.to_csv(&g));

    if w.hbar_eff.len() >= 2 {
        let models = [
            ClassicalModel::Harmonic { omega: 1.0 },
            ClassicalModel::Quartic {
                omega: 1.0,
                lambda: w.lambda,
            },
        ];
        let suite = correspondence_suite(
            &models,
            &w.hbar_eff,
            SuiteGrid {
                q_extent: w.q_extent,
                nq: w.nq,
                p_extent: w.p_extent,
                np: w.np,
                probe: w.probe,
            },
        )?;
        let mut csv = String::from("series,hbar,error\n");
        let all = std::iter::once(&suite.product_rule)
            .chain(&suite.liouville)
            .chain(&suite.energy_gaps);
        for series in all {
            for (h, e) in series.hbar.iter().zip(&series.errors) {
                let _ = writeln!(csv, "{},{h:.12e},{e:.12e}", series.label);
            }
        }
        report.csv("scaling.csv", csv);
        let slope = suite.product_rule.slope.unwrap_or(f64::NAN);
        report.invariant(
            "product_rule_slope_deviation",
            (slope - 1.0).abs(),
            0.1,
            false,
        );
        report.metric("product_rule_slope", slope);
        let harmonic = &suite.liouville[0];
        report.invariant(
            "liouville_quadratic_max_error",
            harmonic.errors.iter().cloned().fold(0.0, f64::max),
            1e-8,
            false,
        );
        report.metric("liouville_anharmonic_slope", suite.liouville[1].slope);
        report.metric(
            "energy_gap_exact",
            suite.energy_gaps.iter().all(|s| s.exact),
        );
    }

    // mollified shell of the unit oscillator
    let extent = 1.3 * (2.0 * w.shell_omega).sqrt();
    let sg = PhaseGrid::<f64>::new(extent, w.nq, extent, w.nq, hbar)?;
    let model = ClassicalModel::Harmonic { omega: 1.0 };
    let star = shell_density(&sg, &model, w.shell_omega, w.epsilon)?;
    report.invariant("shell_negativity", (-star.min_value()).max(0.0), 0.0, true);
    report.invariant(
        "shell_norm_residual",
        (star.density.norm.unwrap_or(f64::NAN) - 1.0).abs(),
        1e-3,
        false,
    );
    let rows = moment_check(
        &star,
        &sg,
        |q, p| model.energy(q, p),
        w.shell_omega,
        &[1, 2],
    )?;
    let mut mcsv = String::from("order,value,target,bias\n");
    for row in &rows {
        let _ = writeln!(
            mcsv,
            "{},{:.12e},{:.12e},{:.12e}",
            row.order, row.value, row.target, row.bias
        );
    }
    report.invariant(
        "shell_moment_bias",
        rows.iter().map(|r| r.bias).fold(0.0, f64::max),
        2.0 * w.epsilon,
        false,
    );
    report.csv("shell_moments.csv", mcsv);
    Ok(())
}

fn ergodic(s: &Scenario, report: &mut Report) -> Result<()> {
    let f = s.flow.as_ref().expect("validated");
    let e = s.ergodic.as_ref().expect("validated");
    let spec = FlowSpec::new(
        f.actions.clone(),
        f.frequencies.clone(),
        f.angles.clone(),
        f.classification.clone(),
    )?;
    let weyl = equidistribution_test(&spec, &e.modes, e.horizon, e.samples)?;
    let excess = weyl
        .weyl_averages
        .iter()
        .map(|r| {
            if r.resonant {
                (r.average - 1.0).abs()
            } else {
                (r.average - r.bound).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    report.invariant("weyl_bound_excess", excess, 1e-9, true);
    report.csv("weyl.csv", weyl.to_csv());
    for w in &weyl.warnings {
        report.warn(w.clone());
    }
    for w in classification_warnings(&spec, e.horizon, e.samples.min(100_000)) {
        report.warn(w);
    }

    let product = |a: &[f64]| a.iter().map(|x| x.cos()).product::<f64>();
    let check = ergodic_average_check(&spec, &product, e.horizon, e.samples, e.space_nodes)?;
    report.metric("time_average", check.time_avg);
    report.metric("space_average", check.space_avg);
    report.metric("average_gap", check.gap);
    let lo = (e.horizon / 100.0).ln();
    let hi = e.horizon.ln();
    let n = e.trend_points;
    let horizons: Vec<f64> = (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect();
    let per_unit = ((e.samples as f64 / e.horizon).ceil() as usize).max(20);
    let trend = ergodic_gap_trend(&spec, &product, &horizons, per_unit, e.space_nodes)?;
    report.metric("gap_slope", trend.slope);
    let mut csv = String::from("horizon,gap,envelope\n");
    for ((h, g), env) in trend.horizons.iter().zip(&trend.gaps).zip(&trend.envelope) {
        let _ = writeln!(csv, "{h:.12e},{g:.12e},{env:.12e}");
    }
    report.csv("gap_trend.csv", csv);
    Ok(())
}

fn canonical(s: &Scenario, report: &mut Report) -> Result<()> {
    let c = s.canonical.as_ref().expect("validated");
    let fit = canonical_from_microcanonical(c.nu, c.e_total, c.points)?;
    report.invariant(
        "marginal_normalization_residual",
        (fit.normalization - 1.0).abs(),
        1e-6,
        true,
    );
    report.metric("beta", fit.beta);
    report.metric("fit_window", fit.fit_window);
    report.invariant(
        "beta_relative_deviation",
        (fit.beta * c.e_total / c.nu - 1.0).abs(),
        0.05,
        false,
    );
    let mut csv = String::from("energy,marginal\n");
    for (e, p) in fit.energies.iter().zip(&fit.marginal) {
        let _ = writeln!(csv, "{e:.12e},{p:.12e}");
    }
    report.csv("bath_marginal.csv", csv);

    // equipartition ⟨H⟩ = 1/β for the oscillator at the fitted temperature
    let model = ClassicalModel::Harmonic { omega: c.omega };
    let reach = (50.0 / fit.beta).sqrt();
    let g = PhaseGrid::<f64>::new(reach / c.omega, c.nodes, reach, c.nodes, 1.0)?;
    let h = g.sample(|q, p| model.energy(q, p));
    let mean = classical_thermal_functional(&h, fit.beta, &[], &model, &g)?;
    report.invariant(
        "equipartition_residual",
        (mean - 1.0 / fit.beta).abs(),
        1e-6,
        true,
    );
    report.metric("classical_mean_energy", mean);
    Ok(())
}

fn localize(s: &Scenario, report: &mut Report) -> Result<()> {
    let l = s.localization.as_ref().expect("validated");
    let dim = l.stds.len();
    let ens = gaussian_ensemble(l.ensemble_size, &vec![0.0; dim], &l.stds, l.seed)?;
    let times: Vec<f64> = (0..=l.steps)
        .map(|i| l.t_max * i as f64 / l.steps as f64)
        .collect();
    let track = match l.flow {
        FlowKind::Identity => track_volumes(&ens, &Identity { dim }, &l.observed, &times, l.band)?,
        FlowKind::Shear => {
            track_volumes(&ens, &Shear { pairs: dim / 2 }, &l.observed, &times, l.band)?
        }
        FlowKind::Rotation => track_volumes(
            &ens,
            &Rotation {
                pairs: dim / 2,
                omega: l.omega,
            },
            &l.observed,
            &times,
            l.band,
        )?,
    };
    report.invariant(
        "total_volume_drift",
        track.total_drift,
        TOTAL_DRIFT_LIMIT,
        true,
    );
    report.invariant(
        "product_ratio_out_of_band",
        track.out_of_band.len() as f64,
        0.0,
        false,
    );
    if track.pseudo_volume {
        report.warn("rank-deficient covariance; pseudo-volume used");
    }
    let verdict = localization_verdict(&track, 0.95)?;
    report.metric("localizes", verdict.localizes);
    report.metric("observed_slope", verdict.observed_slope);
    report.metric("unobserved_slope", verdict.unobserved_slope);
    report.metric("observed_slope_interval", verdict.observed_interval);
    report.csv("volumes.csv", track.to_csv());
    Ok(())
}
