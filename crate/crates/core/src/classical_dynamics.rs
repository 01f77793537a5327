//! Integrable action–angle flows, equidistribution diagnostics,
//! microcanonical and canonical classical equilibria.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::fit::{log_log_slope, weighted_linear_fit, LinearFit};
use crate::linalg::EigenReal;
use crate::scalar::{phase, Real};
use crate::wigner_bridge::{
    classical_grand_density, quantum_pair, quantum_thermal_state, ClassicalModel, PhaseGrid,
    PolySymbol, ScalingSeries,
};

/// Frequencies below this in `|n·ϖ|` (for `|n| ≤ 6`) trigger a resonance warning.
pub const RESONANCE_TOLERANCE: f64 = 1e-6;

/// Frequency, either a float or one of the symbolic irrationals.
///
/// Stored as `a + b√2 + c√3 + d√5` so integer combinations of symbolic
/// values are tested for resonance exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Frequency {
    Value(f64),
    Sqrt2,
    Sqrt3,
    Golden,
}

impl Frequency {
    fn components(self) -> [f64; 4] {
        match self {
            Self::Value(x) => [x, 0.0, 0.0, 0.0],
            Self::Sqrt2 => [0.0, 1.0, 0.0, 0.0],
            Self::Sqrt3 => [0.0, 0.0, 1.0, 0.0],
            Self::Golden => [0.5, 0.0, 0.0, 0.5],
        }
    }

    pub fn value(self) -> f64 {
        let [a, b, c, d] = self.components();
        a + b * 2f64.sqrt() + c * 3f64.sqrt() + d * 5f64.sqrt()
    }

    fn is_symbolic(self) -> bool {
        !matches!(self, Self::Value(_))
    }
}

impl FromStr for Frequency {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sqrt2" | "√2" => Ok(Self::Sqrt2),
            "sqrt3" | "√3" => Ok(Self::Sqrt3),
            "golden" | "phi" | "φ" => Ok(Self::Golden),
            other => other
                .parse::<f64>()
                .map(Self::Value)
                .map_err(|_| invalid(format!("unrecognized frequency `{s}`"))),
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Value(x) => write!(f, "{x}"),
            Self::Sqrt2 => f.write_str("sqrt2"),
            Self::Sqrt3 => f.write_str("sqrt3"),
            Self::Golden => f.write_str("golden"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    Isolating,
    NonIsolating,
}

impl FromStr for ConstantKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "isolating" | "i" => Ok(Self::Isolating),
            "non-isolating" | "non_isolating" | "nonisolating" | "n" => Ok(Self::NonIsolating),
            _ => Err(invalid(format!("unrecognized constant kind `{s}`"))),
        }
    }
}

/// Integrable flow on `N + 1` action–angle pairs with constant frequencies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowSpec<T> {
    pub actions: Vec<T>,
    pub frequencies: Vec<Frequency>,
    pub initial_angles: Vec<T>,
    pub classification: Vec<ConstantKind>,
}

impl<T: Real> FlowSpec<T> {
    pub fn new(
        actions: Vec<T>,
        frequencies: Vec<Frequency>,
        initial_angles: Vec<T>,
        classification: Vec<ConstantKind>,
    ) -> Result<Self> {
        let n = frequencies.len();
        if n == 0 {
            return Err(invalid("flow needs at least one degree of freedom"));
        }
        if actions.len() != n || initial_angles.len() != n || classification.len() != n {
            return Err(invalid(
                "actions, angles and classification must match the number of frequencies",
            ));
        }
        if classification.first() != Some(&ConstantKind::Isolating) {
            return Err(invalid("the Hamiltonian action must be declared isolating"));
        }
        let two_pi = T::lit(2.0) * T::PI();
        let initial_angles = initial_angles
            .into_iter()
            .map(|a| wrap(a, two_pi))
            .collect();
        Ok(Self {
            actions,
            frequencies,
            initial_angles,
            classification,
        })
    }

    /// Flow with zero initial angles and the first constant isolating, the rest non-isolating.
    pub fn simple(frequencies: Vec<Frequency>) -> Result<Self> {
        let n = frequencies.len();
        let mut classification = vec![ConstantKind::NonIsolating; n];
        if n > 0 {
            classification[0] = ConstantKind::Isolating;
        }
        Self::new(
            vec![T::one(); n],
            frequencies,
            vec![T::zero(); n],
            classification,
        )
    }

    pub fn n_dof(&self) -> usize {
        self.frequencies.len()
    }

    /// `(A + 1, N - A)`.
    pub fn counts(&self) -> (usize, usize) {
        let iso = self
            .classification
            .iter()
            .filter(|k| **k == ConstantKind::Isolating)
            .count();
        (iso, self.n_dof() - iso)
    }

    pub fn isolating_actions(&self) -> Vec<T> {
        self.actions
            .iter()
            .zip(&self.classification)
            .filter(|(_, k)| **k == ConstantKind::Isolating)
            .map(|(a, _)| *a)
            .collect()
    }

    fn omega(&self) -> Vec<T> {
        self.frequencies.iter().map(|f| T::lit(f.value())).collect()
    }

    /// `n·ϖ`, exactly zero for resonant combinations of symbolic frequencies.
    pub fn mode_frequency(&self, mode: &[i64]) -> Result<f64> {
        if mode.len() != self.n_dof() {
            return Err(invalid(
                "mode vector length differs from the number of angles",
            ));
        }
        let mut comp = [0.0; 4];
        for (&n, f) in mode.iter().zip(&self.frequencies) {
            for (c, v) in comp.iter_mut().zip(f.components()) {
                *c += n as f64 * v;
            }
        }
        if comp.iter().all(|c| c.abs() < 1e-12) {
            return Ok(0.0);
        }
        Ok(comp[0] + comp[1] * 2f64.sqrt() + comp[2] * 3f64.sqrt() + comp[3] * 5f64.sqrt())
    }

    /// Warnings for float frequencies with `|n·ϖ| < 1e-6` at `|n|_∞ ≤ 6`.
    pub fn resonance_warnings(&self) -> Vec<String> {
        if self.frequencies.iter().all(|f| f.is_symbolic()) || self.n_dof() > 4 {
            return Vec::new();
        }
        let mut out = Vec::new();
        let n = self.n_dof();
        let mut mode = vec![-6i64; n];
        loop {
            let nonzero = mode.iter().any(|&m| m != 0);
            // report each ± pair once
            let canonical = mode.iter().find(|&&m| m != 0).is_some_and(|&m| m > 0);
            if nonzero && canonical {
                if let Ok(k) = self.mode_frequency(&mode) {
                    if k != 0.0 && k.abs() < RESONANCE_TOLERANCE {
                        out.push(format!("near resonance: n={mode:?}, n·ϖ={k:e}"));
                    }
                }
            }
            let mut i = 0;
            while i < n {
                mode[i] += 1;
                if mode[i] <= 6 {
                    break;
                }
                mode[i] = -6;
                i += 1;
            }
            if i == n {
                break;
            }
        }
        out
    }
}

fn wrap<T: Real>(a: T, period: T) -> T {
    let r = a % period;
    if r < T::zero() {
        r + period
    } else {
        r
    }
}

/// `α_j(t) = ϖ_j t + α_j(0) mod 2π`.
pub fn integrate_flow<T: Real>(spec: &FlowSpec<T>, t: T) -> Vec<T> {
    let two_pi = T::lit(2.0) * T::PI();
    spec.frequencies
        .iter()
        .zip(&spec.initial_angles)
        .map(|(f, &a0)| wrap(T::lit(f.value()) * t + a0, two_pi))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylRow {
    pub mode: Vec<i64>,
    pub mode_frequency: f64,
    /// `|(1/T)∫₀ᵀ e^{i n·α(t)} dt|`.
    pub average: f64,
    /// `2/(T|n·ϖ|) + 2π/samples`, infinite for resonant modes.
    pub bound: f64,
    pub resonant: bool,
}

impl WeylRow {
    pub fn within_bound(&self) -> bool {
        if self.resonant {
            (self.average - 1.0).abs() < 1e-9
        } else {
            self.average <= self.bound
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErgodicReport {
    pub horizon: f64,
    pub samples: usize,
    pub weyl_averages: Vec<WeylRow>,
    pub warnings: Vec<String>,
}

impl ErgodicReport {
    pub fn all_within_bound(&self) -> bool {
        self.weyl_averages.iter().all(WeylRow::within_bound)
    }

    /// CSV rows `mode,weyl_avg,bound`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,weyl_avg,bound\n");
        for r in &self.weyl_averages {
            let mode: Vec<String> = r.mode.iter().map(|m| m.to_string()).collect();
            out.push_str(&format!(
                "{},{:.12e},{:.12e}\n",
                mode.join(" "),
                r.average,
                r.bound
            ));
        }
        out
    }
}

/// Trapezoid time average of `g(t)` over `[0, T]` with `samples` intervals.
fn time_average<T: Real, G: Fn(T) -> Complex<T> + Sync>(
    horizon: T,
    samples: usize,
    g: G,
) -> Complex<T> {
    let h = horizon / T::from_usize_lossy(samples);
    let chunk = 4096;
    let n = samples + 1;
    // fixed chunks summed in order keep the result independent of scheduling
    let partial: Vec<Complex<T>> = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            (c * chunk..((c + 1) * chunk).min(n))
                .map(|k| {
                    let w = if k == 0 || k == samples {
                        T::lit(0.5)
                    } else {
                        T::one()
                    };
                    g(h * T::from_usize_lossy(k)) * w
                })
                .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
        })
        .collect();
    let sum = partial
        .into_iter()
        .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b);
    sum * h / horizon
}

/// Time averages of the torus harmonics `e^{i n·α}` along the flow.
pub fn equidistribution_test<T: Real>(
    spec: &FlowSpec<T>,
    modes: &[Vec<i64>],
    horizon: T,
    samples: usize,
) -> Result<ErgodicReport> {
    if !(horizon > T::zero()) || samples < 2 {
        return Err(invalid(
            "equidistribution needs T > 0 and at least 2 samples",
        ));
    }
    let omega = spec.omega();
    let rows = modes
        .iter()
        .map(|mode| {
            let k = spec.mode_frequency(mode)?;
            let kt: T = mode
                .iter()
                .zip(&omega)
                .map(|(&n, &w)| T::lit(n as f64) * w)
                .sum();
            let phase0: T = mode
                .iter()
                .zip(&spec.initial_angles)
                .map(|(&n, &a)| T::lit(n as f64) * a)
                .sum();
            let resonant = k == 0.0;
            let avg = if resonant {
                phase(phase0)
            } else {
                time_average(horizon, samples, |t| phase(kt * t + phase0))
            };
            let bound = if resonant {
                f64::INFINITY
            } else {
                2.0 / (horizon.as_f64() * k.abs()) + 2.0 * std::f64::consts::PI / samples as f64
            };
            Ok(WeylRow {
                mode: mode.clone(),
                mode_frequency: k,
                average: avg.norm().as_f64(),
                bound,
                resonant,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErgodicReport {
        horizon: horizon.as_f64(),
        samples,
        weyl_averages: rows,
        warnings: spec.resonance_warnings(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ErgodicCheck {
    pub time_avg: f64,
    pub space_avg: f64,
    pub gap: f64,
}

/// Uniform average of `f` over the torus by a tensor-product rule with
/// `nodes` points per angle (spectrally accurate for smooth periodic `f`).
pub fn torus_average<T: Real, F: Fn(&[T]) -> T + Sync>(dim: usize, nodes: usize, f: &F) -> T {
    let total = nodes.pow(dim as u32);
    let h = T::lit(2.0) * T::PI() / T::from_usize_lossy(nodes);
    let chunk = 4096;
    let partial: Vec<T> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            (c * chunk..((c + 1) * chunk).min(total))
                .map(|mut idx| {
                    let mut alpha = Vec::with_capacity(dim);
                    for _ in 0..dim {
                        alpha.push(h * T::from_usize_lossy(idx % nodes));
                        idx /= nodes;
                    }
                    f(&alpha)
                })
                .fold(T::zero(), |a, b| a + b)
        })
        .collect();
    let sum = partial.into_iter().fold(T::zero(), |a, b| a + b);
    sum / T::from_usize_lossy(total)
}

/// Time average along the flow against the uniform space average on the torus.
pub fn ergodic_average_check<T: Real, F: Fn(&[T]) -> T + Sync>(
    spec: &FlowSpec<T>,
    f: &F,
    horizon: T,
    samples: usize,
    space_nodes: usize,
) -> Result<ErgodicCheck> {
    if !(horizon > T::zero()) || samples < 2 || space_nodes < 2 {
        return Err(invalid("ergodic check needs T > 0 and at least 2 samples"));
    }
    let time_avg = time_average(horizon, samples, |t| {
        Complex::new(f(&integrate_flow(spec, t)), T::zero())
    })
    .re
    .as_f64();
    let space_avg = torus_average(spec.n_dof(), space_nodes, f).as_f64();
    Ok(ErgodicCheck {
        time_avg,
        space_avg,
        gap: (time_avg - space_avg).abs(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GapTrend {
    pub horizons: Vec<f64>,
    pub gaps: Vec<f64>,
    /// `sup_{s ∈ [T, 2T]} gap(s)` along the trajectory.
    pub envelope: Vec<f64>,
    pub slope: Option<f64>,
    pub fit: Option<LinearFit>,
}

/// Ergodic gap over a series of horizons, read off one trajectory of length
/// `2·max(horizons)` sampled `samples_per_unit` times per unit time. The raw
/// gap oscillates with `T`, so the decay exponent is fitted to the envelope.
pub fn ergodic_gap_trend<T: Real, F: Fn(&[T]) -> T + Sync>(
    spec: &FlowSpec<T>,
    f: &F,
    horizons: &[T],
    samples_per_unit: usize,
    space_nodes: usize,
) -> Result<GapTrend> {
    if horizons.len() < 3 {
        return Err(invalid("gap trend needs at least three horizons"));
    }
    let xs: Vec<f64> = horizons.iter().map(|t| t.as_f64()).collect();
    if !(xs[0] > 0.0) || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("horizons must be positive and strictly increasing"));
    }
    if samples_per_unit < 2 {
        return Err(invalid("need at least two samples per unit time"));
    }
    let space_avg = torus_average(spec.n_dof(), space_nodes, f).as_f64();
    let h = 1.0 / samples_per_unit as f64;
    let last = (2.0 * xs[xs.len() - 1] * samples_per_unit as f64).ceil() as usize;
    let values: Vec<f64> = (0..=last)
        .into_par_iter()
        .map(|k| f(&integrate_flow(spec, T::lit(h * k as f64))).as_f64())
        .collect();
    // running trapezoid average A(kh)
    let mut gap_at = vec![0.0; last + 1];
    let mut integral = 0.0;
    gap_at[0] = (values[0] - space_avg).abs();
    for k in 1..=last {
        integral += 0.5 * h * (values[k - 1] + values[k]);
        gap_at[k] = (integral / (h * k as f64) - space_avg).abs();
    }
    let index = |t: f64| ((t / h).round() as usize).clamp(1, last);
    let gaps: Vec<f64> = xs.iter().map(|&t| gap_at[index(t)]).collect();
    let envelope: Vec<f64> = xs
        .iter()
        .map(|&t| {
            gap_at[index(t)..=index(2.0 * t)]
                .iter()
                .cloned()
                .fold(0.0, f64::max)
        })
        .collect();
    let fit = if envelope.iter().all(|&g| g > 0.0) {
        log_log_slope(&xs, &envelope)
    } else {
        None
    };
    Ok(GapTrend {
        horizons: xs,
        gaps,
        envelope,
        slope: fit.map(|f| f.slope),
        fit,
    })
}

/// Fraction of coarse angle boxes visited by the trajectory.
pub fn torus_occupancy<T: Real>(
    spec: &FlowSpec<T>,
    horizon: T,
    samples: usize,
    boxes: usize,
) -> f64 {
    let n = spec.n_dof();
    let total = boxes.pow(n as u32);
    let mut seen = vec![false; total];
    let two_pi = 2.0 * std::f64::consts::PI;
    for k in 0..=samples {
        let t = horizon * T::from_usize_lossy(k) / T::from_usize_lossy(samples);
        let alpha = integrate_flow(spec, t);
        let mut idx = 0;
        for a in alpha.iter().rev() {
            let b = ((a.as_f64() / two_pi * boxes as f64) as usize).min(boxes - 1);
            idx = idx * boxes + b;
        }
        seen[idx] = true;
    }
    seen.iter().filter(|&&s| s).count() as f64 / total as f64
}

/// Declared-classification checks: actions are conserved by construction;
/// a trajectory confined to a small part of the torus signals that a
/// declared non-isolating constant actually defines a closed level set.
pub fn classification_warnings<T: Real>(
    spec: &FlowSpec<T>,
    horizon: T,
    samples: usize,
) -> Vec<String> {
    let mut out = spec.resonance_warnings();
    let (_, non_iso) = spec.counts();
    if non_iso > 0 && spec.n_dof() <= 4 {
        let occ = torus_occupancy(spec, horizon, samples, 8);
        if occ < 0.5 {
            out.push(format!(
                "trajectory visits {:.0}% of the coarse torus: a declared non-isolating constant looks isolating",
                occ * 100.0
            ));
        }
    }
    out
}

/// Equilibrium density on one level set of the isolating constants.
///
/// The level set is the angle torus times a box of non-isolating actions;
/// the density is the inverse of its volume and only accepts isolating values.
#[derive(Clone, Debug, Serialize)]
pub struct MicrocanonicalDensity<T> {
    pub isolating_values: Vec<T>,
    pub non_isolating_ranges: Vec<(T, T)>,
    pub n_angles: usize,
    pub level_set_volume: T,
}

impl<T: Real> MicrocanonicalDensity<T> {
    /// Density value on the level set `isolating`, zero elsewhere.
    pub fn value(&self, isolating: &[T]) -> T {
        let tol = T::lit(1e-12);
        let on_set = isolating.len() == self.isolating_values.len()
            && isolating
                .iter()
                .zip(&self.isolating_values)
                .all(|(a, b)| (*a - *b).abs() <= tol * (T::one() + b.abs()));
        if on_set {
            T::one() / self.level_set_volume
        } else {
            T::zero()
        }
    }

    /// Tensor-product midpoint quadrature of the density over the level set.
    pub fn normalization(&self, nodes: usize) -> T {
        let dim = self.n_angles + self.non_isolating_ranges.len();
        let total = nodes.pow(dim as u32);
        let two_pi = T::lit(2.0) * T::PI();
        let nf = T::from_usize_lossy(nodes);
        let cell: T = std::iter::repeat_n(two_pi / nf, self.n_angles)
            .chain(
                self.non_isolating_ranges
                    .iter()
                    .map(|(lo, hi)| (*hi - *lo) / nf),
            )
            .fold(T::one(), |a, b| a * b);
        let v = self.value(&self.isolating_values);
        T::from_usize_lossy(total) * cell * v
    }
}

/// Microcanonical density for `spec`, with declared ranges of the non-isolating actions.
pub fn microcanonical_density<T: Real>(
    spec: &FlowSpec<T>,
    non_isolating_ranges: &[(T, T)],
) -> Result<MicrocanonicalDensity<T>> {
    let (_, non_iso) = spec.counts();
    if non_isolating_ranges.len() != non_iso {
        return Err(invalid("one range per non-isolating action is required"));
    }
    if non_isolating_ranges.iter().any(|(lo, hi)| !(hi > lo)) {
        return Err(invalid("non-isolating ranges must have positive length"));
    }
    let two_pi = T::lit(2.0) * T::PI();
    let volume = non_isolating_ranges
        .iter()
        .fold(two_pi.powi(spec.n_dof() as i32), |v, (lo, hi)| {
            v * (*hi - *lo)
        });
    Ok(MicrocanonicalDensity {
        isolating_values: spec.isolating_actions(),
        non_isolating_ranges: non_isolating_ranges.to_vec(),
        n_angles: spec.n_dof(),
        level_set_volume: volume,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CanonicalFit {
    pub energies: Vec<f64>,
    pub marginal: Vec<f64>,
    pub normalization: f64,
    pub beta: f64,
    pub fit: LinearFit,
    pub fit_window: f64,
}

/// Subsystem marginal `p(E₁) ∝ (E - E₁)^ν` of a bath with density of states
/// `g ∝ E^ν`, and the inverse temperature fitted to `log p` over `[0, E/10]`.
///
/// The regression is weighted by `p` so the fit reads the slope where the
/// subsystem actually lives.
pub fn canonical_from_microcanonical(nu: f64, e_total: f64, points: usize) -> Result<CanonicalFit> {
    if !(nu > 0.0) {
        return Err(invalid("bath exponent nu must be positive"));
    }
    if !(e_total > 0.0) || points < 3 {
        return Err(invalid("need E_total > 0 and at least three grid points"));
    }
    let energies: Vec<f64> = (0..points)
        .map(|i| e_total * i as f64 / (points - 1) as f64)
        .collect();
    // normalized analytically: ∫₀^E (E - x)^ν dx = E^{ν+1}/(ν+1)
    let marginal: Vec<f64> = energies
        .iter()
        .map(|&x| (nu + 1.0) / e_total * ((e_total - x) / e_total).powf(nu))
        .collect();
    let h = e_total / (points - 1) as f64;
    let normalization = marginal
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if i == 0 || i == points - 1 {
                0.5 * p
            } else {
                p
            }
        })
        .sum::<f64>()
        * h;
    let window = e_total / 10.0;
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    for (&x, &p) in energies.iter().zip(&marginal) {
        if x <= window && p > 0.0 {
            xs.push(x);
            ys.push(p.ln());
            ws.push(p);
        }
    }
    let fit = weighted_linear_fit(&xs, &ys, &ws)
        .ok_or_else(|| invalid("fit window holds fewer than two grid points"))?;
    Ok(CanonicalFit {
        energies,
        marginal,
        normalization,
        beta: -fit.slope,
        fit,
        fit_window: window,
    })
}

/// `∬ e^{-βH^W - Σγ P^W} A^W / ∬ e^{-βH^W - Σγ P^W}` on the phase grid.
pub fn classical_thermal_functional<T: Real>(
    a_w: &DMatrix<T>,
    beta: T,
    gammas: &[(T, PolySymbol<T>)],
    model: &ClassicalModel<T>,
    grid: &PhaseGrid<T>,
) -> Result<T> {
    let rho = classical_grand_density(model, grid, beta, gammas)?;
    if a_w.shape() != rho.values.shape() {
        return Err(invalid("observable array does not match the phase grid"));
    }
    grid.integrate(&rho.values.component_mul(a_w))
}

/// Quantum thermal mean of the Weyl-quantized symbol against the classical
/// thermal mean of the symbol itself, over an ħ series. An observable named
/// `"H"` stands for the model's own Hamiltonian on both sides.
pub fn thermal_correspondence<T: EigenReal>(
    models: &[ClassicalModel<T>],
    observables: &[(String, PolySymbol<T>)],
    beta: T,
    hbar_series: &[T],
    base: &PhaseGrid<T>,
) -> Result<Vec<ScalingSeries>> {
    let mut out = Vec::new();
    for model in models {
        for (name, symbol) in observables {
            let mut errors = Vec::new();
            let mut scales = Vec::new();
            for &hbar in hbar_series {
                let g = base.with_hbar(hbar);
                let rho = quantum_thermal_state(model, &g, beta)?;
                let (op, a_w) = if *name == "H" {
                    (model.hamiltonian(&g), g.sample(|q, p| model.energy(q, p)))
                } else {
                    (symbol.quantize(&g), g.sample(|q, p| symbol.eval(q, p)))
                };
                let quantum = quantum_pair(&rho, &op)?;
                let classical = classical_thermal_functional(&a_w, beta, &[], model, &g)?;
                errors.push(num_traits::Float::abs(quantum - classical).as_f64());
                scales.push(num_traits::Float::abs(classical).as_f64());
            }
            out.push(ScalingSeries::from_errors(
                format!("thermal {} {}", name, model.label()),
                hbar_series.iter().map(|h| h.as_f64()).collect(),
                errors,
                &scales,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flow(f: Vec<Frequency>) -> FlowSpec<f64> {
        FlowSpec::simple(f).unwrap()
    }

    #[test]
    fn closed_form_flow() {
        let s = flow(vec![Frequency::Value(1.0), Frequency::Sqrt2]);
        assert_eq!(integrate_flow(&s, 0.0), vec![0.0, 0.0]);
        let a = integrate_flow(&s, 2.0 * PI);
        assert!(a[0].abs() < 1e-12 || (a[0] - 2.0 * PI).abs() < 1e-12);
        let expected = (2.0 * PI * 2f64.sqrt()) % (2.0 * PI);
        assert!((a[1] - expected).abs() < 1e-12);
        assert!((expected - 2.0 * PI * (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let c = flow(vec![Frequency::Value(1.0), Frequency::Value(2.0)]);
        let b = integrate_flow(&c, 2.0 * PI);
        for x in b {
            assert!(x < 1e-9 || (2.0 * PI - x) < 1e-9);
        }
        assert_eq!(s.actions, vec![1.0, 1.0]);
    }

    #[test]
    fn parsing_and_symbolic_resonance() {
        assert_eq!("sqrt2".parse::<Frequency>().unwrap(), Frequency::Sqrt2);
        assert_eq!("1.5".parse::<Frequency>().unwrap(), Frequency::Value(1.5));
        assert!("bogus".parse::<Frequency>().is_err());
        let s = flow(vec![Frequency::Sqrt2, Frequency::Sqrt2]);
        assert_eq!(s.mode_frequency(&[1, -1]).unwrap(), 0.0);
        let g = flow(vec![Frequency::Golden, Frequency::Value(1.0)]);
        assert!(g.mode_frequency(&[2, -1]).unwrap().abs() > 1.0);
        let near = flow(vec![Frequency::Value(1.0), Frequency::Value(1.0 + 1e-8)]);
        assert!(!near.resonance_warnings().is_empty());
        assert!(s.resonance_warnings().is_empty());
    }

    #[test]
    fn weyl_averages_against_closed_form() {
        let s = flow(vec![Frequency::Value(1.0), Frequency::Sqrt2]);
        let horizon = 1e4;
        let report = equidistribution_test(
            &s,
            &[vec![0, 0], vec![1, -1], vec![1, 1], vec![3, -2]],
            horizon,
            2_000_000,
        )
        .unwrap();
        assert!((report.weyl_averages[0].average - 1.0).abs() < 1e-12);
        for row in &report.weyl_averages[1..] {
            let k = row.mode_frequency;
            // |(e^{ikT} - 1)/(ikT)|
            let exact = 2.0 * (0.5 * k * horizon).sin().abs() / (k.abs() * horizon);
            assert!((row.average - exact).abs() < 1e-6, "{row:?} vs {exact}");
            assert!(row.within_bound());
        }
        assert!(report.weyl_averages[1].average < 1e-2);
        let resonant = flow(vec![Frequency::Value(1.0), Frequency::Value(2.0)]);
        let r = equidistribution_test(&resonant, &[vec![2, -1]], horizon, 1000).unwrap();
        assert!(r.weyl_averages[0].resonant);
        assert!((r.weyl_averages[0].average - 1.0).abs() < 1e-12);
        assert!(r.to_csv().starts_with("mode,weyl_avg,bound\n2 -1,"));
    }

    #[test]
    fn ergodic_gap_decays() {
        let s = flow(vec![Frequency::Value(1.0), Frequency::Sqrt2]);
        let f = |a: &[f64]| a[0].cos() * a[1].cos();
        let check = ergodic_average_check(&s, &f, 1e4, 1_000_000, 32).unwrap();
        assert!(check.space_avg.abs() < 1e-14);
        assert!(check.gap < 1e-2);
        // time side: ½[sin((√2-1)T)/((√2-1)T) + sin((√2+1)T)/((√2+1)T)]
        let t = 1e4;
        let (km, kp) = (2f64.sqrt() - 1.0, 2f64.sqrt() + 1.0);
        let exact = 0.5 * ((km * t).sin() / (km * t) + (kp * t).sin() / (kp * t));
        assert!((check.time_avg - exact).abs() < 1e-6);
        let horizons: Vec<f64> = (0..24)
            .map(|i| 50.0 * 10f64.powf(i as f64 / 12.0))
            .collect();
        let trend = ergodic_gap_trend(&s, &f, &horizons, 20, 32).unwrap();
        assert!(trend.slope.unwrap() <= -0.9, "{:?}", trend.slope);
        let closed = |t: f64| 0.5 * ((km * t).sin() / (km * t) + (kp * t).sin() / (kp * t));
        for (t, g) in trend.horizons.iter().zip(&trend.gaps) {
            let exact = closed((*t * 20.0).round() / 20.0).abs();
            assert!((g - exact).abs() < 1e-5, "{t}: {g} vs {exact}");
        }
        for (t, e) in trend.horizons.iter().zip(&trend.envelope) {
            assert!(*e <= (1.0 / km + 1.0 / kp) / (2.0 * t) + 1e-5);
        }
        let c = ergodic_average_check(&s, &|_: &[f64]| 3.0, 100.0, 1000, 8).unwrap();
        assert!(c.gap < 1e-12);
    }

    #[test]
    fn resonant_flow_does_not_equilibrate() {
        let s = FlowSpec::new(
            vec![1.0, 1.0],
            vec![Frequency::Value(1.0), Frequency::Value(1.0)],
            vec![0.3, 1.1],
            vec![ConstantKind::Isolating, ConstantKind::NonIsolating],
        )
        .unwrap();
        let f = |a: &[f64]| (a[0] - a[1]).cos();
        let c = ergodic_average_check(&s, &f, 1e3, 100_000, 32).unwrap();
        assert!((c.gap - (0.8f64).cos().abs()).abs() < 1e-9);
        assert!(!classification_warnings(&s, 1e3, 10_000).is_empty());
        let ergodic = flow(vec![Frequency::Value(1.0), Frequency::Sqrt2]);
        assert!(classification_warnings(&ergodic, 1e3, 100_000).is_empty());
    }

    #[test]
    fn microcanonical_is_flat_and_normalized() {
        let s = FlowSpec::new(
            vec![2.0, 0.7],
            vec![Frequency::Value(1.0), Frequency::Sqrt2],
            vec![0.0, 0.0],
            vec![ConstantKind::Isolating, ConstantKind::NonIsolating],
        )
        .unwrap();
        let d: MicrocanonicalDensity<f64> = microcanonical_density(&s, &[(0.0, 3.0)]).unwrap();
        let v = d.value(&[2.0]);
        assert!(v > 0.0);
        assert_eq!(d.value(&[2.5]), 0.0);
        assert!((d.normalization(16) - 1.0).abs() < 1e-8);
        // a level set differing only in the non-isolating action
        let other = FlowSpec::new(
            vec![2.0, 2.9],
            s.frequencies.clone(),
            vec![1.0, 2.0],
            s.classification.clone(),
        )
        .unwrap();
        let d2 = microcanonical_density(&other, &[(0.0, 3.0)]).unwrap();
        assert_eq!(d2.value(&[2.0]), v);
        assert!(microcanonical_density(&s, &[]).is_err());
    }

    #[test]
    fn canonical_marginal_and_beta() {
        let lin = canonical_from_microcanonical(1.0, 1.0, 101).unwrap();
        for (&x, &p) in lin.energies.iter().zip(&lin.marginal) {
            assert!((p - 2.0 * (1.0 - x)).abs() < 1e-12);
        }
        let fit50 = canonical_from_microcanonical(50.0, 1.0, 20001).unwrap();
        assert!((fit50.normalization - 1.0).abs() < 1e-6);
        assert!((fit50.beta - 50.0).abs() < 0.05 * 50.0, "{}", fit50.beta);
        let fit100 = canonical_from_microcanonical(100.0, 1.0, 20001).unwrap();
        assert!((fit100.beta / fit50.beta - 2.0).abs() < 0.1);
        assert!(canonical_from_microcanonical(0.0, 1.0, 11).is_err());
        assert!(canonical_from_microcanonical(-1.0, 1.0, 11).is_err());
    }

    #[test]
    fn classical_thermal_equipartition() {
        let g = PhaseGrid::<f64>::new(7.0, 281, 7.0, 281, 1.0).unwrap();
        let model = ClassicalModel::Harmonic { omega: 1.0 };
        let one = g.sample(|_, _| 1.0);
        assert!(
            (classical_thermal_functional(&one, 2.0, &[], &model, &g).unwrap() - 1.0).abs() < 1e-14
        );
        let h = g.sample(|q, p| model.energy(q, p));
        let e = classical_thermal_functional(&h, 2.0, &[], &model, &g).unwrap();
        assert!((e - 0.5).abs() < 1e-6);
        // product commutes pointwise
        let a = g.sample(|q, _| q * q);
        let b = g.sample(|_, p| p + 1.0);
        let ab = classical_thermal_functional(&a.component_mul(&b), 2.0, &[], &model, &g).unwrap();
        let ba = classical_thermal_functional(&b.component_mul(&a), 2.0, &[], &model, &g).unwrap();
        assert_eq!(ab, ba);
        // grand form with the energy itself as isolating constant shifts β
        let energy = PolySymbol::monomial(0.5, 2, 0).plus(PolySymbol::monomial(0.5, 0, 2));
        let e2 = classical_thermal_functional(&h, 1.5, &[(0.5, energy)], &model, &g).unwrap();
        assert!((e2 - 0.5).abs() < 1e-6);
        let small = PhaseGrid::<f64>::new(1.0, 41, 1.0, 41, 1.0).unwrap();
        assert!(matches!(
            classical_thermal_functional(&small.sample(|_, _| 1.0), 0.5, &[], &model, &small),
            Err(LabError::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn quantum_and_classical_thermal_means_converge() {
        let base = PhaseGrid::<f64>::new(8.0, 401, 8.0, 161, 1.0).unwrap();
        let models = [
            ClassicalModel::Harmonic { omega: 1.0 },
            ClassicalModel::Quartic {
                omega: 1.0,
                lambda: 0.5,
            },
        ];
        let obs = vec![
            (
                "H".to_string(),
                PolySymbol::monomial(0.5, 2, 0).plus(PolySymbol::monomial(0.5, 0, 2)),
            ),
            ("q2".to_string(), PolySymbol::monomial(1.0, 2, 0)),
        ];
        let series = thermal_correspondence(&models, &obs, 1.0, &[0.4, 0.2, 0.1], &base).unwrap();
        for s in &series {
            for (h, e) in s.hbar.iter().zip(&s.errors) {
                assert!(*e <= *h, "{s:?}");
            }
            assert!(s.slope.is_some_and(|k| k > 1.8), "{s:?}");
            // ⟨H⟩ = (ħ/2)coth(βħ/2) against 1/β: gap ≈ βħ²/12
            if s.label.starts_with("thermal H harmonic") {
                let exact = 0.5 * 0.1 / (0.05f64).tanh() - 1.0;
                assert!(
                    (s.errors[2] - exact).abs() < 1e-8,
                    "{} vs {exact}",
                    s.errors[2]
                );
            }
        }
    }
}
