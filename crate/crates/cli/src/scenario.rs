//! Typed, validated scenario built from a [`RawConfig`].

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use spectral_lab::classical_dynamics::{ConstantKind, Frequency};
use spectral_lab::localization::{DEFAULT_BAND, MIN_ENSEMBLE};
use spectral_lab::maxent_kms::mean_energy;
use spectral_lab::spectral_model::{CscoSpec, Scheme, SpectrumGrid};
use spectral_lab::wigner_bridge::{PhaseGrid, PROBE_STATE};

use crate::config::{ConfigError, RawConfig};

/// Every key the scenario grammar knows about.
pub const KNOWN_KEYS: &[&str] = &[
    "scenario.name",
    "scenario.pipeline",
    "scenario.seed",
    "scenario.output",
    "grid.scheme",
    "grid.nodes",
    "grid.omega_max",
    "csco.bound_energy",
    "csco.degeneracy",
    "csco.n_momenta",
    "csco.n_isolating",
    "evolution.times",
    "evolution.revival_override",
    "evolution.center",
    "evolution.width",
    "thermal.E",
    "thermal.beta",
    "thermal.gammas",
    "thermal.competitors",
    "kms.t_max",
    "kms.t_steps",
    "kms.strip_rows",
    "kms.random_pairs",
    "wigner.q_extent",
    "wigner.nq",
    "wigner.p_extent",
    "wigner.np",
    "wigner.hbar_eff",
    "wigner.epsilon",
    "wigner.shell_omega",
    "wigner.probe",
    "wigner.lambda",
    "flow.frequencies",
    "flow.actions",
    "flow.classification",
    "flow.angles",
    "ergodic.T",
    "ergodic.samples",
    "ergodic.modes",
    "ergodic.trend_points",
    "ergodic.space_nodes",
    "canonical.nu",
    "canonical.E_total",
    "canonical.points",
    "canonical.omega",
    "canonical.nodes",
    "localization.ensemble_size",
    "localization.observed_indices",
    "localization.seed",
    "localization.flow",
    "localization.stds",
    "localization.t_max",
    "localization.steps",
    "localization.omega",
    "localization.band",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Decohere,
    Maxent,
    Kms,
    Wigner,
    Ergodic,
    Canonical,
    Localize,
    FullChain,
}

impl Pipeline {
    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Decohere => "decohere",
            Pipeline::Maxent => "maxent",
            Pipeline::Kms => "kms",
            Pipeline::Wigner => "wigner",
            Pipeline::Ergodic => "ergodic",
            Pipeline::Canonical => "canonical",
            Pipeline::Localize => "localize",
            Pipeline::FullChain => "full-chain",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "decohere" => Pipeline::Decohere,
            "maxent" => Pipeline::Maxent,
            "kms" => Pipeline::Kms,
            "wigner" => Pipeline::Wigner,
            "ergodic" => Pipeline::Ergodic,
            "canonical" => Pipeline::Canonical,
            "localize" => Pipeline::Localize,
            "full-chain" => Pipeline::FullChain,
            other => return Err(format!("unknown pipeline `{other}`")),
        })
    }
}

/// Rejected scenario: malformed input (exit 2) or physically infeasible request (exit 3).
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioError {
    Parse(ConfigError),
    Infeasible(ConfigError),
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Parse(_) => 2,
            ScenarioError::Infeasible(_) => 3,
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Parse(e) => write!(f, "config error: {e}"),
            ScenarioError::Infeasible(e) => write!(f, "infeasible: {e}"),
        }
    }
}

impl From<ConfigError> for ScenarioError {
    fn from(e: ConfigError) -> Self {
        ScenarioError::Parse(e)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralParams {
    pub scheme: Scheme,
    pub nodes: usize,
    pub omega_max: f64,
    pub csco: CscoSpec<f64>,
}

impl SpectralParams {
    pub fn grid(&self) -> SpectrumGrid<f64> {
        SpectrumGrid::build(self.scheme, self.nodes, self.omega_max)
            .expect("grid validated at load time")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionParams {
    pub times: Vec<f64>,
    pub revival_override: bool,
    /// Center `ω̄` of the Gaussian coherence profile.
    pub center: f64,
    /// Width `σ` of the Gaussian coherence profile.
    pub width: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalTarget {
    Energy(f64),
    Beta(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct ThermalSection {
    pub target: ThermalTarget,
    pub gammas: Vec<f64>,
    pub competitors: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct KmsSection {
    pub t_max: f64,
    pub t_steps: usize,
    pub strip_rows: usize,
    pub random_pairs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct WignerSection {
    pub q_extent: f64,
    pub nq: usize,
    pub p_extent: f64,
    pub np: usize,
    pub hbar_eff: Vec<f64>,
    pub epsilon: f64,
    pub shell_omega: f64,
    pub probe: f64,
    /// Quartic coupling of the anharmonic model.
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowSection {
    pub frequencies: Vec<Frequency>,
    pub actions: Vec<f64>,
    pub classification: Vec<ConstantKind>,
    pub angles: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErgodicSection {
    pub horizon: f64,
    pub samples: usize,
    pub modes: Vec<Vec<i64>>,
    pub trend_points: usize,
    pub space_nodes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CanonicalSection {
    pub nu: f64,
    pub e_total: f64,
    pub points: usize,
    pub omega: f64,
    pub nodes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Identity,
    Shear,
    Rotation,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationSection {
    pub ensemble_size: usize,
    pub observed: Vec<usize>,
    pub seed: u64,
    pub flow: FlowKind,
    pub stds: Vec<f64>,
    pub t_max: f64,
    pub steps: usize,
    pub omega: f64,
    pub band: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct Scenario {
    pub name: String,
    pub pipeline: Pipeline,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub spectral: Option<SpectralParams>,
    pub evolution: Option<EvolutionParams>,
    pub thermal: Option<ThermalSection>,
    pub kms: Option<KmsSection>,
    pub wigner: Option<WignerSection>,
    pub flow: Option<FlowSection>,
    pub ergodic: Option<ErgodicSection>,
    pub canonical: Option<CanonicalSection>,
    pub localization: Option<LocalizationSection>,
}

/// Typed access that records which keys were consumed.
struct Reader<'a> {
    raw: &'a RawConfig,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.raw.entries.get(key).map(|e| e.line),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn text(&mut self, key: &str) -> Option<&'a str> {
        let e = self.raw.entries.get(key)?;
        self.used.insert(key.to_string());
        Some(e.value.as_str())
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.text(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| self.err(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn req<T: FromStr>(&mut self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.opt(key)?
            .ok_or_else(|| self.err(key, "required key is missing"))
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.text(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse()
                    .map_err(|e| self.err(key, format!("cannot parse list item `{s}`: {e}")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    fn req_list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.list(key)?
            .ok_or_else(|| self.err(key, "required key is missing"))
    }

    fn positive(&mut self, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        let v = match default {
            Some(d) => self.opt(key)?.unwrap_or(d),
            None => self.req(key)?,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(self.err(key, format!("must be positive and finite, got {v}")));
        }
        Ok(v)
    }

    fn count(
        &mut self,
        key: &str,
        default: Option<usize>,
        min: usize,
    ) -> Result<usize, ConfigError> {
        let v = match default {
            Some(d) => self.opt(key)?.unwrap_or(d),
            None => self.req(key)?,
        };
        if v < min {
            return Err(self.err(key, format!("must be at least {min}, got {v}")));
        }
        Ok(v)
    }
}

fn needs(p: Pipeline, section: &str) -> bool {
    use Pipeline::*;
    match section {
        "spectral" => matches!(p, Decohere | Maxent | Kms | FullChain),
        "evolution" => matches!(p, Decohere | FullChain),
        "thermal" => matches!(p, Maxent | Kms | FullChain),
        "kms" => matches!(p, Kms | FullChain),
        "wigner" => matches!(p, Wigner | FullChain),
        "flow" | "ergodic" => matches!(p, Ergodic | FullChain),
        "canonical" => matches!(p, Canonical | FullChain),
        "localization" => matches!(p, Localize | FullChain),
        _ => false,
    }
}

impl Scenario {
    pub fn from_text(text: &str) -> Result<Self, ScenarioError> {
        Self::from_raw(&crate::config::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self, ScenarioError> {
        // unknown keys first, in file order
        let mut entries: Vec<_> = raw.entries.iter().collect();
        entries.sort_by_key(|(_, e)| e.line);
        if let Some((k, e)) = entries
            .iter()
            .find(|(k, _)| !KNOWN_KEYS.contains(&k.as_str()))
        {
            return Err(ScenarioError::Parse(ConfigError {
                line: Some(e.line),
                key: Some(k.to_string()),
                message: "unknown key".into(),
            }));
        }
        let mut r = Reader {
            raw,
            used: BTreeSet::new(),
        };
        let name: String = r.req("scenario.name")?;
        if !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(r
                .err("scenario.name", "use letters, digits, `-` or `_` only")
                .into());
        }
        let pipeline: Pipeline = r.req("scenario.pipeline")?;
        let seed: u64 = r.req("scenario.seed")?;
        let output: Option<PathBuf> = r.opt("scenario.output")?;

        let mut s = Scenario {
            name,
            pipeline,
            seed,
            output,
            spectral: None,
            evolution: None,
            thermal: None,
            kms: None,
            wigner: None,
            flow: None,
            ergodic: None,
            canonical: None,
            localization: None,
        };
        if needs(pipeline, "spectral") {
            s.spectral = Some(spectral(&mut r)?);
        }
        if needs(pipeline, "evolution") {
            s.evolution = Some(evolution(&mut r, s.spectral.as_ref().expect("loaded"))?);
        }
        if needs(pipeline, "thermal") {
            s.thermal = Some(thermal(&mut r, s.spectral.as_ref().expect("loaded"))?);
        }
        if needs(pipeline, "kms") {
            s.kms = Some(kms(&mut r, s.thermal.as_ref().expect("loaded"))?);
        }
        if needs(pipeline, "wigner") {
            s.wigner = Some(wigner(&mut r)?);
        }
        if needs(pipeline, "flow") {
            let f = flow(&mut r)?;
            s.ergodic = Some(ergodic(&mut r, f.frequencies.len())?);
            s.flow = Some(f);
        }
        if needs(pipeline, "canonical") {
            s.canonical = Some(canonical(&mut r)?);
        }
        if needs(pipeline, "localization") {
            s.localization = Some(localization(&mut r, seed)?);
        }
        if let Some((k, e)) = entries.iter().find(|(k, _)| !r.used.contains(k.as_str())) {
            return Err(ScenarioError::Parse(ConfigError {
                line: Some(e.line),
                key: Some(k.to_string()),
                message: format!("key is not used by pipeline `{pipeline}`"),
            }));
        }
        Ok(s)
    }
}

fn spectral(r: &mut Reader) -> Result<SpectralParams, ScenarioError> {
    let scheme: Scheme = r.opt("grid.scheme")?.unwrap_or(Scheme::GaussLegendre);
    let nodes = r.count("grid.nodes", None, 2)?;
    let omega_max = r.positive("grid.omega_max", None)?;
    let bound_energy: Option<f64> = r.opt("csco.bound_energy")?;
    let degeneracy = r.count("csco.degeneracy", Some(1), 1)?;
    let n_momenta = r.count("csco.n_momenta", Some(usize::from(degeneracy > 1)), 0)?;
    let n_isolating = r.count("csco.n_isolating", Some(n_momenta + 1), 1)?;
    let csco = CscoSpec::new(bound_energy, degeneracy, n_momenta, n_isolating)
        .map_err(|e| r.err("csco.bound_energy", e.to_string()))?;
    SpectrumGrid::build(scheme, nodes, omega_max)
        .map_err(|e| r.err("grid.nodes", e.to_string()))?;
    Ok(SpectralParams {
        scheme,
        nodes,
        omega_max,
        csco,
    })
}

fn evolution(r: &mut Reader, sp: &SpectralParams) -> Result<EvolutionParams, ScenarioError> {
    let times: Vec<f64> = r.req_list("evolution.times")?;
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(r
            .err(
                "evolution.times",
                "times must be finite and strictly increasing",
            )
            .into());
    }
    let revival_override = r.opt("evolution.revival_override")?.unwrap_or(false);
    let horizon = sp.grid().revival_horizon();
    let worst = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if worst > 0.5 * horizon && !revival_override {
        return Err(r
            .err(
                "evolution.times",
                format!(
                    "t = {worst} exceeds half the revival horizon {horizon:.6}; set evolution.revival_override = true to allow it"
                ),
            )
            .into());
    }
    let center = r.positive("evolution.center", Some(5.0))?;
    let width = r.positive("evolution.width", Some(1.0))?;
    Ok(EvolutionParams {
        times,
        revival_override,
        center,
        width,
    })
}

fn thermal(r: &mut Reader, sp: &SpectralParams) -> Result<ThermalSection, ScenarioError> {
    let e: Option<f64> = r.opt("thermal.E")?;
    let b: Option<f64> = r.opt("thermal.beta")?;
    let target = match (e, b) {
        (Some(_), Some(_)) => {
            return Err(r
                .err(
                    "thermal.beta",
                    "give either thermal.E or thermal.beta, not both",
                )
                .into())
        }
        (None, None) => {
            return Err(r
                .err("thermal.E", "thermal.E or thermal.beta is required")
                .into())
        }
        (Some(e), None) => {
            let grid = sp.grid();
            let lo = grid.nodes()[0].min(sp.csco.bound_energy.unwrap_or(f64::INFINITY));
            // β → 0⁺ gives the flat mean; anything at or above it needs β ≤ 0
            let flat = mean_energy(&grid, &sp.csco, 0.0);
            if !(e > lo && e < flat) {
                return Err(ScenarioError::Infeasible(r.err(
                    "thermal.E",
                    format!("mean energy {e} needs beta <= 0 or is unattainable; positive beta covers ({lo}, {flat:.6})"),
                )));
            }
            ThermalTarget::Energy(e)
        }
        (None, Some(b)) => {
            if !(b > 0.0) || !b.is_finite() {
                return Err(ScenarioError::Infeasible(
                    r.err("thermal.beta", format!("beta must be positive, got {b}")),
                ));
            }
            ThermalTarget::Beta(b)
        }
    };
    let gammas: Vec<f64> = r.list("thermal.gammas")?.unwrap_or_default();
    if !gammas.is_empty() {
        let digits = spectral_lab::pointer_basis::PointerLabels::from_csco(&sp.csco)
            .dims
            .len();
        if gammas.len() != digits {
            return Err(r
                .err(
                    "thermal.gammas",
                    format!("expected {digits} multipliers, got {}", gammas.len()),
                )
                .into());
        }
    }
    let competitors = r.count("thermal.competitors", Some(200), 1)?;
    Ok(ThermalSection {
        target,
        gammas,
        competitors,
    })
}

fn kms(r: &mut Reader, th: &ThermalSection) -> Result<KmsSection, ScenarioError> {
    if !th.gammas.is_empty() {
        return Err(r
            .err(
                "thermal.gammas",
                "correlators need the canonical state; drop thermal.gammas",
            )
            .into());
    }
    Ok(KmsSection {
        t_max: r.positive("kms.t_max", Some(4.0))?,
        t_steps: r.count("kms.t_steps", Some(40), 2)?,
        strip_rows: r.count("kms.strip_rows", Some(9), 3)?,
        random_pairs: r.count("kms.random_pairs", Some(5), 1)?,
    })
}

fn wigner(r: &mut Reader) -> Result<WignerSection, ScenarioError> {
    let q_extent = r.positive("wigner.q_extent", None)?;
    let nq = r.count("wigner.nq", None, 3)?;
    let np = r.count("wigner.np", None, 2)?;
    let hbar_eff: Vec<f64> = r.req_list("wigner.hbar_eff")?;
    if hbar_eff.iter().any(|h| !(*h > 0.0)) {
        return Err(r
            .err("wigner.hbar_eff", "every hbar_eff must be positive")
            .into());
    }
    let h_min = hbar_eff.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_max = hbar_eff.iter().cloned().fold(0.0, f64::max);
    let (_, _, sq, sp) = PROBE_STATE;
    if hbar_eff.len() >= 2 && h_max > 2.0 * sq * sp {
        return Err(ScenarioError::Infeasible(r.err(
            "wigner.hbar_eff",
            format!(
                "the correspondence probe state has σ_q·σ_p = {}, so hbar_eff must not exceed {}",
                sq * sp,
                2.0 * sq * sp
            ),
        )));
    }
    let probe_grid = PhaseGrid::<f64>::new(q_extent, nq, 1.0, np, h_min)
        .map_err(|e| r.err("wigner.nq", e.to_string()))?;
    let nyquist = probe_grid.momentum_nyquist();
    let p_extent = match r.opt::<f64>("wigner.p_extent")? {
        Some(p) => {
            if !(p > 0.0 && p < nyquist) {
                return Err(r
                    .err(
                        "wigner.p_extent",
                        format!(
                            "must lie in (0, {nyquist:.6}) to avoid aliasing at hbar_eff = {h_min}"
                        ),
                    )
                    .into());
            }
            p
        }
        None => 0.95 * nyquist,
    };
    Ok(WignerSection {
        q_extent,
        nq,
        p_extent,
        np,
        hbar_eff,
        epsilon: r.positive("wigner.epsilon", Some(0.05))?,
        shell_omega: r.positive("wigner.shell_omega", Some(2.0))?,
        probe: r.positive("wigner.probe", Some(1.0))?,
        lambda: r.positive("wigner.lambda", Some(1.0))?,
    })
}

fn flow(r: &mut Reader) -> Result<FlowSection, ScenarioError> {
    let frequencies: Vec<Frequency> = r.req_list("flow.frequencies")?;
    let n = frequencies.len();
    let actions: Vec<f64> = r.list("flow.actions")?.unwrap_or_else(|| vec![1.0; n]);
    let classification: Vec<ConstantKind> = r.list("flow.classification")?.unwrap_or_else(|| {
        (0..n)
            .map(|i| {
                if i == 0 {
                    ConstantKind::Isolating
                } else {
                    ConstantKind::NonIsolating
                }
            })
            .collect()
    });
    let angles: Vec<f64> = r.list("flow.angles")?.unwrap_or_else(|| vec![0.0; n]);
    for (key, len) in [
        ("flow.actions", actions.len()),
        ("flow.classification", classification.len()),
        ("flow.angles", angles.len()),
    ] {
        if len != n {
            return Err(r
                .err(key, format!("expected {n} entries, got {len}"))
                .into());
        }
    }
    spectral_lab::classical_dynamics::FlowSpec::new(
        actions.clone(),
        frequencies.clone(),
        angles.clone(),
        classification.clone(),
    )
    .map_err(|e| r.err("flow.classification", e.to_string()))?;
    Ok(FlowSection {
        frequencies,
        actions,
        classification,
        angles,
    })
}

fn ergodic(r: &mut Reader, n_dof: usize) -> Result<ErgodicSection, ScenarioError> {
    let horizon = r.positive("ergodic.T", None)?;
    let samples = r.count("ergodic.samples", None, 2)?;
    let text = r
        .text("ergodic.modes")
        .ok_or_else(|| r.err("ergodic.modes", "required key is missing"))?;
    let mut modes = Vec::new();
    for part in text.split(';') {
        let mode: Vec<i64> = part
            .split_whitespace()
            .map(|x| x.parse::<i64>())
            .collect::<Result<_, _>>()
            .map_err(|e| {
                r.err(
                    "ergodic.modes",
                    format!("cannot parse mode `{}`: {e}", part.trim()),
                )
            })?;
        if mode.len() != n_dof {
            return Err(r
                .err(
                    "ergodic.modes",
                    format!("mode `{}` needs {n_dof} integers", part.trim()),
                )
                .into());
        }
        modes.push(mode);
    }
    Ok(ErgodicSection {
        horizon,
        samples,
        modes,
        trend_points: r.count("ergodic.trend_points", Some(24), 3)?,
        space_nodes: r.count("ergodic.space_nodes", Some(32), 2)?,
    })
}

fn canonical(r: &mut Reader) -> Result<CanonicalSection, ScenarioError> {
    Ok(CanonicalSection {
        nu: r.positive("canonical.nu", None)?,
        e_total: r.positive("canonical.E_total", Some(1.0))?,
        points: r.count("canonical.points", Some(20001), 3)?,
        omega: r.positive("canonical.omega", Some(1.0))?,
        nodes: r.count("canonical.nodes", Some(201), 3)?,
    })
}

fn localization(r: &mut Reader, seed: u64) -> Result<LocalizationSection, ScenarioError> {
    let ensemble_size = r.count("localization.ensemble_size", Some(4000), MIN_ENSEMBLE)?;
    let flow = match r.text("localization.flow").unwrap_or("shear") {
        "shear" => FlowKind::Shear,
        "rotation" => FlowKind::Rotation,
        "identity" => FlowKind::Identity,
        other => {
            return Err(r
                .err(
                    "localization.flow",
                    format!("expected shear, rotation or identity, got `{other}`"),
                )
                .into())
        }
    };
    let stds: Vec<f64> = r
        .list("localization.stds")?
        .unwrap_or_else(|| vec![1.0, 1e-3f64.sqrt()]);
    if stds.is_empty() || stds.len() % 2 != 0 || stds.iter().any(|s| !(*s > 0.0)) {
        return Err(r
            .err(
                "localization.stds",
                "need positive widths for (q_1..q_n, p_1..p_n)",
            )
            .into());
    }
    let observed: Vec<usize> = r.req_list("localization.observed_indices")?;
    let dim = stds.len();
    let distinct: BTreeSet<usize> = observed.iter().copied().collect();
    if observed.is_empty()
        || distinct.len() != observed.len()
        || observed.len() >= dim
        || observed.iter().any(|&i| i >= dim)
    {
        return Err(r
            .err(
                "localization.observed_indices",
                format!("need distinct indices below {dim} leaving at least one unobserved"),
            )
            .into());
    }
    let band: Vec<f64> = r
        .list("localization.band")?
        .unwrap_or_else(|| vec![DEFAULT_BAND.0, DEFAULT_BAND.1]);
    if band.len() != 2 || !(band[0] > 0.0 && band[1] > band[0]) {
        return Err(r
            .err("localization.band", "expected `lo, hi` with 0 < lo < hi")
            .into());
    }
    Ok(LocalizationSection {
        ensemble_size,
        observed,
        seed: r.opt("localization.seed")?.unwrap_or(seed),
        flow,
        stds,
        t_max: r.positive("localization.t_max", Some(10.0))?,
        steps: r.count("localization.steps", Some(20), 4)?,
        omega: r.positive("localization.omega", Some(1.0))?,
        band: (band[0], band[1]),
    })
}
