//! Scenario execution, artifact writing and the multi-config suite.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;
use spectral_lab::LabError;

use crate::pipelines;
use crate::report::Report;
use crate::scenario::{Scenario, ScenarioError};

/// Environment variable naming the output root.
pub const OUT_ENV: &str = "SPECTRAL_LAB_OUT";
const DEFAULT_ROOT: &str = "spectral-lab-out";

pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT))
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: PathBuf,
    pub name: Option<String>,
    pub pipeline: Option<String>,
    pub exit_code: i32,
    pub message: String,
    pub dir: Option<PathBuf>,
}

impl RunOutcome {
    pub fn status(&self) -> &'static str {
        match self.exit_code {
            0 => "pass",
            2 => "config-error",
            3 => "infeasible",
            4 => "invariant-violation",
            _ => "error",
        }
    }
}

pub fn load(path: &Path) -> Result<Scenario, (i32, String)> {
    let text = fs::read_to_string(path)
        .map_err(|e| (1, format!("{}: cannot read: {e}", path.display())))?;
    Scenario::from_text(&text)
        .map_err(|e: ScenarioError| (e.exit_code(), format!("{}: {e}", path.display())))
}

pub fn run_file(path: &Path, root: &Path) -> RunOutcome {
    match load(path) {
        Ok(s) => {
            let mut out = run_scenario(&s, root);
            out.config = path.to_path_buf();
            out
        }
        Err((code, message)) => RunOutcome {
            config: path.to_path_buf(),
            name: None,
            pipeline: None,
            exit_code: code,
            message,
            dir: None,
        },
    }
}

fn exit_for(err: &LabError) -> i32 {
    match err {
        LabError::InfeasibleTarget(_) => 3,
        _ => 1,
    }
}

/// Runs one validated scenario and writes its CSV artifacts and `summary.json`.
pub fn run_scenario(s: &Scenario, root: &Path) -> RunOutcome {
    let dir = root.join(s.output.clone().unwrap_or_else(|| PathBuf::from(&s.name)));
    let mut outcome = RunOutcome {
        config: PathBuf::new(),
        name: Some(s.name.clone()),
        pipeline: Some(s.pipeline.to_string()),
        exit_code: 0,
        message: String::new(),
        dir: Some(dir.clone()),
    };
    let mut report = Report::new();
    let result = pipelines::run(s, &mut report);
    let (code, error) = match &result {
        Ok(()) => {
            let hard = report.hard_failures();
            if hard.is_empty() {
                (0, None)
            } else {
                (
                    4,
                    Some(format!("hard invariants violated: {}", hard.join(", "))),
                )
            }
        }
        Err(e) => (exit_for(e), Some(e.to_string())),
    };
    outcome.exit_code = code;
    outcome.message = error.clone().unwrap_or_else(|| "ok".into());
    if let Err(e) = write_outputs(s, &dir, &report, code, error) {
        outcome.exit_code = 1;
        outcome.message = format!("cannot write outputs to {}: {e}", dir.display());
    }
    outcome
}

fn write_outputs(
    s: &Scenario,
    dir: &Path,
    report: &Report,
    code: i32,
    error: Option<String>,
) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let header = format!(
        "# spectral-lab scenario={} pipeline={} seed={}\n",
        s.name, s.pipeline, s.seed
    );
    for (file, body) in &report.artifacts {
        fs::write(dir.join(file), format!("{header}{body}"))?;
    }
    let summary = json!({
        "scenario": s.name,
        "pipeline": s.pipeline,
        "seed": s.seed,
        "exit_code": code,
        "status": if code == 0 { "pass" } else { "fail" },
        "error": error,
        "invariants": report.invariants,
        "soft_failures": report.soft_failures(),
        "metrics": report.metrics,
        "warnings": report.warnings,
        "artifacts": report.artifacts.iter().map(|(f, _)| f).collect::<Vec<_>>(),
        "parameters": s,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(std::io::Error::other)?;
    fs::write(dir.join("summary.json"), text + "\n")
}

/// Runs every `*.cfg` in `dir` (sorted by file name) on `jobs` workers.
pub fn run_suite(dir: &Path, root: &Path, jobs: usize) -> std::io::Result<Vec<RunOutcome>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    files.sort();
    let loaded: Vec<(PathBuf, Result<Scenario, (i32, String)>)> = files
        .into_iter()
        .map(|p| {
            let l = load(&p);
            (p, l)
        })
        .collect();

    let mut owners: BTreeMap<PathBuf, usize> = BTreeMap::new();
    for (_, s) in loaded
        .iter()
        .filter_map(|(p, l)| l.as_ref().ok().map(|s| (p, s)))
    {
        let out = s.output.clone().unwrap_or_else(|| PathBuf::from(&s.name));
        *owners.entry(out).or_default() += 1;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(std::io::Error::other)?;
    let outcomes = pool.install(|| {
        loaded
            .par_iter()
            .map(|(path, l)| match l {
                Err((code, message)) => RunOutcome {
                    config: path.clone(),
                    name: None,
                    pipeline: None,
                    exit_code: *code,
                    message: message.clone(),
                    dir: None,
                },
                Ok(s) => {
                    let out = s.output.clone().unwrap_or_else(|| PathBuf::from(&s.name));
                    if owners[&out] > 1 {
                        return RunOutcome {
                            config: path.clone(),
                            name: Some(s.name.clone()),
                            pipeline: Some(s.pipeline.to_string()),
                            exit_code: 2,
                            message: format!(
                                "{}: output directory `{}` is shared with another config",
                                path.display(),
                                out.display()
                            ),
                            dir: None,
                        };
                    }
                    let mut o = run_scenario(s, root);
                    o.config = path.clone();
                    o
                }
            })
            .collect::<Vec<_>>()
    });
    fs::create_dir_all(root)?;
    fs::write(root.join("suite.csv"), suite_csv(&outcomes))?;
    Ok(outcomes)
}

pub fn suite_csv(outcomes: &[RunOutcome]) -> String {
    let mut out = String::from("config,scenario,pipeline,status,exit_code\n");
    for o in outcomes {
        let file = o
            .config
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{file},{},{},{},{}",
            o.name.as_deref().unwrap_or("-"),
            o.pipeline.as_deref().unwrap_or("-"),
            o.status(),
            o.exit_code
        );
    }
    out
}

/// Fixed-width pass/fail table for the terminal.
pub fn suite_table(outcomes: &[RunOutcome]) -> String {
    let mut out = format!(
        "{:<24} {:<12} {:<20} {}\n",
        "config", "pipeline", "status", "exit"
    );
    for o in outcomes {
        let file = o
            .config
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{file:<24} {:<12} {:<20} {}",
            o.pipeline.as_deref().unwrap_or("-"),
            o.status(),
            o.exit_code
        );
    }
    let passed = outcomes.iter().filter(|o| o.exit_code == 0).count();
    let _ = writeln!(out, "{passed}/{} scenarios passed", outcomes.len());
    out
}
