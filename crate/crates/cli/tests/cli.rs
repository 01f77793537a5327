use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectral-lab"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
}

fn run(config: &Path, out: &Path) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn kms_example_meets_boundary_identity() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&example("kms.cfg"), out.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = summary(&out.path().join("kms"));
    assert_eq!(s["exit_code"], 0);
    let r = s["invariants"]["boundary_residual"]["value"]
        .as_f64()
        .unwrap();
    assert!(r < 1e-10, "{r}");
    let csv = fs::read_to_string(out.path().join("kms/correlators.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("# spectral-lab scenario=kms pipeline=kms seed=13")
    );
    assert!(lines.next().unwrap().starts_with("t,"));
}

#[test]
fn infeasible_energy_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(example("maxent.cfg"))
        .unwrap()
        .replace("E = 1", "E = -1");
    let cfg = write_cfg(dir.path(), "neg.cfg", &text);
    let o = run(&cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_exits_2_with_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(example("kms.cfg"))
        .unwrap()
        .replace("nodes = 64", "nodez = 64");
    let cfg = write_cfg(dir.path(), "typo.cfg", &text);
    for o in [
        run(&cfg, &dir.path().join("out")),
        bin().arg("validate").arg(&cfg).output().unwrap(),
    ] {
        assert_eq!(o.status.code(), Some(2));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(
            err.contains("line 8") && err.contains("grid.nodez"),
            "{err}"
        );
    }
}

#[test]
fn validate_accepts_every_bundled_example() {
    for entry in fs::read_dir(example("")).unwrap() {
        let p = entry.unwrap().path();
        let o = bin().arg("validate").arg(&p).output().unwrap();
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            p.display(),
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn hard_invariant_failure_exits_4_and_still_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "coarse.cfg",
        "[scenario]\nname = coarse\npipeline = canonical\nseed = 1\n[canonical]\nnu = 50\nE_total = 1\npoints = 2001\nnodes = 5\n",
    );
    let o = run(&cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(4));
    let s = summary(&dir.path().join("out/coarse"));
    assert_eq!(s["status"], "fail");
    assert_eq!(s["invariants"]["equipartition_residual"]["pass"], false);
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("run")
        .arg(example("canonical.cfg"))
        .env("SPECTRAL_LAB_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("canonical/bath_marginal.csv").is_file());
}

#[test]
fn suite_flags_shared_output_directories() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(example("canonical.cfg")).unwrap();
    write_cfg(dir.path(), "a.cfg", &text);
    write_cfg(dir.path(), "b.cfg", &text);
    let bad = text.replace("nu = 50", "nu = -1");
    write_cfg(dir.path(), "c.cfg", &bad);
    let out = dir.path().join("out");
    let o = bin()
        .arg("suite")
        .arg(dir.path())
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let csv = fs::read_to_string(out.join("suite.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "config,scenario,pipeline,status,exit_code");
    assert!(rows[1].starts_with("a.cfg,canonical,canonical,config-error,2"));
    assert!(rows[2].starts_with("b.cfg,canonical,canonical,config-error,2"));
    assert!(rows[3].starts_with("c.cfg,"), "{csv}");
    assert!(!rows[3].ends_with(",0"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0/3 scenarios passed"));
}
