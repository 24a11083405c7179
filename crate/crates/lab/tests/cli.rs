use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_axibouss"))
}

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Copies the bundled scenario inputs so runs write into a scratch directory.
fn scratch() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for e in fs::read_dir(bundled()).unwrap() {
        let p = e.unwrap().path();
        if p.is_file() {
            fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    dir
}

fn run(args: &[&Path]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gate_passed(dir: &Path, name: &str) -> bool {
    let text = fs::read_to_string(dir.join("gates.csv")).unwrap();
    text.lines()
        .find(|l| l.starts_with(&format!("{name},")))
        .unwrap_or_else(|| panic!("gate {name} missing:\n{text}"))
        .ends_with(",true")
}

const TINY: &str = r#"
name = "tiny"
mode = "boussinesq"
solver = "mild"
output = "out/tiny"

[grid]
r_max = 6.0
z_min = -6.0
z_max = 6.0
nr = 21
nz = 21

[time]
horizon = 0.1
nodes = 8

[data]
omega0 = "ring_omega.toml"
rho0 = "ring_rho.toml"

[diagnostics]
checks = ["contraction"]
"#;

#[test]
fn vortex_ring_scenario_passes_with_plots() {
    let dir = scratch();
    let o = run(&[Path::new("run"), &dir.path().join("vortex_ring_small.cfg")]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    let out = dir.path().join("out/vortex_ring_small");
    for f in [
        "norms.csv",
        "decay_omega.svg",
        "decay_rho.svg",
        "decay_fits.csv",
        "weak_convergence.csv",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let fits = fs::read_to_string(out.join("decay_fits.csv")).unwrap();
    for row in fits.lines().skip(1) {
        let slope: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(slope <= 0.05, "{row}");
    }
}

#[test]
fn nse_maxprinciple_scenario_passes() {
    let dir = scratch();
    let o = run(&[Path::new("run"), &dir.path().join("nse_maxprinciple.cfg")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = dir.path().join("out/nse_maxprinciple");
    assert!(gate_passed(&out, "max_principle_pi"));
    assert!(out.join("stepper_records.csv").is_file());
}

#[test]
fn unknown_key_fails_without_artifacts() {
    let dir = scratch();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, TINY.replace("nodes = 8", "nodes = 8\nsteps = 4")).unwrap();
    let o = run(&[Path::new("run"), &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_data_file_is_a_config_error() {
    let dir = scratch();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, TINY.replace("ring_rho.toml", "nowhere.toml")).unwrap();
    let o = run(&[Path::new("run"), &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn identical_runs_write_identical_csv() {
    let dir = scratch();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(&cfg, TINY).unwrap();
    let read = |name: &str| fs::read(dir.path().join("out/tiny").join(name)).unwrap();
    assert_eq!(run(&[Path::new("run"), &cfg]).status.code(), Some(0));
    let first = (read("norms.csv"), read("omega_final.csv"), read("contraction.csv"));
    assert_eq!(run(&[Path::new("run"), &cfg]).status.code(), Some(0));
    assert_eq!(
        first,
        (read("norms.csv"), read("omega_final.csv"), read("contraction.csv"))
    );
}

#[test]
fn decay_fit_recovers_a_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("series.csv");
    let mut text = String::from("t,value\n");
    for k in 0..12 {
        let t = 10f64.powf(-3.0 + 0.25 * k as f64);
        text.push_str(&format!("{t:e},{:e}\n", 3.0 * t.powf(-0.25)));
    }
    fs::write(&csv, text).unwrap();
    let o = run(&[Path::new("decay-fit"), &csv]);
    assert_eq!(o.status.code(), Some(0));
    let slope: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("slope "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope + 0.25).abs() < 1e-6, "{slope}");
}

#[test]
fn decay_fit_rejects_nonpositive_values() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("series.csv");
    fs::write(&csv, "t,value\n1,1\n2,0\n3,1\n4,1\n20,1\n").unwrap();
    assert_eq!(run(&[Path::new("decay-fit"), &csv]).status.code(), Some(2));
}

#[test]
fn kernels_selfcheck_passes() {
    let o = bin().arg("kernels-selfcheck").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("PASS\n"));
}

#[test]
fn bundled_estimates_are_flat() {
    let dir = scratch();
    let o = run(&[Path::new("verify-estimates"), &dir.path().join("estimates.cfg")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FLAGGED"));
    assert!(dir.path().join("out/estimates/estimates.csv").is_file());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
}

#[test]
fn boussinesq_maxprinciple_scenario_passes() {
    let dir = scratch();
    let o = run(&[Path::new("run"), &dir.path().join("boussinesq_maxprinciple.cfg")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(gate_passed(
        &dir.path().join("out/boussinesq_maxprinciple"),
        "max_principle_gamma"
    ));
}
