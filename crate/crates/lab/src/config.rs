//! Scenario configuration (`key = value` with `[section]` headers).

use std::path::{Path, PathBuf};

use axibouss_core::mild::{PicardSettings, TimeGrid};
use axibouss_core::HalfPlaneGrid;
use serde::Deserialize;

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Boussinesq,
    Nse,
    GeneralMu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Mild,
    Stepper,
    Chained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Contraction,
    Decay,
    Coupling,
    WeakConvergence,
    MaximumPrinciple,
    Smallness,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nr: usize,
    pub nz: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<HalfPlaneGrid, LabError> {
        Ok(HalfPlaneGrid::new(
            self.r_max, self.z_min, self.z_max, self.nr, self.nz,
        )?)
    }
}

fn default_stretch() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub horizon: f64,
    pub nodes: usize,
    #[serde(default = "default_stretch")]
    pub stretch: f64,
}

impl TimeSpec {
    pub fn build(&self) -> Result<TimeGrid, LabError> {
        Ok(TimeGrid::new(self.horizon, self.nodes, self.stretch)?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub omega0: Option<PathBuf>,
    pub rho0: Option<PathBuf>,
    pub mu: Option<PathBuf>,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_sweeps() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
}

impl Default for PicardSpec {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_sweeps: default_sweeps(),
        }
    }
}

impl PicardSpec {
    pub fn settings(&self) -> PicardSettings {
        PicardSettings {
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            ..PicardSettings::default()
        }
    }
}

fn default_cfl() -> f64 {
    0.5
}

fn default_max_dt() -> f64 {
    2.5e-3
}

fn default_outputs() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSpec {
    /// Hand-over time: the mild solution (chained) or the linear smoothing
    /// of the data (stepper) at `t0` starts the stepper.
    pub t0: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_max_dt")]
    pub max_dt: f64,
    /// Number of evenly spaced output times after `t0`.
    #[serde(default = "default_outputs")]
    pub outputs: usize,
}

fn default_exponents() -> Vec<f64> {
    vec![4.0 / 3.0, 2.0, 4.0, f64::INFINITY]
}

fn default_trend() -> f64 {
    0.05
}

fn default_coupling() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallnessSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub bisections: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default = "default_exponents")]
    pub exponents: Vec<f64>,
    /// Largest accepted log-log slope of a weighted decay series over the
    /// final decade.
    #[serde(default = "default_trend")]
    pub trend_tolerance: f64,
    #[serde(default = "default_coupling")]
    pub coupling_tolerance: f64,
    pub smallness: Option<SmallnessSpec>,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            checks: Vec::new(),
            exponents: default_exponents(),
            trend_tolerance: default_trend(),
            coupling_tolerance: default_coupling(),
            smallness: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub solver: SolverKind,
    pub output: PathBuf,
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub picard: PicardSpec,
    pub stepper: Option<StepperSpec>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base: PathBuf,
}

impl ScenarioConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, LabError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(format!("{}: {e}", origin.display())))?;
        cfg.base = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Parses and validates; nothing is written.
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(&text, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    pub fn has(&self, c: Check) -> bool {
        self.diagnostics.checks.contains(&c)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: &str| Err(LabError::Config(format!("{}: {m}", self.name)));
        self.grid.build()?;
        let tg = self.time.build()?;
        for p in [&self.data.omega0, &self.data.rho0, &self.data.mu]
            .into_iter()
            .flatten()
        {
            let full = self.resolve(p);
            if !full.is_file() {
                return bad(&format!("data file {} does not exist", full.display()));
            }
        }
        if self.data.omega0.is_none() {
            return bad("data.omega0 is required");
        }
        match self.mode {
            Mode::Nse if self.data.rho0.is_some() || self.data.mu.is_some() => {
                return bad("nse mode takes no density data")
            }
            Mode::Boussinesq if self.data.mu.is_some() => {
                return bad("boussinesq mode derives mu from rho0; use general-mu to set it")
            }
            Mode::GeneralMu if self.data.mu.is_none() => return bad("general-mu mode needs data.mu"),
            _ => {}
        }
        if !(self.picard.tol > 0.0) || self.picard.max_sweeps == 0 {
            return bad("picard.tol must be positive and max_sweeps nonzero");
        }
        match (self.solver, &self.stepper) {
            (SolverKind::Mild, _) => {}
            (_, None) => return bad("stepper and chained solvers need a [stepper] section"),
            (_, Some(s)) => {
                if self.mode == Mode::GeneralMu {
                    return bad("the stepper evolves rho~ = r rho and cannot take an independent mu");
                }
                if !(s.t0 > 0.0 && s.t0 < tg.horizon()) {
                    return bad("stepper.t0 must lie in (0, horizon)");
                }
                if !(s.cfl > 0.0 && s.cfl <= 0.9) || !(s.max_dt > 0.0) {
                    return bad("stepper.cfl must be in (0, 0.9] and max_dt positive");
                }
                if self.solver == SolverKind::Chained && tg.nodes()[0] >= s.t0 {
                    return bad("chained runs need mild nodes below stepper.t0");
                }
            }
        }
        if self.diagnostics.exponents.iter().any(|p| !(*p >= 1.0)) {
            return bad("diagnostics.exponents must be >= 1");
        }
        if self.has(Check::MaximumPrinciple) && self.solver == SolverKind::Mild {
            return bad("maximum-principle check needs a stepper run");
        }
        if self.has(Check::Coupling) && self.mode != Mode::Boussinesq {
            return bad("coupling check needs boussinesq mode");
        }
        if self.has(Check::Smallness) && self.diagnostics.smallness.is_none() {
            return bad("smallness check needs [diagnostics.smallness]");
        }
        Ok(())
    }
}
