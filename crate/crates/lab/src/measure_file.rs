//! Initial-measure files.
//!
//! ```toml
//! density_csv = "rho0_density.csv"   # optional, r,z,value on the scenario grid
//!
//! [[atom]]        # half-plane Dirac mass (omega0, mu)
//! weight = 0.05
//! r = 1.0
//! z = 0.0
//!
//! [[circle]]      # circle measure in R³ (rho0)
//! weight = 0.05
//! radius = 1.0
//! height = 0.0
//!
//! [[gaussian]]    # exp(-d²/width²) scaled to `mass`
//! mass = 0.05
//! r = 1.0
//! z = 0.0
//! width = 0.3
//! ```
//!
//! Gaussian masses are taken on the grid: against `dr dz` for half-plane
//! measures and against `2π r dr dz` for R³ measures.

use std::path::{Path, PathBuf};

use axibouss_core::measures::{CircleAtom, Measure3DAxi, MeasureOmega, OmegaAtom};
use axibouss_core::{HalfPlaneGrid, ScalarField};
use serde::Deserialize;

use crate::{csvio, LabError};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub weight: f64,
    pub r: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleSpec {
    pub weight: f64,
    pub radius: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mass: f64,
    pub r: f64,
    pub z: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub density_csv: Option<PathBuf>,
    #[serde(default)]
    pub atom: Vec<AtomSpec>,
    #[serde(default)]
    pub circle: Vec<CircleSpec>,
    #[serde(default)]
    pub gaussian: Vec<GaussianSpec>,
}

impl MeasureFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(format!("{}: {e}", origin.display())))
    }

    /// Reads the file; a relative `density_csv` is resolved next to it.
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let mut m = Self::parse(&text, path)?;
        if let Some(p) = &m.density_csv {
            let full = path.parent().unwrap_or(Path::new(".")).join(p);
            if !full.is_file() {
                return Err(LabError::Config(format!(
                    "{}: density file {} does not exist",
                    path.display(),
                    full.display()
                )));
            }
            m.density_csv = Some(full);
        }
        for g in &m.gaussian {
            if !(g.width > 0.0) || !g.mass.is_finite() {
                return Err(LabError::Config(format!(
                    "{}: gaussian needs width > 0",
                    path.display()
                )));
            }
        }
        Ok(m)
    }

    fn density(&self, grid: &HalfPlaneGrid, volume: bool) -> Result<Option<ScalarField>, LabError> {
        let mut total: Option<ScalarField> = match &self.density_csv {
            Some(p) => Some(csvio::read_field(p, grid)?),
            None => None,
        };
        for g in &self.gaussian {
            let f = ScalarField::from_fn(*grid, |r, z| {
                let d2 = (r - g.r) * (r - g.r) + (z - g.z) * (z - g.z);
                (-d2 / (g.width * g.width)).exp()
            })?;
            let m = if volume { f.volume_integral() } else { f.integral() };
            if !(m > 0.0) {
                return Err(LabError::Config(format!(
                    "gaussian at ({}, {}) has no mass on the grid",
                    g.r, g.z
                )));
            }
            let f = f.scaled(g.mass / m);
            total = Some(match total {
                Some(t) => t.add(&f)?,
                None => f,
            });
        }
        Ok(total)
    }

    /// Half-plane measure; circle atoms are rejected.
    pub fn to_omega(&self, grid: &HalfPlaneGrid) -> Result<MeasureOmega, LabError> {
        if !self.circle.is_empty() {
            return Err(LabError::Config("circle atoms given for a half-plane measure".into()));
        }
        let atoms = self.atom.iter().map(|a| OmegaAtom::new(a.weight, a.r, a.z)).collect();
        Ok(MeasureOmega::new(atoms, self.density(grid, false)?)?)
    }

    /// Axisymmetric R³ measure; half-plane atoms are rejected.
    pub fn to_axi(&self, grid: &HalfPlaneGrid) -> Result<Measure3DAxi, LabError> {
        if !self.atom.is_empty() {
            return Err(LabError::Config("half-plane atoms given for an R^3 measure".into()));
        }
        let atoms = self
            .circle
            .iter()
            .map(|c| CircleAtom::new(c.weight, c.radius, c.height))
            .collect();
        Ok(Measure3DAxi::new(atoms, self.density(grid, true)?)?)
    }
}
