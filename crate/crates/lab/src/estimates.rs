//! `verify-estimates`: semigroup and Biot-Savart estimate sweeps.

use std::path::{Path, PathBuf};

use axibouss_core::diagnostics::{estimate_sweep, log_times, EstimateKind, EstimateReport};
use serde::Deserialize;

use crate::config::GridSpec;
use crate::csvio::{self, num};
use crate::{LabError, EXIT_GATE, EXIT_PASS};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTimes {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Gaussian profile `exp(-d²/width²)` around `(r, z)` in similarity variables.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub r: f64,
    pub z: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindName {
    Smoothing,
    Weighted,
    Div,
    Biot,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    pub kind: KindName,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default = "one")]
    pub q: f64,
}

fn one() -> f64 {
    1.0
}

impl EstimateSpec {
    pub fn kind(&self) -> EstimateKind {
        let (p, q) = (self.p, self.q);
        match self.kind {
            KindName::Smoothing => EstimateKind::Smoothing { p, q },
            KindName::Weighted => EstimateKind::Weighted {
                alpha: self.alpha,
                beta: self.beta,
                p,
                q,
            },
            KindName::Div => EstimateKind::Div { p, q },
            KindName::Biot => EstimateKind::Biot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatesConfig {
    pub output: PathBuf,
    pub grid: GridSpec,
    pub times: SweepTimes,
    pub case: Vec<CaseSpec>,
    pub estimate: Vec<EstimateSpec>,
    #[serde(skip)]
    pub base: PathBuf,
}

impl EstimatesConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.grid.build()?;
        if cfg.case.is_empty() || cfg.estimate.is_empty() {
            return Err(LabError::Config(
                "need at least one [[case]] and one [[estimate]]".into(),
            ));
        }
        if !(cfg.times.lo > 0.0 && cfg.times.hi > cfg.times.lo && cfg.times.count >= 2) {
            return Err(LabError::Config("times need 0 < lo < hi and count >= 2".into()));
        }
        if cfg.case.iter().any(|c| !(c.width > 0.0)) {
            return Err(LabError::Config("case width must be positive".into()));
        }
        Ok(cfg)
    }
}

/// Sweeps every estimate over every case; exit 1 when a trend is flagged.
pub fn verify_estimates(path: &Path) -> Result<(Vec<EstimateReport>, i32), LabError> {
    let cfg = EstimatesConfig::load(path)?;
    let grid = cfg.grid.build()?;
    let times = log_times(cfg.times.lo, cfg.times.hi, cfg.times.count);
    let bank: Vec<Box<dyn Fn(f64, f64) -> f64>> = cfg
        .case
        .iter()
        .map(|c| {
            let c = c.clone();
            Box::new(move |r: f64, z: f64| (-((r - c.r).powi(2) + (z - c.z).powi(2)) / (c.width * c.width)).exp())
                as Box<dyn Fn(f64, f64) -> f64>
        })
        .collect();
    let mut reports = Vec::new();
    for spec in &cfg.estimate {
        reports.push(estimate_sweep(spec.kind(), &bank, &grid, &times).map_err(|e| match e {
            axibouss_core::Error::InvalidParameter(m) => LabError::Config(m.into()),
            axibouss_core::Error::InvalidExponent(p) => LabError::Config(format!("invalid exponent {p}")),
            e => e.into(),
        })?);
    }
    let dir = if cfg.output.is_absolute() {
        cfg.output.clone()
    } else {
        cfg.base.join(&cfg.output)
    };
    std::fs::create_dir_all(&dir)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for rep in &reports {
        let (a, b, p, q) = rep.kind.parameters();
        let head = [rep.kind.label().to_string(), num(a), num(b), num(p), num(q)];
        for r in &rep.records {
            let mut row = head.to_vec();
            row.extend([
                r.case.to_string(),
                num(r.t),
                num(r.measured),
                num(r.input),
                num(r.ratio),
            ]);
            rows.push(row);
        }
        for s in &rep.summaries {
            let mut row = head.to_vec();
            row.extend([
                s.case.to_string(),
                num(rep.kind.power()),
                num(s.fitted_power),
                num(s.max_ratio),
                s.flagged.to_string(),
            ]);
            summary.push(row);
        }
    }
    csvio::write_table(
        &dir.join("estimates.csv"),
        &[
            "kind", "alpha", "beta", "p", "q", "case", "t", "measured", "input", "ratio",
        ],
        &rows,
    )?;
    csvio::write_table(
        &dir.join("estimate_summary.csv"),
        &[
            "kind",
            "alpha",
            "beta",
            "p",
            "q",
            "case",
            "power",
            "fitted_power",
            "max_ratio",
            "flagged",
        ],
        &summary,
    )?;
    let code = if reports.iter().any(|r| r.any_flagged()) {
        EXIT_GATE
    } else {
        EXIT_PASS
    };
    Ok((reports, code))
}
