//! CSV field dumps and tables.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use axibouss_core::mild::NormRow;
use axibouss_core::{HalfPlaneGrid, ScalarField};

use crate::LabError;

/// Thirteen significant digits, stable across runs.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes `r,z,value` rows in storage order (z outer, r inner).
pub fn write_field(path: &Path, f: &ScalarField) -> Result<(), LabError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "z", "value"])?;
    let g = f.grid();
    for l in 0..g.nz() {
        for j in 0..g.nr() {
            w.write_record([num(g.r(j)), num(g.z(l)), num(f.at(j, l))])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an `r,z,value` file onto `grid`; every node must appear exactly once.
pub fn read_field(path: &Path, grid: &HalfPlaneGrid) -> Result<ScalarField, LabError> {
    let mut rd = csv::Reader::from_path(path)?;
    let headers = rd.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| LabError::Data(format!("{}: missing column '{name}'", path.display())))
    };
    let (cr, cz, cv) = (col("r")?, col("z")?, col("value")?);
    let mut values = vec![f64::NAN; grid.len()];
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| -> Result<f64, LabError> {
            rec.get(c)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| LabError::Data(format!("{}: bad number on row {}", path.display(), line + 2)))
        };
        let (r, z, v) = (get(cr)?, get(cz)?, get(cv)?);
        let (j, l) = grid
            .node_at(r, z)
            .ok_or_else(|| LabError::Data(format!("{}: ({r}, {z}) is not a grid node", path.display())))?;
        values[grid.index(j, l)] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(LabError::Data(format!(
            "{}: does not cover every grid node",
            path.display()
        )));
    }
    Ok(ScalarField::new(*grid, values)?)
}

pub const NORM_HEADER: [&str; 16] = [
    "t",
    "omega_L1",
    "omega_L43",
    "omega_L2",
    "omega_L4",
    "omega_Linf",
    "rho_tilde_L1",
    "rho_tilde_L43",
    "rho_tilde_L2",
    "rho_tilde_L4",
    "rho_tilde_Linf",
    "rho_L1",
    "rho_L43",
    "rho_L2",
    "rho_L4",
    "rho_Linf",
];

pub fn write_norms(path: &Path, rows: &[NormRow]) -> Result<(), LabError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(NORM_HEADER)?;
    for row in rows {
        let mut rec = vec![num(row.t)];
        for block in [row.omega, row.rho_tilde, row.rho] {
            rec.extend(block.iter().map(|v| num(*v)));
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table writer: header plus rows of preformatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), LabError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Two numeric columns for a decay fit: `t` and `value` by name, else the
/// first two columns.
pub fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<f64>), LabError> {
    let mut rd = csv::Reader::from_path(path)?;
    let headers = rd.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (ct, cv) = match (find("t"), find("value")) {
        (Some(a), Some(b)) => (a, b),
        _ if headers.len() >= 2 => (0, 1),
        _ => return Err(LabError::Data(format!("{}: need two columns", path.display()))),
    };
    let (mut t, mut v) = (Vec::new(), Vec::new());
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| {
            rec.get(c)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| LabError::Data(format!("{}: bad number on row {}", path.display(), line + 2)))
        };
        t.push(get(ct)?);
        v.push(get(cv)?);
    }
    Ok((t, v))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), LabError> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
