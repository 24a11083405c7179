//! `kernels-selfcheck`: the S1 kernel against its own PDE and its mass limit.

use axibouss_core::measures::MeasureOmega;
use axibouss_core::semigroups::{s1_apply, s1_kernel};
use axibouss_core::HalfPlaneGrid;

use crate::LabError;

/// Time at which the PDE residual is measured.
pub const RESIDUAL_TIME: f64 = 0.05;
/// Required residual reduction per grid halving.
pub const RESIDUAL_HALVING: f64 = 1.8;
/// Mass tolerance at the smallest time.
pub const MASS_TOL: f64 = 0.01;

/// Relative L² residual of `(d_t - d_rr - d_r/r - d_zz + 1/r²) u` for
/// `u = S1(t) δ_(1,0)` with three-point differences, on `n × n` nodes.
pub fn kernel_residual(n: usize) -> Result<f64, LabError> {
    let t = RESIDUAL_TIME;
    let g = HalfPlaneGrid::new(2.5, -1.25, 1.25, n, n)?;
    let (dr, dz) = (g.dr(), g.dz());
    let u = |r: f64, z: f64| s1_kernel(t, r, z, 1.0, 0.0);
    let ht = 1e-5 * t;
    let (mut res, mut scale) = (0.0, 0.0);
    for l in 1..n - 1 {
        for j in 1..n - 1 {
            let (r, z) = (g.r(j), g.z(l));
            let c = u(r, z);
            let ut = (s1_kernel(t + ht, r, z, 1.0, 0.0) - s1_kernel(t - ht, r, z, 1.0, 0.0)) / (2.0 * ht);
            let (ue, uw) = (u(r + dr, z), u(r - dr, z));
            let (un, us) = (u(r, z + dz), u(r, z - dz));
            let lap = (ue - 2.0 * c + uw) / (dr * dr) + (ue - uw) / (2.0 * dr * r) + (un - 2.0 * c + us) / (dz * dz);
            let e = ut - lap + c / (r * r);
            res += e * e;
            scale += ut * ut;
        }
    }
    Ok((res / scale).sqrt())
}

/// `∫ S1(t) δ_(1,0) dr dz` on a local grid resolving `sqrt(t)` by ten cells.
pub fn kernel_mass(t: f64) -> Result<f64, LabError> {
    let s = t.sqrt();
    let half = 12.0 * s;
    let h = s / 10.0;
    let nr = ((1.0 + half) / h).ceil() as usize;
    let nz = (2.0 * half / h).ceil() as usize;
    let g = HalfPlaneGrid::new(1.0 + half, -half, half, nr, nz)?;
    Ok(s1_apply(t, &MeasureOmega::dirac(1.0, 1.0, 0.0)?, &g)?.integral())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    /// `(n, residual)` for successive refinements.
    pub residuals: Vec<(usize, f64)>,
    pub halvings: Vec<f64>,
    /// `(t, mass)`.
    pub masses: Vec<(f64, f64)>,
}

impl SelfCheck {
    pub fn residual_ok(&self) -> bool {
        self.halvings.iter().all(|h| *h >= RESIDUAL_HALVING)
    }

    pub fn mass_ok(&self) -> bool {
        self.masses.last().is_some_and(|(_, m)| (m - 1.0).abs() <= MASS_TOL)
    }

    pub fn passed(&self) -> bool {
        self.residual_ok() && self.mass_ok()
    }
}

pub fn run_selfcheck() -> Result<SelfCheck, LabError> {
    let residuals = [40, 80, 160]
        .iter()
        .map(|&n| Ok((n, kernel_residual(n)?)))
        .collect::<Result<Vec<_>, LabError>>()?;
    let halvings = residuals.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let masses = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&t| Ok((t, kernel_mass(t)?)))
        .collect::<Result<Vec<_>, LabError>>()?;
    Ok(SelfCheck {
        residuals,
        halvings,
        masses,
    })
}
