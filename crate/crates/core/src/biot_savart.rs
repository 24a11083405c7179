//! Swirl-free axisymmetric velocity from the azimuthal vorticity.
//!
//! The Stokes stream function solves
//! `-(d_r((1/r) d_r φ) + (1/r) d_z² φ) = ω` (the usual
//! `-(d_r² - (1/r) d_r + d_z²) φ = r ω` divided by `r`), discretised in flux
//! form so the matrix is symmetric and an M-matrix. Near the axis
//! `φ ~ c r²`, which fixes the axis flux `(1/r) d_r φ -> 8 φ_0 / dr²`.
//! The outer edges carry `φ = 0`. The operator is separable, so it is solved
//! directly in the `z` sine basis and polished by iterative refinement.

use alloc::vec;

use crate::fields::{lp_norm_omega, VectorField};
use crate::linalg::{SeparableOperator, Tridiag};
use crate::{Error, HalfPlaneGrid, Result, ScalarField};

/// Default relative residual target.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Boundary conditions imposed on the stream function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRecord {
    /// `φ ~ c r²` near the axis, so `φ = 0` on `r = 0`.
    pub axis_quadratic: bool,
    /// Homogeneous Dirichlet data at `r = r_max` and `z = z_min, z_max`.
    pub outer_dirichlet: bool,
    /// Largest `|φ|` on the outermost ring of nodes, relative to `max |φ|`.
    pub edge_ratio: f64,
}

/// Stream function with its solve diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFunction {
    pub phi: ScalarField,
    pub residual: f64,
    pub boundary: BoundaryRecord,
}

/// Factorised stream-function operator for one grid; reuse across solves.
#[derive(Debug, Clone)]
pub struct StreamSolver {
    grid: HalfPlaneGrid,
    op: SeparableOperator,
}

impl StreamSolver {
    pub fn new(grid: &HalfPlaneGrid) -> Result<Self> {
        let (nr, dr) = (grid.nr(), grid.dr());
        let mut t = Tridiag::zeros(nr);
        let dr2 = dr * dr;
        for i in 0..nr {
            let face_out = (i as f64 + 1.0) * dr;
            if i + 1 < nr {
                let c = 1.0 / (face_out * dr2);
                t.diag[i] += c;
                t.upper[i] = -c;
            } else {
                t.diag[i] += 2.0 / (face_out * dr2);
            }
            if i > 0 {
                let c = 1.0 / (i as f64 * dr * dr2);
                t.diag[i] += c;
                t.lower[i] = -c;
            } else {
                t.diag[i] += 8.0 / (dr2 * dr);
            }
        }
        let d = (0..nr).map(|i| -1.0 / grid.r(i)).collect();
        Ok(Self {
            grid: *grid,
            op: SeparableOperator::new(grid, t, d)?,
        })
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        &self.grid
    }

    /// Stream function for `omega`, to relative residual `tol`.
    pub fn solve(&self, omega: &ScalarField, tol: f64) -> Result<StreamFunction> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive"));
        }
        if omega.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        omega.check_finite("vorticity")?;
        let (phi, residual) = self.op.solve(omega.values(), tol)?;
        let phi = ScalarField::from_raw(self.grid, phi);
        let boundary = BoundaryRecord {
            axis_quadratic: true,
            outer_dirichlet: true,
            edge_ratio: edge_ratio(&phi),
        };
        Ok(StreamFunction {
            phi,
            residual,
            boundary,
        })
    }

    /// `A φ` for the discrete operator (the vorticity a stream function induces).
    pub fn vorticity_of(&self, phi: &ScalarField) -> Result<ScalarField> {
        if phi.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField::from_raw(self.grid, self.op.apply(phi.values())))
    }

    pub fn velocity(&self, omega: &ScalarField, tol: f64) -> Result<VectorField> {
        Ok(velocity_from_stream(&self.solve(omega, tol)?.phi))
    }
}

fn edge_ratio(phi: &ScalarField) -> f64 {
    let g = phi.grid();
    let m = phi.abs_max();
    if m == 0.0 {
        return 0.0;
    }
    let mut e: f64 = 0.0;
    for l in 0..g.nz() {
        e = e.max(libm::fabs(phi.at(g.nr() - 1, l)));
    }
    for j in 0..g.nr() {
        e = e.max(libm::fabs(phi.at(j, 0))).max(libm::fabs(phi.at(j, g.nz() - 1)));
    }
    e / m
}

/// Solves for the stream function on `omega`'s grid.
pub fn solve_stream(omega: &ScalarField, tol: f64) -> Result<StreamFunction> {
    StreamSolver::new(omega.grid())?.solve(omega, tol)
}

/// `v^r = -(1/r) d_z φ`, `v^z = (1/r) d_r φ` by centred differences, with an
/// even reflection across the axis and odd reflections at the outer edges.
pub fn velocity_from_stream(phi: &ScalarField) -> VectorField {
    let g = *phi.grid();
    let (nr, nz) = (g.nr(), g.nz());
    let mut vr = vec![0.0; g.len()];
    let mut vz = vec![0.0; g.len()];
    for l in 0..nz {
        for j in 0..nr {
            let c = phi.at(j, l);
            let below = if l > 0 { phi.at(j, l - 1) } else { -c };
            let above = if l + 1 < nz { phi.at(j, l + 1) } else { -c };
            let left = if j > 0 { phi.at(j - 1, l) } else { c };
            let right = if j + 1 < nr { phi.at(j + 1, l) } else { -c };
            let r = g.r(j);
            vr[g.index(j, l)] = -(above - below) / (2.0 * g.dz() * r);
            vz[g.index(j, l)] = (right - left) / (2.0 * g.dr() * r);
        }
    }
    VectorField {
        vr: ScalarField::from_raw(g, vr),
        vz: ScalarField::from_raw(g, vz),
    }
}

/// Velocity induced by `omega`.
pub fn velocity_from_vorticity(omega: &ScalarField, tol: f64) -> Result<VectorField> {
    Ok(velocity_from_stream(&solve_stream(omega, tol)?.phi))
}

/// Interpolation exponent `α = (m/2)(ℓ - 2)/(ℓ - m)` of the sup bound.
pub fn interpolation_alpha(m: f64, l: f64) -> f64 {
    0.5 * m * (l - 2.0) / (l - m)
}

/// Empirical constants of the two velocity bounds used by the mild theory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityBounds {
    /// `||v||_{L4} / ||ω||_{L4/3}`.
    pub l4_ratio: f64,
    /// `||v||_∞ / (||ω||_{Lm}^α ||ω||_{Lℓ}^{1-α})`.
    pub sup_ratio: f64,
    pub m: f64,
    pub l: f64,
    pub alpha: f64,
}

/// Measures both bounds with `(m, ℓ) = (3/2, 4)`; `None` for zero vorticity.
pub fn velocity_bounds_report(omega: &ScalarField, v: &VectorField) -> Option<VelocityBounds> {
    let (m, l) = (1.5, 4.0);
    let alpha = interpolation_alpha(m, l);
    let w43 = lp_norm_omega(omega, 4.0 / 3.0).ok()?;
    let wm = lp_norm_omega(omega, m).ok()?;
    let wl = lp_norm_omega(omega, l).ok()?;
    if !(w43 > 0.0 && wm > 0.0 && wl > 0.0) {
        return None;
    }
    let mag = v.magnitude();
    let v4 = lp_norm_omega(&mag, 4.0).ok()?;
    let vinf = mag.abs_max();
    Some(VelocityBounds {
        l4_ratio: v4 / w43,
        sup_ratio: vinf / (libm::pow(wm, alpha) * libm::pow(wl, 1.0 - alpha)),
        m,
        l,
        alpha,
    })
}
