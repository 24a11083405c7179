//! Separable solves on the half-plane grid.
//!
//! Every implicit operator used here has the form `T (x) I + diag(d) (x) Dz`,
//! where `T` is tridiagonal in `r` and `Dz` is the three-point second
//! difference in `z` with homogeneous Dirichlet data at both ends. The
//! discrete sine basis diagonalises `Dz`, leaving one tridiagonal solve per
//! mode.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, HalfPlaneGrid, Result};

/// Orthonormal DST-II basis for the cell-centred Dirichlet Laplacian.
#[derive(Debug, Clone)]
pub(crate) struct SineBasis {
    n: usize,
    /// Row `m` holds mode `m + 1` sampled at the `n` nodes.
    modes: Vec<f64>,
    /// Eigenvalues of `Dz` (already divided by `dz^2`).
    eig: Vec<f64>,
}

impl SineBasis {
    pub(crate) fn new(n: usize, dz: f64) -> Self {
        let mut modes = vec![0.0; n * n];
        let mut eig = vec![0.0; n];
        for m in 0..n {
            let k = (m + 1) as f64;
            let c = if m + 1 == n {
                libm::sqrt(1.0 / n as f64)
            } else {
                libm::sqrt(2.0 / n as f64)
            };
            for l in 0..n {
                modes[m * n + l] = c * libm::sin(PI * k * (l as f64 + 0.5) / n as f64);
            }
            let s = libm::sin(PI * k / (2.0 * n as f64));
            eig[m] = -4.0 * s * s / (dz * dz);
        }
        Self { n, modes, eig }
    }

    /// Row-wise transform of an `n x width` array (rows indexed by `z`).
    fn forward(&self, x: &[f64], width: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for m in 0..self.n {
            let dst = &mut out[m * width..(m + 1) * width];
            for l in 0..self.n {
                let u = self.modes[m * self.n + l];
                let src = &x[l * width..(l + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += u * s;
                }
            }
        }
    }

    fn inverse(&self, x: &[f64], width: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for m in 0..self.n {
            let src = &x[m * width..(m + 1) * width];
            for l in 0..self.n {
                let u = self.modes[m * self.n + l];
                let dst = &mut out[l * width..(l + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += u * s;
                }
            }
        }
    }
}

/// Tridiagonal matrix by diagonals; `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tridiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiag {
    pub(crate) fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.diag.len()
    }

    /// `a * self + b * I`.
    pub(crate) fn affine(&self, a: f64, b: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| a * v).collect(),
            diag: self.diag.iter().map(|v| a * v + b).collect(),
            upper: self.upper.iter().map(|v| a * v).collect(),
        }
    }

    /// `y = self * x`.
    pub(crate) fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * x[i + 1];
            }
            y[i] = v;
        }
    }
}

/// `T (x) I + diag(d) (x) Dz` with the per-mode Thomas factors cached.
#[derive(Debug, Clone)]
pub(crate) struct SeparableOperator {
    nr: usize,
    nz: usize,
    dz: f64,
    basis: SineBasis,
    t: Tridiag,
    d: Vec<f64>,
    upper_scaled: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl SeparableOperator {
    pub(crate) fn new(grid: &HalfPlaneGrid, t: Tridiag, d: Vec<f64>) -> Result<Self> {
        let (nr, nz) = (grid.nr(), grid.nz());
        assert_eq!(t.len(), nr);
        assert_eq!(d.len(), nr);
        let basis = SineBasis::new(nz, grid.dz());
        let mut upper_scaled = vec![0.0; nr * nz];
        let mut inv_pivot = vec![0.0; nr * nz];
        for m in 0..nz {
            let lam = basis.eig[m];
            let cp = &mut upper_scaled[m * nr..(m + 1) * nr];
            let ip = &mut inv_pivot[m * nr..(m + 1) * nr];
            let mut prev = 0.0;
            for i in 0..nr {
                let b = t.diag[i] + lam * d[i];
                let pivot = if i == 0 { b } else { b - t.lower[i] * prev };
                if !(libm::fabs(pivot) > 1e-300) || !pivot.is_finite() {
                    return Err(Error::NonFinite("singular tridiagonal pivot"));
                }
                ip[i] = 1.0 / pivot;
                cp[i] = if i + 1 < nr { t.upper[i] / pivot } else { 0.0 };
                prev = cp[i];
            }
        }
        Ok(Self {
            nr,
            nz,
            dz: grid.dz(),
            basis,
            t,
            d,
            upper_scaled,
            inv_pivot,
        })
    }

    /// Direct solve (sine transform, tridiagonal sweeps, inverse transform).
    pub(crate) fn solve_direct(&self, rhs: &[f64]) -> Vec<f64> {
        let (nr, nz) = (self.nr, self.nz);
        let mut hat = vec![0.0; nr * nz];
        self.basis.forward(rhs, nr, &mut hat);
        for m in 0..nz {
            let row = &mut hat[m * nr..(m + 1) * nr];
            let cp = &self.upper_scaled[m * nr..(m + 1) * nr];
            let ip = &self.inv_pivot[m * nr..(m + 1) * nr];
            row[0] *= ip[0];
            for i in 1..nr {
                row[i] = (row[i] - self.t.lower[i] * row[i - 1]) * ip[i];
            }
            for i in (0..nr - 1).rev() {
                row[i] -= cp[i] * row[i + 1];
            }
        }
        let mut out = vec![0.0; nr * nz];
        self.basis.inverse(&hat, nr, &mut out);
        out
    }

    /// Matrix-free application of the operator.
    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (nr, nz) = (self.nr, self.nz);
        let inv_dz2 = 1.0 / (self.dz * self.dz);
        let mut y = vec![0.0; nr * nz];
        for l in 0..nz {
            let row = &x[l * nr..(l + 1) * nr];
            self.t.apply(row, &mut y[l * nr..(l + 1) * nr]);
            for i in 0..nr {
                let c = x[l * nr + i];
                let below = if l > 0 { x[(l - 1) * nr + i] } else { -c };
                let above = if l + 1 < nz { x[(l + 1) * nr + i] } else { -c };
                y[l * nr + i] += self.d[i] * (above - 2.0 * c + below) * inv_dz2;
            }
        }
        y
    }

    /// Direct solve followed by iterative refinement until the relative
    /// residual is at most `tol`. Returns the solution and achieved residual.
    pub(crate) fn solve(&self, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
        const MAX_REFINE: usize = 8;
        let norm_b = l2(rhs);
        if norm_b == 0.0 {
            return Ok((vec![0.0; rhs.len()], 0.0));
        }
        let mut x = self.solve_direct(rhs);
        let mut res = 0.0;
        for it in 0..=MAX_REFINE {
            let ax = self.apply(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            res = l2(&r) / norm_b;
            if !res.is_finite() {
                return Err(Error::NonFinite("separable solve"));
            }
            if res <= tol {
                return Ok((x, res));
            }
            if it == MAX_REFINE {
                break;
            }
            let dx = self.solve_direct(&r);
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        }
        Err(Error::SolverStalled {
            residual: res,
            iterations: MAX_REFINE,
        })
    }
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    libm::sqrt(x.iter().map(|v| v * v).sum())
}
