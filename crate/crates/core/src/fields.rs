//! Half-plane grids, scalar and vector fields, and their norms.
//!
//! Nodes sit at cell centres, so `r_j = (j + 1/2) dr > 0` and nothing is ever
//! evaluated on the axis. Values are stored row-major over `z` then `r`:
//! index `l * nr + j` holds the node `(r_j, z_l)`. All integrals use the
//! midpoint rule.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result};

/// Uniform cell-centred grid on `(0, r_max) x (z_min, z_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlaneGrid {
    r_max: f64,
    z_min: f64,
    z_max: f64,
    nr: usize,
    nz: usize,
    dr: f64,
    dz: f64,
}

impl HalfPlaneGrid {
    pub fn new(r_max: f64, z_min: f64, z_max: f64, nr: usize, nz: usize) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidGrid("r_max must be positive and finite"));
        }
        if !(z_max > z_min) || !z_min.is_finite() || !z_max.is_finite() {
            return Err(Error::InvalidGrid("need z_min < z_max, both finite"));
        }
        if nr == 0 || nz == 0 || nr * nz < 4 {
            return Err(Error::InvalidGrid("need at least 4 nodes"));
        }
        Ok(Self {
            r_max,
            z_min,
            z_max,
            nr,
            nz,
            dr: r_max / nr as f64,
            dz: (z_max - z_min) / nz as f64,
        })
    }

    /// 128 x 256 nodes on `(0, 6) x (-6, 6)`.
    pub fn desk() -> Self {
        Self::new(6.0, -6.0, 6.0, 128, 256).expect("static grid")
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn z_min(&self) -> f64 {
        self.z_min
    }
    pub fn z_max(&self) -> f64 {
        self.z_max
    }
    pub fn nr(&self) -> usize {
        self.nr
    }
    pub fn nz(&self) -> usize {
        self.nz
    }
    pub fn dr(&self) -> f64 {
        self.dr
    }
    pub fn dz(&self) -> f64 {
        self.dz
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn r(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dr
    }

    #[inline]
    pub fn z(&self, l: usize) -> f64 {
        self.z_min + (l as f64 + 0.5) * self.dz
    }

    #[inline]
    pub fn index(&self, j: usize, l: usize) -> usize {
        l * self.nr + j
    }

    pub fn cell_area(&self) -> f64 {
        self.dr * self.dz
    }

    pub fn r_nodes(&self) -> Vec<f64> {
        (0..self.nr).map(|j| self.r(j)).collect()
    }

    pub fn z_nodes(&self) -> Vec<f64> {
        (0..self.nz).map(|l| self.z(l)).collect()
    }

    /// Same box with `factor` times as many cells in each direction.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.r_max, self.z_min, self.z_max, self.nr * factor, self.nz * factor)
    }

    /// Cell containing `(r, z)`, if inside the box.
    pub fn locate(&self, r: f64, z: f64) -> Option<(usize, usize)> {
        if !(r >= 0.0 && r < self.r_max && z >= self.z_min && z < self.z_max) {
            return None;
        }
        let j = ((r / self.dr) as usize).min(self.nr - 1);
        let l = (((z - self.z_min) / self.dz) as usize).min(self.nz - 1);
        Some((j, l))
    }

    /// Node at `(r, z)` within `1e-9` cell widths, if there is one.
    pub fn node_at(&self, r: f64, z: f64) -> Option<(usize, usize)> {
        let (j, l) = self.locate(r, z)?;
        let close = libm::fabs(self.r(j) - r) < 1e-9 * self.dr && libm::fabs(self.z(l) - z) < 1e-9 * self.dz;
        close.then_some((j, l))
    }
}

/// Which measure a pairing integrates against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureFlag {
    /// Flat half-plane measure `dr dz`.
    DrDz,
    /// Axisymmetric volume measure `2 pi r dr dz`.
    Volume,
}

/// Scalar function sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: HalfPlaneGrid,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wraps node values, rejecting wrong lengths and non-finite entries.
    pub fn new(grid: HalfPlaneGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let f = Self { grid, values };
        f.check_finite("field values")?;
        Ok(f)
    }

    pub(crate) fn from_raw(grid: HalfPlaneGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: HalfPlaneGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f(r, z)` at every node.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: HalfPlaneGrid, f: F) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for l in 0..grid.nz() {
            let z = grid.z(l);
            for j in 0..grid.nr() {
                values.push(f(grid.r(j), z));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, j: usize, l: usize) -> f64 {
        self.values[self.grid.index(j, l)]
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self::from_raw(self.grid, values))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x * y).collect();
        Ok(Self::from_raw(self.grid, values))
    }

    /// Multiplies by `r^alpha` node by node.
    pub fn times_r_pow(&self, alpha: f64) -> Self {
        let g = self.grid;
        let weights: Vec<f64> = (0..g.nr()).map(|j| libm::pow(g.r(j), alpha)).collect();
        let mut out = self.clone();
        for row in out.values.chunks_exact_mut(g.nr()) {
            for (v, w) in row.iter_mut().zip(&weights) {
                *v *= w;
            }
        }
        out
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn abs_max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    /// Midpoint integral against `dr dz`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Midpoint integral against `2 pi r dr dz`.
    pub fn volume_integral(&self) -> f64 {
        pair_field_testfn(self, |_, _| 1.0, MeasureFlag::Volume)
    }
}

/// Swirl-free axisymmetric velocity `(v^r, v^z)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub vr: ScalarField,
    pub vz: ScalarField,
}

impl VectorField {
    pub fn new(vr: ScalarField, vz: ScalarField) -> Result<Self> {
        vr.same_grid(&vz)?;
        Ok(Self { vr, vz })
    }

    pub fn zeros(grid: HalfPlaneGrid) -> Self {
        Self {
            vr: ScalarField::zeros(grid),
            vz: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        self.vr.grid()
    }

    /// Centred-difference `d_r v^r + v^r / r + d_z v^z` at interior nodes
    /// (zero on the outermost ring of nodes, where the stencil is incomplete).
    pub fn divergence(&self) -> ScalarField {
        let g = *self.grid();
        let mut out = ScalarField::zeros(g);
        for l in 1..g.nz().saturating_sub(1) {
            for j in 1..g.nr().saturating_sub(1) {
                let dvr = (self.vr.at(j + 1, l) - self.vr.at(j - 1, l)) / (2.0 * g.dr());
                let dvz = (self.vz.at(j, l + 1) - self.vz.at(j, l - 1)) / (2.0 * g.dz());
                out.values[g.index(j, l)] = dvr + self.vr.at(j, l) / g.r(j) + dvz;
            }
        }
        out
    }

    /// Discrete `L2(dr dz)` norm of [`VectorField::divergence`].
    pub fn divergence_residual(&self) -> f64 {
        lp_norm_omega(&self.divergence(), 2.0).unwrap_or(f64::NAN)
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let values = self
            .vr
            .values()
            .iter()
            .zip(self.vz.values())
            .map(|(a, b)| libm::hypot(*a, *b))
            .collect();
        ScalarField::from_raw(*self.grid(), values)
    }
}

/// Validates a Lebesgue exponent (`f64::INFINITY` allowed).
pub fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

fn norm_with_measure(f: &ScalarField, p: f64, alpha: f64, flag: MeasureFlag) -> Result<f64> {
    check_exponent(p)?;
    let g = f.grid;
    let weights: Vec<f64> = (0..g.nr())
        .map(|j| if alpha == 0.0 { 1.0 } else { libm::pow(g.r(j), alpha) })
        .collect();
    if p.is_infinite() {
        let mut m: f64 = 0.0;
        for row in f.values.chunks_exact(g.nr()) {
            for (v, w) in row.iter().zip(&weights) {
                m = m.max(libm::fabs(v * w));
            }
        }
        return Ok(m);
    }
    let measure: Vec<f64> = (0..g.nr())
        .map(|j| match flag {
            MeasureFlag::DrDz => g.cell_area(),
            MeasureFlag::Volume => 2.0 * PI * g.r(j) * g.cell_area(),
        })
        .collect();
    // Scale by the max first so large p cannot overflow.
    let scale = f
        .values
        .chunks_exact(g.nr())
        .flat_map(|row| row.iter().zip(&weights).map(|(v, w)| libm::fabs(v * w)))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for row in f.values.chunks_exact(g.nr()) {
        for ((v, w), m) in row.iter().zip(&weights).zip(&measure) {
            let a = libm::fabs(v * w) / scale;
            let ap = if p == 1.0 {
                a
            } else if p == 2.0 {
                a * a
            } else {
                libm::pow(a, p)
            };
            sum += ap * m;
        }
    }
    Ok(scale * libm::pow(sum, 1.0 / p))
}

/// `(int_Omega |f|^p dr dz)^{1/p}`; node max for `p = inf`.
pub fn lp_norm_omega(f: &ScalarField, p: f64) -> Result<f64> {
    norm_with_measure(f, p, 0.0, MeasureFlag::DrDz)
}

/// `(int |f|^p 2 pi r dr dz)^{1/p}` for an axisymmetric profile on R³.
pub fn lp_norm_r3(f: &ScalarField, p: f64) -> Result<f64> {
    norm_with_measure(f, p, 0.0, MeasureFlag::Volume)
}

/// `L^p(Omega)` norm of `r^alpha f`, `|alpha| <= 2`.
pub fn weighted_lp_norm(f: &ScalarField, alpha: f64, p: f64) -> Result<f64> {
    if !(libm::fabs(alpha) <= 2.0) {
        return Err(Error::InvalidParameter("weight exponent must satisfy |alpha| <= 2"));
    }
    norm_with_measure(f, p, alpha, MeasureFlag::DrDz)
}

/// Midpoint quadrature of `int f psi` against the flagged measure.
pub fn pair_field_testfn<F: Fn(f64, f64) -> f64>(f: &ScalarField, psi: F, flag: MeasureFlag) -> f64 {
    let g = f.grid;
    let mut sum = 0.0;
    for l in 0..g.nz() {
        let z = g.z(l);
        for j in 0..g.nr() {
            let r = g.r(j);
            let w = match flag {
                MeasureFlag::DrDz => 1.0,
                MeasureFlag::Volume => 2.0 * PI * r,
            };
            sum += f.values[g.index(j, l)] * psi(r, z) * w;
        }
    }
    sum * g.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn box_grid(nr: usize, nz: usize) -> HalfPlaneGrid {
        HalfPlaneGrid::new(1.0, -1.0, 1.0, nr, nz).unwrap()
    }

    #[test]
    fn grid_invariants() {
        let g = HalfPlaneGrid::desk();
        assert_eq!((g.nr(), g.nz()), (128, 256));
        assert!(g.r(0) > 0.0);
        assert!((g.dr() - 6.0 / 128.0).abs() < 1e-15);
        assert!(HalfPlaneGrid::new(1.0, 0.0, 1.0, 1, 3).is_err());
        assert!(HalfPlaneGrid::new(0.0, 0.0, 1.0, 4, 4).is_err());
        assert!(HalfPlaneGrid::new(1.0, 1.0, 1.0, 4, 4).is_err());
        assert_eq!(g.node_at(g.r(5), g.z(7)), Some((5, 7)));
        assert_eq!(g.node_at(g.r(5) + 0.3 * g.dr(), g.z(7)), None);
    }

    #[test]
    fn field_rejects_nonfinite() {
        let g = box_grid(2, 2);
        assert!(ScalarField::new(g, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
        assert!(ScalarField::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn zero_field_norms_vanish() {
        let f = ScalarField::zeros(box_grid(8, 8));
        for p in [1.0, 4.0 / 3.0, 2.0, f64::INFINITY] {
            assert_eq!(lp_norm_omega(&f, p).unwrap(), 0.0);
            assert_eq!(lp_norm_r3(&f, p).unwrap(), 0.0);
        }
        assert_eq!(pair_field_testfn(&f, |r, z| r + z, MeasureFlag::DrDz), 0.0);
    }

    #[test]
    fn unit_field_integrates_box_area() {
        let f = ScalarField::from_fn(box_grid(16, 32), |_, _| 1.0).unwrap();
        assert!((lp_norm_omega(&f, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(lp_norm_omega(&f, 0.5).is_err());
    }

    #[test]
    fn cylinder_volume() {
        let g = HalfPlaneGrid::new(2.0, -1.0, 2.0, 64, 96).unwrap();
        let f = ScalarField::from_fn(g, |r, z| if r < 1.0 && z > 0.0 && z < 1.0 { 1.0 } else { 0.0 }).unwrap();
        assert!((lp_norm_r3(&f, 1.0).unwrap() - PI).abs() < 1e-12);
        let rf = f.times_r_pow(1.0);
        let lhs = lp_norm_r3(&f, 1.0).unwrap();
        let rhs = 2.0 * PI * lp_norm_omega(&rf, 1.0).unwrap();
        assert!((lhs - rhs).abs() < 1e-13 * lhs);
    }

    #[test]
    fn weighted_norm_cases() {
        let g = HalfPlaneGrid::new(1.0, 0.0, 1.0, 50, 10).unwrap();
        let one = ScalarField::from_fn(g, |_, _| 1.0).unwrap();
        assert!((weighted_lp_norm(&one, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(
            weighted_lp_norm(&one, 0.0, 3.0).unwrap(),
            lp_norm_omega(&one, 3.0).unwrap()
        );
        assert!(weighted_lp_norm(&one, 2.5, 1.0).is_err());

        let g = HalfPlaneGrid::new(4.0, -2.0, 2.0, 64, 64).unwrap();
        let bump = ScalarField::from_fn(g, |r, z| libm::exp(-20.0 * ((r - 2.0).powi(2) + z * z))).unwrap();
        let over_r = bump.times_r_pow(-1.0);
        for p in [1.0, 2.0, f64::INFINITY] {
            let a = weighted_lp_norm(&bump, -1.0, p).unwrap();
            let b = lp_norm_omega(&over_r, p).unwrap();
            assert!((a - b).abs() <= 1e-14 * b);
        }
    }

    fn bump(r: f64, z: f64) -> f64 {
        libm::exp(-(r - 1.0) * (r - 1.0) - z * z)
    }

    #[test]
    fn l2_norm_matches_refined_quadrature() {
        let g = HalfPlaneGrid::new(6.0, -6.0, 6.0, 32, 64).unwrap();
        let fine = g.refined(8).unwrap();
        let a = lp_norm_omega(&ScalarField::from_fn(g, bump).unwrap(), 2.0).unwrap();
        let b = lp_norm_omega(&ScalarField::from_fn(fine, bump).unwrap(), 2.0).unwrap();
        assert!((a - b).abs() < 0.01 * b);
    }

    #[test]
    fn pairing_matches_refined_quadrature() {
        let psi = |r: f64, z: f64| 1.0 + r * r - 0.5 * z + r * z * z;
        let heat = |r: f64, z: f64| libm::exp(-((r - 1.5).powi(2) + z * z) / 0.4);
        let g = HalfPlaneGrid::new(4.0, -3.0, 3.0, 24, 36).unwrap();
        for flag in [MeasureFlag::DrDz, MeasureFlag::Volume] {
            let a = pair_field_testfn(&ScalarField::from_fn(g, heat).unwrap(), psi, flag);
            let fine = g.refined(8).unwrap();
            let b = pair_field_testfn(&ScalarField::from_fn(fine, heat).unwrap(), psi, flag);
            assert!((a - b).abs() < 0.01 * b.abs());
        }
        let f = ScalarField::from_fn(g, heat).unwrap();
        let total = pair_field_testfn(&f, |_, _| 1.0, MeasureFlag::DrDz);
        assert!((total - f.integral()).abs() < 1e-14 * total);
    }

    #[test]
    fn refinement_is_second_order() {
        let g = HalfPlaneGrid::new(6.0, -6.0, 6.0, 12, 24).unwrap();
        let exact = {
            let fine = g.refined(32).unwrap();
            lp_norm_omega(&ScalarField::from_fn(fine, bump).unwrap(), 2.0).unwrap()
        };
        let e1 = (lp_norm_omega(&ScalarField::from_fn(g, bump).unwrap(), 2.0).unwrap() - exact).abs();
        let g2 = g.refined(2).unwrap();
        let e2 = (lp_norm_omega(&ScalarField::from_fn(g2, bump).unwrap(), 2.0).unwrap() - exact).abs();
        assert!(e1 / e2 > 3.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn divergence_of_uniform_vertical_flow_vanishes() {
        let g = box_grid(10, 10);
        let v = VectorField::new(ScalarField::zeros(g), ScalarField::from_fn(g, |_, _| 3.0).unwrap()).unwrap();
        assert_eq!(v.divergence_residual(), 0.0);
    }

    proptest! {
        #[test]
        fn norms_are_homogeneous(c in -5.0f64..5.0, seed in 0u64..1000) {
            let g = box_grid(6, 5);
            let f = ScalarField::from_fn(g, |r, z| libm::sin(seed as f64 + 7.0 * r * z) + r).unwrap();
            for p in [1.0, 4.0 / 3.0, 2.0, 4.0, f64::INFINITY] {
                let a = lp_norm_omega(&f.scaled(c), p).unwrap();
                let b = libm::fabs(c) * lp_norm_omega(&f, p).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
            }
        }

        #[test]
        fn holder_on_the_box(vals in proptest::collection::vec(-3.0f64..3.0, 24), p in 1.0f64..6.0, dq in 0.0f64..6.0) {
            let g = HalfPlaneGrid::new(1.0, 0.0, 2.0, 4, 6).unwrap();
            let f = ScalarField::new(g, vals).unwrap();
            let q = p + dq;
            let area: f64 = 2.0;
            let lhs = lp_norm_omega(&f, p).unwrap();
            let rhs = libm::pow(area, 1.0 / p - 1.0 / q) * lp_norm_omega(&f, q).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
            let inf = libm::pow(area, 1.0 / p) * lp_norm_omega(&f, f64::INFINITY).unwrap();
            prop_assert!(lhs <= inf * (1.0 + 1e-12) + 1e-12);
        }
    }
}
