//! Finite Radon measures: atoms plus a gridded absolutely continuous part.
//!
//! [`MeasureOmega`] lives on the half-plane with the flat measure `dr dz`,
//! [`Measure3DAxi`] is an axisymmetric measure on R³ stored through its
//! `(r, z)` profile, and [`PointMeasure3D`] is a general atomic measure on R³
//! used to exercise rotations and symmetry tests. Singular-continuous parts
//! are not representable; [`Decomposition::singular_continuous`] is always 0.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::fields::{lp_norm_omega, lp_norm_r3, pair_field_testfn, MeasureFlag};
use crate::{Error, HalfPlaneGrid, Result, ScalarField};

/// Default number of angles for circle quadrature.
pub const DEFAULT_ANGLES: usize = 64;

/// Point mass `weight * delta_(r, z)` on the closed half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaAtom {
    pub weight: f64,
    pub r: f64,
    pub z: f64,
}

impl OmegaAtom {
    pub fn new(weight: f64, r: f64, z: f64) -> Self {
        Self { weight, r, z }
    }

    /// Atoms on `r = 0` sit on the boundary of the half-plane.
    pub fn is_boundary(&self) -> bool {
        self.r == 0.0
    }
}

/// Part-by-part size of a measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub absolutely_continuous: f64,
    pub singular_continuous: f64,
    pub pure_point: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.absolutely_continuous + self.singular_continuous + self.pure_point
    }
}

fn check_location(weight: f64, r: f64, z: f64) -> Result<()> {
    if !(weight.is_finite() && r.is_finite() && z.is_finite()) {
        return Err(Error::NonFinite("atom"));
    }
    if r < 0.0 {
        return Err(Error::NegativeRadius(r));
    }
    Ok(())
}

/// Signed measure on `Omega = {r > 0}` (boundary atoms carried but flagged).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasureOmega {
    atoms: Vec<OmegaAtom>,
    density: Option<ScalarField>,
}

impl MeasureOmega {
    pub fn new(atoms: Vec<OmegaAtom>, density: Option<ScalarField>) -> Result<Self> {
        for a in &atoms {
            check_location(a.weight, a.r, a.z)?;
        }
        if let Some(d) = &density {
            d.check_finite("measure density")?;
        }
        Ok(Self { atoms, density })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// `weight * delta_(r, z)`.
    pub fn dirac(weight: f64, r: f64, z: f64) -> Result<Self> {
        Self::new(alloc::vec![OmegaAtom::new(weight, r, z)], None)
    }

    /// Absolutely continuous measure with density `f` against `dr dz`.
    pub fn from_density(f: ScalarField) -> Result<Self> {
        Self::new(Vec::new(), Some(f))
    }

    pub fn atoms(&self) -> &[OmegaAtom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&ScalarField> {
        self.density.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.weight == 0.0) && self.density.as_ref().is_none_or(|d| d.abs_max() == 0.0)
    }

    pub fn has_boundary_atoms(&self) -> bool {
        self.atoms.iter().any(|a| a.is_boundary() && a.weight != 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| OmegaAtom::new(c * a.weight, a.r, a.z))
                .collect(),
            density: self.density.as_ref().map(|d| d.scaled(c)),
        }
    }

    /// `sum |w| + ||density||_{L1(dr dz)}`.
    pub fn tv_norm(&self) -> f64 {
        let d = self.decomposition();
        d.total()
    }

    /// `sum |w|`.
    pub fn atomic_norm(&self) -> f64 {
        self.atoms.iter().map(|a| libm::fabs(a.weight)).sum()
    }

    pub fn decomposition(&self) -> Decomposition {
        let ac = self
            .density
            .as_ref()
            .map(|d| lp_norm_omega(d, 1.0).unwrap_or(f64::NAN))
            .unwrap_or(0.0);
        Decomposition {
            absolutely_continuous: ac,
            singular_continuous: 0.0,
            pure_point: self.atomic_norm(),
        }
    }

    /// `sum w psi(r, z) + int psi * density dr dz`.
    pub fn pair<F: Fn(f64, f64) -> f64>(&self, psi: F) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight * psi(a.r, a.z)).sum();
        let dens = self
            .density
            .as_ref()
            .map(|d| pair_field_testfn(d, &psi, MeasureFlag::DrDz))
            .unwrap_or(0.0);
        atoms + dens
    }

    /// Replaces every boundary atom by a half-Gaussian of width `sigma`
    /// centred on the axis, gridded on `grid` and normalised to the same mass.
    /// Any existing density must live on `grid`.
    pub fn mollify(&self, grid: &HalfPlaneGrid, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter("mollifier width must be positive"));
        }
        if let Some(d) = &self.density {
            if d.grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        let mut atoms = Vec::new();
        let mut density = self.density.clone().unwrap_or_else(|| ScalarField::zeros(*grid));
        let mut touched = self.density.is_some();
        for a in &self.atoms {
            if !a.is_boundary() {
                atoms.push(*a);
                continue;
            }
            let bump = ScalarField::from_fn(*grid, |r, z| {
                libm::exp(-(r * r + (z - a.z) * (z - a.z)) / (2.0 * sigma * sigma))
            })?;
            let mass = bump.integral();
            if !(mass > 0.0) {
                return Err(Error::InvalidParameter("mollifier not resolved by the grid"));
            }
            density = density.combine(1.0, &bump, a.weight / mass)?;
            touched = true;
        }
        Self::new(atoms, touched.then_some(density))
    }
}

/// Weighted uniform circle `{r = radius, z = height}` of total mass `weight`.
/// Radius 0 is a point mass on the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleAtom {
    pub weight: f64,
    pub radius: f64,
    pub height: f64,
}

impl CircleAtom {
    pub fn new(weight: f64, radius: f64, height: f64) -> Self {
        Self { weight, radius, height }
    }
}

/// How the half-plane reduction scales mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Mass preserving, used for vorticity-type data.
    Plain,
    /// Divides by `2 pi`, used for the weighted density `r rho`.
    Over2Pi,
}

/// Axisymmetric signed measure on R³.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Measure3DAxi {
    circle_atoms: Vec<CircleAtom>,
    density: Option<ScalarField>,
}

impl Measure3DAxi {
    /// `density` is the `(r, z)` profile of a function on R³.
    pub fn new(circle_atoms: Vec<CircleAtom>, density: Option<ScalarField>) -> Result<Self> {
        for a in &circle_atoms {
            check_location(a.weight, a.radius, a.height)?;
        }
        if let Some(d) = &density {
            d.check_finite("measure density")?;
        }
        Ok(Self { circle_atoms, density })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn circle(weight: f64, radius: f64, height: f64) -> Result<Self> {
        Self::new(alloc::vec![CircleAtom::new(weight, radius, height)], None)
    }

    pub fn from_density(f: ScalarField) -> Result<Self> {
        Self::new(Vec::new(), Some(f))
    }

    pub fn circle_atoms(&self) -> &[CircleAtom] {
        &self.circle_atoms
    }

    pub fn density(&self) -> Option<&ScalarField> {
        self.density.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.circle_atoms.iter().all(|a| a.weight == 0.0) && self.density.as_ref().is_none_or(|d| d.abs_max() == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            circle_atoms: self
                .circle_atoms
                .iter()
                .map(|a| CircleAtom::new(c * a.weight, a.radius, a.height))
                .collect(),
            density: self.density.as_ref().map(|d| d.scaled(c)),
        }
    }

    pub fn tv_norm(&self) -> f64 {
        self.decomposition().total()
    }

    pub fn atomic_norm(&self) -> f64 {
        self.circle_atoms.iter().map(|a| libm::fabs(a.weight)).sum()
    }

    pub fn decomposition(&self) -> Decomposition {
        let ac = self
            .density
            .as_ref()
            .map(|d| lp_norm_r3(d, 1.0).unwrap_or(f64::NAN))
            .unwrap_or(0.0);
        Decomposition {
            absolutely_continuous: ac,
            singular_continuous: 0.0,
            pure_point: self.atomic_norm(),
        }
    }

    /// `<m, phi>` for a general test function on R³; circles and the density's
    /// angular integral use the `n_angles`-point periodic trapezoid rule.
    pub fn pair<F: Fn(f64, f64, f64) -> f64>(&self, phi: F, n_angles: usize) -> f64 {
        let n = n_angles.max(1);
        let ring_mean = |r: f64, z: f64| -> f64 {
            if r == 0.0 {
                return phi(0.0, 0.0, z);
            }
            let mut s = 0.0;
            for k in 0..n {
                let th = TAU * k as f64 / n as f64;
                s += phi(r * libm::cos(th), r * libm::sin(th), z);
            }
            s / n as f64
        };
        let atoms: f64 = self
            .circle_atoms
            .iter()
            .map(|a| a.weight * ring_mean(a.radius, a.height))
            .sum();
        let dens = self
            .density
            .as_ref()
            .map(|d| pair_field_testfn(d, ring_mean, MeasureFlag::Volume))
            .unwrap_or(0.0);
        atoms + dens
    }

    /// `<m, phi_psi>` with `phi_psi(x) = psi(|x_h|, z)`; exact on circles.
    pub fn pair_profile<F: Fn(f64, f64) -> f64>(&self, psi: F) -> f64 {
        let atoms: f64 = self
            .circle_atoms
            .iter()
            .map(|a| a.weight * psi(a.radius, a.height))
            .sum();
        let dens = self
            .density
            .as_ref()
            .map(|d| pair_field_testfn(d, &psi, MeasureFlag::Volume))
            .unwrap_or(0.0);
        atoms + dens
    }

    /// The half-plane measure `m~` with `<m~, psi> = c <m, phi_psi>`,
    /// where `c = 1` (plain) or `1/(2 pi)` (over 2 pi).
    pub fn reduce_to_halfplane(&self, normalization: Normalization) -> Result<MeasureOmega> {
        let c = match normalization {
            Normalization::Plain => 1.0,
            Normalization::Over2Pi => 1.0 / TAU,
        };
        let atoms = self
            .circle_atoms
            .iter()
            .map(|a| {
                if a.radius < 0.0 {
                    Err(Error::NegativeRadius(a.radius))
                } else {
                    Ok(OmegaAtom::new(c * a.weight, a.radius, a.height))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let density = self.density.as_ref().map(|d| d.times_r_pow(1.0).scaled(c * TAU));
        MeasureOmega::new(atoms, density)
    }
}

/// Point mass at `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointAtom {
    pub weight: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// General atomic measure on R³.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointMeasure3D {
    pub points: Vec<PointAtom>,
}

impl PointMeasure3D {
    pub fn new(points: Vec<PointAtom>) -> Self {
        Self { points }
    }

    /// `n` equally weighted points spread uniformly over a circle atom.
    pub fn ring(atom: CircleAtom, n: usize) -> Self {
        let n = n.max(1);
        let w = atom.weight / n as f64;
        let points = (0..n)
            .map(|k| {
                let th = TAU * k as f64 / n as f64;
                PointAtom {
                    weight: w,
                    x: atom.radius * libm::cos(th),
                    y: atom.radius * libm::sin(th),
                    z: atom.height,
                }
            })
            .collect();
        Self { points }
    }

    pub fn tv_norm(&self) -> f64 {
        self.points.iter().map(|p| libm::fabs(p.weight)).sum()
    }

    pub fn pair<F: Fn(f64, f64, f64) -> f64>(&self, phi: F) -> f64 {
        self.points.iter().map(|p| p.weight * phi(p.x, p.y, p.z)).sum()
    }
}

/// Rotation angle about the z-axis, reduced to `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationAngle(f64);

impl RotationAngle {
    pub fn new(alpha: f64) -> Self {
        let mut a = libm::fmod(alpha, TAU);
        if a < 0.0 {
            a += TAU;
        }
        if a >= TAU {
            a = 0.0;
        }
        Self(a)
    }

    pub fn radians(&self) -> f64 {
        self.0
    }

    pub fn then(self, other: RotationAngle) -> RotationAngle {
        RotationAngle::new(self.0 + other.0)
    }

    /// Image of `(x, y, z)`.
    pub fn apply(&self, x: f64, y: f64, z: f64) -> (f64, f64, f64) {
        let (s, c) = libm::sincos(self.0);
        (x * c - y * s, x * s + y * c, z)
    }
}

/// Push-forward of `m` by the rotation: every atom moves, weights stay.
pub fn rotate_pushforward(m: &PointMeasure3D, alpha: RotationAngle) -> PointMeasure3D {
    let points = m
        .points
        .iter()
        .map(|p| {
            let (x, y, z) = alpha.apply(p.x, p.y, p.z);
            PointAtom {
                weight: p.weight,
                x,
                y,
                z,
            }
        })
        .collect();
    PointMeasure3D { points }
}

fn check_bank<F>(bank: &[F], n_angles: usize) -> Result<()> {
    if n_angles < 2 {
        return Err(Error::InvalidParameter("need at least 2 sample angles"));
    }
    if bank.is_empty() {
        return Err(Error::InvalidParameter("test bank is empty"));
    }
    Ok(())
}

/// `max_{alpha, phi} |<R_alpha m, phi> - <m, phi>|` over `n_angles` equally
/// spaced angles and the test bank.
pub fn axisymmetry_defect<F: Fn(f64, f64, f64) -> f64>(m: &PointMeasure3D, bank: &[F], n_angles: usize) -> Result<f64> {
    check_bank(bank, n_angles)?;
    let mut worst: f64 = 0.0;
    for k in 1..n_angles {
        let rotated = rotate_pushforward(m, RotationAngle::new(TAU * k as f64 / n_angles as f64));
        for phi in bank {
            worst = worst.max(libm::fabs(rotated.pair(phi) - m.pair(phi)));
        }
    }
    Ok(worst)
}

/// Same defect for an axisymmetric measure. Pairings go through the default
/// 64-angle circle quadrature, so the result measures that quadrature error;
/// sample angles are offset by an irrational fraction so they do not land on
/// the quadrature nodes.
pub fn axisymmetry_defect_axi<F: Fn(f64, f64, f64) -> f64>(
    m: &Measure3DAxi,
    bank: &[F],
    n_angles: usize,
) -> Result<f64> {
    check_bank(bank, n_angles)?;
    let offset = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut worst: f64 = 0.0;
    for phi in bank {
        let base = m.pair(phi, DEFAULT_ANGLES);
        for k in 0..n_angles {
            let rot = RotationAngle::new(TAU * (k as f64 + offset) / n_angles as f64);
            let turned = m.pair(
                |x: f64, y: f64, z: f64| {
                    let (a, b, c) = rot.apply(x, y, z);
                    phi(a, b, c)
                },
                DEFAULT_ANGLES,
            );
            worst = worst.max(libm::fabs(turned - base));
        }
    }
    Ok(worst)
}

/// `phi_axi(x) = (1/2pi) int phi(R_alpha x) d alpha` by the periodic trapezoid
/// rule with `n_angles >= 4` points.
pub fn axisymmetrize_testfn<F: Fn(f64, f64, f64) -> f64>(
    phi: F,
    n_angles: usize,
) -> Result<impl Fn(f64, f64, f64) -> f64> {
    if n_angles < 4 {
        return Err(Error::InvalidParameter("need at least 4 angles"));
    }
    let rotations: Vec<RotationAngle> = (0..n_angles)
        .map(|k| RotationAngle::new(TAU * k as f64 / n_angles as f64))
        .collect();
    Ok(move |x: f64, y: f64, z: f64| {
        let mut s = 0.0;
        for rot in &rotations {
            let (a, b, c) = rot.apply(x, y, z);
            s += phi(a, b, c);
        }
        s / rotations.len() as f64
    })
}

/// Named test function on R³.
pub type TestFn3 = fn(f64, f64, f64) -> f64;

/// Smooth bank used by the symmetry checks: moments up to degree four,
/// off-axis Gaussians and a few mixed trigonometric terms.
pub fn standard_test_bank() -> Vec<(&'static str, TestFn3)> {
    alloc::vec![
        ("x", (|x, _, _| x) as TestFn3),
        ("x^2", |x, _, _| x * x),
        ("x^2+y^2", |x, y, _| x * x + y * y),
        ("z", |_, _, z| z),
        ("x*z", |x, _, z| x * z),
        ("x^3*y", |x, y, _| x * x * x * y),
        ("gauss(x-1)", |x, y, z| libm::exp(
            -((x - 1.0) * (x - 1.0) + y * y + z * z)
        )),
        ("gauss(y+0.5)", |x, y, z| libm::exp(
            -(x * x + (y + 0.5) * (y + 0.5) + 0.5 * z * z)
        )),
        ("cos(x)sin(y)", |x, y, z| libm::cos(x)
            * libm::sin(y + 0.3)
            * libm::exp(-z * z)),
        ("poly", |x, y, z| (x + 2.0 * y)
            * (x + 2.0 * y)
            * libm::exp(-0.1 * (x * x + y * y + z * z))),
    ]
}

/// Half-plane test-function identity helper: `psi(sqrt(x^2+y^2), z)`.
pub fn lift_profile<F: Fn(f64, f64) -> f64>(psi: F) -> impl Fn(f64, f64, f64) -> f64 {
    move |x, y, z| psi(libm::hypot(x, y), z)
}
