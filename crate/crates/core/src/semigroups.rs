//! The propagators `S1(t) = e^{t(Δ - 1/r²)}` and `S2(t) = e^{tΔ}` on the
//! half-plane, applied through their exact kernels.
//!
//! Both kernels factor into a radial part and the 1D heat kernel in `z`:
//!
//! * `S1`: `K1 = R1(t, r, r') g_t(z - z')` against `dr' dz'`, with
//!   `R1 = (1/2t) r' e^{-(r-r')²/4t} [e^{-a} I1(a)]`, `a = r r'/2t`.
//!   This is the same kernel as `(1/4πt) (r'/r)^{1/2} N1(t/(r r')) e^{-|x-x'|²/4t}`.
//! * `S2`: the 3D heat kernel on axisymmetric profiles,
//!   `Q(t, r, r') g_t(z - z')` against `r' dr' dz'` with
//!   `Q = (1/2t) e^{-(r-r')²/4t} [e^{-a} I0(a)]`.
//!
//! Gridded sources are treated as cell-wise constant (plain application) or
//! as hat functions (divergence forms), and the kernel is integrated exactly
//! in `z` and by Gauss-Legendre in `r`. Derivatives of the source are moved
//! onto the kernel, so no finite differences of the source are taken. The
//! kernel is cut off at `|r - r'|, |z - z'| > 8 sqrt(2t)`, where it has
//! dropped below `e^{-32}`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::bessel::{i0e, i1e};
use crate::measures::{Measure3DAxi, MeasureOmega};
use crate::quad::{gauss, gauss_legendre, gauss_mass};
use crate::{Error, HalfPlaneGrid, Result, ScalarField};

/// Which propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Semigroup {
    /// `e^{t(Δ - 1/r²)}`, acting on half-plane densities.
    S1,
    /// `e^{tΔ}` on axisymmetric R³ profiles.
    S2,
}

/// How atoms are turned into node values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AtomSampling {
    /// Kernel value at the node.
    #[default]
    Nodal,
    /// Kernel averaged over the node's cell; exact cell masses at any `t`.
    CellAverage,
}

/// Relative half-width of the kernel support, in units of `sqrt(t)`.
const WINDOW: f64 = 8.0 * core::f64::consts::SQRT_2;

fn window(t: f64) -> f64 {
    WINDOW * libm::sqrt(t)
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

/// Radial `S1` kernel `R1(t, r, r')` (density against `dr'`).
#[inline]
pub fn s1_radial_kernel(t: f64, r: f64, rs: f64) -> f64 {
    let d = r - rs;
    0.5 / t * rs * libm::exp(-d * d / (4.0 * t)) * i1e(r * rs / (2.0 * t))
}

/// Radial `S2` kernel `Q(t, r, r')` (density against `r' dr'`).
#[inline]
pub fn s2_radial_kernel(t: f64, r: f64, rs: f64) -> f64 {
    let d = r - rs;
    0.5 / t * libm::exp(-d * d / (4.0 * t)) * i0e(r * rs / (2.0 * t))
}

/// Full `S1` kernel: value at `(r, z)` of `S1(t) δ_(rs, zs)`.
pub fn s1_kernel(t: f64, r: f64, z: f64, rs: f64, zs: f64) -> f64 {
    s1_radial_kernel(t, r, rs) * gauss(t, z - zs)
}

/// Full `S2` kernel against `r' dr' dz'`.
pub fn s2_kernel(t: f64, r: f64, z: f64, rs: f64, zs: f64) -> f64 {
    s2_radial_kernel(t, r, rs) * gauss(t, z - zs)
}

/// Integral over `[a, b]` of a kernel living on scale `sqrt(t)` around `centre`.
fn kernel_integral<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, centre: f64, t: f64) -> f64 {
    let w = window(t);
    let lo = a.max(centre - w);
    let hi = b.min(centre + w);
    gauss_legendre(f, lo, hi, 0.35 * libm::sqrt(t))
}

/// Dense `nr x nr` matrix with a contiguous nonzero range per row.
#[derive(Debug, Clone)]
struct RadialMatrix {
    nr: usize,
    lo: Vec<usize>,
    hi: Vec<usize>,
    a: Vec<f64>,
}

impl RadialMatrix {
    fn build<F: FnMut(usize, usize) -> f64>(grid: &HalfPlaneGrid, t: f64, mut entry: F) -> Self {
        let nr = grid.nr();
        let dr = grid.dr();
        let w = window(t);
        let mut lo = vec![0; nr];
        let mut hi = vec![0; nr];
        let mut a = vec![0.0; nr * nr];
        for i in 0..nr {
            let r = grid.r(i);
            // Sources whose support (one cell either side) meets the window.
            let first = libm::floor((r - w) / dr - 1.5).max(0.0) as usize;
            let last = (libm::ceil((r + w) / dr + 1.5).max(0.0) as usize).min(nr);
            lo[i] = first.min(nr);
            hi[i] = last.max(lo[i]);
            for j in lo[i]..hi[i] {
                a[i * nr + j] = entry(i, j);
            }
        }
        Self { nr, lo, hi, a }
    }

    /// Applies the matrix to every `z`-row of `x`.
    fn apply_rows(&self, x: &[f64], out: &mut [f64]) {
        let nr = self.nr;
        for (xr, or) in x.chunks_exact(nr).zip(out.chunks_exact_mut(nr)) {
            for (i, o) in or.iter_mut().enumerate() {
                let (lo, hi) = (self.lo[i], self.hi[i]);
                let row = &self.a[i * nr + lo..i * nr + hi];
                *o = row.iter().zip(&xr[lo..hi]).map(|(m, v)| m * v).sum();
            }
        }
    }
}

/// Cell masses of the 1D heat kernel at integer cell offsets.
#[derive(Debug, Clone)]
struct Toeplitz {
    /// Coefficient for offsets `0..=kmax`; negative offsets by parity.
    c: Vec<f64>,
    odd: bool,
}

impl Toeplitz {
    fn plain(grid: &HalfPlaneGrid, t: f64) -> Self {
        let dz = grid.dz();
        let kmax = ((window(t) / dz) as usize + 2).min(grid.nz() - 1);
        let c = (0..=kmax)
            .map(|k| gauss_mass(t, (k as f64 - 0.5) * dz, (k as f64 + 0.5) * dz))
            .collect();
        Self { c, odd: false }
    }

    /// `int g_t(z_l - z') phi'_{l-k}(z') dz'` for the hat centred `k` cells below.
    fn derivative(grid: &HalfPlaneGrid, t: f64) -> Self {
        let dz = grid.dz();
        let kmax = ((window(t) / dz) as usize + 3).min(grid.nz() - 1);
        let c = (0..=kmax)
            .map(|k| {
                let k = k as f64;
                (gauss_mass(t, k * dz, (k + 1.0) * dz) - gauss_mass(t, (k - 1.0) * dz, k * dz)) / dz
            })
            .collect();
        Self { c, odd: true }
    }

    /// `out[l] += w * sum_k c(k) x[l - k]` over rows of width `nr`.
    fn convolve_add(&self, x: &[f64], nr: usize, w: f64, out: &mut [f64]) {
        let nz = x.len() / nr;
        let kmax = self.c.len() as isize - 1;
        for l in 0..nz {
            let dst = &mut out[l * nr..(l + 1) * nr];
            let kl = (l as isize - (nz as isize - 1)).max(-kmax);
            let kh = (l as isize).min(kmax);
            for k in kl..=kh {
                let mut c = self.c[k.unsigned_abs()];
                if self.odd && k < 0 {
                    c = -c;
                }
                if c == 0.0 {
                    continue;
                }
                let c = w * c;
                let src = &x[(l as isize - k) as usize * nr..][..nr];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
    }
}

/// All matrices needed to apply one propagator at one fixed time.
#[derive(Debug, Clone)]
pub struct LagOperator {
    grid: HalfPlaneGrid,
    kind: Semigroup,
    t: f64,
    plain_r: RadialMatrix,
    div_r: Option<RadialMatrix>,
    plain_z: Toeplitz,
    div_z: Option<Toeplitz>,
}

impl LagOperator {
    /// Builds the operator; `with_div` also prepares the divergence form.
    pub fn new(grid: &HalfPlaneGrid, kind: Semigroup, t: f64, with_div: bool) -> Result<Self> {
        check_time(t)?;
        let dr = grid.dr();
        let kernel = move |r: f64, rs: f64| match kind {
            Semigroup::S1 => s1_radial_kernel(t, r, rs),
            Semigroup::S2 => rs * s2_radial_kernel(t, r, rs),
        };
        let plain_r = RadialMatrix::build(grid, t, |i, j| {
            let r = grid.r(i);
            kernel_integral(|rs| kernel(r, rs), j as f64 * dr, (j + 1) as f64 * dr, r, t)
        });
        let div_r = with_div.then(|| {
            RadialMatrix::build(grid, t, |i, j| {
                let r = grid.r(i);
                let rj = grid.r(j);
                // Hat phi_j: rises on [r_{j-1}, r_j], falls on [r_j, r_{j+1}];
                // the first hat is flat on [0, r_0].
                let rising = if j == 0 {
                    match kind {
                        Semigroup::S1 => 0.0,
                        Semigroup::S2 => kernel_integral(|rs| s2_radial_kernel(t, r, rs), 0.0, rj, r, t),
                    }
                } else {
                    kernel_integral(
                        |rs| {
                            let mut v = kernel(r, rs) / dr;
                            if kind == Semigroup::S2 {
                                v += s2_radial_kernel(t, r, rs) * (rs - rj + dr) / dr;
                            }
                            v
                        },
                        rj - dr,
                        rj,
                        r,
                        t,
                    )
                };
                let falling = kernel_integral(
                    |rs| {
                        let mut v = -kernel(r, rs) / dr;
                        if kind == Semigroup::S2 {
                            v += s2_radial_kernel(t, r, rs) * (rj + dr - rs) / dr;
                        }
                        v
                    },
                    rj,
                    rj + dr,
                    r,
                    t,
                );
                rising + falling
            })
        });
        Ok(Self {
            grid: *grid,
            kind,
            t,
            plain_r,
            div_r,
            plain_z: Toeplitz::plain(grid, t),
            div_z: with_div.then(|| Toeplitz::derivative(grid, t)),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn kind(&self) -> Semigroup {
        self.kind
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        &self.grid
    }

    /// `out += w * S(t) f`, with `scratch` of grid length.
    pub(crate) fn add_plain(&self, f: &[f64], w: f64, out: &mut [f64], scratch: &mut [f64]) {
        self.plain_r.apply_rows(f, scratch);
        self.plain_z.convolve_add(scratch, self.grid.nr(), w, out);
    }

    /// `out += w * S(t) div(fr, fz)`; `div` is `div_*` for `S1` and the R³
    /// divergence for `S2`.
    pub(crate) fn add_div(&self, fr: &[f64], fz: &[f64], w: f64, out: &mut [f64], scratch: &mut [f64]) {
        let (div_r, div_z) = match (&self.div_r, &self.div_z) {
            (Some(a), Some(b)) => (a, b),
            _ => panic!("LagOperator built without divergence form"),
        };
        let nr = self.grid.nr();
        div_r.apply_rows(fr, scratch);
        self.plain_z.convolve_add(scratch, nr, w, out);
        self.plain_r.apply_rows(fz, scratch);
        div_z.convolve_add(scratch, nr, w, out);
    }

    /// `S(t) f` for a field on this operator's grid.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.len();
        let (mut out, mut scratch) = (vec![0.0; n], vec![0.0; n]);
        self.add_plain(f.values(), 1.0, &mut out, &mut scratch);
        finish(self.grid, out)
    }

    /// `S(t) div(fr, fz)`.
    pub fn apply_div(&self, fr: &ScalarField, fz: &ScalarField) -> Result<ScalarField> {
        if fr.grid() != &self.grid || fz.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if self.div_r.is_none() {
            return Err(Error::InvalidParameter("operator built without divergence form"));
        }
        let n = self.grid.len();
        let (mut out, mut scratch) = (vec![0.0; n], vec![0.0; n]);
        self.add_div(fr.values(), fz.values(), 1.0, &mut out, &mut scratch);
        finish(self.grid, out)
    }
}

fn finish(grid: HalfPlaneGrid, values: Vec<f64>) -> Result<ScalarField> {
    let f = ScalarField::from_raw(grid, values);
    f.check_finite("semigroup output")?;
    Ok(f)
}

/// Adds `w * (radial profile) x (z profile)` for one source point.
fn add_separable_atom(
    grid: &HalfPlaneGrid,
    t: f64,
    radial: impl Fn(usize) -> f64,
    z_centre: f64,
    sampling: AtomSampling,
    w: f64,
    out: &mut [f64],
) {
    let win = window(t);
    let (nr, dz) = (grid.nr(), grid.dz());
    let prof: Vec<f64> = (0..nr).map(&radial).collect();
    for l in 0..grid.nz() {
        let z = grid.z(l);
        if libm::fabs(z - z_centre) > win + dz {
            continue;
        }
        let gz = match sampling {
            AtomSampling::Nodal => gauss(t, z - z_centre),
            AtomSampling::CellAverage => gauss_mass(t, z - 0.5 * dz - z_centre, z + 0.5 * dz - z_centre) / dz,
        };
        if gz == 0.0 {
            continue;
        }
        let row = &mut out[l * nr..(l + 1) * nr];
        for (o, p) in row.iter_mut().zip(&prof) {
            *o += w * gz * p;
        }
    }
}

/// `S1(t) μ` on `grid`. The density part (if any) must live on `grid`.
pub fn s1_apply(t: f64, src: &MeasureOmega, grid: &HalfPlaneGrid) -> Result<ScalarField> {
    s1_apply_sampled(t, src, grid, AtomSampling::Nodal)
}

/// [`s1_apply`] with an explicit atom sampling rule.
pub fn s1_apply_sampled(
    t: f64,
    src: &MeasureOmega,
    grid: &HalfPlaneGrid,
    sampling: AtomSampling,
) -> Result<ScalarField> {
    check_time(t)?;
    if let Some(a) = src.atoms().iter().find(|a| a.is_boundary() && a.weight != 0.0) {
        return Err(Error::BoundaryAtom {
            weight: a.weight,
            z: a.z,
        });
    }
    let mut out = match src.density() {
        Some(d) => LagOperator::new(grid, Semigroup::S1, t, false)?.apply(d)?.into_values(),
        None => vec![0.0; grid.len()],
    };
    let (dr, win) = (grid.dr(), window(t));
    for a in src.atoms() {
        if a.weight == 0.0 {
            continue;
        }
        let radial = |i: usize| {
            let r = grid.r(i);
            if libm::fabs(r - a.r) > win + dr {
                return 0.0;
            }
            match sampling {
                AtomSampling::Nodal => s1_radial_kernel(t, r, a.r),
                AtomSampling::CellAverage => {
                    kernel_integral(|x| s1_radial_kernel(t, x, a.r), r - 0.5 * dr, r + 0.5 * dr, a.r, t) / dr
                }
            }
        };
        add_separable_atom(grid, t, radial, a.z, sampling, a.weight, &mut out);
    }
    finish(*grid, out)
}

/// `S1(t) f` for a gridded half-plane density.
pub fn s1_apply_field(t: f64, f: &ScalarField) -> Result<ScalarField> {
    LagOperator::new(f.grid(), Semigroup::S1, t, false)?.apply(f)
}

/// `S2(t) ρ` for an axisymmetric measure; output is an R³ profile.
pub fn s2_apply(t: f64, src: &Measure3DAxi, grid: &HalfPlaneGrid) -> Result<ScalarField> {
    s2_apply_sampled(t, src, grid, AtomSampling::Nodal)
}

/// [`s2_apply`] with an explicit atom sampling rule. Cell averages are taken
/// against `r dr` so that R³ masses are exact.
pub fn s2_apply_sampled(
    t: f64,
    src: &Measure3DAxi,
    grid: &HalfPlaneGrid,
    sampling: AtomSampling,
) -> Result<ScalarField> {
    check_time(t)?;
    let mut out = match src.density() {
        Some(d) => LagOperator::new(grid, Semigroup::S2, t, false)?.apply(d)?.into_values(),
        None => vec![0.0; grid.len()],
    };
    let (dr, win) = (grid.dr(), window(t));
    for a in src.circle_atoms() {
        if a.weight == 0.0 {
            continue;
        }
        let radial = |i: usize| {
            let r = grid.r(i);
            if libm::fabs(r - a.radius) > win + dr {
                return 0.0;
            }
            let q = match sampling {
                AtomSampling::Nodal => s2_radial_kernel(t, r, a.radius),
                AtomSampling::CellAverage => {
                    kernel_integral(
                        |x| x * s2_radial_kernel(t, x, a.radius),
                        r - 0.5 * dr,
                        r + 0.5 * dr,
                        a.radius,
                        t,
                    ) / (r * dr)
                }
            };
            q / TAU
        };
        add_separable_atom(grid, t, radial, a.height, sampling, a.weight, &mut out);
    }
    finish(*grid, out)
}

/// `S2(t) f` for a gridded axisymmetric profile.
pub fn s2_apply_field(t: f64, f: &ScalarField) -> Result<ScalarField> {
    LagOperator::new(f.grid(), Semigroup::S2, t, false)?.apply(f)
}

/// `S1(t) div_*(fr, fz)` with `div_* = d_r fr + d_z fz`.
pub fn s1_div_apply(t: f64, fr: &ScalarField, fz: &ScalarField) -> Result<ScalarField> {
    LagOperator::new(fr.grid(), Semigroup::S1, t, true)?.apply_div(fr, fz)
}

/// `S2(t) div(fr, fz)` with the R³ divergence `d_r fr + fr/r + d_z fz`.
pub fn s2_div_apply(t: f64, fr: &ScalarField, fz: &ScalarField) -> Result<ScalarField> {
    LagOperator::new(fr.grid(), Semigroup::S2, t, true)?.apply_div(fr, fz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::n1_profile;
    use crate::fields::{lp_norm_omega, lp_norm_r3};
    use crate::measures::{CircleAtom, OmegaAtom};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn rel_l2(a: &ScalarField, b: &ScalarField) -> f64 {
        lp_norm_omega(&a.sub(b).unwrap(), 2.0).unwrap() / lp_norm_omega(b, 2.0).unwrap()
    }

    #[test]
    fn s1_kernel_matches_profile_form() {
        for &(t, r, rs, z) in &[(0.1, 1.0, 0.8, 0.3), (0.01, 2.0, 2.05, -0.1), (3.0, 0.2, 1.5, 1.0)] {
            let a = s1_kernel(t, r, z, rs, 0.0);
            let n1 = n1_profile(t / (r * rs)).unwrap();
            let b =
                1.0 / (4.0 * PI * t) * libm::sqrt(rs / r) * n1 * libm::exp(-((r - rs) * (r - rs) + z * z) / (4.0 * t));
            assert!((a - b).abs() <= 1e-13 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn s2_axis_kernel_is_3d_gaussian() {
        let g = HalfPlaneGrid::new(3.0, -3.0, 3.0, 30, 60).unwrap();
        let t = 0.2;
        let f = s2_apply(t, &Measure3DAxi::circle(2.0, 0.0, 0.5).unwrap(), &g).unwrap();
        let (j, l) = (7, 33);
        let (r, z) = (g.r(j), g.z(l) - 0.5);
        let want = 2.0 * libm::pow(4.0 * PI * t, -1.5) * libm::exp(-(r * r + z * z) / (4.0 * t));
        assert!((f.at(j, l) - want).abs() < 1e-14 * want.max(1e-300) + 1e-300);
    }

    #[test]
    fn rejects_bad_time_and_axis_atoms() {
        let g = HalfPlaneGrid::new(2.0, -1.0, 1.0, 8, 8).unwrap();
        let d = MeasureOmega::dirac(1.0, 1.0, 0.0).unwrap();
        assert!(matches!(s1_apply(0.0, &d, &g), Err(Error::NonPositiveTime(_))));
        assert!(s1_apply(-1.0, &d, &g).is_err());
        let axis = MeasureOmega::dirac(1.0, 0.0, 0.0).unwrap();
        assert!(matches!(s1_apply(0.1, &axis, &g), Err(Error::BoundaryAtom { .. })));
        let smooth = axis.mollify(&g, 0.3).unwrap();
        assert!(s1_apply(0.1, &smooth, &g).is_ok());
        assert!(s2_apply(0.1, &Measure3DAxi::circle(1.0, 0.0, 0.0).unwrap(), &g).is_ok());
    }

    #[test]
    fn s1_mass_of_dirac_tends_to_one() {
        // Fine local grid around the atom.
        let g = HalfPlaneGrid::new(1.2, -0.15, 0.15, 600, 150).unwrap();
        let mut prev = 0.0;
        for t in [1e-2, 1e-3, 1e-4] {
            let f = s1_apply(t, &MeasureOmega::dirac(1.0, 1.0 + 0.5 * g.dr(), 0.0).unwrap(), &g);
            let mass = lp_norm_omega(&f.unwrap(), 1.0).unwrap();
            if t == 1e-4 {
                assert!((mass - 1.0).abs() < 0.01, "mass {mass}");
            }
            assert!(mass > prev);
            prev = mass;
        }
    }

    #[test]
    fn cell_average_mass_is_exact() {
        let g = HalfPlaneGrid::new(4.0, -4.0, 4.0, 32, 64).unwrap();
        let t = 1e-4;
        let f = s1_apply_sampled(
            t,
            &MeasureOmega::dirac(1.0, 1.0, 0.0).unwrap(),
            &g,
            AtomSampling::CellAverage,
        )
        .unwrap();
        let want = libm::erfc(0.0) * 0.5 * 2.0; // total z mass
        let mass = f.integral();
        // Radial mass for tiny t is N1(t) to leading order.
        assert!((mass - want * n1_profile(t).unwrap()).abs() < 1e-3);
        let m3 = Measure3DAxi::circle(1.0, 1.0, 0.0).unwrap();
        let f2 = s2_apply_sampled(t, &m3, &g, AtomSampling::CellAverage).unwrap();
        assert!((lp_norm_r3(&f2, 1.0).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn s2_conserves_mass() {
        let g = HalfPlaneGrid::new(8.0, -8.0, 8.0, 96, 192).unwrap();
        let src = Measure3DAxi::new(
            vec![CircleAtom::new(1.0, 1.0, 0.0), CircleAtom::new(0.5, 0.0, 1.0)],
            None,
        )
        .unwrap();
        for t in [0.05, 0.2, 0.5] {
            let f = s2_apply_sampled(t, &src, &g, AtomSampling::CellAverage).unwrap();
            let mass = lp_norm_r3(&f, 1.0).unwrap();
            assert!((mass - 1.5).abs() < 1e-6 * 1.5, "t = {t}: {mass}");
            // Node sampling is only quadrature accurate.
            let nodal = lp_norm_r3(&s2_apply(t, &src, &g).unwrap(), 1.0).unwrap();
            assert!((nodal - 1.5).abs() < 1e-2);
        }
    }

    #[test]
    fn s2_gaussian_on_gaussian() {
        let g = HalfPlaneGrid::new(8.0, -8.0, 8.0, 96, 192).unwrap();
        let f0 = ScalarField::from_fn(g, |r, z| libm::exp(-(r * r + z * z) / 2.0)).unwrap();
        let t = 0.3;
        let out = s2_apply_field(t, &f0).unwrap();
        let v = 1.0 + 2.0 * t;
        let exact =
            ScalarField::from_fn(g, |r, z| libm::pow(v, -1.5) * libm::exp(-(r * r + z * z) / (2.0 * v))).unwrap();
        assert!(rel_l2(&out, &exact) < 1e-3, "{}", rel_l2(&out, &exact));
    }

    #[test]
    fn s1_semigroup_law() {
        let g = HalfPlaneGrid::new(6.0, -6.0, 6.0, 96, 192).unwrap();
        let d = MeasureOmega::dirac(1.0, 1.0, 0.0).unwrap();
        let t = 0.1;
        let half = s1_apply(t, &d, &g).unwrap();
        let twice = s1_apply_field(t, &half).unwrap();
        let direct = s1_apply(2.0 * t, &d, &g).unwrap();
        assert!(rel_l2(&twice, &direct) < 1e-3, "{}", rel_l2(&twice, &direct));
    }

    #[test]
    fn divergence_form_matches_difference_then_propagate() {
        let g = HalfPlaneGrid::new(6.0, -6.0, 6.0, 64, 128).unwrap();
        let bump = |r: f64, z: f64| libm::exp(-2.0 * ((r - 2.0) * (r - 2.0) + z * z));
        let fr = ScalarField::from_fn(g, |r, z| z * bump(r, z)).unwrap();
        let fz = ScalarField::from_fn(g, |r, z| (r - 2.0) * bump(r, z)).unwrap();
        let div = ScalarField::from_fn(g, |r, z| {
            // d_r(z b) + d_z((r-2) b) analytically.
            z * (-4.0 * (r - 2.0)) * bump(r, z) + (r - 2.0) * (-4.0 * z) * bump(r, z)
        })
        .unwrap();
        let t = 0.05;
        let a = s1_div_apply(t, &fr, &fz).unwrap();
        let b = s1_apply_field(t, &div).unwrap();
        assert!(rel_l2(&a, &b) < 5e-3, "{}", rel_l2(&a, &b));

        let div3 = ScalarField::from_fn(g, |r, z| {
            z * (-4.0 * (r - 2.0)) * bump(r, z) + z * bump(r, z) / r + (r - 2.0) * (-4.0 * z) * bump(r, z)
        })
        .unwrap();
        let a = s2_div_apply(t, &fr, &fz).unwrap();
        let b = s2_apply_field(t, &div3).unwrap();
        assert!(rel_l2(&a, &b) < 5e-3, "{}", rel_l2(&a, &b));
    }

    #[test]
    fn zero_source_gives_zero() {
        let g = HalfPlaneGrid::new(2.0, -1.0, 1.0, 8, 8).unwrap();
        let z = ScalarField::zeros(g);
        assert_eq!(s1_div_apply(0.1, &z, &z).unwrap().abs_max(), 0.0);
        assert_eq!(s2_div_apply(0.1, &z, &z).unwrap().abs_max(), 0.0);
        assert_eq!(s1_apply(0.1, &MeasureOmega::empty(), &g).unwrap().abs_max(), 0.0);
    }

    #[test]
    fn small_lag_divergence_is_centred_difference() {
        let g = HalfPlaneGrid::new(4.0, -2.0, 2.0, 16, 16).unwrap();
        let fz = ScalarField::from_fn(g, |r, z| libm::sin(r) * z * z).unwrap();
        let fr = ScalarField::zeros(g);
        let out = s1_div_apply(1e-9, &fr, &fz).unwrap();
        let (j, l) = (5, 7);
        let want = (fz.at(j, l + 1) - fz.at(j, l - 1)) / (2.0 * g.dz());
        assert!((out.at(j, l) - want).abs() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn kernels_preserve_sign(vals in proptest::collection::vec(0.0f64..1.0, 96), t in 1e-3f64..1.0) {
            let g = HalfPlaneGrid::new(3.0, -2.0, 2.0, 8, 12).unwrap();
            let f = ScalarField::new(g, vals).unwrap();
            for out in [s1_apply_field(t, &f).unwrap(), s2_apply_field(t, &f).unwrap()] {
                prop_assert!(out.min() >= -1e-12 * out.abs_max());
            }
        }

        #[test]
        fn measure_application_is_linear(w1 in -2.0f64..2.0, w2 in -2.0f64..2.0, t in 1e-3f64..0.5) {
            let g = HalfPlaneGrid::new(3.0, -2.0, 2.0, 12, 16).unwrap();
            let a = MeasureOmega::dirac(1.0, 1.1, 0.2).unwrap();
            let b = MeasureOmega::dirac(1.0, 0.6, -0.3).unwrap();
            let both = MeasureOmega::new(vec![OmegaAtom::new(w1, 1.1, 0.2), OmegaAtom::new(w2, 0.6, -0.3)], None).unwrap();
            let lhs = s1_apply(t, &both, &g).unwrap();
            let rhs = s1_apply(t, &a, &g).unwrap().combine(w1, &s1_apply(t, &b, &g).unwrap(), w2).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().abs_max() <= 1e-12 * (1.0 + rhs.abs_max()));
        }
    }
}
