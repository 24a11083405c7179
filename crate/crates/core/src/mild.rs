//! Mild solutions of the Duhamel system
//!
//! ```text
//! ω  = S1(t) ω0 - F1(ω)  - G(ρ)
//! ρ~ = S1(t) μ  - F1(ρ~) - 2 G(ρ)
//! ρ  = S2(t) ρ0 - F2(ρ~ / r)
//! ```
//!
//! with `F1(f) = ∫ S1(t-τ) div_*(v f)`, `F2(g) = ∫ S2(t-τ) div(v g)` and
//! `G(ρ) = ∫ S1(t-τ) d_r ρ`, solved by Picard iteration on a stretched time
//! grid. The velocity is recomputed from the previous iterate's `ω`.
//!
//! Time integrals use product quadrature: on `[τ_{j-1}, τ_j]` the source is
//! the mean of its end values (the first interval uses its right end, since
//! the data are measures at `τ = 0`) and the propagator is evaluated at the
//! lag `s* = ((sqrt(t-τ_{j-1}) + sqrt(t-τ_j))/2)²`, which integrates the
//! `(t-τ)^{-1/2}` singularity of `S(t-τ) div` exactly.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::biot_savart::StreamSolver;
use crate::fields::{lp_norm_omega, lp_norm_r3, pair_field_testfn, MeasureFlag, VectorField};
use crate::measures::{Measure3DAxi, MeasureOmega, Normalization};
use crate::semigroups::{s1_apply_sampled, s2_apply_sampled, AtomSampling, LagOperator, Semigroup};
use crate::{Error, HalfPlaneGrid, Result, ScalarField};

/// Nodes `t_k = T (k/K)^γ`, `k = 1..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    stretch: f64,
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(horizon: f64, count: usize, stretch: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter("time horizon must be positive"));
        }
        if count == 0 {
            return Err(Error::InvalidParameter("time grid needs at least one node"));
        }
        if !(stretch >= 1.0 && stretch.is_finite()) {
            return Err(Error::InvalidParameter("stretching exponent must be >= 1"));
        }
        let nodes = (1..=count)
            .map(|k| horizon * libm::pow(k as f64 / count as f64, stretch))
            .collect();
        Ok(Self {
            horizon,
            stretch,
            nodes,
        })
    }

    /// Default stretching `γ = 2`.
    pub fn quadratic(horizon: f64, count: usize) -> Result<Self> {
        Self::new(horizon, count, 2.0)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Start of the interval ending at node `k` (0 for the first).
    fn left(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.nodes[k - 1]
        }
    }

    /// Index of the node closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &s) in self.nodes.iter().enumerate() {
            if libm::fabs(s - t) < libm::fabs(self.nodes[best] - t) {
                best = k;
            }
        }
        best
    }
}

/// The three unknowns of the mild system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    Omega,
    RhoTilde,
    Rho,
}

impl Unknown {
    pub const ALL: [Unknown; 3] = [Unknown::Omega, Unknown::RhoTilde, Unknown::Rho];

    pub fn name(&self) -> &'static str {
        match self {
            Unknown::Omega => "omega",
            Unknown::RhoTilde => "rho_tilde",
            Unknown::Rho => "rho",
        }
    }
}

/// Time-indexed solution triple with the velocity at each node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: HalfPlaneGrid,
    pub times: TimeGrid,
    pub omega: Vec<ScalarField>,
    pub rho_tilde: Vec<ScalarField>,
    pub rho: Vec<ScalarField>,
    pub velocity: Vec<VectorField>,
}

/// Norms of one node, in the layout of `norms.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRow {
    pub t: f64,
    /// `[L1, L4/3, L2, L4, L∞]` for ω and ρ~ (on Ω) and ρ (on R³).
    pub omega: [f64; 5],
    pub rho_tilde: [f64; 5],
    pub rho: [f64; 5],
}

/// Exponents tabulated in [`NormRow`].
pub const NORM_EXPONENTS: [f64; 5] = [1.0, 4.0 / 3.0, 2.0, 4.0, f64::INFINITY];

impl Trajectory {
    fn zeros(grid: HalfPlaneGrid, times: TimeGrid) -> Self {
        let k = times.len();
        Self {
            grid,
            omega: vec![ScalarField::zeros(grid); k],
            rho_tilde: vec![ScalarField::zeros(grid); k],
            rho: vec![ScalarField::zeros(grid); k],
            velocity: vec![VectorField::zeros(grid); k],
            times,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn field(&self, u: Unknown, k: usize) -> &ScalarField {
        match u {
            Unknown::Omega => &self.omega[k],
            Unknown::RhoTilde => &self.rho_tilde[k],
            Unknown::Rho => &self.rho[k],
        }
    }

    pub fn fields(&self, u: Unknown) -> &[ScalarField] {
        match u {
            Unknown::Omega => &self.omega,
            Unknown::RhoTilde => &self.rho_tilde,
            Unknown::Rho => &self.rho,
        }
    }

    /// `||f||_{L^p}` of unknown `u` at node `k`: Ω norm for ω, ρ~; R³ for ρ.
    pub fn norm(&self, u: Unknown, k: usize, p: f64) -> Result<f64> {
        match u {
            Unknown::Rho => lp_norm_r3(&self.rho[k], p),
            _ => lp_norm_omega(self.field(u, k), p),
        }
    }

    pub fn norm_rows(&self) -> Vec<NormRow> {
        (0..self.len())
            .map(|k| {
                let row = |u| NORM_EXPONENTS.map(|p| self.norm(u, k, p).unwrap_or(f64::NAN));
                NormRow {
                    t: self.times.nodes()[k],
                    omega: row(Unknown::Omega),
                    rho_tilde: row(Unknown::RhoTilde),
                    rho: row(Unknown::Rho),
                }
            })
            .collect()
    }

    fn check_node(&self, k: usize) -> Result<()> {
        if k < self.len() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { k, len: self.len() })
        }
    }
}

/// `sup_k t_k^{1/4} ||f(t_k)||_{L^{4/3}(Ω)}` for ω or ρ~ (and, for ρ, the
/// same quantity on Ω, which is what `X_T` would be for a half-plane field).
pub fn xt_norm(traj: &Trajectory, u: Unknown) -> f64 {
    traj.times
        .nodes()
        .iter()
        .zip(traj.fields(u))
        .map(|(t, f)| libm::pow(*t, 0.25) * lp_norm_omega(f, 4.0 / 3.0).unwrap_or(f64::NAN))
        .fold(0.0, f64::max)
}

/// `sup_k t_k^{3/8} ||ρ(t_k)||_{L^{4/3}(R³)}`.
pub fn zt_norm(traj: &Trajectory) -> f64 {
    traj.times
        .nodes()
        .iter()
        .zip(&traj.rho)
        .map(|(t, f)| libm::pow(*t, 0.375) * lp_norm_r3(f, 4.0 / 3.0).unwrap_or(f64::NAN))
        .fold(0.0, f64::max)
}

/// Initial data `(ω0, μ, ρ0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub omega0: MeasureOmega,
    /// Initial `ρ~`; for the Boussinesq system it is the reduction of `ρ0`.
    pub mu: MeasureOmega,
    pub rho0: Measure3DAxi,
}

impl InitialData {
    /// Boussinesq data: `μ` is `ρ0` reduced to the half-plane with the
    /// `1/(2π)` factor, so that `ρ~ = r ρ` is propagated.
    pub fn boussinesq(omega0: MeasureOmega, rho0: Measure3DAxi) -> Result<Self> {
        let mu = rho0.reduce_to_halfplane(Normalization::Over2Pi)?;
        Ok(Self { omega0, mu, rho0 })
    }

    /// Independent `μ`.
    pub fn general(omega0: MeasureOmega, mu: MeasureOmega, rho0: Measure3DAxi) -> Self {
        Self { omega0, mu, rho0 }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            omega0: self.omega0.scaled(c),
            mu: self.mu.scaled(c),
            rho0: self.rho0.scaled(c),
        }
    }

    /// `||ω0,pp|| + ||μ_pp|| + ||ρ0,pp||`.
    pub fn atomic_size(&self) -> f64 {
        self.omega0.atomic_norm() + self.mu.atomic_norm() + self.rho0.atomic_norm()
    }
}

/// `(S1(t) ω0, S1(t) μ, S2(t) ρ0)` at every node, velocity from `ω_lin`.
pub fn linear_part(data: &InitialData, grid: &HalfPlaneGrid, times: &TimeGrid) -> Result<Trajectory> {
    let stream = StreamSolver::new(grid)?;
    linear_with(data, grid, times, &stream, crate::biot_savart::DEFAULT_TOL)
}

fn linear_with(
    data: &InitialData,
    grid: &HalfPlaneGrid,
    times: &TimeGrid,
    stream: &StreamSolver,
    stream_tol: f64,
) -> Result<Trajectory> {
    let mut traj = Trajectory::zeros(*grid, times.clone());
    let sampling = AtomSampling::CellAverage;
    for (k, &t) in times.nodes().iter().enumerate() {
        if !data.omega0.is_zero() {
            traj.omega[k] = s1_apply_sampled(t, &data.omega0, grid, sampling)?;
        }
        if !data.mu.is_zero() {
            traj.rho_tilde[k] = s1_apply_sampled(t, &data.mu, grid, sampling)?;
        }
        if !data.rho0.is_zero() {
            traj.rho[k] = s2_apply_sampled(t, &data.rho0, grid, sampling)?;
        }
        traj.velocity[k] = stream.velocity(&traj.omega[k], stream_tol)?;
    }
    Ok(traj)
}

/// Interval weights and lags for the Duhamel sum at node `k`.
fn lags(times: &TimeGrid, k: usize) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
    let t = times.nodes()[k];
    (0..=k).map(move |j| {
        let a = times.left(j);
        let b = times.nodes()[j];
        let s = 0.5 * (libm::sqrt(t - a) + libm::sqrt((t - b).max(0.0)));
        (j, b - a, s * s)
    })
}

/// Interval-averaged source for interval `j` from node values.
fn interval_source(nodes: &[Vec<f64>], j: usize, out: &mut [f64]) {
    if j == 0 {
        out.copy_from_slice(&nodes[0]);
    } else {
        for ((o, a), b) in out.iter_mut().zip(&nodes[j - 1]).zip(&nodes[j]) {
            *o = 0.5 * (a + b);
        }
    }
}

fn duhamel_generic(
    traj: &Trajectory,
    k: usize,
    kind: Semigroup,
    source: impl Fn(usize) -> (Vec<f64>, Vec<f64>),
) -> Result<ScalarField> {
    traj.check_node(k)?;
    let n = traj.grid.len();
    let nodes: Vec<(Vec<f64>, Vec<f64>)> = (0..=k).map(&source).collect();
    let fr: Vec<Vec<f64>> = nodes.iter().map(|s| s.0.clone()).collect();
    let fz: Vec<Vec<f64>> = nodes.iter().map(|s| s.1.clone()).collect();
    let mut out = vec![0.0; n];
    let (mut sr, mut sz, mut scratch) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (j, w, s) in lags(&traj.times, k) {
        let op = LagOperator::new(&traj.grid, kind, s, true)?;
        interval_source(&fr, j, &mut sr);
        interval_source(&fz, j, &mut sz);
        op.add_div(&sr, &sz, w, &mut out, &mut scratch);
    }
    let f = ScalarField::from_raw(traj.grid, out);
    f.check_finite("Duhamel integral")?;
    Ok(f)
}

fn product(a: &ScalarField, b: &ScalarField) -> Vec<f64> {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).collect()
}

/// `F1(g)(t_k)` for `g = ω` or `ρ~`, with the trajectory's velocity.
pub fn duhamel_f1(traj: &Trajectory, u: Unknown, k: usize) -> Result<ScalarField> {
    if u == Unknown::Rho {
        return Err(Error::InvalidParameter("F1 acts on omega or rho_tilde"));
    }
    duhamel_generic(traj, k, Semigroup::S1, |j| {
        let g = traj.field(u, j);
        let v = &traj.velocity[j];
        (product(&v.vr, g), product(&v.vz, g))
    })
}

/// `F2(ρ~/r)(t_k)`.
pub fn duhamel_f2(traj: &Trajectory, k: usize) -> Result<ScalarField> {
    duhamel_generic(traj, k, Semigroup::S2, |j| {
        let g = traj.rho_tilde[j].times_r_pow(-1.0);
        let v = &traj.velocity[j];
        (product(&v.vr, &g), product(&v.vz, &g))
    })
}

/// `G(ρ)(t_k) = ∫ S1(t-τ) d_r ρ dτ`.
pub fn duhamel_g(traj: &Trajectory, k: usize) -> Result<ScalarField> {
    let zero = vec![0.0; traj.grid.len()];
    duhamel_generic(traj, k, Semigroup::S1, |j| {
        (traj.rho[j].values().to_vec(), zero.clone())
    })
}

/// Picard controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    /// Stop when the sup-node relative increment falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Relative residual for the stream-function solves.
    pub stream_tol: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 50,
            stream_tol: crate::biot_savart::DEFAULT_TOL,
        }
    }
}

/// Diagnostics of a Picard run.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub sweeps: usize,
    /// Sup-node relative increment after each sweep.
    pub increments: Vec<f64>,
    /// `increments[n] / increments[n-1]`.
    pub ratios: Vec<f64>,
    /// `||ω_lin||_X + ||ρ~_lin||_X + ||ρ_lin||_Z`.
    pub a0t: f64,
    /// Same norm of the final iterate.
    pub at: f64,
    /// Empirical bilinear constants `||F1(g)||_X / (||ω||_X ||g||_X)` for
    /// `g = ω, ρ~` (NaN when a factor vanishes).
    pub bilinear_omega: f64,
    pub bilinear_rho_tilde: f64,
    /// Converged with every ratio after the second sweep below one.
    pub satisfied: bool,
}

impl ContractionReport {
    /// Predicted contraction ratio `2 C A_{0,T}` with the larger measured constant.
    pub fn predicted_ratio(&self) -> f64 {
        let c = [self.bilinear_omega, self.bilinear_rho_tilde]
            .into_iter()
            .filter(|c| c.is_finite())
            .fold(0.0, f64::max);
        2.0 * c * self.a0t
    }
}

/// Combined `X_T`/`Z_T` size of a trajectory.
pub fn solution_size(traj: &Trajectory) -> f64 {
    xt_norm(traj, Unknown::Omega) + xt_norm(traj, Unknown::RhoTilde) + zt_norm(traj)
}

struct PairOps {
    s1: LagOperator,
    s2: LagOperator,
}

/// Picard solver with propagator matrices cached across sweeps.
pub struct MildSolver {
    grid: HalfPlaneGrid,
    times: TimeGrid,
    settings: PicardSettings,
    stream: StreamSolver,
    linear: Trajectory,
    ops: Vec<Option<Box<PairOps>>>,
    need_s2: bool,
}

/// Node sources for one sweep: `(fr, fz)` for ω, ρ~ and ρ.
struct Sources {
    omega: (Vec<Vec<f64>>, Vec<Vec<f64>>),
    rho_tilde: (Vec<Vec<f64>>, Vec<Vec<f64>>),
    rho: (Vec<Vec<f64>>, Vec<Vec<f64>>),
}

impl MildSolver {
    pub fn new(grid: &HalfPlaneGrid, times: &TimeGrid, data: &InitialData, settings: PicardSettings) -> Result<Self> {
        if !(settings.tol > 0.0) {
            return Err(Error::InvalidParameter("Picard tolerance must be positive"));
        }
        let stream = StreamSolver::new(grid)?;
        let linear = linear_with(data, grid, times, &stream, settings.stream_tol)?;
        let k = times.len();
        let mut ops = Vec::new();
        ops.resize_with(k * (k + 1) / 2, || None);
        Ok(Self {
            grid: *grid,
            times: times.clone(),
            settings,
            stream,
            linear,
            ops,
            need_s2: !data.rho0.is_zero() || !data.mu.is_zero(),
        })
    }

    pub fn linear(&self) -> &Trajectory {
        &self.linear
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    /// Swaps in new initial data, keeping the cached propagators.
    pub fn reset_data(&mut self, data: &InitialData) -> Result<()> {
        self.linear = linear_with(data, &self.grid, &self.times, &self.stream, self.settings.stream_tol)?;
        let need_s2 = !data.rho0.is_zero() || !data.mu.is_zero();
        if need_s2 && !self.need_s2 {
            self.ops.iter_mut().for_each(|o| *o = None);
        }
        self.need_s2 |= need_s2;
        Ok(())
    }

    fn pair_ops(&mut self, k: usize, j: usize, s: f64) -> Result<&PairOps> {
        let idx = k * (k + 1) / 2 + j;
        if self.ops[idx].is_none() {
            let s1 = LagOperator::new(&self.grid, Semigroup::S1, s, true)?;
            // S2 is only needed when there is a density to transport.
            let s2 = if self.need_s2 {
                LagOperator::new(&self.grid, Semigroup::S2, s, true)?
            } else {
                s1.clone()
            };
            self.ops[idx] = Some(Box::new(PairOps { s1, s2 }));
        }
        Ok(self.ops[idx].as_deref().expect("just built"))
    }

    fn sources(&self, traj: &Trajectory) -> Sources {
        let mut s = Sources {
            omega: (Vec::new(), Vec::new()),
            rho_tilde: (Vec::new(), Vec::new()),
            rho: (Vec::new(), Vec::new()),
        };
        let g = self.grid;
        for k in 0..traj.len() {
            let v = &traj.velocity[k];
            let (vr, vz) = (v.vr.values(), v.vz.values());
            let w = traj.omega[k].values();
            let rt = traj.rho_tilde[k].values();
            let rho = traj.rho[k].values();
            let mut a = vec![0.0; g.len()];
            let mut b = vec![0.0; g.len()];
            let mut c = vec![0.0; g.len()];
            let mut d = vec![0.0; g.len()];
            let mut e = vec![0.0; g.len()];
            let mut f = vec![0.0; g.len()];
            for l in 0..g.nz() {
                for j in 0..g.nr() {
                    let i = g.index(j, l);
                    a[i] = vr[i] * w[i] + rho[i];
                    b[i] = vz[i] * w[i];
                    c[i] = vr[i] * rt[i] + 2.0 * rho[i];
                    d[i] = vz[i] * rt[i];
                    let q = rt[i] / g.r(j);
                    e[i] = vr[i] * q;
                    f[i] = vz[i] * q;
                }
            }
            s.omega.0.push(a);
            s.omega.1.push(b);
            s.rho_tilde.0.push(c);
            s.rho_tilde.1.push(d);
            s.rho.0.push(e);
            s.rho.1.push(f);
        }
        s
    }

    /// One application of the fixed-point map.
    pub fn sweep(&mut self, traj: &Trajectory) -> Result<Trajectory> {
        let src = self.sources(traj);
        let n = self.grid.len();
        let mut next = self.linear.clone();
        let (mut sr, mut sz, mut scratch) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let times = self.times.clone();
        let with_rho = self.need_s2;
        for k in 0..times.len() {
            let mut w = vec![0.0; n];
            let mut rt = vec![0.0; n];
            let mut rho = vec![0.0; n];
            for (j, dt, s) in lags(&times, k) {
                let ops = self.pair_ops(k, j, s)?;
                interval_source(&src.omega.0, j, &mut sr);
                interval_source(&src.omega.1, j, &mut sz);
                ops.s1.add_div(&sr, &sz, -dt, &mut w, &mut scratch);
                if with_rho {
                    interval_source(&src.rho_tilde.0, j, &mut sr);
                    interval_source(&src.rho_tilde.1, j, &mut sz);
                    ops.s1.add_div(&sr, &sz, -dt, &mut rt, &mut scratch);
                    interval_source(&src.rho.0, j, &mut sr);
                    interval_source(&src.rho.1, j, &mut sz);
                    ops.s2.add_div(&sr, &sz, -dt, &mut rho, &mut scratch);
                }
            }
            for (dst, add) in [
                (&mut next.omega[k], &w),
                (&mut next.rho_tilde[k], &rt),
                (&mut next.rho[k], &rho),
            ] {
                for (d, a) in dst.values_mut().iter_mut().zip(add) {
                    *d += a;
                }
                dst.check_finite("Picard iterate")?;
            }
            next.velocity[k] = self.stream.velocity(&next.omega[k], self.settings.stream_tol)?;
        }
        Ok(next)
    }

    /// Iterates the map from the linear part until the increment drops below
    /// the tolerance; divergence is three consecutive growing increments.
    pub fn solve(&mut self) -> Result<(Trajectory, ContractionReport)> {
        let mut current = self.linear.clone();
        let mut report = ContractionReport {
            sweeps: 0,
            increments: Vec::new(),
            ratios: Vec::new(),
            a0t: solution_size(&self.linear),
            at: f64::NAN,
            bilinear_omega: f64::NAN,
            bilinear_rho_tilde: f64::NAN,
            satisfied: false,
        };
        let mut growing = 0;
        for sweep in 1..=self.settings.max_sweeps {
            let next = match self.sweep(&current) {
                Ok(t) => t,
                Err(Error::NonFinite(_)) => {
                    report.sweeps = sweep;
                    report.increments.push(f64::INFINITY);
                    return Err(Error::PicardDiverged(Box::new(report)));
                }
                Err(e) => return Err(e),
            };
            let inc = increment(&current, &next);
            report.sweeps = sweep;
            if let Some(&prev) = report.increments.last() {
                let ratio = if prev > 0.0 { inc / prev } else { 0.0 };
                report.ratios.push(ratio);
                growing = if ratio >= 1.0 { growing + 1 } else { 0 };
            }
            report.increments.push(inc);
            current = next;
            if !inc.is_finite() || growing >= 3 {
                report.at = solution_size(&current);
                return Err(Error::PicardDiverged(Box::new(report)));
            }
            if inc < self.settings.tol {
                report.at = solution_size(&current);
                report.satisfied = report.ratios.iter().skip(1).all(|r| *r < 1.0);
                self.bilinear_constants(&current, &mut report)?;
                return Ok((current, report));
            }
        }
        report.at = solution_size(&current);
        Err(Error::PicardNotConverged(Box::new(report)))
    }

    fn bilinear_constants(&mut self, traj: &Trajectory, report: &mut ContractionReport) -> Result<()> {
        // F1 of the converged state, by one sweep with the buoyancy switched off.
        let mut probe = traj.clone();
        for f in probe.rho.iter_mut() {
            *f = ScalarField::zeros(self.grid);
        }
        let mapped = self.sweep(&probe)?;
        let mut f1 = Trajectory::zeros(self.grid, self.times.clone());
        for k in 0..traj.len() {
            f1.omega[k] = self.linear.omega[k].sub(&mapped.omega[k])?;
            f1.rho_tilde[k] = self.linear.rho_tilde[k].sub(&mapped.rho_tilde[k])?;
        }
        let xw = xt_norm(traj, Unknown::Omega);
        let xr = xt_norm(traj, Unknown::RhoTilde);
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::NAN };
        report.bilinear_omega = ratio(xt_norm(&f1, Unknown::Omega), xw * xw);
        report.bilinear_rho_tilde = ratio(xt_norm(&f1, Unknown::RhoTilde), xw * xr);
        Ok(())
    }
}

/// `max_{k, u} ||next - prev||_∞ / ||next||_∞` (0 where both vanish).
fn increment(prev: &Trajectory, next: &Trajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for u in Unknown::ALL {
        for (a, b) in prev.fields(u).iter().zip(next.fields(u)) {
            let scale = b.abs_max();
            let diff = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| libm::fabs(x - y))
                .fold(0.0, f64::max);
            if diff == 0.0 {
                continue;
            }
            worst = worst.max(if scale > 0.0 { diff / scale } else { f64::INFINITY });
        }
    }
    worst
}

/// Runs Picard iteration with the given controls.
pub fn picard_solve(
    data: &InitialData,
    grid: &HalfPlaneGrid,
    times: &TimeGrid,
    settings: PicardSettings,
) -> Result<(Trajectory, ContractionReport)> {
    MildSolver::new(grid, times, data, settings)?.solve()
}

/// Admissibility problem with a test function.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityWarning {
    pub test: usize,
    pub quantity: &'static str,
    pub value: f64,
}

/// One row of the weak-convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingGap {
    pub test: usize,
    pub node: usize,
    pub t: f64,
    pub omega: f64,
    pub rho_tilde: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeakConvergenceReport {
    pub gaps: Vec<PairingGap>,
    pub warnings: Vec<AdmissibilityWarning>,
}

impl WeakConvergenceReport {
    /// Gaps of unknown `u` for one test function, in node order.
    pub fn series(&self, test: usize, u: Unknown) -> Vec<(f64, f64)> {
        self.gaps
            .iter()
            .filter(|g| g.test == test)
            .map(|g| {
                let v = match u {
                    Unknown::Omega => g.omega,
                    Unknown::RhoTilde => g.rho_tilde,
                    Unknown::Rho => g.rho,
                };
                (g.t, v)
            })
            .collect()
    }
}

fn admissibility_norms<F: Fn(f64, f64) -> f64>(psi: &F, grid: &HalfPlaneGrid) -> Result<[f64; 4]> {
    let h = 1e-6;
    let grad = ScalarField::from_fn(*grid, |r, z| {
        let dr = (psi(r + h, z) - psi(r - h, z)) / (2.0 * h);
        let dz = (psi(r, z + h) - psi(r, z - h)) / (2.0 * h);
        libm::hypot(dr, dz)
    })?;
    let over_r = ScalarField::from_fn(*grid, |r, z| psi(r, z) / r)?;
    let over_r2 = ScalarField::from_fn(*grid, |r, z| psi(r, z) / (r * r))?;
    Ok([
        grad.abs_max(),
        over_r.abs_max(),
        lp_norm_omega(&over_r, 4.0)?,
        lp_norm_omega(&over_r2, 4.0)?,
    ])
}

/// Pairing gaps `|<u(t_k), ψ> - <u0, ψ>|` at the given nodes for each test
/// function, plus warnings for test functions whose admissibility norms are
/// not finite (detected as growth under grid refinement).
pub fn weak_convergence_probe<F: Fn(f64, f64) -> f64>(
    traj: &Trajectory,
    data: &InitialData,
    bank: &[F],
    nodes: &[usize],
) -> Result<WeakConvergenceReport> {
    for &k in nodes {
        traj.check_node(k)?;
    }
    let mut report = WeakConvergenceReport::default();
    let fine = traj.grid.refined(2)?;
    const NAMES: [&str; 4] = ["|grad psi|_inf", "|psi/r|_inf", "|psi/r|_L4", "|psi/r^2|_L4"];
    for (i, psi) in bank.iter().enumerate() {
        let coarse = admissibility_norms(psi, &traj.grid)?;
        let refined = admissibility_norms(psi, &fine)?;
        for q in 0..4 {
            let (a, b) = (coarse[q], refined[q]);
            if !a.is_finite() || !b.is_finite() || b > 1.25 * a + 1e-12 {
                report.warnings.push(AdmissibilityWarning {
                    test: i,
                    quantity: NAMES[q],
                    value: b,
                });
            }
        }
        let w0 = data.omega0.pair(psi);
        let m0 = data.mu.pair(psi);
        let r0 = data.rho0.pair_profile(psi);
        for &k in nodes {
            report.gaps.push(PairingGap {
                test: i,
                node: k,
                t: traj.times.nodes()[k],
                omega: libm::fabs(pair_field_testfn(&traj.omega[k], psi, MeasureFlag::DrDz) - w0),
                rho_tilde: libm::fabs(pair_field_testfn(&traj.rho_tilde[k], psi, MeasureFlag::DrDz) - m0),
                rho: libm::fabs(pair_field_testfn(&traj.rho[k], psi, MeasureFlag::Volume) - r0),
            });
        }
    }
    Ok(report)
}

/// The three smallest nodes, the default probe set.
pub fn earliest_nodes(traj: &Trajectory) -> Vec<usize> {
    (0..traj.len().min(3)).collect()
}
