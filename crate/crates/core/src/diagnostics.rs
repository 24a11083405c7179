//! Decay functionals, power-law fits and estimate sweeps.

use alloc::vec::Vec;

use crate::biot_savart::{StreamSolver, DEFAULT_TOL};
use crate::fields::{check_exponent, lp_norm_omega, lp_norm_r3, weighted_lp_norm};
use crate::measures::{Measure3DAxi, MeasureOmega};
use crate::mild::{InitialData, MildSolver, PicardSettings, TimeGrid, Trajectory, Unknown};
use crate::semigroups::{s1_apply_sampled, s2_apply_sampled, AtomSampling, LagOperator, Semigroup};
use crate::{Error, HalfPlaneGrid, Result, ScalarField};

/// Time weight exponent `1 - 1/p` of the half-plane decay bounds.
pub fn omega_decay_exponent(p: f64) -> f64 {
    1.0 - 1.0 / p
}

/// Time weight exponent `(3/2)(1 - 1/p)` of the three-dimensional bounds.
pub fn r3_decay_exponent(p: f64) -> f64 {
    1.5 * (1.0 - 1.0 / p)
}

/// `(t_k, t_k^{1-1/p} ||u(t_k)||_{L^p})` for ω or ρ~ on Ω, and
/// `(t_k, t_k^{(3/2)(1-1/p)} ||ρ(t_k)||_{L^p(R³)})` for ρ.
pub fn weighted_decay_series(traj: &Trajectory, u: Unknown, p: f64) -> Result<Vec<(f64, f64)>> {
    check_exponent(p)?;
    let e = match u {
        Unknown::Rho => r3_decay_exponent(p),
        _ => omega_decay_exponent(p),
    };
    traj.times
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, &t)| Ok((t, libm::pow(t, e) * traj.norm(u, k, p)?)))
        .collect()
}

fn sup_up_to(series: &[(f64, f64)], t_max: f64) -> f64 {
    series
        .iter()
        .filter(|(t, _)| *t <= t_max * (1.0 + 1e-12))
        .map(|(_, v)| *v)
        .fold(0.0, f64::max)
}

/// `N_p(u, T) = sup_{t_k <= T} t_k^{1-1/p} ||u(t_k)||_{L^p(Ω)}`, `u = ω` or `ρ~`.
pub fn np_functional(traj: &Trajectory, u: Unknown, p: f64, t_max: f64) -> Result<f64> {
    if u == Unknown::Rho {
        return Err(Error::InvalidParameter("N_p is taken on omega or rho_tilde"));
    }
    Ok(sup_up_to(&weighted_decay_series(traj, u, p)?, t_max))
}

/// `J_p(ρ, T) = sup_{t_k <= T} t_k^{(3/2)(1-1/p)} ||ρ(t_k)||_{L^p(R³)}`.
pub fn jp_functional(traj: &Trajectory, p: f64, t_max: f64) -> Result<f64> {
    Ok(sup_up_to(&weighted_decay_series(traj, Unknown::Rho, p)?, t_max))
}

/// `M_p(μ, T)`: sup over the sample times `<= T` of `t^{1-1/p} ||S1(t) μ||_{L^p(Ω)}`.
pub fn mp_functional(mu: &MeasureOmega, grid: &HalfPlaneGrid, times: &[f64], p: f64, t_max: f64) -> Result<f64> {
    check_exponent(p)?;
    let mut best: f64 = 0.0;
    for &t in times.iter().filter(|t| **t <= t_max) {
        let f = s1_apply_sampled(t, mu, grid, AtomSampling::CellAverage)?;
        best = best.max(libm::pow(t, omega_decay_exponent(p)) * lp_norm_omega(&f, p)?);
    }
    Ok(best)
}

/// `F_p(ρ0, T)`: sup over the sample times `<= T` of `t^{(3/2)(1-1/p)} ||S2(t) ρ0||_{L^p(R³)}`.
pub fn fp_functional(rho0: &Measure3DAxi, grid: &HalfPlaneGrid, times: &[f64], p: f64, t_max: f64) -> Result<f64> {
    check_exponent(p)?;
    let mut best: f64 = 0.0;
    for &t in times.iter().filter(|t| **t <= t_max) {
        let f = s2_apply_sampled(t, rho0, grid, AtomSampling::CellAverage)?;
        best = best.max(libm::pow(t, r3_decay_exponent(p)) * lp_norm_r3(&f, p)?);
    }
    Ok(best)
}

/// Least-squares power law `value ≈ e^c t^slope`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Smallest sample count and time span accepted by [`decay_fit`].
pub const MIN_FIT_POINTS: usize = 5;
pub const MIN_FIT_DECADES: f64 = 1.0;

/// Fits `log(value)` against `log(t)`; needs 5 positive samples over a decade.
pub fn decay_fit(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter("times and values differ in length"));
    }
    for (index, (&t, &v)) in times.iter().zip(values).enumerate() {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveSample { index, value: v });
        }
    }
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(0.0, f64::max);
    let decades = if times.is_empty() { 0.0 } else { libm::log10(hi / lo) };
    if times.len() < MIN_FIT_POINTS || decades < MIN_FIT_DECADES - 1e-9 {
        return Err(Error::InsufficientSamples {
            points: times.len(),
            decades,
        });
    }
    let x: Vec<f64> = times.iter().map(|t| libm::log(*t)).collect();
    let y: Vec<f64> = values.iter().map(|v| libm::log(*v)).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit {
        times: times.to_vec(),
        values: values.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

/// Fit of a `(t, value)` series restricted to `t ∈ [lo, hi]`.
pub fn decay_fit_window(series: &[(f64, f64)], lo: f64, hi: f64) -> Result<DecayFit> {
    let (t, v): (Vec<f64>, Vec<f64>) = series
        .iter()
        .filter(|(t, _)| *t >= lo * (1.0 - 1e-12) && *t <= hi * (1.0 + 1e-12))
        .copied()
        .unzip();
    decay_fit(&t, &v)
}

/// Fit over the last decade `[t_last / 10, t_last]` of a series.
pub fn final_decade_fit(series: &[(f64, f64)]) -> Result<DecayFit> {
    let hi = series.iter().map(|(t, _)| *t).fold(0.0, f64::max);
    decay_fit_window(series, hi / 10.0, hi)
}

/// `n` log-spaced times from `lo` to `hi` inclusive.
pub fn log_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return alloc::vec![lo];
    }
    let (a, b) = (libm::log(lo), libm::log(hi));
    (0..n)
        .map(|i| libm::exp(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Which estimate an [`estimate_sweep`] probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimateKind {
    /// `||S1(t) f||_q <= C t^{-(1/p-1/q)} ||f||_p`.
    Smoothing { p: f64, q: f64 },
    /// `||r^α S1(t) f||_q <= C t^{-(1/p-1/q+(β-α)/2)} ||r^β f||_p`.
    Weighted { alpha: f64, beta: f64, p: f64, q: f64 },
    /// `||S1(t) div_*(f, f)||_q <= C t^{-(1/2+1/p-1/q)} ||(f, f)||_p`.
    Div { p: f64, q: f64 },
    /// `||v||_{L4} <= C ||ω||_{L4/3}` (scale invariant, power 0).
    Biot,
}

impl EstimateKind {
    /// Exponent `e` in the bound `measured <= C t^{-e} input`.
    pub fn power(&self) -> f64 {
        match *self {
            EstimateKind::Smoothing { p, q } => 1.0 / p - 1.0 / q,
            EstimateKind::Weighted { alpha, beta, p, q } => 1.0 / p - 1.0 / q + 0.5 * (beta - alpha),
            EstimateKind::Div { p, q } => 0.5 + 1.0 / p - 1.0 / q,
            EstimateKind::Biot => 0.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EstimateKind::Smoothing { .. } => "smoothing",
            EstimateKind::Weighted { .. } => "weighted",
            EstimateKind::Div { .. } => "div",
            EstimateKind::Biot => "biot",
        }
    }

    /// `(α, β, p, q)`; the unused entries are 0 (weights) or the natural exponents.
    pub fn parameters(&self) -> (f64, f64, f64, f64) {
        match *self {
            EstimateKind::Smoothing { p, q } | EstimateKind::Div { p, q } => (0.0, 0.0, p, q),
            EstimateKind::Weighted { alpha, beta, p, q } => (alpha, beta, p, q),
            EstimateKind::Biot => (0.0, 0.0, 4.0 / 3.0, 4.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let (alpha, beta, p, q) = self.parameters();
        check_exponent(p)?;
        check_exponent(q)?;
        if p > q {
            return Err(Error::InvalidParameter("estimates need p <= q"));
        }
        if alpha > beta || !(-1.0..=2.0).contains(&alpha) || !(-1.0..=2.0).contains(&beta) {
            return Err(Error::InvalidParameter("weights need -1 <= alpha <= beta <= 2"));
        }
        Ok(())
    }
}

/// One sampled `(case, t)` of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub case: usize,
    pub t: f64,
    pub measured: f64,
    pub input: f64,
    /// `t^e measured / input`, the empirical constant.
    pub ratio: f64,
}

/// Per-case summary: fitted exponent of `measured / input` and flatness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateCaseSummary {
    pub case: usize,
    /// `-slope` of `measured / input` against `t`.
    pub fitted_power: f64,
    pub max_ratio: f64,
    /// Ratio drifts by more than 10% per decade.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub kind: EstimateKind,
    pub records: Vec<EstimateRecord>,
    pub summaries: Vec<EstimateCaseSummary>,
}

impl EstimateReport {
    pub fn any_flagged(&self) -> bool {
        self.summaries.iter().any(|s| s.flagged)
    }
}

/// Largest tolerated drift of the empirical constant, per decade of `t`.
pub const FLAT_TREND_PER_DECADE: f64 = 0.10;

/// Measures an estimate along dilation families: case `f` is sampled at time
/// `t` as `f(r/√t, z/√t)`, which makes the measured ratio scale exactly like
/// the theoretical power in the continuum.
pub fn estimate_sweep<F: Fn(f64, f64) -> f64>(
    kind: EstimateKind,
    bank: &[F],
    grid: &HalfPlaneGrid,
    times: &[f64],
) -> Result<EstimateReport> {
    kind.validate()?;
    if bank.is_empty() {
        return Err(Error::InvalidParameter("estimate sweep needs a nonempty bank"));
    }
    let stream = match kind {
        EstimateKind::Biot => Some(StreamSolver::new(grid)?),
        _ => None,
    };
    let (alpha, beta, p, q) = kind.parameters();
    let e = kind.power();
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for (case, f1) in bank.iter().enumerate() {
        let mut samples = Vec::new();
        for &t in times {
            let lam = libm::sqrt(t);
            let f = ScalarField::from_fn(*grid, |r, z| f1(r / lam, z / lam))?;
            let (measured, input) = match kind {
                EstimateKind::Smoothing { .. } => {
                    let op = LagOperator::new(grid, Semigroup::S1, t, false)?;
                    (lp_norm_omega(&op.apply(&f)?, q)?, lp_norm_omega(&f, p)?)
                }
                EstimateKind::Weighted { .. } => {
                    let op = LagOperator::new(grid, Semigroup::S1, t, false)?;
                    (
                        weighted_lp_norm(&op.apply(&f)?, alpha, q)?,
                        weighted_lp_norm(&f, beta, p)?,
                    )
                }
                EstimateKind::Div { .. } => {
                    let op = LagOperator::new(grid, Semigroup::S1, t, true)?;
                    let out = op.apply_div(&f, &f)?;
                    (lp_norm_omega(&out, q)?, libm::sqrt(2.0) * lp_norm_omega(&f, p)?)
                }
                EstimateKind::Biot => {
                    let v = stream.as_ref().expect("built above").velocity(&f, DEFAULT_TOL)?;
                    (lp_norm_omega(&v.magnitude(), 4.0)?, lp_norm_omega(&f, 4.0 / 3.0)?)
                }
            };
            let ratio = if input > 0.0 {
                libm::pow(t, e) * measured / input
            } else {
                0.0
            };
            records.push(EstimateRecord {
                case,
                t,
                measured,
                input,
                ratio,
            });
            samples.push((t, measured, input, ratio));
        }
        let (ts, rel): (Vec<f64>, Vec<f64>) = samples.iter().filter(|s| s.2 > 0.0).map(|s| (s.0, s.1 / s.2)).unzip();
        let max_ratio = samples.iter().map(|s| s.3).fold(0.0, f64::max);
        let (fitted_power, flagged) = match decay_fit(&ts, &rel) {
            Ok(fit) => {
                let drift = libm::fabs(fit.slope + e) * core::f64::consts::LN_10;
                (-fit.slope, libm::exp(drift) - 1.0 > FLAT_TREND_PER_DECADE)
            }
            Err(_) => (f64::NAN, true),
        };
        summaries.push(EstimateCaseSummary {
            case,
            fitted_power,
            max_ratio,
            flagged,
        });
    }
    Ok(EstimateReport {
        kind,
        records,
        summaries,
    })
}

/// Outcome of one scaled Picard run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallnessProbe {
    pub scale: f64,
    pub converged: bool,
    pub sweeps: usize,
    pub last_ratio: f64,
}

/// Bracket `[converged_below, diverged_above]` of the data scale at which
/// Picard iteration stops converging.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallnessBracket {
    pub converged_below: f64,
    pub diverged_above: f64,
    pub probes: Vec<SmallnessProbe>,
}

/// Picard run of `scale · data`; divergence and stalling both count as failure.
pub fn probe_scale(solver: &mut MildSolver, data: &InitialData, scale: f64) -> Result<SmallnessProbe> {
    solver.reset_data(&data.scaled(scale))?;
    let probe = |converged, r: &crate::mild::ContractionReport| SmallnessProbe {
        scale,
        converged,
        sweeps: r.sweeps,
        last_ratio: r.ratios.last().copied().unwrap_or(f64::NAN),
    };
    match solver.solve() {
        Ok((_, r)) => Ok(probe(true, &r)),
        Err(Error::PicardDiverged(r)) | Err(Error::PicardNotConverged(r)) => Ok(probe(false, &r)),
        Err(Error::NonFinite(_)) => Ok(SmallnessProbe {
            scale,
            converged: false,
            sweeps: 0,
            last_ratio: f64::INFINITY,
        }),
        Err(e) => Err(e),
    }
}

/// Bisects (geometrically) between a converging scale `lo` and a failing
/// scale `hi`.
pub fn smallness_bracket(
    grid: &HalfPlaneGrid,
    times: &TimeGrid,
    data: &InitialData,
    settings: PicardSettings,
    lo: f64,
    hi: f64,
    bisections: usize,
) -> Result<SmallnessBracket> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter("smallness bracket needs 0 < lo < hi"));
    }
    let mut solver = MildSolver::new(grid, times, data, settings)?;
    let mut probes = Vec::new();
    let a = probe_scale(&mut solver, data, lo)?;
    let b = probe_scale(&mut solver, data, hi)?;
    probes.push(a);
    probes.push(b);
    if !a.converged {
        return Err(Error::InvalidParameter("lower scale does not converge"));
    }
    if b.converged {
        return Err(Error::InvalidParameter("upper scale converges"));
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..bisections {
        let mid = libm::sqrt(lo * hi);
        let m = probe_scale(&mut solver, data, mid)?;
        probes.push(m);
        if m.converged {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SmallnessBracket {
        converged_below: lo,
        diverged_above: hi,
        probes,
    })
}
