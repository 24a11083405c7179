//! Finite-difference reference solver for the vorticity-density system.
//!
//! Unknowns are `ω` and `ρ` on the cell-centred grid. Each step:
//!
//! 1. explicit first-order upwind transport of `Π = ω/r` and `ρ` (stretching
//!    is carried by transporting `Π` rather than `ω`);
//! 2. implicit Euler diffusion: `ρ` with `L0 = (1/r) d_r(r d_r) + d_z²`,
//!    `ω` with `L1 = L0 - 1/r²`, both in flux form;
//! 3. buoyancy `-d_r ρ` enters the `Π` equation implicitly as `-S ρ`, where
//!    `S = (r⁻¹ L1 r - L0)/2` is the discrete `(1/r) d_r`;
//! 4. velocity refresh from the new `ω`.
//!
//! With this choice `Γ = Π - ρ/2` obeys exactly the same monotone scheme as
//! `Π` does without buoyancy, so both discrete maximum principles hold.

use alloc::vec;
use alloc::vec::Vec;

use crate::biot_savart::StreamSolver;
use crate::fields::VectorField;
use crate::linalg::{SeparableOperator, Tridiag};
use crate::{Error, HalfPlaneGrid, Result, ScalarField};

/// Advection CFL bound `dt (|v^r|/dr + |v^z|/dz) <= CFL_LIMIT`.
pub const CFL_LIMIT: f64 = 0.9;

/// Boundary values above this fraction of the interior max flag a run.
pub const BOUNDARY_FLAG_RATIO: f64 = 1e-6;

const SOLVE_TOL: f64 = 1e-13;
const STREAM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepperMode {
    /// Full coupled system.
    Boussinesq,
    /// `ρ ≡ 0`.
    NavierStokes,
    /// `v ≡ 0`, no buoyancy: `ω` and `ρ` just diffuse.
    PureDiffusion,
}

/// Snapshot of the reference solver.
#[derive(Debug, Clone, PartialEq)]
pub struct StepperState {
    pub time: f64,
    pub omega: ScalarField,
    pub rho: ScalarField,
    pub velocity: VectorField,
    /// Step that produced this state (0 for an initial state).
    pub dt: f64,
    /// CFL number of that step.
    pub cfl: f64,
    pub mode: StepperMode,
}

impl StepperState {
    /// `ρ~ = r ρ`.
    pub fn rho_tilde(&self) -> ScalarField {
        self.rho.times_r_pow(1.0)
    }
}

/// `Π = ω/r`, `Γ = Π - ρ/2`, `Γ~ = ω - ρ~/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    pub pi: ScalarField,
    pub gamma: ScalarField,
    pub gamma_tilde: ScalarField,
}

pub fn derived_fields(s: &StepperState) -> DerivedFields {
    let pi = s.omega.times_r_pow(-1.0);
    let gamma = pi.combine(1.0, &s.rho, -0.5).expect("same grid");
    let gamma_tilde = s.omega.combine(1.0, &s.rho_tilde(), -0.5).expect("same grid");
    DerivedFields { pi, gamma, gamma_tilde }
}

/// Time-step selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    /// Constant step; a CFL violation is an error.
    Fixed(f64),
    /// Largest step with CFL number `target`, capped at `max_dt`.
    Cfl { target: f64, max_dt: f64 },
}

/// Per-step monitor values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    pub cfl: f64,
    pub pi_max: f64,
    pub pi_min: f64,
    pub gamma_max: f64,
    pub gamma_min: f64,
    /// Largest outer-edge `|ω|`, `|ρ|` relative to the field's max.
    pub boundary_ratio: f64,
}

/// Output of [`ReferenceStepper::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepperRun {
    /// States at the requested output times (the initial state first).
    pub snapshots: Vec<StepperState>,
    /// One record per state visited, initial state included.
    pub records: Vec<StepRecord>,
    /// Set when outer-edge values exceeded [`BOUNDARY_FLAG_RATIO`].
    pub boundary_contaminated: bool,
}

impl StepperRun {
    /// Worst violation of `max_{n+1} <= max(max_n, 0)` and the mirror
    /// statement for the min, relative to the initial range, for `Π`
    /// (`use_gamma = false`) or `Γ`.
    pub fn max_principle_violation(&self, use_gamma: bool) -> f64 {
        let pick = |r: &StepRecord| {
            if use_gamma {
                (r.gamma_max, r.gamma_min)
            } else {
                (r.pi_max, r.pi_min)
            }
        };
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        let (m0, n0) = pick(first);
        let range = (m0 - n0).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for w in self.records.windows(2) {
            let (pmax, pmin) = pick(&w[0]);
            let (nmax, nmin) = pick(&w[1]);
            worst = worst.max((nmax - pmax.max(0.0)) / range);
            worst = worst.max((pmin.min(0.0) - nmin) / range);
        }
        worst
    }
}

struct Implicit {
    dt: f64,
    rho: SeparableOperator,
    omega: SeparableOperator,
}

/// IMEX stepper bound to one grid and mode.
pub struct ReferenceStepper {
    grid: HalfPlaneGrid,
    mode: StepperMode,
    stream: StreamSolver,
    l0: Tridiag,
    buoyancy: Tridiag,
    cached: Option<Implicit>,
}

impl ReferenceStepper {
    pub fn new(grid: &HalfPlaneGrid, mode: StepperMode) -> Result<Self> {
        let (nr, dr) = (grid.nr(), grid.dr());
        let mut l0 = Tridiag::zeros(nr);
        for i in 0..nr {
            let r = grid.r(i);
            let outer = (i as f64 + 1.0) * dr;
            let inner = i as f64 * dr;
            let k = 1.0 / (r * dr * dr);
            if i + 1 < nr {
                l0.upper[i] = k * outer;
                l0.diag[i] -= k * outer;
            } else {
                l0.diag[i] -= 2.0 * k * outer;
            }
            if i > 0 {
                l0.lower[i] = k * inner;
                l0.diag[i] -= k * inner;
            }
        }
        // S = (r⁻¹ L1 r - L0)/2 with L1 = L0 - 1/r².
        let mut buoyancy = Tridiag::zeros(nr);
        for i in 0..nr {
            let r = grid.r(i);
            buoyancy.diag[i] = -0.5 / (r * r);
            if i > 0 {
                buoyancy.lower[i] = 0.5 * l0.lower[i] * (grid.r(i - 1) / r - 1.0);
            }
            if i + 1 < nr {
                buoyancy.upper[i] = 0.5 * l0.upper[i] * (grid.r(i + 1) / r - 1.0);
            }
        }
        Ok(Self {
            grid: *grid,
            mode,
            stream: StreamSolver::new(grid)?,
            l0,
            buoyancy,
            cached: None,
        })
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        &self.grid
    }

    pub fn mode(&self) -> StepperMode {
        self.mode
    }

    fn velocity(&self, omega: &ScalarField) -> Result<VectorField> {
        match self.mode {
            StepperMode::PureDiffusion => Ok(VectorField::zeros(self.grid)),
            _ => self.stream.velocity(omega, STREAM_TOL),
        }
    }

    /// Initial state at time `t0`; `ρ` is ignored in Navier-Stokes mode.
    pub fn initial_state(&self, t0: f64, omega: ScalarField, rho: ScalarField) -> Result<StepperState> {
        if omega.grid() != &self.grid || rho.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        omega.check_finite("initial vorticity")?;
        rho.check_finite("initial density")?;
        let rho = match self.mode {
            StepperMode::NavierStokes => ScalarField::zeros(self.grid),
            _ => rho,
        };
        let velocity = self.velocity(&omega)?;
        Ok(StepperState {
            time: t0,
            omega,
            rho,
            velocity,
            dt: 0.0,
            cfl: 0.0,
            mode: self.mode,
        })
    }

    /// `dt (|v^r|/dr + |v^z|/dz)` maximised over nodes, per unit `dt`.
    pub fn cfl_rate(&self, v: &VectorField) -> f64 {
        let (dr, dz) = (self.grid.dr(), self.grid.dz());
        v.vr.values()
            .iter()
            .zip(v.vz.values())
            .map(|(a, b)| libm::fabs(*a) / dr + libm::fabs(*b) / dz)
            .fold(0.0, f64::max)
    }

    fn implicit(&mut self, dt: f64) -> Result<&Implicit> {
        if self.cached.as_ref().is_none_or(|c| c.dt != dt) {
            let nr = self.grid.nr();
            let rho_t = self.l0.affine(-dt, 1.0);
            let mut om_t = rho_t.clone();
            for i in 0..nr {
                let r = self.grid.r(i);
                om_t.diag[i] += dt / (r * r);
            }
            self.cached = Some(Implicit {
                dt,
                rho: SeparableOperator::new(&self.grid, rho_t, vec![-dt; nr])?,
                omega: SeparableOperator::new(&self.grid, om_t, vec![-dt; nr])?,
            });
        }
        Ok(self.cached.as_ref().expect("just built"))
    }

    /// Advances `s` by `dt`.
    pub fn step(&mut self, s: &StepperState, dt: f64) -> Result<StepperState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter("time step must be positive"));
        }
        let g = self.grid;
        let cfl = dt * self.cfl_rate(&s.velocity);
        if cfl > CFL_LIMIT {
            return Err(Error::Cfl {
                number: cfl,
                limit: CFL_LIMIT,
            });
        }
        let transport = self.mode != StepperMode::PureDiffusion;
        let with_rho = self.mode != StepperMode::NavierStokes;

        let pi = s.omega.times_r_pow(-1.0);
        let pi_star = if transport { upwind(&pi, &s.velocity, dt) } else { pi };
        let rho_star = match (with_rho, transport) {
            (false, _) => vec![0.0; g.len()],
            (true, true) => upwind(&s.rho, &s.velocity, dt).into_values(),
            (true, false) => s.rho.values().to_vec(),
        };
        let buoyant = self.mode == StepperMode::Boussinesq;
        let buoyancy = self.buoyancy.clone();
        let ops = self.implicit(dt)?;
        let rho_new = if with_rho {
            ops.rho.solve(&rho_star, SOLVE_TOL)?.0
        } else {
            rho_star
        };

        let nr = g.nr();
        let mut rhs = pi_star.times_r_pow(1.0).into_values();
        if buoyant {
            let mut srho = vec![0.0; nr];
            for l in 0..g.nz() {
                buoyancy.apply(&rho_new[l * nr..(l + 1) * nr], &mut srho);
                for i in 0..nr {
                    rhs[l * nr + i] -= dt * g.r(i) * srho[i];
                }
            }
        }
        let omega_new = ops.omega.solve(&rhs, SOLVE_TOL)?.0;
        let omega = ScalarField::from_raw(g, omega_new);
        let rho = ScalarField::from_raw(g, rho_new);
        omega.check_finite("stepper vorticity")?;
        rho.check_finite("stepper density")?;
        let velocity = self.velocity(&omega)?;
        Ok(StepperState {
            time: s.time + dt,
            omega,
            rho,
            velocity,
            dt,
            cfl,
            mode: self.mode,
        })
    }

    /// Steps from `initial` to `t_end`, landing exactly on each output time
    /// (times outside `(initial.time, t_end]` are ignored; `t_end` is always
    /// an output).
    pub fn run(&mut self, initial: StepperState, t_end: f64, policy: DtPolicy, outputs: &[f64]) -> Result<StepperRun> {
        let mut targets: Vec<f64> = outputs
            .iter()
            .copied()
            .filter(|&t| t > initial.time && t < t_end)
            .collect();
        targets.push(t_end);
        targets.sort_by(f64::total_cmp);
        targets.dedup();

        let mut records = vec![record(&initial)];
        let mut contaminated = records[0].boundary_ratio > BOUNDARY_FLAG_RATIO;
        let mut snapshots = vec![initial.clone()];
        let mut state = initial;
        for &target in &targets {
            while state.time < target - 1e-12 * target.max(1.0) {
                let base = match policy {
                    DtPolicy::Fixed(dt) => dt,
                    DtPolicy::Cfl { target: c, max_dt } => {
                        let rate = self.cfl_rate(&state.velocity);
                        if rate > 0.0 {
                            (c.min(CFL_LIMIT) / rate).min(max_dt)
                        } else {
                            max_dt
                        }
                    }
                };
                let remaining = target - state.time;
                // Avoid a sliver step at the end of an interval.
                let dt = if remaining <= base * (1.0 + 1e-9) {
                    remaining
                } else {
                    base
                };
                state = self.step(&state, dt)?;
                let rec = record(&state);
                contaminated |= rec.boundary_ratio > BOUNDARY_FLAG_RATIO;
                records.push(rec);
            }
            snapshots.push(state.clone());
        }
        Ok(StepperRun {
            snapshots,
            records,
            boundary_contaminated: contaminated,
        })
    }
}

fn record(s: &StepperState) -> StepRecord {
    let d = derived_fields(s);
    StepRecord {
        time: s.time,
        dt: s.dt,
        cfl: s.cfl,
        pi_max: d.pi.max(),
        pi_min: d.pi.min(),
        gamma_max: d.gamma.max(),
        gamma_min: d.gamma.min(),
        boundary_ratio: edge_ratio(&s.omega).max(edge_ratio(&s.rho)),
    }
}

fn edge_ratio(f: &ScalarField) -> f64 {
    let g = f.grid();
    let m = f.abs_max();
    if m == 0.0 {
        return 0.0;
    }
    let mut e: f64 = 0.0;
    for l in 0..g.nz() {
        e = e.max(libm::fabs(f.at(g.nr() - 1, l)));
    }
    for j in 0..g.nr() {
        e = e.max(libm::fabs(f.at(j, 0))).max(libm::fabs(f.at(j, g.nz() - 1)));
    }
    e / m
}

/// First-order upwind `u - dt v·∇u`; even reflection at the axis, zero
/// inflow from the outer edges.
fn upwind(u: &ScalarField, v: &VectorField, dt: f64) -> ScalarField {
    let g = *u.grid();
    let (nr, nz, dr, dz) = (g.nr(), g.nz(), g.dr(), g.dz());
    let mut out = vec![0.0; g.len()];
    for l in 0..nz {
        for j in 0..nr {
            let k = g.index(j, l);
            let c = u.at(j, l);
            let (a, b) = (v.vr.values()[k], v.vz.values()[k]);
            let dudr = if a > 0.0 {
                let left = if j > 0 { u.at(j - 1, l) } else { c };
                (c - left) / dr
            } else {
                let right = if j + 1 < nr { u.at(j + 1, l) } else { 0.0 };
                (right - c) / dr
            };
            let dudz = if b > 0.0 {
                let below = if l > 0 { u.at(j, l - 1) } else { 0.0 };
                (c - below) / dz
            } else {
                let above = if l + 1 < nz { u.at(j, l + 1) } else { 0.0 };
                (above - c) / dz
            };
            out[k] = c - dt * (a * dudr + b * dudz);
        }
    }
    ScalarField::from_raw(g, out)
}
