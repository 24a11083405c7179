//! Scenario orchestration: measures, solvers, gates and artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use axibouss_core::diagnostics::{decay_fit_window, smallness_bracket, weighted_decay_series, DecayFit};
use axibouss_core::fields::{lp_norm_omega, lp_norm_r3};
use axibouss_core::measures::{Measure3DAxi, MeasureOmega};
use axibouss_core::mild::{
    weak_convergence_probe, ContractionReport, InitialData, MildSolver, NormRow, TimeGrid, Trajectory, Unknown,
    NORM_EXPONENTS,
};
use axibouss_core::semigroups::{s1_apply_sampled, s2_apply_sampled, AtomSampling};
use axibouss_core::stepper::{derived_fields, DtPolicy, ReferenceStepper, StepperMode, StepperRun, StepperState};
use axibouss_core::{Error, HalfPlaneGrid, ScalarField};

use crate::config::{Check, Mode, ScenarioConfig, SolverKind, StepperSpec};
use crate::csvio::{self, num};
use crate::measure_file::MeasureFile;
use crate::svg::{self, Series};
use crate::{LabError, EXIT_GATE, EXIT_PASS};

/// Node-max increase tolerated by the maximum-principle gate, relative to
/// the initial range.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-12;
/// Relative slack in the L^p nonincrease gate (round-off of the norm sums).
pub const LP_NONINCREASE_TOL: f64 = 1e-9;
/// Nodes skipped at the start of every decay fit.
pub const INITIAL_LAYER_NODES: usize = 2;
/// Largest accepted ratio of successive Picard increments after sweep 2.
pub const CONTRACTION_RATIO: f64 = 0.9;
/// Times at which pairing gaps are probed (nearest grid nodes are used).
pub const WEAK_PROBE_TIMES: [f64; 3] = [4e-3, 1e-3, 2.5e-4];

/// One pass/fail check with the inequality it stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub inequality: String,
    pub measured: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Gate {
    fn at_most(name: impl Into<String>, inequality: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            inequality: inequality.into(),
            measured,
            limit,
            passed: measured <= limit,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: measured {} (limit {}) [{}]",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            num(self.measured),
            num(self.limit),
            self.inequality
        )
    }
}

/// Everything a scenario produced.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOutcome {
    pub gates: Vec<Gate>,
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_GATE
        }
    }

    pub fn gate(&self, name: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.name == name)
    }
}

/// Loaded and validated inputs.
pub struct Prepared {
    pub cfg: ScenarioConfig,
    pub grid: HalfPlaneGrid,
    pub times: TimeGrid,
    pub data: InitialData,
}

fn load_measures(cfg: &ScenarioConfig, grid: &HalfPlaneGrid) -> Result<InitialData, LabError> {
    let file = |p: &Option<PathBuf>| -> Result<Option<MeasureFile>, LabError> {
        p.as_ref().map(|p| MeasureFile::load(&cfg.resolve(p))).transpose()
    };
    let omega0 = match file(&cfg.data.omega0)? {
        Some(m) => m.to_omega(grid)?,
        None => MeasureOmega::empty(),
    };
    let rho0 = match file(&cfg.data.rho0)? {
        Some(m) => m.to_axi(grid)?,
        None => Measure3DAxi::empty(),
    };
    if omega0.has_boundary_atoms() {
        return Err(LabError::Config(
            "omega0 has atoms on the axis; mollify them first".into(),
        ));
    }
    Ok(match cfg.mode {
        Mode::GeneralMu => {
            let mu = file(&cfg.data.mu)?.expect("validated").to_omega(grid)?;
            InitialData::general(omega0, mu, rho0)
        }
        _ => InitialData::boussinesq(omega0, rho0)?,
    })
}

/// Parses, validates and loads every input; writes nothing.
pub fn prepare(path: &Path) -> Result<Prepared, LabError> {
    let cfg = ScenarioConfig::load(path)?;
    let grid = cfg.grid.build()?;
    let times = match (cfg.solver, &cfg.stepper) {
        (SolverKind::Chained, Some(s)) => TimeGrid::new(s.t0, cfg.time.nodes, cfg.time.stretch)?,
        _ => cfg.time.build()?,
    };
    let data = load_measures(&cfg, &grid).map_err(|e| match e {
        LabError::Core(e) => LabError::Config(format!("{}: {e}", cfg.name)),
        e => e,
    })?;
    Ok(Prepared { cfg, grid, times, data })
}

/// Runs the scenario at `path`, writing artifacts into its output directory.
pub fn run_scenario(path: &Path) -> Result<ScenarioOutcome, LabError> {
    execute(&prepare(path)?)
}

/// Admissible test functions for the weak-convergence check (all vanish
/// like `r²` on the axis and decay at infinity).
pub fn weak_test_bank() -> Vec<fn(f64, f64) -> f64> {
    fn a(r: f64, z: f64) -> f64 {
        r * r * (-((r - 1.0) * (r - 1.0) + z * z)).exp()
    }
    fn b(r: f64, z: f64) -> f64 {
        r * r * (-((r - 1.2) * (r - 1.2) + (z - 0.3) * (z - 0.3)) / 0.5).exp()
    }
    fn c(r: f64, z: f64) -> f64 {
        r * r * r * (1.0 + z) * (-(r * r + z * z) / 2.0).exp()
    }
    vec![a, b, c]
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
}

fn unknowns_present(traj: &Trajectory) -> Vec<Unknown> {
    Unknown::ALL
        .into_iter()
        .filter(|u| traj.fields(*u).iter().any(|f| f.abs_max() > 0.0))
        .collect()
}

fn contraction_rows(r: &ContractionReport) -> Vec<Vec<String>> {
    r.increments
        .iter()
        .enumerate()
        .map(|(i, inc)| {
            let ratio = if i == 0 { f64::NAN } else { r.ratios[i - 1] };
            vec![(i + 1).to_string(), num(*inc), num(ratio)]
        })
        .collect()
}

fn contraction_gate(r: &ContractionReport, converged: bool) -> Gate {
    let worst = r.ratios.iter().skip(1).copied().fold(f64::NAN, f64::max);
    Gate {
        name: "contraction".into(),
        inequality: format!(
            "|u^(n+1) - u^n| <= q |u^n - u^(n-1)| with q < 1 (smallness of the atomic parts); A0T = {}, C = {}",
            num(r.a0t),
            num(r.bilinear_omega)
        ),
        measured: worst,
        limit: CONTRACTION_RATIO,
        passed: converged && r.satisfied && !(worst >= CONTRACTION_RATIO),
    }
}

fn decay_inequality(u: Unknown) -> &'static str {
    match u {
        Unknown::Omega => "t^(1-1/p) ||omega(t)||_Lp(Omega) <= K_p",
        Unknown::RhoTilde => "t^(1-1/p) ||rho~(t)||_Lp(Omega) <= K_p",
        Unknown::Rho => "t^((3/2)(1-1/p)) ||rho(t)||_Lp(R3) <= K_p",
    }
}

fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else if (p - 4.0 / 3.0).abs() < 1e-9 {
        "4/3".into()
    } else {
        format!("{p}")
    }
}

/// Fits over the last decade, skipping the initial layer.
pub fn final_decade(series: &[(f64, f64)]) -> Result<DecayFit, Error> {
    let kept = &series[INITIAL_LAYER_NODES.min(series.len())..];
    let hi = kept.iter().map(|s| s.0).fold(0.0, f64::max);
    // Start at the last node at or below hi/10 so the window spans a decade.
    let lo = kept
        .iter()
        .map(|s| s.0)
        .filter(|&t| t <= hi / 10.0)
        .fold(f64::NAN, f64::max);
    decay_fit_window(kept, if lo.is_nan() { hi / 10.0 } else { lo }, hi)
}

fn mild_diagnostics(
    p: &Prepared,
    solver: &mut MildSolver,
    art: &mut Artifacts,
    out: &mut ScenarioOutcome,
) -> Result<Option<Trajectory>, LabError> {
    let cfg = &p.cfg;
    let (traj, report, converged) = match solver.solve() {
        Ok((t, r)) => (Some(t), r, true),
        Err(Error::PicardDiverged(r)) | Err(Error::PicardNotConverged(r)) => (None, *r, false),
        Err(e) => return Err(e.into()),
    };
    csvio::write_table(
        &art.path("contraction.csv"),
        &["sweep", "increment", "ratio"],
        &contraction_rows(&report),
    )?;
    out.gates.push(contraction_gate(&report, converged));
    let Some(traj) = traj else {
        out.notes.push(format!(
            "Picard iteration stopped after {} sweeps without converging",
            report.sweeps
        ));
        return Ok(None);
    };
    csvio::write_norms(&art.path("norms.csv"), &traj.norm_rows())?;
    let last = traj.len() - 1;
    for u in unknowns_present(&traj) {
        csvio::write_field(&art.path(&format!("{}_final.csv", u.name())), traj.field(u, last))?;
    }

    if cfg.has(Check::Decay) {
        let mut rows = Vec::new();
        for u in unknowns_present(&traj) {
            let mut plot = Vec::new();
            for &pe in &cfg.diagnostics.exponents {
                let series = weighted_decay_series(&traj, u, pe)?;
                let sup = series.iter().map(|s| s.1).fold(0.0, f64::max);
                let name = format!("decay_{}_p{}", u.name(), p_label(pe));
                match final_decade(&series) {
                    Ok(fit) => {
                        rows.push(vec![
                            u.name().into(),
                            p_label(pe),
                            num(fit.slope),
                            num(fit.intercept),
                            num(fit.r_squared),
                            num(sup),
                            fit.times.len().to_string(),
                        ]);
                        let mut g = Gate::at_most(
                            name,
                            format!("{}; K_p measured {}", decay_inequality(u), num(sup)),
                            fit.slope,
                            cfg.diagnostics.trend_tolerance,
                        );
                        g.passed &= sup.is_finite();
                        out.gates.push(g);
                    }
                    Err(e) => out.gates.push(Gate {
                        name,
                        inequality: format!("{}; fit failed: {e}", decay_inequality(u)),
                        measured: f64::NAN,
                        limit: cfg.diagnostics.trend_tolerance,
                        passed: false,
                    }),
                }
                plot.push(Series {
                    label: format!("p = {}", p_label(pe)),
                    points: series,
                });
            }
            let text = svg::loglog(&format!("weighted decay of {}", u.name()), "t", "weighted norm", &plot);
            csvio::write_text(&art.path(&format!("decay_{}.svg", u.name())), &text)?;
        }
        csvio::write_table(
            &art.path("decay_fits.csv"),
            &["unknown", "p", "slope", "intercept", "r_squared", "sup", "points"],
            &rows,
        )?;
        out.notes.push(format!(
            "decay fits use the final decade of t and ignore the first {INITIAL_LAYER_NODES} time nodes"
        ));
    }

    if cfg.has(Check::Coupling) {
        let gap = coupling_gap(&traj);
        out.gates.push(Gate::at_most(
            "coupling",
            "rho~(t) = r rho(t): max_k ||rho~ - r rho||_L1 / ||rho~||_L1",
            gap,
            cfg.diagnostics.coupling_tolerance,
        ));
    }

    if cfg.has(Check::WeakConvergence) {
        let bank = weak_test_bank();
        let mut nodes: Vec<usize> = WEAK_PROBE_TIMES.iter().map(|&t| p.times.nearest(t)).collect();
        nodes.dedup();
        let rep = weak_convergence_probe(&traj, &p.data, &bank, &nodes)?;
        let mut rows = Vec::new();
        for g in &rep.gaps {
            rows.push(vec![
                g.test.to_string(),
                num(g.t),
                num(g.omega),
                num(g.rho_tilde),
                num(g.rho),
            ]);
        }
        csvio::write_table(
            &art.path("weak_convergence.csv"),
            &["test", "t", "omega", "rho_tilde", "rho"],
            &rows,
        )?;
        let worst = weak_convergence_worst(&rep, bank.len(), &unknowns_present(&traj));
        let mut g = Gate::at_most(
            "weak_convergence",
            "|<u(t), psi> - <u0, psi>| decreases as t -> 0 (largest ratio of consecutive gaps)",
            worst,
            1.0,
        );
        g.passed = worst < 1.0 && rep.warnings.is_empty();
        for w in &rep.warnings {
            out.notes.push(format!(
                "test function {} is not admissible: {} = {}",
                w.test,
                w.quantity,
                num(w.value)
            ));
        }
        out.gates.push(g);
    }

    if cfg.has(Check::Smallness) {
        let s = cfg.diagnostics.smallness.as_ref().expect("validated");
        let br = smallness_bracket(
            &p.grid,
            &p.times,
            &p.data,
            cfg.picard.settings(),
            s.lo,
            s.hi,
            s.bisections,
        )?;
        let rows: Vec<Vec<String>> = br
            .probes
            .iter()
            .map(|q| {
                vec![
                    num(q.scale),
                    q.converged.to_string(),
                    q.sweeps.to_string(),
                    num(q.last_ratio),
                ]
            })
            .collect();
        csvio::write_table(
            &art.path("smallness.csv"),
            &["scale", "converged", "sweeps", "last_ratio"],
            &rows,
        )?;
        out.notes.push(format!(
            "Picard converges at scale {} and fails at {}",
            num(br.converged_below),
            num(br.diverged_above)
        ));
    }
    Ok(Some(traj))
}

/// `max_k ||ρ~ - r ρ||_{L1(Ω)} / ||ρ~||_{L1(Ω)}` over nodes with `ρ~ ≠ 0`.
pub fn coupling_gap(traj: &Trajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..traj.len() {
        let rt = &traj.rho_tilde[k];
        let n = lp_norm_omega(rt, 1.0).unwrap_or(f64::NAN);
        if n > 0.0 {
            let d = rt.sub(&traj.rho[k].times_r_pow(1.0)).expect("same grid");
            worst = worst.max(lp_norm_omega(&d, 1.0).unwrap_or(f64::NAN) / n);
        }
    }
    worst
}

/// Largest `gap(t_{k}) / gap(t_{k+1})` over the probed nodes (smaller time
/// over larger time); identically zero gaps count as decreasing.
pub fn weak_convergence_worst(
    rep: &axibouss_core::mild::WeakConvergenceReport,
    tests: usize,
    unknowns: &[Unknown],
) -> f64 {
    let mut worst: f64 = 0.0;
    for test in 0..tests {
        for &u in unknowns {
            let mut s = rep.series(test, u);
            s.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in s.windows(2) {
                let (small, large) = (w[0].1, w[1].1);
                if large == 0.0 && small == 0.0 {
                    continue;
                }
                worst = worst.max(if large > 0.0 { small / large } else { f64::INFINITY });
            }
        }
    }
    worst
}

fn stepper_mode(mode: Mode) -> StepperMode {
    match mode {
        Mode::Nse => StepperMode::NavierStokes,
        _ => StepperMode::Boussinesq,
    }
}

fn stepper_norm_row(s: &StepperState) -> NormRow {
    let rt = s.rho_tilde();
    let om = |f: &ScalarField| NORM_EXPONENTS.map(|p| lp_norm_omega(f, p).unwrap_or(f64::NAN));
    NormRow {
        t: s.time,
        omega: om(&s.omega),
        rho_tilde: om(&rt),
        rho: NORM_EXPONENTS.map(|p| lp_norm_r3(&s.rho, p).unwrap_or(f64::NAN)),
    }
}

fn run_stepper(
    p: &Prepared,
    spec: &StepperSpec,
    omega: ScalarField,
    rho: ScalarField,
    art: &mut Artifacts,
    out: &mut ScenarioOutcome,
) -> Result<(), LabError> {
    let cfg = &p.cfg;
    let mut st = ReferenceStepper::new(&p.grid, stepper_mode(cfg.mode))?;
    let init = st.initial_state(spec.t0, omega, rho)?;
    let t_end = cfg.time.horizon;
    let outputs: Vec<f64> = (1..=spec.outputs)
        .map(|i| spec.t0 + (t_end - spec.t0) * i as f64 / spec.outputs as f64)
        .collect();
    let policy = DtPolicy::Cfl {
        target: spec.cfl,
        max_dt: spec.max_dt,
    };
    let run = st.run(init, t_end, policy, &outputs)?;
    let rows: Vec<Vec<String>> = run
        .records
        .iter()
        .map(|r| {
            [
                r.time,
                r.dt,
                r.cfl,
                r.pi_max,
                r.pi_min,
                r.gamma_max,
                r.gamma_min,
                r.boundary_ratio,
            ]
            .iter()
            .map(|v| num(*v))
            .collect()
        })
        .collect();
    csvio::write_table(
        &art.path("stepper_records.csv"),
        &[
            "t",
            "dt",
            "cfl",
            "pi_max",
            "pi_min",
            "gamma_max",
            "gamma_min",
            "boundary_ratio",
        ],
        &rows,
    )?;
    let norms: Vec<NormRow> = run.snapshots.iter().map(stepper_norm_row).collect();
    csvio::write_norms(&art.path("stepper_norms.csv"), &norms)?;
    let last = run.snapshots.last().expect("run has the initial state");
    csvio::write_field(&art.path("stepper_omega_final.csv"), &last.omega)?;
    if cfg.mode != Mode::Nse {
        csvio::write_field(&art.path("stepper_rho_final.csv"), &last.rho)?;
    }
    let worst_edge = run.records.iter().map(|r| r.boundary_ratio).fold(0.0, f64::max);
    let mut edge = Gate::at_most(
        "boundary",
        "outer-edge |omega|, |rho| <= 1e-6 interior max (box large enough)",
        worst_edge,
        axibouss_core::stepper::BOUNDARY_FLAG_RATIO,
    );
    edge.passed = !run.boundary_contaminated;
    out.gates.push(edge);
    if cfg.has(Check::MaximumPrinciple) {
        maximum_principle_gates(cfg.mode, &run, out);
    }
    Ok(())
}

fn maximum_principle_gates(mode: Mode, run: &StepperRun, out: &mut ScenarioOutcome) {
    let gamma = mode != Mode::Nse;
    let (name, ineq) = if gamma {
        (
            "max_principle_gamma",
            "max Gamma(t_(n+1)) <= max Gamma(t_n), Gamma = omega/r - rho/2",
        )
    } else {
        ("max_principle_pi", "max Pi(t_(n+1)) <= max Pi(t_n), Pi = omega/r")
    };
    out.gates.push(Gate::at_most(
        name,
        ineq,
        run.max_principle_violation(gamma),
        MAX_PRINCIPLE_TOL,
    ));
    if !gamma {
        let pi0 = derived_fields(&run.snapshots[0]).pi;
        let mut worst: f64 = 0.0;
        for s in &run.snapshots[1..] {
            let pi = derived_fields(s).pi;
            for q in [1.0, 2.0, f64::INFINITY] {
                let (a, b) = (
                    lp_norm_r3(&pi, q).unwrap_or(f64::NAN),
                    lp_norm_r3(&pi0, q).unwrap_or(f64::NAN),
                );
                if b > 0.0 {
                    worst = worst.max(a / b - 1.0);
                }
            }
        }
        out.gates.push(Gate::at_most(
            "lp_nonincrease_pi",
            "||Pi(t)||_Lp(R3) <= ||Pi(0)||_Lp(R3), p = 1, 2, inf (relative excess)",
            worst,
            LP_NONINCREASE_TOL,
        ));
    }
}

fn report_text(p: &Prepared, out: &ScenarioOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {}", p.cfg.name);
    let _ = writeln!(
        s,
        "grid {}x{} on (0, {}] x [{}, {}]; {} time nodes up to {}",
        p.grid.nr(),
        p.grid.nz(),
        p.grid.r_max(),
        p.grid.z_min(),
        p.grid.z_max(),
        p.times.len(),
        p.times.horizon()
    );
    for g in &out.gates {
        let _ = writeln!(s, "{}", g.line());
    }
    for n in &out.notes {
        let _ = writeln!(s, "note: {n}");
    }
    let _ = writeln!(s, "result: {}", if out.passed() { "PASS" } else { "FAIL" });
    s
}

/// Runs prepared inputs and writes artifacts.
pub fn execute(p: &Prepared) -> Result<ScenarioOutcome, LabError> {
    let dir = p.cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let mut art = Artifacts { dir, files: Vec::new() };
    let mut out = ScenarioOutcome::default();
    let cfg = &p.cfg;
    match cfg.solver {
        SolverKind::Mild | SolverKind::Chained => {
            let mut solver = MildSolver::new(&p.grid, &p.times, &p.data, cfg.picard.settings())?;
            let traj = mild_diagnostics(p, &mut solver, &mut art, &mut out)?;
            if cfg.solver == SolverKind::Chained {
                if let Some(traj) = traj {
                    let spec = cfg.stepper.as_ref().expect("validated");
                    let k = traj.len() - 1;
                    out.notes.push(format!(
                        "stepper restarts from the mild solution at t = {}",
                        num(traj.times.nodes()[k])
                    ));
                    run_stepper(p, spec, traj.omega[k].clone(), traj.rho[k].clone(), &mut art, &mut out)?;
                }
            }
        }
        SolverKind::Stepper => {
            let spec = cfg.stepper.as_ref().expect("validated");
            let omega = s1_apply_sampled(spec.t0, &p.data.omega0, &p.grid, AtomSampling::CellAverage)?;
            let rho = s2_apply_sampled(spec.t0, &p.data.rho0, &p.grid, AtomSampling::CellAverage)?;
            out.notes.push(format!(
                "stepper starts from the linear smoothing of the data at t0 = {}",
                num(spec.t0)
            ));
            run_stepper(p, spec, omega, rho, &mut art, &mut out)?;
        }
    }
    let gates: Vec<Vec<String>> = out
        .gates
        .iter()
        .map(|g| {
            vec![
                g.name.clone(),
                g.inequality.clone(),
                num(g.measured),
                num(g.limit),
                g.passed.to_string(),
            ]
        })
        .collect();
    csvio::write_table(
        &art.path("gates.csv"),
        &["gate", "inequality", "measured", "limit", "passed"],
        &gates,
    )?;
    csvio::write_text(&art.path("report.txt"), &report_text(p, &out))?;
    out.files = art.files;
    Ok(out)
}
