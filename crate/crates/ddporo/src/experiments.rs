//! Experiment drivers: single runs with artifacts, the consolidation error
//! study against the series solution and the model-based twin, the
//! relaxation traction monitor, and nearest-neighbour timing studies.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ddporo_core::analytic::{err_space, err_space_time, poisson_manufactured, TerzaghiParams};
use ddporo_core::fem::Field;
use ddporo_core::nns::SearchBackend;
use ddporo_core::phase::{FluidPoint, SolidPoint};
use ddporo_core::problems::{Benchmark, RelaxationConfig, TerzaghiConfig};
use ddporo_core::solver::{
    BalanceResiduals, Clock, DataSources, Diagnostics, FluidData, FormulationKind, IterationLog, Solver, SolverConfig,
    StepReport, StepStatus,
};
use log::{info, warn};
use serde::Serialize;

use crate::config::{ProblemConfig, ProblemKind, Setup};
use crate::formats;

/// Wall clock backed by [`Instant`].
#[derive(Debug, Clone, Copy)]
pub struct StdClock {
    origin: Instant,
}

impl StdClock {
    /// Clock reading zero now.
    pub fn new() -> Self {
        StdClock { origin: Instant::now() }
    }
}

impl Default for StdClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for StdClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

// ---------------------------------------------------------------------------
// Building solvers
// ---------------------------------------------------------------------------

/// Set-up with external inputs (permeability table) applied.
pub fn effective_setup(cfg: &ProblemConfig) -> Result<Setup> {
    let mut setup = cfg.setup.clone();
    if let (Setup::BereaLike(b), Some(path)) = (&mut setup, &cfg.datasets.permeability_table) {
        b.permeability_table = formats::read_permeability_table(path)?;
    }
    Ok(setup)
}

/// Datasets of a run: generated from the set-up, or read from the files
/// named in the configuration.
pub fn data_sources(cfg: &ProblemConfig, setup: &Setup) -> Result<DataSources> {
    let bench = setup.benchmark();
    let mut data = bench.data(cfg.formulation, cfg.backend)?;
    if cfg.datasets.solid.is_none() && cfg.datasets.fluid.is_none() {
        return Ok(data);
    }
    let problem = bench.problem(cfg.formulation)?;
    let metric = problem.metric.as_ref().context("data files need a data-driven formulation")?;
    if let Some(path) = &cfg.datasets.solid {
        if data.solid.is_none() {
            bail!("the {} formulation uses no solid data", cfg.formulation.as_str());
        }
        data.solid = Some(formats::load_dataset::<SolidPoint>(path, metric, cfg.backend)?.into());
    }
    if let Some(path) = &cfg.datasets.fluid {
        if !matches!(data.fluid, Some(FluidData::Single(_))) {
            bail!("the {} / {} run takes no single fluid dataset", setup.kind(), cfg.formulation.as_str());
        }
        data.fluid = Some(FluidData::Single(formats::load_dataset::<FluidPoint>(path, metric, cfg.backend)?.into()));
    }
    Ok(data)
}

/// A solver ready to run and the time spent building its datasets.
#[derive(Debug)]
pub struct Prepared {
    /// The solver.
    pub solver: Solver,
    /// Dataset generation and index construction (s).
    pub build_time: f64,
}

/// Builds the solver of a configuration.
pub fn prepare(cfg: &ProblemConfig) -> Result<Prepared> {
    let setup = effective_setup(cfg)?;
    let t0 = Instant::now();
    let data = data_sources(cfg, &setup)?;
    let build_time = t0.elapsed().as_secs_f64();
    let problem = setup.benchmark().problem(cfg.formulation)?;
    let solver = Solver::new(problem, data, cfg.solver_config())?.with_clock(Box::new(StdClock::new()));
    Ok(Prepared { solver, build_time })
}

/// Advances `solver` through every step, reporting failures with the step
/// index.
pub fn run_steps(
    solver: &mut Solver,
    mut on_step: impl FnMut(&Solver, &StepReport) -> Result<()>,
) -> Result<Vec<StepReport>> {
    let n = solver.problem().num_steps;
    let mut reports = Vec::with_capacity(n);
    for k in 1..=n {
        let r = solver.step().with_context(|| format!("time step {k} of {n} failed"))?;
        if r.status == StepStatus::Oscillating {
            let last = r.iterations.last().map_or(0, |l| l.change_count);
            warn!("step {k}: iteration cap reached with {last} oscillating points");
        }
        on_step(solver, &r)?;
        reports.push(r);
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// Consolidation column
// ---------------------------------------------------------------------------

/// Monitored fields of the consolidation column.
pub const TERZAGHI_FIELDS: [&str; 6] = ["p", "dp_dy", "q_y", "u_y", "eps_yy", "sig_yy"];

/// Values of the six monitored fields at every integration point.
pub type FieldSet = [Vec<f64>; 6];

/// Monitored fields of a solver state: interpolated `p` and `u_y`, and the
/// physical integration-point states for the rest.
pub fn terzaghi_fields(s: &Solver) -> FieldSet {
    let st = s.states();
    [
        s.field_at_points(Field::Pressure, 0).expect("poroelastic layout"),
        st.iter().map(|q| q.fluid.grad_p.as_slice()[1]).collect(),
        st.iter().map(|q| q.fluid.flux.as_slice()[1]).collect(),
        s.field_at_points(Field::Displacement, 1).expect("poroelastic layout"),
        st.iter().map(|q| q.solid.strain.get(1, 1)).collect(),
        st.iter().map(|q| q.solid.stress.get(1, 1)).collect(),
    ]
}

/// Series solution of the monitored fields at the integration points and
/// the current time of `s`.
pub fn terzaghi_exact(s: &Solver, a: &TerzaghiParams) -> FieldSet {
    let t = s.global().t;
    let ys: Vec<f64> = s.states().iter().map(|q| q.x[1]).collect();
    let f = |g: &dyn Fn(f64) -> f64| ys.iter().map(|&y| g(y)).collect::<Vec<f64>>();
    [
        f(&|y| a.pressure(y, t)),
        f(&|y| a.pressure_gradient(y, t)),
        f(&|y| a.flux(y, t)),
        f(&|y| a.displacement(y, t)),
        f(&|y| a.strain(y, t)),
        f(&|y| a.effective_stress(y, t)),
    ]
}

fn field_errors(dd: &FieldSet, reference: &FieldSet, weights: &[f64]) -> Result<[f64; 6]> {
    let mut out = [0.0; 6];
    for k in 0..6 {
        out[k] = err_space(&dd[k], &reference[k], weights)?.value;
    }
    Ok(out)
}

/// Per-step errors of the monitored fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TerzaghiTracker {
    params: Option<TerzaghiParams>,
    reference: Option<Vec<FieldSet>>,
    /// `(t, Err_t per field)` against the series solution.
    pub exact: Vec<(f64, [f64; 6])>,
    /// `(t, Err_t per field)` against the model-based run (when given).
    pub fem: Vec<(f64, [f64; 6])>,
}

impl TerzaghiTracker {
    /// Tracker comparing with the series solution and, optionally, with
    /// per-step reference fields.
    pub fn new(params: TerzaghiParams, reference: Option<Vec<FieldSet>>) -> Self {
        TerzaghiTracker { params: Some(params), reference, exact: Vec::new(), fem: Vec::new() }
    }

    /// Records the errors of the current step.
    pub fn record(&mut self, s: &Solver) -> Result<()> {
        let fields = terzaghi_fields(s);
        let w = s.weights();
        let t = s.global().t;
        if let Some(a) = &self.params {
            self.exact.push((t, field_errors(&fields, &terzaghi_exact(s, a), &w)?));
        }
        if let Some(r) = &self.reference {
            let k = s.global().step - 1;
            let reference = r.get(k).context("reference run has fewer steps")?;
            self.fem.push((t, field_errors(&fields, reference, &w)?));
        }
        Ok(())
    }

    fn total(rows: &[(f64, [f64; 6])], dt: f64, t_end: f64) -> Result<[f64; 6]> {
        let mut out = [0.0; 6];
        for (k, v) in out.iter_mut().enumerate() {
            let per_step: Vec<f64> = rows.iter().map(|r| r.1[k]).collect();
            *v = err_space_time(&per_step, dt, t_end)?;
        }
        Ok(out)
    }

    /// Space-time errors against the series solution.
    pub fn total_exact(&self, dt: f64, t_end: f64) -> Result<[f64; 6]> {
        Self::total(&self.exact, dt, t_end)
    }

    /// Space-time errors against the reference run.
    pub fn total_fem(&self, dt: f64, t_end: f64) -> Result<Option<[f64; 6]>> {
        if self.reference.is_none() {
            return Ok(None);
        }
        Self::total(&self.fem, dt, t_end).map(Some)
    }
}

/// Monitored fields of the model-based run after every step.
pub fn terzaghi_reference(cfg: &TerzaghiConfig) -> Result<Vec<FieldSet>> {
    let kind = FormulationKind::ModelBased;
    let mut s = Solver::new(cfg.problem(kind)?, DataSources::default(), SolverConfig::default())?;
    let mut out = Vec::new();
    run_steps(&mut s, |s, _| {
        out.push(terzaghi_fields(s));
        Ok(())
    })?;
    Ok(out)
}

/// Outcome of one consolidation run.
#[derive(Debug, Clone)]
pub struct TerzaghiRun {
    /// Formulation.
    pub formulation: FormulationKind,
    /// Samples per active data axis.
    pub points: usize,
    /// Space-time errors against the series solution.
    pub exact: [f64; 6],
    /// Space-time errors against the model-based run.
    pub fem: Option<[f64; 6]>,
    /// Per-step reports.
    pub reports: Vec<StepReport>,
    /// Self-checks.
    pub diagnostics: Diagnostics,
    /// Balance residuals of the final state.
    pub balance: BalanceResiduals,
    /// Wall time (s).
    pub wall_time: f64,
}

/// Runs the column with `points` samples per active axis.
pub fn terzaghi_run(
    base: &TerzaghiConfig,
    kind: FormulationKind,
    points: usize,
    backend: SearchBackend,
    reference: Option<&[FieldSet]>,
    config: SolverConfig,
) -> Result<TerzaghiRun> {
    let t0 = Instant::now();
    let cfg = base.clone().with_points(points);
    let data = cfg.data(kind, backend)?;
    let config = SolverConfig { init: cfg.init(kind), ..config };
    let mut s = Solver::new(cfg.problem(kind)?, data, config)?;
    let mut tracker = TerzaghiTracker::new(cfg.analytic(), reference.map(|r| r.to_vec()));
    let reports = run_steps(&mut s, |s, _| tracker.record(s))?;
    let t_end = s.problem().t_end();
    Ok(TerzaghiRun {
        formulation: kind,
        points,
        exact: tracker.total_exact(cfg.dt, t_end)?,
        fem: tracker.total_fem(cfg.dt, t_end)?,
        reports,
        diagnostics: *s.diagnostics(),
        balance: s.balance_residuals()?,
        wall_time: t0.elapsed().as_secs_f64(),
    })
}

/// Error table of a data-refinement study.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    /// Space-time errors of the model-based run against the series.
    pub model_based: [f64; 6],
    /// One row per formulation and dataset size (formulation-major,
    /// sizes in the given order).
    pub rows: Vec<TerzaghiRun>,
}

impl ConvergenceStudy {
    /// Table header.
    pub fn header() -> Vec<String> {
        let mut h = vec!["formulation".to_string(), "points".to_string()];
        h.extend(TERZAGHI_FIELDS.iter().map(|f| format!("err_exact_{f}")));
        h.extend(TERZAGHI_FIELDS.iter().map(|f| format!("err_fem_{f}")));
        h.extend(["iterations".to_string(), "wall_time".to_string()]);
        h
    }

    /// Writes the table as CSV (model-based row first, `points` = 0).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(Self::header())?;
        let mut mb = vec!["model_based".to_string(), "0".to_string()];
        mb.extend(self.model_based.iter().map(|v| v.to_string()));
        mb.extend((0..6).map(|_| "0".to_string()));
        mb.extend(["0".to_string(), "0".to_string()]);
        w.write_record(mb)?;
        for r in &self.rows {
            let mut rec = vec![r.formulation.as_str().to_string(), r.points.to_string()];
            rec.extend(r.exact.iter().map(|v| v.to_string()));
            rec.extend(r.fem.unwrap_or([f64::NAN; 6]).iter().map(|v| v.to_string()));
            let its: usize = r.reports.iter().map(|s| s.iterations.len()).sum();
            rec.extend([its.to_string(), format!("{:.3}", r.wall_time)]);
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the column for every formulation and dataset size; independent
/// runs are spread over `threads` workers.
pub fn convergence_study(
    base: &TerzaghiConfig,
    kinds: &[FormulationKind],
    sizes: &[usize],
    backend: SearchBackend,
    threads: usize,
) -> Result<ConvergenceStudy> {
    let reference = terzaghi_reference(base)?;
    let mut mb_tracker = TerzaghiTracker::new(base.analytic(), None);
    {
        let mut s =
            Solver::new(base.problem(FormulationKind::ModelBased)?, DataSources::default(), SolverConfig::default())?;
        run_steps(&mut s, |s, _| mb_tracker.record(s))?;
    }
    let model_based = mb_tracker.total_exact(base.dt, base.dt * base.num_steps as f64)?;
    let jobs: Vec<(FormulationKind, usize)> = kinds.iter().flat_map(|&k| sizes.iter().map(move |&n| (k, n))).collect();
    let results: Mutex<Vec<Option<Result<TerzaghiRun>>>> = Mutex::new(jobs.iter().map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(kind, n)) = jobs.get(j) else { break };
                info!("consolidation run {} with {n} points per axis", kind.as_str());
                let r = terzaghi_run(base, kind, n, backend, Some(&reference), SolverConfig::default());
                results.lock().expect("no worker panicked")[j] = Some(r);
            });
        }
    });
    let rows = results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .zip(&jobs)
        .map(|(r, (k, n))| r.expect("every job ran").with_context(|| format!("{} with N = {n}", k.as_str())))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceStudy { model_based, rows })
}

// ---------------------------------------------------------------------------
// Relaxation cylinder
// ---------------------------------------------------------------------------

/// One monitored instant of the relaxation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationRow {
    /// Time (s).
    pub t: f64,
    /// Computed top traction `σ′_zz − B p` (Pa).
    pub traction: f64,
    /// Series solution (Pa).
    pub exact: f64,
    /// Lateral effective stress `σ′_xx` (Pa).
    pub lateral: f64,
}

/// Traction history at the monitored top node: averages over the
/// integration points of the elements sharing that node.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationMonitor {
    cfg: RelaxationConfig,
    /// Monitored node.
    pub node: usize,
    elements: Vec<usize>,
    /// Recorded history.
    pub rows: Vec<RelaxationRow>,
}

impl RelaxationMonitor {
    /// Monitor for the mesh of `solver`.
    pub fn new(cfg: &RelaxationConfig, solver: &Solver) -> Result<Self> {
        let mesh = solver.mesh();
        let node = cfg.monitor_node(mesh)?;
        let elements = (0..mesh.num_elements()).filter(|&e| mesh.element(e).contains(&node)).collect();
        Ok(RelaxationMonitor { cfg: cfg.clone(), node, elements, rows: Vec::new() })
    }

    /// Records the current state.
    pub fn record(&mut self, s: &Solver) -> Result<()> {
        let nq = s.points_per_element();
        let b = s.problem().biot.b;
        let (mut tz, mut tx, mut w) = (0.0, 0.0, 0.0);
        for &e in &self.elements {
            for q in &s.states()[e * nq..(e + 1) * nq] {
                tz += q.weight * (q.solid.stress.get(2, 2) - b * q.pressure);
                tx += q.weight * q.solid.stress.get(0, 0);
                w += q.weight;
            }
        }
        let t = s.global().t;
        let exact = self.cfg.analytic()?.traction(t);
        self.rows.push(RelaxationRow { t, traction: tz / w, exact, lateral: tx / w });
        Ok(())
    }

    /// Relative L2 error of the traction history.
    pub fn traction_error(&self) -> f64 {
        let a: Vec<f64> = self.rows.iter().map(|r| r.traction).collect();
        let b: Vec<f64> = self.rows.iter().map(|r| r.exact).collect();
        rel_l2(&a, &b)
    }

    /// Lateral stress history.
    pub fn lateral(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.lateral).collect()
    }
}

/// `‖a − b‖₂ / ‖b‖₂` (absolute when `b` vanishes).
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

/// Outcome of one relaxation run.
#[derive(Debug, Clone)]
pub struct RelaxationRun {
    /// Formulation.
    pub formulation: FormulationKind,
    /// Monitored history.
    pub monitor: RelaxationMonitor,
    /// Per-step reports.
    pub reports: Vec<StepReport>,
}

/// Runs the relaxation cylinder.
pub fn relaxation_run(cfg: &RelaxationConfig, kind: FormulationKind, backend: SearchBackend) -> Result<RelaxationRun> {
    let config = SolverConfig { init: cfg.init(kind), ..SolverConfig::default() };
    let mut s = Solver::new(cfg.problem(kind)?, cfg.data(kind, backend)?, config)?;
    let mut monitor = RelaxationMonitor::new(cfg, &s)?;
    let reports = run_steps(&mut s, |s, _| monitor.record(s))?;
    Ok(RelaxationRun { formulation: kind, monitor, reports })
}

// ---------------------------------------------------------------------------
// Single runs with artifacts
// ---------------------------------------------------------------------------

/// Per-phase wall times (s).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    /// Dataset generation and index construction.
    pub build: f64,
    /// Nearest-neighbour search.
    pub search: f64,
    /// Assembly, factorization and triangular solves.
    pub solve: f64,
    /// Closure updates.
    pub closure: f64,
    /// Search queries issued.
    pub queries: u64,
}

/// Machine-readable result of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// Problem.
    pub problem: String,
    /// Formulation.
    pub formulation: String,
    /// Search backend.
    pub backend: SearchBackend,
    /// Seed applied to the set-up.
    pub seed: Option<u64>,
    /// Completed steps.
    pub steps: usize,
    /// Final time (s).
    pub t_end: f64,
    /// Steps ending without reassignment.
    pub converged_steps: usize,
    /// Steps ending at the iteration cap within the oscillation tolerance.
    pub oscillating_steps: usize,
    /// Fixed-point iterations over all steps.
    pub total_iterations: usize,
    /// Final error measures (space-time errors, relative L2 histories).
    pub errors: BTreeMap<String, f64>,
    /// Balance residuals of the final state.
    pub balance: BalanceResiduals,
    /// Self-checks.
    pub diagnostics: Diagnostics,
    /// Total wall time (s).
    pub wall_time: f64,
    /// Wall time per phase.
    pub timings: PhaseTimings,
}

/// Result of [`run`].
#[derive(Debug)]
pub struct RunOutcome {
    /// Final solver state.
    pub solver: Solver,
    /// Per-step reports.
    pub reports: Vec<StepReport>,
    /// Summary (also written to `summary.json`).
    pub summary: Summary,
    /// Written files.
    pub files: Vec<PathBuf>,
}

/// Runs a configuration. With an output directory, writes field files,
/// `iterations.csv`, `errors.csv` (when a closed-form or model-based
/// reference applies), `summary.json` and the effective `config.json`.
pub fn run(cfg: &ProblemConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let t0 = Instant::now();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let Prepared { mut solver, build_time } = prepare(cfg)?;
    let kind = cfg.formulation;
    let data_driven = kind != FormulationKind::ModelBased;
    let mut terzaghi = match &cfg.setup {
        Setup::Terzaghi(c) => {
            let reference = if data_driven { Some(terzaghi_reference(c)?) } else { None };
            Some(TerzaghiTracker::new(c.analytic(), reference))
        }
        _ => None,
    };
    let (mut relax, relax_reference) = match &cfg.setup {
        Setup::Relaxation(c) => {
            let reference = if data_driven {
                Some(relaxation_run(c, FormulationKind::ModelBased, cfg.backend)?.monitor.lateral())
            } else {
                None
            };
            (Some(RelaxationMonitor::new(c, &solver)?), reference)
        }
        _ => (None, None),
    };

    let mut files = Vec::new();
    let every = cfg.output.vtk_every;
    let n = solver.problem().num_steps;
    let reports = run_steps(&mut solver, |s, r| {
        if let Some(t) = terzaghi.as_mut() {
            t.record(s)?;
        }
        if let Some(m) = relax.as_mut() {
            m.record(s)?;
        }
        if let Some(dir) = out {
            if r.step == n || (every > 0 && r.step % every == 0) {
                let p = formats::vtk_path(dir, r.step);
                formats::write_vtk(&p, s)?;
                files.push(p);
            }
        }
        Ok(())
    })?;

    let mut errors = BTreeMap::new();
    let mut table: Option<(Vec<String>, Vec<Vec<f64>>)> = None;
    let (dt, t_end) = (solver.problem().dt, solver.problem().t_end());
    if let Some(t) = &terzaghi {
        for (name, v) in TERZAGHI_FIELDS.iter().zip(t.total_exact(dt, t_end)?) {
            errors.insert(format!("exact_{name}"), v);
        }
        if let Some(fem) = t.total_fem(dt, t_end)? {
            for (name, v) in TERZAGHI_FIELDS.iter().zip(fem) {
                errors.insert(format!("fem_{name}"), v);
            }
        }
        let mut header = vec!["t".to_string()];
        header.extend(TERZAGHI_FIELDS.iter().map(|f| format!("err_exact_{f}")));
        if !t.fem.is_empty() {
            header.extend(TERZAGHI_FIELDS.iter().map(|f| format!("err_fem_{f}")));
        }
        let rows = t
            .exact
            .iter()
            .enumerate()
            .map(|(k, (time, e))| {
                let mut row = vec![*time];
                row.extend(e);
                if let Some((_, f)) = t.fem.get(k) {
                    row.extend(f);
                }
                row
            })
            .collect();
        table = Some((header, rows));
    }
    if let Some(m) = &relax {
        errors.insert("traction_rel_l2".into(), m.traction_error());
        let mut header: Vec<String> = ["t", "traction", "exact", "lateral"].iter().map(|s| s.to_string()).collect();
        if let Some(reference) = &relax_reference {
            errors.insert("lateral_vs_model_rel_l2".into(), rel_l2(&m.lateral(), reference));
            header.push("lateral_model".into());
        }
        let rows = m
            .rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let mut row = vec![r.t, r.traction, r.exact, r.lateral];
                if let Some(reference) = &relax_reference {
                    row.push(reference[k]);
                }
                row
            })
            .collect();
        table = Some((header, rows));
    }
    if cfg.problem() == ProblemKind::PoissonCube {
        let k = match &cfg.setup {
            Setup::PoissonCube(c) => c.conductivity,
            _ => unreachable!(),
        };
        let mesh = solver.mesh();
        let (mut num, mut den) = (0.0_f64, 0.0_f64);
        for node in 0..mesh.num_nodes() {
            let x = mesh.node(node);
            let exact = poisson_manufactured(x[0], x[1], x[2], k).p;
            num = num.max((solver.nodal(node, Field::Pressure, 0) - exact).abs());
            den = den.max(exact.abs());
        }
        errors.insert("nodal_max_rel_p".into(), num / den);
    }

    let balance = solver.balance_residuals()?;
    let t = solver.timings();
    let summary = Summary {
        problem: cfg.problem().to_string(),
        formulation: kind.as_str().to_string(),
        backend: cfg.backend,
        seed: cfg.seed,
        steps: reports.len(),
        t_end: solver.global().t,
        converged_steps: reports.iter().filter(|r| r.status == StepStatus::Converged).count(),
        oscillating_steps: reports.iter().filter(|r| r.status == StepStatus::Oscillating).count(),
        total_iterations: reports.iter().map(|r| r.iterations.len()).sum(),
        errors,
        balance,
        diagnostics: *solver.diagnostics(),
        wall_time: t0.elapsed().as_secs_f64(),
        timings: PhaseTimings {
            build: build_time,
            search: t.search,
            solve: t.assemble + t.factorize + t.solve,
            closure: t.closure,
            queries: t.queries,
        },
    };
    if let Some(dir) = out {
        let logs: Vec<IterationLog> = reports.iter().flat_map(|r| r.iterations.iter().copied()).collect();
        let p = dir.join("iterations.csv");
        formats::write_iteration_log(&p, &logs)?;
        files.push(p);
        if let Some((header, rows)) = &table {
            let p = dir.join("errors.csv");
            formats::write_table(&p, header, rows)?;
            files.push(p);
        }
        let p = dir.join("summary.json");
        formats::write_json(&p, &summary)?;
        files.push(p);
        let p = dir.join("config.json");
        std::fs::write(&p, cfg.to_json() + "\n")?;
        files.push(p);
    }
    Ok(RunOutcome { solver, reports, summary, files })
}

// ---------------------------------------------------------------------------
// Data generation and closed-form dumps
// ---------------------------------------------------------------------------

/// Writes the datasets of a configuration (both phases when the problem
/// supports a fully data-driven run) and a manifest to `dir`.
pub fn gen_data(cfg: &ProblemConfig, dir: &Path) -> Result<formats::Manifest> {
    let setup = effective_setup(cfg)?;
    let bench = setup.benchmark();
    let kind = match cfg.formulation {
        FormulationKind::ModelBased | FormulationKind::HybridFluidDd | FormulationKind::HybridSolidDd
            if bench.problem(FormulationKind::FullyDd).is_ok() =>
        {
            FormulationKind::FullyDd
        }
        FormulationKind::ModelBased => bail!("{} has no data-driven formulation with datasets", setup.kind()),
        k => k,
    };
    let data = bench.data(kind, cfg.backend)?;
    let manifest =
        formats::write_datasets(dir, setup.kind().as_str(), cfg.seed, data.solid.as_deref(), data.fluid.as_ref())?;
    if let Setup::BereaLike(b) = &setup {
        formats::write_permeability_table(&dir.join("permeability.csv"), &b.permeability_pairs()?)?;
    }
    Ok(manifest)
}

/// Writes closed-form reference values of the configured problem to `dir`.
pub fn oracle_dump(cfg: &ProblemConfig, dir: &Path, samples: usize) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let samples = samples.max(2);
    match &cfg.setup {
        Setup::Terzaghi(c) => {
            let a = c.analytic();
            let t_end = c.dt * c.num_steps as f64;
            let header: Vec<String> =
                ["y", "t"].iter().map(|s| s.to_string()).chain(TERZAGHI_FIELDS.iter().map(|s| s.to_string())).collect();
            let mut rows = Vec::new();
            for j in 1..=10 {
                let t = t_end * j as f64 / 10.0;
                for i in 0..samples {
                    let y = c.height * i as f64 / (samples - 1) as f64;
                    rows.push(vec![
                        y,
                        t,
                        a.pressure(y, t),
                        a.pressure_gradient(y, t),
                        a.flux(y, t),
                        a.displacement(y, t),
                        a.strain(y, t),
                        a.effective_stress(y, t),
                    ]);
                }
            }
            let p = dir.join("terzaghi_oracle.csv");
            formats::write_table(&p, &header, &rows)?;
            Ok(p)
        }
        Setup::Relaxation(c) => {
            let a = c.analytic()?;
            let t_end = c.dt * c.num_steps as f64;
            let rows: Vec<Vec<f64>> = (0..samples)
                .map(|i| {
                    let t = t_end * i as f64 / (samples - 1) as f64;
                    vec![t, a.traction(t)]
                })
                .collect();
            let p = dir.join("relaxation_oracle.csv");
            formats::write_table(&p, &["t".into(), "traction".into()], &rows)?;
            Ok(p)
        }
        Setup::PoissonCube(c) => {
            let h = 0.5 * c.length;
            let mut rows = Vec::new();
            for i in 0..samples {
                let x = -h + c.length * i as f64 / (samples - 1) as f64;
                let m = poisson_manufactured(x, x, x, c.conductivity);
                rows.push(vec![x, x, x, m.p, m.grad_p[0], m.grad_p[1], m.grad_p[2], m.source]);
            }
            let header: Vec<String> =
                ["x", "y", "z", "p", "dp_dx", "dp_dy", "dp_dz", "source"].iter().map(|s| s.to_string()).collect();
            let p = dir.join("poisson_cube_oracle.csv");
            formats::write_table(&p, &header, &rows)?;
            Ok(p)
        }
        s => bail!("{} has no closed-form solution", s.kind()),
    }
}

// ---------------------------------------------------------------------------
// Timing study
// ---------------------------------------------------------------------------

/// One timed run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    /// Samples per active data axis.
    pub points_per_axis: usize,
    /// Total data points.
    pub points: usize,
    /// Backend.
    pub backend: SearchBackend,
    /// Repeat index.
    pub repeat: usize,
    /// Seed of the repeat.
    pub seed: u64,
    /// Dataset generation and index construction (s).
    pub build_time: f64,
    /// Build plus solve (s).
    pub total_time: f64,
    /// Time spent in nearest-neighbour queries (s).
    pub search_time: f64,
    /// Fixed-point iterations.
    pub iterations: usize,
    /// Final nodal unknowns (to compare backends).
    #[serde(skip)]
    pub solution: Vec<f64>,
}

fn data_points(d: &DataSources) -> usize {
    let s = d.solid.as_ref().map_or(0, |s| s.len());
    let f = match &d.fluid {
        Some(FluidData::Single(f)) => f.len(),
        Some(FluidData::Family(fam)) => fam.members().iter().map(|m| m.len()).sum(),
        None => 0,
    };
    s + f
}

/// Times complete runs for every dataset size, backend and repeat; repeat
/// `r` uses seed `seed + r`.
pub fn timing_study(
    cfg: &ProblemConfig,
    sizes: &[usize],
    backends: &[SearchBackend],
    repeats: usize,
) -> Result<Vec<TimingRow>> {
    if !matches!(cfg.problem(), ProblemKind::PoissonCube | ProblemKind::PlateHole) {
        bail!("timing studies use the poisson_cube or plate_hole problem, not {}", cfg.problem());
    }
    let base_seed = cfg.seed.unwrap_or(1);
    let mut rows = Vec::new();
    for &n in sizes {
        for repeat in 0..repeats {
            let seed = base_seed + repeat as u64;
            for &backend in backends {
                let mut c = cfg.clone();
                c.setup.set_points(n);
                c.setup.set_seed(seed);
                c.seed = Some(seed);
                c.backend = backend;
                let t0 = Instant::now();
                let setup = effective_setup(&c)?;
                let data = data_sources(&c, &setup)?;
                let points = data_points(&data);
                let build_time = t0.elapsed().as_secs_f64();
                let problem = setup.benchmark().problem(c.formulation)?;
                let mut s = Solver::new(problem, data, c.solver_config())?.with_clock(Box::new(StdClock::new()));
                let reports = run_steps(&mut s, |_, _| Ok(()))?;
                let total_time = t0.elapsed().as_secs_f64();
                info!("{n} per axis, {backend:?}, repeat {repeat}: build {build_time:.3} s, total {total_time:.3} s");
                rows.push(TimingRow {
                    points_per_axis: n,
                    points,
                    backend,
                    repeat,
                    seed,
                    build_time,
                    total_time,
                    search_time: s.timings().search,
                    iterations: reports.iter().map(|r| r.iterations.len()).sum(),
                    solution: s.global().x.clone(),
                });
            }
        }
    }
    Ok(rows)
}

/// Writes timing rows as CSV.
pub fn write_timing_csv(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean total time per `(size, backend)`.
pub fn mean_total_times(rows: &[TimingRow]) -> BTreeMap<(usize, String), f64> {
    let mut acc: BTreeMap<(usize, String), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.points_per_axis, format!("{:?}", r.backend))).or_default();
        e.0 += r.total_time;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_l2_handles_zero_references() {
        assert_eq!(rel_l2(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!((rel_l2(&[1.1], &[1.0]) - 0.1).abs() < 1e-12);
        assert_eq!(rel_l2(&[3.0, 4.0], &[0.0, 0.0]), 5.0);
    }

    #[test]
    fn model_based_column_tracks_the_series_in_every_field() {
        let cfg = TerzaghiConfig { num_steps: 20, ..Default::default() };
        let r =
            terzaghi_run(&cfg, FormulationKind::ModelBased, 3, SearchBackend::KdTree, None, SolverConfig::default())
                .unwrap();
        // Gradients converge one order slower than the primary fields and
        // are steepest right after loading.
        let limits = [0.03, 0.1, 0.1, 0.03, 0.1, 0.1];
        for ((name, e), limit) in TERZAGHI_FIELDS.iter().zip(r.exact).zip(limits) {
            assert!(e < limit, "{name}: {e}");
        }
        assert!(r.fem.is_none());
    }

    #[test]
    fn tracker_against_its_own_reference_is_zero() {
        let cfg = TerzaghiConfig { num_steps: 3, ..Default::default() };
        let reference = terzaghi_reference(&cfg).unwrap();
        let r = terzaghi_run(
            &cfg,
            FormulationKind::ModelBased,
            3,
            SearchBackend::KdTree,
            Some(&reference),
            SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(r.fem.unwrap(), [0.0; 6]);
    }
}
