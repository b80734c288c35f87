//! The data-driven fixed-point scheme and its model-based reference.
//!
//! Each time step alternates a *global step* — solve the discrete balance
//! laws with Lagrange multipliers so that the physical fields are as close
//! as possible (in the energy metric) to the currently assigned data — and
//! a *local step* — reassign every integration point to its nearest data
//! point. Iteration stops when no assignment changes.
//!
//! Formulations ([`Formulation`]):
//!
//! * fully data-driven: both the solid and the fluid closure come from data;
//!   the system matrix is constant and factorized once;
//! * hybrid fluid: a solid law plus fluid data (Newton for nonlinear laws);
//! * hybrid solid: solid data plus Darcy's law (constant matrix);
//! * model-based: both laws, no data (the conventional finite-element
//!   reference);
//! * steady data-driven diffusion on `(p, β^mass)` (used for the k-d tree
//!   timing study).

mod assembly;
mod search;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

pub use search::{init_assignments, local_search, DataSources, FluidData, InitMode, MemberSelection, SearchOutcome};

use assembly::{Ctx, Model, Offsets, QpData, QpFields, Weights};

use crate::constitutive::{BiotConstants, DarcyParams, SharedLaw, SolidLaw};
use crate::fem::{
    face_eval, face_rule, shape_eval, DirichletBc, DofMap, Field, FieldLayout, Mesh, QuadRule, ShapeValues,
    TimeFunction, MAX_NODES,
};
use crate::linalg::{half_bandwidth, BandLu, BandMatrix};
use crate::phase::{FluidPoint, MetricSpec, PhasePoint, SolidPoint};
use crate::tensor::Dim;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

/// Which constitutive relations come from data.
#[derive(Debug, Clone)]
pub enum Formulation {
    /// Solid and fluid closures from data.
    FullyDataDriven,
    /// Model-based solid law, data-driven fluid.
    HybridFluid {
        /// Effective-stress law.
        solid: SharedLaw,
    },
    /// Data-driven solid, Darcy fluid.
    HybridSolid {
        /// Darcy parameters.
        darcy: DarcyParams,
    },
    /// Conventional finite elements with both laws.
    ModelBased {
        /// Effective-stress law.
        solid: SharedLaw,
        /// Darcy parameters.
        darcy: DarcyParams,
    },
    /// Steady data-driven diffusion `div q + s = 0` (fields `p`, `β^mass`).
    SteadyDiffusion,
}

/// Tag of a [`Formulation`] without its attached laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FormulationKind {
    /// [`Formulation::FullyDataDriven`].
    FullyDd,
    /// [`Formulation::HybridFluid`].
    HybridFluidDd,
    /// [`Formulation::HybridSolid`].
    HybridSolidDd,
    /// [`Formulation::ModelBased`].
    ModelBased,
    /// [`Formulation::SteadyDiffusion`].
    SteadyDiffusion,
}

impl FormulationKind {
    /// Short identifier used in file names and logs.
    pub fn as_str(self) -> &'static str {
        match self {
            FormulationKind::FullyDd => "fully_dd",
            FormulationKind::HybridFluidDd => "hybrid_fluid_dd",
            FormulationKind::HybridSolidDd => "hybrid_solid_dd",
            FormulationKind::ModelBased => "model_based",
            FormulationKind::SteadyDiffusion => "steady_diffusion",
        }
    }
}

impl Formulation {
    /// The formulation's tag.
    pub fn kind(&self) -> FormulationKind {
        match self {
            Formulation::FullyDataDriven => FormulationKind::FullyDd,
            Formulation::HybridFluid { .. } => FormulationKind::HybridFluidDd,
            Formulation::HybridSolid { .. } => FormulationKind::HybridSolidDd,
            Formulation::ModelBased { .. } => FormulationKind::ModelBased,
            Formulation::SteadyDiffusion => FormulationKind::SteadyDiffusion,
        }
    }

    /// Nodal field layout.
    pub fn layout(&self) -> FieldLayout {
        match self {
            Formulation::ModelBased { .. } => FieldLayout::ModelBased,
            Formulation::SteadyDiffusion => FieldLayout::Poisson,
            _ => FieldLayout::DataDriven,
        }
    }

    /// Whether the solid closure comes from data.
    pub fn solid_data_driven(&self) -> bool {
        matches!(self, Formulation::FullyDataDriven | Formulation::HybridSolid { .. })
    }

    /// Whether the fluid closure comes from data.
    pub fn fluid_data_driven(&self) -> bool {
        matches!(self, Formulation::FullyDataDriven | Formulation::HybridFluid { .. } | Formulation::SteadyDiffusion)
    }

    /// Whether any closure comes from data.
    pub fn data_driven(&self) -> bool {
        self.solid_data_driven() || self.fluid_data_driven()
    }

    /// Whether the system matrix is independent of the solution and data
    /// (ignoring per-element law overrides, see [`Problem::constant_operator`]).
    pub fn constant_operator(&self) -> bool {
        match self {
            Formulation::HybridFluid { solid } | Formulation::ModelBased { solid, .. } => solid.is_linear(),
            _ => true,
        }
    }

    /// Whether the problem is steady (no time derivative).
    pub fn steady(&self) -> bool {
        matches!(self, Formulation::SteadyDiffusion)
    }
}

/// Boundary loads (Neumann data).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Load {
    /// Traction component `t̄_comp` (Pa) on a face set.
    Traction {
        /// Face set.
        set: String,
        /// Component.
        comp: usize,
        /// Value history.
        value: TimeFunction,
    },
    /// Normal pressure: `t̄ = −P n` (Pa, positive in compression).
    NormalPressure {
        /// Face set.
        set: String,
        /// Value history.
        value: TimeFunction,
    },
    /// Outward normal fluid flux `q̄ = q·n` (m/s).
    Flux {
        /// Face set.
        set: String,
        /// Value history.
        value: TimeFunction,
    },
}

/// A complete boundary-value problem.
#[derive(Debug, Clone)]
pub struct Problem {
    /// Identifier used in outputs.
    pub name: String,
    /// Mesh with tagged node and face sets.
    pub mesh: Mesh,
    /// Formulation and attached laws.
    pub formulation: Formulation,
    /// Biot coupling constants, body force and source.
    pub biot: BiotConstants,
    /// Energy metric (required by data-driven formulations).
    pub metric: Option<MetricSpec>,
    /// Dirichlet conditions.
    pub dirichlet: Vec<DirichletBc>,
    /// Boundary loads.
    pub loads: Vec<Load>,
    /// Time step (s); ignored for steady problems.
    pub dt: f64,
    /// Number of time steps.
    pub num_steps: usize,
    /// Gauss points per direction (1–3).
    pub quadrature_order: usize,
    /// Initial porosity per element; enables the porosity update
    /// `φ = (1 + ε_v) φ₀` and porosity-based dataset selection.
    pub porosity: Option<Vec<f64>>,
    /// Per-element solid laws replacing the formulation's law (e.g. laws
    /// calibrated to each element's initial porosity).
    pub element_laws: Option<Vec<SharedLaw>>,
}

impl Problem {
    /// Final time `num_steps · dt`.
    pub fn t_end(&self) -> f64 {
        self.num_steps as f64 * self.dt
    }

    /// Whether the system matrix is independent of the solution and data.
    pub fn constant_operator(&self) -> bool {
        match &self.element_laws {
            Some(laws) => laws.iter().all(|l| l.is_linear()),
            None => self.formulation.constant_operator(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Problem(alloc::format!("time step must be positive, got {}", self.dt)));
        }
        if self.formulation.data_driven() && self.metric.is_none() {
            return Err(Error::Problem("data-driven formulations need a metric".into()));
        }
        if let Some(m) = &self.metric {
            if m.dim() != self.mesh.dim() {
                return Err(Error::Problem("metric and mesh dimensions differ".into()));
            }
        }
        if let Some(phi) = &self.porosity {
            if phi.len() != self.mesh.num_elements() {
                return Err(Error::Problem("one initial porosity per element is required".into()));
            }
            if phi.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
                return Err(Error::Problem("porosities must lie in (0, 1)".into()));
            }
        }
        if let Some(laws) = &self.element_laws {
            if laws.len() != self.mesh.num_elements() {
                return Err(Error::Problem("one solid law per element is required".into()));
            }
            if !matches!(self.formulation, Formulation::HybridFluid { .. } | Formulation::ModelBased { .. }) {
                return Err(Error::Problem("element laws need a formulation with a solid law".into()));
            }
        }
        if !(1..=3).contains(&self.quadrature_order) {
            return Err(Error::Problem("quadrature order must be 1, 2 or 3".into()));
        }
        self.biot.validate()
    }
}

// ---------------------------------------------------------------------------
// Configuration, state and reports
// ---------------------------------------------------------------------------

/// Fixed-point and Newton controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Fixed-point iteration cap per step.
    pub max_iterations: usize,
    /// Largest reassignment count accepted (with a warning) at the cap.
    pub oscillation_tolerance: usize,
    /// Relative Newton correction tolerance (per field block).
    pub newton_tolerance: f64,
    /// Newton iteration cap per global solve.
    pub newton_max_iterations: usize,
    /// Initial data assignment.
    pub init: InitMode,
    /// Reassemble and compare the constant operator at every global solve.
    pub verify_operator_constancy: bool,
    /// Cross-check every nearest-neighbour query against brute force.
    pub verify_search: bool,
    /// Porosity used to pick dataset-family members.
    pub member_selection: MemberSelection,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 200,
            oscillation_tolerance: 5,
            newton_tolerance: 1e-10,
            newton_max_iterations: 30,
            init: InitMode::default(),
            verify_operator_constancy: false,
            verify_search: false,
            member_selection: MemberSelection::default(),
        }
    }
}

/// Material and physical state at one integration point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPointState {
    /// Owning element.
    pub element: usize,
    /// Physical coordinates.
    pub x: [f64; 3],
    /// Quadrature weight × Jacobian.
    pub weight: f64,
    /// Physical (balance-satisfying) solid state.
    pub solid: SolidPoint,
    /// Physical fluid state.
    pub fluid: FluidPoint,
    /// Assigned solid data index.
    pub solid_index: Option<usize>,
    /// Assigned solid data point.
    pub solid_data: SolidPoint,
    /// Family member the fluid data comes from.
    pub fluid_member: Option<usize>,
    /// Assigned fluid data index within the member.
    pub fluid_index: Option<usize>,
    /// Assigned fluid data point.
    pub fluid_data: FluidPoint,
    /// `d_s²` to the assigned solid point.
    pub solid_distance_sq: f64,
    /// `d_f²` to the assigned fluid point.
    pub fluid_distance_sq: f64,
    /// Initial porosity.
    pub porosity0: f64,
    /// Current porosity `(1 + ε_v) φ₀`.
    pub porosity: f64,
    /// Current pressure.
    pub pressure: f64,
    /// Current volumetric strain.
    pub eps_vol: f64,
    /// Pressure at the end of the previous step.
    pub pressure_prev: f64,
    /// Volumetric strain at the end of the previous step.
    pub eps_vol_prev: f64,
}

/// Nodal unknowns and time.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    /// All nodal values (`node · dofs_per_node + offset`).
    pub x: Vec<f64>,
    /// Current time.
    pub t: f64,
    /// Completed steps.
    pub step: usize,
}

/// One fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationLog {
    /// Time step (1-based).
    pub step: usize,
    /// Iteration (1-based).
    pub iteration: usize,
    /// `Σ w d_s²`.
    pub solid_metric: f64,
    /// `Σ w d_f²`.
    pub fluid_metric: f64,
    /// `Σ w (d_s² + Δt d_f²)`.
    pub coupled_metric: f64,
    /// Reassigned integration points.
    pub change_count: usize,
    /// Newton iterations of the global step.
    pub newton_iterations: usize,
}

/// How a time step ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StepStatus {
    /// No assignment changed in the last iteration.
    Converged,
    /// Iteration cap reached with a small number of oscillating points.
    Oscillating,
}

/// Outcome of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Step index (1-based).
    pub step: usize,
    /// Time at the end of the step.
    pub t: f64,
    /// Per-iteration log.
    pub iterations: Vec<IterationLog>,
    /// Termination status.
    pub status: StepStatus,
    /// Newton correction norms (relative, per global solve).
    pub newton_history: Vec<Vec<f64>>,
}

/// Source of wall-clock time (seconds); the core crate has no clock.
pub trait Clock: Send + Sync {
    /// Seconds since an arbitrary origin.
    fn now(&self) -> f64;
}

/// A clock that always reads zero (timings disabled).
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Accumulated wall-clock time per phase (seconds).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Timings {
    /// Residual/Jacobian assembly.
    pub assemble: f64,
    /// LU factorization.
    pub factorize: f64,
    /// Triangular solves.
    pub solve: f64,
    /// Closure updates.
    pub closure: f64,
    /// Nearest-neighbour search.
    pub search: f64,
    /// Queries issued.
    pub queries: u64,
}

/// Self-checks collected during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    /// LU factorizations performed.
    pub factorizations: usize,
    /// Operator re-assemblies compared with the cached matrix.
    pub constancy_checks: usize,
    /// Comparisons that were not bit-identical.
    pub constancy_violations: usize,
    /// Largest `|A − Aᵀ| / max|A|` of factorized constant operators.
    pub max_relative_asymmetry: f64,
    /// Queries cross-checked against brute force.
    pub search_checks: u64,
    /// Cross-checks that disagreed.
    pub search_mismatches: u64,
}

/// Relative weak-form balance residuals with closed fields.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BalanceResiduals {
    /// `‖R_mom‖ / ‖internal + external forces‖` over free momentum rows.
    pub momentum: f64,
    /// `‖R_mass‖ / ‖mass terms‖` over free mass rows.
    pub mass: f64,
}

/// A factorized constant operator that can be shared between solvers of
/// the same problem (same mesh, layout, metric and time step).
#[derive(Debug, Clone)]
pub struct SharedOperator {
    matrix: Option<BandMatrix>,
    lu: Arc<BandLu>,
    key: (usize, usize),
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

struct FaceQp {
    element: usize,
    n: [f64; MAX_NODES],
    normal: [f64; 3],
    weight: f64,
    load: usize,
}

/// Time-stepping driver for one problem.
pub struct Solver {
    problem: Problem,
    dofs: DofMap,
    off: Offsets,
    bandwidth: usize,
    weights: Option<Weights>,
    darcy: Option<([[f64; 6]; 6], [f64; 3])>,
    nq: usize,
    geom: Vec<ShapeValues>,
    faces: Vec<FaceQp>,
    data: DataSources,
    config: SolverConfig,
    states: Vec<QuadPointState>,
    global: GlobalState,
    loads: Vec<f64>,
    operator: Option<SharedOperator>,
    clock: Box<dyn Clock>,
    timings: Timings,
    diagnostics: Diagnostics,
}

impl core::fmt::Debug for Solver {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Solver")
            .field("problem", &self.problem.name)
            .field("formulation", &self.problem.formulation.kind())
            .field("free_dofs", &self.dofs.num_free())
            .field("bandwidth", &self.bandwidth)
            .field("step", &self.global.step)
            .finish()
    }
}

fn darcy_arrays(d: &DarcyParams) -> ([[f64; 6]; 6], [f64; 3]) {
    let k = d.conductivity();
    let mut a = [[0.0; 6]; 6];
    for (i, row) in a.iter_mut().enumerate().take(k.order()) {
        for (j, v) in row.iter_mut().enumerate().take(k.order()) {
            *v = k.get(i, j);
        }
    }
    let mut g = [0.0; 3];
    g[..d.gamma_f().len()].copy_from_slice(d.gamma_f().as_slice());
    (a, g)
}

impl Solver {
    /// Prepares a solver: numbering, geometry cache, initial state (zero
    /// fields with Dirichlet values at `t = 0`) and initial assignments.
    pub fn new(problem: Problem, data: DataSources, config: SolverConfig) -> Result<Self> {
        problem.validate()?;
        let mesh = &problem.mesh;
        let dim = mesh.dim();
        let layout = problem.formulation.layout();
        let dofs = DofMap::new(mesh, layout, &problem.dirichlet)?;
        let off = Offsets::new(layout, dim);
        let bandwidth = half_bandwidth(mesh, &dofs);
        let weights = problem.metric.as_ref().map(Weights::new);
        let darcy = match &problem.formulation {
            Formulation::HybridSolid { darcy } | Formulation::ModelBased { darcy, .. } => Some(darcy_arrays(darcy)),
            _ => None,
        };
        let rule = QuadRule::gauss(dim, problem.quadrature_order);
        let nq = rule.len();
        let mut geom = Vec::with_capacity(mesh.num_elements() * nq);
        let mut states = Vec::with_capacity(mesh.num_elements() * nq);
        for e in 0..mesh.num_elements() {
            let phi0 = problem.porosity.as_ref().map_or(0.0, |p| p[e]);
            for (xi, w) in rule.points().iter().zip(rule.weights()) {
                let sv = shape_eval(mesh, e, xi)?;
                states.push(QuadPointState {
                    element: e,
                    x: sv.x,
                    weight: w * sv.det_j,
                    solid: SolidPoint::zeros(dim),
                    fluid: FluidPoint::zeros(dim),
                    solid_index: None,
                    solid_data: SolidPoint::zeros(dim),
                    fluid_member: None,
                    fluid_index: None,
                    fluid_data: FluidPoint::zeros(dim),
                    solid_distance_sq: 0.0,
                    fluid_distance_sq: 0.0,
                    porosity0: phi0,
                    porosity: phi0,
                    pressure: 0.0,
                    eps_vol: 0.0,
                    pressure_prev: 0.0,
                    eps_vol_prev: 0.0,
                });
                geom.push(sv);
            }
        }
        let frule = face_rule(dim, problem.quadrature_order.max(2));
        let mut faces = Vec::new();
        for (li, load) in problem.loads.iter().enumerate() {
            let set = match load {
                Load::Traction { set, comp, .. } => {
                    if *comp >= dim.d() {
                        return Err(Error::Problem(alloc::format!("traction component {comp} out of range")));
                    }
                    set
                }
                Load::NormalPressure { set, .. } | Load::Flux { set, .. } => set,
            };
            for &f in mesh.face_set(set)? {
                for (s, w) in frule.points().iter().zip(frule.weights()) {
                    let fv = face_eval(mesh, f, s)?;
                    faces.push(FaceQp { element: f.element, n: fv.n, normal: fv.normal, weight: w * fv.ds, load: li });
                }
            }
        }
        let mut x = vec![0.0; dofs.num_dofs()];
        dofs.apply_constraints(&mut x, 0.0);
        let mut solver = Solver {
            loads: vec![0.0; dofs.num_dofs()],
            global: GlobalState { x, t: 0.0, step: 0 },
            problem,
            dofs,
            off,
            bandwidth,
            weights,
            darcy,
            nq,
            geom,
            faces,
            data,
            config,
            states,
            operator: None,
            clock: Box::new(NoClock),
            timings: Timings::default(),
            diagnostics: Diagnostics::default(),
        };
        solver.update_states()?;
        solver.commit_history();
        let f = &solver.problem.formulation;
        let (s, fl) = (f.solid_data_driven(), f.fluid_data_driven());
        if s || fl {
            init_assignments(&mut solver.states, &solver.data, solver.problem.metric.as_ref(), s, fl, config.init)?;
        }
        Ok(solver)
    }

    /// Uses `clock` for phase timings.
    pub fn with_clock(mut self, clock: Box<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// The factorized constant operator, once computed.
    pub fn shared_operator(&self) -> Option<SharedOperator> {
        self.operator.clone()
    }

    /// Reuses a factorization computed by another solver of the same problem.
    pub fn use_operator(&mut self, op: SharedOperator) -> Result<()> {
        if !self.problem.constant_operator() || op.key != (self.dofs.num_free(), self.bandwidth) {
            return Err(Error::invalid("operator does not match this problem"));
        }
        self.operator = Some(op);
        Ok(())
    }

    /// The problem being solved.
    pub fn problem(&self) -> &Problem {
        &self.problem
    }
    /// Mesh.
    pub fn mesh(&self) -> &Mesh {
        &self.problem.mesh
    }
    /// Degree-of-freedom map.
    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }
    /// Half bandwidth of the system.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }
    /// Integration-point states.
    pub fn states(&self) -> &[QuadPointState] {
        &self.states
    }
    /// Mutable integration-point states (e.g. to impose assignments).
    pub fn states_mut(&mut self) -> &mut [QuadPointState] {
        &mut self.states
    }
    /// Integration points per element.
    pub fn points_per_element(&self) -> usize {
        self.nq
    }
    /// Nodal unknowns and time.
    pub fn global(&self) -> &GlobalState {
        &self.global
    }
    /// Accumulated phase timings.
    pub fn timings(&self) -> &Timings {
        &self.timings
    }
    /// Self-check counters.
    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }
    /// Material data.
    pub fn data(&self) -> &DataSources {
        &self.data
    }

    /// Nodal value of `(field, comp)`.
    pub fn nodal(&self, node: usize, field: Field, comp: usize) -> f64 {
        self.global.x[self.dofs.dof(node, field, comp)]
    }

    /// Values of nodal field `(field, comp)` interpolated at every
    /// integration point (state order); `None` when the layout lacks it.
    pub fn field_at_points(&self, field: Field, comp: usize) -> Option<Vec<f64>> {
        let mesh = &self.problem.mesh;
        if !self.problem.formulation.layout().has(field) {
            return None;
        }
        let mut out = Vec::with_capacity(self.states.len());
        for e in 0..mesh.num_elements() {
            let nodes = mesh.element(e);
            for q in e * self.nq..(e + 1) * self.nq {
                let sv = &self.geom[q];
                out.push(nodes.iter().enumerate().map(|(a, &n)| sv.n[a] * self.nodal(n, field, comp)).sum());
            }
        }
        Some(out)
    }

    fn ctx(&self) -> Ctx {
        let b = &self.problem.biot;
        let mut gamma = [0.0; 3];
        gamma[..b.gamma.len()].copy_from_slice(b.gamma.as_slice());
        Ctx {
            dim: self.problem.mesh.dim(),
            off: self.off,
            b: b.b,
            inv_m: b.inv_m,
            gamma,
            source: b.source,
            dt: if self.problem.formulation.steady() { 1.0 } else { self.problem.dt },
        }
    }

    fn model<'a>(&'a self, e: usize) -> Model<'a> {
        let w = self.weights.as_ref();
        let law = |solid: &'a SharedLaw| -> &'a dyn SolidLaw {
            match &self.problem.element_laws {
                Some(laws) => laws[e].as_ref(),
                None => solid.as_ref(),
            }
        };
        match &self.problem.formulation {
            Formulation::FullyDataDriven => Model::FullyDd(w.unwrap()),
            Formulation::HybridFluid { solid } => Model::HybridFluid(w.unwrap(), law(solid)),
            Formulation::HybridSolid { .. } => {
                let (k, g) = self.darcy.unwrap();
                Model::HybridSolid(w.unwrap(), k, g)
            }
            Formulation::ModelBased { solid, .. } => {
                let (k, g) = self.darcy.unwrap();
                Model::ModelBased(law(solid), k, g)
            }
            Formulation::SteadyDiffusion => Model::Poisson(w.unwrap()),
        }
    }

    fn qp_data(&self, q: usize) -> QpData {
        let s = &self.states[q];
        QpData::new(&s.solid_data, &s.fluid_data, s.pressure_prev, s.eps_vol_prev)
    }

    /// Boundary load vector at time `t` (global dofs, already signed for
    /// the residual of the active formulation).
    fn assemble_loads(&mut self, t: f64) {
        let dim = self.problem.mesh.dim();
        let d = dim.d();
        let per_node = self.off.per_node;
        let model_based = matches!(self.problem.formulation, Formulation::ModelBased { .. });
        let (mom, mass) = if model_based { (self.off.u, self.off.p) } else { (self.off.bm, self.off.bs) };
        let sign_mom = if model_based { -1.0 } else { 1.0 };
        let dt = self.ctx().dt;
        self.loads.iter_mut().for_each(|v| *v = 0.0);
        for fq in &self.faces {
            let nodes = self.problem.mesh.element(fq.element);
            let load = &self.problem.loads[fq.load];
            for (a, &node) in nodes.iter().enumerate() {
                let na = fq.n[a];
                if na == 0.0 {
                    continue;
                }
                match load {
                    Load::Traction { comp, value, .. } => {
                        if let Some(o) = mom {
                            self.loads[node * per_node + o + comp] += sign_mom * fq.weight * na * value.eval(t);
                        }
                    }
                    Load::NormalPressure { value, .. } => {
                        if let Some(o) = mom {
                            let p = value.eval(t);
                            for i in 0..d {
                                self.loads[node * per_node + o + i] += sign_mom * fq.weight * na * (-p * fq.normal[i]);
                            }
                        }
                    }
                    Load::Flux { value, .. } => {
                        if let Some(o) = mass {
                            self.loads[node * per_node + o] += dt * fq.weight * na * value.eval(t);
                        }
                    }
                }
            }
        }
    }

    /// Global residual (all dofs) at `x` and, optionally, the Jacobian on
    /// the free equations.
    fn assemble(&self, x: &[f64], jacobian: bool) -> Result<(Vec<f64>, Option<BandMatrix>)> {
        let mesh = &self.problem.mesh;
        let ctx = self.ctx();
        let nf = self.dofs.num_free();
        let mut r = vec![0.0; x.len()];
        let mut a = if jacobian { Some(BandMatrix::zeros(nf, self.bandwidth, self.bandwidth)) } else { None };
        let mut el = Vec::new();
        let mut xl = Vec::new();
        let mut re = Vec::new();
        let mut ke = Vec::new();
        for e in 0..mesh.num_elements() {
            self.dofs.element_dofs(mesh, e, &mut el);
            let nl = el.len();
            xl.clear();
            xl.extend(el.iter().map(|&g| x[g]));
            re.clear();
            re.resize(nl, 0.0);
            if jacobian {
                ke.clear();
                ke.resize(nl * nl, 0.0);
            }
            for q in e * self.nq..(e + 1) * self.nq {
                let sv = &self.geom[q];
                let f = assembly::interpolate(&xl, sv, &self.off, ctx.dim);
                let data = self.qp_data(q);
                let kref = if jacobian { Some(ke.as_mut_slice()) } else { None };
                assembly::contribute(&ctx, &self.model(e), sv, self.states[q].weight, &data, &f, &mut re, kref)?;
            }
            for (i, &g) in el.iter().enumerate() {
                r[g] += re[i];
            }
            if let Some(a) = a.as_mut() {
                for (i, &gi) in el.iter().enumerate() {
                    let Some(ri) = self.dofs.equation(gi) else { continue };
                    for (j, &gj) in el.iter().enumerate() {
                        let v = ke[i * nl + j];
                        if v == 0.0 {
                            continue;
                        }
                        if let Some(cj) = self.dofs.equation(gj) {
                            a.add(ri, cj, v);
                        }
                    }
                }
            }
        }
        for (ri, li) in r.iter_mut().zip(&self.loads) {
            *ri += li;
        }
        Ok((r, a))
    }

    fn free_residual(&self, r: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.dofs.num_free()];
        self.dofs.gather_free(r, &mut f);
        f
    }

    /// Residual on the free equations at the current state (for tests and
    /// diagnostics).
    pub fn residual(&self) -> Result<Vec<f64>> {
        Ok(self.free_residual(&self.assemble(&self.global.x, false)?.0))
    }

    /// Residual on the free equations after replacing the free unknowns by
    /// `free` (equation order).
    pub fn residual_at(&self, free: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.global.x.clone();
        self.dofs.scatter_free(free, &mut x);
        Ok(self.free_residual(&self.assemble(&x, false)?.0))
    }

    /// Free unknowns in equation order.
    pub fn free_values(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.dofs.num_free()];
        self.dofs.gather_free(&self.global.x, &mut f);
        f
    }

    /// Jacobian on the free equations at the current state.
    pub fn jacobian(&self) -> Result<BandMatrix> {
        Ok(self.assemble(&self.global.x, true)?.1.expect("requested"))
    }

    /// Block scales `max |x|` of each field, used for Newton stopping.
    fn field_scales(&self, x: &[f64]) -> [f64; 4] {
        let mut s = [0.0f64; 4];
        let per = self.off.per_node;
        let offs = [self.off.u, self.off.p, self.off.bm, self.off.bs];
        let d = self.problem.mesh.dim().d();
        for (g, v) in x.iter().enumerate() {
            let k = g % per;
            for (fi, o) in offs.iter().enumerate() {
                if let Some(o) = o {
                    let width = if fi == 0 || fi == 2 { d } else { 1 };
                    if k >= *o && k < o + width {
                        s[fi] = s[fi].max(v.abs());
                    }
                }
            }
        }
        s
    }

    fn field_of(&self, g: usize) -> usize {
        let k = g % self.off.per_node;
        let d = self.problem.mesh.dim().d();
        let offs = [self.off.u, self.off.p, self.off.bm, self.off.bs];
        for (fi, o) in offs.iter().enumerate() {
            if let Some(o) = o {
                let width = if fi == 0 || fi == 2 { d } else { 1 };
                if k >= *o && k < o + width {
                    return fi;
                }
            }
        }
        0
    }

    fn factorize_constant(&mut self) -> Result<()> {
        let t0 = self.clock.now();
        let (_, a) = self.assemble(&self.global.x, true)?;
        let a = a.expect("requested");
        self.timings.assemble += self.clock.now() - t0;
        let rel = if a.max_abs() > 0.0 { a.asymmetry() / a.max_abs() } else { 0.0 };
        if self.problem.formulation.kind() != FormulationKind::ModelBased {
            self.diagnostics.max_relative_asymmetry = self.diagnostics.max_relative_asymmetry.max(rel);
        }
        let t1 = self.clock.now();
        let keep = if self.config.verify_operator_constancy { Some(a.clone()) } else { None };
        let lu = a.factorize()?;
        self.timings.factorize += self.clock.now() - t1;
        self.diagnostics.factorizations += 1;
        self.operator =
            Some(SharedOperator { matrix: keep, lu: Arc::new(lu), key: (self.dofs.num_free(), self.bandwidth) });
        Ok(())
    }

    /// Global step: solves the balance equations for the current data
    /// assignment. Returns the history of relative Newton corrections.
    fn global_solve(&mut self) -> Result<Vec<f64>> {
        let constant = self.problem.constant_operator();
        let mut history = Vec::new();
        if constant {
            if self.operator.is_none() {
                self.factorize_constant()?;
            }
            let t0 = self.clock.now();
            let verify = self.config.verify_operator_constancy;
            let (r, a) = self.assemble(&self.global.x, verify)?;
            self.timings.assemble += self.clock.now() - t0;
            if let Some(a) = a {
                self.diagnostics.constancy_checks += 1;
                let op = self.operator.as_mut().expect("factorized");
                match &op.matrix {
                    Some(m) if m.storage() == a.storage() => {}
                    Some(_) => {
                        self.diagnostics.constancy_violations += 1;
                        log::error!("system matrix changed between global solves");
                    }
                    None => op.matrix = Some(a),
                }
            }
            let t1 = self.clock.now();
            let mut rhs = self.free_residual(&r);
            rhs.iter_mut().for_each(|v| *v = -*v);
            self.operator.as_ref().expect("factorized").lu.solve_in_place(&mut rhs);
            self.timings.solve += self.clock.now() - t1;
            history.push(self.apply_correction(&rhs));
            return Ok(history);
        }
        for it in 0..self.config.newton_max_iterations {
            let t0 = self.clock.now();
            let (r, a) = self.assemble(&self.global.x, true)?;
            self.timings.assemble += self.clock.now() - t0;
            let t1 = self.clock.now();
            let lu = a.expect("requested").factorize()?;
            self.timings.factorize += self.clock.now() - t1;
            self.diagnostics.factorizations += 1;
            let t2 = self.clock.now();
            let mut rhs = self.free_residual(&r);
            rhs.iter_mut().for_each(|v| *v = -*v);
            lu.solve_in_place(&mut rhs);
            self.timings.solve += self.clock.now() - t2;
            let rel = self.apply_correction(&rhs);
            history.push(rel);
            log::debug!("newton iteration {}: relative correction {rel:e}", it + 1);
            if rel <= self.config.newton_tolerance {
                return Ok(history);
            }
        }
        Err(Error::NewtonDiverged {
            iterations: self.config.newton_max_iterations,
            residual: *history.last().unwrap_or(&f64::NAN),
        })
    }

    /// Adds a free-dof correction; returns the largest correction relative
    /// to the magnitude of its field block.
    fn apply_correction(&mut self, delta: &[f64]) -> f64 {
        let mut x = core::mem::take(&mut self.global.x);
        let mut dmax = [0.0f64; 4];
        for g in 0..x.len() {
            if let Some(e) = self.dofs.equation(g) {
                x[g] += delta[e];
                let f = self.field_of(g);
                dmax[f] = dmax[f].max(delta[e].abs());
            }
        }
        let scales = self.field_scales(&x);
        self.global.x = x;
        let mut rel = 0.0f64;
        for f in 0..4 {
            if dmax[f] > 0.0 {
                rel = rel.max(if scales[f] > 0.0 { dmax[f] / scales[f] } else { f64::INFINITY });
            }
        }
        rel
    }

    /// Closure: recomputes physical states (and porosity) from the nodal
    /// fields.
    fn update_states(&mut self) -> Result<()> {
        let t0 = self.clock.now();
        let mesh = &self.problem.mesh;
        let ctx = self.ctx();
        let mut el = Vec::new();
        let mut xl = Vec::new();
        let mut updates = Vec::with_capacity(self.states.len());
        for e in 0..mesh.num_elements() {
            self.dofs.element_dofs(mesh, e, &mut el);
            xl.clear();
            xl.extend(el.iter().map(|&g| self.global.x[g]));
            for q in e * self.nq..(e + 1) * self.nq {
                let f = assembly::interpolate(&xl, &self.geom[q], &self.off, ctx.dim);
                let (solid, fluid) = assembly::closure(&ctx, &self.model(e), &self.qp_data(q), &f)?;
                updates.push((solid, fluid, f.p, f.ev));
            }
        }
        let track = self.problem.porosity.is_some();
        for (s, (solid, fluid, p, ev)) in self.states.iter_mut().zip(updates) {
            s.solid = solid;
            s.fluid = fluid;
            s.pressure = p;
            s.eps_vol = ev;
            if track {
                s.porosity = (1.0 + ev) * s.porosity0;
            }
        }
        self.timings.closure += self.clock.now() - t0;
        Ok(())
    }

    fn commit_history(&mut self) {
        for s in &mut self.states {
            s.pressure_prev = s.pressure;
            s.eps_vol_prev = s.eps_vol;
        }
    }

    /// Local step over all integration points.
    fn search(&mut self) -> Result<SearchOutcome> {
        let t0 = self.clock.now();
        let f = &self.problem.formulation;
        let metric = self.problem.metric.as_ref().expect("validated");
        let out = local_search(
            &mut self.states,
            &self.data,
            metric,
            f.solid_data_driven(),
            f.fluid_data_driven(),
            self.config.member_selection,
            self.config.verify_search,
        )?;
        self.timings.search += self.clock.now() - t0;
        self.timings.queries += out.queries;
        self.diagnostics.search_checks += out.checked;
        self.diagnostics.search_mismatches += out.mismatches;
        Ok(out)
    }

    /// Advances one time step (Algorithm: global step → closure → local
    /// step until no reassignment).
    pub fn step(&mut self) -> Result<StepReport> {
        let n = self.global.step + 1;
        let t = n as f64 * self.problem.dt;
        // history is committed lazily so that residual queries after a step
        // still see the increment of that step
        self.commit_history();
        self.dofs.apply_constraints(&mut self.global.x, t);
        self.assemble_loads(t);
        let data_driven = self.problem.formulation.data_driven();
        let dt_scale = self.ctx().dt;
        let mut iterations = Vec::new();
        let mut newton_history = Vec::new();
        let mut status = StepStatus::Converged;
        for it in 1..=self.config.max_iterations {
            let hist = self.global_solve()?;
            let newton_iterations = hist.len();
            newton_history.push(hist);
            self.update_states()?;
            let out = if data_driven { self.search()? } else { SearchOutcome::default() };
            let log = IterationLog {
                step: n,
                iteration: it,
                solid_metric: out.solid_metric,
                fluid_metric: out.fluid_metric,
                coupled_metric: out.solid_metric + dt_scale * out.fluid_metric,
                change_count: out.change_count,
                newton_iterations,
            };
            log::debug!(
                "step {n} iteration {it}: changes {} metric {:e} (solid {:e}, fluid {:e})",
                log.change_count,
                log.coupled_metric,
                log.solid_metric,
                log.fluid_metric
            );
            iterations.push(log);
            if out.change_count == 0 {
                break;
            }
            if it == self.config.max_iterations {
                if out.change_count <= self.config.oscillation_tolerance {
                    log::warn!(
                        "step {n}: accepting fixed point with {} oscillating assignments after {it} iterations",
                        out.change_count
                    );
                    status = StepStatus::Oscillating;
                } else {
                    return Err(Error::NonConvergence { step: n, iterations: it, change_count: out.change_count });
                }
            }
        }
        self.global.t = t;
        self.global.step = n;
        log::info!("step {n} (t = {t:.4e}) finished after {} iterations", iterations.len());
        Ok(StepReport { step: n, t, iterations, status, newton_history })
    }

    /// Runs all remaining steps, calling `on_step` after each.
    pub fn run_with(&mut self, mut on_step: impl FnMut(&Solver, &StepReport) -> Result<()>) -> Result<Vec<StepReport>> {
        let mut reports = Vec::new();
        while self.global.step < self.problem.num_steps {
            let r = self.step()?;
            on_step(self, &r)?;
            reports.push(r);
        }
        Ok(reports)
    }

    /// Runs all remaining steps.
    pub fn run(&mut self) -> Result<Vec<StepReport>> {
        self.run_with(|_, _| Ok(()))
    }

    /// Relative weak-form momentum and mass residuals evaluated with the
    /// closed (physical) stresses and fluxes of the current state.
    pub fn balance_residuals(&self) -> Result<BalanceResiduals> {
        let mesh = &self.problem.mesh;
        let ctx = self.ctx();
        let dim = ctx.dim;
        let d = dim.d();
        let per = self.off.per_node;
        let model_based = matches!(self.problem.formulation, Formulation::ModelBased { .. });
        // rows of the momentum / mass balances: the multiplier rows in
        // data-driven layouts, the primal rows otherwise
        let (mom_rows, mass_rows) = if model_based { (self.off.u, self.off.p) } else { (self.off.bm, self.off.bs) };
        let nn = mesh.num_nodes();
        let mut mom = vec![[0.0; 3]; nn];
        let mut mass = vec![0.0; nn];
        let mut mom_abs = vec![0.0; nn];
        let mut mass_abs = vec![0.0; nn];
        let mut el = Vec::new();
        let mut xl = Vec::new();
        for e in 0..mesh.num_elements() {
            self.dofs.element_dofs(mesh, e, &mut el);
            xl.clear();
            xl.extend(el.iter().map(|&g| self.global.x[g]));
            let mut m_loc = [[0.0; 3]; MAX_NODES];
            let mut q_loc = [0.0; MAX_NODES];
            for q in e * self.nq..(e + 1) * self.nq {
                let sv = &self.geom[q];
                let f: QpFields = assembly::interpolate(&xl, sv, &self.off, dim);
                let s = &self.states[q];
                let mut mq = [[0.0; 3]; MAX_NODES];
                let mut qq = [0.0; MAX_NODES];
                assembly::balance(&ctx, sv, s.weight, &self.qp_data(q), &f, &s.solid, &s.fluid, &mut mq, &mut qq);
                for a in 0..sv.nen {
                    for i in 0..d {
                        m_loc[a][i] += mq[a][i];
                    }
                    q_loc[a] += qq[a];
                }
            }
            for (a, &node) in mesh.element(e).iter().enumerate() {
                for i in 0..d {
                    mom[node][i] += m_loc[a][i];
                }
                mass[node] += q_loc[a];
                let m: f64 = (0..d).map(|i| m_loc[a][i] * m_loc[a][i]).sum();
                mom_abs[node] += crate::math::sqrt(m);
                mass_abs[node] += q_loc[a].abs();
            }
        }
        // boundary loads enter with the sign of the model-based residual
        let mut mom_load = vec![[0.0; 3]; nn];
        let mut mass_load = vec![0.0; nn];
        for node in 0..nn {
            if let Some(o) = mom_rows {
                for i in 0..d {
                    let l = self.loads[node * per + o + i];
                    mom_load[node][i] = if model_based { l } else { -l };
                }
            }
            if let Some(o) = mass_rows {
                mass_load[node] = self.loads[node * per + o];
            }
        }
        let (mut rm, mut sm, mut rq, mut sq) = (0.0, 0.0, 0.0, 0.0);
        for node in 0..nn {
            if let Some(o) = mom_rows {
                for i in 0..d {
                    if self.dofs.is_constrained(node * per + o + i) {
                        continue;
                    }
                    let v = mom[node][i] + mom_load[node][i];
                    rm += v * v;
                    sm += mom_abs[node] * mom_abs[node] + mom_load[node][i] * mom_load[node][i];
                }
            }
            if let Some(o) = mass_rows {
                if self.dofs.is_constrained(node * per + o) {
                    continue;
                }
                let v = mass[node] + mass_load[node];
                rq += v * v;
                sq += mass_abs[node] * mass_abs[node] + mass_load[node] * mass_load[node];
            }
        }
        let rel = |r: f64, s: f64| if s > 0.0 { crate::math::sqrt(r / s) } else { crate::math::sqrt(r) };
        Ok(BalanceResiduals { momentum: rel(rm, sm), mass: rel(rq, sq) })
    }

    /// Integration-point weights in state order.
    pub fn weights(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.weight).collect()
    }

    /// Spatial dimension.
    pub fn dim(&self) -> Dim {
        self.problem.mesh.dim()
    }
}

#[cfg(test)]
mod tests;
