//! Run configuration: a single, versioned JSON document per run.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "problem": "terzaghi",
//!   "formulation": "fully_dd",
//!   "backend": "kd_tree",
//!   "time": { "dt": 0.1, "t_end": 10.0 },
//!   "setup": { "traction": -0.9e9 },
//!   "datasets": { "fluid": "data/fluid.csv" },
//!   "solver": { "max_iterations": 200 },
//!   "output": { "dir": "out/terzaghi", "vtk_every": 10 }
//! }
//! ```
//!
//! `setup` holds the benchmark parameters; every field is optional and
//! defaults to the built-in preset of the chosen problem. All quantities
//! are SI (Pa, m, s, m², Pa·s). Relative file paths are resolved against
//! the directory of the configuration file.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ddporo_core::nns::SearchBackend;
use ddporo_core::problems::{
    with_counts, Benchmark, BereaConfig, FootingConfig, PlateHoleConfig, PoissonCubeConfig, RelaxationConfig,
    TerzaghiConfig,
};
use ddporo_core::solver::{FormulationKind, InitMode, MemberSelection, SolverConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Version written to and expected in every configuration document.
pub const SCHEMA_VERSION: u32 = 1;

/// Benchmark family of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// One-dimensional consolidation column.
    Terzaghi,
    /// Ramp-and-hold relaxation cylinder.
    Relaxation,
    /// Strip footing.
    Footing,
    /// Compressed plate with a hole.
    PlateHole,
    /// Heterogeneous sandstone block with porosity-labelled data.
    BereaLike,
    /// Manufactured steady diffusion in a cube.
    PoissonCube,
}

impl ProblemKind {
    /// All problems, in documentation order.
    pub const ALL: [ProblemKind; 6] = [
        ProblemKind::Terzaghi,
        ProblemKind::Relaxation,
        ProblemKind::Footing,
        ProblemKind::PlateHole,
        ProblemKind::BereaLike,
        ProblemKind::PoissonCube,
    ];

    /// Identifier used in configuration files.
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Terzaghi => "terzaghi",
            ProblemKind::Relaxation => "relaxation",
            ProblemKind::Footing => "footing",
            ProblemKind::PlateHole => "plate_hole",
            ProblemKind::BereaLike => "berea_like",
            ProblemKind::PoissonCube => "poisson_cube",
        }
    }

    /// Formulation used when the configuration does not name one.
    pub fn default_formulation(self) -> FormulationKind {
        match self {
            ProblemKind::BereaLike => FormulationKind::HybridFluidDd,
            ProblemKind::PoissonCube => FormulationKind::SteadyDiffusion,
            _ => FormulationKind::FullyDd,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Benchmark parameters of one problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Setup {
    /// Consolidation column.
    Terzaghi(TerzaghiConfig),
    /// Relaxation cylinder.
    Relaxation(RelaxationConfig),
    /// Strip footing.
    Footing(FootingConfig),
    /// Plate with a hole.
    PlateHole(PlateHoleConfig),
    /// Sandstone block.
    BereaLike(BereaConfig),
    /// Steady diffusion cube.
    PoissonCube(PoissonCubeConfig),
}

impl Setup {
    /// Built-in preset of a problem.
    pub fn preset(kind: ProblemKind) -> Setup {
        match kind {
            ProblemKind::Terzaghi => Setup::Terzaghi(Default::default()),
            ProblemKind::Relaxation => Setup::Relaxation(Default::default()),
            ProblemKind::Footing => Setup::Footing(Default::default()),
            ProblemKind::PlateHole => Setup::PlateHole(Default::default()),
            ProblemKind::BereaLike => Setup::BereaLike(Default::default()),
            ProblemKind::PoissonCube => Setup::PoissonCube(Default::default()),
        }
    }

    /// Problem family.
    pub fn kind(&self) -> ProblemKind {
        match self {
            Setup::Terzaghi(_) => ProblemKind::Terzaghi,
            Setup::Relaxation(_) => ProblemKind::Relaxation,
            Setup::Footing(_) => ProblemKind::Footing,
            Setup::PlateHole(_) => ProblemKind::PlateHole,
            Setup::BereaLike(_) => ProblemKind::BereaLike,
            Setup::PoissonCube(_) => ProblemKind::PoissonCube,
        }
    }

    /// The set-up as a benchmark.
    pub fn benchmark(&self) -> &dyn Benchmark {
        match self {
            Setup::Terzaghi(c) => c,
            Setup::Relaxation(c) => c,
            Setup::Footing(c) => c,
            Setup::PlateHole(c) => c,
            Setup::BereaLike(c) => c,
            Setup::PoissonCube(c) => c,
        }
    }

    /// Time step (s); 1 for the steady problem.
    pub fn dt(&self) -> f64 {
        match self {
            Setup::Terzaghi(c) => c.dt,
            Setup::Relaxation(c) => c.dt,
            Setup::Footing(c) => c.dt,
            Setup::PlateHole(c) => c.dt,
            Setup::BereaLike(c) => c.dt,
            Setup::PoissonCube(_) => 1.0,
        }
    }

    /// Number of time steps.
    pub fn num_steps(&self) -> usize {
        match self {
            Setup::Terzaghi(c) => c.num_steps,
            Setup::Relaxation(c) => c.num_steps,
            Setup::Footing(c) => c.num_steps,
            Setup::PlateHole(c) => c.num_steps,
            Setup::BereaLike(c) => c.num_steps,
            Setup::PoissonCube(_) => 1,
        }
    }

    /// Final time `num_steps · dt`.
    pub fn t_end(&self) -> f64 {
        self.num_steps() as f64 * self.dt()
    }

    /// Sets the time step and step count (ignored by the steady problem).
    pub fn set_time(&mut self, dt: f64, num_steps: usize) {
        let (d, n) = match self {
            Setup::Terzaghi(c) => (&mut c.dt, &mut c.num_steps),
            Setup::Relaxation(c) => (&mut c.dt, &mut c.num_steps),
            Setup::Footing(c) => (&mut c.dt, &mut c.num_steps),
            Setup::PlateHole(c) => (&mut c.dt, &mut c.num_steps),
            Setup::BereaLike(c) => (&mut c.dt, &mut c.num_steps),
            Setup::PoissonCube(_) => return,
        };
        *d = dt;
        *n = num_steps;
    }

    /// Applies a seed to every random choice of the set-up (initial data
    /// assignment, porosity field). The consolidation column starts from a
    /// homogeneous assignment and has no random input.
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Setup::Terzaghi(_) => {}
            Setup::Relaxation(c) => c.seed = seed,
            Setup::Footing(c) => c.seed = seed,
            Setup::PlateHole(c) => c.seed = seed,
            Setup::BereaLike(c) => c.porosity_seed = seed,
            Setup::PoissonCube(c) => c.seed = seed,
        }
    }

    /// Sets the sample count of every active data axis.
    pub fn set_points(&mut self, n: usize) {
        match self {
            Setup::Terzaghi(c) => *c = c.clone().with_points(n),
            Setup::Relaxation(c) => *c = c.clone().with_points(n),
            Setup::Footing(c) => {
                c.fluid_axes = with_counts(&c.fluid_axes, n);
                c.solid_axes = with_counts(&c.solid_axes, n);
            }
            Setup::PlateHole(c) => {
                c.fluid_axes = with_counts(&c.fluid_axes, n);
                c.solid_axes = with_counts(&c.solid_axes, n);
            }
            Setup::BereaLike(c) => c.fluid_axes = with_counts(&c.fluid_axes, n),
            Setup::PoissonCube(c) => c.points_per_axis = n,
        }
    }

    /// Parameters as a JSON value.
    pub fn to_value(&self) -> serde_json::Value {
        let v = match self {
            Setup::Terzaghi(c) => serde_json::to_value(c),
            Setup::Relaxation(c) => serde_json::to_value(c),
            Setup::Footing(c) => serde_json::to_value(c),
            Setup::PlateHole(c) => serde_json::to_value(c),
            Setup::BereaLike(c) => serde_json::to_value(c),
            Setup::PoissonCube(c) => serde_json::to_value(c),
        };
        v.expect("benchmark parameters are plain data")
    }

    /// Parses the parameters of `kind`; missing fields take preset values.
    pub fn from_value(kind: ProblemKind, value: &serde_json::Value) -> Result<Setup> {
        let value = if value.is_null() { serde_json::Value::Object(Default::default()) } else { value.clone() };
        Ok(match kind {
            ProblemKind::Terzaghi => Setup::Terzaghi(parse_at("setup", value)?),
            ProblemKind::Relaxation => Setup::Relaxation(parse_at("setup", value)?),
            ProblemKind::Footing => Setup::Footing(parse_at("setup", value)?),
            ProblemKind::PlateHole => Setup::PlateHole(parse_at("setup", value)?),
            ProblemKind::BereaLike => Setup::BereaLike(parse_at("setup", value)?),
            ProblemKind::PoissonCube => Setup::PoissonCube(parse_at("setup", value)?),
        })
    }
}

/// Deserializes `value`, reporting failures with the JSON path below `prefix`.
fn parse_at<T: DeserializeOwned>(prefix: &str, value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
        anyhow::anyhow!("config field `{at}`: {}", e.inner())
    })
}

/// Time discretization; `t_end` must be a multiple of `dt` (up to rounding).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    /// Time step (s).
    pub dt: f64,
    /// Final time (s).
    pub t_end: f64,
}

/// External inputs replacing generated data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetFiles {
    /// Solid dataset CSV (strain and stress columns).
    pub solid: Option<PathBuf>,
    /// Fluid dataset CSV (pressure-gradient and flux columns).
    pub fluid: Option<PathBuf>,
    /// Porosity–permeability table (`phi,k` columns) regenerating the
    /// fluid dataset family of the sandstone problem.
    pub permeability_table: Option<PathBuf>,
}

/// How data are assigned before the first iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitChoice {
    /// The preset's choice.
    #[default]
    Preset,
    /// Uniformly random, seeded.
    Random,
    /// The data point closest to the zero state, everywhere.
    Zero,
}

/// Fixed-point and Newton controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Fixed-point iteration cap per step.
    pub max_iterations: usize,
    /// Largest reassignment count accepted at the cap.
    pub oscillation_tolerance: usize,
    /// Relative Newton tolerance.
    pub newton_tolerance: f64,
    /// Newton iteration cap.
    pub newton_max_iterations: usize,
    /// Initial assignment.
    pub init: InitChoice,
    /// Porosity used to pick dataset-family members.
    pub member_selection: MemberSelection,
    /// Compare the constant operator at every global solve.
    pub verify_operator_constancy: bool,
    /// Cross-check every search against brute force.
    pub verify_search: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSettings {
            max_iterations: d.max_iterations,
            oscillation_tolerance: d.oscillation_tolerance,
            newton_tolerance: d.newton_tolerance,
            newton_max_iterations: d.newton_max_iterations,
            init: InitChoice::Preset,
            member_selection: d.member_selection,
            verify_operator_constancy: d.verify_operator_constancy,
            verify_search: d.verify_search,
        }
    }
}

/// Artifact settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    /// Output directory (overridden by `--out`).
    pub dir: Option<PathBuf>,
    /// Write a field file every this many steps (the last step is always
    /// written); 0 writes only the last step.
    pub vtk_every: usize,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings { dir: None, vtk_every: 1 }
    }
}

/// On-disk form of a configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema_version: u32,
    problem: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    formulation: Option<FormulationKind>,
    #[serde(default)]
    backend: SearchBackend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time: Option<TimeSpec>,
    #[serde(default)]
    setup: serde_json::Value,
    #[serde(default)]
    datasets: DatasetFiles,
    #[serde(default)]
    solver: SolverSettings,
    #[serde(default)]
    output: OutputSettings,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    /// Benchmark parameters (time step and count already applied).
    pub setup: Setup,
    /// Formulation.
    pub formulation: FormulationKind,
    /// Nearest-neighbour backend.
    pub backend: SearchBackend,
    /// Seed applied to the set-up, if any.
    pub seed: Option<u64>,
    /// External data files (absolute or relative to the working directory).
    pub datasets: DatasetFiles,
    /// Solver controls.
    pub solver: SolverSettings,
    /// Artifact settings.
    pub output: OutputSettings,
}

impl ProblemConfig {
    /// Preset configuration of a problem with its default formulation.
    pub fn preset(kind: ProblemKind) -> ProblemConfig {
        ProblemConfig {
            setup: Setup::preset(kind),
            formulation: kind.default_formulation(),
            backend: SearchBackend::KdTree,
            seed: None,
            datasets: DatasetFiles::default(),
            solver: SolverSettings::default(),
            output: OutputSettings::default(),
        }
    }

    /// Problem family.
    pub fn problem(&self) -> ProblemKind {
        self.setup.kind()
    }

    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<ProblemConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, base).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Parses and validates a JSON document; relative paths are resolved
    /// against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<ProblemConfig> {
        let mut de = serde_json::Deserializer::from_str(text);
        let doc: Document = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("config field `{path}`: {}", e.inner())
        })?;
        if doc.schema_version != SCHEMA_VERSION {
            bail!(
                "config field `schema_version`: unsupported version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            );
        }
        let mut setup = Setup::from_value(doc.problem, &doc.setup)?;
        if let Some(time) = doc.time {
            let steps = steps_for(time)?;
            setup.set_time(time.dt, steps);
        }
        if let Some(seed) = doc.seed {
            setup.set_seed(seed);
        }
        let resolve = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
        let datasets = DatasetFiles {
            solid: resolve(doc.datasets.solid),
            fluid: resolve(doc.datasets.fluid),
            permeability_table: resolve(doc.datasets.permeability_table),
        };
        let output = OutputSettings { dir: resolve(doc.output.dir), ..doc.output };
        let cfg = ProblemConfig {
            setup,
            formulation: doc.formulation.unwrap_or_else(|| doc.problem.default_formulation()),
            backend: doc.backend,
            seed: doc.seed,
            datasets,
            solver: doc.solver,
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes the configuration (paths as stored).
    pub fn to_json(&self) -> String {
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            problem: self.problem(),
            formulation: Some(self.formulation),
            backend: self.backend,
            seed: self.seed,
            time: None,
            setup: self.setup.to_value(),
            datasets: self.datasets.clone(),
            solver: self.solver,
            output: self.output.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("configuration is plain data")
    }

    /// Checks time-step, formulation and file invariants.
    pub fn validate(&self) -> Result<()> {
        let dt = self.setup.dt();
        if !(dt > 0.0 && dt.is_finite()) {
            bail!("config field `time.dt`: time step must be positive, got {dt}");
        }
        if self.setup.num_steps() == 0 {
            bail!("config field `time.t_end`: the final time must be at least one time step");
        }
        if self.setup.benchmark().problem(self.formulation).is_err() {
            bail!(
                "config field `formulation`: {} does not support the {} formulation",
                self.problem(),
                self.formulation.as_str()
            );
        }
        if self.solver.max_iterations == 0 {
            bail!("config field `solver.max_iterations`: must be at least 1");
        }
        for (field, path) in [
            ("datasets.solid", &self.datasets.solid),
            ("datasets.fluid", &self.datasets.fluid),
            ("datasets.permeability_table", &self.datasets.permeability_table),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    bail!("config field `{field}`: file {} does not exist", p.display());
                }
            }
        }
        if self.datasets.permeability_table.is_some() && self.problem() != ProblemKind::BereaLike {
            bail!("config field `datasets.permeability_table`: only the berea_like problem uses a permeability table");
        }
        Ok(())
    }

    /// Solver controls for the core crate.
    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let init = match s.init {
            InitChoice::Preset => self.setup.benchmark().init(self.formulation),
            InitChoice::Random => InitMode::Random { seed: self.seed.unwrap_or(0) },
            InitChoice::Zero => InitMode::default(),
        };
        SolverConfig {
            max_iterations: s.max_iterations,
            oscillation_tolerance: s.oscillation_tolerance,
            newton_tolerance: s.newton_tolerance,
            newton_max_iterations: s.newton_max_iterations,
            init,
            verify_operator_constancy: s.verify_operator_constancy,
            verify_search: s.verify_search,
            member_selection: s.member_selection,
        }
    }
}

/// Number of steps covering `[0, t_end]`.
fn steps_for(time: TimeSpec) -> Result<usize> {
    if !(time.dt > 0.0 && time.dt.is_finite()) {
        bail!("config field `time.dt`: time step must be positive, got {}", time.dt);
    }
    if !(time.t_end >= time.dt) {
        bail!("config field `time.t_end`: final time {} is shorter than one step {}", time.t_end, time.dt);
    }
    let steps = (time.t_end / time.dt).round();
    if ((steps * time.dt) - time.t_end).abs() > 1e-9 * time.t_end {
        bail!("config field `time.t_end`: {} is not a multiple of dt = {}", time.t_end, time.dt);
    }
    Ok(steps as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ProblemConfig> {
        ProblemConfig::from_json(text, Path::new("."))
    }

    #[test]
    fn minimal_document_uses_the_preset() {
        let cfg = parse(r#"{"schema_version": 1, "problem": "terzaghi"}"#).unwrap();
        assert_eq!(cfg, ProblemConfig::preset(ProblemKind::Terzaghi));
    }

    #[test]
    fn time_section_sets_step_and_count() {
        let cfg =
            parse(r#"{"schema_version": 1, "problem": "relaxation", "time": {"dt": 0.5, "t_end": 4.0}}"#).unwrap();
        assert_eq!(cfg.setup.dt(), 0.5);
        assert_eq!(cfg.setup.num_steps(), 8);
    }

    #[test]
    fn invalid_times_are_rejected() {
        for time in [r#"{"dt": 0.0, "t_end": 1.0}"#, r#"{"dt": 1.0, "t_end": 0.5}"#, r#"{"dt": 0.3, "t_end": 1.0}"#] {
            let text = format!(r#"{{"schema_version": 1, "problem": "terzaghi", "time": {time}}}"#);
            let err = parse(&text).unwrap_err().to_string();
            assert!(err.contains("time."), "{err}");
        }
        let err = parse(r#"{"schema_version": 1, "problem": "footing", "setup": {"dt": -1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("time.dt"), "{err}");
    }

    #[test]
    fn schema_errors_name_the_field_path() {
        let err = parse(r#"{"schema_version": 1, "problem": "terzaghi", "setup": {"material": {"young": "x"}}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("setup.material.young"), "{err}");
        let err = parse(r#"{"schema_version": 1, "problem": "terzaghi", "solver": {"max_iter": 3}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("solver"), "{err}");
        let err = parse(r#"{"schema_version": 2, "problem": "terzaghi"}"#).unwrap_err().to_string();
        assert!(err.contains("schema_version"), "{err}");
        let err = parse(r#"{"schema_version": 1, "problem": "cantilever"}"#).unwrap_err().to_string();
        assert!(err.contains("problem"), "{err}");
    }

    #[test]
    fn missing_files_and_unsupported_formulations_are_rejected() {
        let err = parse(r#"{"schema_version": 1, "problem": "terzaghi", "datasets": {"fluid": "no/such.csv"}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("datasets.fluid"), "{err}");
        let err = parse(r#"{"schema_version": 1, "problem": "berea_like", "formulation": "fully_dd"}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("formulation"), "{err}");
    }

    #[test]
    fn documents_round_trip() {
        for kind in ProblemKind::ALL {
            let mut cfg = ProblemConfig::preset(kind);
            cfg.seed = Some(5);
            cfg.setup.set_seed(5);
            let back = parse(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg, "{kind}");
        }
    }

    #[test]
    fn seeds_reach_the_random_inputs() {
        let cfg = parse(r#"{"schema_version": 1, "problem": "berea_like", "seed": 9}"#).unwrap();
        match cfg.setup {
            Setup::BereaLike(b) => assert_eq!(b.porosity_seed, 9),
            _ => unreachable!(),
        }
    }
}
