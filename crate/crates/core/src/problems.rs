//! Ready-made benchmark set-ups: consolidation column, ramp-and-hold
//! relaxation cylinder, strip footing, compressed plate with a hole, a
//! heterogeneous sandstone block with porosity-labelled permeability data,
//! and the manufactured steady-diffusion cube used for search timings.
//!
//! Every configuration builds a [`Problem`] for any [`FormulationKind`] it
//! supports, the datasets that formulation needs, and the initial data
//! assignment.
//!
//! Units: moduli and pressures are in Pa, lengths in m, times in s. The
//! listed intrinsic permeabilities are converted to hydraulic conductivity
//! `k/μ_f` and multiplied by [`CONDUCTIVITY_SCALE`]; with that factor the
//! consolidation times, pressure-gradient ranges and strain ranges of the
//! benchmarks are mutually consistent (without it every transient would be
//! over within microseconds).

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analytic::{RelaxationParams, TerzaghiParams};
use crate::constitutive::{
    calibrate_borja, synthetic_moduli_table, BiotConstants, BlendLaw, BlendParams, BorjaLaw, DarcyParams, HookeLaw,
    HookeParams, SharedLaw, SolidLaw,
};
use crate::dataset::{
    generate_grid, porosity_permeability_family, sample_fluid_law, sample_solid_law, AxisSpec, PhaseDataset,
    PorosityPermeabilitySpec,
};
use crate::fem::{meshes, DirichletBc, Field, Mesh, Profile, TimeFunction};
use crate::nns::SearchBackend;
use crate::phase::{FluidPoint, MetricSpec, SolidPoint};
use crate::solver::{DataSources, FluidData, Formulation, FormulationKind, InitMode, Load, Problem};
use crate::tensor::{Dim, SmallMat, SymTensor2, SymTensor4};
use crate::{Error, Result};

/// Factor applied to `k/μ_f` of the benchmark materials.
pub const CONDUCTIVITY_SCALE: f64 = 1e-6;

/// Isotropic poroelastic material as listed in the benchmark tables.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoroMaterial {
    /// Young's modulus (Pa).
    pub young: f64,
    /// Poisson's ratio.
    pub poisson: f64,
    /// Intrinsic permeability (m²).
    pub permeability: f64,
    /// Fluid viscosity (Pa·s).
    pub viscosity: f64,
    /// Biot coefficient.
    pub biot: f64,
    /// Biot modulus (Pa); `None` for an infinite modulus.
    pub modulus: Option<f64>,
}

impl PoroMaterial {
    /// Elastic parameters (plane strain in 2-D).
    pub fn hooke(&self) -> Result<HookeParams> {
        HookeParams::new(self.young, self.poisson)
    }

    /// Scaled hydraulic conductivity `CONDUCTIVITY_SCALE · k/μ_f`.
    pub fn conductivity(&self) -> f64 {
        CONDUCTIVITY_SCALE * self.permeability / self.viscosity
    }

    /// Biot constants without body force or source.
    pub fn biot_constants(&self, dim: Dim) -> Result<BiotConstants> {
        BiotConstants::from_modulus(dim, self.biot, self.modulus)
    }

    /// Gravity-free isotropic Darcy parameters.
    pub fn darcy(&self, dim: Dim) -> Result<DarcyParams> {
        DarcyParams::isotropic(dim, self.conductivity())
    }
}

/// Reference tensors of the energy metric.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum MetricWeights {
    /// `ℂ_s` isotropic from `(E, ν)`, `C_f = c_f I`.
    Isotropic {
        /// Young's modulus of `ℂ_s` (Pa).
        young: f64,
        /// Poisson's ratio of `ℂ_s`.
        poisson: f64,
        /// Fluid weight (m²/(Pa·s)), already scaled.
        fluid: f64,
    },
    /// `ℂ_s` = tangent of the blend law at a strain, `C_f = c_f I`.
    BlendTangent {
        /// Bulk modulus (Pa).
        kappa: f64,
        /// Shear modulus (Pa).
        shear: f64,
        /// Linearization strain (tensor components).
        strain: [f64; 3],
        /// Fluid weight (m²/(Pa·s)), already scaled.
        fluid: f64,
    },
}

impl MetricWeights {
    /// Builds the metric; `dt` weighs the fluid distance.
    pub fn metric(&self, dim: Dim, dt: f64) -> Result<MetricSpec> {
        let (cs, fluid) = match *self {
            MetricWeights::Isotropic { young, poisson, fluid } => {
                (SymTensor4::isotropic_young(dim, young, poisson), fluid)
            }
            MetricWeights::BlendTangent { kappa, shear, strain, fluid } => {
                if dim != Dim::Two {
                    return Err(Error::invalid("blend-tangent metric is defined for plane strain"));
                }
                let law = BlendLaw(BlendParams::new(kappa, shear)?);
                let eps = SymTensor2::from_components(dim, &strain)?;
                (law.stress_tangent(&eps)?.1, fluid)
            }
        };
        MetricSpec::from_reference(cs, SmallMat::scaled_identity(dim.d(), fluid), dt)
    }
}

/// Sets the sample count of every active axis.
pub fn with_counts(axes: &[AxisSpec], count: usize) -> Vec<AxisSpec> {
    axes.iter()
        .map(|a| match *a {
            AxisSpec::Active { min, max, .. } => AxisSpec::active(min, max, count),
            f => f,
        })
        .collect()
}

/// Samples isotropic Darcy's law `q = −K ∇p` on a gradient grid.
pub fn darcy_dataset(
    axes: &[AxisSpec],
    dim: Dim,
    conductivity: f64,
    metric: &MetricSpec,
    backend: SearchBackend,
) -> Result<PhaseDataset<FluidPoint>> {
    let grid = generate_grid(axes)?;
    let pts = sample_fluid_law(&grid, dim, |g| Ok(g.scaled(-conductivity)))?;
    PhaseDataset::new(dim, pts, metric, backend)
}

/// Samples a solid law on a strain grid.
pub fn solid_dataset(
    axes: &[AxisSpec],
    dim: Dim,
    law: &dyn SolidLaw,
    metric: &MetricSpec,
    backend: SearchBackend,
) -> Result<PhaseDataset<SolidPoint>> {
    let grid = generate_grid(axes)?;
    let pts = sample_solid_law(&grid, dim, |e| Ok(law.stress_tangent(e)?.0))?;
    PhaseDataset::new(dim, pts, metric, backend)
}

fn unsupported(name: &str, kind: FormulationKind) -> Error {
    Error::Problem(format!("{name} does not support the {} formulation", kind.as_str()))
}

fn formulation(kind: FormulationKind, law: SharedLaw, darcy: DarcyParams) -> Formulation {
    match kind {
        FormulationKind::FullyDd => Formulation::FullyDataDriven,
        FormulationKind::HybridFluidDd => Formulation::HybridFluid { solid: law },
        FormulationKind::HybridSolidDd => Formulation::HybridSolid { darcy },
        FormulationKind::ModelBased => Formulation::ModelBased { solid: law, darcy },
        FormulationKind::SteadyDiffusion => Formulation::SteadyDiffusion,
    }
}

/// Datasets required by a poroelastic formulation.
fn poro_data(
    kind: FormulationKind,
    metric: &MetricSpec,
    backend: SearchBackend,
    solid: impl FnOnce() -> Result<PhaseDataset<SolidPoint>>,
    fluid: impl FnOnce() -> Result<PhaseDataset<FluidPoint>>,
) -> Result<DataSources> {
    let _ = (metric, backend);
    let s = matches!(kind, FormulationKind::FullyDd | FormulationKind::HybridSolidDd);
    let f = matches!(kind, FormulationKind::FullyDd | FormulationKind::HybridFluidDd);
    Ok(DataSources::new(if s { Some(solid()?) } else { None }, if f { Some(fluid()?) } else { None }))
}

/// Common interface of the benchmark configurations.
pub trait Benchmark {
    /// Short identifier.
    fn name(&self) -> &'static str;
    /// Problem for a formulation.
    fn problem(&self, kind: FormulationKind) -> Result<Problem>;
    /// Datasets needed by a formulation (empty for the model-based one).
    fn data(&self, kind: FormulationKind, backend: SearchBackend) -> Result<DataSources>;
    /// Initial data assignment.
    fn init(&self, kind: FormulationKind) -> InitMode;
}

// ---------------------------------------------------------------------------
// Consolidation column
// ---------------------------------------------------------------------------

/// One-dimensional consolidation of a laterally confined column under a
/// suddenly applied top load (drained top, clamped base).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TerzaghiConfig {
    /// Material (Poisson's ratio must be zero for the series solution).
    pub material: PoroMaterial,
    /// Column width (m).
    pub width: f64,
    /// Column height (m).
    pub height: f64,
    /// Elements across the width.
    pub nx: usize,
    /// Elements along the height.
    pub ny: usize,
    /// Time step (s).
    pub dt: f64,
    /// Number of steps.
    pub num_steps: usize,
    /// Vertical top traction (Pa, negative in compression).
    pub traction: f64,
    /// Metric weights.
    pub metric: MetricWeights,
    /// Pressure-gradient axes `(∂p/∂x, ∂p/∂y)`.
    pub fluid_axes: Vec<AxisSpec>,
    /// Strain axes `(ε_xx, ε_yy, ε_xy)`.
    pub solid_axes: Vec<AxisSpec>,
    /// Initially assigned vertical strain (a point far from the solution).
    pub initial_strain: f64,
}

impl Default for TerzaghiConfig {
    fn default() -> Self {
        let material = PoroMaterial {
            young: 70e9,
            poisson: 0.0,
            permeability: 3.0612e-9,
            viscosity: 1e-3,
            biot: 1.0,
            modulus: Some(266.667e9),
        };
        let n = 16385;
        TerzaghiConfig {
            material,
            width: 0.1,
            height: 1.0,
            nx: 1,
            ny: 20,
            dt: 0.1,
            num_steps: 100,
            traction: -0.9e9,
            metric: MetricWeights::Isotropic { young: 70e9, poisson: 0.0, fluid: material.conductivity() },
            fluid_axes: vec![AxisSpec::Fixed(0.0), AxisSpec::active(-8.6e9, 4.3e9, n)],
            solid_axes: vec![AxisSpec::Fixed(0.0), AxisSpec::active(-0.026, 0.013, n), AxisSpec::Fixed(0.0)],
            initial_strain: 0.013,
        }
    }
}

impl TerzaghiConfig {
    /// Same set-up with `n` samples per active data axis.
    pub fn with_points(mut self, n: usize) -> Self {
        self.fluid_axes = with_counts(&self.fluid_axes, n);
        self.solid_axes = with_counts(&self.solid_axes, n);
        self
    }

    /// Series-solution parameters.
    pub fn analytic(&self) -> TerzaghiParams {
        TerzaghiParams {
            young: self.material.young,
            biot: self.material.biot,
            modulus: self.material.modulus.unwrap_or(f64::INFINITY),
            conductivity: self.material.conductivity(),
            height: self.height,
            traction: self.traction,
        }
    }

    /// Energy metric.
    pub fn metric_spec(&self) -> Result<MetricSpec> {
        self.metric.metric(Dim::Two, self.dt)
    }

    fn law(&self) -> Result<SharedLaw> {
        Ok(Arc::new(HookeLaw(self.material.hooke()?)))
    }

    /// Mesh of the column.
    pub fn mesh(&self) -> Result<Mesh> {
        meshes::terzaghi(self.width, self.height, self.nx, self.ny)
    }
}

impl Benchmark for TerzaghiConfig {
    fn name(&self) -> &'static str {
        "terzaghi"
    }

    fn problem(&self, kind: FormulationKind) -> Result<Problem> {
        if kind == FormulationKind::SteadyDiffusion {
            return Err(unsupported(self.name(), kind));
        }
        let dim = Dim::Two;
        Ok(Problem {
            name: self.name().into(),
            mesh: self.mesh()?,
            formulation: formulation(kind, self.law()?, self.material.darcy(dim)?),
            biot: self.material.biot_constants(dim)?,
            metric: Some(self.metric_spec()?),
            dirichlet: vec![
                DirichletBc::zero("left", Field::Displacement, 0),
                DirichletBc::zero("right", Field::Displacement, 0),
                DirichletBc::zero("bottom", Field::Displacement, 0),
                DirichletBc::zero("bottom", Field::Displacement, 1),
                DirichletBc::zero("top", Field::Pressure, 0),
            ],
            loads: vec![Load::Traction {
                set: "top".into(),
                comp: 1,
                value: TimeFunction::Constant { value: self.traction },
            }],
            dt: self.dt,
            num_steps: self.num_steps,
            quadrature_order: 2,
            porosity: None,
            element_laws: None,
        })
    }

    fn data(&self, kind: FormulationKind, backend: SearchBackend) -> Result<DataSources> {
        let dim = Dim::Two;
        let metric = self.metric_spec()?;
        let law = self.law()?;
        poro_data(
            kind,
            &metric,
            backend,
            || solid_dataset(&self.solid_axes, dim, law.as_ref(), &metric, backend),
            || darcy_dataset(&self.fluid_axes, dim, self.material.conductivity(), &metric, backend),
        )
    }

    fn init(&self, _kind: FormulationKind) -> InitMode {
        let dim = Dim::Two;
        let strain = SymTensor2::from_components(dim, &[0.0, self.initial_strain, 0.0]).expect("three components");
        let solid = self
            .material
            .hooke()
            .ok()
            .map(|h| SolidPoint { strain, stress: HookeLaw(h).stress_tangent(&strain).expect("linear law").0 });
        InitMode::Homogeneous { solid, fluid: None }
    }
}

// ---------------------------------------------------------------------------
// Relaxation cylinder
// ---------------------------------------------------------------------------

/// Laterally confined cylinder whose drained top is pushed down at a
/// constant rate and then held.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct RelaxationConfig {
    /// Material.
    pub material: PoroMaterial,
    /// Radius (m).
    pub radius: f64,
    /// Height (m).
    pub height: f64,
    /// Cross-section grid (`n × n` mapped onto the disk).
    pub n: usize,
    /// Element layers along the axis.
    pub nz: usize,
    /// Top displacement rate (m/s, negative downwards).
    pub rate: f64,
    /// End of the ramp (s).
    pub ramp_time: f64,
    /// Time step (s).
    pub dt: f64,
    /// Number of steps.
    pub num_steps: usize,
    /// Metric weights.
    pub metric: MetricWeights,
    /// Pressure-gradient axes `(x, y, z)`.
    pub fluid_axes: Vec<AxisSpec>,
    /// Strain axes `(xx, yy, zz, xy, yz, xz)`.
    pub solid_axes: Vec<AxisSpec>,
    /// Point whose nearest top node is monitored.
    pub monitor: [f64; 3],
    /// Seed of the random initial assignment.
    pub seed: u64,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        let material = PoroMaterial {
            young: 100e9,
            poisson: 0.25,
            permeability: 8.33e-8,
            viscosity: 1e-3,
            biot: 1.0,
            modulus: Some(2e19),
        };
        let f = AxisSpec::Fixed(0.0);
        RelaxationConfig {
            material,
            radius: 10.0,
            height: 10.0,
            n: 4,
            nz: 10,
            rate: -0.005,
            ramp_time: 2.0,
            dt: 0.1,
            num_steps: 100,
            metric: MetricWeights::Isotropic { young: 80e9, poisson: 0.225, fluid: CONDUCTIVITY_SCALE * 6.66e-5 },
            fluid_axes: vec![f, f, AxisSpec::active(-58e6, 500.0, 1000)],
            solid_axes: vec![f, f, AxisSpec::active(-0.0024, 0.0, 1000), f, f, f],
            monitor: [7.89, 7.89, 10.0],
            seed: 2020,
        }
    }
}

impl RelaxationConfig {
    /// Same set-up with `n` samples per active data axis.
    pub fn with_points(mut self, n: usize) -> Self {
        self.fluid_axes = with_counts(&self.fluid_axes, n);
        self.solid_axes = with_counts(&self.solid_axes, n);
        self
    }

    /// Series-solution parameters.
    pub fn analytic(&self) -> Result<RelaxationParams> {
        let (lambda, shear) = self.material.hooke()?.lame();
        Ok(RelaxationParams {
            shear,
            lambda,
            height: self.height,
            conductivity: self.material.conductivity(),
            rate: self.rate,
            ramp_time: self.ramp_time,
        })
    }

    /// Energy metric.
    pub fn metric_spec(&self) -> Result<MetricSpec> {
        self.metric.metric(Dim::Three, self.dt)
    }

    /// Mesh of the cylinder.
    pub fn mesh(&self) -> Result<Mesh> {
        meshes::cylinder(self.radius, self.height, self.n, self.nz)
    }

    /// Top node closest to the monitor point.
    pub fn monitor_node(&self, mesh: &Mesh) -> Result<usize> {
        let top = mesh.node_set("top")?;
        let d2 = |n: usize| {
            let x = mesh.node(n);
            (0..3).map(|i| (x[i] - self.monitor[i]) * (x[i] - self.monitor[i])).sum::<f64>()
        };
        top.iter().copied().min_by(|&a, &b| d2(a).total_cmp(&d2(b))).ok_or(Error::Empty("top node set"))
    }

    fn law(&self) -> Result<SharedLaw> {
        Ok(Arc::new(HookeLaw(self.material.hooke()?)))
    }
}

impl Benchmark for RelaxationConfig {
    fn name(&self) -> &'static str {
        "relaxation"
    }

    fn problem(&self, kind: FormulationKind) -> Result<Problem> {
        if kind == FormulationKind::SteadyDiffusion {
            return Err(unsupported(self.name(), kind));
        }
        let dim = Dim::Three;
        let mut dirichlet = Vec::new();
        for set in ["lateral", "top"] {
            dirichlet.push(DirichletBc::zero(set, Field::Displacement, 0));
            dirichlet.push(DirichletBc::zero(set, Field::Displacement, 1));
        }
        for c in 0..3 {
            dirichlet.push(DirichletBc::zero("bottom", Field::Displacement, c));
        }
        dirichlet.push(DirichletBc::new(
            "top",
            Field::Displacement,
            2,
            TimeFunction::RampHold { rate: self.rate, until: self.ramp_time },
        ));
        dirichlet.push(DirichletBc::zero("top", Field::Pressure, 0));
        Ok(Problem {
            name: self.name().into(),
            mesh: self.mesh()?,
            formulation: formulation(kind, self.law()?, self.material.darcy(dim)?),
            biot: self.material.biot_constants(dim)?,
            metric: Some(self.metric_spec()?),
            dirichlet,
            loads: Vec::new(),
            dt: self.dt,
            num_steps: self.num_steps,
            quadrature_order: 2,
            porosity: None,
            element_laws: None,
        })
    }

    fn data(&self, kind: FormulationKind, backend: SearchBackend) -> Result<DataSources> {
        let dim = Dim::Three;
        let metric = self.metric_spec()?;
        let law = self.law()?;
        poro_data(
            kind,
            &metric,
            backend,
            || solid_dataset(&self.solid_axes, dim, law.as_ref(), &metric, backend),
            || darcy_dataset(&self.fluid_axes, dim, self.material.conductivity(), &metric, backend),
        )
    }

    fn init(&self, _kind: FormulationKind) -> InitMode {
        InitMode::Random { seed: self.seed }
    }
}

// ---------------------------------------------------------------------------
// Strip footing
// ---------------------------------------------------------------------------

/// Plane-strain half domain under a strip footing loaded at a constant
/// rate; drained outside the footing.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FootingConfig {
    /// Material.
    pub material: PoroMaterial,
    /// Domain width `W` (m).
    pub width: f64,
    /// Domain height `H` (m).
    pub height: f64,
    /// Footing half-width `W_l` (m).
    pub load_width: f64,
    /// Elements along the width.
    pub nx: usize,
    /// Elements along the height.
    pub ny: usize,
    /// Footing pressure rate (Pa/s, negative in compression).
    pub load_rate: f64,
    /// Time step (s).
    pub dt: f64,
    /// Number of steps.
    pub num_steps: usize,
    /// Metric weights.
    pub metric: MetricWeights,
    /// Pressure-gradient axes.
    pub fluid_axes: Vec<AxisSpec>,
    /// Strain axes `(xx, yy, xy)`.
    pub solid_axes: Vec<AxisSpec>,
    /// Seed of the random initial assignment.
    pub seed: u64,
}

impl Default for FootingConfig {
    fn default() -> Self {
        let material =
            PoroMaterial { young: 30e9, poisson: 0.2, permeability: 1e-10, viscosity: 1e-3, biot: 1.0, modulus: None };
        FootingConfig {
            material,
            width: 10.0,
            height: 8.0,
            load_width: 2.0,
            nx: 20,
            ny: 16,
            load_rate: -50e6,
            dt: 1.0,
            num_steps: 20,
            metric: MetricWeights::Isotropic { young: 24e9, poisson: 0.3, fluid: CONDUCTIVITY_SCALE * 8e-8 },
            fluid_axes: vec![AxisSpec::active(-1.6e9, 1.6e9, 401), AxisSpec::active(-1.6e9, 1.6e9, 401)],
            solid_axes: vec![
                AxisSpec::active(-0.005, 0.014, 141),
                AxisSpec::active(-0.014, 0.005, 141),
                AxisSpec::active(-0.002, 0.012, 141),
            ],
            seed: 7,
        }
    }
}

impl FootingConfig {
    /// Energy metric.
    pub fn metric_spec(&self) -> Result<MetricSpec> {
        self.metric.metric(Dim::Two, self.dt)
    }

    fn law(&self) -> Result<SharedLaw> {
        Ok(Arc::new(HookeLaw(self.material.hooke()?)))
    }
}

impl Benchmark for FootingConfig {
    fn name(&self) -> &'static str {
        "footing"
    }

    fn problem(&self, kind: FormulationKind) -> Result<Problem> {
        if kind == FormulationKind::SteadyDiffusion {
            return Err(unsupported(self.name(), kind));
        }
        let dim = Dim::Two;
        Ok(Problem {
            name: self.name().into(),
            mesh: meshes::footing(self.width, self.height, self.load_width, self.nx, self.ny)?,
            formulation: formulation(kind, self.law()?, self.material.darcy(dim)?),
            biot: self.material.biot_constants(dim)?,
            metric: Some(self.metric_spec()?),
            dirichlet: vec![
                DirichletBc::zero("left", Field::Displacement, 0),
                DirichletBc::zero("right", Field::Displacement, 0),
                DirichletBc::zero("bottom", Field::Displacement, 0),
                DirichletBc::zero("bottom", Field::Displacement, 1),
                DirichletBc::zero("top_free", Field::Pressure, 0),
            ],
            loads: vec![Load::Traction {
                set: "footing".into(),
                comp: 1,
                value: TimeFunction::Linear { rate: self.load_rate },
            }],
            dt: self.dt,
            num_steps: self.num_steps,
            quadrature_order: 2,
            porosity: None,
            element_laws: None,
        })
    }

    fn data(&self, kind: FormulationKind, backend: SearchBackend) -> Result<DataSources> {
        let dim = Dim::Two;
        let metric = self.metric_spec()?;
        let law = self.law()?;
        poro_data(
            kind,
            &metric,
            backend,
            || solid_dataset(&self.solid_axes, dim, law.as_ref(), &metric, backend),
            || darcy_dataset(&self.fluid_axes, dim, self.material.conductivity(), &metric, backend),
        )
    }

    fn init(&self, _kind: FormulationKind) -> InitMode {
        InitMode::Random { seed: self.seed }
    }
}

// ---------------------------------------------------------------------------
// Plate with a hole
// ---------------------------------------------------------------------------

/// Square plate with a central hole squeezed between rigid top and bottom
/// plates; nonlinear (blend) skeleton, drained lateral sides.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PlateHoleConfig {
    /// Material (moduli converted to bulk/shear for the blend law).
    pub material: PoroMaterial,
    /// Plate edge length (m).
    pub length: f64,
    /// Hole radius (m).
    pub radius: f64,
    /// Elements along each side of a block.
    pub n_tan: usize,
    /// Elements from the hole to the outer boundary.
    pub n_rad: usize,
    /// Closing speed of the plates (m/s, each plate moves half of it).
    pub rate: f64,
    /// Time step (s).
    pub dt: f64,
    /// Number of steps.
    pub num_steps: usize,
    /// Metric weights.
    pub metric: MetricWeights,
    /// Pressure-gradient axes.
    pub fluid_axes: Vec<AxisSpec>,
    /// Strain axes `(xx, yy, xy)`.
    pub solid_axes: Vec<AxisSpec>,
    /// Seed of the random initial assignment.
    pub seed: u64,
}

impl Default for PlateHoleConfig {
    fn default() -> Self {
        let material = PoroMaterial {
            young: 30e9,
            poisson: 0.35,
            permeability: 3.0612e-9,
            viscosity: 1e-3,
            biot: 1.0,
            modulus: Some(600e9),
        };
        let blend = BlendParams::from_young(material.young, material.poisson).expect("valid moduli");
        PlateHoleConfig {
            material,
            length: 2.0,
            radius: 0.3,
            n_tan: 4,
            n_rad: 6,
            rate: 0.4,
            dt: 0.2,
            num_steps: 6,
            metric: MetricWeights::BlendTangent {
                kappa: blend.kappa,
                shear: blend.shear,
                strain: [0.1, -0.2, 0.05],
                fluid: CONDUCTIVITY_SCALE * 8e-7,
            },
            fluid_axes: vec![AxisSpec::active(-1.4e10, 1.4e10, 401), AxisSpec::active(-4.2e9, 4.2e9, 401)],
            solid_axes: vec![
                AxisSpec::active(0.0, 0.4, 121),
                AxisSpec::active(-0.64, 0.0, 121),
                AxisSpec::active(-0.18, 0.18, 121),
            ],
            seed: 11,
        }
    }
}

impl PlateHoleConfig {
    /// Energy metric.
    pub fn metric_spec(&self) -> Result<MetricSpec> {
        self.metric.metric(Dim::Two, self.dt)
    }

    /// Blend-law parameters of the material.
    pub fn blend(&self) -> Result<BlendParams> {
        BlendParams::from_young(self.material.young, self.material.poisson)
    }

    fn law(&self) -> Result<SharedLaw> {
        Ok(Arc::new(BlendLaw(self.blend()?)))
    }
}

impl Benchmark for PlateHoleConfig {
    fn name(&self) -> &'static str {
        "plate_hole"
    }

    fn problem(&self, kind: FormulationKind) -> Result<Problem> {
        if kind == FormulationKind::SteadyDiffusion {
            return Err(unsupported(self.name(), kind));
        }
        let dim = Dim::Two;
        let half = 0.5 * self.rate;
        Ok(Problem {
            name: self.name().into(),
            mesh: meshes::plate_with_hole(self.length, self.radius, self.n_tan, self.n_rad)?,
            formulation: formulation(kind, self.law()?, self.material.darcy(dim)?),
            biot: self.material.biot_constants(dim)?,
            metric: Some(self.metric_spec()?),
            dirichlet: vec![
                DirichletBc::zero("top", Field::Displacement, 0),
                DirichletBc::new("top", Field::Displacement, 1, TimeFunction::Linear { rate: -half }),
                DirichletBc::zero("bottom", Field::Displacement, 0),
                DirichletBc::new("bottom", Field::Displacement, 1, TimeFunction::Linear { rate: half }),
                DirichletBc::zero("left", Field::Pressure, 0),
                DirichletBc::zero("right", Field::Pressure, 0),
            ],
            loads: Vec::new(),
            dt: self.dt,
            num_steps: self.num_steps,
            quadrature_order: 2,
            porosity: None,
            element_laws: None,
        })
    }

    fn data(&self, kind: FormulationKind, backend: SearchBackend) -> Result<DataSources> {
        let dim = Dim::Two;
        let metric = self.metric_spec()?;
        let law = self.law()?;
        poro_data(
            kind,
            &metric,
            backend,
            || solid_dataset(&self.solid_axes, dim, law.as_ref(), &metric, backend),
            || darcy_dataset(&self.fluid_axes, dim, self.material.conductivity(), &metric, backend),
        )
    }

    fn init(&self, _kind: FormulationKind) -> InitMode {
        InitMode::Random { seed: self.seed }
    }
}

// ---------------------------------------------------------------------------
// Heterogeneous sandstone block
// ---------------------------------------------------------------------------

/// Elementwise seeded porosity field: independent normal samples with the
/// given mean and standard deviation, clipped to `[lo, hi]`.
pub fn porosity_field(num_elements: usize, mean: f64, std_dev: f64, clip: (f64, f64), seed: u64) -> Result<Vec<f64>> {
    if !(std_dev >= 0.0) || !(0.0 < clip.0 && clip.0 <= clip.1 && clip.1 < 1.0) {
        return Err(Error::invalid("porosity field needs std ≥ 0 and 0 < lo ≤ hi < 1"));
    }
    let normal = Normal::new(mean, std_dev).map_err(|e| Error::invalid(format!("porosity distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..num_elements).map(|_| normal.sample(&mut rng).clamp(clip.0, clip.1)).collect())
}

/// Square sandstone block in plane strain: lateral confinement, top pushed
/// down at a constant rate, pressure-dependent hyperelastic skeleton
/// calibrated per element, and porosity-labelled permeability data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BereaConfig {
    /// Block edge length (m).
    pub size: f64,
    /// Elements per side.
    pub n: usize,
    /// Biot coefficient.
    pub biot: f64,
    /// Biot modulus (Pa); `None` for an infinite modulus.
    pub modulus: Option<f64>,
    /// Lateral confining pressure on the right side (Pa, compression positive).
    pub confinement: f64,
    /// Top displacement rate (m/s, positive downwards).
    pub rate: f64,
    /// Time step (s).
    pub dt: f64,
    /// Number of steps.
    pub num_steps: usize,
    /// Mean initial porosity.
    pub porosity_mean: f64,
    /// Standard deviation of the initial porosity.
    pub porosity_std: f64,
    /// Seed of the porosity field.
    pub porosity_seed: u64,
    /// Moduli table `(φ, κ, μ)` used to calibrate each element; empty for
    /// the built-in synthetic table.
    pub moduli_table: Vec<(f64, f64, f64)>,
    /// Porosity–permeability family.
    pub family: PorosityPermeabilitySpec,
    /// External `(φ, k)` table replacing the synthetic family labels.
    pub permeability_table: Vec<(f64, f64)>,
    /// Pressure-gradient axes of every member.
    pub fluid_axes: Vec<AxisSpec>,
    /// Fluid metric weight (m²/(Pa·s)), already scaled.
    pub fluid_weight: f64,
    /// Solid metric reference `(E, ν)` (unused by the hybrid-fluid run).
    pub solid_weight: (f64, f64),
}

impl Default for BereaConfig {
    fn default() -> Self {
        let family = PorosityPermeabilitySpec { k_ref: CONDUCTIVITY_SCALE * 1.0e-13, ..Default::default() };
        BereaConfig {
            size: 4.0,
            n: 15,
            biot: 1.0,
            modulus: None,
            confinement: 6.4166e6,
            rate: 1.2e-3 / 86_400.0,
            dt: 43_200.0,
            num_steps: 100,
            porosity_mean: 0.25,
            porosity_std: 0.02,
            porosity_seed: 25,
            moduli_table: Vec::new(),
            fluid_weight: family.k_ref / family.viscosity,
            family,
            permeability_table: Vec::new(),
            fluid_axes: vec![AxisSpec::active(-3.0e6, 1.5e6, 101), AxisSpec::active(-9.0e7, 1.0e7, 101)],
            solid_weight: (20e9, 0.2),
        }
    }
}

impl BereaConfig {
    /// Energy metric.
    pub fn metric_spec(&self) -> Result<MetricSpec> {
        MetricWeights::Isotropic { young: self.solid_weight.0, poisson: self.solid_weight.1, fluid: self.fluid_weight }
            .metric(Dim::Two, self.dt)
    }

    /// Mesh of the block.
    pub fn mesh(&self) -> Result<Mesh> {
        meshes::square(self.size, self.n)
    }

    /// Initial porosity per element.
    pub fn porosity(&self) -> Result<Vec<f64>> {
        porosity_field(self.n * self.n, self.porosity_mean, self.porosity_std, (0.05, 0.5), self.porosity_seed)
    }

    /// Moduli table used for calibration.
    pub fn table(&self) -> Vec<(f64, f64, f64)> {
        if self.moduli_table.is_empty() {
            synthetic_moduli_table(0.15, 0.35, 21)
        } else {
            self.moduli_table.clone()
        }
    }

    /// Per-element laws calibrated to each initial porosity, measured
    /// relative to the in-situ (zero-strain) stress.
    pub fn element_laws(&self, porosity: &[f64]) -> Result<Vec<SharedLaw>> {
        let table = self.table();
        porosity
            .iter()
            .map(|&phi0| Ok(Arc::new(BorjaLaw::relative_to_initial(calibrate_borja(phi0, &table)?)) as SharedLaw))
            .collect()
    }

    /// `(φ, k)` pairs of the family (external table if given).
    pub fn permeability_pairs(&self) -> Result<Vec<(f64, f64)>> {
        if self.permeability_table.is_empty() {
            self.family.table()
        } else {
            Ok(self.permeability_table.clone())
        }
    }

    /// Fluid dataset family.
    pub fn fluid_family(&self, backend: SearchBackend) -> Result<crate::dataset::DatasetFamily<FluidPoint>> {
        let metric = self.metric_spec()?;
        if self.permeability_table.is_empty() {
            return porosity_permeability_family(&self.family, &self.fluid_axes, &metric, backend);
        }
        let members = self
            .permeability_table
            .iter()
            .map(|&(phi, k)| {
                darcy_dataset(
                    &self.fluid_axes,
                    Dim::Two,
                    CONDUCTIVITY_SCALE * k / self.family.viscosity,
                    &metric,
                    backend,
                )?
                .with_label(phi)
            })
            .collect::<Result<Vec<_>>>()?;
        crate::dataset::DatasetFamily::new(members)
    }

    /// Darcy parameters at the centre of the family (model-based twin).
    pub fn reference_darcy(&self) -> Result<DarcyParams> {
        let pairs = self.permeability_pairs()?;
        let mut ks: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        ks.sort_by(f64::total_cmp);
        let k = ks.get(ks.len() / 2).copied().ok_or(Error::Empty("permeability table"))?;
        let scale = if self.permeability_table.is_empty() { 1.0 } else { CONDUCTIVITY_SCALE };
        DarcyParams::isotropic(Dim::Two, scale * k / self.family.viscosity)
    }
}

impl Benchmark for BereaConfig {
    fn name(&self) -> &'static str {
        "berea_like"
    }

    fn problem(&self, kind: FormulationKind) -> Result<Problem> {
        if !matches!(kind, FormulationKind::HybridFluidDd | FormulationKind::ModelBased) {
            return Err(unsupported(self.name(), kind));
        }
        let dim = Dim::Two;
        let porosity = self.porosity()?;
        let laws = self.element_laws(&porosity)?;
        let law = laws[0].clone();
        Ok(Problem {
            name: self.name().into(),
            mesh: self.mesh()?,
            formulation: formulation(kind, law, self.reference_darcy()?),
            biot: BiotConstants::from_modulus(dim, self.biot, self.modulus)?,
            metric: Some(self.metric_spec()?),
            dirichlet: vec![
                DirichletBc::zero("left", Field::Displacement, 0),
                DirichletBc::zero("bottom", Field::Displacement, 1),
                DirichletBc::new("top", Field::Displacement, 1, TimeFunction::Linear { rate: -self.rate }),
                DirichletBc::zero("top", Field::Pressure, 0),
            ],
            loads: vec![Load::NormalPressure {
                set: "right".into(),
                value: TimeFunction::Constant { value: self.confinement },
            }],
            dt: self.dt,
            num_steps: self.num_steps,
            quadrature_order: 2,
            porosity: Some(porosity),
            element_laws: Some(laws),
        })
    }

    fn data(&self, kind: FormulationKind, backend: SearchBackend) -> Result<DataSources> {
        match kind {
            FormulationKind::HybridFluidDd => {
                Ok(DataSources { solid: None, fluid: Some(FluidData::Family(Arc::new(self.fluid_family(backend)?))) })
            }
            FormulationKind::ModelBased => Ok(DataSources::default()),
            k => Err(unsupported(self.name(), k)),
        }
    }

    fn init(&self, _kind: FormulationKind) -> InitMode {
        InitMode::default()
    }
}

// ---------------------------------------------------------------------------
// Manufactured steady diffusion
// ---------------------------------------------------------------------------

/// Unit cube centred at the origin with `p = x² + y² + z²` prescribed on the
/// whole boundary and the matching source; data-driven flux closure.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PoissonCubeConfig {
    /// Edge length (m).
    pub length: f64,
    /// Elements per edge.
    pub n: usize,
    /// Isotropic conductivity.
    pub conductivity: f64,
    /// Gradient range `[−g, g]` of every data axis.
    pub gradient_range: f64,
    /// Samples per data axis.
    pub points_per_axis: usize,
    /// Gauss points per direction.
    pub quadrature_order: usize,
    /// Seed of the random initial assignment.
    pub seed: u64,
}

impl Default for PoissonCubeConfig {
    fn default() -> Self {
        PoissonCubeConfig {
            length: 1.0,
            n: 16,
            conductivity: 1.0,
            gradient_range: 1.1,
            points_per_axis: 16,
            quadrature_order: 1,
            seed: 1,
        }
    }
}

impl PoissonCubeConfig {
    /// Energy metric (`C_f = k I`).
    pub fn metric_spec(&self) -> Result<MetricSpec> {
        MetricSpec::from_reference(
            SymTensor4::isotropic_young(Dim::Three, 1.0, 0.0),
            SmallMat::scaled_identity(3, self.conductivity),
            1.0,
        )
    }

    /// Gradient axes.
    pub fn axes(&self) -> Vec<AxisSpec> {
        let g = self.gradient_range;
        vec![AxisSpec::active(-g, g, self.points_per_axis); 3]
    }
}

impl Benchmark for PoissonCubeConfig {
    fn name(&self) -> &'static str {
        "poisson_cube"
    }

    fn problem(&self, kind: FormulationKind) -> Result<Problem> {
        if kind != FormulationKind::SteadyDiffusion {
            return Err(unsupported(self.name(), kind));
        }
        let dim = Dim::Three;
        let mut biot = BiotConstants::new(dim, 1.0, 0.0)?;
        biot.source = 6.0 * self.conductivity;
        Ok(Problem {
            name: self.name().into(),
            mesh: meshes::cube(self.length, self.n)?,
            formulation: Formulation::SteadyDiffusion,
            biot,
            metric: Some(self.metric_spec()?),
            dirichlet: vec![DirichletBc::new("boundary", Field::Pressure, 0, TimeFunction::Constant { value: 1.0 })
                .with_profile(Profile::SquaredDistance)],
            loads: Vec::new(),
            dt: 1.0,
            num_steps: 1,
            quadrature_order: self.quadrature_order,
            porosity: None,
            element_laws: None,
        })
    }

    fn data(&self, kind: FormulationKind, backend: SearchBackend) -> Result<DataSources> {
        if kind != FormulationKind::SteadyDiffusion {
            return Err(unsupported(self.name(), kind));
        }
        let ds = darcy_dataset(&self.axes(), Dim::Three, self.conductivity, &self.metric_spec()?, backend)?;
        Ok(DataSources::new(None, Some(ds)))
    }

    fn init(&self, _kind: FormulationKind) -> InitMode {
        InitMode::Random { seed: self.seed }
    }
}

/// Name of a benchmark set-up, for display.
pub fn describe(b: &dyn Benchmark, kind: FormulationKind) -> String {
    format!("{} / {}", b.name(), kind.as_str())
}
