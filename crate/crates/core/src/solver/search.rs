//! Local step: nearest-neighbour projection of physical states onto the
//! material datasets, and initial data assignments.

use alloc::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::QuadPointState;
use crate::dataset::{DatasetFamily, PhaseDataset};
use crate::phase::{embed_fluid, embed_solid, FluidPoint, MetricSpec, PhasePoint, SolidPoint};
use crate::{Error, Result};

/// Fluid material data: one dataset, or a porosity-labelled family.
#[derive(Debug, Clone)]
pub enum FluidData {
    /// A single dataset used everywhere.
    Single(Arc<PhaseDataset<FluidPoint>>),
    /// Porosity-labelled datasets; each point searches the member whose
    /// label is closest to its current porosity.
    Family(Arc<DatasetFamily<FluidPoint>>),
}

impl FluidData {
    /// Member index for porosity `phi` (always 0 for a single dataset).
    pub fn select(&self, phi: f64) -> usize {
        match self {
            FluidData::Single(_) => 0,
            FluidData::Family(f) => f.select_index(phi),
        }
    }

    /// Dataset `i`.
    pub fn member(&self, i: usize) -> &PhaseDataset<FluidPoint> {
        match self {
            FluidData::Single(d) => d,
            FluidData::Family(f) => f.member(i),
        }
    }
}

/// Material datasets available to a run.
#[derive(Debug, Clone, Default)]
pub struct DataSources {
    /// Solid (strain, effective stress) data.
    pub solid: Option<Arc<PhaseDataset<SolidPoint>>>,
    /// Fluid (pressure gradient, flux) data.
    pub fluid: Option<FluidData>,
}

impl DataSources {
    /// Sources with a solid and a single fluid dataset.
    pub fn new(solid: Option<PhaseDataset<SolidPoint>>, fluid: Option<PhaseDataset<FluidPoint>>) -> Self {
        DataSources { solid: solid.map(Arc::new), fluid: fluid.map(|f| FluidData::Single(Arc::new(f))) }
    }
}

/// Which porosity picks the member of a porosity-labelled dataset family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MemberSelection {
    /// Porosity at the start of the time step, `(1 + ε_v,n) φ₀`. The member
    /// is fixed during the fixed-point iteration of a step, which avoids
    /// cycles of points whose porosity sits between two labels.
    #[default]
    StepStart,
    /// Porosity of the current iterate, `(1 + ε_v) φ₀`.
    Current,
}

impl MemberSelection {
    /// Porosity used for member selection at a point.
    pub fn porosity(self, s: &QuadPointState) -> f64 {
        match self {
            MemberSelection::StepStart => s.porosity0 * (1.0 + s.eps_vol_prev),
            MemberSelection::Current => s.porosity,
        }
    }
}

/// How data points are assigned before the first fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// Uniformly random indices from a seeded generator.
    Random {
        /// Generator seed.
        seed: u64,
    },
    /// The same data point everywhere: the one nearest to the given state
    /// (the zero state when `None`).
    Homogeneous {
        /// Target solid state.
        solid: Option<SolidPoint>,
        /// Target fluid state.
        fluid: Option<FluidPoint>,
    },
    /// Keep the current assignments (every point must already be assigned).
    CarryOver,
}

impl Default for InitMode {
    fn default() -> Self {
        InitMode::Homogeneous { solid: None, fluid: None }
    }
}

/// Outcome of one local step. A point counts once in `change_count` even
/// when both of its phases were reassigned.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SearchOutcome {
    /// Points whose assignment (index or family member) changed.
    pub change_count: usize,
    /// `Σ w d_s²` over integration points.
    pub solid_metric: f64,
    /// `Σ w d_f²` over integration points.
    pub fluid_metric: f64,
    /// Nearest-neighbour queries issued.
    pub queries: u64,
    /// Queries cross-checked against brute force.
    pub checked: u64,
    /// Cross-checks that disagreed (index or distance).
    pub mismatches: u64,
}

fn check(index: &crate::nns::SearchIndex, q: &[f64], nb: &crate::nns::Neighbor, out: &mut SearchOutcome) -> Result<()> {
    let bf = index.query_brute_force(q)?;
    out.checked += 1;
    if bf.index != nb.index || bf.dist_sq != nb.dist_sq {
        out.mismatches += 1;
        log::error!(
            "search mismatch: tree ({}, {:e}) vs brute force ({}, {:e})",
            nb.index,
            nb.dist_sq,
            bf.index,
            bf.dist_sq
        );
    }
    Ok(())
}

/// Projects every physical state onto the nearest data point.
///
/// Solid and fluid phases are searched independently (their distances are
/// decoupled). For dataset families the member is chosen from the current
/// porosity first (see [`MemberSelection`]), then the point within it.
pub fn local_search(
    states: &mut [QuadPointState],
    data: &DataSources,
    metric: &MetricSpec,
    search_solid: bool,
    search_fluid: bool,
    selection: MemberSelection,
    verify: bool,
) -> Result<SearchOutcome> {
    let mut out = SearchOutcome::default();
    let solid = if search_solid { Some(data.solid.as_ref().ok_or(Error::Empty("solid dataset"))?) } else { None };
    let fluid = if search_fluid { Some(data.fluid.as_ref().ok_or(Error::Empty("fluid dataset"))?) } else { None };
    for s in states.iter_mut() {
        let mut changed = false;
        if let Some(ds) = solid {
            let q = embed_solid(&s.solid, metric);
            let nb = ds.nearest_embedded(q.coords(), s.solid_index)?;
            out.queries += 1;
            if verify {
                check(ds.index().ok_or(Error::Empty("solid dataset"))?, q.coords(), &nb, &mut out)?;
            }
            changed |= s.solid_index != Some(nb.index);
            s.solid_index = Some(nb.index);
            s.solid_data = *ds.point(nb.index);
            s.solid_distance_sq = 0.5 * nb.dist_sq;
            out.solid_metric += s.weight * s.solid_distance_sq;
        }
        if let Some(fd) = fluid {
            let member = fd.select(selection.porosity(s));
            let ds = fd.member(member);
            let hint = if s.fluid_member == Some(member) { s.fluid_index } else { None };
            let q = embed_fluid(&s.fluid, metric);
            let nb = ds.nearest_embedded(q.coords(), hint)?;
            out.queries += 1;
            if verify {
                check(ds.index().ok_or(Error::Empty("fluid dataset"))?, q.coords(), &nb, &mut out)?;
            }
            changed |= s.fluid_member != Some(member) || s.fluid_index != Some(nb.index);
            s.fluid_member = Some(member);
            s.fluid_index = Some(nb.index);
            s.fluid_data = *ds.point(nb.index);
            s.fluid_distance_sq = 0.5 * nb.dist_sq;
            out.fluid_metric += s.weight * s.fluid_distance_sq;
        }
        if changed {
            out.change_count += 1;
        }
    }
    Ok(out)
}

/// Assigns initial data points to every integration point.
pub fn init_assignments(
    states: &mut [QuadPointState],
    data: &DataSources,
    metric: Option<&MetricSpec>,
    assign_solid: bool,
    assign_fluid: bool,
    mode: InitMode,
) -> Result<()> {
    let solid = if assign_solid { Some(data.solid.as_ref().ok_or(Error::Empty("solid dataset"))?) } else { None };
    let fluid = if assign_fluid { Some(data.fluid.as_ref().ok_or(Error::Empty("fluid dataset"))?) } else { None };
    if let Some(ds) = solid {
        if ds.is_empty() {
            return Err(Error::Empty("solid dataset"));
        }
    }
    match mode {
        InitMode::CarryOver => {
            let missing = states
                .iter()
                .any(|s| (solid.is_some() && s.solid_index.is_none()) || (fluid.is_some() && s.fluid_index.is_none()));
            if missing {
                return Err(Error::invalid("carry-over initialisation requires existing assignments"));
            }
            Ok(())
        }
        InitMode::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for s in states.iter_mut() {
                if let Some(ds) = solid {
                    let i = rng.gen_range(0..ds.len());
                    s.solid_index = Some(i);
                    s.solid_data = *ds.point(i);
                }
                if let Some(fd) = fluid {
                    let m = fd.select(s.porosity);
                    let ds = fd.member(m);
                    if ds.is_empty() {
                        return Err(Error::Empty("fluid dataset"));
                    }
                    let i = rng.gen_range(0..ds.len());
                    s.fluid_member = Some(m);
                    s.fluid_index = Some(i);
                    s.fluid_data = *ds.point(i);
                }
            }
            Ok(())
        }
        InitMode::Homogeneous { solid: target_s, fluid: target_f } => {
            let metric = metric.ok_or_else(|| Error::invalid("homogeneous initialisation needs a metric"))?;
            let dim = metric.dim();
            if let Some(ds) = solid {
                let t = target_s.unwrap_or_else(|| SolidPoint::zeros(dim));
                let i = ds.nearest(&t, metric)?.index;
                for s in states.iter_mut() {
                    s.solid_index = Some(i);
                    s.solid_data = *ds.point(i);
                }
            }
            if let Some(fd) = fluid {
                let t = target_f.unwrap_or_else(|| FluidPoint::zeros(dim));
                let mut cache: alloc::vec::Vec<Option<usize>> = alloc::vec::Vec::new();
                for s in states.iter_mut() {
                    let m = fd.select(s.porosity);
                    if cache.len() <= m {
                        cache.resize(m + 1, None);
                    }
                    let i = match cache[m] {
                        Some(i) => i,
                        None => {
                            let i = fd.member(m).nearest(&t, metric)?.index;
                            cache[m] = Some(i);
                            i
                        }
                    };
                    s.fluid_member = Some(m);
                    s.fluid_index = Some(i);
                    s.fluid_data = *fd.member(m).point(i);
                }
            }
            Ok(())
        }
    }
}
