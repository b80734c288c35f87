//! Material databases: grid generation, law sampling and porosity families.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nns::{Neighbor, SearchBackend, SearchIndex, DEFAULT_LEAF_CAPACITY};
use crate::phase::{FluidPoint, MetricSpec, Phase, PhasePoint, SolidPoint};
use crate::tensor::{Dim, SmallVec, SymTensor2};
use crate::{Error, Result};

/// One coordinate axis of a sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AxisSpec {
    /// `count` equidistant samples on `[min, max]` (both ends included).
    Active {
        /// Lower end.
        min: f64,
        /// Upper end.
        max: f64,
        /// Number of samples (≥ 1; a single sample sits at `min`).
        count: usize,
    },
    /// Inactive axis held at a fixed value.
    Fixed(f64),
}

impl AxisSpec {
    /// Shorthand for an active axis.
    pub const fn active(min: f64, max: f64, count: usize) -> Self {
        AxisSpec::Active { min, max, count }
    }

    /// Number of samples along this axis.
    pub fn count(&self) -> usize {
        match *self {
            AxisSpec::Active { count, .. } => count,
            AxisSpec::Fixed(_) => 1,
        }
    }

    /// Sample `i` along this axis.
    pub fn value(&self, i: usize) -> f64 {
        match *self {
            AxisSpec::Fixed(v) => v,
            AxisSpec::Active { min, max, count } => {
                if count <= 1 {
                    min
                } else if i + 1 == count {
                    max
                } else {
                    min + (max - min) * (i as f64) / ((count - 1) as f64)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            AxisSpec::Active { min, max, count } => {
                if count == 0 {
                    return Err(Error::invalid("grid axis needs at least one sample"));
                }
                if !(min.is_finite() && max.is_finite()) {
                    return Err(Error::NonFinite("grid axis bounds"));
                }
                if min > max {
                    return Err(Error::invalid(alloc::format!("grid axis has min {min} > max {max}")));
                }
                Ok(())
            }
            AxisSpec::Fixed(v) if v.is_finite() => Ok(()),
            AxisSpec::Fixed(_) => Err(Error::NonFinite("fixed grid axis")),
        }
    }
}

/// Cartesian-product sample grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    data: Vec<f64>,
}

impl Grid {
    /// Number of columns.
    pub fn width(&self) -> usize {
        self.width
    }
    /// Number of rows.
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }
    /// `true` when there are no rows.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    /// Row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
    /// Iterator over rows.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width.max(1))
    }
}

/// Equidistant Cartesian-product grid; the last axis varies fastest.
pub fn generate_grid(axes: &[AxisSpec]) -> Result<Grid> {
    if axes.is_empty() {
        return Err(Error::Empty("grid axes"));
    }
    for a in axes {
        a.validate()?;
    }
    let total: usize = axes.iter().map(AxisSpec::count).product();
    let width = axes.len();
    let mut data = Vec::with_capacity(total * width);
    let mut counter = alloc::vec![0usize; width];
    for _ in 0..total {
        for (a, &c) in axes.iter().zip(&counter) {
            data.push(a.value(c));
        }
        for ax in (0..width).rev() {
            counter[ax] += 1;
            if counter[ax] < axes[ax].count() {
                break;
            }
            counter[ax] = 0;
        }
    }
    Ok(Grid { width, data })
}

/// How a dataset was produced (recorded in manifests).
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    /// Name of the constitutive law that was sampled.
    pub law: String,
    /// Grid axes of the sampled state variable.
    pub axes: Vec<AxisSpec>,
}

/// A database of phase points with its nearest-neighbour index.
#[derive(Debug, Clone)]
pub struct PhaseDataset<P: PhasePoint> {
    dim: Dim,
    points: Vec<P>,
    index: Option<SearchIndex>,
    label: Option<f64>,
    provenance: Option<Provenance>,
}

impl<P: PhasePoint> PhaseDataset<P> {
    /// Builds a dataset, embedding every point under `metric` and indexing it.
    pub fn new(dim: Dim, points: Vec<P>, metric: &MetricSpec, backend: SearchBackend) -> Result<Self> {
        if metric.dim() != dim {
            return Err(Error::shape("dataset and metric dimensions differ"));
        }
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::shape("dataset point dimension mismatch"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("dataset point"));
        }
        let index = if points.is_empty() {
            None
        } else {
            let k = P::width(dim);
            let mut flat = Vec::with_capacity(points.len() * k);
            for p in &points {
                flat.extend_from_slice(p.embed(metric).coords());
            }
            Some(SearchIndex::build(flat, k, backend, DEFAULT_LEAF_CAPACITY)?)
        };
        Ok(PhaseDataset { dim, points, index, label: None, provenance: None })
    }

    /// Attaches a porosity label (must lie in `(0, 1)`).
    pub fn with_label(mut self, label: f64) -> Result<Self> {
        if !(label > 0.0 && label < 1.0) {
            return Err(Error::invalid(alloc::format!("porosity label must lie in (0,1), got {label}")));
        }
        self.label = Some(label);
        Ok(self)
    }

    /// Attaches generation metadata.
    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    /// Which phase the points belong to.
    pub fn phase(&self) -> Phase {
        P::PHASE
    }
    /// Spatial dimension.
    pub fn dim(&self) -> Dim {
        self.dim
    }
    /// Stored points.
    pub fn points(&self) -> &[P] {
        &self.points
    }
    /// Point `i`.
    pub fn point(&self, i: usize) -> &P {
        &self.points[i]
    }
    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }
    /// `true` when empty.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    /// Porosity label.
    pub fn label(&self) -> Option<f64> {
        self.label
    }
    /// Generation metadata.
    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }
    /// Search backend in use.
    pub fn backend(&self) -> SearchBackend {
        self.index.as_ref().map_or(SearchBackend::KdTree, SearchIndex::backend)
    }
    /// The underlying search index (absent for empty datasets).
    pub fn index(&self) -> Option<&SearchIndex> {
        self.index.as_ref()
    }
    /// Embedded coordinates of point `i`.
    pub fn embedded(&self, i: usize) -> &[f64] {
        self.index.as_ref().expect("non-empty dataset").point(i)
    }

    /// Rebuilds the search index with another backend.
    pub fn rebuild(&self, metric: &MetricSpec, backend: SearchBackend) -> Result<Self> {
        let mut d = Self::new(self.dim, self.points.clone(), metric, backend)?;
        d.label = self.label;
        d.provenance = self.provenance.clone();
        Ok(d)
    }

    /// Nearest stored point to an embedded query; `hint` seeds the search.
    pub fn nearest_embedded(&self, q: &[f64], hint: Option<usize>) -> Result<Neighbor> {
        self.index.as_ref().ok_or(Error::Empty("dataset"))?.query_hinted(q, hint)
    }

    /// Nearest stored point to a physical state.
    pub fn nearest(&self, p: &P, metric: &MetricSpec) -> Result<Neighbor> {
        self.nearest_embedded(p.embed(metric).coords(), None)
    }
}

/// Samples a fluid law on a grid of pressure gradients (columns `r_1..r_d`).
pub fn sample_fluid_law(grid: &Grid, dim: Dim, law: impl Fn(&SmallVec) -> Result<SmallVec>) -> Result<Vec<FluidPoint>> {
    if grid.width() != dim.d() {
        return Err(Error::shape(alloc::format!("fluid grid needs {} columns, got {}", dim.d(), grid.width())));
    }
    grid.rows()
        .map(|r| {
            let g = SmallVec::from_slice(r);
            let q = law(&g)?;
            Ok(FluidPoint { grad_p: g, flux: q })
        })
        .collect()
}

/// Samples a solid law on a grid of strains (columns in tensor storage order).
pub fn sample_solid_law(
    grid: &Grid,
    dim: Dim,
    law: impl Fn(&SymTensor2) -> Result<SymTensor2>,
) -> Result<Vec<SolidPoint>> {
    if grid.width() != dim.n() {
        return Err(Error::shape(alloc::format!("solid grid needs {} columns, got {}", dim.n(), grid.width())));
    }
    grid.rows()
        .map(|r| {
            let e = SymTensor2::from_components(dim, r)?;
            let s = law(&e)?;
            Ok(SolidPoint { strain: e, stress: s })
        })
        .collect()
}

/// Porosity-labelled datasets sorted by label.
#[derive(Debug, Clone)]
pub struct DatasetFamily<P: PhasePoint> {
    members: Vec<PhaseDataset<P>>,
}

impl<P: PhasePoint> DatasetFamily<P> {
    /// Builds a family; members are sorted and labels must be distinct.
    pub fn new(mut members: Vec<PhaseDataset<P>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Empty("dataset family"));
        }
        if members.iter().any(|m| m.label().is_none()) {
            return Err(Error::invalid("every family member needs a porosity label"));
        }
        let dim = members[0].dim();
        if members.iter().any(|m| m.dim() != dim) {
            return Err(Error::shape("family members have different dimensions"));
        }
        members.sort_by(|a, b| a.label().unwrap().total_cmp(&b.label().unwrap()));
        if members.windows(2).any(|w| w[0].label() >= w[1].label()) {
            return Err(Error::invalid("porosity labels must be distinct"));
        }
        Ok(DatasetFamily { members })
    }

    /// Members in ascending label order.
    pub fn members(&self) -> &[PhaseDataset<P>] {
        &self.members
    }

    /// Labels in ascending order.
    pub fn labels(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.label().unwrap()).collect()
    }

    /// Index of the member whose label is closest to `phi` (lower label on ties).
    pub fn select_index(&self, phi: f64) -> usize {
        let i = self.members.partition_point(|m| m.label().unwrap() < phi);
        if i == 0 {
            return 0;
        }
        if i == self.members.len() {
            return i - 1;
        }
        let below = phi - self.members[i - 1].label().unwrap();
        let above = self.members[i].label().unwrap() - phi;
        if above < below {
            i
        } else {
            i - 1
        }
    }

    /// Member `i`.
    pub fn member(&self, i: usize) -> &PhaseDataset<P> {
        &self.members[i]
    }
}

/// Member of `family` whose label is closest to `phi` (lower label on ties).
pub fn select_dataset_by_porosity<P: PhasePoint>(family: &DatasetFamily<P>, phi: f64) -> Result<&PhaseDataset<P>> {
    if !phi.is_finite() {
        return Err(Error::NonFinite("porosity"));
    }
    Ok(family.member(family.select_index(phi)))
}

/// Parameters of the synthetic porosity–permeability family.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PorosityPermeabilitySpec {
    /// Number of porosity labels.
    pub labels: usize,
    /// Smallest porosity label.
    pub phi_min: f64,
    /// Largest porosity label.
    pub phi_max: f64,
    /// Permeability at the centre of the porosity range (m²).
    pub k_ref: f64,
    /// Trend `d log10(k) / dφ`.
    pub log10_slope: f64,
    /// Amplitude of the seeded oscillation in `log10(k)`.
    pub log10_jitter: f64,
    /// Fluid viscosity (Pa·s).
    pub viscosity: f64,
    /// Seed of the oscillatory map.
    pub seed: u64,
}

impl Default for PorosityPermeabilitySpec {
    fn default() -> Self {
        PorosityPermeabilitySpec {
            labels: 84,
            phi_min: 0.22,
            phi_max: 0.28,
            k_ref: 1.0e-13,
            log10_slope: 10.0,
            log10_jitter: 0.3,
            viscosity: 1.0e-3,
            seed: 84,
        }
    }
}

impl PorosityPermeabilitySpec {
    /// `(φ, k)` pairs: uniform labels, log-linear trend plus a seeded
    /// alternating jitter, which makes the map deliberately non-smooth.
    pub fn table(&self) -> Result<Vec<(f64, f64)>> {
        if self.labels == 0 {
            return Err(Error::Empty("porosity labels"));
        }
        if !(0.0 < self.phi_min && self.phi_min <= self.phi_max && self.phi_max < 1.0) {
            return Err(Error::invalid("porosity range must satisfy 0 < min <= max < 1"));
        }
        if self.labels > 1 && self.phi_min == self.phi_max {
            return Err(Error::invalid("several labels need a non-degenerate porosity range"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let axis = AxisSpec::active(self.phi_min, self.phi_max, self.labels);
        let centre = 0.5 * (self.phi_min + self.phi_max);
        Ok((0..self.labels)
            .map(|i| {
                let phi = axis.value(i);
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let jitter = self.log10_jitter * sign * rng.gen_range(0.3..1.0);
                let log10k = libm::log10(self.k_ref) + self.log10_slope * (phi - centre) + jitter;
                (phi, libm::pow(10.0, log10k))
            })
            .collect())
    }
}

/// Generates a porosity-labelled family of isotropic Darcy datasets.
///
/// Each member samples `q = −(k(φ)/μ) ∇p` on the pressure-gradient grid
/// described by `axes` (one entry per spatial coordinate).
pub fn porosity_permeability_family(
    spec: &PorosityPermeabilitySpec,
    axes: &[AxisSpec],
    metric: &MetricSpec,
    backend: SearchBackend,
) -> Result<DatasetFamily<FluidPoint>> {
    let dim = metric.dim();
    if axes.len() != dim.d() {
        return Err(Error::shape("one gradient axis per spatial coordinate is required"));
    }
    let grid = generate_grid(axes)?;
    let mut members = Vec::with_capacity(spec.labels);
    for (phi, k) in spec.table()? {
        let cond = k / spec.viscosity;
        let pts = sample_fluid_law(&grid, dim, |g| Ok(g.scaled(-cond)))?;
        let ds = PhaseDataset::new(dim, pts, metric, backend)?
            .with_label(phi)?
            .with_provenance(Provenance { law: alloc::format!("darcy(k={k:e})"), axes: axes.to_vec() });
        members.push(ds);
    }
    DatasetFamily::new(members)
}
