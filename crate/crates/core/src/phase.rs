//! Phase-space points, energy-like distances and the isometric embedding.
//!
//! Solid states are strain / effective-stress pairs `(ε, σ′)`, fluid states
//! are pressure-gradient / Darcy-flux pairs `(∇p, q)`. Their distances are
//!
//! ```text
//! d_s² = ½ Δε : ℂ_s : Δε + ½ Δσ′ : 𝕊_s : Δσ′
//! d_f² = ½ Δr · C_f · Δr + ½ Δq · S_f · Δq
//! d²   = d_s² + Δt d_f²          (coupled)
//! ```
//!
//! With `K = FᵀF`, the map `embed(ε, σ′) = [F_Cs·ε̂ | F_Ss·σ̂′]` (hats denote
//! Kelvin vectors) turns these into plain Euclidean distances:
//! `‖embed(a) − embed(b)‖² = 2 d²(a, b)`. The factor 2 is deliberately left
//! in place; it does not change nearest-neighbour ordering.

use core::fmt;

use crate::tensor::{spd_factorize_with, Dim, FactorKind, SmallMat, SmallVec, SpdFactor, SymTensor2, SymTensor4};
use crate::{Error, Result};

/// The two material phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Phase {
    /// Solid skeleton: strain / effective stress.
    Solid,
    /// Pore fluid: pressure gradient / Darcy flux.
    Fluid,
}

/// A strain / effective-stress pair.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SolidPoint {
    /// Small strain `ε` (dimensionless).
    pub strain: SymTensor2,
    /// Effective stress `σ′` (Pa).
    pub stress: SymTensor2,
}

/// A pressure-gradient / Darcy-flux pair.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct FluidPoint {
    /// Pressure gradient `∇p` (Pa/m).
    pub grad_p: SmallVec,
    /// Darcy flux `q` (m/s).
    pub flux: SmallVec,
}

impl SolidPoint {
    /// Builds a point, checking that both tensors share a dimension.
    pub fn new(strain: SymTensor2, stress: SymTensor2) -> Result<Self> {
        if strain.dim() != stress.dim() {
            return Err(Error::shape("strain and stress dimensions differ"));
        }
        Ok(SolidPoint { strain, stress })
    }
}

impl FluidPoint {
    /// Builds a point from gradient and flux slices of equal length 2 or 3.
    pub fn new(grad_p: &[f64], flux: &[f64]) -> Result<Self> {
        Dim::from_d(grad_p.len())?;
        if grad_p.len() != flux.len() {
            return Err(Error::shape("pressure gradient and flux dimensions differ"));
        }
        Ok(FluidPoint { grad_p: SmallVec::from_slice(grad_p), flux: SmallVec::from_slice(flux) })
    }
}

/// Maximum embedded width (3-D solid: 6 + 6).
pub const MAX_EMBED: usize = 12;

/// A point in the Euclidean search space.
#[derive(Clone, Copy, PartialEq)]
pub struct EmbeddedPoint {
    len: usize,
    coords: [f64; MAX_EMBED],
}

impl EmbeddedPoint {
    /// From a coordinate slice (length ≤ 12).
    pub fn from_slice(xs: &[f64]) -> Result<Self> {
        if xs.len() > MAX_EMBED {
            return Err(Error::shape("embedded point longer than 12 coordinates"));
        }
        let mut coords = [0.0; MAX_EMBED];
        coords[..xs.len()].copy_from_slice(xs);
        Ok(EmbeddedPoint { len: xs.len(), coords })
    }

    /// Coordinates.
    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.len]
    }

    /// Squared Euclidean distance to another embedded point.
    pub fn dist_sq(&self, other: &EmbeddedPoint) -> f64 {
        self.coords().iter().zip(other.coords()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn concat(a: &SmallVec, b: &SmallVec) -> Self {
        let mut coords = [0.0; MAX_EMBED];
        let n = a.len();
        coords[..n].copy_from_slice(a.as_slice());
        coords[n..2 * n].copy_from_slice(b.as_slice());
        EmbeddedPoint { len: 2 * n, coords }
    }
}

impl fmt::Debug for EmbeddedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coords()).finish()
    }
}

/// Metric weights of the phase-space distances together with their factors.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpec {
    dim: Dim,
    cs: SymTensor4,
    ss: SymTensor4,
    cf: SmallMat,
    sf: SmallMat,
    dt_scale: f64,
    f_cs: SpdFactor,
    f_ss: SpdFactor,
    f_cf: SpdFactor,
    f_sf: SpdFactor,
}

impl MetricSpec {
    /// Builds a metric from all four weights; each must be symmetric positive definite.
    pub fn new(cs: SymTensor4, ss: SymTensor4, cf: SmallMat, sf: SmallMat, dt_scale: f64) -> Result<Self> {
        Self::with_factorization(cs, ss, cf, sf, dt_scale, FactorKind::SymmetricSqrt)
    }

    /// As [`MetricSpec::new`] with an explicit factorization method.
    pub fn with_factorization(
        cs: SymTensor4,
        ss: SymTensor4,
        cf: SmallMat,
        sf: SmallMat,
        dt_scale: f64,
        kind: FactorKind,
    ) -> Result<Self> {
        let dim = cs.dim();
        if ss.dim() != dim || cf.order() != dim.d() || sf.order() != dim.d() {
            return Err(Error::shape("metric weights have inconsistent dimensions"));
        }
        if !(dt_scale > 0.0) || !dt_scale.is_finite() {
            return Err(Error::invalid(alloc::format!("time-step weight must be positive, got {dt_scale}")));
        }
        Ok(MetricSpec {
            dim,
            f_cs: spd_factorize_with(cs.matrix(), kind)?,
            f_ss: spd_factorize_with(ss.matrix(), kind)?,
            f_cf: spd_factorize_with(&cf, kind)?,
            f_sf: spd_factorize_with(&sf, kind)?,
            cs,
            ss,
            cf,
            sf,
            dt_scale,
        })
    }

    /// Default weights: `𝕊_s = ℂ_s⁻¹`, `S_f = C_f⁻¹`.
    pub fn from_reference(cs: SymTensor4, cf: SmallMat, dt_scale: f64) -> Result<Self> {
        let ss = cs.inverse()?;
        let sf = *crate::tensor::spd_factorize(&cf)?.inverse_matrix();
        Self::new(cs, ss, cf, sf, dt_scale)
    }

    /// Copy with a different time-step weight.
    pub fn with_dt_scale(&self, dt_scale: f64) -> Result<Self> {
        if !(dt_scale > 0.0) || !dt_scale.is_finite() {
            return Err(Error::invalid(alloc::format!("time-step weight must be positive, got {dt_scale}")));
        }
        let mut m = self.clone();
        m.dt_scale = dt_scale;
        Ok(m)
    }

    /// Spatial dimension.
    pub fn dim(&self) -> Dim {
        self.dim
    }
    /// Strain weight `ℂ_s`.
    pub fn cs(&self) -> &SymTensor4 {
        &self.cs
    }
    /// Stress weight `𝕊_s`.
    pub fn ss(&self) -> &SymTensor4 {
        &self.ss
    }
    /// Pressure-gradient weight `C_f`.
    pub fn cf(&self) -> &SmallMat {
        &self.cf
    }
    /// Flux weight `S_f`.
    pub fn sf(&self) -> &SmallMat {
        &self.sf
    }
    /// Time-step weight of the fluid term in coupled distances.
    pub fn dt_scale(&self) -> f64 {
        self.dt_scale
    }
    /// `𝕊_s⁻¹` as a Kelvin matrix.
    pub fn ss_inverse(&self) -> &SmallMat {
        self.f_ss.inverse_matrix()
    }
    /// `S_f⁻¹`.
    pub fn sf_inverse(&self) -> &SmallMat {
        self.f_sf.inverse_matrix()
    }
    /// Factor of `ℂ_s`.
    pub fn factor_cs(&self) -> &SpdFactor {
        &self.f_cs
    }
    /// Factor of `𝕊_s`.
    pub fn factor_ss(&self) -> &SpdFactor {
        &self.f_ss
    }
    /// Factor of `C_f`.
    pub fn factor_cf(&self) -> &SpdFactor {
        &self.f_cf
    }
    /// Factor of `S_f`.
    pub fn factor_sf(&self) -> &SpdFactor {
        &self.f_sf
    }
}

fn check_dim(found: Dim, m: &MetricSpec) -> Result<()> {
    if found != m.dim() {
        return Err(Error::shape(alloc::format!(
            "point dimension {found:?} does not match metric dimension {:?}",
            m.dim()
        )));
    }
    Ok(())
}

/// `½ Δε:ℂ_s:Δε + ½ Δσ′:𝕊_s:Δσ′`.
pub fn solid_distance_sq(a: &SolidPoint, b: &SolidPoint, m: &MetricSpec) -> Result<f64> {
    check_dim(a.strain.dim(), m)?;
    check_dim(b.strain.dim(), m)?;
    let de = (a.strain - b.strain).kelvin();
    let ds = (a.stress - b.stress).kelvin();
    Ok(0.5 * m.cs.matrix().quad(&de) + 0.5 * m.ss.matrix().quad(&ds))
}

/// `½ Δr·C_f·Δr + ½ Δq·S_f·Δq`.
pub fn fluid_distance_sq(a: &FluidPoint, b: &FluidPoint, m: &MetricSpec) -> Result<f64> {
    if a.grad_p.len() != m.dim().d() || b.grad_p.len() != m.dim().d() {
        return Err(Error::shape("fluid point dimension does not match metric"));
    }
    let dr = a.grad_p - b.grad_p;
    let dq = a.flux - b.flux;
    Ok(0.5 * m.cf.quad(&dr) + 0.5 * m.sf.quad(&dq))
}

/// `d_s² + Δt d_f²`.
pub fn coupled_distance_sq(
    a_s: &SolidPoint,
    b_s: &SolidPoint,
    a_f: &FluidPoint,
    b_f: &FluidPoint,
    m: &MetricSpec,
) -> Result<f64> {
    if !(m.dt_scale > 0.0) {
        return Err(Error::invalid("time-step weight must be positive"));
    }
    Ok(solid_distance_sq(a_s, b_s, m)? + m.dt_scale * fluid_distance_sq(a_f, b_f, m)?)
}

/// `[F_Cs ε̂ | F_Ss σ̂′]`.
pub fn embed_solid(p: &SolidPoint, m: &MetricSpec) -> EmbeddedPoint {
    EmbeddedPoint::concat(&m.f_cs.apply(&p.strain.kelvin()), &m.f_ss.apply(&p.stress.kelvin()))
}

/// `[F_Cf r | F_Sf q]`.
pub fn embed_fluid(p: &FluidPoint, m: &MetricSpec) -> EmbeddedPoint {
    EmbeddedPoint::concat(&m.f_cf.apply(&p.grad_p), &m.f_sf.apply(&p.flux))
}

/// Inverse of [`embed_solid`].
pub fn unembed_solid(e: &[f64], m: &MetricSpec) -> Result<SolidPoint> {
    let n = m.dim.n();
    if e.len() != 2 * n {
        return Err(Error::shape(alloc::format!("solid embedding needs {} coordinates, got {}", 2 * n, e.len())));
    }
    let strain = m.f_cs.apply_inverse(&SmallVec::from_slice(&e[..n]));
    let stress = m.f_ss.apply_inverse(&SmallVec::from_slice(&e[n..]));
    Ok(SolidPoint {
        strain: SymTensor2::from_kelvin(strain.as_slice())?,
        stress: SymTensor2::from_kelvin(stress.as_slice())?,
    })
}

/// Inverse of [`embed_fluid`].
pub fn unembed_fluid(e: &[f64], m: &MetricSpec) -> Result<FluidPoint> {
    let d = m.dim.d();
    if e.len() != 2 * d {
        return Err(Error::shape(alloc::format!("fluid embedding needs {} coordinates, got {}", 2 * d, e.len())));
    }
    Ok(FluidPoint {
        grad_p: m.f_cf.apply_inverse(&SmallVec::from_slice(&e[..d])),
        flux: m.f_sf.apply_inverse(&SmallVec::from_slice(&e[d..])),
    })
}

/// Common interface of solid and fluid points, used by generic datasets.
pub trait PhasePoint: Copy + fmt::Debug + PartialEq + Send + Sync + 'static {
    /// Which phase the point belongs to.
    const PHASE: Phase;
    /// Spatial dimension.
    fn dim(&self) -> Dim;
    /// Number of scalar columns in a raw table row (`2n` or `2d`).
    fn width(dim: Dim) -> usize;
    /// Builds a point from a raw row `[state | conjugate]`.
    fn from_row(dim: Dim, row: &[f64]) -> Result<Self>;
    /// Raw row `[state | conjugate]` (tensor components in storage order).
    fn to_row(&self) -> alloc::vec::Vec<f64>;
    /// Euclidean embedding under the metric.
    fn embed(&self, m: &MetricSpec) -> EmbeddedPoint;
    /// Inverse embedding.
    fn unembed(e: &[f64], m: &MetricSpec) -> Result<Self>;
    /// Phase distance (without the coupled `Δt` weight).
    fn distance_sq(&self, other: &Self, m: &MetricSpec) -> Result<f64>;
    /// All-zero point.
    fn zeros(dim: Dim) -> Self;
    /// `true` when every component is finite.
    fn is_finite(&self) -> bool;
}

impl PhasePoint for SolidPoint {
    const PHASE: Phase = Phase::Solid;

    fn dim(&self) -> Dim {
        self.strain.dim()
    }
    fn width(dim: Dim) -> usize {
        2 * dim.n()
    }
    fn from_row(dim: Dim, row: &[f64]) -> Result<Self> {
        let n = dim.n();
        if row.len() != 2 * n {
            return Err(Error::shape(alloc::format!("solid row needs {} values, got {}", 2 * n, row.len())));
        }
        Ok(SolidPoint {
            strain: SymTensor2::from_components(dim, &row[..n])?,
            stress: SymTensor2::from_components(dim, &row[n..])?,
        })
    }
    fn to_row(&self) -> alloc::vec::Vec<f64> {
        let mut v = alloc::vec::Vec::with_capacity(12);
        v.extend_from_slice(self.strain.components());
        v.extend_from_slice(self.stress.components());
        v
    }
    fn embed(&self, m: &MetricSpec) -> EmbeddedPoint {
        embed_solid(self, m)
    }
    fn unembed(e: &[f64], m: &MetricSpec) -> Result<Self> {
        unembed_solid(e, m)
    }
    fn distance_sq(&self, other: &Self, m: &MetricSpec) -> Result<f64> {
        solid_distance_sq(self, other, m)
    }
    fn zeros(dim: Dim) -> Self {
        SolidPoint { strain: SymTensor2::zeros(dim), stress: SymTensor2::zeros(dim) }
    }
    fn is_finite(&self) -> bool {
        self.strain.is_finite() && self.stress.is_finite()
    }
}

impl PhasePoint for FluidPoint {
    const PHASE: Phase = Phase::Fluid;

    fn dim(&self) -> Dim {
        Dim::from_d(self.grad_p.len()).expect("fluid points are 2-D or 3-D")
    }
    fn width(dim: Dim) -> usize {
        2 * dim.d()
    }
    fn from_row(dim: Dim, row: &[f64]) -> Result<Self> {
        let d = dim.d();
        if row.len() != 2 * d {
            return Err(Error::shape(alloc::format!("fluid row needs {} values, got {}", 2 * d, row.len())));
        }
        FluidPoint::new(&row[..d], &row[d..])
    }
    fn to_row(&self) -> alloc::vec::Vec<f64> {
        let mut v = alloc::vec::Vec::with_capacity(6);
        v.extend_from_slice(self.grad_p.as_slice());
        v.extend_from_slice(self.flux.as_slice());
        v
    }
    fn embed(&self, m: &MetricSpec) -> EmbeddedPoint {
        embed_fluid(self, m)
    }
    fn unembed(e: &[f64], m: &MetricSpec) -> Result<Self> {
        unembed_fluid(e, m)
    }
    fn distance_sq(&self, other: &Self, m: &MetricSpec) -> Result<f64> {
        fluid_distance_sq(self, other, m)
    }
    fn zeros(dim: Dim) -> Self {
        FluidPoint { grad_p: SmallVec::zeros(dim.d()), flux: SmallVec::zeros(dim.d()) }
    }
    fn is_finite(&self) -> bool {
        crate::math::all_finite(self.grad_p.as_slice()) && crate::math::all_finite(self.flux.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn identity_metric(dim: Dim, dt: f64) -> MetricSpec {
        MetricSpec::new(
            SymTensor4::identity(dim),
            SymTensor4::identity(dim),
            SmallMat::identity(dim.d()),
            SmallMat::identity(dim.d()),
            dt,
        )
        .unwrap()
    }

    fn spd(n: usize, raw: &[f64]) -> SmallMat {
        let a = SmallMat::from_row_major(n, &raw[..n * n]).unwrap();
        a.transpose().matmul(&a) + SmallMat::scaled_identity(n, 0.5 * n as f64)
    }

    fn random_metric(dim: Dim, raw: &[f64]) -> MetricSpec {
        let n = dim.n();
        let d = dim.d();
        let cs = SymTensor4::from_kelvin_matrix(dim, spd(n, &raw[0..36])).unwrap();
        let ss = SymTensor4::from_kelvin_matrix(dim, spd(n, &raw[36..72])).unwrap();
        MetricSpec::new(cs, ss, spd(d, &raw[72..81]), spd(d, &raw[81..90]), 0.3).unwrap()
    }

    fn solid(dim: Dim, raw: &[f64]) -> SolidPoint {
        SolidPoint::from_row(dim, &raw[..2 * dim.n()]).unwrap()
    }

    fn fluid(dim: Dim, raw: &[f64]) -> FluidPoint {
        FluidPoint::from_row(dim, &raw[..2 * dim.d()]).unwrap()
    }

    #[test]
    fn trivial_distances() {
        let m = identity_metric(Dim::Two, 1.0);
        let a = SolidPoint::zeros(Dim::Two);
        assert_eq!(solid_distance_sq(&a, &a, &m).unwrap(), 0.0);
        let mut b = a;
        b.strain.set(0, 0, 1.0);
        assert_eq!(solid_distance_sq(&a, &b, &m).unwrap(), 0.5);

        let f = FluidPoint::zeros(Dim::Two);
        assert_eq!(fluid_distance_sq(&f, &f, &m).unwrap(), 0.0);
        let g = FluidPoint::new(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(fluid_distance_sq(&f, &g, &m).unwrap(), 0.5);
    }

    #[test]
    fn coupled_distance_arithmetic() {
        let m = identity_metric(Dim::Two, 2.0);
        let a = SolidPoint::zeros(Dim::Two);
        let mut b = a;
        b.strain.set(0, 0, 1.0); // solid part 0.5
        let f = FluidPoint::zeros(Dim::Two);
        let g = FluidPoint::new(&[math::sqrt(0.5), 0.0], &[0.0, 0.0]).unwrap(); // fluid part 0.25
        let d = coupled_distance_sq(&a, &b, &f, &g, &m).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        assert_eq!(coupled_distance_sq(&a, &a, &f, &f, &m).unwrap(), 0.0);
    }

    #[test]
    fn non_positive_time_weight_rejected() {
        let i = SymTensor4::identity(Dim::Two);
        let e = SmallMat::identity(2);
        assert!(MetricSpec::new(i, i, e, e, 0.0).is_err());
        assert!(MetricSpec::new(i, i, e, e, -1.0).is_err());
    }

    #[test]
    fn identity_embedding_is_kelvin_concat() {
        let m = identity_metric(Dim::Two, 1.0);
        let p = SolidPoint::from_row(Dim::Two, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let e = embed_solid(&p, &m);
        let s2 = core::f64::consts::SQRT_2;
        let expect = [1.0, 2.0, 3.0 * s2, 4.0, 5.0, 6.0 * s2];
        for (a, b) in e.coords().iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(embed_solid(&SolidPoint::zeros(Dim::Two), &m).coords().iter().all(|&x| x == 0.0));
        let back = unembed_solid(e.coords(), &m).unwrap();
        assert!((back.strain - p.strain).norm() < 1e-14 && (back.stress - p.stress).norm() < 1e-14);
        assert!(unembed_solid(&[0.0; 5], &m).is_err());
        assert!(unembed_fluid(&[0.0; 3], &m).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = identity_metric(Dim::Two, 1.0);
        let a = SolidPoint::zeros(Dim::Three);
        assert!(solid_distance_sq(&a, &a, &m).is_err());
    }

    fn raw(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0..1.0f64, n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn embedding_isometry(w in raw(90), pa in raw(12), pb in raw(12), three in any::<bool>()) {
            let dim = if three { Dim::Three } else { Dim::Two };
            let m = random_metric(dim, &w);
            let (a, b) = (solid(dim, &pa), solid(dim, &pb));
            let d = solid_distance_sq(&a, &b, &m).unwrap();
            let e = embed_solid(&a, &m).dist_sq(&embed_solid(&b, &m));
            prop_assert!((e - 2.0 * d).abs() <= 1e-12 * (1.0 + e));
            let (fa, fb) = (fluid(dim, &pa), fluid(dim, &pb));
            let d = fluid_distance_sq(&fa, &fb, &m).unwrap();
            let e = embed_fluid(&fa, &m).dist_sq(&embed_fluid(&fb, &m));
            prop_assert!((e - 2.0 * d).abs() <= 1e-12 * (1.0 + e));
        }

        #[test]
        fn round_trip(w in raw(90), pa in raw(12), cholesky in any::<bool>()) {
            let dim = Dim::Three;
            let base = random_metric(dim, &w);
            let kind = if cholesky { FactorKind::Cholesky } else { FactorKind::SymmetricSqrt };
            let m = MetricSpec::with_factorization(*base.cs(), *base.ss(), *base.cf(), *base.sf(), 1.0, kind).unwrap();
            let a = solid(dim, &pa);
            let back = unembed_solid(embed_solid(&a, &m).coords(), &m).unwrap();
            prop_assert!((back.strain - a.strain).norm() <= 1e-10 * (1.0 + a.strain.norm()));
            prop_assert!((back.stress - a.stress).norm() <= 1e-10 * (1.0 + a.stress.norm()));
            let f = fluid(dim, &pa);
            let back = unembed_fluid(embed_fluid(&f, &m).coords(), &m).unwrap();
            prop_assert!((back.grad_p - f.grad_p).norm() <= 1e-10 * (1.0 + f.grad_p.norm()));
            prop_assert!((back.flux - f.flux).norm() <= 1e-10 * (1.0 + f.flux.norm()));
        }

        #[test]
        fn distance_axioms(w in raw(90), pa in raw(12), pb in raw(12), pc in raw(12)) {
            let dim = Dim::Three;
            let m = random_metric(dim, &w);
            let (a, b, c) = (solid(dim, &pa), solid(dim, &pb), solid(dim, &pc));
            let d = |x: &SolidPoint, y: &SolidPoint| solid_distance_sq(x, y, &m).unwrap();
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &b) >= 0.0);
            let (ab, bc, ac) = (math::sqrt(d(&a, &b)), math::sqrt(d(&b, &c)), math::sqrt(d(&a, &c)));
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn coupled_matches_loop(w in raw(90), pa in raw(12), pb in raw(12)) {
            let dim = Dim::Two;
            let m = random_metric(dim, &w).with_dt_scale(0.7).unwrap();
            let (a, b) = (solid(dim, &pa), solid(dim, &pb));
            let (fa, fb) = (fluid(dim, &pa), fluid(dim, &pb));
            // component-wise oracle: index-form double sums
            let mut solid_part = 0.0;
            let de: Vec<f64> = (a.strain - b.strain).kelvin().as_slice().to_vec();
            let ds: Vec<f64> = (a.stress - b.stress).kelvin().as_slice().to_vec();
            for i in 0..3 { for j in 0..3 {
                solid_part += 0.5 * de[i] * m.cs().matrix().get(i, j) * de[j];
                solid_part += 0.5 * ds[i] * m.ss().matrix().get(i, j) * ds[j];
            }}
            let mut fluid_part = 0.0;
            for i in 0..2 { for j in 0..2 {
                let (ri, rj) = (fa.grad_p[i] - fb.grad_p[i], fa.grad_p[j] - fb.grad_p[j]);
                let (qi, qj) = (fa.flux[i] - fb.flux[i], fa.flux[j] - fb.flux[j]);
                fluid_part += 0.5 * ri * m.cf().get(i, j) * rj + 0.5 * qi * m.sf().get(i, j) * qj;
            }}
            let d = coupled_distance_sq(&a, &b, &fa, &fb, &m).unwrap();
            let oracle = solid_part + 0.7 * fluid_part;
            prop_assert!((d - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()));
        }

        #[test]
        fn embedded_argmin_matches_direct(w in raw(90), q in raw(12), seed in 0u64..1000) {
            let dim = Dim::Two;
            let m = random_metric(dim, &w);
            let query = solid(dim, &q);
            let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0 };
            let pts: Vec<SolidPoint> = (0..100).map(|_| {
                let r: Vec<f64> = (0..6).map(|_| next()).collect();
                solid(dim, &r)
            }).collect();
            let eq = embed_solid(&query, &m);
            let by_embed = (0..100).min_by(|&i, &j| eq.dist_sq(&embed_solid(&pts[i], &m)).total_cmp(&eq.dist_sq(&embed_solid(&pts[j], &m)))).unwrap();
            let by_dist = (0..100).min_by(|&i, &j| solid_distance_sq(&query, &pts[i], &m).unwrap().total_cmp(&solid_distance_sq(&query, &pts[j], &m).unwrap())).unwrap();
            if by_embed != by_dist {
                // only acceptable on an exact (rounding-level) tie
                let a = solid_distance_sq(&query, &pts[by_embed], &m).unwrap();
                let b = solid_distance_sq(&query, &pts[by_dist], &m).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
            }
        }
    }
}
