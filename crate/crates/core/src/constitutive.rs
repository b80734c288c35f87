//! Model-based constitutive laws and Biot constants.
//!
//! Solid laws are evaluated in three dimensions; plane problems pad the
//! strain with zero out-of-plane components (plane strain) and keep the
//! in-plane block of stress and tangent.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::tensor::{lame, Dim, SmallMat, SmallVec, SymTensor2, SymTensor4};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Biot constants
// ---------------------------------------------------------------------------

/// Coupling constants of the Biot mass balance.
#[derive(Debug, Clone, PartialEq)]
pub struct BiotConstants {
    /// Biot coefficient `B` (0 ≤ B ≤ 1).
    pub b: f64,
    /// Inverse Biot modulus `1/M` (1/Pa); 0 represents `M = ∞`.
    pub inv_m: f64,
    /// Body force `γ` (N/m³), one entry per spatial coordinate.
    pub gamma: SmallVec,
    /// Volumetric source `s` (1/s).
    pub source: f64,
}

impl BiotConstants {
    /// Constants with zero body force and source.
    pub fn new(dim: Dim, b: f64, inv_m: f64) -> Result<Self> {
        let c = BiotConstants { b, inv_m, gamma: SmallVec::zeros(dim.d()), source: 0.0 };
        c.validate()?;
        Ok(c)
    }

    /// Constants from a finite or infinite (`None`) Biot modulus.
    pub fn from_modulus(dim: Dim, b: f64, m: Option<f64>) -> Result<Self> {
        let inv_m = match m {
            None => 0.0,
            Some(m) if m > 0.0 => 1.0 / m,
            Some(m) => return Err(Error::invalid(alloc::format!("Biot modulus must be positive, got {m}"))),
        };
        Self::new(dim, b, inv_m)
    }

    /// Checks `0 ≤ B ≤ 1` and `1/M ≥ 0`.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::invalid(alloc::format!("Biot coefficient must lie in [0,1], got {}", self.b)));
        }
        if !(self.inv_m >= 0.0) || !self.inv_m.is_finite() {
            return Err(Error::invalid(alloc::format!("inverse Biot modulus must be >= 0, got {}", self.inv_m)));
        }
        if !math::all_finite(self.gamma.as_slice()) || !self.source.is_finite() {
            return Err(Error::NonFinite("Biot body force or source"));
        }
        Ok(())
    }
}

/// Micro-mechanical inputs of [`compute_biot`].
#[derive(Debug, Clone, PartialEq)]
pub struct BiotInputs {
    /// Drained bulk modulus of the skeleton `K` (Pa).
    pub k: f64,
    /// Inverse grain bulk modulus `1/K_s` (1/Pa); 0 for incompressible grains.
    pub inv_ks: f64,
    /// Fluid bulk modulus `K_f` (Pa).
    pub kf: f64,
    /// Porosity `φ_f`.
    pub porosity: f64,
    /// Grain density `ρ_s` (kg/m³).
    pub rho_s: f64,
    /// Fluid density `ρ_f` (kg/m³).
    pub rho_f: f64,
    /// Gravitational acceleration vector (m/s²).
    pub g: SmallVec,
}

/// `B = 1 − K/K_s`, `1/M = (B − φ)/K_s + φ/K_f`, `γ = ((1−φ)ρ_s + φρ_f) g`.
pub fn compute_biot(inp: &BiotInputs) -> Result<BiotConstants> {
    if !(inp.kf > 0.0) || !(inp.inv_ks >= 0.0) {
        return Err(Error::invalid("fluid and grain bulk moduli must be positive"));
    }
    if !(0.0..=1.0).contains(&inp.porosity) {
        return Err(Error::invalid("porosity must lie in [0,1]"));
    }
    let b = 1.0 - inp.k * inp.inv_ks;
    // M = K_s K_f / (K_f (B − φ) + K_s φ); written with 1/K_s to allow K_s = ∞
    let inv_m = (b - inp.porosity) * inp.inv_ks + inp.porosity / inp.kf;
    if inv_m == 0.0 {
        return Err(Error::invalid("Biot modulus denominator vanishes"));
    }
    let rho = (1.0 - inp.porosity) * inp.rho_s + inp.porosity * inp.rho_f;
    let c = BiotConstants { b, inv_m, gamma: inp.g.scaled(rho), source: 0.0 };
    c.validate()?;
    Ok(c)
}

// ---------------------------------------------------------------------------
// Linear laws
// ---------------------------------------------------------------------------

/// Isotropic linear elasticity.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HookeParams {
    /// Young's modulus `E` (Pa).
    pub young: f64,
    /// Poisson's ratio `ν`.
    pub poisson: f64,
}

impl HookeParams {
    /// Validated parameters.
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !(poisson > -1.0 && poisson < 0.5) {
            return Err(Error::invalid(alloc::format!("invalid elastic constants E={young}, nu={poisson}")));
        }
        Ok(HookeParams { young, poisson })
    }

    /// Lamé constants `(λ, μ)`.
    pub fn lame(&self) -> (f64, f64) {
        lame(self.young, self.poisson)
    }

    /// Elasticity tensor (plane strain in 2-D).
    pub fn tangent(&self, dim: Dim) -> SymTensor4 {
        SymTensor4::isotropic_young(dim, self.young, self.poisson)
    }

    /// Constrained (oedometric) modulus `λ + 2μ`.
    pub fn oedometric(&self) -> f64 {
        let (l, m) = self.lame();
        l + 2.0 * m
    }
}

/// `σ′ = λ tr(ε) I + 2μ ε` and its constant tangent.
pub fn hooke_stress(eps: &SymTensor2, p: &HookeParams) -> (SymTensor2, SymTensor4) {
    let c = p.tangent(eps.dim());
    (c.contract(eps), c)
}

/// Darcy law parameters: hydraulic conductivity `k/μ_f` and fluid body force.
#[derive(Debug, Clone, PartialEq)]
pub struct DarcyParams {
    conductivity: SmallMat,
    gamma_f: SmallVec,
}

impl DarcyParams {
    /// From intrinsic permeability `k` (m²), viscosity `μ_f` (Pa·s) and `γ_f` (N/m³).
    pub fn new(permeability: SmallMat, viscosity: f64, gamma_f: SmallVec) -> Result<Self> {
        if !(viscosity > 0.0) {
            return Err(Error::invalid("viscosity must be positive"));
        }
        if permeability.order() != gamma_f.len() {
            return Err(Error::shape("permeability and fluid body force dimensions differ"));
        }
        crate::tensor::spd_factorize(&permeability)?;
        Ok(DarcyParams { conductivity: permeability.scaled(1.0 / viscosity), gamma_f })
    }

    /// Isotropic conductivity `K I` (m²/(Pa·s)) without fluid body force.
    pub fn isotropic(dim: Dim, conductivity: f64) -> Result<Self> {
        Self::new(SmallMat::scaled_identity(dim.d(), conductivity), 1.0, SmallVec::zeros(dim.d()))
    }

    /// Hydraulic conductivity tensor `k/μ_f`.
    pub fn conductivity(&self) -> &SmallMat {
        &self.conductivity
    }

    /// Fluid body force `γ_f`.
    pub fn gamma_f(&self) -> &SmallVec {
        &self.gamma_f
    }
}

/// `q = −(1/μ_f) k (∇p + γ_f)`.
pub fn darcy_flux(grad_p: &SmallVec, p: &DarcyParams) -> Result<SmallVec> {
    if grad_p.len() != p.gamma_f.len() {
        return Err(Error::shape("pressure gradient dimension mismatch"));
    }
    Ok(-p.conductivity.mul_vec(&(*grad_p + p.gamma_f)))
}

// ---------------------------------------------------------------------------
// Solid law interface
// ---------------------------------------------------------------------------

/// A hyperelastic (or linear) effective-stress law.
pub trait SolidLaw: Send + Sync + fmt::Debug {
    /// Short identifier.
    fn name(&self) -> String;

    /// Strain energy density `ψ(ε)` (Pa), up to a constant.
    fn energy(&self, eps: &SymTensor2) -> Result<f64>;

    /// Effective stress and tangent `∂σ′/∂ε`.
    fn stress_tangent(&self, eps: &SymTensor2) -> Result<(SymTensor2, SymTensor4)>;

    /// Jacobian of `ε ↦ D(ε) : w` as a Kelvin matrix, `T = ∂(D w)/∂ε`.
    ///
    /// The default uses central differences of the tangent.
    fn tangent_action_jacobian(&self, eps: &SymTensor2, w: &SymTensor2) -> Result<SmallMat> {
        let n = eps.dim().n();
        let mut t = SmallMat::zeros(n);
        let base = eps.kelvin();
        let h = 1e-6 * (1.0 + base.norm());
        let wk = w.kelvin();
        for k in 0..n {
            let mut plus = base;
            plus[k] += h;
            let mut minus = base;
            minus[k] -= h;
            let (_, dp) = self.stress_tangent(&SymTensor2::from_kelvin(plus.as_slice())?)?;
            let (_, dm) = self.stress_tangent(&SymTensor2::from_kelvin(minus.as_slice())?)?;
            let col = dp.matrix().mul_vec(&wk) - dm.matrix().mul_vec(&wk);
            for i in 0..n {
                t.set(i, k, col[i] / (2.0 * h));
            }
        }
        Ok(t)
    }

    /// `true` when stress is linear in strain (constant tangent).
    fn is_linear(&self) -> bool {
        false
    }
}

/// Shared handle to a solid law.
pub type SharedLaw = Arc<dyn SolidLaw>;

/// Linear elastic law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HookeLaw(pub HookeParams);

impl SolidLaw for HookeLaw {
    fn name(&self) -> String {
        "hooke".into()
    }
    fn energy(&self, eps: &SymTensor2) -> Result<f64> {
        let (s, _) = hooke_stress(eps, &self.0);
        Ok(0.5 * s.ddot(eps))
    }
    fn stress_tangent(&self, eps: &SymTensor2) -> Result<(SymTensor2, SymTensor4)> {
        Ok(hooke_stress(eps, &self.0))
    }
    fn tangent_action_jacobian(&self, eps: &SymTensor2, _w: &SymTensor2) -> Result<SmallMat> {
        Ok(SmallMat::zeros(eps.dim().n()))
    }
    fn is_linear(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Saint-Venant / neo-Hookean blend
// ---------------------------------------------------------------------------

/// Parameters of the Saint-Venant / neo-Hookean blend.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlendParams {
    /// Bulk modulus `κ` (Pa).
    pub kappa: f64,
    /// Shear modulus `G` (Pa).
    pub shear: f64,
}

impl BlendParams {
    /// Validated parameters.
    pub fn new(kappa: f64, shear: f64) -> Result<Self> {
        if !(kappa > 0.0 && shear > 0.0) {
            return Err(Error::invalid("blend law moduli must be positive"));
        }
        Ok(BlendParams { kappa, shear })
    }

    /// From Young's modulus and Poisson's ratio.
    pub fn from_young(young: f64, poisson: f64) -> Result<Self> {
        let kappa = young / (3.0 * (1.0 - 2.0 * poisson));
        let shear = young / (2.0 * (1.0 + poisson));
        Self::new(kappa, shear)
    }

    /// `λ = κ − 2G/3`.
    pub fn lambda(&self) -> f64 {
        self.kappa - 2.0 * self.shear / 3.0
    }
}

fn volume_ratio(eps: &SymTensor2) -> Result<f64> {
    let j = 1.0 + eps.trace();
    if !(j > 0.0) {
        return Err(Error::Domain(alloc::format!("1 + tr(eps) = {j} must be positive")));
    }
    Ok(j)
}

/// `ψ = G/2 [tr(2ε+I) − 2 − 2 ln(1+tr ε)] + λ/2 [ln(1+tr ε)]² + G tr(ε²) − ψ₀`,
/// shifted so that `ψ(0) = 0`.
pub fn blend_energy(eps: &SymTensor2, p: &BlendParams) -> Result<f64> {
    let e3 = eps.to_3d();
    let j = volume_ratio(&e3)?;
    let lj = math::ln(j);
    let g = p.shear;
    let tr = e3.trace();
    // tr(2ε + I) − 2 = 2 tr ε + 1; its value at ε = 0 (G/2) is removed
    Ok(0.5 * g * (2.0 * tr - 2.0 * lj) + 0.5 * p.lambda() * lj * lj + g * e3.ddot(&e3))
}

/// Stress and tangent of the blend law.
pub fn blend_stress(eps: &SymTensor2, p: &BlendParams) -> Result<(SymTensor2, SymTensor4)> {
    let dim = eps.dim();
    let e3 = eps.to_3d();
    let j = volume_ratio(&e3)?;
    let lj = math::ln(j);
    let (g, l) = (p.shear, p.lambda());
    let f = g * (1.0 - 1.0 / j) + l * lj / j;
    let fp = (g + l * (1.0 - lj)) / (j * j);
    let stress = SymTensor2::identity(Dim::Three).scaled(f) + e3.scaled(2.0 * g);
    let tangent = SymTensor4::identity_outer(Dim::Three).scaled(fp) + SymTensor4::identity(Dim::Three).scaled(2.0 * g);
    Ok(reduce(dim, stress, tangent))
}

/// `∂(D(ε) : w)/∂ε` for the blend law: `f''(J) (I : w) I ⊗ I`.
pub fn blend_tangent_action_jacobian(eps: &SymTensor2, w: &SymTensor2, p: &BlendParams) -> Result<SmallMat> {
    let dim = eps.dim();
    let j = volume_ratio(&eps.to_3d())?;
    let lj = math::ln(j);
    let (g, l) = (p.shear, p.lambda());
    let fpp = (2.0 * l * lj - 3.0 * l - 2.0 * g) / (j * j * j);
    let m = SymTensor4::identity_outer(dim).scaled(fpp * w.trace());
    Ok(*m.matrix())
}

fn reduce(dim: Dim, stress: SymTensor2, tangent: SymTensor4) -> (SymTensor2, SymTensor4) {
    match dim {
        Dim::Three => (stress, tangent),
        Dim::Two => (stress.to_2d(), tangent.to_2d()),
    }
}

/// Saint-Venant / neo-Hookean blend law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendLaw(pub BlendParams);

impl SolidLaw for BlendLaw {
    fn name(&self) -> String {
        "blend".into()
    }
    fn energy(&self, eps: &SymTensor2) -> Result<f64> {
        blend_energy(eps, &self.0)
    }
    fn stress_tangent(&self, eps: &SymTensor2) -> Result<(SymTensor2, SymTensor4)> {
        blend_stress(eps, &self.0)
    }
    fn tangent_action_jacobian(&self, eps: &SymTensor2, w: &SymTensor2) -> Result<SmallMat> {
        blend_tangent_action_jacobian(eps, w, &self.0)
    }
}

// ---------------------------------------------------------------------------
// Pressure-dependent (Borja) hyperelasticity
// ---------------------------------------------------------------------------

/// Parameters of the pressure-dependent hyperelastic law.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BorjaParams {
    /// Reference pressure `p₀` (Pa, negative in compression).
    pub p0: f64,
    /// Compressibility `c_r`.
    pub c_r: f64,
    /// Shear coefficient `c_μ`.
    pub c_mu: f64,
    /// Reference volumetric strain `ε_v0`.
    pub eps_v0: f64,
    /// Energy offset `ψ₀` (Pa).
    pub psi0: f64,
}

impl BorjaParams {
    fn omega(&self, eps_v: f64) -> Result<f64> {
        if self.c_r == 0.0 {
            return Err(Error::invalid("c_r must be non-zero"));
        }
        let o = math::exp((self.eps_v0 - eps_v) / self.c_r);
        if !o.is_finite() {
            return Err(Error::Domain(alloc::format!("exponent overflow at volumetric strain {eps_v}")));
        }
        Ok(o)
    }
}

/// Volumetric and deviatoric invariants `(ε_v, ε_s)` with `ε_s = √(2/3) ‖dev ε‖`.
pub fn strain_invariants(eps: &SymTensor2) -> (f64, f64) {
    let e3 = eps.to_3d();
    let dev = e3.deviator();
    (e3.trace(), math::sqrt(2.0 / 3.0 * dev.ddot(&dev)))
}

/// `ψ = −p₀ c_r Ω − (3/2) c_μ p₀ Ω ε_s² + ψ₀`, `Ω = exp((ε_v0 − ε_v)/c_r)`.
pub fn borja_energy(eps: &SymTensor2, p: &BorjaParams) -> Result<f64> {
    let (ev, es) = strain_invariants(eps);
    let o = p.omega(ev)?;
    Ok(-p.p0 * p.c_r * o - 1.5 * p.c_mu * p.p0 * o * es * es + p.psi0)
}

/// Bulk and shear moduli (diagonal Hessian terms in `(ε_v, ε_s)`).
pub fn borja_moduli(eps_v: f64, eps_s: f64, p: &BorjaParams) -> Result<(f64, f64)> {
    let o = p.omega(eps_v)?;
    let kappa = -(p.p0 / p.c_r) * (1.0 + 1.5 * p.c_mu * eps_s * eps_s / p.c_r) * o;
    let mu = -p.c_mu * p.p0 * o;
    Ok((kappa, mu))
}

/// Stress and tangent of the pressure-dependent law.
///
/// The deviatoric stress is evaluated in product form `−2 c_μ p₀ Ω dev ε`,
/// which is smooth at `ε_s = 0`.
pub fn borja_stress(eps: &SymTensor2, p: &BorjaParams) -> Result<(SymTensor2, SymTensor4)> {
    let dim = eps.dim();
    let e3 = eps.to_3d();
    let dev = e3.deviator();
    let ev = e3.trace();
    let es2 = 2.0 / 3.0 * dev.ddot(&dev);
    let a = p.p0 * p.omega(ev)?;
    let beta = 1.5 * p.c_mu / p.c_r;
    let i = SymTensor2::identity(Dim::Three);
    let stress = i.scaled(a * (1.0 + beta * es2)) + dev.scaled(-2.0 * p.c_mu * a);
    let ii = SymTensor4::identity_outer(Dim::Three);
    let pdev = SymTensor4::identity(Dim::Three) + ii.scaled(-1.0 / 3.0);
    let tangent = ii.scaled(-(a / p.c_r) * (1.0 + beta * es2))
        + SymTensor4::outer(&i, &dev).scaled(4.0 * a * p.c_mu / p.c_r)
        + pdev.scaled(-2.0 * p.c_mu * a);
    Ok(reduce(dim, stress, tangent))
}

/// Pressure-dependent law; optionally measured relative to the stress at
/// zero strain so that the undeformed configuration is in equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BorjaLaw {
    params: BorjaParams,
    relative: bool,
}

impl BorjaLaw {
    /// Absolute law: `σ′(0) = p₀ exp(ε_v0/c_r) I`.
    pub fn new(params: BorjaParams) -> Self {
        BorjaLaw { params, relative: false }
    }

    /// Law with the zero-strain (in-situ) stress subtracted.
    pub fn relative_to_initial(params: BorjaParams) -> Self {
        BorjaLaw { params, relative: true }
    }

    /// Parameters.
    pub fn params(&self) -> &BorjaParams {
        &self.params
    }
}

impl SolidLaw for BorjaLaw {
    fn name(&self) -> String {
        "borja".into()
    }
    fn energy(&self, eps: &SymTensor2) -> Result<f64> {
        let psi = borja_energy(eps, &self.params)?;
        if self.relative {
            let zero = SymTensor2::zeros(eps.dim());
            let (s0, _) = borja_stress(&zero, &self.params)?;
            Ok(psi - borja_energy(&zero, &self.params)? - s0.ddot(eps))
        } else {
            Ok(psi)
        }
    }
    fn stress_tangent(&self, eps: &SymTensor2) -> Result<(SymTensor2, SymTensor4)> {
        let (s, d) = borja_stress(eps, &self.params)?;
        if self.relative {
            let (s0, _) = borja_stress(&SymTensor2::zeros(eps.dim()), &self.params)?;
            Ok((s - s0, d))
        } else {
            Ok((s, d))
        }
    }
}

/// Fits Borja parameters to a `(φ, κ, μ)` table around initial porosity `φ₀`.
///
/// Strains are `ε_v = φ/φ₀ − 1` with `ε_s = 0`. With `ε_v0 = 0` fixed (the
/// product `p₀ exp(ε_v0/c_r)` is the only identifiable combination), `ln κ`
/// and `ln μ` are affine in `ε_v` with the common slope `−1/c_r`; the slope
/// and both intercepts come from one linear least-squares problem.
pub fn calibrate_borja(phi0: f64, table: &[(f64, f64, f64)]) -> Result<BorjaParams> {
    if !(phi0 > 0.0 && phi0 < 1.0) {
        return Err(Error::Calibration(alloc::format!("initial porosity {phi0} outside (0,1)")));
    }
    let rows: Vec<(f64, f64, f64)> = table
        .iter()
        .filter(|(phi, k, m)| phi.is_finite() && *phi > 0.0 && *k > 0.0 && *m > 0.0 && k.is_finite() && m.is_finite())
        .map(|&(phi, k, m)| (phi / phi0 - 1.0, math::ln(k), math::ln(m)))
        .collect();
    if rows.len() < 4 {
        return Err(Error::Calibration(alloc::format!("need at least 4 usable rows, got {}", rows.len())));
    }
    // unknowns x = (s, A_k, A_m); residuals ln k − A_k − s e, ln m − A_m − s e
    let n = rows.len() as f64;
    let se: f64 = rows.iter().map(|r| r.0).sum();
    let see: f64 = rows.iter().map(|r| r.0 * r.0).sum();
    let sk: f64 = rows.iter().map(|r| r.1).sum();
    let sm: f64 = rows.iter().map(|r| r.2).sum();
    let sek: f64 = rows.iter().map(|r| r.0 * r.1).sum();
    let sem: f64 = rows.iter().map(|r| r.0 * r.2).sum();
    let normal = SmallMat::from_rows(&[&[2.0 * see, se, se], &[se, n, 0.0], &[se, 0.0, n]])?;
    let rhs = SmallVec::from_slice(&[sek + sem, sk, sm]);
    let var = see / n - (se / n) * (se / n);
    if !(var > 1e-24) {
        return Err(Error::Calibration("table spans no volumetric strain range".into()));
    }
    let x = normal.inverse().map_err(|_| Error::Calibration("singular normal equations".into()))?.mul_vec(&rhs);
    let (s, ak, am) = (x[0], x[1], x[2]);
    let span = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max)
        - rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    if !(s.abs() * span > 1e-6) {
        return Err(Error::Calibration(alloc::format!(
            "moduli do not vary with porosity (slope {s:e}); c_r would be unbounded"
        )));
    }
    let c_r = -1.0 / s;
    let p0 = -c_r * math::exp(ak);
    let c_mu = -math::exp(am) / p0;
    let params = BorjaParams { p0, c_r, c_mu, eps_v0: 0.0, psi0: 0.0 };
    for &(phi, k, m) in table {
        let (kf, mf) = borja_moduli(phi / phi0 - 1.0, 0.0, &params)?;
        if (kf - k).abs() > 0.05 * k || (mf - m).abs() > 0.05 * m {
            return Err(Error::Calibration(alloc::format!(
                "fit misses table knot phi={phi}: kappa {kf:e} vs {k:e}, mu {mf:e} vs {m:e}"
            )));
        }
    }
    Ok(params)
}

/// Synthetic bulk/shear moduli table with an exponential porosity trend,
/// shaped like measured sandstone data: both moduli fall with porosity.
pub fn synthetic_moduli_table(phi_min: f64, phi_max: f64, rows: usize) -> Vec<(f64, f64, f64)> {
    let axis = crate::dataset::AxisSpec::active(phi_min, phi_max, rows);
    (0..rows)
        .map(|i| {
            let phi = axis.value(i);
            let f = math::exp(-8.0 * (phi - 0.25));
            (phi, 11.0e9 * f, 8.0e9 * f)
        })
        .collect()
}
