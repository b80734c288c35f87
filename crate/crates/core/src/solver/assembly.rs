//! Integration-point kernels: residual and Jacobian contributions of every
//! formulation, plus the local closure that turns nodal fields into
//! physical phase states.
//!
//! Unknown blocks per node: displacement `u`, pressure `p`, momentum
//! multiplier `β^mom` and mass multiplier `β^mass` (the last two only in
//! data-driven layouts). With `w` the quadrature weight times `det J`, `N_a`,
//! `∇N_a` the shape functions, `B_ai` the Kelvin strain of the virtual field
//! `N_a e_i`, and starred quantities the assigned data, the fully
//! data-driven residuals are
//!
//! ```text
//! R^u_ai     = Σ w [ B_ai·ℂ_s(ε(u) − ε*) + B ∂_i N_a β^mass ]
//! R^p_a      = Σ w [ Δt ∇N_a·C_f(∇p − r*) + (1/M) N_a β^mass + B N_a div β^mom ]
//! R^βmom_ai  = Σ w [ −B_ai·(σ′ − B p I) + N_a γ_i ] + ∫ N_a t̄_i
//! R^βmass_a  = Σ w [ N_a((p − p_n)/M + B(ε_v − ε_v,n) + s Δt) − Δt ∇N_a·q ] + Δt ∫ N_a q̄
//! σ′ = σ′* + 𝕊_s⁻¹ ε(β^mom),   q = q* + S_f⁻¹ ∇β^mass
//! ```
//!
//! The model-based-solid (hybrid fluid) variant takes σ′ from the law and
//! closes the flux as `q = q* + Δt S_f⁻¹ ∇β^mass`. Its pressure row is the
//! variation of the fluid loss `½|∇p − r*|²_{C_f} + ½|q − q*|²_{S_f}` without
//! a Δt factor, `R^p_a = Σ w [ ∇N_a·C_f(∇p − r*) + … ]`, so that the global
//! step and the local search minimise the same functional; with the Δt factor
//! on this term only, the two steps disagree by a factor Δt and the fixed
//! point stalls for long time steps.
//!
//! The hybrid and model-based variants replace one or both closures by a
//! constitutive law; see [`Model`].

use core::f64::consts::FRAC_1_SQRT_2;

use crate::constitutive::SolidLaw;
use crate::fem::{Field, FieldLayout, ShapeValues, MAX_NODES};
use crate::phase::{FluidPoint, MetricSpec, SolidPoint};
use crate::tensor::{Dim, SmallMat, SmallVec, SymTensor2};
use crate::Result;

/// Kelvin vector storage (first `n` entries used).
pub(crate) type Kv = [f64; 6];

/// Kelvin vector of `sym(e_i ⊗ g)`.
#[inline]
pub(crate) fn b_eps(g: &[f64; 3], i: usize, dim: Dim) -> Kv {
    let mut b = [0.0; 6];
    for (k, bk) in b.iter_mut().enumerate().take(dim.n()) {
        let (p, q) = dim.pair(k);
        if p == q {
            if p == i {
                *bk = g[p];
            }
        } else {
            let mut v = 0.0;
            if i == p {
                v += g[q];
            }
            if i == q {
                v += g[p];
            }
            // √2 · ½
            *bk = v * FRAC_1_SQRT_2;
        }
    }
    b
}

#[inline]
fn dot(a: &[f64], b: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..n {
        s += a[k] * b[k];
    }
    s
}

#[inline]
fn matvec(m: &[[f64; 6]; 6], v: &[f64], n: usize) -> Kv {
    let mut out = [0.0; 6];
    for i in 0..n {
        out[i] = dot(&m[i], v, n);
    }
    out
}

fn to_array(m: &SmallMat) -> [[f64; 6]; 6] {
    let mut a = [[0.0; 6]; 6];
    for (i, row) in a.iter_mut().enumerate().take(m.order()) {
        for (j, v) in row.iter_mut().enumerate().take(m.order()) {
            *v = m.get(i, j);
        }
    }
    a
}

/// Metric weights unpacked into fixed arrays.
#[derive(Debug, Clone)]
pub(crate) struct Weights {
    pub cs: [[f64; 6]; 6],
    pub ss_inv: [[f64; 6]; 6],
    pub cf: [[f64; 6]; 6],
    pub sf_inv: [[f64; 6]; 6],
}

impl Weights {
    pub fn new(m: &MetricSpec) -> Self {
        Weights {
            cs: to_array(m.cs().matrix()),
            ss_inv: to_array(m.ss_inverse()),
            cf: to_array(m.cf()),
            sf_inv: to_array(m.sf_inverse()),
        }
    }
}

/// Per-node offsets of the field blocks.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Offsets {
    pub per_node: usize,
    pub u: Option<usize>,
    pub p: Option<usize>,
    pub bm: Option<usize>,
    pub bs: Option<usize>,
}

impl Offsets {
    pub fn new(layout: FieldLayout, dim: Dim) -> Self {
        Offsets {
            per_node: layout.dofs_per_node(dim),
            u: layout.offset(Field::Displacement, dim),
            p: layout.offset(Field::Pressure, dim),
            bm: layout.offset(Field::MomentumMultiplier, dim),
            bs: layout.offset(Field::MassMultiplier, dim),
        }
    }
}

/// Fields interpolated at one integration point.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct QpFields {
    pub e_u: Kv,
    pub ev: f64,
    pub p: f64,
    pub gp: [f64; 3],
    pub e_b: Kv,
    pub divb: f64,
    pub bs: f64,
    pub gb: [f64; 3],
}

fn kelvin_strain(xl: &[f64], sv: &ShapeValues, per_node: usize, off: usize, dim: Dim) -> (Kv, f64) {
    let d = dim.d();
    let mut h = [[0.0; 3]; 3];
    for a in 0..sv.nen {
        for i in 0..d {
            let v = xl[a * per_node + off + i];
            for j in 0..d {
                h[i][j] += v * sv.grad[a][j];
            }
        }
    }
    let mut e = [0.0; 6];
    for (k, ek) in e.iter_mut().enumerate().take(dim.n()) {
        let (p, q) = dim.pair(k);
        *ek = if p == q { h[p][p] } else { (h[p][q] + h[q][p]) * FRAC_1_SQRT_2 };
    }
    let tr = (0..d).map(|i| h[i][i]).sum();
    (e, tr)
}

fn scalar(xl: &[f64], sv: &ShapeValues, per_node: usize, off: usize, d: usize) -> (f64, [f64; 3]) {
    let mut v = 0.0;
    let mut g = [0.0; 3];
    for a in 0..sv.nen {
        let x = xl[a * per_node + off];
        v += sv.n[a] * x;
        for j in 0..d {
            g[j] += sv.grad[a][j] * x;
        }
    }
    (v, g)
}

/// Interpolates every present field at an integration point.
pub(crate) fn interpolate(xl: &[f64], sv: &ShapeValues, off: &Offsets, dim: Dim) -> QpFields {
    let mut f = QpFields::default();
    let d = dim.d();
    if let Some(o) = off.u {
        (f.e_u, f.ev) = kelvin_strain(xl, sv, off.per_node, o, dim);
    }
    if let Some(o) = off.p {
        (f.p, f.gp) = scalar(xl, sv, off.per_node, o, d);
    }
    if let Some(o) = off.bm {
        (f.e_b, f.divb) = kelvin_strain(xl, sv, off.per_node, o, dim);
    }
    if let Some(o) = off.bs {
        (f.bs, f.gb) = scalar(xl, sv, off.per_node, o, d);
    }
    f
}

/// Constitutive ingredients of a formulation.
pub(crate) enum Model<'a> {
    /// Both closures from data.
    FullyDd(&'a Weights),
    /// Solid law, fluid data.
    HybridFluid(&'a Weights, &'a dyn SolidLaw),
    /// Solid data, Darcy fluid with conductivity `k` and `γ_f`.
    HybridSolid(&'a Weights, [[f64; 6]; 6], [f64; 3]),
    /// Solid law and Darcy fluid.
    ModelBased(&'a dyn SolidLaw, [[f64; 6]; 6], [f64; 3]),
    /// Steady diffusion with fluid data.
    Poisson(&'a Weights),
}

/// Formulation-independent constants of a kernel evaluation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ctx {
    pub dim: Dim,
    pub off: Offsets,
    pub b: f64,
    pub inv_m: f64,
    pub gamma: [f64; 3],
    pub source: f64,
    pub dt: f64,
}

/// Assigned data and history at one integration point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QpData {
    pub eps_star: Kv,
    pub sig_star: Kv,
    pub r_star: [f64; 3],
    pub q_star: [f64; 3],
    pub p_prev: f64,
    pub ev_prev: f64,
}

impl QpData {
    pub fn new(solid: &SolidPoint, fluid: &FluidPoint, p_prev: f64, ev_prev: f64) -> Self {
        let mut d =
            QpData { eps_star: [0.0; 6], sig_star: [0.0; 6], r_star: [0.0; 3], q_star: [0.0; 3], p_prev, ev_prev };
        let e = solid.strain.kelvin();
        let s = solid.stress.kelvin();
        d.eps_star[..e.len()].copy_from_slice(e.as_slice());
        d.sig_star[..s.len()].copy_from_slice(s.as_slice());
        d.r_star[..fluid.grad_p.len()].copy_from_slice(fluid.grad_p.as_slice());
        d.q_star[..fluid.flux.len()].copy_from_slice(fluid.flux.as_slice());
        d
    }
}

fn kv_tensor(k: &Kv, dim: Dim) -> Result<SymTensor2> {
    SymTensor2::from_kelvin(&k[..dim.n()])
}

fn law_eval(law: &dyn SolidLaw, e: &Kv, dim: Dim) -> Result<(Kv, [[f64; 6]; 6])> {
    let (s, t) = law.stress_tangent(&kv_tensor(e, dim)?)?;
    let mut sk = [0.0; 6];
    let k = s.kelvin();
    sk[..k.len()].copy_from_slice(k.as_slice());
    Ok((sk, to_array(t.matrix())))
}

/// Physical (closed) solid and fluid states at an integration point.
pub(crate) fn closure(ctx: &Ctx, model: &Model<'_>, data: &QpData, f: &QpFields) -> Result<(SolidPoint, FluidPoint)> {
    let dim = ctx.dim;
    let (n, d) = (dim.n(), dim.d());
    let grad = SmallVec::from_slice(&f.gp[..d]);
    let strain = kv_tensor(&f.e_u, dim)?;
    let data_stress = |w: &Weights| {
        let mut s = matvec(&w.ss_inv, &f.e_b, n);
        for k in 0..n {
            s[k] += data.sig_star[k];
        }
        s
    };
    let data_flux = |w: &Weights, scale: f64| {
        let m = matvec(&w.sf_inv, &f.gb, d);
        let mut q = [0.0; 3];
        for i in 0..d {
            q[i] = data.q_star[i] + scale * m[i];
        }
        q
    };
    let darcy = |k: &[[f64; 6]; 6], gf: &[f64; 3]| {
        let mut g = [0.0; 6];
        for i in 0..d {
            g[i] = f.gp[i] + gf[i];
        }
        let m = matvec(k, &g, d);
        let mut q = [0.0; 3];
        for i in 0..d {
            q[i] = -m[i];
        }
        q
    };
    let (stress, flux) = match model {
        Model::FullyDd(w) => (data_stress(w), data_flux(w, 1.0)),
        Model::HybridFluid(w, law) => (law_eval(*law, &f.e_u, dim)?.0, data_flux(w, ctx.dt)),
        Model::HybridSolid(w, k, gf) => (data_stress(w), darcy(k, gf)),
        Model::ModelBased(law, k, gf) => (law_eval(*law, &f.e_u, dim)?.0, darcy(k, gf)),
        Model::Poisson(w) => ([0.0; 6], data_flux(w, 1.0)),
    };
    Ok((
        SolidPoint { strain, stress: kv_tensor(&stress, dim)? },
        FluidPoint { grad_p: grad, flux: SmallVec::from_slice(&flux[..d]) },
    ))
}

/// Local-dof index helper.
#[derive(Clone, Copy)]
struct Loc {
    per_node: usize,
}

impl Loc {
    #[inline]
    fn at(self, a: usize, off: usize, c: usize) -> usize {
        a * self.per_node + off + c
    }
}

/// Adds one integration point's residual (`re`) and, when requested, its
/// Jacobian (`ke`, row-major `nl × nl`) contributions.
pub(crate) fn contribute(
    ctx: &Ctx,
    model: &Model<'_>,
    sv: &ShapeValues,
    weight: f64,
    data: &QpData,
    f: &QpFields,
    re: &mut [f64],
    ke: Option<&mut [f64]>,
) -> Result<()> {
    let dim = ctx.dim;
    let (n, d, nen) = (dim.n(), dim.d(), sv.nen);
    let nl = nen * ctx.off.per_node;
    let loc = Loc { per_node: ctx.off.per_node };
    let w = weight;
    let (b, inv_m, dt) = (ctx.b, ctx.inv_m, ctx.dt);
    let g = &sv.grad;
    let nn = &sv.n;

    // strain operators of every (node, direction)
    let mut bm = [[[0.0; 6]; 3]; MAX_NODES];
    if ctx.off.u.is_some() {
        for a in 0..nen {
            for i in 0..d {
                bm[a][i] = b_eps(&g[a], i, dim);
            }
        }
    }
    let gdot = |a: usize, m: &[[f64; 6]; 6], v: &[f64]| -> f64 {
        let mv = matvec(m, v, d);
        dot(&g[a], &mv, d)
    };
    let mut r_minus = [0.0; 6];
    for i in 0..d {
        r_minus[i] = f.gp[i] - data.r_star[i];
    }
    let mass_rate = inv_m * (f.p - data.p_prev) + b * (f.ev - data.ev_prev) + ctx.source * dt;

    // residuals
    match model {
        Model::FullyDd(wt) | Model::HybridFluid(wt, _) | Model::HybridSolid(wt, _, _) => {
            let (ou, op, obm, obs) = (ctx.off.u.unwrap(), ctx.off.p.unwrap(), ctx.off.bm.unwrap(), ctx.off.bs.unwrap());
            // effective stress and flux closures
            let (sig, deb) = match model {
                Model::HybridFluid(_, law) => {
                    let (s, dm) = law_eval(*law, &f.e_u, dim)?;
                    (s, Some((matvec(&dm, &f.e_b, n), dm)))
                }
                _ => {
                    let mut s = matvec(&wt.ss_inv, &f.e_b, n);
                    for k in 0..n {
                        s[k] += data.sig_star[k];
                    }
                    (s, None)
                }
            };
            let q: [f64; 3] = match model {
                Model::HybridSolid(_, k, gf) => {
                    let mut gg = [0.0; 6];
                    for i in 0..d {
                        gg[i] = f.gp[i] + gf[i];
                    }
                    let m = matvec(k, &gg, d);
                    [-m[0], -m[1], -m[2]]
                }
                _ => {
                    let scale = if matches!(model, Model::HybridFluid(..)) { dt } else { 1.0 };
                    let m = matvec(&wt.sf_inv, &f.gb, d);
                    let mut q = [0.0; 3];
                    for i in 0..d {
                        q[i] = data.q_star[i] + scale * m[i];
                    }
                    q
                }
            };
            let mut du = [0.0; 6];
            for k in 0..n {
                du[k] = f.e_u[k] - data.eps_star[k];
            }
            let cs_du = matvec(&wt.cs, &du, n);
            for a in 0..nen {
                for i in 0..d {
                    let bai = &bm[a][i];
                    let ru = match &deb {
                        Some((deb, _)) => b * g[a][i] * f.bs - dot(bai, deb, n),
                        None => dot(bai, &cs_du, n) + b * g[a][i] * f.bs,
                    };
                    re[loc.at(a, ou, i)] += w * ru;
                    re[loc.at(a, obm, i)] += w * (-dot(bai, &sig, n) + b * f.p * g[a][i] + nn[a] * ctx.gamma[i]);
                }
                let rp = match model {
                    Model::HybridSolid(_, k, _) => dt * gdot(a, k, &f.gb),
                    Model::HybridFluid(..) => gdot(a, &wt.cf, &r_minus),
                    _ => dt * gdot(a, &wt.cf, &r_minus),
                };
                re[loc.at(a, op, 0)] += w * (rp + inv_m * nn[a] * f.bs + b * nn[a] * f.divb);
                re[loc.at(a, obs, 0)] += w * (nn[a] * mass_rate - dt * dot(&g[a], &q, d));
            }
            if let Some(ke) = ke {
                let mut add = |r: usize, c: usize, v: f64| ke[r * nl + c] += v;
                let tangent_action = match model {
                    Model::HybridFluid(_, law) if !law.is_linear() => Some(to_array(
                        &law.tangent_action_jacobian(&kv_tensor(&f.e_u, dim)?, &kv_tensor(&f.e_b, dim)?)?,
                    )),
                    _ => None,
                };
                for a in 0..nen {
                    for bb in 0..nen {
                        let nab = nn[a] * nn[bb];
                        for i in 0..d {
                            let bai = &bm[a][i];
                            for j in 0..d {
                                let bbj = &bm[bb][j];
                                match &deb {
                                    Some((_, dm)) => {
                                        let dbj = matvec(dm, bbj, n);
                                        let v = -w * dot(bai, &dbj, n);
                                        add(loc.at(a, ou, i), loc.at(bb, obm, j), v);
                                        add(loc.at(a, obm, i), loc.at(bb, ou, j), v);
                                        if let Some(t) = &tangent_action {
                                            let tbj = matvec(t, bbj, n);
                                            add(loc.at(a, ou, i), loc.at(bb, ou, j), -w * dot(bai, &tbj, n));
                                        }
                                    }
                                    None => {
                                        let cbj = matvec(&wt.cs, bbj, n);
                                        add(loc.at(a, ou, i), loc.at(bb, ou, j), w * dot(bai, &cbj, n));
                                        let sbj = matvec(&wt.ss_inv, bbj, n);
                                        add(loc.at(a, obm, i), loc.at(bb, obm, j), -w * dot(bai, &sbj, n));
                                    }
                                }
                            }
                            // u – β^mass and β^mom – p couplings
                            add(loc.at(a, ou, i), loc.at(bb, obs, 0), w * b * g[a][i] * nn[bb]);
                            add(loc.at(a, obm, i), loc.at(bb, op, 0), w * b * g[a][i] * nn[bb]);
                            // transposes
                            add(loc.at(bb, obs, 0), loc.at(a, ou, i), w * b * nn[bb] * g[a][i]);
                            add(loc.at(bb, op, 0), loc.at(a, obm, i), w * b * nn[bb] * g[a][i]);
                        }
                        let mut gb = [0.0; 6];
                        gb[..3].copy_from_slice(&g[bb]);
                        match model {
                            Model::HybridSolid(_, k, _) => {
                                let v = w * (dt * gdot(a, k, &gb) + inv_m * nab);
                                add(loc.at(a, op, 0), loc.at(bb, obs, 0), v);
                                add(loc.at(a, obs, 0), loc.at(bb, op, 0), v);
                            }
                            _ => {
                                let cf_scale = if matches!(model, Model::HybridFluid(..)) { 1.0 } else { dt };
                                add(loc.at(a, op, 0), loc.at(bb, op, 0), w * cf_scale * gdot(a, &wt.cf, &gb));
                                add(loc.at(a, op, 0), loc.at(bb, obs, 0), w * inv_m * nab);
                                add(loc.at(a, obs, 0), loc.at(bb, op, 0), w * inv_m * nab);
                                let scale = if matches!(model, Model::HybridFluid(..)) { dt * dt } else { dt };
                                add(loc.at(a, obs, 0), loc.at(bb, obs, 0), -w * scale * gdot(a, &wt.sf_inv, &gb));
                            }
                        }
                    }
                }
            }
        }
        Model::ModelBased(law, k, gf) => {
            let (ou, op) = (ctx.off.u.unwrap(), ctx.off.p.unwrap());
            let (sig, dm) = law_eval(*law, &f.e_u, dim)?;
            let mut gg = [0.0; 6];
            for i in 0..d {
                gg[i] = f.gp[i] + gf[i];
            }
            let m = matvec(k, &gg, d);
            for a in 0..nen {
                for i in 0..d {
                    re[loc.at(a, ou, i)] += w * (dot(&bm[a][i], &sig, n) - b * f.p * g[a][i] - nn[a] * ctx.gamma[i]);
                }
                // −Δt ∇N·q with q = −K(∇p + γ_f)
                re[loc.at(a, op, 0)] += w * (nn[a] * mass_rate + dt * dot(&g[a], &m, d));
            }
            if let Some(ke) = ke {
                let mut add = |r: usize, c: usize, v: f64| ke[r * nl + c] += v;
                for a in 0..nen {
                    for bb in 0..nen {
                        for i in 0..d {
                            for j in 0..d {
                                let dbj = matvec(&dm, &bm[bb][j], n);
                                add(loc.at(a, ou, i), loc.at(bb, ou, j), w * dot(&bm[a][i], &dbj, n));
                            }
                            add(loc.at(a, ou, i), loc.at(bb, op, 0), -w * b * g[a][i] * nn[bb]);
                            add(loc.at(bb, op, 0), loc.at(a, ou, i), w * b * nn[bb] * g[a][i]);
                        }
                        let mut gb = [0.0; 6];
                        gb[..3].copy_from_slice(&g[bb]);
                        add(loc.at(a, op, 0), loc.at(bb, op, 0), w * (inv_m * nn[a] * nn[bb] + dt * gdot(a, k, &gb)));
                    }
                }
            }
        }
        Model::Poisson(wt) => {
            let (op, obs) = (ctx.off.p.unwrap(), ctx.off.bs.unwrap());
            let m = matvec(&wt.sf_inv, &f.gb, d);
            let mut q = [0.0; 3];
            for i in 0..d {
                q[i] = data.q_star[i] + m[i];
            }
            for a in 0..nen {
                re[loc.at(a, op, 0)] += w * gdot(a, &wt.cf, &r_minus);
                re[loc.at(a, obs, 0)] += w * (nn[a] * ctx.source - dot(&g[a], &q, d));
            }
            if let Some(ke) = ke {
                for a in 0..nen {
                    for bb in 0..nen {
                        let mut gb = [0.0; 6];
                        gb[..3].copy_from_slice(&g[bb]);
                        ke[loc.at(a, op, 0) * nl + loc.at(bb, op, 0)] += w * gdot(a, &wt.cf, &gb);
                        ke[loc.at(a, obs, 0) * nl + loc.at(bb, obs, 0)] -= w * gdot(a, &wt.sf_inv, &gb);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Weak-form balance residuals evaluated with closed (physical) fields:
/// momentum `∫ B_ai·(σ′ − B p I) − N_a γ_i` and mass
/// `∫ N_a((p − p_n)/M + B(ε_v − ε_v,n) + sΔt) − Δt ∇N_a·q` (boundary terms are
/// added by the caller). Returns contributions per local node.
pub(crate) fn balance(
    ctx: &Ctx,
    sv: &ShapeValues,
    weight: f64,
    data: &QpData,
    f: &QpFields,
    solid: &SolidPoint,
    fluid: &FluidPoint,
    momentum: &mut [[f64; 3]; MAX_NODES],
    mass: &mut [f64; MAX_NODES],
) {
    let dim = ctx.dim;
    let (n, d) = (dim.n(), dim.d());
    let sig = solid.stress.kelvin();
    let mut total = [0.0; 6];
    for k in 0..n {
        total[k] = sig[k] - if k < d { ctx.b * f.p } else { 0.0 };
    }
    let rate = ctx.inv_m * (f.p - data.p_prev) + ctx.b * (f.ev - data.ev_prev) + ctx.source * ctx.dt;
    for a in 0..sv.nen {
        if ctx.off.u.is_some() {
            for i in 0..d {
                let bai = b_eps(&sv.grad[a], i, dim);
                momentum[a][i] += weight * (dot(&bai, &total, n) - sv.n[a] * ctx.gamma[i]);
            }
        }
        mass[a] += weight * (sv.n[a] * rate - ctx.dt * dot(&sv.grad[a], fluid.flux.as_slice(), d));
    }
}
