//! Closed-form benchmark solutions and the error measures used to compare
//! simulations against them.
//!
//! * one-dimensional Terzaghi consolidation under a constant top load
//!   (zero Poisson's ratio, drained top, impermeable bottom);
//! * stress relaxation of a column under a ramp-and-hold displacement with
//!   incompressible constituents;
//! * the manufactured steady diffusion solution `p = x² + y² + z²`;
//! * the relative `L¹` error in space and its time average.
//!
//! Sign conventions: tension positive, `y` (or `z`) measured upward from the
//! impermeable base, loads and displacement rates negative in compression.

use core::f64::consts::PI;

use crate::math::{cos, exp, sin};
use crate::{Error, Result};

/// Default number of series terms before automatic doubling.
pub const DEFAULT_TERMS: usize = 500;

/// Upper bound on the number of series terms used by automatic doubling.
pub const MAX_TERMS: usize = 1 << 16;

/// Relative size of the last retained term at which doubling stops.
const SERIES_TOL: f64 = 1e-12;

/// Repeatedly doubles `n` (starting at [`DEFAULT_TERMS`]) until the magnitude
/// bound of the last term falls below [`SERIES_TOL`] times the partial sum.
fn auto_terms(partial: impl Fn(usize) -> (f64, f64)) -> f64 {
    let mut n = DEFAULT_TERMS;
    loop {
        let (sum, last) = partial(n);
        if last <= SERIES_TOL * sum.abs() || last == 0.0 || n >= MAX_TERMS {
            return sum;
        }
        n *= 2;
    }
}

// ---------------------------------------------------------------------------
// Terzaghi consolidation
// ---------------------------------------------------------------------------

/// Parameters of the one-dimensional consolidation column.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TerzaghiParams {
    /// Young's modulus `E` (Pa); Poisson's ratio is zero.
    pub young: f64,
    /// Biot coefficient `b`.
    pub biot: f64,
    /// Biot modulus `M` (Pa).
    pub modulus: f64,
    /// Hydraulic conductivity `k/μ_f` (m²/(Pa·s)).
    pub conductivity: f64,
    /// Column height `H` (m).
    pub height: f64,
    /// Applied vertical traction `t̄_y` (Pa, negative in compression).
    pub traction: f64,
}

impl TerzaghiParams {
    /// Checks that every parameter is positive (the traction only non-zero).
    pub fn validate(&self) -> Result<()> {
        let pos = [self.young, self.biot, self.modulus, self.conductivity, self.height];
        if pos.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || !self.traction.is_finite() {
            return Err(Error::invalid("consolidation parameters must be positive and finite"));
        }
        Ok(())
    }

    /// Undrained constrained modulus `E + b²M`.
    fn undrained(&self) -> f64 {
        self.young + self.biot * self.biot * self.modulus
    }

    /// Consolidation coefficient `c_f = k M E / (E + b² M)` (m²/s).
    pub fn diffusivity(&self) -> f64 {
        self.conductivity * self.modulus * self.young / self.undrained()
    }

    /// Wave number `(2i+1)π/(2H)` and decay factor of term `i` at time `t`.
    fn mode(&self, i: usize, t: f64) -> (f64, f64) {
        let alpha = (2 * i + 1) as f64 * PI / (2.0 * self.height);
        (alpha, exp(-alpha * alpha * self.diffusivity() * t))
    }

    fn sign(i: usize) -> f64 {
        if i % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Pore pressure with exactly `n_terms` series terms.
    pub fn pressure_terms(&self, y: f64, t: f64, n_terms: usize) -> f64 {
        self.pressure_partial(y, t, n_terms).0
    }

    fn pressure_partial(&self, y: f64, t: f64, n: usize) -> (f64, f64) {
        let a = 4.0 * self.biot * self.modulus * self.traction / (PI * self.undrained());
        let mut s = 0.0;
        let mut last = 0.0;
        for i in 0..n {
            let (alpha, decay) = self.mode(i, t);
            let term = -Self::sign(i) / (2 * i + 1) as f64 * decay * cos(alpha * y);
            s += term;
            last = (a / (2 * i + 1) as f64 * decay).abs();
        }
        (a * s, last)
    }

    /// Pore pressure `p(y, t)` with automatic term doubling.
    pub fn pressure(&self, y: f64, t: f64) -> f64 {
        auto_terms(|n| self.pressure_partial(y, t, n))
    }

    /// Pressure gradient `∂p/∂y` with exactly `n_terms` terms.
    pub fn pressure_gradient_terms(&self, y: f64, t: f64, n_terms: usize) -> f64 {
        self.pressure_gradient_partial(y, t, n_terms).0
    }

    fn pressure_gradient_partial(&self, y: f64, t: f64, n: usize) -> (f64, f64) {
        let a = 4.0 * self.biot * self.modulus * self.traction / (PI * self.undrained());
        let k = PI / (2.0 * self.height);
        let mut s = 0.0;
        let mut last = 0.0;
        for i in 0..n {
            let (alpha, decay) = self.mode(i, t);
            s += Self::sign(i) * k * decay * sin(alpha * y);
            last = (a * k * decay).abs();
        }
        (a * s, last)
    }

    /// Pressure gradient `∂p/∂y`.
    pub fn pressure_gradient(&self, y: f64, t: f64) -> f64 {
        auto_terms(|n| self.pressure_gradient_partial(y, t, n))
    }

    /// Darcy flux `q_y = −k/μ_f ∂p/∂y` (no gravity).
    pub fn flux(&self, y: f64, t: f64) -> f64 {
        -self.conductivity * self.pressure_gradient(y, t)
    }

    /// Vertical displacement with exactly `n_terms` series terms.
    pub fn displacement_terms(&self, y: f64, t: f64, n_terms: usize) -> f64 {
        self.displacement_partial(y, t, n_terms).0
    }

    fn displacement_partial(&self, y: f64, t: f64, n: usize) -> (f64, f64) {
        let eu = self.undrained();
        let c = self.biot * self.biot * self.modulus * self.traction / (self.young * eu);
        let h = self.height;
        let mut s = 0.0;
        let mut last = 0.0;
        for i in 0..n {
            let (alpha, decay) = self.mode(i, t);
            let k2 = ((2 * i + 1) * (2 * i + 1)) as f64;
            s += Self::sign(i) / k2 * decay * sin(alpha * y);
            last = (c * 8.0 * h / (PI * PI) * decay / k2).abs();
        }
        (y * self.traction / eu + c * (y - 8.0 * h / (PI * PI) * s), last)
    }

    /// Vertical displacement `u_y(y, t)` (zero at the base).
    pub fn displacement(&self, y: f64, t: f64) -> f64 {
        auto_terms(|n| self.displacement_partial(y, t, n))
    }

    fn strain_partial(&self, y: f64, t: f64, n: usize) -> (f64, f64) {
        let eu = self.undrained();
        let c = self.biot * self.biot * self.modulus * self.traction / (self.young * eu);
        let mut s = 0.0;
        let mut last = 0.0;
        for i in 0..n {
            let (alpha, decay) = self.mode(i, t);
            let k = (2 * i + 1) as f64;
            s += Self::sign(i) * 4.0 / (PI * k) * decay * cos(alpha * y);
            last = (c * 4.0 / (PI * k) * decay).abs();
        }
        (self.traction / eu + c * (1.0 - s), last)
    }

    /// Vertical strain `ε_yy = ∂u_y/∂y`.
    pub fn strain(&self, y: f64, t: f64) -> f64 {
        auto_terms(|n| self.strain_partial(y, t, n))
    }

    /// Vertical effective stress `σ′_yy = E ε_yy`.
    pub fn effective_stress(&self, y: f64, t: f64) -> f64 {
        self.young * self.strain(y, t)
    }

    /// Vertical total stress `σ′_yy − b p`; equals the applied traction.
    pub fn total_stress(&self, y: f64, t: f64) -> f64 {
        self.effective_stress(y, t) - self.biot * self.pressure(y, t)
    }
}

/// Pore pressure of the consolidation column with `n_terms` series terms.
pub fn terzaghi_pressure(y: f64, t: f64, p: &TerzaghiParams, n_terms: usize) -> f64 {
    p.pressure_terms(y, t, n_terms)
}

/// Vertical displacement of the consolidation column with `n_terms` terms.
pub fn terzaghi_displacement(y: f64, t: f64, p: &TerzaghiParams, n_terms: usize) -> f64 {
    p.displacement_terms(y, t, n_terms)
}

// ---------------------------------------------------------------------------
// Stress relaxation
// ---------------------------------------------------------------------------

/// Parameters of the ramp-and-hold relaxation column.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RelaxationParams {
    /// Shear modulus `G` (Pa).
    pub shear: f64,
    /// Lamé parameter `λ` (Pa).
    pub lambda: f64,
    /// Column height `H` (m).
    pub height: f64,
    /// Hydraulic conductivity `k/μ_f` (m²/(Pa·s)).
    pub conductivity: f64,
    /// Top displacement rate `u̇_z` (m/s, negative in compression).
    pub rate: f64,
    /// End of the ramp `t_ramp` (s).
    pub ramp_time: f64,
}

impl RelaxationParams {
    /// P-wave (constrained) modulus `2G + λ`.
    pub fn constrained_modulus(&self) -> f64 {
        2.0 * self.shear + self.lambda
    }

    /// Consolidation coefficient `k(2G + λ)` (m²/s).
    pub fn diffusivity(&self) -> f64 {
        self.conductivity * self.constrained_modulus()
    }

    /// Drained (ramp) part `u̇ (2G+λ)/H · min(t, t_ramp)`.
    fn drained_part(&self, t: f64) -> f64 {
        self.rate * self.constrained_modulus() / self.height * t.min(self.ramp_time)
    }

    /// Prefactor `2 u̇ H / (k/μ_f)` of the series.
    fn prefactor(&self) -> f64 {
        2.0 * self.rate * self.height / self.conductivity
    }

    /// Top traction with exactly `n_terms` series terms (`i = 1..=n_terms`),
    /// summed as written.
    ///
    /// The traction is zero at `t = 0`; the hold branch applies from
    /// `t_ramp` on, which keeps the history continuous. The partial sums
    /// converge like `1/n_terms` near `t = 0` and `t = t_ramp`.
    pub fn traction_terms(&self, t: f64, n_terms: usize) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let (h, tr, c) = (self.height, self.ramp_time, self.diffusivity());
        let mut s = 0.0;
        for i in 1..=n_terms {
            let ip2 = (i * i) as f64 * PI * PI;
            let a = ip2 * c / (h * h);
            let term = if t < tr { 1.0 - exp(-a * t) } else { exp(-a * (t - tr)) - exp(-a * t) };
            s += term / ip2;
        }
        self.drained_part(t) + self.prefactor() * s
    }

    /// Top traction, with the series summed to machine precision.
    ///
    /// Uses `Σ_{i≥1} e^{−i²π² s}/(i²π²)` in closed form (see
    /// [`decay_series`]), which removes the slow `1/n` tail of the partial sums.
    pub fn traction(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let (h, tr) = (self.height, self.ramp_time);
        let s = |tau: f64| self.diffusivity() * tau / (h * h);
        let series =
            if t < tr { decay_series(0.0) - decay_series(s(t)) } else { decay_series(s(t - tr)) - decay_series(s(t)) };
        self.drained_part(t) + self.prefactor() * series
    }
}

/// `g(s) = Σ_{i≥1} e^{−i²π² s} / (i²π²)` for `s ≥ 0`; `g(0) = 1/6`.
///
/// For small `s` the Poisson-summation (theta-function) form
/// `g(s) = 1/6 + s/2 − √(s/π) + (2/√π) Σ_{k≥1} [k√π erfc(k/√s) − √s e^{−k²/s}]`
/// converges after a handful of terms; for larger `s` the direct sum does.
pub fn decay_series(s: f64) -> f64 {
    use crate::math::sqrt;
    if s <= 0.0 {
        return 1.0 / 6.0;
    }
    if s < 0.25 {
        let rs = sqrt(s);
        let mut g = 1.0 / 6.0 + 0.5 * s - rs / sqrt(PI);
        for k in 1..8 {
            let k = k as f64;
            g -= 2.0 / sqrt(PI) * (rs * exp(-k * k / s) - k * sqrt(PI) * libm::erfc(k / rs));
        }
        g
    } else {
        let mut g = 0.0;
        for i in 1..40 {
            let ip2 = (i * i) as f64 * PI * PI;
            g += exp(-ip2 * s) / ip2;
        }
        g
    }
}

/// Top traction history of the relaxation column with `n_terms` terms.
pub fn relaxation_traction(t: f64, p: &RelaxationParams, n_terms: usize) -> f64 {
    p.traction_terms(t, n_terms)
}

// ---------------------------------------------------------------------------
// Manufactured steady diffusion
// ---------------------------------------------------------------------------

/// Value, gradient and source of the manufactured field `p = x² + y² + z²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    /// Pressure.
    pub p: f64,
    /// Gradient `2(x, y, z)`.
    pub grad_p: [f64; 3],
    /// Source `s = 6k` such that `div(−k∇p) + s = 0`.
    pub source: f64,
}

/// Manufactured solution of `div(−k ∇p) + s = 0` at `(x, y, z)`.
pub fn poisson_manufactured(x: f64, y: f64, z: f64, k: f64) -> Manufactured {
    Manufactured { p: x * x + y * y + z * z, grad_p: [2.0 * x, 2.0 * y, 2.0 * z], source: 6.0 * k }
}

// ---------------------------------------------------------------------------
// Error measures
// ---------------------------------------------------------------------------

/// Spatial error of one field at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpaceError {
    /// `∫|dd − ref| / ∫|ref|`, or `∫|dd − ref|` when the reference vanishes.
    pub value: f64,
    /// `false` when the reference integral was zero and the absolute
    /// integral is reported instead.
    pub relative: bool,
}

/// `∫|dd − ref| dΩ / ∫|ref| dΩ` evaluated with integration-point values and
/// weights (weight × Jacobian).
pub fn err_space(dd: &[f64], reference: &[f64], weights: &[f64]) -> Result<SpaceError> {
    if dd.len() != reference.len() || dd.len() != weights.len() {
        return Err(Error::shape(alloc::format!(
            "error fields have {} / {} values for {} weights",
            dd.len(),
            reference.len(),
            weights.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((a, b), w) in dd.iter().zip(reference).zip(weights) {
        num += w * (a - b).abs();
        den += w * b.abs();
    }
    if !num.is_finite() || !den.is_finite() {
        return Err(Error::NonFinite("error integrand"));
    }
    if den > 0.0 {
        Ok(SpaceError { value: num / den, relative: true })
    } else {
        Ok(SpaceError { value: num, relative: false })
    }
}

/// Time average `(Δt / t_end) Σ_n Err_{t_n}` over the supplied per-step
/// errors (one per completed step; the initial state is not included).
pub fn err_space_time(errors: &[f64], dt: f64, t_end: f64) -> Result<f64> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::invalid("time step and end time must be positive"));
    }
    Ok(dt / t_end * errors.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{integration_points, meshes, QuadRule};
    use proptest::prelude::*;

    fn terzaghi() -> TerzaghiParams {
        TerzaghiParams {
            young: 70e9,
            biot: 1.0,
            modulus: 266.667e9,
            conductivity: 3.0612e-12,
            height: 1.0,
            traction: -0.9e9,
        }
    }

    fn relaxation() -> RelaxationParams {
        // E = 100 GPa, ν = 0.25
        RelaxationParams {
            shear: 40e9,
            lambda: 40e9,
            height: 10.0,
            conductivity: 8.33e-11,
            rate: -0.005,
            ramp_time: 2.0,
        }
    }

    #[test]
    fn terzaghi_drained_top_has_zero_pressure() {
        let p = terzaghi();
        for &t in &[0.0, 0.1, 1.0, 10.0] {
            assert!(p.pressure(1.0, t).abs() < 1e-6 * 0.9e9);
        }
    }

    #[test]
    fn terzaghi_initial_undrained_response() {
        let p = terzaghi();
        let eu = p.young + p.modulus;
        // mid-height, early time: pressure equals the undrained value
        let p0 = -p.modulus * p.traction / eu;
        assert!((p.pressure(0.3, 1e-6) - p0).abs() < 1e-3 * p0);
        // displacement at t = 0 is the undrained compression
        let u0 = p.displacement(0.7, 0.0);
        assert!((u0 - 0.7 * p.traction / eu).abs() < 1e-6 * u0.abs());
    }

    #[test]
    fn terzaghi_long_time_limits() {
        let p = terzaghi();
        let t = 100.0 / p.diffusivity();
        assert!(p.pressure(0.2, t).abs() < 1e-6);
        let u = p.displacement(1.0, t);
        assert!((u - p.traction / p.young).abs() < 1e-12);
    }

    #[test]
    fn terzaghi_diffusivity_value() {
        let c = terzaghi().diffusivity();
        assert!((c - 0.1700).abs() < 1e-3, "{c}");
    }

    #[test]
    fn terzaghi_equilibrium_and_derivatives() {
        let p = terzaghi();
        for &t in &[0.1, 0.5, 2.0] {
            for &y in &[0.0, 0.25, 0.5, 0.9] {
                assert!((p.total_stress(y, t) - p.traction).abs() < 1e-6 * p.traction.abs());
                let h = 1e-5;
                let fd = (p.pressure(y + h, t) - p.pressure(y - h, t)) / (2.0 * h);
                assert!((fd - p.pressure_gradient(y, t)).abs() < 1e-5 * 1e9, "{fd}");
                let fd = (p.displacement(y + h, t) - p.displacement(y - h, t)) / (2.0 * h);
                assert!((fd - p.strain(y, t)).abs() < 1e-8, "{fd}");
            }
        }
    }

    #[test]
    fn terzaghi_term_doubling_converges() {
        let p = terzaghi();
        for &t in &[0.1, 1.0, 5.0, 10.0] {
            for &y in &[0.0, 0.3, 0.6, 0.95] {
                let a = terzaghi_pressure(y, t, &p, 500);
                let b = terzaghi_pressure(y, t, &p, 1000);
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
                let a = terzaghi_displacement(y, t, &p, 500);
                let b = terzaghi_displacement(y, t, &p, 1000);
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn relaxation_starts_at_zero() {
        assert_eq!(relaxation_traction(0.0, &relaxation(), 1000), 0.0);
    }

    #[test]
    fn relaxation_long_time_limit() {
        let p = relaxation();
        let limit = p.rate * p.ramp_time * p.constrained_modulus() / p.height;
        let t = 100.0 * p.height * p.height / p.diffusivity();
        assert!((p.traction(t) - limit).abs() < 1e-9 * limit.abs());
    }

    #[test]
    fn relaxation_continuous_at_ramp_end() {
        let p = relaxation();
        let a = p.traction(p.ramp_time - 1e-9);
        let b = p.traction(p.ramp_time);
        assert!((a - b).abs() < 1e-6 * b.abs());
    }

    #[test]
    fn decay_series_branches_agree() {
        for &s in &[1e-6, 1e-3, 0.05, 0.2, 0.25, 0.3, 1.0] {
            let direct: f64 = (1..200_000)
                .map(|i: u64| {
                    let ip2 = (i * i) as f64 * PI * PI;
                    exp(-ip2 * s) / ip2
                })
                .sum();
            // direct sums are truncated: tail ≤ 1/(π² n)
            assert!((decay_series(s) - direct).abs() < 1e-6, "{s}");
        }
        for &s in &[0.2, 0.25, 0.3] {
            let direct: f64 = (1..100)
                .map(|i: u64| {
                    let ip2 = (i * i) as f64 * PI * PI;
                    exp(-ip2 * s) / ip2
                })
                .sum();
            assert!((decay_series(s) - direct).abs() < 1e-15, "{s}");
        }
        assert!((decay_series(1e-12) - 1.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn relaxation_term_doubling() {
        let p = relaxation();
        for &t in &[0.1, 2.0, 10.0] {
            let exact = p.traction(t);
            let bound = p.prefactor().abs() / (PI * PI);
            let a = relaxation_traction(t, &p, 1000);
            let b = relaxation_traction(t, &p, 2000);
            assert!((a - exact).abs() <= bound / 1000.0, "{t}: {a} {exact}");
            assert!((b - exact).abs() <= bound / 2000.0, "{t}: {b} {exact}");
            assert!((b - exact).abs() <= (a - exact).abs() + 1e-6);
            assert!(exact < 0.0);
        }
        // held phase decays towards the drained value: monotone increase
        assert!(p.traction(10.0) > p.traction(2.0));
        assert!(p.traction(3.0) > p.traction(2.0));
    }

    #[test]
    fn manufactured_values() {
        let m = poisson_manufactured(0.0, 0.0, 0.0, 1.0);
        assert_eq!((m.p, m.grad_p), (0.0, [0.0; 3]));
        let m = poisson_manufactured(1.0, 0.0, 0.0, 1.0);
        assert_eq!((m.p, m.grad_p, m.source), (1.0, [2.0, 0.0, 0.0], 6.0));
    }

    #[test]
    fn manufactured_divergence_identity() {
        let k = 2.5;
        let h = 1e-4;
        for &x in &[[0.1, -0.3, 0.4], [0.5, 0.5, -0.5], [-0.2, 0.0, 0.33]] {
            let mut div = 0.0;
            for i in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let gp = poisson_manufactured(xp[0], xp[1], xp[2], k).grad_p[i];
                let gm = poisson_manufactured(xm[0], xm[1], xm[2], k).grad_p[i];
                div += -k * (gp - gm) / (2.0 * h);
            }
            let s = poisson_manufactured(x[0], x[1], x[2], k).source;
            assert!((div + s).abs() < 1e-8);
        }
    }

    #[test]
    fn err_space_trivial_cases() {
        let w = [0.5, 0.25, 0.25];
        assert_eq!(err_space(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &w).unwrap().value, 0.0);
        let e = err_space(&[1.1; 3], &[1.0; 3], &w).unwrap();
        assert!((e.value - 0.1).abs() < 1e-14 && e.relative);
        let e = err_space(&[1.0; 3], &[0.0; 3], &w).unwrap();
        assert!(!e.relative && (e.value - 1.0).abs() < 1e-14);
        assert!(err_space(&[1.0], &[1.0, 2.0], &w).is_err());
        assert!((err_space_time(&[0.1, 0.3], 0.5, 1.0).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn err_space_matches_dense_sampling() {
        let mesh = meshes::square(1.0, 8).unwrap();
        let rule = QuadRule::gauss_nd(2, 3);
        let pts = integration_points(&mesh, &rule).unwrap();
        let f = |x: &[f64; 3]| sin(3.0 * x[0]) + x[1] * x[1];
        let g = |x: &[f64; 3]| cos(2.0 * x[1]) + 0.5 * x[0];
        let dd: Vec<f64> = pts.iter().map(|p| f(&p.x)).collect();
        let rf: Vec<f64> = pts.iter().map(|p| g(&p.x)).collect();
        let w: Vec<f64> = pts.iter().map(|p| p.weight).collect();
        let e = err_space(&dd, &rf, &w).unwrap().value;
        let n = 600;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let x = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64, 0.0];
                num += (f(&x) - g(&x)).abs();
                den += g(&x).abs();
            }
        }
        assert!((e - num / den).abs() < 1e-3 * (num / den), "{e} vs {}", num / den);
    }

    proptest! {
        #[test]
        fn err_space_nonnegative_and_scale_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 1..20),
            alpha in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
        ) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + (i as f64 * 0.37).sin()).collect();
            let w = vec![1.0; a.len()];
            let e = err_space(&a, &b, &w).unwrap();
            prop_assert!(e.value >= 0.0);
            let sa: Vec<f64> = a.iter().map(|v| alpha * v).collect();
            let sb: Vec<f64> = b.iter().map(|v| alpha * v).collect();
            let es = err_space(&sa, &sb, &w).unwrap();
            if e.relative {
                prop_assert!((es.value - e.value).abs() <= 1e-12 * e.value.max(1e-300) + 1e-15);
            }
            prop_assert_eq!(err_space(&a, &a, &w).unwrap().value, 0.0);
        }

        #[test]
        fn terzaghi_doubling_uniform(y in 0.0f64..1.0, t in 0.1f64..10.0) {
            let p = terzaghi();
            let a = terzaghi_pressure(y, t, &p, 500);
            let b = terzaghi_pressure(y, t, &p, 1000);
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }
}
