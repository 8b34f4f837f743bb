//! Constitutive laws: pressure, internal energy, entropy, transport
//! coefficients, ballistic free energy and the relative entropy density.
//!
//! Pressure and energy follow the self-similar form
//! `p = θ^{γ/(γ-1)} P(Z) + (a/3) θ⁴`, `Z = ρ / θ^{1/(γ-1)}`,
//! with `ρ e = p₁ / (γ-1) + a θ⁴`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("invalid thermodynamic parameters: {0}")]
    InvalidParams(String),
}

fn domain(what: &'static str, value: f64) -> ThermoError {
    ThermoError::Domain { what, value }
}

/// The structural function `P(Z)` of the pressure law together with the
/// entropy profile `M(Z)` it induces through `M'(Z) = -(γP - P'Z)/((γ-1)Z²)`.
pub trait StructuralFunction: Send + Sync {
    fn value(&self, z: f64) -> f64;
    fn derivative(&self, z: f64) -> f64;
    /// `M(Z)`, normalised so that `M(Z) -> 0` as `Z -> ∞`.
    fn entropy_profile(&self, z: f64) -> f64;
    fn entropy_profile_derivative(&self, z: f64) -> f64;
    fn gamma(&self) -> f64;
}

/// `P(Z) = p_inf Z^γ + Z / (1 + bZ)`. The default equation of state uses `b = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalPressure {
    pub gamma: f64,
    pub p_inf: f64,
    pub b: f64,
}

impl StructuralFunction for RationalPressure {
    fn value(&self, z: f64) -> f64 {
        self.p_inf * z.powf(self.gamma) + z / (1.0 + self.b * z)
    }

    fn derivative(&self, z: f64) -> f64 {
        let d = 1.0 + self.b * z;
        self.gamma * self.p_inf * z.powf(self.gamma - 1.0) + 1.0 / (d * d)
    }

    fn entropy_profile(&self, z: f64) -> f64 {
        let bz = self.b * z;
        (1.0 / bz).ln_1p() + 1.0 / ((self.gamma - 1.0) * (1.0 + bz))
    }

    fn entropy_profile_derivative(&self, z: f64) -> f64 {
        let d = 1.0 + self.b * z;
        -1.0 / (z * d) - self.b / ((self.gamma - 1.0) * d * d)
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoParams {
    pub gamma: f64,
    /// Radiation constant.
    pub a: f64,
    pub p_inf: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub kappa0: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    /// Saturation scale `b` of the low-density branch `Z/(1+bZ)`.
    #[serde(default = "one")]
    pub saturation: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ThermoParams {
    fn default() -> Self {
        Self {
            gamma: 5.0 / 3.0,
            a: 0.0,
            p_inf: 1.0,
            mu0: 0.01,
            mu1: 0.01,
            kappa0: 0.01,
            kappa2: 0.01,
            kappa3: 0.01,
            saturation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoState {
    pub rho: f64,
    pub theta: f64,
}

impl ThermoState {
    pub fn new(rho: f64, theta: f64) -> Self {
        Self { rho, theta }
    }
}

/// Everything the flux and source assembly needs at one state, from two `powf` calls.
#[derive(Debug, Clone, Copy)]
pub struct EosPoint {
    pub p: f64,
    pub rho_e: f64,
    pub dp_drho: f64,
    pub dp_dtheta: f64,
    /// `∂(ρe)/∂θ` at fixed ρ.
    pub drho_e_dtheta: f64,
}

impl EosPoint {
    /// Adiabatic sound speed `c² = ∂p/∂ρ + θ (∂p/∂θ)² / (ρ² c_v)`.
    pub fn sound_speed(&self, rho: f64, theta: f64) -> f64 {
        let extra = if self.drho_e_dtheta > 0.0 && rho > 0.0 {
            theta * self.dp_dtheta * self.dp_dtheta / (rho * self.drho_e_dtheta)
        } else {
            0.0
        };
        (self.dp_drho + extra).max(0.0).sqrt()
    }
}

impl ThermoParams {
    pub fn with_radiation(a: f64) -> Self {
        Self { a, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ThermoError> {
        let positive = [
            ("p_inf", self.p_inf),
            ("mu0", self.mu0),
            ("mu1", self.mu1),
            ("kappa0", self.kappa0),
            ("kappa2", self.kappa2),
            ("kappa3", self.kappa3),
            ("saturation", self.saturation),
        ];
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(ThermoError::InvalidParams(format!(
                "gamma must exceed 1, got {}",
                self.gamma
            )));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(ThermoError::InvalidParams(format!(
                "radiation constant must be nonnegative, got {}",
                self.a
            )));
        }
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ThermoError::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn structural(&self) -> RationalPressure {
        RationalPressure {
            gamma: self.gamma,
            p_inf: self.p_inf,
            b: self.saturation,
        }
    }

    #[inline]
    fn inv_gm1(&self) -> f64 {
        1.0 / (self.gamma - 1.0)
    }

    /// `θ^{1/(γ-1)}`.
    #[inline]
    fn theta_scale(&self, theta: f64) -> f64 {
        theta.powf(self.inv_gm1())
    }

    #[inline]
    pub fn z(&self, rho: f64, theta: f64) -> f64 {
        rho / self.theta_scale(theta)
    }

    /// Non-radiative pressure `p₁`.
    pub fn p_elastic(&self, rho: f64, theta: f64) -> f64 {
        let ts = self.theta_scale(theta);
        theta * ts * self.structural().value(rho / ts)
    }

    pub fn p(&self, rho: f64, theta: f64) -> f64 {
        self.p_elastic(rho, theta) + self.a / 3.0 * theta.powi(4)
    }

    pub fn rho_e(&self, rho: f64, theta: f64) -> f64 {
        self.p_elastic(rho, theta) * self.inv_gm1() + self.a * theta.powi(4)
    }

    pub fn e(&self, rho: f64, theta: f64) -> f64 {
        self.rho_e(rho, theta) / rho
    }

    pub fn s(&self, rho: f64, theta: f64) -> f64 {
        self.structural().entropy_profile(self.z(rho, theta))
            + 4.0 * self.a / 3.0 * theta.powi(3) / rho
    }

    /// `ρ s`, continuous down to ρ = 0.
    pub fn rho_s(&self, rho: f64, theta: f64) -> f64 {
        let rad = 4.0 * self.a / 3.0 * theta.powi(3);
        if rho == 0.0 {
            rad
        } else {
            rho * self.structural().entropy_profile(self.z(rho, theta)) + rad
        }
    }

    pub fn mu(&self, theta: f64) -> f64 {
        self.mu0 + self.mu1 * theta
    }

    pub fn kappa(&self, theta: f64) -> f64 {
        let t2 = theta * theta;
        self.kappa0 + self.kappa2 * t2 + self.kappa3 * t2 * theta
    }

    pub fn eval(&self, rho: f64, theta: f64) -> EosPoint {
        let sf = self.structural();
        let g1 = self.inv_gm1();
        let ts = self.theta_scale(theta);
        let z = rho / ts;
        let zg = z.powf(self.gamma);
        let d = 1.0 + sf.b * z;
        let pz = self.p_inf * zg + z / d;
        // P'(Z) Z, written without dividing by Z so that ρ = 0 stays finite.
        let dpz_z = self.gamma * self.p_inf * zg + z / (d * d);
        let dpz = if z > 0.0 {
            dpz_z / z
        } else {
            sf.derivative(0.0)
        };
        let t4 = theta.powi(4);
        let p1 = theta * ts * pz;
        // ∂p₁/∂θ = θ^{1/(γ-1)} (γP - P'Z)/(γ-1)
        let dp1_dtheta = ts * (self.gamma * pz - dpz_z) * g1;
        EosPoint {
            p: p1 + self.a / 3.0 * t4,
            rho_e: p1 * g1 + self.a * t4,
            dp_drho: theta * dpz,
            dp_dtheta: dp1_dtheta + 4.0 * self.a / 3.0 * theta.powi(3),
            drho_e_dtheta: dp1_dtheta * g1 + 4.0 * self.a * theta.powi(3),
        }
    }

    /// `∂e/∂θ` at fixed ρ.
    pub fn cv(&self, rho: f64, theta: f64) -> f64 {
        self.eval(rho, theta).drho_e_dtheta / rho
    }

    /// `∂e/∂ρ` at fixed θ, equal to `(p - θ ∂p/∂θ)/ρ²`.
    pub fn de_drho(&self, rho: f64, theta: f64) -> f64 {
        let pt = self.eval(rho, theta);
        (pt.p - theta * pt.dp_dtheta) / (rho * rho)
    }

    /// `∂s/∂ρ` at fixed θ.
    pub fn ds_drho(&self, rho: f64, theta: f64) -> f64 {
        let ts = self.theta_scale(theta);
        self.structural().entropy_profile_derivative(rho / ts) / ts
            - 4.0 * self.a / 3.0 * theta.powi(3) / (rho * rho)
    }

    /// `∂s/∂θ` at fixed ρ.
    pub fn ds_dtheta(&self, rho: f64, theta: f64) -> f64 {
        let z = self.z(rho, theta);
        -self.structural().entropy_profile_derivative(z) * z * self.inv_gm1() / theta
            + 4.0 * self.a * theta * theta / rho
    }

    /// `∂_ρ H_θ(ρ, θ)` with the reference temperature equal to θ:
    /// `θ P'(Z)/(γ-1) - θ (M(Z) + Z M'(Z))`. This is the Gibbs free energy `e - θs + p/ρ`.
    pub fn dh_drho(&self, rho: f64, theta: f64) -> f64 {
        let sf = self.structural();
        let z = self.z(rho, theta);
        theta * sf.derivative(z) * self.inv_gm1()
            - theta * (sf.entropy_profile(z) + z * sf.entropy_profile_derivative(z))
    }

    /// `ρe` at θ → 0⁺, the cold-compression floor of the internal energy.
    pub fn cold_energy(&self, rho: f64) -> f64 {
        self.p_inf * rho.powf(self.gamma) * self.inv_gm1()
    }

    /// Solves `ρ e(ρ, θ) = rho_e` for θ by safeguarded Newton iteration.
    /// Returns `None` when the energy lies at or below the cold floor.
    pub fn theta_from_rho_e(&self, rho: f64, rho_e: f64, guess: f64) -> Option<f64> {
        if !(rho > 0.0) || !rho_e.is_finite() || rho_e <= self.cold_energy(rho) {
            return None;
        }
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        let mut theta = if guess > 0.0 && guess.is_finite() { guess } else { 1.0 };
        for _ in 0..100 {
            let pt = self.eval(rho, theta);
            let f = pt.rho_e - rho_e;
            if f == 0.0 {
                return Some(theta);
            }
            if f > 0.0 {
                hi = hi.min(theta);
            } else {
                lo = lo.max(theta);
            }
            let mut next = theta - f / pt.drho_e_dtheta;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if hi.is_finite() {
                    0.5 * (lo + hi)
                } else {
                    2.0 * theta.max(lo)
                };
            }
            if (next - theta).abs() <= 4.0 * f64::EPSILON * theta {
                return Some(next);
            }
            theta = next;
        }
        Some(theta)
    }
}

fn check_state(s: &ThermoState) -> Result<(), ThermoError> {
    if !(s.rho > 0.0 && s.rho.is_finite()) {
        return Err(domain("density", s.rho));
    }
    if !(s.theta > 0.0 && s.theta.is_finite()) {
        return Err(domain("temperature", s.theta));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<(), ThermoError> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(domain("temperature", theta))
    }
}

pub fn structural_p(params: &ThermoParams, z: f64) -> Result<f64, ThermoError> {
    if !(z >= 0.0) {
        return Err(domain("Z", z));
    }
    Ok(params.structural().value(z))
}

pub fn pressure(params: &ThermoParams, s: &ThermoState) -> Result<f64, ThermoError> {
    check_state(s)?;
    Ok(params.p(s.rho, s.theta))
}

pub fn internal_energy(params: &ThermoParams, s: &ThermoState) -> Result<f64, ThermoError> {
    check_state(s)?;
    Ok(params.e(s.rho, s.theta))
}

pub fn entropy(params: &ThermoParams, s: &ThermoState) -> Result<f64, ThermoError> {
    check_state(s)?;
    Ok(params.s(s.rho, s.theta))
}

pub fn viscosity(params: &ThermoParams, theta: f64) -> Result<f64, ThermoError> {
    check_theta(theta)?;
    Ok(params.mu(theta))
}

pub fn conductivity(params: &ThermoParams, theta: f64) -> Result<f64, ThermoError> {
    check_theta(theta)?;
    Ok(params.kappa(theta))
}

/// `H_θ̃(ρ, θ) = ρe - θ̃ ρ s`.
pub fn helmholtz_ballistic(
    params: &ThermoParams,
    s: &ThermoState,
    theta_ref: f64,
) -> Result<f64, ThermoError> {
    check_state(s)?;
    check_theta(theta_ref)?;
    Ok(ballistic(params, s.rho, s.theta, theta_ref))
}

#[inline]
pub(crate) fn ballistic(params: &ThermoParams, rho: f64, theta: f64, theta_ref: f64) -> f64 {
    if rho == 0.0 {
        params.a * theta.powi(4) - theta_ref * params.rho_s(0.0, theta)
    } else {
        params.rho_e(rho, theta) - theta_ref * params.rho_s(rho, theta)
    }
}

/// `𝓔(ρ,θ | r,Θ) = H_Θ(ρ,θ) - ∂_ρH_Θ(r,Θ)(ρ - r) - H_Θ(r,Θ)`; ρ = 0 is admitted.
pub fn relative_entropy_density(
    params: &ThermoParams,
    s: &ThermoState,
    r: f64,
    theta_ref: f64,
) -> Result<f64, ThermoError> {
    if !(s.rho >= 0.0 && s.rho.is_finite()) {
        return Err(domain("density", s.rho));
    }
    check_theta(s.theta)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(domain("reference density", r));
    }
    check_theta(theta_ref)?;
    Ok(relative_entropy_raw(params, s.rho, s.theta, r, theta_ref))
}

#[inline]
pub(crate) fn relative_entropy_raw(
    params: &ThermoParams,
    rho: f64,
    theta: f64,
    r: f64,
    theta_ref: f64,
) -> f64 {
    ballistic(params, rho, theta, theta_ref)
        - params.dh_drho(r, theta_ref) * (rho - r)
        - ballistic(params, r, theta_ref, theta_ref)
}

fn fd_steps(s: &ThermoState, h: f64) -> (f64, f64) {
    (h * s.rho.max(1.0), h * s.theta.max(1.0))
}

/// Finite-difference Maxwell residual `|∂e/∂ρ - (p - θ∂p/∂θ)/ρ²|`, divided by
/// `max(1, |∂e/∂ρ|, |p|/ρ², θ|∂p/∂θ|/ρ²)` so that it is meaningful across
/// scales. `h` is a relative step: the actual steps are `h·max(1, ρ)` and `h·max(1, θ)`.
pub fn maxwell_residual(params: &ThermoParams, s: &ThermoState, h: f64) -> Result<f64, ThermoError> {
    check_state(s)?;
    if !(h > 0.0) {
        return Err(domain("finite-difference step", h));
    }
    let (hr, ht) = fd_steps(s, h);
    let (rho, theta) = (s.rho, s.theta);
    let de_drho = (params.e(rho + hr, theta) - params.e(rho - hr, theta)) / (2.0 * hr);
    let dp_dtheta = (params.p(rho, theta + ht) - params.p(rho, theta - ht)) / (2.0 * ht);
    let p = params.p(rho, theta);
    let r2 = rho * rho;
    let rhs = (p - theta * dp_dtheta) / r2;
    let scale = 1f64
        .max(de_drho.abs())
        .max(p.abs() / r2)
        .max((theta * dp_dtheta).abs() / r2);
    Ok((de_drho - rhs).abs() / scale)
}

/// Finite-difference Gibbs residual `|θ Ds - (De + p D(1/ρ))|` along the ρ and
/// θ directions, normalised like [`maxwell_residual`]; returns the larger of the two.
pub fn gibbs_residual(params: &ThermoParams, s: &ThermoState, h: f64) -> Result<f64, ThermoError> {
    check_state(s)?;
    if !(h > 0.0) {
        return Err(domain("finite-difference step", h));
    }
    let (hr, ht) = fd_steps(s, h);
    let (rho, theta) = (s.rho, s.theta);
    let p = params.p(rho, theta);

    let ds = (params.s(rho + hr, theta) - params.s(rho - hr, theta)) / (2.0 * hr);
    let de = (params.e(rho + hr, theta) - params.e(rho - hr, theta)) / (2.0 * hr);
    let dv = -1.0 / (rho * rho);
    let along_rho = (theta * ds - (de + p * dv)).abs()
        / 1f64
            .max((theta * ds).abs())
            .max(de.abs())
            .max((p * dv).abs());

    let ds = (params.s(rho, theta + ht) - params.s(rho, theta - ht)) / (2.0 * ht);
    let de = (params.e(rho, theta + ht) - params.e(rho, theta - ht)) / (2.0 * ht);
    let along_theta = (theta * ds - de).abs() / 1f64.max((theta * ds).abs()).max(de.abs());

    Ok(along_rho.max(along_theta))
}

/// Largest normalised Maxwell and Gibbs residuals over an `n × n` log-spaced
/// `(ρ, θ)` lattice spanning `[lo, hi]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub a: f64,
    pub points: usize,
    pub max_maxwell: f64,
    pub max_gibbs: f64,
}

pub fn consistency_scan(params: &ThermoParams, n: usize, lo: f64, hi: f64) -> Result<ConsistencyReport, ThermoError> {
    params.validate()?;
    if n < 2 || !(lo > 0.0 && hi > lo) {
        return Err(ThermoError::InvalidParams(format!("scan needs n >= 2 and 0 < lo < hi, got {n}, [{lo}, {hi}]")));
    }
    let axis: Vec<f64> = (0..n)
        .map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (n - 1) as f64).exp())
        .collect();
    let mut rep = ConsistencyReport {
        a: params.a,
        points: 0,
        max_maxwell: 0.0,
        max_gibbs: 0.0,
    };
    for &rho in &axis {
        for &theta in &axis {
            let st = ThermoState::new(rho, theta);
            rep.max_maxwell = rep.max_maxwell.max(maxwell_residual(params, &st, 1e-5)?);
            rep.max_gibbs = rep.max_gibbs.max(gibbs_residual(params, &st, 1e-5)?);
            rep.points += 1;
        }
    }
    Ok(rep)
}

/// Measured properties of a structural function on a log-spaced `Z` sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructuralReport {
    pub z_min: f64,
    pub z_max: f64,
    pub samples: usize,
    /// `P(0)`.
    pub value_at_zero: f64,
    pub min_derivative: f64,
    /// Range of `(γP - P'Z)/Z`; the upper end is the measured constant.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// `|P(Z)/Z^γ - p_inf|` at the largest sample.
    pub tail_error: f64,
    /// Largest `M'(Z)`; must be negative.
    pub max_entropy_slope: f64,
    /// `|M(z_max)|`.
    pub entropy_tail: f64,
}

impl StructuralReport {
    pub fn passed(&self, tail_tol: f64) -> bool {
        self.value_at_zero == 0.0
            && self.min_derivative > 0.0
            && self.ratio_min > 0.0
            && self.ratio_max.is_finite()
            && self.max_entropy_slope < 0.0
            && self.entropy_tail < tail_tol
    }
}

pub fn structural_report(
    f: &dyn StructuralFunction,
    p_inf: f64,
    z_min: f64,
    z_max: f64,
    samples: usize,
) -> StructuralReport {
    let g = f.gamma();
    let mut rep = StructuralReport {
        z_min,
        z_max,
        samples,
        value_at_zero: f.value(0.0),
        min_derivative: f64::INFINITY,
        ratio_min: f64::INFINITY,
        ratio_max: f64::NEG_INFINITY,
        tail_error: (f.value(z_max) / z_max.powf(g) - p_inf).abs(),
        max_entropy_slope: f64::NEG_INFINITY,
        entropy_tail: f.entropy_profile(z_max).abs(),
    };
    let span = (z_max / z_min).ln();
    for k in 0..samples {
        let z = (z_min.ln() + span * k as f64 / (samples - 1) as f64).exp();
        let (p, dp) = (f.value(z), f.derivative(z));
        rep.min_derivative = rep.min_derivative.min(dp);
        let ratio = (g * p - dp * z) / z;
        rep.ratio_min = rep.ratio_min.min(ratio);
        rep.ratio_max = rep.ratio_max.max(ratio);
        rep.max_entropy_slope = rep.max_entropy_slope.max(f.entropy_profile_derivative(z));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gas() -> ThermoParams {
        ThermoParams::default()
    }

    #[test]
    fn pressure_at_unit_state() {
        assert!((gas().p(1.0, 1.0) - 1.5).abs() < 1e-15);
        let rad = ThermoParams::with_radiation(3.0);
        assert!((rad.p(1.0, 1.0) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn eval_matches_scalar_functions() {
        let p = ThermoParams::with_radiation(0.7);
        for &(rho, theta) in &[(0.3, 2.0), (1.0, 1.0), (5.0, 0.4)] {
            let pt = p.eval(rho, theta);
            assert!((pt.p - p.p(rho, theta)).abs() < 1e-12 * pt.p.abs().max(1.0));
            assert!((pt.rho_e - p.rho_e(rho, theta)).abs() < 1e-12 * pt.rho_e.max(1.0));
            let h = 1e-6;
            let fd = (p.p(rho + h, theta) - p.p(rho - h, theta)) / (2.0 * h);
            assert!((pt.dp_drho - fd).abs() < 1e-7 * fd.abs().max(1.0));
            let fd = (p.p(rho, theta + h) - p.p(rho, theta - h)) / (2.0 * h);
            assert!((pt.dp_dtheta - fd).abs() < 1e-7 * fd.abs().max(1.0));
            let fd = (p.rho_e(rho, theta + h) - p.rho_e(rho, theta - h)) / (2.0 * h);
            assert!((pt.drho_e_dtheta - fd).abs() < 1e-7 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn temperature_inversion_round_trips() {
        let p = ThermoParams::with_radiation(0.5);
        for &(rho, theta) in &[(0.01, 50.0), (1.0, 1.0), (20.0, 0.05), (3.0, 7.0)] {
            let target = p.rho_e(rho, theta);
            let got = p.theta_from_rho_e(rho, target, 1.0).unwrap();
            assert!((p.rho_e(rho, got) - target).abs() < 1e-14 * target, "{rho} {theta} {got}");
            assert!((got - theta).abs() < 1e-9 * theta, "{rho} {theta} {got}");
        }
        assert!(gas().theta_from_rho_e(1.0, 0.5 * gas().cold_energy(1.0), 1.0).is_none());
    }

    #[test]
    fn gibbs_free_energy_identity() {
        let p = ThermoParams::with_radiation(1.0);
        for &(rho, theta) in &[(0.2, 0.7), (1.0, 1.0), (9.0, 3.0)] {
            let direct = p.e(rho, theta) - theta * p.s(rho, theta) + p.p(rho, theta) / rho;
            assert!((p.dh_drho(rho, theta) - direct).abs() < 1e-11 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn domain_errors() {
        assert!(structural_p(&gas(), -1.0).is_err());
        assert!(pressure(&gas(), &ThermoState::new(0.0, 1.0)).is_err());
        assert!(viscosity(&gas(), 0.0).is_err());
        assert!(relative_entropy_density(&gas(), &ThermoState::new(0.0, 1.0), 1.0, 1.0).is_ok());
    }
}
