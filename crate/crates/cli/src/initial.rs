//! Well-prepared initial data.
//!
//! The planar density solves `∂_ρH_Θ(r₀, Θ₀) = φ_h(r₀) + χ²|x - a|² + C`,
//! so with `V₀ = 0` and `∇Θ₀ = 0` near `∂ω` the momentum balance holds
//! at the wall. `C` fixes the mean density. Layer data are the constant
//! extension plus a vertical velocity of size `ε`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thinlayer_core::fields::{Field, Grid2D, Grid3D, VecField};
use thinlayer_core::gravity::{ExternalDensity, GravityConfig, GravityEngine2D};
use thinlayer_core::relent::extend_to_3d;
use thinlayer_core::solver2d::State2D;
use thinlayer_core::solver3d::State3D;
use thinlayer_core::thermo::ThermoParams;

use crate::config::{InitialConfig, Recipe, StudyConfig};
use crate::HarnessError;

/// Largest admissible `|∂_ρH_Θ(r₀, Θ₀) - Ψ - C|` on the wall strip.
pub const COMPATIBILITY_TOL: f64 = 1e-6;

/// Cells next to the wall, per side, over which compatibility is checked.
const WALL_STRIP: usize = 2;

const THETA_CENTER: [f64; 2] = [0.4, 0.55];
const THETA_RADIUS: f64 = 0.3;
const SWIRL_CENTER: [f64; 2] = [0.5, 0.5];
const SWIRL_RADIUS: f64 = 0.35;

const FIXED_POINT_DAMPING: f64 = 0.5;
const FIXED_POINT_TOL: f64 = 1e-13;
const FIXED_POINT_ITERS: usize = 400;

#[derive(Debug, Clone)]
pub struct LayerDatum {
    pub eps: f64,
    pub state: State3D,
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub plane: State2D,
    pub layers: Vec<LayerDatum>,
    /// Largest `|∂_ρH_Θ(r₀, Θ₀) - Ψ - C|` over the wall strip.
    pub wall_residual: f64,
    /// Iterations of the self-gravity fixed point (1 without self-gravity).
    pub iterations: usize,
}

/// `cos⁴(π d / 2R)` inside the disc of radius `R`, with its radial derivative.
fn bump(d: f64, radius: f64) -> (f64, f64) {
    if d >= radius {
        return (0.0, 0.0);
    }
    let k = std::f64::consts::FRAC_PI_2 / radius;
    let (s, c) = (k * d).sin_cos();
    (c.powi(4), -4.0 * k * c.powi(3) * s)
}

fn temperature(init: &InitialConfig, grid: &Grid2D) -> Field {
    let amp = match init.recipe {
        Recipe::Bumps => init.theta_bump,
        Recipe::Rest => 0.0,
    };
    Field::from_fn(grid.shape(), |i, j, _| {
        let d = (grid.x(i) - THETA_CENTER[0]).hypot(grid.y(j) - THETA_CENTER[1]);
        init.theta * (1.0 + amp * bump(d, THETA_RADIUS).0)
    })
}

/// `V₀ = A ∇^⊥ψ` for a radial bump `ψ`, scaled so the peak cell speed is `swirl`.
fn swirl(init: &InitialConfig, grid: &Grid2D) -> VecField {
    let s = grid.shape();
    let mut v = VecField::zeros(s, 2);
    if init.recipe == Recipe::Rest || init.swirl == 0.0 {
        return v;
    }
    for j in 0..s.ny {
        for i in 0..s.nx {
            let (dx, dy) = (grid.x(i) - SWIRL_CENTER[0], grid.y(j) - SWIRL_CENTER[1]);
            let d = dx.hypot(dy);
            if d == 0.0 {
                continue;
            }
            let db = bump(d, SWIRL_RADIUS).1;
            v.comps[0].set(i, j, 0, db * dy / d);
            v.comps[1].set(i, j, 0, -db * dx / d);
        }
    }
    let peak = (0..s.ny)
        .flat_map(|j| (0..s.nx).map(move |i| (i, j)))
        .map(|(i, j)| v.comps[0].get(i, j, 0).hypot(v.comps[1].get(i, j, 0)))
        .fold(0.0, f64::max);
    if peak > 0.0 {
        let scale = init.swirl / peak;
        for c in v.comps.iter_mut() {
            for x in c.data_mut() {
                *x *= scale;
            }
        }
    }
    v
}

/// Solves `∂_ρH_θ(ρ, θ) = target` for `ρ > 0`; the left side increases in `ρ`.
pub fn invert_gibbs(params: &ThermoParams, target: f64, theta: f64, guess: f64) -> Option<f64> {
    let f = |l: f64| params.dh_drho(l.exp(), theta) - target;
    let mut x = guess.max(1e-300).ln();
    let mut fx = f(x);
    if fx == 0.0 {
        return Some(x.exp());
    }
    // bracket in log ρ
    let dir = if fx > 0.0 { -1.0 } else { 1.0 };
    let mut step = 0.5;
    let (mut lo, mut hi) = (x, x);
    for _ in 0..200 {
        let y = x + dir * step;
        let fy = f(y);
        if !fy.is_finite() {
            return None;
        }
        if fy.signum() != fx.signum() || fy == 0.0 {
            (lo, hi) = if dir > 0.0 { (x, y) } else { (y, x) };
            break;
        }
        x = y;
        fx = fy;
        step *= 2.0;
    }
    if lo == hi {
        return None;
    }
    // safeguarded Newton, derivative ρ ∂_ρ(∂_ρH) = ∂_ρp
    let mut l = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fl = f(l);
        if fl == 0.0 {
            break;
        }
        if fl > 0.0 {
            hi = l;
        } else {
            lo = l;
        }
        let rho = l.exp();
        let slope = params.eval(rho, theta).dp_drho;
        let mut next = l - fl / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - l).abs() <= 1e-15 * l.abs().max(1.0) {
            l = next;
            break;
        }
        l = next;
    }
    Some(l.exp())
}

fn invert_all(params: &ThermoParams, target: &Field, theta: &Field, guess: &Field, c: f64) -> Option<Field> {
    let s = target.shape();
    let mut out = Field::zeros(s);
    for j in 0..s.ny {
        for i in 0..s.nx {
            let r = invert_gibbs(params, target.get(i, j, 0) + c, theta.get(i, j, 0), guess.get(i, j, 0))?;
            out.set(i, j, 0, r);
        }
    }
    Some(out)
}

fn mean(f: &Field) -> f64 {
    f.interior_values().sum::<f64>() / f.shape().cells() as f64
}

/// Density with the prescribed mean solving the Gibbs relation for a fixed `Ψ`.
fn hydrostatic_density(
    params: &ThermoParams,
    psi: &Field,
    theta: &Field,
    guess: &Field,
    target_mean: f64,
) -> Result<(Field, f64), HarnessError> {
    let fail = || HarnessError::Runtime("compatibility projection fails: Gibbs relation has no positive root".into());
    let mean_at = |c: f64| -> Result<(f64, Field), HarnessError> {
        let r = invert_all(params, psi, theta, guess, c).ok_or_else(fail)?;
        Ok((mean(&r), r))
    };
    let base = params.dh_drho(target_mean, mean(theta)) - mean(psi);
    let (mut lo, mut hi) = (base - 1.0, base + 1.0);
    let mut width = 1.0;
    while mean_at(lo)?.0 > target_mean {
        width *= 2.0;
        lo = base - width;
        if width > 1e12 {
            return Err(fail());
        }
    }
    width = 1.0;
    while mean_at(hi)?.0 < target_mean {
        width *= 2.0;
        hi = base + width;
        if width > 1e12 {
            return Err(fail());
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean_at(mid)?.0 < target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let (_, r) = mean_at(c)?;
    Ok((r, c))
}

fn potential(engine: &GravityEngine2D, cfg: &GravityConfig, grid: &Grid2D, r: &Field) -> Field {
    let (phi, _) = engine.evaluate(r);
    let chi2 = cfg.chi * cfg.chi;
    Field::from_fn(grid.shape(), |i, j, _| {
        let (dx, dy) = (grid.x(i) - cfg.axis[0], grid.y(j) - cfg.axis[1]);
        phi.get(i, j, 0) + chi2 * (dx * dx + dy * dy)
    })
}

fn on_wall_strip(grid: &Grid2D, i: usize, j: usize) -> bool {
    i < WALL_STRIP || j < WALL_STRIP || i + WALL_STRIP >= grid.nx || j + WALL_STRIP >= grid.ny
}

/// Smooth horizontal profile `Σ a_kl sin(kπx) sin(lπy)`, normalised to peak 1.
fn perturbation_profile(init: &InitialConfig, grid: &Grid2D) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
    let n = init.modes;
    let coeffs: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pi = std::f64::consts::PI;
    let mut m = Field::from_fn(grid.shape(), |i, j, _| {
        let (x, y) = (grid.x(i) - grid.x0, grid.y(j) - grid.y0);
        let mut acc = 0.0;
        for l in 0..n {
            for k in 0..n {
                acc += coeffs[l * n + k] * ((k + 1) as f64 * pi * x / grid.lx).sin() * ((l + 1) as f64 * pi * y / grid.ly).sin();
            }
        }
        acc
    });
    let peak = m.max_abs();
    if peak > 0.0 {
        for v in m.data_mut() {
            *v /= peak;
        }
    }
    m
}

/// Extension of `plane` to the layer grid with `u₃ = δ sin(πx₃) m(x_h)`.
pub fn layer_datum(plane: &State2D, grid: &Grid3D, profile: &Field, delta: f64) -> Result<State3D, HarnessError> {
    let mut st = extend_to_3d(plane, grid).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    if delta != 0.0 {
        let pi = std::f64::consts::PI;
        st.u.comps[2] = Field::from_fn(grid.shape(), |i, j, k| delta * (pi * grid.z(k)).sin() * profile.get(i, j, 0));
        st.close();
    }
    Ok(st)
}

pub fn prepare_initial_data(cfg: &StudyConfig) -> Result<InitialData, HarnessError> {
    let grid = cfg.plane()?;
    let params = &cfg.thermo;
    let init = &cfg.initial;
    let g: ExternalDensity = cfg.external_density()?;
    let engine = GravityEngine2D::new(&cfg.gravity, &g, &grid).map_err(|e| HarnessError::Validation(e.to_string()))?;
    let theta = temperature(init, &grid);
    let s = grid.shape();

    let mut r = Field::constant(s, init.mean_density);
    let mut psi = potential(&engine, &cfg.gravity, &grid, &r);
    let mut c;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (next, cn) = hydrostatic_density(params, &psi, &theta, &r, init.mean_density)?;
        c = cn;
        if engine.is_static() {
            r = next;
            break;
        }
        let change = r
            .interior_values()
            .zip(next.interior_values())
            .map(|(a, b)| (a - b).abs() / b)
            .fold(0.0, f64::max);
        if change < FIXED_POINT_TOL {
            r = next;
            break;
        }
        if iterations >= FIXED_POINT_ITERS || !change.is_finite() {
            return Err(HarnessError::Runtime(format!(
                "compatibility projection fails: self-gravity fixed point stalled at relative change {change:e}"
            )));
        }
        for (a, b) in r.data_mut().iter_mut().zip(next.data()) {
            *a = (1.0 - FIXED_POINT_DAMPING) * *a + FIXED_POINT_DAMPING * b;
        }
        psi = potential(&engine, &cfg.gravity, &grid, &r);
    }
    // Ψ at the final density, to measure what the iteration left behind
    let psi_final = potential(&engine, &cfg.gravity, &grid, &r);

    let v = swirl(init, &grid);
    let mut wall_residual: f64 = 0.0;
    for j in 0..s.ny {
        for i in 0..s.nx {
            if !on_wall_strip(&grid, i, j) {
                continue;
            }
            let res = params.dh_drho(r.get(i, j, 0), theta.get(i, j, 0)) - psi_final.get(i, j, 0) - c;
            let speed = v.comps[0].get(i, j, 0).abs() + v.comps[1].get(i, j, 0).abs();
            let dtheta = (theta.get(i, j, 0) - init.theta).abs();
            wall_residual = wall_residual.max(res.abs()).max(speed).max(dtheta);
        }
    }
    if !(wall_residual <= COMPATIBILITY_TOL) {
        return Err(HarnessError::Runtime(format!(
            "compatibility projection fails: wall residual {wall_residual:e} exceeds {COMPATIBILITY_TOL:e}"
        )));
    }

    let plane = State2D::new(r, v, theta, 0.0).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let profile = perturbation_profile(init, &grid);
    let mut layers = Vec::with_capacity(cfg.eps_list.len());
    for &eps in &cfg.eps_list {
        let g3 = cfg.layer_grid(eps)?;
        let state = layer_datum(&plane, &g3, &profile, init.perturbation * eps)?;
        layers.push(LayerDatum { eps, state });
    }
    Ok(InitialData {
        plane,
        layers,
        wall_residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gibbs_inverse_round_trips() {
        let p = ThermoParams { gamma: 2.5, ..ThermoParams::default() };
        for &(rho, theta) in &[(0.05, 1.0), (1.0, 1.0), (3.0, 0.4), (20.0, 5.0)] {
            let t = p.dh_drho(rho, theta);
            let back = invert_gibbs(&p, t, theta, 1.0).unwrap();
            assert!((back - rho).abs() < 1e-12 * rho, "{rho} {theta} {back}");
        }
    }

    #[test]
    fn bumps_vanish_at_the_edge() {
        assert_eq!(bump(0.3, 0.3), (0.0, 0.0));
        assert_eq!(bump(0.0, 0.3).0, 1.0);
        let (a, _) = bump(0.299999, 0.3);
        assert!(a < 1e-20);
    }
}
