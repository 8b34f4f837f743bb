//! Relative entropy between a layer state and the extension of a planar
//! state, with the quantities that enter its evolution.
//!
//! Planar fields are extended constantly in `x₃` and `U = (V, 0)`.
//! All integrals are over the reference domain `ω × (0, 1)`.

use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::cell_gradients;
use crate::fields::{Field, Grid2D, Grid3D, Shape, VecField};
use crate::gravity::GravityConfig;
use crate::numerics::Accumulator;
use crate::scheme::{Cons, Mesh};
use crate::solver2d::State2D;
use crate::solver3d::State3D;
use crate::thermo::{relative_entropy_density, ThermoParams, ThermoState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelentError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid window: {0}")]
    Window(String),
    #[error("relative entropy undefined at cell ({i}, {j}, {k}): {msg}")]
    Domain {
        i: usize,
        j: usize,
        k: usize,
        msg: String,
    },
}

fn check_plane(s3: Shape, s2: Shape) -> Result<(), RelentError> {
    if s3.nx != s2.nx || s3.ny != s2.ny || s2.nz != 1 {
        return Err(RelentError::GridMismatch(format!(
            "layer {}x{}x{} against plane {}x{}",
            s3.nx, s3.ny, s3.nz, s2.nx, s2.ny
        )));
    }
    Ok(())
}

/// The planar state as a layer state, constant in `x₃` with `u₃ = 0`.
pub fn extend_to_3d(s2: &State2D, grid: &Grid3D) -> Result<State3D, RelentError> {
    let s3 = grid.shape();
    check_plane(s3, s2.r.shape())?;
    let ext = |f: &Field| Field::from_fn(s3, |i, j, _| f.get(i, j, 0));
    let u = VecField {
        comps: vec![ext(&s2.v.comps[0]), ext(&s2.v.comps[1]), Field::zeros(s3)],
    };
    State3D::new(ext(&s2.r), u, ext(&s2.theta), s2.time)
        .map_err(|e| RelentError::Domain {
            i: 0,
            j: 0,
            k: 0,
            msg: e.to_string(),
        })
}

/// Vertical average of the density, horizontal velocity and temperature.
pub fn vertical_average(s3: &State3D) -> State2D {
    let s = s3.rho.shape();
    let plane = Shape::new(s.nx, s.ny, 1);
    let avg = |f: &Field| {
        Field::from_fn(plane, |i, j, _| {
            let mut acc = Accumulator::new();
            for k in 0..s.nz {
                acc.add(f.get(i, j, k));
            }
            acc.value() / s.nz as f64
        })
    };
    let mut st = State2D {
        r: avg(&s3.rho),
        v: VecField {
            comps: vec![avg(&s3.u.comps[0]), avg(&s3.u.comps[1])],
        },
        theta: avg(&s3.theta),
        time: s3.time,
    };
    st.close();
    st
}

/// Density and temperature thresholds defining the essential set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EssentialWindow {
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
}

impl EssentialWindow {
    pub fn new(rho_lo: f64, rho_hi: f64, theta_lo: f64, theta_hi: f64) -> Result<Self, RelentError> {
        let ok = 0.0 < rho_lo && rho_lo <= rho_hi && 0.0 < theta_lo && theta_lo <= theta_hi && rho_hi.is_finite() && theta_hi.is_finite();
        if !ok {
            return Err(RelentError::Window(format!(
                "need 0 < rho_lo <= rho_hi and 0 < theta_lo <= theta_hi, got [{rho_lo}, {rho_hi}] x [{theta_lo}, {theta_hi}]"
            )));
        }
        Ok(Self {
            rho_lo,
            rho_hi,
            theta_lo,
            theta_hi,
        })
    }

    /// Running extrema of a planar trajectory.
    pub fn from_trajectory<'a>(states: impl IntoIterator<Item = &'a State2D>) -> Result<Self, RelentError> {
        let (mut rl, mut rh, mut tl, mut th) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
        for s in states {
            rl = rl.min(s.r.min());
            rh = rh.max(s.r.max());
            tl = tl.min(s.theta.min());
            th = th.max(s.theta.max());
        }
        Self::new(rl, rh, tl, th)
    }

    #[inline]
    pub fn contains(&self, rho: f64, theta: f64) -> bool {
        0.5 * self.rho_lo <= rho && rho <= 2.0 * self.rho_hi && 0.5 * self.theta_lo <= theta && theta <= 2.0 * self.theta_hi
    }
}

/// Essential and residual indicators per interior cell, x fastest.
pub fn essential_residual_masks(s3: &State3D, w: &EssentialWindow) -> (Vec<bool>, Vec<bool>) {
    let ess: Vec<bool> = s3
        .rho
        .interior_values()
        .zip(s3.theta.interior_values())
        .map(|(r, t)| w.contains(r, t))
        .collect();
    let res = ess.iter().map(|e| !e).collect();
    (ess, res)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeEntropy {
    pub total: f64,
    /// `∫ ½ρ|u - U|²`.
    pub kinetic: f64,
    /// `∫ 𝓔(ρ, θ | r, Θ)`.
    pub thermal: f64,
    /// Measure of the residual set, when a window is supplied.
    pub residual_volume: f64,
}

fn layer_measure(s3: Shape) -> f64 {
    1.0 / (s3.nx * s3.ny * s3.nz) as f64
}

/// `I = ∫ ½ρ|u - U|² + 𝓔(ρ, θ | r, Θ)` by cell sums on the layer grid.
pub fn relative_entropy_functional(
    params: &ThermoParams,
    s3: &State3D,
    s2: &State2D,
    cell_measure: f64,
    window: Option<&EssentialWindow>,
) -> Result<RelativeEntropy, RelentError> {
    let sh = s3.rho.shape();
    check_plane(sh, s2.r.shape())?;
    let mut kin = Accumulator::new();
    let mut th = Accumulator::new();
    let mut res = 0usize;
    for k in 0..sh.nz {
        for j in 0..sh.ny {
            for i in 0..sh.nx {
                let rho = s3.rho.get(i, j, k);
                let theta = s3.theta.get(i, j, k);
                let r = s2.r.get(i, j, 0);
                let big_theta = s2.theta.get(i, j, 0);
                let w1 = s3.u.comps[0].get(i, j, k) - s2.v.comps[0].get(i, j, 0);
                let w2 = s3.u.comps[1].get(i, j, k) - s2.v.comps[1].get(i, j, 0);
                let w3 = s3.u.comps[2].get(i, j, k);
                kin.add(0.5 * rho * (w1 * w1 + w2 * w2 + w3 * w3));
                let e = relative_entropy_density(params, &ThermoState::new(rho, theta), r, big_theta).map_err(|e| RelentError::Domain {
                    i,
                    j,
                    k,
                    msg: e.to_string(),
                })?;
                th.add(e);
                if let Some(w) = window {
                    if !w.contains(rho, theta) {
                        res += 1;
                    }
                }
            }
        }
    }
    let kinetic = kin.value() * cell_measure;
    let thermal = th.value() * cell_measure;
    Ok(RelativeEntropy {
        total: kinetic + thermal,
        kinetic,
        thermal,
        residual_volume: res as f64 * cell_measure,
    })
}

/// Same as [`relative_entropy_functional`] with the unit-volume measure of the layer grid.
pub fn relative_entropy(params: &ThermoParams, s3: &State3D, s2: &State2D) -> Result<f64, RelentError> {
    let m = layer_measure(s3.rho.shape());
    Ok(relative_entropy_functional(params, s3, s2, m, None)?.total)
}

/// Measured constants of the Helmholtz-function bounds around a reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoercivityReport {
    pub rho_ref: f64,
    pub theta_ref: f64,
    /// Lower and upper quadratic constants on the essential window.
    pub c1: f64,
    pub c2: f64,
    /// Lower bound of `𝓔` on sampled residual points.
    pub c3: f64,
    /// Lower bound of `𝓔 / (ρe + ρ|s|)` on sampled residual points.
    pub c4: f64,
    pub samples: usize,
    /// Points with `𝓔 < 0`, or `𝓔 = 0` away from the reference.
    pub violations: usize,
}

impl CoercivityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.c1 > 0.0 && self.c3 > 0.0 && self.c4 > 0.0
    }
}

/// Scans an `n × n` log-spaced `(ρ, θ)` lattice spanning a decade beyond the
/// window on each side, plus the reference point itself.
pub fn coercivity_report(params: &ThermoParams, w: &EssentialWindow, reference: (f64, f64), n: usize) -> CoercivityReport {
    let (rho_ref, theta_ref) = reference;
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        let (a, b) = ((0.05 * lo).ln(), (20.0 * hi).ln());
        (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
    };
    let rhos = axis(w.rho_lo, w.rho_hi);
    let thetas = axis(w.theta_lo, w.theta_hi);
    let mut rep = CoercivityReport {
        rho_ref,
        theta_ref,
        c1: f64::INFINITY,
        c2: 0.0,
        c3: f64::INFINITY,
        c4: f64::INFINITY,
        samples: 0,
        violations: 0,
    };
    let at_ref = relative_entropy_density(params, &ThermoState::new(rho_ref, theta_ref), rho_ref, theta_ref).unwrap_or(f64::NAN);
    if at_ref != 0.0 {
        rep.violations += 1;
    }
    rep.samples += 1;
    for &rho in &rhos {
        for &theta in &thetas {
            rep.samples += 1;
            let e = match relative_entropy_density(params, &ThermoState::new(rho, theta), rho_ref, theta_ref) {
                Ok(e) => e,
                Err(_) => {
                    rep.violations += 1;
                    continue;
                }
            };
            let dist2 = (rho - rho_ref).powi(2) + (theta - theta_ref).powi(2);
            if e < 0.0 || (e == 0.0 && dist2 > 0.0) || !e.is_finite() {
                rep.violations += 1;
                continue;
            }
            if w.contains(rho, theta) {
                if dist2 > 0.0 {
                    let q = e / dist2;
                    rep.c1 = rep.c1.min(q);
                    rep.c2 = rep.c2.max(q);
                }
            } else {
                rep.c3 = rep.c3.min(e);
                let scale = params.rho_e(rho, theta) + (rho * params.s(rho, theta)).abs();
                if scale > 0.0 {
                    rep.c4 = rep.c4.min(e / scale);
                }
            }
        }
    }
    rep
}

/// Both sides of the lower bound of `I` by its coercive part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBound {
    pub functional: f64,
    /// `∫ ρ|u-U|² + 1_res + [ρ^γ]_res + [θ⁴]_res + [ρ-r]²_ess + [θ-Θ]²_ess`.
    pub coercive: f64,
}

impl LowerBound {
    pub fn ratio(&self) -> f64 {
        self.functional / self.coercive
    }
}

pub fn lower_bound(
    params: &ThermoParams,
    s3: &State3D,
    s2: &State2D,
    w: &EssentialWindow,
) -> Result<LowerBound, RelentError> {
    let sh = s3.rho.shape();
    let m = layer_measure(sh);
    let functional = relative_entropy_functional(params, s3, s2, m, None)?.total;
    let mut acc = Accumulator::new();
    for k in 0..sh.nz {
        for j in 0..sh.ny {
            for i in 0..sh.nx {
                let rho = s3.rho.get(i, j, k);
                let theta = s3.theta.get(i, j, k);
                let r = s2.r.get(i, j, 0);
                let big_theta = s2.theta.get(i, j, 0);
                let mut w2 = s3.u.comps[2].get(i, j, k).powi(2);
                for m in 0..2 {
                    w2 += (s3.u.comps[m].get(i, j, k) - s2.v.comps[m].get(i, j, 0)).powi(2);
                }
                acc.add(rho * w2);
                if w.contains(rho, theta) {
                    acc.add((rho - r).powi(2) + (theta - big_theta).powi(2));
                } else {
                    acc.add(1.0 + rho.powf(params.gamma) + theta.powi(4));
                }
            }
        }
    }
    Ok(LowerBound {
        functional,
        coercive: acc.value() * m,
    })
}

/// The planar solution at one instant with the time derivatives and
/// potential gradient its equations supply.
#[derive(Debug, Clone)]
pub struct Reference2D {
    pub state: State2D,
    pub grid: Grid2D,
    /// Tendencies of `(r, rV, re)` from the planar right-hand side.
    pub tendencies: Cons,
    /// `∇_h φ_h`.
    pub grad_phi: VecField,
}

impl Reference2D {
    pub fn from_solver(solver: &crate::solver2d::Solver2D, state: &State2D) -> Result<Self, crate::solver3d::SolverError> {
        let (_, grad_phi) = solver.potential_of(&state.r);
        let tendencies = solver.rhs_with_potential(state, &grad_phi)?;
        Ok(Self {
            state: state.clone(),
            grid: *solver.grid(),
            tendencies,
            grad_phi,
        })
    }
}

/// `R₁ … R₁₁` and `K₁ … K₃` at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemainderBreakdown {
    pub r: [f64; 11],
    pub k: [f64; 3],
    /// Smallest planar density, which divides `R₆`.
    pub min_r: f64,
}

impl RemainderBreakdown {
    pub fn r7_plus_k1(&self) -> f64 {
        self.r[6] + self.k[0]
    }

    pub fn r8_plus_k2(&self) -> f64 {
        self.r[7] + self.k[1]
    }
}

/// Evaluates the remainder terms by cell quadrature. `forces` is the layer
/// gravitational acceleration `ε^{-2β}E` acting on `s3`.
pub fn remainder_terms(
    params: &ThermoParams,
    gravity: &GravityConfig,
    s3: &State3D,
    grid3: &Grid3D,
    forces: &VecField,
    reference: &Reference2D,
) -> Result<RemainderBreakdown, RelentError> {
    let sh = grid3.shape();
    if s3.rho.shape() != sh || forces.shape() != sh || forces.dim() != 3 {
        return Err(RelentError::GridMismatch("layer fields do not match the layer grid".into()));
    }
    let s2 = &reference.state;
    let g2 = &reference.grid;
    check_plane(sh, s2.r.shape())?;
    if g2.nx != grid3.plane.nx || g2.ny != grid3.plane.ny {
        return Err(RelentError::GridMismatch("planar grids differ".into()));
    }
    let mesh3 = Mesh::layer(grid3);
    let mesh2 = Mesh::plane(g2);
    let prim3 = s3.to_prim();
    let prim2 = s2.to_prim();
    let tend = &reference.tendencies;
    let s2sh = s2.r.shape();

    // planar pointwise quantities, stored per planar cell
    let n2 = s2sh.padded_len();
    let mut grad_v = vec![[[0.0; 3]; 3]; n2];
    let mut grad_big_theta = vec![[0.0; 3]; n2];
    let mut dt_v = vec![[0.0; 2]; n2];
    let mut dt_theta = vec![0.0; n2];
    let mut dt_p = vec![0.0; n2];
    let mut s_ref = vec![0.0; n2];
    let mut p_ref = Field::zeros(s2sh);
    for c in s2sh.interior() {
        let r = prim2.rho.data()[c];
        let th = prim2.theta.data()[c];
        let (g, gt) = cell_gradients(&mesh2, &prim2, c);
        grad_v[c] = g;
        grad_big_theta[c] = gt;
        let pt = params.eval(r, th);
        let dr = tend.rho[c];
        let dth = (tend.energy[c] - (params.e(r, th) + r * params.de_drho(r, th)) * dr) / pt.drho_e_dtheta;
        dt_theta[c] = dth;
        dt_p[c] = pt.dp_drho * dr + pt.dp_dtheta * dth;
        for m in 0..2 {
            dt_v[c][m] = (tend.mom[m][c] - prim2.u[m].data()[c] * dr) / r;
        }
        s_ref[c] = params.s(r, th);
        p_ref.data_mut()[c] = pt.p;
    }
    p_ref.fill_ghosts(crate::fields::EVEN);
    let grad_p = crate::fields::grad_h(&p_ref, g2);

    let mut acc: [Accumulator; 14] = std::array::from_fn(|_| Accumulator::new());
    let chi = gravity.chi;
    for k in 0..sh.nz {
        for j in 0..sh.ny {
            for i in 0..sh.nx {
                let c3 = sh.cell(i, j, k);
                let c2 = s2sh.cell(i, j, 0);
                let rho = prim3.rho.data()[c3];
                let theta = prim3.theta.data()[c3];
                let u = [prim3.u[0].data()[c3], prim3.u[1].data()[c3], prim3.u[2].data()[c3]];
                let r = prim2.rho.data()[c2];
                let big_u = [prim2.u[0].data()[c2], prim2.u[1].data()[c2], 0.0];
                let w = [big_u[0] - u[0], big_u[1] - u[1], big_u[2] - u[2]];
                let gu = &grad_v[c2];
                let gth = &grad_big_theta[c2];
                let ds = params.s(rho, theta) - s_ref[c2];

                // R1: ρ (u - U)·∇U·(U - u)
                let mut r1 = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        r1 += -w[a] * gu[b][a] * w[b];
                    }
                }
                acc[0].add(rho * r1);
                // R2: ρ (s - s_ref)(U - u)·∇Θ
                acc[1].add(rho * ds * (w[0] * gth[0] + w[1] * gth[1]));
                // R3: ρ (∂ₜU + U·∇U)·(U - u)
                let mut mat = [dt_v[c2][0], dt_v[c2][1], 0.0];
                for (a, row) in mat.iter_mut().enumerate().take(2) {
                    *row += big_u[0] * gu[a][0] + big_u[1] * gu[a][1];
                }
                acc[2].add(rho * (mat[0] * w[0] + mat[1] * w[1]));
                // R4, R5
                acc[3].add(-rho * ds * dt_theta[c2]);
                acc[4].add(-rho * ds * (big_u[0] * gth[0] + big_u[1] * gth[1]));
                // R6: (1 - ρ/r) ∂ₜp(r,Θ) - (ρ/r) u·∇p(r,Θ)
                let gp = [grad_p.comps[0].data()[c2], grad_p.comps[1].data()[c2]];
                acc[5].add((1.0 - rho / r) * dt_p[c2] - rho / r * (u[0] * gp[0] + u[1] * gp[1]));
                // R7 and K1: Coriolis with χ e₃ × v = χ(-v₂, v₁, 0)
                let cor_u = [-chi * u[1], chi * u[0]];
                let cor_big = [-chi * big_u[1], chi * big_u[0]];
                acc[6].add(rho * (cor_u[0] * w[0] + cor_u[1] * w[1]));
                acc[11].add(-rho * (cor_big[0] * w[0] + cor_big[1] * w[1]));
                // R8 and K2 share one product
                let cf = gravity.centrifugal(mesh3.xc[i], mesh3.yc[j]);
                let centrifugal = rho * (cf[0] * w[0] + cf[1] * w[1]);
                acc[7].add(-centrifugal);
                acc[12].add(centrifugal);
                // R9: -ε^{-2β} ρ E·(U - u)
                let e = [
                    forces.comps[0].data()[c3],
                    forces.comps[1].data()[c3],
                    forces.comps[2].data()[c3],
                ];
                acc[8].add(-rho * (e[0] * w[0] + e[1] * w[1] + e[2] * w[2]));
                // R10: -q(θ, ∇θ)/θ · ∇Θ with q = -κ∇_ε θ
                let (gu3, gt3) = cell_gradients(&mesh3, &prim3, c3);
                let kap = params.kappa(theta);
                acc[9].add(kap * (gt3[0] * gth[0] + gt3[1] * gth[1]) / theta);
                // R11: -(p(ρ,θ) div_h V - S(θ, ∇_ε u):∇U)
                let st = crate::fields::stress_from_gradient::<3>(params.mu(theta), &gu3);
                let mut sg = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        sg += st[a][b] * gu[a][b];
                    }
                }
                acc[10].add(-(params.p(rho, theta) * (gu[0][0] + gu[1][1]) - sg));
                // K3: ρ (U - u)·∇_h φ_h
                let gphi = [
                    reference.grad_phi.comps[0].data()[c2],
                    reference.grad_phi.comps[1].data()[c2],
                ];
                acc[13].add(rho * (w[0] * gphi[0] + w[1] * gphi[1]));
            }
        }
    }
    let m = mesh3.cell_measure;
    let vals: Vec<f64> = acc.iter().map(|a| a.value() * m).collect();
    Ok(RemainderBreakdown {
        r: std::array::from_fn(|n| vals[n]),
        k: [vals[11], vals[12], vals[13]],
        min_r: s2.r.min(),
    })
}

/// `‖f‖²_{W^{1,2}}` of the difference between a layer field and an
/// extended planar field, with the unscaled gradient `(∂₁, ∂₂, ∂₃)`.
pub fn w12_distance_sq(a: &Field, b: &Field, grid3: &Grid3D, transform: impl Fn(f64) -> f64, parity: [crate::fields::Parity; 3]) -> f64 {
    let sh = grid3.shape();
    let mut d = Field::from_fn(sh, |i, j, k| transform(a.get(i, j, k)) - transform(b.get(i, j, 0)));
    d.fill_ghosts(parity);
    let h = [grid3.plane.hx(), grid3.plane.hy(), grid3.hz()];
    let mut acc = Accumulator::new();
    let data = d.data();
    for c in sh.interior() {
        let mut v = data[c] * data[c];
        for (ax, hh) in h.iter().enumerate() {
            let st = sh.stride(ax);
            let g = (data[c + st] - data[c - st]) / (2.0 * hh);
            v += g * g;
        }
        acc.add(v);
    }
    acc.value() * grid3.cell_volume()
}

/// `‖u - U‖²_{W^{1,2}} + ‖θ - Θ‖²_{W^{1,2}} + ‖log θ - log Θ‖²_{W^{1,2}}` components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distances {
    pub velocity: f64,
    pub temperature: f64,
    pub log_temperature: f64,
}

pub fn distances(s3: &State3D, s2: &State2D, grid3: &Grid3D) -> Result<Distances, RelentError> {
    check_plane(grid3.shape(), s2.r.shape())?;
    let mut velocity = 0.0;
    let zero = Field::zeros(s2.r.shape());
    for m in 0..3 {
        let planar = if m < 2 { &s2.v.comps[m] } else { &zero };
        velocity += w12_distance_sq(&s3.u.comps[m], planar, grid3, |x| x, crate::scheme::velocity_parity(m));
    }
    Ok(Distances {
        velocity,
        temperature: w12_distance_sq(&s3.theta, &s2.theta, grid3, |x| x, crate::fields::EVEN),
        log_temperature: w12_distance_sq(&s3.theta, &s2.theta, grid3, f64::ln, crate::fields::EVEN),
    })
}
