//! Manufactured smooth solutions compatible with the wall conditions, and
//! the volumetric sources that make them exact solutions of the discretized
//! balance laws. Used for convergence-order checks of both solvers.
//!
//! Coordinates are physical: `(x, y, ζ)` with `ζ = ε x₃ ∈ (0, ε)`. The
//! source is assembled from closed-form fields and gradients, with the flux
//! divergence and the time derivative taken by fourth-order differences.

use crate::fields::{Field, Grid2D, Grid3D};
use crate::gravity::{ExternalDensity, GravityConfig};
use crate::scheme::{Mesh, Prim};
use crate::solver2d::{Solver2D, SolverConfig2D, State2D};
use crate::solver3d::{Solver3D, SolverConfig3D, SolverError, State3D};
use crate::thermo::ThermoParams;

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub params: ThermoParams,
    /// Layer thickness; `None` for the planar problem.
    pub eps: Option<f64>,
    pub chi: f64,
    pub axis: [f64; 2],
}

/// Point value of `(ρ, u, θ)` with `∇u` (row = component) and `∇θ`.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
    pub grad_u: [[f64; 3]; 3],
    pub grad_theta: [f64; 3],
}

const STEP: f64 = 1e-3;

impl Manufactured {
    fn vertical(&self, zeta: f64) -> (f64, f64, f64) {
        match self.eps {
            Some(e) => {
                let z = PI * zeta / e;
                (z.cos(), z.sin(), PI / e)
            }
            None => (1.0, 0.0, 0.0),
        }
    }

    pub fn sample(&self, t: f64, x: [f64; 3]) -> Sample {
        let (cz, sz, kz) = self.vertical(x[2]);
        let (cx, sx) = ((PI * x[0]).cos(), (PI * x[0]).sin());
        let (cy, sy) = ((PI * x[1]).cos(), (PI * x[1]).sin());
        let (c2x, s2x) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[0]).sin());
        let a = 1.0 + 0.5 * t.sin();
        let b = t.cos();
        let th_t = 1.0 + 0.3 * t;

        let rho = 1.0 + 0.2 * a * cx * cy * cz;
        let theta = 1.0 + 0.2 * th_t * c2x * cy * cz;
        let grad_theta = [
            -0.2 * th_t * 2.0 * PI * s2x * cy * cz,
            -0.2 * th_t * c2x * PI * sy * cz,
            -0.2 * th_t * c2x * cy * kz * sz,
        ];
        let u1 = 0.3 * b * sx * sy * cz;
        let g1 = [
            0.3 * b * PI * cx * sy * cz,
            0.3 * b * sx * PI * cy * cz,
            -0.3 * b * sx * sy * kz * sz,
        ];
        let u2 = -0.2 * b * s2x * sy * cz;
        let g2 = [
            -0.2 * b * 2.0 * PI * c2x * sy * cz,
            -0.2 * b * s2x * PI * cy * cz,
            0.2 * b * s2x * sy * kz * sz,
        ];
        let (u3, g3) = if self.eps.is_some() {
            (
                0.2 * b * sx * sy * sz,
                [
                    0.2 * b * PI * cx * sy * sz,
                    0.2 * b * sx * PI * cy * sz,
                    0.2 * b * sx * sy * kz * cz,
                ],
            )
        } else {
            (0.0, [0.0; 3])
        };
        Sample {
            rho,
            u: [u1, u2, u3],
            theta,
            grad_u: [g1, g2, g3],
            grad_theta,
        }
    }

    fn conserved(&self, s: &Sample) -> [f64; 5] {
        [
            s.rho,
            s.rho * s.u[0],
            s.rho * s.u[1],
            s.rho * s.u[2],
            self.params.rho_e(s.rho, s.theta),
        ]
    }

    /// Total flux (convective, pressure, viscous, conductive) along axis `d`.
    fn flux(&self, s: &Sample, d: usize) -> [f64; 5] {
        let p = self.params.p(s.rho, s.theta);
        let mu = self.params.mu(s.theta);
        let g = &s.grad_u;
        let tr = g[0][0] + g[1][1] + g[2][2];
        let un = s.u[d];
        let mut f = [0.0; 5];
        f[0] = s.rho * un;
        for m in 0..3 {
            let mut st = mu * (g[m][d] + g[d][m]);
            if m == d {
                st -= mu * 2.0 / 3.0 * tr;
            }
            f[1 + m] = s.rho * s.u[m] * un - st;
        }
        f[1 + d] += p;
        f[4] = self.params.rho_e(s.rho, s.theta) * un - self.params.kappa(s.theta) * s.grad_theta[d];
        f
    }

    /// Right-hand side the scheme supplies itself: body forces and internal-energy sources.
    fn body(&self, s: &Sample, x: [f64; 3]) -> [f64; 5] {
        let p = self.params.p(s.rho, s.theta);
        let mu = self.params.mu(s.theta);
        let g = &s.grad_u;
        let divu = g[0][0] + g[1][1] + g[2][2];
        let cf = 2.0 * self.chi * self.chi * s.rho;
        [
            0.0,
            s.rho * self.chi * s.u[1] + cf * (x[0] - self.axis[0]),
            -s.rho * self.chi * s.u[0] + cf * (x[1] - self.axis[1]),
            0.0,
            crate::fields::dissipation::<3>(mu, g) - p * divu,
        ]
    }

    /// Source that makes the manufactured fields an exact solution.
    pub fn source(&self, t: f64, x: [f64; 3]) -> [f64; 5] {
        let w = [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
        let off = [-2.0, -1.0, 1.0, 2.0];
        let mut out = [0.0; 5];
        for (wi, oi) in w.iter().zip(off) {
            let q = self.conserved(&self.sample(t + oi * STEP, x));
            for m in 0..5 {
                out[m] += wi * q[m] / STEP;
            }
        }
        let axes = if self.eps.is_some() { 3 } else { 2 };
        for d in 0..axes {
            for (wi, oi) in w.iter().zip(off) {
                let mut y = x;
                y[d] += oi * STEP;
                let f = self.flux(&self.sample(t, y), d);
                for m in 0..5 {
                    out[m] += wi * f[m] / STEP;
                }
            }
        }
        let b = self.body(&self.sample(t, x), x);
        for m in 0..5 {
            out[m] -= b[m];
        }
        out
    }

    fn cell_point(mesh: &Mesh, i: usize, j: usize, k: usize) -> [f64; 3] {
        let z = if mesh.vertical { (k as f64 + 0.5) * mesh.h[2] } else { 0.0 };
        [mesh.xc[i], mesh.yc[j], z]
    }

    /// Exact fields sampled at cell centres, ghosts filled.
    pub fn prim(&self, mesh: &Mesh, t: f64) -> Prim {
        let s = mesh.shape;
        let at = |i, j, k| self.sample(t, Self::cell_point(mesh, i, j, k));
        let mut p = Prim {
            rho: Field::from_fn(s, |i, j, k| at(i, j, k).rho),
            u: std::array::from_fn(|m| Field::from_fn(s, |i, j, k| at(i, j, k).u[m])),
            theta: Field::from_fn(s, |i, j, k| at(i, j, k).theta),
        };
        p.fill_ghosts();
        p
    }

    /// Source at a cell centre, in the form the scheme accepts.
    pub fn cell_source<'a>(&'a self, mesh: &'a Mesh) -> impl Fn(f64, usize, usize, usize) -> [f64; 5] + Sync + 'a {
        move |t, i, j, k| self.source(t, Self::cell_point(mesh, i, j, k))
    }

    /// Discrete L² distance of `(ρ, u, θ)` to the exact fields at time `t`.
    pub fn error(&self, mesh: &Mesh, prim: &Prim, t: f64) -> f64 {
        let s = mesh.shape;
        let mut acc = crate::numerics::Accumulator::new();
        for k in 0..s.nz {
            for j in 0..s.ny {
                for i in 0..s.nx {
                    let e = self.sample(t, Self::cell_point(mesh, i, j, k));
                    let mut sq = (prim.rho.get(i, j, k) - e.rho).powi(2) + (prim.theta.get(i, j, k) - e.theta).powi(2);
                    for m in 0..3 {
                        sq += (prim.u[m].get(i, j, k) - e.u[m]).powi(2);
                    }
                    acc.add(sq);
                }
            }
        }
        (acc.value() * mesh.cell_measure).sqrt()
    }
}

/// Errors on two grids, the second refined by two in every direction, and the observed order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStudy {
    pub coarse: f64,
    pub fine: f64,
}

impl OrderStudy {
    pub fn order(&self) -> f64 {
        (self.coarse / self.fine).log2()
    }
}

fn gravity_off(chi: f64) -> GravityConfig {
    GravityConfig {
        g_const: 0.0,
        chi,
        ..GravityConfig::external()
    }
}

/// Uniform steps no longer than `dt_max` that land on `t_end`.
fn fixed_steps(dt_max: f64, t_end: f64) -> (usize, f64) {
    let n = (t_end / dt_max).ceil() as usize;
    (n, t_end / n as f64)
}

/// Layer solver on `n × n × nz` and `2n × 2n × 2nz` cells up to `t_end`.
pub fn order_3d(params: ThermoParams, chi: f64, eps: f64, n: usize, nz: usize, t_end: f64) -> Result<OrderStudy, SolverError> {
    let mut errs = [0.0; 2];
    for (lvl, e) in errs.iter_mut().enumerate() {
        let f = 1 << lvl;
        let grid = Grid3D::new(Grid2D::unit(n * f, n * f)?, nz * f, eps)?;
        let cfg = SolverConfig3D {
            cfl: 0.4,
            end_time: t_end,
            eps,
            thermo: params,
            gravity: gravity_off(chi),
            refresh: 1,
        };
        let mut solver = Solver3D::new(&grid, cfg, &ExternalDensity::zero())?;
        let mesh = solver.mesh().clone();
        let m = Manufactured { params, eps: Some(eps), chi, axis: [0.0; 2] };
        let src = m.cell_source(&mesh);
        let mut st = State3D::from_prim(m.prim(&mesh, 0.0), 0.0);
        let (steps, dt) = fixed_steps(solver.stable_dt(&st), t_end);
        for _ in 0..steps {
            st = solver.step_dt(&st, dt, Some(&src))?;
        }
        *e = m.error(&mesh, &st.to_prim(), st.time);
    }
    Ok(OrderStudy { coarse: errs[0], fine: errs[1] })
}

/// Planar solver on `n × n` and `2n × 2n` cells up to `t_end`.
pub fn order_2d(params: ThermoParams, chi: f64, n: usize, t_end: f64) -> Result<OrderStudy, SolverError> {
    let mut errs = [0.0; 2];
    for (lvl, e) in errs.iter_mut().enumerate() {
        let f = 1 << lvl;
        let grid = Grid2D::unit(n * f, n * f)?;
        let cfg = SolverConfig2D {
            cfl: 0.4,
            end_time: t_end,
            thermo: params,
            gravity: gravity_off(chi),
            refresh: 1,
        };
        let mut solver = Solver2D::new(&grid, cfg, &ExternalDensity::zero())?;
        let mesh = solver.mesh().clone();
        let m = Manufactured { params, eps: None, chi, axis: [0.0; 2] };
        let src = m.cell_source(&mesh);
        let mut st = State2D::from_prim(m.prim(&mesh, 0.0), 0.0);
        let (steps, dt) = fixed_steps(solver.stable_dt(&st), t_end);
        for _ in 0..steps {
            st = solver.step_dt(&st, dt, Some(&src))?;
        }
        *e = m.error(&mesh, &st.to_prim(), st.time);
    }
    Ok(OrderStudy { coarse: errs[0], fine: errs[1] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_gradients_match_differences() {
        let m = Manufactured {
            params: ThermoParams::default(),
            eps: Some(0.25),
            chi: 1.0,
            axis: [0.0; 2],
        };
        let x = [0.31, 0.67, 0.09];
        let s = m.sample(0.4, x);
        for d in 0..3 {
            let mut a = x;
            let mut b = x;
            a[d] += 1e-6;
            b[d] -= 1e-6;
            let (sa, sb) = (m.sample(0.4, a), m.sample(0.4, b));
            let fd = (sa.theta - sb.theta) / 2e-6;
            assert!((fd - s.grad_theta[d]).abs() < 1e-6, "theta axis {d}");
            for c in 0..3 {
                let fd = (sa.u[c] - sb.u[c]) / 2e-6;
                assert!((fd - s.grad_u[c][d]).abs() < 1e-6, "u{c} axis {d}");
            }
        }
    }

    #[test]
    fn fields_respect_wall_conditions() {
        let m = Manufactured {
            params: ThermoParams::default(),
            eps: Some(0.5),
            chi: 0.0,
            axis: [0.0; 2],
        };
        let wall = m.sample(0.3, [0.0, 0.4, 0.2]);
        assert!(wall.u.iter().all(|v| v.abs() < 1e-15));
        assert!(wall.grad_theta[0].abs() < 1e-14);
        let top = m.sample(0.3, [0.3, 0.4, 0.5]);
        assert!(top.u[2].abs() < 1e-15 && top.grad_u[0][2].abs() < 1e-14);
    }
}
