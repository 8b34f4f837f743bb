//! Integral monitors shared by both solvers.

use serde::Serialize;

use crate::fields::dissipation;
use crate::numerics::Accumulator;
use crate::scheme::{Cons, FloorEvents, Mesh, Prim};
use crate::thermo::ThermoParams;

/// Instantaneous norms whose time integrals or suprema are bounded uniformly in `ε`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct UniformBounds {
    pub rho_l_gamma: f64,
    pub sqrt_rho_u_l2: f64,
    pub u_w12: f64,
    pub grad_theta_l2: f64,
    pub theta_l4: f64,
    pub theta_l9: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass: f64,
    /// `∫ ½ρ|u|² + ρe`.
    pub total_energy: f64,
    pub total_entropy: f64,
    /// `∫ S:∇u/θ + κ|∇θ|²/θ²`, nonnegative by construction.
    pub entropy_production: f64,
    /// L¹ norm of `∂ₜ(ρs) + div(ρsu + q/θ) - production` with `∂ₜ` taken from the scheme's tendencies.
    pub entropy_residual_l1: f64,
    /// `dE/dt` minus the power of the body forces over the last step; NaN before the first step.
    pub energy_residual: f64,
    pub bounds: UniformBounds,
    pub floored_rho: u64,
    pub floored_theta: u64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "t,mass,total_energy,total_entropy,entropy_production,entropy_residual_l1,energy_residual,rho_l_gamma,sqrt_rho_u_l2,u_w12,grad_theta_l2,theta_l4,theta_l9,floored_rho,floored_theta";

    pub fn csv_row(&self) -> String {
        let b = &self.bounds;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.time,
            self.mass,
            self.total_energy,
            self.total_entropy,
            self.entropy_production,
            self.entropy_residual_l1,
            self.energy_residual,
            b.rho_l_gamma,
            b.sqrt_rho_u_l2,
            b.u_w12,
            b.grad_theta_l2,
            b.theta_l4,
            b.theta_l9,
            self.floored_rho,
            self.floored_theta
        )
    }
}

/// Centred velocity and temperature gradients at an interior padded index.
#[inline]
pub(crate) fn cell_gradients(mesh: &Mesh, prim: &Prim, c: usize) -> ([[f64; 3]; 3], [f64; 3]) {
    let s = mesh.shape;
    let mut g = [[0.0; 3]; 3];
    let mut gt = [0.0; 3];
    for b in 0..mesh.axes() {
        let sb = s.stride(b);
        let h2 = 2.0 * mesh.h[b];
        for (m, row) in g.iter_mut().enumerate() {
            let d = prim.u[m].data();
            row[b] = (d[c + sb] - d[c - sb]) / h2;
        }
        let t = prim.theta.data();
        gt[b] = (t[c + sb] - t[c - sb]) / h2;
    }
    (g, gt)
}

pub fn mass(mesh: &Mesh, prim: &Prim) -> f64 {
    crate::scheme::integrate(mesh, prim.rho.data())
}

pub fn total_energy(mesh: &Mesh, params: &ThermoParams, prim: &Prim) -> f64 {
    let mut acc = Accumulator::new();
    for c in mesh.shape.interior() {
        let r = prim.rho.data()[c];
        let u2: f64 = prim.u.iter().map(|f| f.data()[c].powi(2)).sum();
        acc.add(0.5 * r * u2 + params.rho_e(r, prim.theta.data()[c]));
    }
    acc.value() * mesh.cell_measure
}

/// `∫ ρ u · f` for a body acceleration `f` given per cell.
pub fn body_power(mesh: &Mesh, prim: &Prim, accel: &dyn Fn(usize, usize, usize) -> [f64; 3]) -> f64 {
    let s = mesh.shape;
    let mut acc = Accumulator::new();
    for k in 0..s.nz {
        for j in 0..s.ny {
            for i in 0..s.nx {
                let c = s.cell(i, j, k);
                let a = accel(i, j, k);
                let r = prim.rho.data()[c];
                for m in 0..3 {
                    acc.add(r * prim.u[m].data()[c] * a[m]);
                }
            }
        }
    }
    acc.value() * mesh.cell_measure
}

/// Everything except the energy residual, which needs two time levels.
pub fn record(
    mesh: &Mesh,
    params: &ThermoParams,
    prim: &Prim,
    tend: Option<&Cons>,
    time: f64,
    events: FloorEvents,
) -> DiagnosticsRecord {
    let s = mesh.shape;
    let mut entropy = Accumulator::new();
    let mut production = Accumulator::new();
    let mut lg = Accumulator::new();
    let mut ke = Accumulator::new();
    let mut w12 = Accumulator::new();
    let mut gth = Accumulator::new();
    let mut l4 = Accumulator::new();
    let mut l9 = Accumulator::new();
    let mut residual = Accumulator::new();
    let gamma = params.gamma;
    let axes = mesh.axes();

    // entropy flux ρsu + q/θ at all cells including ghosts, for the residual
    let flux: Option<Vec<Vec<f64>>> = tend.map(|_| {
        (0..axes)
            .map(|d| {
                let mut f = vec![0.0; s.padded_len()];
                for c in s.interior() {
                    let r = prim.rho.data()[c];
                    let th = prim.theta.data()[c];
                    let (_, gt) = cell_gradients(mesh, prim, c);
                    f[c] = params.rho_s(r, th) * prim.u[d].data()[c] - params.kappa(th) * gt[d] / th;
                }
                // normal flux is odd across the walls of its own axis, even across the others
                let mut field = crate::fields::Field::zeros(s);
                field.data_mut().copy_from_slice(&f);
                let mut parity = crate::fields::EVEN;
                parity[d] = crate::fields::Parity::Odd;
                field.fill_ghosts(parity);
                field.data().to_vec()
            })
            .collect()
    });

    for c in s.interior() {
        let r = prim.rho.data()[c];
        let th = prim.theta.data()[c];
        let (g, gt) = cell_gradients(mesh, prim, c);
        let mu = params.mu(th);
        let kap = params.kappa(th);
        let gt2: f64 = gt.iter().map(|v| v * v).sum();
        let sigma = dissipation::<3>(mu, &g) / th + kap * gt2 / (th * th);
        entropy.add(params.rho_s(r, th));
        production.add(sigma);
        lg.add(r.powf(gamma));
        let u2: f64 = prim.u.iter().map(|f| f.data()[c].powi(2)).sum();
        ke.add(r * u2);
        let g2: f64 = g.iter().flatten().map(|v| v * v).sum();
        w12.add(u2 + g2);
        gth.add(gt2);
        l4.add(th.powi(4));
        l9.add(th.powi(9));
        if let (Some(l), Some(fl)) = (tend, &flux) {
            let pt = params.eval(r, th);
            let drho = l.rho[c];
            let dtheta = (l.energy[c] - (params.e(r, th) + r * params.de_drho(r, th)) * drho) / pt.drho_e_dtheta;
            let s_val = params.s(r, th);
            let d_rho_s = (s_val + r * params.ds_drho(r, th)) * drho + r * params.ds_dtheta(r, th) * dtheta;
            let mut div = 0.0;
            for (d, f) in fl.iter().enumerate() {
                let sd = s.stride(d);
                div += (f[c + sd] - f[c - sd]) / (2.0 * mesh.h[d]);
            }
            residual.add((d_rho_s + div - sigma).abs());
        }
    }
    let w = mesh.cell_measure;
    DiagnosticsRecord {
        time,
        mass: mass(mesh, prim),
        total_energy: total_energy(mesh, params, prim),
        total_entropy: entropy.value() * w,
        entropy_production: production.value() * w,
        entropy_residual_l1: if tend.is_some() { residual.value() * w } else { f64::NAN },
        energy_residual: f64::NAN,
        bounds: UniformBounds {
            rho_l_gamma: (lg.value() * w).powf(1.0 / gamma),
            sqrt_rho_u_l2: (ke.value() * w).sqrt(),
            u_w12: (w12.value() * w).sqrt(),
            grad_theta_l2: (gth.value() * w).sqrt(),
            theta_l4: (l4.value() * w).powf(0.25),
            theta_l9: (l9.value() * w).powf(1.0 / 9.0),
        },
        floored_rho: events.rho,
        floored_theta: events.theta,
    }
}
