//! Time integration of the rescaled layer system on `ω × (0, 1)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::fields::{Field, FieldError, Grid3D, VecField};
use crate::gravity::{ExternalDensity, GravityConfig, GravityEngine3D, GravityError};
use crate::scheme::{self, Cons, ExtraSource, FloorEvents, Forcing, Mesh, Prim, SchemeError};
use crate::thermo::{ThermoError, ThermoParams};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Gravity(#[from] GravityError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid state: {0}")]
    State(String),
}

fn default_refresh() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig3D {
    pub cfl: f64,
    pub end_time: f64,
    pub eps: f64,
    pub thermo: ThermoParams,
    pub gravity: GravityConfig,
    /// Self-gravity is reassembled every this many steps.
    #[serde(default = "default_refresh")]
    pub refresh: usize,
}

impl SolverConfig3D {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(SolverError::Config(format!("cfl must lie in (0, 0.9], got {}", self.cfl)));
        }
        if !(self.end_time > 0.0 && self.end_time.is_finite()) {
            return Err(SolverError::Config(format!("end time must be positive, got {}", self.end_time)));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(GravityError::EpsOutOfRange(self.eps).into());
        }
        if self.refresh == 0 {
            return Err(SolverError::Config("gravity refresh stride must be at least 1".into()));
        }
        self.thermo.validate()?;
        self.gravity.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State3D {
    pub rho: Field,
    pub u: VecField,
    pub theta: Field,
    pub time: f64,
}

impl State3D {
    /// Checks shapes and positivity and applies the wall conditions.
    pub fn new(rho: Field, u: VecField, theta: Field, time: f64) -> Result<Self, SolverError> {
        let s = rho.shape();
        if u.dim() != 3 || u.shape() != s || theta.shape() != s {
            return Err(SolverError::State("fields must share one shape and u must have 3 components".into()));
        }
        if rho.min() < 0.0 || !rho.all_finite() {
            return Err(SolverError::State("density must be finite and nonnegative".into()));
        }
        if !(theta.min() > 0.0) || !theta.all_finite() {
            return Err(SolverError::State("temperature must be finite and positive".into()));
        }
        if !u.comps.iter().all(Field::all_finite) {
            return Err(SolverError::State("velocity must be finite".into()));
        }
        let mut st = Self { rho, u, theta, time };
        st.close();
        Ok(st)
    }

    pub fn close(&mut self) {
        crate::fields::apply_bc_3d(&mut self.rho, &mut self.u, &mut self.theta);
    }

    pub fn to_prim(&self) -> Prim {
        let mut p = Prim {
            rho: self.rho.clone(),
            u: [self.u.comps[0].clone(), self.u.comps[1].clone(), self.u.comps[2].clone()],
            theta: self.theta.clone(),
        };
        p.fill_ghosts();
        p
    }

    pub fn from_prim(p: Prim, time: f64) -> Self {
        let [a, b, c] = p.u;
        Self {
            rho: p.rho,
            u: VecField { comps: vec![a, b, c] },
            theta: p.theta,
            time,
        }
    }
}

/// Body forces entering the momentum balance.
#[derive(Debug, Clone)]
pub struct Forces {
    /// `ε^{-2β} E`, the gravitational acceleration.
    pub gravity: VecField,
    pub chi: f64,
    pub axis: [f64; 2],
}

pub struct Solver3D {
    grid: Grid3D,
    mesh: Mesh,
    cfg: SolverConfig3D,
    engine: GravityEngine3D,
    forces: Forces,
    steps: u64,
    events: FloorEvents,
    last_energy_residual: f64,
}

impl Solver3D {
    pub fn new(grid: &Grid3D, cfg: SolverConfig3D, g: &ExternalDensity) -> Result<Self, SolverError> {
        cfg.validate()?;
        if (grid.eps - cfg.eps).abs() > 0.0 {
            return Err(SolverError::Config(format!(
                "grid eps {} differs from configured eps {}",
                grid.eps, cfg.eps
            )));
        }
        let engine = GravityEngine3D::new(&cfg.gravity, g, grid)?;
        let forces = Forces {
            gravity: VecField::zeros(grid.shape(), 3),
            chi: cfg.gravity.chi,
            axis: cfg.gravity.axis,
        };
        Ok(Self {
            grid: *grid,
            mesh: Mesh::layer(grid),
            cfg,
            engine,
            forces,
            steps: 0,
            events: FloorEvents::default(),
            last_energy_residual: f64::NAN,
        })
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn config(&self) -> &SolverConfig3D {
        &self.cfg
    }

    pub fn forces(&self) -> &Forces {
        &self.forces
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn floor_events(&self) -> FloorEvents {
        self.events
    }

    /// Floored cell updates per cell update.
    pub fn floor_fraction(&self) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        self.events.total() as f64 / (2.0 * self.steps as f64 * self.mesh.shape.cells() as f64)
    }

    pub fn is_valid(&self) -> bool {
        self.floor_fraction() <= scheme::FLOOR_FRACTION_LIMIT
    }

    /// Reassembles `ε^{-2β} E` from the density.
    pub fn refresh_forces(&mut self, rho: &Field) {
        self.forces.gravity = self.forces_for(rho);
    }

    /// `ε^{-2β} E` for an arbitrary density, leaving the cached forces alone.
    pub fn forces_for(&self, rho: &Field) -> VecField {
        let mut e = self.engine.force(rho);
        let scale = self.cfg.gravity.forcing_scale(self.cfg.eps);
        for c in e.comps.iter_mut() {
            for v in c.data_mut() {
                *v *= scale;
            }
        }
        e
    }

    fn forcing(&self) -> Forcing<'_> {
        Forcing {
            gravity: Some(&self.forces.gravity.comps),
            chi: self.forces.chi,
            axis: self.forces.axis,
        }
    }

    /// Tendencies of `(ρ, ρu, ρe)` with the current forces.
    pub fn rhs(&self, state: &State3D) -> Result<Cons, SolverError> {
        Ok(scheme::tendencies(
            &self.mesh,
            &self.cfg.thermo,
            &state.to_prim(),
            &self.forcing(),
            None,
            state.time,
        )?)
    }

    pub fn stable_dt(&self, state: &State3D) -> f64 {
        scheme::stable_dt(&self.mesh, &self.cfg.thermo, &state.to_prim(), self.cfg.cfl)
    }

    fn power(&self, prim: &Prim) -> f64 {
        let g = &self.forces.gravity;
        let cfg = &self.cfg.gravity;
        let mesh = &self.mesh;
        diagnostics::body_power(mesh, prim, &|i, j, k| {
            let c = cfg.centrifugal(mesh.xc[i], mesh.yc[j]);
            [
                g.comps[0].get(i, j, k) + c[0],
                g.comps[1].get(i, j, k) + c[1],
                g.comps[2].get(i, j, k),
            ]
        })
    }

    /// Advances by exactly `dt`, with an optional extra source.
    pub fn step_dt(
        &mut self,
        state: &State3D,
        dt: f64,
        extra: Option<ExtraSource>,
    ) -> Result<State3D, SolverError> {
        if !(dt >= scheme::DT_MIN) {
            return Err(SchemeError::DtUnderflow { dt, t: state.time }.into());
        }
        if self.steps == 0 || (!self.engine.is_static() && self.steps % self.cfg.refresh as u64 == 0) {
            self.refresh_forces(&state.rho);
        }
        let prim = state.to_prim();
        let params = self.cfg.thermo;
        let e0 = diagnostics::total_energy(&self.mesh, &params, &prim);
        let p0 = self.power(&prim);
        let forcing = Forcing {
            gravity: Some(&self.forces.gravity.comps),
            chi: self.cfg.gravity.chi,
            axis: self.cfg.gravity.axis,
        };
        let next = scheme::ssp_rk2(
            &self.mesh,
            &params,
            &prim,
            &forcing,
            extra,
            state.time,
            dt,
            &mut self.events,
        )?;
        let e1 = diagnostics::total_energy(&self.mesh, &params, &next);
        let p1 = self.power(&next);
        self.last_energy_residual = (e1 - e0) / dt - 0.5 * (p0 + p1);
        self.steps += 1;
        Ok(State3D::from_prim(next, state.time + dt))
    }

    /// One CFL-limited step, never past `t_max`.
    pub fn step_until(&mut self, state: &State3D, t_max: f64) -> Result<State3D, SolverError> {
        let dt = self.stable_dt(state).min(t_max - state.time);
        self.step_dt(state, dt, None)
    }

    /// One CFL-limited step, never past the configured end time.
    pub fn step(&mut self, state: &State3D) -> Result<State3D, SolverError> {
        self.step_until(state, self.cfg.end_time)
    }

    /// Steps until `t_target` is reached exactly.
    pub fn advance(&mut self, mut state: State3D, t_target: f64) -> Result<State3D, SolverError> {
        while state.time < t_target {
            state = self.step_until(&state, t_target)?;
        }
        Ok(state)
    }

    pub fn diagnostics(&self, state: &State3D) -> DiagnosticsRecord {
        let prim = state.to_prim();
        let tend = scheme::tendencies(&self.mesh, &self.cfg.thermo, &prim, &self.forcing(), None, state.time).ok();
        let mut rec = diagnostics::record(&self.mesh, &self.cfg.thermo, &prim, tend.as_ref(), state.time, self.events);
        rec.energy_residual = self.last_energy_residual;
        rec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2D;

    fn config(eps: f64) -> SolverConfig3D {
        SolverConfig3D {
            cfl: 0.4,
            end_time: 1.0,
            eps,
            thermo: ThermoParams::default(),
            gravity: GravityConfig {
                chi: 0.0,
                g_const: 0.0,
                ..GravityConfig::self_gravitating()
            },
            refresh: 5,
        }
    }

    #[test]
    fn rest_state_is_a_fixed_point() {
        let grid = Grid3D::new(Grid2D::unit(8, 8).unwrap(), 4, 0.5).unwrap();
        let mut solver = Solver3D::new(&grid, config(0.5), &ExternalDensity::zero()).unwrap();
        let s = grid.shape();
        let st = State3D::new(Field::constant(s, 1.0), VecField::zeros(s, 3), Field::constant(s, 1.0), 0.0).unwrap();
        let mut cur = st.clone();
        for _ in 0..3 {
            cur = solver.step(&cur).unwrap();
        }
        for (a, b) in cur.rho.interior_values().zip(st.rho.interior_values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(cur.u.max_abs() < 1e-14);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = config(0.5);
        c.cfl = 1.5;
        assert!(c.validate().is_err());
        let mut c = config(0.5);
        c.end_time = 0.0;
        assert!(c.validate().is_err());
        let mut c = config(0.5);
        c.gravity.beta = 0.3;
        assert!(c.validate().is_err());
    }
}
