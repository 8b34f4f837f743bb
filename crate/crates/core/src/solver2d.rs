//! Time integration of the planar target system on `ω`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::fields::{Field, Grid2D, VecField};
use crate::gravity::{ExternalDensity, GravityConfig, GravityEngine2D};
use crate::scheme::{self, Cons, ExtraSource, FloorEvents, Forcing, Mesh, Prim, SchemeError};
use crate::solver3d::SolverError;
use crate::thermo::ThermoParams;

fn default_refresh() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig2D {
    pub cfl: f64,
    pub end_time: f64,
    pub thermo: ThermoParams,
    pub gravity: GravityConfig,
    #[serde(default = "default_refresh")]
    pub refresh: usize,
}

impl SolverConfig2D {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(SolverError::Config(format!("cfl must lie in (0, 0.9], got {}", self.cfl)));
        }
        if !(self.end_time > 0.0 && self.end_time.is_finite()) {
            return Err(SolverError::Config(format!("end time must be positive, got {}", self.end_time)));
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
pub struct State2D {
    pub r: Field,
    pub v: VecField,
    pub theta: Field,
    pub time: f64,
}

impl State2D {
    pub fn new(r: Field, v: VecField, theta: Field, time: f64) -> Result<Self, SolverError> {
        let s = r.shape();
        if s.nz != 1 || v.dim() != 2 || v.shape() != s || theta.shape() != s {
            return Err(SolverError::State(
                "planar fields must share one shape with nz = 1 and V must have 2 components".into(),
            ));
        }
        if !(r.min() > 0.0) || !r.all_finite() {
            return Err(SolverError::State("density must be finite and positive".into()));
        }
        if !(theta.min() > 0.0) || !theta.all_finite() {
            return Err(SolverError::State("temperature must be finite and positive".into()));
        }
        if !v.comps.iter().all(Field::all_finite) {
            return Err(SolverError::State("velocity must be finite".into()));
        }
        let mut st = Self { r, v, theta, time };
        st.close();
        Ok(st)
    }

    pub fn close(&mut self) {
        crate::fields::apply_bc_2d(&mut self.r, &mut self.v, &mut self.theta);
    }

    pub fn to_prim(&self) -> Prim {
        let s = self.r.shape();
        let mut p = Prim {
            rho: self.r.clone(),
            u: [self.v.comps[0].clone(), self.v.comps[1].clone(), Field::zeros(s)],
            theta: self.theta.clone(),
        };
        p.fill_ghosts();
        p
    }

    pub fn from_prim(p: Prim, time: f64) -> Self {
        let [a, b, _] = p.u;
        let mut st = Self {
            r: p.rho,
            v: VecField { comps: vec![a, b] },
            theta: p.theta,
            time,
        };
        st.close();
        st
    }
}

pub struct Solver2D {
    grid: Grid2D,
    mesh: Mesh,
    cfg: SolverConfig2D,
    engine: GravityEngine2D,
    /// `∇_h φ_h` and `φ_h` from the last refresh.
    grad_phi: VecField,
    phi: Field,
    steps: u64,
    events: FloorEvents,
    last_energy_residual: f64,
}

impl Solver2D {
    pub fn new(grid: &Grid2D, cfg: SolverConfig2D, g: &ExternalDensity) -> Result<Self, SolverError> {
        cfg.validate()?;
        let engine = GravityEngine2D::new(&cfg.gravity, g, grid)?;
        Ok(Self {
            grid: *grid,
            mesh: Mesh::plane(grid),
            cfg,
            engine,
            grad_phi: VecField::zeros(grid.shape(), 2),
            phi: Field::zeros(grid.shape()),
            steps: 0,
            events: FloorEvents::default(),
            last_energy_residual: f64::NAN,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn config(&self) -> &SolverConfig2D {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn floor_events(&self) -> FloorEvents {
        self.events
    }

    pub fn floor_fraction(&self) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        self.events.total() as f64 / (2.0 * self.steps as f64 * self.mesh.shape.cells() as f64)
    }

    pub fn is_valid(&self) -> bool {
        self.floor_fraction() <= scheme::FLOOR_FRACTION_LIMIT
    }

    /// Reassembles `φ_h` and `∇_h φ_h` from the density.
    pub fn refresh_potential(&mut self, r: &Field) {
        let (phi, grad) = self.engine.evaluate(r);
        self.phi = phi;
        self.grad_phi = grad;
    }

    pub fn potential(&self) -> (&Field, &VecField) {
        (&self.phi, &self.grad_phi)
    }

    /// Potential and its gradient for an arbitrary density, without touching the cached values.
    pub fn potential_of(&self, r: &Field) -> (Field, VecField) {
        self.engine.evaluate(r)
    }

    fn forcing_with<'a>(&self, grad_phi: &'a VecField) -> Forcing<'a> {
        Forcing {
            gravity: Some(&grad_phi.comps),
            chi: self.cfg.gravity.chi,
            axis: self.cfg.gravity.axis,
        }
    }

    fn forcing(&self) -> Forcing<'_> {
        self.forcing_with(&self.grad_phi)
    }

    /// Tendencies of `(r, rV, re)` (third momentum component zero) with the current potential.
    pub fn rhs(&self, state: &State2D) -> Result<Cons, SolverError> {
        self.rhs_with_potential(state, &self.grad_phi)
    }

    /// Tendencies with a given `∇_h φ_h`.
    pub fn rhs_with_potential(&self, state: &State2D, grad_phi: &VecField) -> Result<Cons, SolverError> {
        Ok(scheme::tendencies(
            &self.mesh,
            &self.cfg.thermo,
            &state.to_prim(),
            &self.forcing_with(grad_phi),
            None,
            state.time,
        )?)
    }

    pub fn stable_dt(&self, state: &State2D) -> f64 {
        scheme::stable_dt(&self.mesh, &self.cfg.thermo, &state.to_prim(), self.cfg.cfl)
    }

    fn power(&self, prim: &Prim) -> f64 {
        let g = &self.grad_phi;
        let cfg = &self.cfg.gravity;
        let mesh = &self.mesh;
        diagnostics::body_power(mesh, prim, &|i, j, k| {
            let c = cfg.centrifugal(mesh.xc[i], mesh.yc[j]);
            [g.comps[0].get(i, j, k) + c[0], g.comps[1].get(i, j, k) + c[1], 0.0]
        })
    }

    pub fn step_dt(
        &mut self,
        state: &State2D,
        dt: f64,
        extra: Option<ExtraSource>,
    ) -> Result<State2D, SolverError> {
        if !(dt >= scheme::DT_MIN) {
            return Err(SchemeError::DtUnderflow { dt, t: state.time }.into());
        }
        if self.steps == 0 || (!self.engine.is_static() && self.steps % self.cfg.refresh as u64 == 0) {
            self.refresh_potential(&state.r);
        }
        let prim = state.to_prim();
        let params = self.cfg.thermo;
        let e0 = diagnostics::total_energy(&self.mesh, &params, &prim);
        let p0 = self.power(&prim);
        let forcing = Forcing {
            gravity: Some(&self.grad_phi.comps),
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
        Ok(State2D::from_prim(next, state.time + dt))
    }

    pub fn step_until(&mut self, state: &State2D, t_max: f64) -> Result<State2D, SolverError> {
        let dt = self.stable_dt(state).min(t_max - state.time);
        self.step_dt(state, dt, None)
    }

    pub fn step(&mut self, state: &State2D) -> Result<State2D, SolverError> {
        self.step_until(state, self.cfg.end_time)
    }

    pub fn advance(&mut self, mut state: State2D, t_target: f64) -> Result<State2D, SolverError> {
        while state.time < t_target {
            state = self.step_until(&state, t_target)?;
        }
        Ok(state)
    }

    pub fn diagnostics(&self, state: &State2D) -> DiagnosticsRecord {
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

    fn config() -> SolverConfig2D {
        SolverConfig2D {
            cfl: 0.4,
            end_time: 1.0,
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
        let grid = Grid2D::unit(8, 8).unwrap();
        let mut solver = Solver2D::new(&grid, config(), &ExternalDensity::zero()).unwrap();
        let s = grid.shape();
        let st = State2D::new(Field::constant(s, 1.0), VecField::zeros(s, 2), Field::constant(s, 2.0), 0.0).unwrap();
        let mut cur = st.clone();
        for _ in 0..3 {
            cur = solver.step(&cur).unwrap();
        }
        assert!(cur.v.max_abs() < 1e-14);
        assert!((cur.theta.max() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn coriolis_tendency_matches_cross_product() {
        let grid = Grid2D::unit(8, 8).unwrap();
        let mut cfg = config();
        cfg.gravity.chi = 1.5;
        let solver = Solver2D::new(&grid, cfg, &ExternalDensity::zero()).unwrap();
        let s = grid.shape();
        let r = 2.0;
        let mut v = VecField::zeros(s, 2);
        v.comps[0] = Field::constant(s, 1.0);
        let st = State2D::new(Field::constant(s, r), v, Field::constant(s, 1.0), 0.0).unwrap();
        let l = solver.rhs(&st).unwrap();
        let c = s.cell(4, 3, 0);
        // -rχ(0, 1) plus the centrifugal part 2χ²r x
        let cf = 2.0 * 1.5 * 1.5 * r;
        assert!((l.mom[1][c] - (-r * 1.5 + cf * grid.y(3))).abs() < 1e-12);
        assert!((l.mom[0][c] - cf * grid.x(4)).abs() < 1e-12);
    }
}
