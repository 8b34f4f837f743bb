use std::f64::consts::PI;

use thinlayer_core::fields::{Field, Grid2D, Grid3D, VecField};
use thinlayer_core::gravity::{ExternalDensity, GravityConfig};
use thinlayer_core::solver2d::{Solver2D, SolverConfig2D, State2D};
use thinlayer_core::solver3d::{Solver3D, SolverConfig3D, State3D};
use thinlayer_core::thermo::ThermoParams;

fn bumpy_layer(grid: &Grid3D) -> State3D {
    let s = grid.shape();
    let p = &grid.plane;
    let rho = Field::from_fn(s, |i, j, k| {
        1.0 + 0.3 * (PI * p.x(i)).cos() * (PI * p.y(j)).cos() + 0.05 * (PI * grid.z(k)).cos()
    });
    let theta = Field::from_fn(s, |i, j, _| 1.0 + 0.2 * (2.0 * PI * p.x(i)).cos() * (PI * p.y(j)).sin());
    let mut u = VecField::zeros(s, 3);
    u.comps[0] = Field::from_fn(s, |i, j, _| 0.2 * (PI * p.x(i)).sin() * (2.0 * PI * p.y(j)).sin());
    u.comps[2] = Field::from_fn(s, |i, j, k| 0.1 * (PI * grid.z(k)).sin() * (PI * p.x(i)).sin() * (PI * p.y(j)).sin());
    State3D::new(rho, u, theta, 0.0).unwrap()
}

#[test]
fn layer_mass_is_conserved_and_entropy_produced() {
    let grid = Grid3D::new(Grid2D::unit(12, 12).unwrap(), 4, 0.2).unwrap();
    let cfg = SolverConfig3D {
        cfl: 0.4,
        end_time: 10.0,
        eps: 0.2,
        thermo: ThermoParams::default(),
        gravity: GravityConfig::self_gravitating(),
        refresh: 5,
    };
    let mut solver = Solver3D::new(&grid, cfg, &ExternalDensity::zero()).unwrap();
    let mut st = bumpy_layer(&grid);
    let m0 = solver.diagnostics(&st).mass;
    for _ in 0..1000 {
        st = solver.step(&st).unwrap();
        let d = solver.diagnostics(&st);
        assert!(d.entropy_production >= -1e-10, "production {}", d.entropy_production);
    }
    let m1 = solver.diagnostics(&st).mass;
    assert!(((m1 - m0) / m0).abs() < 1e-11, "drift {}", (m1 - m0) / m0);
    assert!(solver.is_valid());
}

#[test]
fn planar_mass_is_conserved_and_entropy_produced() {
    let grid = Grid2D::unit(16, 16).unwrap();
    let cfg = SolverConfig2D {
        cfl: 0.4,
        end_time: 10.0,
        thermo: ThermoParams::default(),
        gravity: GravityConfig::self_gravitating(),
        refresh: 5,
    };
    let mut solver = Solver2D::new(&grid, cfg, &ExternalDensity::zero()).unwrap();
    let s = grid.shape();
    let r = Field::from_fn(s, |i, j, _| 1.0 + 0.3 * (PI * grid.x(i)).cos() * (PI * grid.y(j)).cos());
    let theta = Field::from_fn(s, |i, _, _| 1.0 + 0.2 * (PI * grid.x(i)).cos());
    let mut v = VecField::zeros(s, 2);
    v.comps[1] = Field::from_fn(s, |i, j, _| 0.2 * (PI * grid.x(i)).sin() * (PI * grid.y(j)).sin());
    let mut st = State2D::new(r, v, theta, 0.0).unwrap();
    let m0 = solver.diagnostics(&st).mass;
    for _ in 0..1000 {
        st = solver.step(&st).unwrap();
        assert!(solver.diagnostics(&st).entropy_production >= -1e-10);
    }
    let m1 = solver.diagnostics(&st).mass;
    assert!(((m1 - m0) / m0).abs() < 1e-11, "drift {}", (m1 - m0) / m0);
}

#[test]
fn columns_stay_vertically_uniform_without_forcing() {
    let grid = Grid3D::new(Grid2D::unit(12, 12).unwrap(), 4, 0.1).unwrap();
    let cfg = SolverConfig3D {
        cfl: 0.4,
        end_time: 0.05,
        eps: 0.1,
        thermo: ThermoParams::default(),
        gravity: GravityConfig {
            g_const: 0.0,
            ..GravityConfig::external()
        },
        refresh: 5,
    };
    let mut solver = Solver3D::new(&grid, cfg, &ExternalDensity::zero()).unwrap();
    let s = grid.shape();
    let p = grid.plane;
    let rho = Field::from_fn(s, |i, j, _| 1.0 + 0.3 * (PI * p.x(i)).cos() * (PI * p.y(j)).cos());
    let theta = Field::from_fn(s, |i, _, _| 1.0 + 0.2 * (PI * p.x(i)).cos());
    let mut u = VecField::zeros(s, 3);
    u.comps[1] = Field::from_fn(s, |i, j, _| 0.2 * (PI * p.x(i)).sin() * (PI * p.y(j)).sin());
    let st = State3D::new(rho, u, theta, 0.0).unwrap();
    let end = solver.advance(st, 0.05).unwrap();
    let mut spread: f64 = 0.0;
    for j in 0..s.ny {
        for i in 0..s.nx {
            for k in 1..s.nz {
                spread = spread.max((end.rho.get(i, j, k) - end.rho.get(i, j, 0)).abs());
                spread = spread.max((end.theta.get(i, j, k) - end.theta.get(i, j, 0)).abs());
                spread = spread.max((end.u.comps[0].get(i, j, k) - end.u.comps[0].get(i, j, 0)).abs());
            }
        }
    }
    assert!(spread < 1e-12, "spread {spread}");
    assert!(end.u.comps[2].max_abs() < 1e-12);
}
