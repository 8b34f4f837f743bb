use std::f64::consts::PI;

use proptest::prelude::*;
use thinlayer_core::fields::{Field, Grid2D, Grid3D, VecField};
use thinlayer_core::gravity::{ExternalDensity, GravityConfig};
use thinlayer_core::relent::*;
use thinlayer_core::solver2d::{Solver2D, SolverConfig2D, State2D};
use thinlayer_core::solver3d::State3D;
use thinlayer_core::thermo::ThermoParams;

fn gravity() -> GravityConfig {
    GravityConfig {
        g_const: 0.0,
        chi: 0.8,
        axis: [0.5, 0.5],
        ..GravityConfig::external()
    }
}

fn planar(grid: &Grid2D, amp: f64) -> State2D {
    let s = grid.shape();
    let (x, y) = (|i| grid.x(i), |j| grid.y(j));
    let r = Field::from_fn(s, |i, j, _| 1.0 + 0.3 * (PI * x(i)).cos() * (PI * y(j)).cos());
    let theta = Field::from_fn(s, |i, j, _| 1.0 + 0.2 * (PI * x(i)).cos() * (2.0 * PI * y(j)).cos() + 0.1 * (PI * y(j)).cos());
    let mut v = VecField::zeros(s, 2);
    v.comps[0] = Field::from_fn(s, |i, j, _| amp * (PI * x(i)).sin() * (2.0 * PI * y(j)).sin());
    v.comps[1] = Field::from_fn(s, |i, j, _| -0.5 * amp * (2.0 * PI * x(i)).sin() * (PI * y(j)).sin());
    State2D::new(r, v, theta, 0.0).unwrap()
}

fn layer(grid: &Grid3D, s2: &State2D, amp: f64) -> State3D {
    let s = grid.shape();
    let p = grid.plane;
    let (x, y, z) = (|i| p.x(i), |j| p.y(j), |k| grid.z(k));
    let bump = |i, j| (PI * x(i)).sin() * (PI * y(j)).sin();
    let rho = Field::from_fn(s, |i, j, k| s2.r.get(i, j, 0) * (1.0 + amp * (0.5 + (PI * z(k)).cos()) * (PI * x(i)).cos()));
    let theta = Field::from_fn(s, |i, j, k| s2.theta.get(i, j, 0) + amp * (0.5 + (PI * z(k)).cos()) * (PI * y(j)).cos());
    let mut u = VecField::zeros(s, 3);
    u.comps[0] = Field::from_fn(s, |i, j, k| s2.v.comps[0].get(i, j, 0) + amp * bump(i, j) * (PI * z(k)).cos());
    u.comps[1] = Field::from_fn(s, |i, j, k| s2.v.comps[1].get(i, j, 0) - 0.7 * amp * bump(i, j) * (2.0 * PI * z(k)).cos());
    u.comps[2] = Field::from_fn(s, |i, j, k| amp * bump(i, j) * (PI * z(k)).sin());
    State3D::new(rho, u, theta, 0.0).unwrap()
}

fn forces(grid: &Grid3D) -> VecField {
    let s = grid.shape();
    let p = grid.plane;
    let mut f = VecField::zeros(s, 3);
    f.comps[0] = Field::from_fn(s, |i, _, _| (PI * p.x(i)).cos());
    f.comps[1] = Field::from_fn(s, |_, j, k| (PI * p.y(j)).cos() * (1.0 + 0.2 * grid.z(k)));
    f.comps[2] = Field::from_fn(s, |_, _, k| 0.5 - grid.z(k));
    f
}

fn breakdown(n: usize, nz: usize, amp: f64) -> RemainderBreakdown {
    let params = ThermoParams::default();
    let plane = Grid2D::unit(n, n).unwrap();
    let grid = Grid3D::new(plane, nz, 0.5).unwrap();
    let cfg = SolverConfig2D {
        cfl: 0.4,
        end_time: 1.0,
        thermo: params,
        gravity: gravity(),
        refresh: 1,
    };
    let solver = Solver2D::new(&plane, cfg, &ExternalDensity::zero()).unwrap();
    let s2 = planar(&plane, 0.2);
    let s3 = layer(&grid, &s2, amp);
    let reference = Reference2D::from_solver(&solver, &s2).unwrap();
    remainder_terms(&params, &gravity(), &s3, &grid, &forces(&grid), &reference).unwrap()
}

#[test]
fn extension_has_zero_relative_entropy() {
    let plane = Grid2D::unit(16, 16).unwrap();
    let grid = Grid3D::new(plane, 4, 0.1).unwrap();
    let s2 = planar(&plane, 0.2);
    let s3 = extend_to_3d(&s2, &grid).unwrap();
    assert_eq!(relative_entropy(&ThermoParams::default(), &s3, &s2).unwrap(), 0.0);
    let back = vertical_average(&s3);
    assert_eq!(back.r.interior_values().collect::<Vec<_>>(), s2.r.interior_values().collect::<Vec<_>>());
    let b = breakdown(16, 4, 0.0);
    assert_eq!(b.r[0], 0.0);
    assert_eq!(b.r[1], 0.0);
}

#[test]
fn vertical_velocity_perturbation_matches_hand_quadrature() {
    let plane = Grid2D::unit(16, 16).unwrap();
    let grid = Grid3D::new(plane, 16, 0.1).unwrap();
    let s2 = planar(&plane, 0.2);
    let mut s3 = extend_to_3d(&s2, &grid).unwrap();
    let delta = 1e-3;
    s3.u.comps[2] = Field::from_fn(grid.shape(), |_, _, k| delta * (PI * grid.z(k)).sin());
    s3.close();
    let i = relative_entropy(&ThermoParams::default(), &s3, &s2).unwrap();
    // ∫ρ = mean of r, ∫ sin²(πx₃) = 1/2 exactly at midpoints
    let mass: f64 = s2.r.interior_values().sum::<f64>() / 256.0;
    let expect = 0.5 * delta * delta * mass * 0.5;
    assert!((i - expect).abs() < 1e-12 * expect.max(1e-300) + 1e-18, "{i} vs {expect}");
}

#[test]
fn remainders_agree_with_refined_quadrature() {
    let coarse = breakdown(64, 8, 0.1);
    let fine = breakdown(128, 16, 0.1);
    for j in 0..11 {
        let rel = (coarse.r[j] - fine.r[j]).abs() / fine.r[j].abs();
        eprintln!("R{} coarse {:.6e} fine {:.6e} rel {:.2e}", j + 1, coarse.r[j], fine.r[j], rel);
        assert!(rel < 0.01, "R{} differs by {rel}", j + 1);
    }
    for j in 0..3 {
        let rel = (coarse.k[j] - fine.k[j]).abs() / fine.k[j].abs().max(1e-300);
        assert!(rel < 0.01 || fine.k[j] == 0.0, "K{} differs by {rel}", j + 1);
    }
}

#[test]
fn masks_partition_and_flag_dense_cells() {
    let plane = Grid2D::unit(8, 8).unwrap();
    let grid = Grid3D::new(plane, 4, 0.2).unwrap();
    let s2 = planar(&plane, 0.1);
    let mut s3 = extend_to_3d(&s2, &grid).unwrap();
    let w = EssentialWindow::from_trajectory([&s2]).unwrap();
    let (ess, res) = essential_residual_masks(&s3, &w);
    assert!(res.iter().all(|r| !r));
    s3.rho.set(3, 2, 1, 4.0 * w.rho_hi);
    s3.close();
    let (ess2, res2) = essential_residual_masks(&s3, &w);
    assert_eq!(res2.iter().filter(|r| **r).count(), 1);
    assert!(ess.iter().zip(&res).all(|(a, b)| a ^ b));
    assert!(ess2.iter().zip(&res2).all(|(a, b)| a ^ b));
    assert!(EssentialWindow::new(2.0, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn coercivity_constants_are_positive() {
    let w = EssentialWindow::new(0.5, 2.0, 0.5, 2.0).unwrap();
    let rep = coercivity_report(&ThermoParams::default(), &w, (1.0, 1.0), 60);
    assert!(rep.passed(), "{rep:?}");
    assert!(rep.c2 >= rep.c1);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rotation_terms_cancel(amp in 0.0f64..0.5, chi in -2.0f64..2.0, ax in 0.0f64..1.0, ay in 0.0f64..1.0) {
        let params = ThermoParams::default();
        let plane = Grid2D::unit(12, 12).unwrap();
        let grid = Grid3D::new(plane, 4, 0.3).unwrap();
        let g = GravityConfig { chi, axis: [ax, ay], ..gravity() };
        let cfg = SolverConfig2D { cfl: 0.4, end_time: 1.0, thermo: params, gravity: g, refresh: 1 };
        let solver = Solver2D::new(&plane, cfg, &ExternalDensity::zero()).unwrap();
        let s2 = planar(&plane, 0.3);
        let s3 = layer(&grid, &s2, amp);
        let reference = Reference2D::from_solver(&solver, &s2).unwrap();
        let b = remainder_terms(&params, &g, &s3, &grid, &forces(&grid), &reference).unwrap();
        prop_assert!(b.r7_plus_k1().abs() < 1e-13, "R7+K1 = {}", b.r7_plus_k1());
        prop_assert!(b.r8_plus_k2().abs() < 1e-13, "R8+K2 = {}", b.r8_plus_k2());
    }

    #[test]
    fn relative_entropy_is_nonnegative_and_bounded_below(amp in 0.0f64..0.3, spike in 1.0f64..12.0) {
        let params = ThermoParams::default();
        let plane = Grid2D::unit(8, 8).unwrap();
        let grid = Grid3D::new(plane, 4, 0.2).unwrap();
        let s2 = planar(&plane, 0.2);
        let mut s3 = layer(&grid, &s2, amp);
        let v = s3.rho.get(2, 5, 1) * spike;
        s3.rho.set(2, 5, 1, v);
        s3.close();
        let w = EssentialWindow::from_trajectory([&s2]).unwrap();
        let i = relative_entropy(&params, &s3, &s2).unwrap();
        prop_assert!(i >= 0.0);
        let lb = lower_bound(&params, &s3, &s2, &w).unwrap();
        if lb.coercive > 0.0 {
            prop_assert!(lb.ratio() > 0.0);
        }
    }
}
