use std::time::Instant;

use proptest::prelude::*;
use thinlayer_core::fields::{dissipation, Field, Grid2D, Grid3D};
use thinlayer_core::gravity::{SelfGravity2D, SelfGravity3D};
use thinlayer_core::relent::{coercivity_report, EssentialWindow};
use thinlayer_core::thermo::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

#[test]
fn maxwell_and_gibbs_hold_on_log_lattice() {
    for a in [0.0, 1.0] {
        let t0 = Instant::now();
        let rep = consistency_scan(&ThermoParams::with_radiation(a), 20, 1e-2, 1e2).unwrap();
        let dt = t0.elapsed();
        assert_eq!(rep.points, 400);
        assert!(rep.max_maxwell < 1e-6 && rep.max_gibbs < 1e-6, "{rep:?}");
        assert!(dt.as_secs_f64() < 1.0);
    }
}

#[test]
fn default_structural_function_meets_hypotheses() {
    for gamma in [5.0 / 3.0, 2.5] {
        let params = ThermoParams { gamma, ..ThermoParams::default() };
        let rep = structural_report(&params.structural(), params.p_inf, 1e-6, 1e6, 2001);
        assert!(rep.passed(1e-5), "{rep:?}");
        assert!(rep.ratio_max <= gamma + 1e-12);
        assert!(rep.tail_error < 1e-5);
    }
}

#[test]
fn coercivity_scan_on_default_window() {
    let t0 = Instant::now();
    let w = EssentialWindow::new(0.5, 2.0, 0.5, 2.0).unwrap();
    let rep = coercivity_report(&ThermoParams::default(), &w, (1.0, 1.0), 200);
    assert!(rep.passed(), "{rep:?}");
    assert!(t0.elapsed().as_secs_f64() < 5.0);
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn temperature_inverts_internal_energy(lr in -2.0f64..2.0, lt in -2.0f64..2.0, a in 0.0f64..1.0) {
        let p = ThermoParams::with_radiation(a);
        let (rho, theta) = (10f64.powf(lr), 10f64.powf(lt));
        let back = p.theta_from_rho_e(rho, p.rho_e(rho, theta), 1.0).unwrap();
        prop_assert!((back - theta).abs() < 1e-9 * theta);
    }

    #[test]
    fn relative_entropy_density_is_nonnegative(lr in -1.5f64..1.5, lt in -1.0f64..1.0, lrr in -1.0f64..1.0, ltr in -1.0f64..1.0) {
        let p = ThermoParams::default();
        let s = ThermoState::new(10f64.powf(lr), 10f64.powf(lt));
        let e = relative_entropy_density(&p, &s, 10f64.powf(lrr), 10f64.powf(ltr)).unwrap();
        prop_assert!(e >= -1e-12 * (1.0 + p.rho_e(s.rho, s.theta)));
    }

    #[test]
    fn sound_speed_is_real(lr in -2.0f64..2.0, lt in -2.0f64..2.0) {
        let p = ThermoParams::with_radiation(0.5);
        let (rho, theta) = (10f64.powf(lr), 10f64.powf(lt));
        let pt = p.eval(rho, theta);
        prop_assert!(pt.dp_drho > 0.0 && pt.drho_e_dtheta > 0.0);
        prop_assert!(pt.sound_speed(rho, theta).is_finite());
    }

    #[test]
    fn viscous_dissipation_is_nonnegative(g in prop::array::uniform3(prop::array::uniform3(-5.0f64..5.0)), mu in 0.0f64..3.0) {
        prop_assert!(dissipation::<3>(mu, &g) >= -1e-12);
        let g2 = [[g[0][0], g[0][1]], [g[1][0], g[1][1]]];
        prop_assert!(dissipation::<2>(mu, &g2) >= -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fft_gravity_matches_direct_sums(seed in 0u64..1000, eps in 0.05f64..1.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let plane = Grid2D::unit(8, 8).unwrap();
        let grid = Grid3D::new(plane, 4, eps).unwrap();
        let rho = Field::from_fn(grid.shape(), |_, _, _| rng.gen_range(0.1..2.0));
        let sg = SelfGravity3D::new(&grid, 1.0);
        let (a, b) = (sg.e1(&rho), sg.e1_direct(&rho));
        for (ca, cb) in a.comps.iter().zip(&b.comps) {
            for (x, y) in ca.interior_values().zip(cb.interior_values()) {
                prop_assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
            }
        }
        let r = Field::from_fn(plane.shape(), |_, _, _| rng.gen_range(0.1..2.0));
        let sg2 = SelfGravity2D::new(&plane, 1.0);
        let ((pa, ga), (pb, gb)) = (sg2.evaluate(&r), sg2.evaluate_direct(&r));
        for (x, y) in pa.interior_values().zip(pb.interior_values()) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
        }
        for (x, y) in ga.comps[0].interior_values().zip(gb.comps[0].interior_values()) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
        }
    }
}
