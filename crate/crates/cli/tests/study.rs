use std::f64::consts::PI;
use std::path::PathBuf;

use thinlayer::config::Recipe;
use thinlayer::initial::{prepare_initial_data, COMPATIBILITY_TOL};
use thinlayer::study::{run_study, RunStatus, CONVERGENCE_HEADER, RELENT_HEADER};
use thinlayer::{HarnessError, StudyConfig};
use thinlayer_core::relent::{relative_entropy, vertical_average};

fn quick() -> StudyConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.json");
    StudyConfig::load(&path).unwrap()
}

fn self_gravitating(mut cfg: StudyConfig) -> StudyConfig {
    cfg.gravity.alpha = 1;
    cfg.gravity.beta = 0.5;
    cfg.external = None;
    cfg
}

#[test]
fn unperturbed_data_have_zero_relative_entropy() {
    let mut cfg = quick();
    cfg.initial.perturbation = 0.0;
    let data = prepare_initial_data(&cfg).unwrap();
    for l in &data.layers {
        assert_eq!(relative_entropy(&cfg.thermo, &l.state, &data.plane).unwrap(), 0.0);
    }
}

#[test]
fn perturbation_of_size_eps_gives_quadratic_entropy() {
    let cfg = quick();
    let data = prepare_initial_data(&cfg).unwrap();
    let s2 = &data.plane;
    for l in &data.layers {
        let st = &l.state;
        let sh = st.rho.shape();
        // hand quadrature of ½ρu₃² with u₃ = δ sin(πx₃) m(x_h), δ = ε
        let delta = cfg.initial.perturbation * l.eps;
        let m = |i, j| st.u.comps[2].get(i, j, 0) / (delta * (PI * 0.5 / sh.nz as f64).sin());
        let mut plane_sum = 0.0;
        for j in 0..sh.ny {
            for i in 0..sh.nx {
                plane_sum += s2.r.get(i, j, 0) * m(i, j).powi(2);
            }
        }
        let col: f64 = (0..sh.nz).map(|k| (PI * (k as f64 + 0.5) / sh.nz as f64).sin().powi(2)).sum();
        let expect = 0.5 * delta * delta * plane_sum * col / sh.cells() as f64;
        let got = relative_entropy(&cfg.thermo, st, s2).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect, "{got} vs {expect}");
    }
    let i0 = relative_entropy(&cfg.thermo, &data.layers[0].state, s2).unwrap();
    let i1 = relative_entropy(&cfg.thermo, &data.layers[1].state, s2).unwrap();
    let ratio = (data.layers[0].eps / data.layers[1].eps).powi(2);
    assert!((i0 / i1 - ratio).abs() < 1e-10 * ratio);
}

#[test]
fn vertical_average_recovers_planar_data() {
    for cfg in [quick(), self_gravitating(quick())] {
        let data = prepare_initial_data(&cfg).unwrap();
        for l in &data.layers {
            let avg = vertical_average(&l.state);
            for (a, b) in avg.r.interior_values().zip(data.plane.r.interior_values()) {
                assert!((a - b).abs() <= 4.0 * f64::EPSILON * b, "{a} {b}");
            }
            for (a, b) in avg.theta.interior_values().zip(data.plane.theta.interior_values()) {
                assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
            }
        }
    }
}

#[test]
fn initial_data_are_compatible_at_the_wall() {
    for cfg in [quick(), self_gravitating(quick())] {
        let data = prepare_initial_data(&cfg).unwrap();
        assert!(data.wall_residual <= COMPATIBILITY_TOL, "{}", data.wall_residual);
        let r = &data.plane.r;
        let mean = r.interior_values().sum::<f64>() / r.shape().cells() as f64;
        assert!((mean - cfg.initial.mean_density).abs() < 1e-12);
        assert!(r.min() > 0.0);
    }
}

#[test]
fn rest_recipe_has_no_swirl_and_uniform_temperature() {
    let mut cfg = quick();
    cfg.initial.recipe = Recipe::Rest;
    let data = prepare_initial_data(&cfg).unwrap();
    assert_eq!(data.plane.v.max_abs(), 0.0);
    assert_eq!(data.plane.theta.max(), cfg.initial.theta);
    assert_eq!(data.plane.theta.min(), cfg.initial.theta);
}

#[test]
fn single_eps_study_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick();
    cfg.eps_list = vec![0.5];
    let rep = run_study(&cfg, dir.path(), false).unwrap();
    assert_eq!(rep.rows.len(), 1);
    assert!(!rep.failed());
    let table = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some(CONVERGENCE_HEADER));
    assert!(lines.next().unwrap().starts_with("0.5,"));
    assert!(lines.next().is_none());
    let relent = std::fs::read_to_string(dir.path().join("eps_0.5/relent.csv")).unwrap();
    assert_eq!(relent.lines().next(), Some(RELENT_HEADER));
    assert_eq!(relent.lines().count(), cfg.samples + 2);
}

#[test]
fn failed_layer_run_is_marked_and_outputs_kept() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick();
    cfg.initial.perturbation = 400.0;
    cfg.max_steps = 2_000;
    let rep = run_study(&cfg, dir.path(), false).unwrap();
    assert_eq!(rep.rows.len(), cfg.eps_list.len());
    assert!(rep.failed());
    let table = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(table.lines().count(), cfg.eps_list.len() + 1);
    for (row, line) in rep.rows.iter().zip(table.lines().skip(1)) {
        if let RunStatus::Failed(_) = row.status {
            assert!(line.contains("failed"), "{line}");
            assert!(dir.path().join(format!("eps_{}/relent.csv", row.eps)).exists());
        }
    }
}

#[test]
fn odd_external_density_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick();
    cfg.external.as_mut().unwrap().shift = 0.25;
    match run_study(&cfg, dir.path(), false) {
        Err(e @ HarnessError::Validation(_)) => assert_eq!(e.exit_code(), 1),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = self_gravitating(quick());
    run_study(&cfg, a.path(), false).unwrap();
    run_study(&cfg, b.path(), false).unwrap();
    for rel in ["convergence.csv", "plane/diagnostics.csv", "eps_0.5/relent.csv", "eps_0.25/diagnostics.csv", "eps_0.25/snap_0004.bin"] {
        let x = std::fs::read(a.path().join(rel)).unwrap();
        let y = std::fs::read(b.path().join(rel)).unwrap();
        assert!(x == y, "{rel} differs");
    }
}
