//! The `limits` and `thermo-check` subcommands.

use std::fmt::Write as _;

use serde::Serialize;
use thinlayer_core::fields::{Field, Grid2D};
use thinlayer_core::gravity::{ExternalDensity, LimitRow, LimitStudy};
use thinlayer_core::relent::{coercivity_report, CoercivityReport, EssentialWindow};
use thinlayer_core::thermo::{consistency_scan, structural_report, ConsistencyReport, StructuralReport, ThermoParams};

use crate::config::{LimitsConfig, StudyConfig};
use crate::HarnessError;

pub const CONSISTENCY_TOL: f64 = 1e-6;
pub const ENTROPY_TAIL_TOL: f64 = 1e-5;

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            nx: 64,
            nz: 8,
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            source_center: [0.5, 0.5],
            source_width: 0.2,
            probes: vec![[20, 28, 2], [32, 32, 4], [40, 24, 6]],
        }
    }
}

/// Builds the kernel-limit study described by the config, or the default one.
pub fn limit_study(cfg: &StudyConfig) -> Result<(LimitStudy, Vec<f64>), HarnessError> {
    let l = cfg.limits.clone().unwrap_or_default();
    let plane = Grid2D::unit(l.nx, l.nx)?;
    let [cx, cy] = l.source_center;
    let w2 = l.source_width * l.source_width;
    let r = Field::from_fn(plane.shape(), |i, j, _| {
        let (dx, dy) = (plane.x(i) - cx, plane.y(j) - cy);
        (-(dx * dx + dy * dy) / w2).exp()
    });
    let g = match &cfg.external {
        Some(e) => e.build()?,
        None => ExternalDensity::gaussian([0.5, 0.5], 0.0, 4.0, 32).map_err(|e| HarnessError::Validation(e.to_string()))?,
    };
    let hz = 1.0 / l.nz as f64;
    let probes = l
        .probes
        .iter()
        .map(|&[i, j, k]| [plane.x(i), plane.y(j), (k as f64 + 0.5) * hz])
        .collect();
    Ok((
        LimitStudy {
            plane,
            nz: l.nz,
            r,
            g,
            probes,
        },
        l.eps_list,
    ))
}

pub fn run_limits(cfg: &StudyConfig) -> Result<Vec<LimitRow>, HarnessError> {
    let (study, eps) = limit_study(cfg)?;
    study.run(&eps).map_err(|e| HarnessError::Runtime(e.to_string()))
}

/// `limit_csv` plus the column mean of the vertical component.
pub fn limits_detail_csv(rows: &[LimitRow]) -> String {
    let mut out = String::from("eps,G1_err,G3_err,G4_err,G3_column_mean\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.eps, r.g1, r.g3, r.g4, r.g3_column_mean);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermoCheck {
    pub consistency: Vec<ConsistencyReport>,
    pub structural: StructuralReport,
    pub coercivity: CoercivityReport,
}

impl ThermoCheck {
    pub fn consistency_passed(&self) -> bool {
        self.consistency
            .iter()
            .all(|c| c.max_maxwell < CONSISTENCY_TOL && c.max_gibbs < CONSISTENCY_TOL)
    }

    pub fn passed(&self) -> bool {
        self.consistency_passed() && self.structural.passed(ENTROPY_TAIL_TOL) && self.coercivity.passed()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.consistency {
            let _ = writeln!(
                out,
                "consistency a={}: {} points, max Maxwell residual {:.3e}, max Gibbs residual {:.3e}",
                c.a, c.points, c.max_maxwell, c.max_gibbs
            );
        }
        let s = &self.structural;
        let _ = writeln!(
            out,
            "structural Z in [{:e}, {:e}]: P(0)={}, min P'={:.3e}, (gP-P'Z)/Z in [{:.3e}, {:.3e}], max M'={:.3e}, |M(z_max)|={:.3e}",
            s.z_min, s.z_max, s.value_at_zero, s.min_derivative, s.ratio_min, s.ratio_max, s.max_entropy_slope, s.entropy_tail
        );
        let c = &self.coercivity;
        let _ = writeln!(
            out,
            "coercivity about ({}, {}): C1={:.4e} C2={:.4e} C3={:.4e} C4={:.4e}, {} samples, {} violations",
            c.rho_ref, c.theta_ref, c.c1, c.c2, c.c3, c.c4, c.samples, c.violations
        );
        let _ = writeln!(out, "{}", if self.passed() { "all checks passed" } else { "CHECKS FAILED" });
        out
    }
}

pub fn thermo_check(cfg: &StudyConfig) -> Result<ThermoCheck, HarnessError> {
    let invalid = |e: thinlayer_core::thermo::ThermoError| HarnessError::Validation(e.to_string());
    let consistency = [0.0, 1.0]
        .iter()
        .map(|&a| consistency_scan(&ThermoParams { a, ..cfg.thermo }, 20, 1e-2, 1e2).map_err(invalid))
        .collect::<Result<Vec<_>, _>>()?;
    let structural = structural_report(&cfg.thermo.structural(), cfg.thermo.p_inf, 1e-6, 1e6, 2001);
    let tc = &cfg.thermo_check;
    let w = EssentialWindow::new(tc.window[0], tc.window[1], tc.window[2], tc.window[3])
        .map_err(|e| HarnessError::Validation(e.to_string()))?;
    let coercivity = coercivity_report(&cfg.thermo, &w, (tc.reference[0], tc.reference[1]), tc.lattice);
    Ok(ThermoCheck {
        consistency,
        structural,
        coercivity,
    })
}
