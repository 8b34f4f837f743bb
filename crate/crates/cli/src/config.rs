//! Study configuration, read from JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thinlayer_core::fields::{Grid2D, Grid3D};
use thinlayer_core::gravity::{ExternalDensity, GravityConfig};
use thinlayer_core::relent::EssentialWindow;
use thinlayer_core::solver2d::SolverConfig2D;
use thinlayer_core::solver3d::{SolverConfig3D, SolverError};
use thinlayer_core::thermo::ThermoParams;

use crate::HarnessError;

/// Environment variable that replaces `output_dir` when set.
pub const OUTPUT_ENV: &str = "THINLAYER_OUT";

fn one() -> f64 {
    1.0
}

fn refresh() -> usize {
    5
}

fn max_steps() -> u64 {
    2_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    /// Hydrostatic density under a temperature bump and a swirl, both kept off the wall.
    Bumps,
    /// Hydrostatic density at uniform temperature, no swirl.
    Rest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub recipe: Recipe,
    /// Background temperature, also the wall temperature.
    #[serde(default = "one")]
    pub theta: f64,
    /// Mean of `r₀` over `ω`.
    #[serde(default = "one")]
    pub mean_density: f64,
    /// Relative height of the temperature bump.
    #[serde(default)]
    pub theta_bump: f64,
    /// Peak speed of the swirl.
    #[serde(default)]
    pub swirl: f64,
    /// Vertical velocity amplitude of the layer data is `perturbation · ε`.
    #[serde(default)]
    pub perturbation: f64,
    /// Horizontal sine modes per axis in the perturbation.
    #[serde(default = "modes")]
    pub modes: usize,
    #[serde(default)]
    pub seed: u64,
}

fn modes() -> usize {
    3
}

/// Truncated Gaussian external mass, see [`ExternalDensity::gaussian`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    pub center: [f64; 2],
    #[serde(default)]
    pub shift: f64,
    pub radius: f64,
    pub cells: usize,
}

impl ExternalConfig {
    pub fn build(&self) -> Result<ExternalDensity, HarnessError> {
        ExternalDensity::gaussian(self.center, self.shift, self.radius, self.cells)
            .map_err(|e| HarnessError::Validation(format!("external density: {e}")))
    }
}

/// Settings of the kernel-limit study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub nx: usize,
    pub nz: usize,
    pub eps_list: Vec<f64>,
    /// Planar source `exp(-|x - c|²/w²)`.
    pub source_center: [f64; 2],
    pub source_width: f64,
    /// Probe cells `[i, j, k]`: planar cell `(i, j)` of the `nx²` grid, vertical cell `k` of `nz`.
    pub probes: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoCheckConfig {
    /// `[rho_lo, rho_hi, theta_lo, theta_hi]`.
    pub window: [f64; 4],
    pub reference: [f64; 2],
    pub lattice: usize,
}

impl Default for ThermoCheckConfig {
    fn default() -> Self {
        Self {
            window: [0.5, 2.0, 0.5, 2.0],
            reference: [1.0, 1.0],
            lattice: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub eps_list: Vec<f64>,
    pub end_time: f64,
    /// Evaluation instants are `k T / samples`, `k = 0..=samples`.
    pub samples: usize,
    /// Write a snapshot every this many samples; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_stride: usize,
    pub cfl: f64,
    #[serde(default = "refresh")]
    pub refresh: usize,
    pub gravity: GravityConfig,
    pub thermo: ThermoParams,
    pub initial: InitialConfig,
    /// Required when `gravity.alpha = 0`.
    #[serde(default)]
    pub external: Option<ExternalConfig>,
    #[serde(default)]
    pub limits: Option<LimitsConfig>,
    #[serde(default)]
    pub thermo_check: ThermoCheckConfig,
    pub output_dir: PathBuf,
    /// Layer runs executed at once; 0 runs every `ε` concurrently.
    #[serde(default)]
    pub jobs: usize,
    /// Step budget per run; a run that exhausts it is marked failed.
    #[serde(default = "max_steps")]
    pub max_steps: u64,
}

fn check_eps_list(list: &[f64], what: &str) -> Result<(), HarnessError> {
    if list.is_empty() {
        return Err(HarnessError::Validation(format!("{what} is empty")));
    }
    if let Some(e) = list.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(HarnessError::Validation(format!("{what} entry {e} is outside (0, 1]")));
    }
    if list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HarnessError::Validation(format!("{what} must be strictly decreasing")));
    }
    Ok(())
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Validation(m));
        check_eps_list(&self.eps_list, "eps_list")?;
        self.plane()?;
        self.layer_grid(self.eps_list[0])?;
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        let invalid = |e: SolverError| HarnessError::Validation(e.to_string());
        self.solver2d().validate().map_err(invalid)?;
        for &eps in &self.eps_list {
            self.solver3d(eps).validate().map_err(invalid)?;
        }
        let init = &self.initial;
        if !(init.theta > 0.0 && init.mean_density > 0.0) {
            return bad("initial theta and mean_density must be positive".into());
        }
        if !(init.theta_bump > -1.0 && init.theta_bump.is_finite()) {
            return bad(format!("theta_bump must exceed -1, got {}", init.theta_bump));
        }
        if !(init.swirl.is_finite() && init.perturbation.is_finite() && init.perturbation >= 0.0) {
            return bad("swirl and perturbation must be finite, perturbation nonnegative".into());
        }
        if init.perturbation > 0.0 && init.modes == 0 {
            return bad("a perturbation needs at least one mode".into());
        }
        if self.gravity.alpha == 0 {
            match &self.external {
                Some(e) => {
                    e.build()?;
                }
                None => return bad("external gravity needs an `external` density".into()),
            }
        }
        if let Some(l) = &self.limits {
            check_eps_list(&l.eps_list, "limits.eps_list")?;
            if l.nz == 0 || !(l.source_width > 0.0) || l.probes.is_empty() {
                return bad("limits needs nz >= 1, a positive source width and probes".into());
            }
            Grid2D::unit(l.nx, l.nx)?;
            if let Some(p) = l.probes.iter().find(|p| p[0] >= l.nx || p[1] >= l.nx || p[2] >= l.nz) {
                return bad(format!("limit probe {p:?} lies outside the grid"));
            }
        }
        let w = &self.thermo_check.window;
        EssentialWindow::new(w[0], w[1], w[2], w[3]).map_err(|e| HarnessError::Validation(e.to_string()))?;
        if self.thermo_check.lattice < 2 {
            return bad("thermo_check.lattice must be at least 2".into());
        }
        Ok(())
    }

    pub fn plane(&self) -> Result<Grid2D, HarnessError> {
        Ok(Grid2D::unit(self.nx, self.ny)?)
    }

    pub fn layer_grid(&self, eps: f64) -> Result<Grid3D, HarnessError> {
        Ok(Grid3D::new(self.plane()?, self.nz, eps)?)
    }

    pub fn solver2d(&self) -> SolverConfig2D {
        SolverConfig2D {
            cfl: self.cfl,
            end_time: self.end_time,
            thermo: self.thermo,
            gravity: self.gravity,
            refresh: self.refresh,
        }
    }

    pub fn solver3d(&self, eps: f64) -> SolverConfig3D {
        SolverConfig3D {
            cfl: self.cfl,
            end_time: self.end_time,
            eps,
            thermo: self.thermo,
            gravity: self.gravity,
            refresh: self.refresh,
        }
    }

    pub fn external_density(&self) -> Result<ExternalDensity, HarnessError> {
        match (&self.external, self.gravity.alpha) {
            (Some(e), _) => e.build(),
            (None, 0) => Err(HarnessError::Validation("external gravity needs an `external` density".into())),
            (None, _) => Ok(ExternalDensity::zero()),
        }
    }

    /// `output_dir`, unless the environment overrides it.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => self.output_dir.clone(),
        }
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..=self.samples)
            .map(|k| self.end_time * k as f64 / self.samples as f64)
            .collect()
    }
}
