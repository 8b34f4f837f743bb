//! The `ε`-sweep: one planar reference run, one layer run per `ε`, and the
//! relative entropy and distances between them at fixed sample times.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thinlayer_core::diagnostics::DiagnosticsRecord;
use thinlayer_core::fields::{Field, Grid3D};
use thinlayer_core::gravity::check_l0;
use thinlayer_core::relent::{
    distances, relative_entropy_functional, remainder_terms, EssentialWindow, Reference2D,
};
use thinlayer_core::snapshot::{write_snapshot, SnapshotHeader};
use thinlayer_core::solver2d::{Solver2D, State2D};
use thinlayer_core::solver3d::{Solver3D, State3D};

use crate::config::StudyConfig;
use crate::initial::{prepare_initial_data, LayerDatum};
use crate::HarnessError;

/// Largest admissible midplane vertical field of the external density.
pub const L0_TOL: f64 = 1e-10;

pub const CONVERGENCE_HEADER: &str = "eps,sup_I,int_u_w12,int_theta_w12,int_log_theta_w12,status";

pub const RELENT_HEADER: &str = "t,I,kinetic,thermal,residual_volume,R1,R2,R3,R4,R5,R6,R7,R8,R9,R10,R11,K1,K2,K3,min_r,u_w12,theta_w12,log_theta_w12";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", content = "reason", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed(String),
}

impl RunStatus {
    fn csv(&self) -> String {
        match self {
            Self::Ok => "ok".into(),
            Self::Failed(why) => format!("failed: {}", why.replace([',', '\n'], ";")),
        }
    }
}

/// One line of the convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsRow {
    pub eps: f64,
    /// Largest `I` over the sample times.
    pub sup_i: f64,
    /// Trapezoidal `∫₀ᵀ ‖u - U‖²_{W^{1,2}} dt`.
    pub int_u_w12: f64,
    pub int_theta_w12: f64,
    pub int_log_theta_w12: f64,
    pub steps: u64,
    pub floor_fraction: f64,
    pub status: RunStatus,
}

impl EpsRow {
    fn failed(eps: f64, why: String) -> Self {
        Self {
            eps,
            sup_i: f64::NAN,
            int_u_w12: f64::NAN,
            int_theta_w12: f64::NAN,
            int_log_theta_w12: f64::NAN,
            steps: 0,
            floor_fraction: f64::NAN,
            status: RunStatus::Failed(why),
        }
    }

    pub fn ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub name: String,
    pub output_dir: PathBuf,
    pub window: EssentialWindow,
    pub wall_residual: f64,
    pub l0_residual: Option<f64>,
    pub planar_steps: u64,
    pub rows: Vec<EpsRow>,
}

impl StudyReport {
    pub fn failed(&self) -> bool {
        self.rows.iter().any(|r| !r.ok())
    }

    pub fn convergence_csv(&self) -> String {
        let mut out = String::from(CONVERGENCE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.eps,
                r.sup_i,
                r.int_u_w12,
                r.int_theta_w12,
                r.int_log_theta_w12,
                r.status.csv()
            );
        }
        out
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(io_err(path))
}

fn snapshot(path: &Path, header: SnapshotHeader, fields: &[&Field]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_snapshot(BufWriter::new(file), &header, fields).map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))
}

fn snapshot_2d(dir: &Path, index: usize, s: &State2D) -> Result<(), HarnessError> {
    let header = SnapshotHeader::new(
        s.r.shape(),
        s.time,
        None,
        ["r", "v1", "v2", "theta"].map(String::from).to_vec(),
    );
    snapshot(
        &dir.join(format!("snap_{index:04}.bin")),
        header,
        &[&s.r, &s.v.comps[0], &s.v.comps[1], &s.theta],
    )
}

fn snapshot_3d(dir: &Path, index: usize, eps: f64, s: &State3D) -> Result<(), HarnessError> {
    let header = SnapshotHeader::new(
        s.rho.shape(),
        s.time,
        Some(eps),
        ["rho", "u1", "u2", "u3", "theta"].map(String::from).to_vec(),
    );
    snapshot(
        &dir.join(format!("snap_{index:04}.bin")),
        header,
        &[&s.rho, &s.u.comps[0], &s.u.comps[1], &s.u.comps[2], &s.theta],
    )
}

fn diagnostics_csv(rows: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(DiagnosticsRecord::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2)
        .zip(v.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Directory holding the outputs of one layer run.
pub fn eps_dir(out: &Path, eps: f64) -> PathBuf {
    out.join(format!("eps_{eps}"))
}

struct PlanarRun {
    references: Vec<Reference2D>,
    steps: u64,
}

fn run_planar(cfg: &StudyConfig, init: State2D, out: &Path) -> Result<PlanarRun, HarnessError> {
    let grid = cfg.plane()?;
    let g = cfg.external_density()?;
    let mut solver = Solver2D::new(&grid, cfg.solver2d(), &g).map_err(|e| HarnessError::Validation(e.to_string()))?;
    let dir = out.join("plane");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut diags = Vec::new();
    let mut references = Vec::new();
    let mut state = init;
    let mut result = Ok(());
    for (n, &t) in cfg.sample_times().iter().enumerate() {
        if n > 0 {
            match advance_2d(&mut solver, state.clone(), t, cfg.max_steps) {
                Ok(s) => state = s,
                Err(e) => {
                    result = Err(HarnessError::Runtime(format!("planar run failed before t = {t}: {e}")));
                    break;
                }
            }
            if !solver.is_valid() {
                result = Err(HarnessError::Runtime(format!(
                    "planar run lost positivity: floor fraction {:e} at t = {t}",
                    solver.floor_fraction()
                )));
                break;
            }
        }
        diags.push(solver.diagnostics(&state));
        references.push(Reference2D::from_solver(&solver, &state).map_err(|e| HarnessError::Runtime(e.to_string()))?);
        if cfg.snapshot_stride > 0 && n % cfg.snapshot_stride == 0 {
            snapshot_2d(&dir, n, &state)?;
        }
    }
    write_text(&dir.join("diagnostics.csv"), &diagnostics_csv(&diags))?;
    result?;
    Ok(PlanarRun {
        references,
        steps: solver.steps(),
    })
}

fn budget_error(max: u64, t: f64) -> String {
    format!("step budget of {max} exhausted at t = {t}")
}

fn advance_2d(solver: &mut Solver2D, mut state: State2D, t: f64, max: u64) -> Result<State2D, String> {
    while state.time < t {
        if solver.steps() >= max {
            return Err(budget_error(max, state.time));
        }
        state = solver.step_until(&state, t).map_err(|e| e.to_string())?;
    }
    Ok(state)
}

fn advance_3d(solver: &mut Solver3D, mut state: State3D, t: f64, max: u64) -> Result<State3D, String> {
    while state.time < t {
        if solver.steps() >= max {
            return Err(budget_error(max, state.time));
        }
        state = solver.step_until(&state, t).map_err(|e| e.to_string())?;
    }
    Ok(state)
}

struct LayerOutcome {
    row: EpsRow,
}

fn run_layer(
    cfg: &StudyConfig,
    datum: &LayerDatum,
    refs: &[Reference2D],
    window: &EssentialWindow,
    out: &Path,
) -> Result<LayerOutcome, HarnessError> {
    let eps = datum.eps;
    let dir = eps_dir(out, eps);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let grid: Grid3D = cfg.layer_grid(eps)?;
    let g = cfg.external_density()?;
    let mut solver = Solver3D::new(&grid, cfg.solver3d(eps), &g).map_err(|e| HarnessError::Validation(e.to_string()))?;

    let mut relent = String::from(RELENT_HEADER);
    relent.push('\n');
    let mut diags = Vec::new();
    let (mut times, mut dist_u, mut dist_t, mut dist_lt) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut sup_i: f64 = 0.0;
    let mut state = datum.state.clone();
    let mut failure = None;
    let measure = grid.cell_volume();
    for (n, reference) in refs.iter().enumerate() {
        let t = reference.state.time;
        if n > 0 {
            match advance_3d(&mut solver, state.clone(), t, cfg.max_steps) {
                Ok(s) => state = s,
                Err(e) => {
                    failure = Some(format!("step failed before t = {t}: {e}"));
                    break;
                }
            }
            if !solver.is_valid() {
                failure = Some(format!("floor fraction {:e} at t = {t}", solver.floor_fraction()));
                break;
            }
        }
        diags.push(solver.diagnostics(&state));
        let sample = (|| -> Result<String, String> {
            let s2 = &reference.state;
            let i = relative_entropy_functional(&cfg.thermo, &state, s2, measure, Some(window)).map_err(|e| e.to_string())?;
            let forces = solver.forces_for(&state.rho);
            let rem = remainder_terms(&cfg.thermo, &cfg.gravity, &state, &grid, &forces, reference).map_err(|e| e.to_string())?;
            let d = distances(&state, s2, &grid).map_err(|e| e.to_string())?;
            sup_i = sup_i.max(i.total);
            times.push(t);
            dist_u.push(d.velocity);
            dist_t.push(d.temperature);
            dist_lt.push(d.log_temperature);
            let mut line = format!("{},{},{},{},{}", t, i.total, i.kinetic, i.thermal, i.residual_volume);
            for v in rem.r.iter().chain(rem.k.iter()) {
                let _ = write!(line, ",{v}");
            }
            let _ = write!(line, ",{},{},{},{}", rem.min_r, d.velocity, d.temperature, d.log_temperature);
            Ok(line)
        })();
        match sample {
            Ok(line) => {
                relent.push_str(&line);
                relent.push('\n');
            }
            Err(e) => {
                failure = Some(format!("diagnostics failed at t = {t}: {e}"));
                break;
            }
        }
        if cfg.snapshot_stride > 0 && n % cfg.snapshot_stride == 0 {
            snapshot_3d(&dir, n, eps, &state)?;
        }
    }
    write_text(&dir.join("relent.csv"), &relent)?;
    write_text(&dir.join("diagnostics.csv"), &diagnostics_csv(&diags))?;
    let row = match failure {
        Some(why) => EpsRow {
            steps: solver.steps(),
            floor_fraction: solver.floor_fraction(),
            ..EpsRow::failed(eps, why)
        },
        None => EpsRow {
            eps,
            sup_i,
            int_u_w12: trapezoid(&times, &dist_u),
            int_theta_w12: trapezoid(&times, &dist_t),
            int_log_theta_w12: trapezoid(&times, &dist_lt),
            steps: solver.steps(),
            floor_fraction: solver.floor_fraction(),
            status: RunStatus::Ok,
        },
    };
    Ok(LayerOutcome { row })
}

/// Refuses external densities whose vertical field does not vanish on the midplane.
pub fn l0_residual(cfg: &StudyConfig) -> Result<Option<f64>, HarnessError> {
    if cfg.gravity.alpha != 0 {
        return Ok(None);
    }
    let grid = cfg.plane()?;
    let g = cfg.external_density()?;
    let probes: Vec<[f64; 2]> = (0..grid.ny)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .map(|(i, j)| [grid.x(i), grid.y(j)])
        .collect();
    let res = check_l0(&g, &probes);
    if !(res <= L0_TOL) {
        return Err(HarnessError::Validation(format!(
            "external density is not even in y3: midplane vertical field {res:e} exceeds {L0_TOL:e}"
        )));
    }
    Ok(Some(res))
}

/// Runs the planar reference and every layer run, writing all tables under `out`.
/// Layer runs that fail are reported in their row; the other outputs are kept.
pub fn run_study(cfg: &StudyConfig, out: &Path, progress: bool) -> Result<StudyReport, HarnessError> {
    cfg.validate()?;
    let l0 = l0_residual(cfg)?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let config_copy = serde_json::to_string_pretty(cfg).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    write_text(&out.join("config.json"), &config_copy)?;

    let data = prepare_initial_data(cfg)?;
    if progress {
        eprintln!(
            "[{}] initial data ready: wall residual {:e} after {} iteration(s)",
            cfg.name, data.wall_residual, data.iterations
        );
    }
    let planar = run_planar(cfg, data.plane.clone(), out)?;
    let window = EssentialWindow::from_trajectory(planar.references.iter().map(|r| &r.state))
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    if progress {
        eprintln!("[{}] planar reference done in {} steps", cfg.name, planar.steps);
    }

    let jobs = if cfg.jobs == 0 { data.layers.len() } else { cfg.jobs };
    let mut rows = Vec::with_capacity(data.layers.len());
    for chunk in data.layers.chunks(jobs.max(1)) {
        let results: Vec<Result<LayerOutcome, HarnessError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|d| scope.spawn(|| run_layer(cfg, d, &planar.references, &window, out)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(HarnessError::Runtime("layer run panicked".into()))))
                .collect()
        });
        for (d, res) in chunk.iter().zip(results) {
            let row = match res {
                Ok(o) => o.row,
                Err(e) => EpsRow::failed(d.eps, e.to_string()),
            };
            if progress {
                eprintln!(
                    "[{}] eps = {}: {} steps, sup I = {:e}, {}",
                    cfg.name,
                    row.eps,
                    row.steps,
                    row.sup_i,
                    row.status.csv()
                );
            }
            rows.push(row);
        }
    }

    let report = StudyReport {
        name: cfg.name.clone(),
        output_dir: out.to_path_buf(),
        window,
        wall_residual: data.wall_residual,
        l0_residual: l0,
        planar_steps: planar.steps,
        rows,
    };
    write_text(&out.join("convergence.csv"), &report.convergence_csv())?;
    let summary = serde_json::to_string_pretty(&report).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    write_text(&out.join("summary.json"), &summary)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let t = [0.0, 0.1, 0.3, 0.6];
        let v: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &v) - (0.36 + 0.6)).abs() < 1e-15);
    }

    #[test]
    fn failure_marker_keeps_one_column() {
        let s = RunStatus::Failed("a, b\nc".into()).csv();
        assert_eq!(s, "failed: a; b;c");
    }
}
