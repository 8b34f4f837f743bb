//! Newtonian forcing of the thin layer and of its planar limit.
//!
//! Densities are treated as piecewise constant on cells and every kernel is
//! integrated exactly over each source cell (see [`kernels`]), so the weak
//! singularities of the 3D kernels and the principal value of the planar one
//! need no special quadrature. Self-gravity is assembled as a discrete
//! convolution, by FFT in production and by direct summation as reference.
//!
//! Sign convention: forces are attractive, `∇φ = -G ∫ σ(y) (x-y)/|x-y|³ dy`
//! for `φ = G ∫ σ(y)/|x-y| dy`.

pub mod convolution;
pub mod kernels;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{Field, Grid2D, Grid3D, Shape, VecField};
use convolution::{FftConvolver, KernelTable};
use kernels::{box_field, field_antiderivative, potential_antiderivative, square_field, square_potential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GravityError {
    #[error("unsupported regime alpha={alpha}, beta={beta}; use (0, 0) or (1, 0.5)")]
    Regime { alpha: u8, beta: f64 },
    #[error("eps must lie in (0, 1], got {0}")]
    EpsOutOfRange(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("eps list must be strictly decreasing")]
    NotDecreasing,
    #[error("invalid external density: {0}")]
    InvalidDensity(String),
    #[error("invalid gravity parameter: {0}")]
    InvalidParameter(String),
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravityConfig {
    pub alpha: u8,
    pub beta: f64,
    #[serde(default = "one")]
    pub g_const: f64,
    /// Angular speed about the vertical axis.
    #[serde(default)]
    pub chi: f64,
    /// Horizontal point the rotation axis passes through.
    #[serde(default)]
    pub axis: [f64; 2],
}

impl Default for GravityConfig {
    fn default() -> Self {
        Self::self_gravitating()
    }
}

impl GravityConfig {
    pub fn self_gravitating() -> Self {
        Self {
            alpha: 1,
            beta: 0.5,
            g_const: 1.0,
            chi: 1.0,
            axis: [0.0, 0.0],
        }
    }

    pub fn external() -> Self {
        Self {
            alpha: 0,
            beta: 0.0,
            ..Self::self_gravitating()
        }
    }

    pub fn validate(&self) -> Result<(), GravityError> {
        let ok = (self.alpha == 0 && self.beta == 0.0) || (self.alpha == 1 && self.beta == 0.5);
        if !ok {
            return Err(GravityError::Regime {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        if !(self.g_const >= 0.0 && self.g_const.is_finite()) {
            return Err(GravityError::InvalidParameter(format!("g_const = {}", self.g_const)));
        }
        if !self.chi.is_finite() || !self.axis.iter().all(|a| a.is_finite()) {
            return Err(GravityError::InvalidParameter("rotation must be finite".into()));
        }
        Ok(())
    }

    pub fn self_gravity(&self) -> bool {
        self.alpha == 1
    }

    /// `ε^{-2β}`, the factor multiplying `ρE` in the momentum balance.
    pub fn forcing_scale(&self, eps: f64) -> f64 {
        eps.powf(-2.0 * self.beta)
    }

    /// `∇_h |χ e₃ × x|² = 2χ² (x₁ - a₁, x₂ - a₂)`.
    #[inline]
    pub fn centrifugal(&self, x: f64, y: f64) -> [f64; 2] {
        let c = 2.0 * self.chi * self.chi;
        [c * (x - self.axis[0]), c * (y - self.axis[1])]
    }
}

/// Piecewise-constant values on a uniform lattice of cuboids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    /// Lower corner.
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
    /// Cell values, x fastest.
    pub values: Vec<f64>,
}

impl Lattice {
    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(k * self.dims[1] + j) * self.dims[0] + i]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let idx = [i, j, k];
        std::array::from_fn(|d| self.origin[d] + (idx[d] as f64 + 0.5) * self.spacing[d])
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    fn vertex(&self, a: usize, b: usize, c: usize) -> [f64; 3] {
        let idx = [a, b, c];
        std::array::from_fn(|d| self.origin[d] + idx[d] as f64 * self.spacing[d])
    }

    /// Exact integral of `kernel` against the lattice restricted to cells
    /// `lo..hi` (exclusive), using a corner antiderivative of the kernel and
    /// mixed differences of the cell values at lattice vertices.
    fn exact_block<const N: usize>(
        &self,
        x: [f64; 3],
        lo: [usize; 3],
        hi: [usize; 3],
        anti: impl Fn([f64; 3]) -> [f64; N],
    ) -> [f64; N] {
        let mut acc = [0.0; N];
        let inside = |c: isize, d: usize| c >= lo[d] as isize && c < hi[d] as isize;
        for c in lo[2]..=hi[2] {
            for b in lo[1]..=hi[1] {
                for a in lo[0]..=hi[0] {
                    let mut w = 0.0;
                    for corner in 0..8 {
                        let off = [corner & 1, corner >> 1 & 1, corner >> 2 & 1];
                        let cell = [a as isize - off[0] as isize, b as isize - off[1] as isize, c as isize - off[2] as isize];
                        if (0..3).all(|d| inside(cell[d], d)) {
                            // + when the vertex is the upper bound of the cell along an axis
                            let flips = 3 - (off[0] + off[1] + off[2]);
                            let sign = if flips % 2 == 0 { 1.0 } else { -1.0 };
                            w += sign * self.value(cell[0] as usize, cell[1] as usize, cell[2] as usize);
                        }
                    }
                    if w != 0.0 {
                        let v = self.vertex(a, b, c);
                        let f = anti([v[0] - x[0], v[1] - x[1], v[2] - x[2]]);
                        for m in 0..N {
                            acc[m] += w * f[m];
                        }
                    }
                }
            }
        }
        acc
    }
}

/// A sampled external mass density `g ≥ 0` with bounded support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalDensity {
    pub lattice: Lattice,
}

/// Cells within this many lattice cells of the target (horizontally) are integrated exactly.
const NEAR_CELLS: usize = 2;

impl ExternalDensity {
    pub fn new(lattice: Lattice) -> Result<Self, GravityError> {
        let n: usize = lattice.dims.iter().product();
        if lattice.values.len() != n {
            return Err(GravityError::InvalidDensity(format!(
                "expected {n} values, got {}",
                lattice.values.len()
            )));
        }
        if !lattice.spacing.iter().all(|h| *h > 0.0) {
            return Err(GravityError::InvalidDensity("spacing must be positive".into()));
        }
        if !lattice.values.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(GravityError::InvalidDensity("values must be finite and nonnegative".into()));
        }
        Ok(Self { lattice })
    }

    pub fn zero() -> Self {
        Self {
            lattice: Lattice {
                origin: [0.0; 3],
                spacing: [1.0; 3],
                dims: [0, 0, 0],
                values: Vec::new(),
            },
        }
    }

    /// `g(y) = exp(-|y_h - c|² - (y₃ - shift)²)` truncated at `radius`, on a
    /// lattice of `cells` cells per axis spanning the ball's bounding cube.
    /// With `shift = 0` the samples are exactly even in `y₃`.
    pub fn gaussian(center: [f64; 2], shift: f64, radius: f64, cells: usize) -> Result<Self, GravityError> {
        if cells == 0 || cells % 2 == 1 || !(radius > 0.0) {
            return Err(GravityError::InvalidDensity(
                "gaussian lattice needs an even positive cell count and positive radius".into(),
            ));
        }
        let h = 2.0 * radius / cells as f64;
        let origin = [center[0] - radius, center[1] - radius, shift - radius];
        let mut values = Vec::with_capacity(cells * cells * cells);
        for k in 0..cells {
            for j in 0..cells {
                for i in 0..cells {
                    // offsets from the centre, computed symmetrically
                    let off = |n: usize| (n as f64 + 0.5 - cells as f64 / 2.0) * h;
                    let (dx, dy, dz) = (off(i), off(j), off(k));
                    let r2 = dx * dx + dy * dy + dz * dz;
                    values.push(if r2 <= radius * radius { (-r2).exp() } else { 0.0 });
                }
            }
        }
        Self::new(Lattice {
            origin,
            spacing: [h; 3],
            dims: [cells; 3],
            values,
        })
    }

    /// A single cube of side `size` and total mass `mass` centred at `at`.
    pub fn point_mass(at: [f64; 3], mass: f64, size: f64) -> Result<Self, GravityError> {
        Self::new(Lattice {
            origin: std::array::from_fn(|d| at[d] - 0.5 * size),
            spacing: [size; 3],
            dims: [1, 1, 1],
            values: vec![mass / (size * size * size)],
        })
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.values.iter().all(|v| *v == 0.0)
    }

    fn near_range(&self, x: [f64; 3]) -> ([usize; 3], [usize; 3]) {
        let l = &self.lattice;
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for d in 0..2 {
            let c = ((x[d] - l.origin[d]) / l.spacing[d]).floor() as isize;
            let a = (c - NEAR_CELLS as isize).clamp(0, l.dims[d] as isize);
            let b = (c + NEAR_CELLS as isize + 1).clamp(0, l.dims[d] as isize);
            lo[d] = a as usize;
            hi[d] = b as usize;
        }
        // vertical band symmetric about y₃ = 0, fixed for all targets with |x₃| ≤ 1
        let band = x[2].abs().max(1.0) + NEAR_CELLS as f64 * l.spacing[2];
        let kz: Vec<usize> = (0..l.dims[2]).filter(|&k| l.center(0, 0, k)[2].abs() <= band).collect();
        match (kz.first(), kz.last()) {
            (Some(&a), Some(&b)) => {
                lo[2] = a;
                hi[2] = b + 1;
            }
            _ => {
                lo[2] = 0;
                hi[2] = 0;
            }
        }
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            hi = lo;
        }
        (lo, hi)
    }

    fn integrate<const N: usize>(
        &self,
        x: [f64; 3],
        anti: impl Fn([f64; 3]) -> [f64; N],
        point: impl Fn([f64; 3]) -> [f64; N],
    ) -> [f64; N] {
        let l = &self.lattice;
        if l.values.is_empty() {
            return [0.0; N];
        }
        let (lo, hi) = self.near_range(x);
        let mut acc = if lo == hi { [0.0; N] } else { l.exact_block(x, lo, hi, anti) };
        let vol = l.cell_volume();
        for k in 0..l.dims[2] {
            let zin = k >= lo[2] && k < hi[2];
            for j in 0..l.dims[1] {
                let yin = zin && j >= lo[1] && j < hi[1];
                for i in 0..l.dims[0] {
                    if yin && i >= lo[0] && i < hi[0] {
                        continue;
                    }
                    let g = l.value(i, j, k);
                    if g == 0.0 {
                        continue;
                    }
                    let c = l.center(i, j, k);
                    let f = point([c[0] - x[0], c[1] - x[1], c[2] - x[2]]);
                    for m in 0..N {
                        acc[m] += g * vol * f[m];
                    }
                }
            }
        }
        acc
    }

    /// `∫ g(y) / |x - y| dy`.
    pub fn potential_at(&self, x: [f64; 3]) -> f64 {
        self.integrate(
            x,
            |u| [potential_antiderivative(u)],
            |u| [1.0 / (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()],
        )[0]
    }

    /// `∫ g(y) (x - y) / |x - y|³ dy`.
    pub fn field_at(&self, x: [f64; 3]) -> [f64; 3] {
        self.integrate(x, field_antiderivative, |u| {
            let r2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
            let inv = 1.0 / (r2 * r2.sqrt());
            [-u[0] * inv, -u[1] * inv, -u[2] * inv]
        })
    }
}

/// Exact cell-averaged kernel tables for self-gravity on a layer grid, in
/// physical coordinates `(x_h, ε x₃)`.
pub struct SelfGravity3D {
    grid: Grid3D,
    tables: Vec<KernelTable>,
    fft: FftConvolver,
}

impl SelfGravity3D {
    /// Tables give `E₁ = -(G/ε) Σ ρ_c ∫_{cell} (X - Y)/|X - Y|³ dY`.
    pub fn new(grid: &Grid3D, g_const: f64) -> Self {
        let h = [grid.plane.hx(), grid.plane.hy(), grid.eps * grid.hz()];
        let scale = -g_const / grid.eps;
        let tables: Vec<KernelTable> = (0..3)
            .map(|m| {
                // indexed by target minus source; the box is placed at source minus target
                KernelTable::build(grid.shape(), |di, dj, dk| {
                    let c = [-(di as f64) * h[0], -(dj as f64) * h[1], -(dk as f64) * h[2]];
                    scale
                        * box_field(
                            std::array::from_fn(|d| c[d] - 0.5 * h[d]),
                            std::array::from_fn(|d| c[d] + 0.5 * h[d]),
                        )[m]
                })
            })
            .collect();
        let fft = FftConvolver::new(&tables);
        Self {
            grid: *grid,
            tables,
            fft,
        }
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn e1(&self, rho: &Field) -> VecField {
        VecField {
            comps: self.fft.apply(rho),
        }
    }

    pub fn e1_direct(&self, rho: &Field) -> VecField {
        VecField {
            comps: self
                .tables
                .iter()
                .map(|t| convolution::convolve_direct(t, rho))
                .collect(),
        }
    }
}

/// Potential and principal-value gradient of `G ∫_ω r(y)/|x - y| dy` on a planar grid.
pub struct SelfGravity2D {
    grid: Grid2D,
    tables: Vec<KernelTable>,
    fft: FftConvolver,
}

impl SelfGravity2D {
    pub fn new(grid: &Grid2D, g_const: f64) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let rect = |di: isize, dj: isize| {
            let c = [-(di as f64) * hx, -(dj as f64) * hy];
            ([c[0] - 0.5 * hx, c[1] - 0.5 * hy], [c[0] + 0.5 * hx, c[1] + 0.5 * hy])
        };
        let shape = grid.shape();
        let pot = KernelTable::build(shape, |di, dj, _| {
            let (lo, hi) = rect(di, dj);
            g_const * square_potential(lo, hi)
        });
        let grads: Vec<KernelTable> = (0..2)
            .map(|m| {
                KernelTable::build(shape, |di, dj, _| {
                    if di == 0 && dj == 0 {
                        // principal value: the symmetric self cell contributes nothing
                        return 0.0;
                    }
                    let (lo, hi) = rect(di, dj);
                    -g_const * square_field(lo, hi)[m]
                })
            })
            .collect();
        let tables = vec![pot, grads[0].clone(), grads[1].clone()];
        let fft = FftConvolver::new(&tables);
        Self {
            grid: *grid,
            tables,
            fft,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn evaluate(&self, r: &Field) -> (Field, VecField) {
        let mut out = self.fft.apply(r);
        let gy = out.pop().unwrap();
        let gx = out.pop().unwrap();
        let phi = out.pop().unwrap();
        (phi, VecField { comps: vec![gx, gy] })
    }

    pub fn evaluate_direct(&self, r: &Field) -> (Field, VecField) {
        let mut out: Vec<Field> = self
            .tables
            .iter()
            .map(|t| convolution::convolve_direct(t, r))
            .collect();
        let gy = out.pop().unwrap();
        let gx = out.pop().unwrap();
        (out.pop().unwrap(), VecField { comps: vec![gx, gy] })
    }
}

fn check_eps(eps: f64) -> Result<(), GravityError> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(GravityError::EpsOutOfRange(eps))
    }
}

/// `E₂` at the layer cells, `-G ∫ g(y) (X - y)/|X - y|³ dy` with `X = (x_h, ε x₃)`.
pub fn external_field_3d(g: &ExternalDensity, grid: &Grid3D, g_const: f64) -> VecField {
    let s = grid.shape();
    let mut out = VecField::zeros(s, 3);
    for k in 0..s.nz {
        let z = grid.eps * grid.z(k);
        for j in 0..s.ny {
            for i in 0..s.nx {
                let f = g.field_at([grid.plane.x(i), grid.plane.y(j), z]);
                for m in 0..3 {
                    out.comps[m].set(i, j, k, -g_const * f[m]);
                }
            }
        }
    }
    out
}

/// Gravity for one layer grid and regime; self-gravity tables or the static
/// external field are prepared once.
pub enum GravityEngine3D {
    SelfGravity(Box<SelfGravity3D>),
    External(VecField),
}

impl GravityEngine3D {
    pub fn new(cfg: &GravityConfig, g: &ExternalDensity, grid: &Grid3D) -> Result<Self, GravityError> {
        cfg.validate()?;
        check_eps(grid.eps)?;
        Ok(if cfg.self_gravity() {
            Self::SelfGravity(Box::new(SelfGravity3D::new(grid, cfg.g_const)))
        } else {
            Self::External(external_field_3d(g, grid, cfg.g_const))
        })
    }

    /// `E = ε α E₁ + (1 - α) E₂`.
    pub fn force(&self, rho: &Field) -> VecField {
        match self {
            Self::SelfGravity(sg) => {
                let mut e = sg.e1(rho);
                let eps = sg.grid().eps;
                for c in e.comps.iter_mut() {
                    for v in c.data_mut() {
                        *v *= eps;
                    }
                }
                e
            }
            Self::External(e2) => e2.clone(),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Self::External(_))
    }
}

/// `E = ε α E₁ + (1 - α) E₂` for a density on the layer grid.
pub fn force_3d(
    rho: &Field,
    g: &ExternalDensity,
    cfg: &GravityConfig,
    grid: &Grid3D,
) -> Result<VecField, GravityError> {
    if rho.shape() != grid.shape() {
        return Err(GravityError::GridMismatch(format!(
            "density {:?} vs grid {:?}",
            rho.shape(),
            grid.shape()
        )));
    }
    Ok(GravityEngine3D::new(cfg, g, grid)?.force(rho))
}

/// Planar gravity for the target problem: `φ_h` and `∇_h φ_h`.
pub enum GravityEngine2D {
    SelfGravity(Box<SelfGravity2D>),
    External { phi: Field, grad: VecField },
}

impl GravityEngine2D {
    pub fn new(cfg: &GravityConfig, g: &ExternalDensity, grid: &Grid2D) -> Result<Self, GravityError> {
        cfg.validate()?;
        Ok(if cfg.self_gravity() {
            Self::SelfGravity(Box::new(SelfGravity2D::new(grid, cfg.g_const)))
        } else {
            let phi = potential_2d_external(g, grid, cfg.g_const);
            let grad = external_gradient_2d(g, grid, cfg.g_const);
            Self::External { phi, grad }
        })
    }

    pub fn evaluate(&self, r: &Field) -> (Field, VecField) {
        match self {
            Self::SelfGravity(sg) => sg.evaluate(r),
            Self::External { phi, grad } => (phi.clone(), grad.clone()),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Self::External { .. })
    }
}

/// `φ_h = G ∫_ω r/|x_h - y_h|` and its principal-value gradient.
pub fn potential_2d_self(r: &Field, grid: &Grid2D, g_const: f64) -> Result<(Field, VecField), GravityError> {
    if r.shape() != grid.shape() {
        return Err(GravityError::GridMismatch(format!(
            "density {:?} vs grid {:?}",
            r.shape(),
            grid.shape()
        )));
    }
    Ok(SelfGravity2D::new(grid, g_const).evaluate(r))
}

/// `φ_h(x_h) = G ∫_{ℝ³} g(y) / sqrt(|x_h - y_h|² + y₃²) dy`.
pub fn potential_2d_external(g: &ExternalDensity, grid: &Grid2D, g_const: f64) -> Field {
    Field::from_fn(grid.shape(), |i, j, _| {
        g_const * g.potential_at([grid.x(i), grid.y(j), 0.0])
    })
}

/// `∇_h φ_h` for the external potential, i.e. the horizontal part of `E₂` at `x₃ = 0`.
pub fn external_gradient_2d(g: &ExternalDensity, grid: &Grid2D, g_const: f64) -> VecField {
    let s = grid.shape();
    let mut out = VecField::zeros(s, 2);
    for j in 0..s.ny {
        for i in 0..s.nx {
            let f = g.field_at([grid.x(i), grid.y(j), 0.0]);
            out.comps[0].set(i, j, 0, -g_const * f[0]);
            out.comps[1].set(i, j, 0, -g_const * f[1]);
        }
    }
    out
}

/// Largest `|∫ g(y) y₃ / (|x_h - y_h|² + y₃²)^{3/2} dy|` over the probes.
pub fn check_l0(g: &ExternalDensity, probes: &[[f64; 2]]) -> f64 {
    probes
        .iter()
        .map(|p| g.field_at([p[0], p[1], 0.0])[2].abs())
        .fold(0.0, f64::max)
}

/// Centrifugal acceleration `∇|χ × x|²` at the cells of a layer grid (third component zero).
pub fn centrifugal_force_3d(cfg: &GravityConfig, grid: &Grid3D) -> VecField {
    let s = grid.shape();
    let mut out = VecField::zeros(s, 3);
    for k in 0..s.nz {
        for j in 0..s.ny {
            for i in 0..s.nx {
                let c = cfg.centrifugal(grid.plane.x(i), grid.plane.y(j));
                out.comps[0].set(i, j, k, c[0]);
                out.comps[1].set(i, j, k, c[1]);
            }
        }
    }
    out
}

pub fn centrifugal_force_2d(cfg: &GravityConfig, grid: &Grid2D) -> VecField {
    let s = grid.shape();
    let mut out = VecField::zeros(s, 2);
    for j in 0..s.ny {
        for i in 0..s.nx {
            let c = cfg.centrifugal(grid.x(i), grid.y(j));
            out.comps[0].set(i, j, 0, c[0]);
            out.comps[1].set(i, j, 0, c[1]);
        }
    }
    out
}

/// Inputs of the kernel-limit study.
#[derive(Debug, Clone)]
pub struct LimitStudy {
    pub plane: Grid2D,
    /// Vertical cells used to resolve the layer integrals.
    pub nz: usize,
    /// Planar density, extended constantly in `x₃`.
    pub r: Field,
    pub g: ExternalDensity,
    /// Probe points `(x₁, x₂, x₃)` with `x₃ ∈ (0, 1)`; horizontal positions
    /// must be cell centres of `plane`, `x₃` a cell centre of the vertical grid.
    pub probes: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitRow {
    pub eps: f64,
    /// `max |∫ g [k(x_h, εx₃) - k(x_h, 0)] dy|` over probes and components.
    pub g1: f64,
    /// `max |∫_Ω r(y_h) ε(x₃-y₃) / (|x_h-y_h|² + ε²(x₃-y₃)²)^{3/2} dy|`.
    pub g3: f64,
    /// `max |∫_Ω r(y_h)(x_h-y_h)/(…)^{3/2} dy - v.p. ∫_ω r(y_h)(x_h-y_h)/|x_h-y_h|³ dy_h|`.
    pub g4: f64,
    /// Largest column average over x₃ of the G3 integrand value.
    pub g3_column_mean: f64,
}

impl LimitStudy {
    fn probe_cell(&self, p: [f64; 3]) -> (usize, usize) {
        let i = ((p[0] - self.plane.x0) / self.plane.hx()).floor() as usize;
        let j = ((p[1] - self.plane.y0) / self.plane.hy()).floor() as usize;
        (i.min(self.plane.nx - 1), j.min(self.plane.ny - 1))
    }

    /// Principal value `∫_ω r(y)(x-y)/|x-y|³ dy` at a cell centre, self cell excluded.
    fn vp(&self, i0: usize, j0: usize) -> [f64; 2] {
        let (hx, hy) = (self.plane.hx(), self.plane.hy());
        let mut acc = [0.0; 2];
        for j in 0..self.plane.ny {
            for i in 0..self.plane.nx {
                if i == i0 && j == j0 {
                    continue;
                }
                let c = [(i as f64 - i0 as f64) * hx, (j as f64 - j0 as f64) * hy];
                let f = square_field([c[0] - 0.5 * hx, c[1] - 0.5 * hy], [c[0] + 0.5 * hx, c[1] + 0.5 * hy]);
                let v = self.r.get(i, j, 0);
                acc[0] += v * f[0];
                acc[1] += v * f[1];
            }
        }
        acc
    }

    /// `∫_Ω r(y_h) (X - Y)/|X - Y|³ dy` in the scaled measure.
    fn layer_field(&self, eps: f64, x: [f64; 3]) -> [f64; 3] {
        let p = &self.plane;
        let s = Shape::new(p.nx, p.ny, self.nz);
        let hz = eps / self.nz as f64;
        let mut values = Vec::with_capacity(s.cells());
        for _k in 0..s.nz {
            for j in 0..s.ny {
                for i in 0..s.nx {
                    values.push(self.r.get(i, j, 0));
                }
            }
        }
        let lattice = Lattice {
            origin: [p.x0, p.y0, 0.0],
            spacing: [p.hx(), p.hy(), hz],
            dims: [s.nx, s.ny, s.nz],
            values,
        };
        let target = [x[0], x[1], eps * x[2]];
        let f = lattice.exact_block(target, [0; 3], lattice.dims, field_antiderivative);
        [f[0] / eps, f[1] / eps, f[2] / eps]
    }

    pub fn run(&self, eps_list: &[f64]) -> Result<Vec<LimitRow>, GravityError> {
        if eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(GravityError::NotDecreasing);
        }
        for &e in eps_list {
            check_eps(e)?;
        }
        if self.r.shape() != self.plane.shape() {
            return Err(GravityError::GridMismatch("density does not match the planar grid".into()));
        }
        let limits: Vec<([f64; 2], [f64; 3])> = self
            .probes
            .iter()
            .map(|&p| {
                let (i, j) = self.probe_cell(p);
                (self.vp(i, j), self.g.field_at([p[0], p[1], 0.0]))
            })
            .collect();
        let mut rows = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            let mut row = LimitRow {
                eps,
                g1: 0.0,
                g3: 0.0,
                g4: 0.0,
                g3_column_mean: 0.0,
            };
            for (p, (vp, e2_limit)) in self.probes.iter().zip(&limits) {
                let e1 = self.layer_field(eps, *p);
                row.g3 = row.g3.max(e1[2].abs());
                row.g4 = row.g4.max((e1[0] - vp[0]).abs().max((e1[1] - vp[1]).abs()));
                let e2 = self.g.field_at([p[0], p[1], eps * p[2]]);
                for m in 0..3 {
                    row.g1 = row.g1.max((e2[m] - e2_limit[m]).abs());
                }
            }
            // column means of the vertical component over the probe columns
            let mut seen: Vec<[u64; 2]> = Vec::new();
            for p in &self.probes {
                let key = [p[0].to_bits(), p[1].to_bits()];
                if seen.contains(&key) {
                    continue;
                }
                seen.push(key);
                let hz = 1.0 / self.nz as f64;
                let mean: f64 = (0..self.nz)
                    .map(|k| self.layer_field(eps, [p[0], p[1], (k as f64 + 0.5) * hz])[2])
                    .sum::<f64>()
                    / self.nz as f64;
                row.g3_column_mean = row.g3_column_mean.max(mean.abs());
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

/// Writes limit rows as CSV with columns `eps,G1_err,G3_err,G4_err`.
pub fn limit_csv(rows: &[LimitRow]) -> String {
    let mut out = String::from("eps,G1_err,G3_err,G4_err\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.eps, r.g1, r.g3, r.g4));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_are_validated() {
        assert!(GravityConfig::self_gravitating().validate().is_ok());
        assert!(GravityConfig::external().validate().is_ok());
        let bad = GravityConfig {
            beta: 0.5,
            ..GravityConfig::external()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn centrifugal_by_hand() {
        let cfg = GravityConfig::self_gravitating();
        assert_eq!(cfg.centrifugal(1.0, 0.0), [2.0, 0.0]);
        assert_eq!(cfg.centrifugal(0.0, 0.0), [0.0, 0.0]);
        let still = GravityConfig { chi: 0.0, ..cfg };
        assert_eq!(still.centrifugal(3.0, -2.0), [0.0, 0.0]);
    }
    #[test]
    fn self_gravity_fft_matches_direct() {
        let grid = Grid3D::new(Grid2D::unit(8, 8).unwrap(), 4, 0.2).unwrap();
        let sg = SelfGravity3D::new(&grid, 1.0);
        let rho = Field::from_fn(grid.shape(), |i, j, k| 1.0 + 0.1 * (i + 2 * j + 3 * k) as f64);
        let a = sg.e1(&rho);
        let b = sg.e1_direct(&rho);
        for m in 0..3 {
            for (x, y) in a.comps[m].interior_values().zip(b.comps[m].interior_values()) {
                assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()), "{x} {y}");
            }
        }
    }

    #[test]
    fn uniform_layer_pulls_inward() {
        let grid = Grid3D::new(Grid2D::unit(8, 8).unwrap(), 4, 0.1).unwrap();
        let sg = SelfGravity3D::new(&grid, 1.0);
        let e = sg.e1(&Field::constant(grid.shape(), 1.0));
        // left edge is pulled to +x, bottom cells up
        assert!(e.comps[0].get(0, 4, 1) > 0.0);
        assert!(e.comps[0].get(7, 4, 1) < 0.0);
        assert!(e.comps[2].get(3, 3, 0) > 0.0);
        assert!(e.comps[2].get(3, 3, 3) < 0.0);
    }

    #[test]
    fn planar_fft_matches_direct_and_is_antisymmetric() {
        let grid = Grid2D::unit(10, 10).unwrap();
        let sg = SelfGravity2D::new(&grid, 1.0);
        let r = Field::constant(grid.shape(), 1.0);
        let (p1, g1) = sg.evaluate(&r);
        let (p2, g2) = sg.evaluate_direct(&r);
        for (a, b) in p1.interior_values().zip(p2.interior_values()) {
            assert!((a - b).abs() < 1e-10);
        }
        for m in 0..2 {
            for (a, b) in g1.comps[m].interior_values().zip(g2.comps[m].interior_values()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        // mirror symmetry of a uniform square
        assert!((g1.comps[0].get(2, 5, 0) + g1.comps[0].get(7, 5, 0)).abs() < 1e-10);
        assert!(g1.comps[0].get(2, 5, 0) > 0.0);
        assert!((p1.get(2, 3, 0) - p1.get(7, 6, 0)).abs() < 1e-10);
    }

    #[test]
    fn external_density_far_field_is_point_like() {
        let g = ExternalDensity::gaussian([0.5, 0.5], 0.0, 1.0, 16).unwrap();
        let mass: f64 = g.lattice.values.iter().sum::<f64>() * g.lattice.cell_volume();
        let x = [20.5, 0.5, 0.0];
        let f = g.field_at(x);
        let expect = mass / (20.0 * 20.0);
        assert!((f[0] - expect).abs() < 1e-3 * expect.abs(), "{f:?} {expect}");
        let p = g.potential_at(x);
        assert!((p - mass / 20.0).abs() < 1e-3 * mass / 20.0);
    }

    #[test]
    fn near_block_agrees_with_full_exact_sum() {
        let g = ExternalDensity::gaussian([0.5, 0.5], 0.0, 1.0, 12).unwrap();
        let l = &g.lattice;
        for x in [[0.5, 0.5, 0.1], [0.3, 0.9, 0.02], [1.8, 0.5, 0.0]] {
            let exact = l.exact_block(x, [0; 3], l.dims, field_antiderivative);
            let mixed = g.field_at(x);
            for m in 0..3 {
                assert!((exact[m] - mixed[m]).abs() < 2e-3 * (1.0 + exact[m].abs()), "{exact:?} {mixed:?}");
            }
            let pe = l.exact_block(x, [0; 3], l.dims, |u| [potential_antiderivative(u)])[0];
            assert!((pe - g.potential_at(x)).abs() < 1e-3 * pe);
        }
    }

    #[test]
    fn symmetric_density_satisfies_l0() {
        let g = ExternalDensity::gaussian([0.5, 0.5], 0.0, 4.0, 16).unwrap();
        let probes: Vec<[f64; 2]> = (0..5).map(|i| [0.1 + 0.2 * i as f64, 0.3]).collect();
        assert!(check_l0(&g, &probes) < 1e-12);
        let shifted = ExternalDensity::gaussian([0.5, 0.5], 0.5, 4.0, 16).unwrap();
        assert!(check_l0(&shifted, &probes) > 1e-3);
    }

    #[test]
    fn limit_csv_header() {
        let csv = limit_csv(&[]);
        assert_eq!(csv, "eps,G1_err,G3_err,G4_err\n");
    }
}
