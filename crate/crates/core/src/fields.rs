//! Structured cell-centred grids, fields with one ghost ring, the scaled
//! operators `∇_ε`, `div_ε`, `Δ_ε`, viscous stress, heat flux and the
//! boundary closures of the thin layer and of the planar target problem.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Accumulator;
use crate::thermo::{ThermoError, ThermoParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}

/// Reflection behaviour of a field across the two walls normal to one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

pub const EVEN: [Parity; 3] = [Parity::Even; 3];

/// Interior cell counts. Planar fields use `nz = 1`; storage always carries a
/// ghost layer on every side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Shape {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    #[inline]
    pub fn sy(&self) -> usize {
        self.nx + 2
    }

    #[inline]
    pub fn sz(&self) -> usize {
        (self.nx + 2) * (self.ny + 2)
    }

    pub fn padded_len(&self) -> usize {
        self.sz() * (self.nz + 2)
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Index from padded coordinates (0 and n+1 are ghosts).
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * (self.ny + 2) + j) * (self.nx + 2) + i
    }

    /// Index of interior cell `(i, j, k)`, zero based.
    #[inline]
    pub fn cell(&self, i: usize, j: usize, k: usize) -> usize {
        self.idx(i + 1, j + 1, k + 1)
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.sy(),
            _ => self.sz(),
        }
    }

    pub fn len(&self, axis: usize) -> usize {
        match axis {
            0 => self.nx,
            1 => self.ny,
            _ => self.nz,
        }
    }

    /// Padded indices of all interior cells, x fastest.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        let s = *self;
        (1..=s.nz).flat_map(move |k| {
            (1..=s.ny).flat_map(move |j| (1..=s.nx).map(move |i| s.idx(i, j, k)))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub const MIN_CELLS: usize = 8;

    pub fn unit(nx: usize, ny: usize) -> Result<Self, FieldError> {
        Self::new(nx, ny, [0.0, 0.0], [1.0, 1.0])
    }

    pub fn new(nx: usize, ny: usize, origin: [f64; 2], extent: [f64; 2]) -> Result<Self, FieldError> {
        if nx < Self::MIN_CELLS || ny < Self::MIN_CELLS {
            return Err(FieldError::InvalidGrid(format!(
                "need at least {} cells per horizontal direction, got {nx}x{ny}",
                Self::MIN_CELLS
            )));
        }
        if !(extent[0] > 0.0 && extent[1] > 0.0) {
            return Err(FieldError::InvalidGrid(format!("nonpositive extent {extent:?}")));
        }
        Ok(Self {
            nx,
            ny,
            x0: origin[0],
            y0: origin[1],
            lx: extent[0],
            ly: extent[1],
        })
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.hy()
    }

    pub fn center(&self) -> [f64; 2] {
        [self.x0 + 0.5 * self.lx, self.y0 + 0.5 * self.ly]
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.nx, self.ny, 1)
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.hx()
        } else {
            self.hy()
        }
    }
}

/// The rescaled layer `ω × (0, 1)`. `eps` only enters through the operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3D {
    pub plane: Grid2D,
    pub nz: usize,
    pub eps: f64,
}

impl Grid3D {
    pub const MIN_LAYERS: usize = 4;

    pub fn new(plane: Grid2D, nz: usize, eps: f64) -> Result<Self, FieldError> {
        if nz < Self::MIN_LAYERS {
            return Err(FieldError::InvalidGrid(format!(
                "need at least {} vertical cells, got {nz}",
                Self::MIN_LAYERS
            )));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(FieldError::InvalidGrid(format!("eps must lie in (0, 1], got {eps}")));
        }
        Ok(Self { plane, nz, eps })
    }

    #[inline]
    pub fn hz(&self) -> f64 {
        1.0 / self.nz as f64
    }

    pub fn z(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.hz()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.plane.nx, self.plane.ny, self.nz)
    }

    pub fn cell_volume(&self) -> f64 {
        self.plane.cell_area() * self.hz()
    }

    /// Spacing seen by the scaled operators: the vertical one is `ε h_z`.
    pub fn scaled_spacing(&self, axis: usize) -> f64 {
        match axis {
            0 => self.plane.hx(),
            1 => self.plane.hy(),
            _ => self.eps * self.hz(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    shape: Shape,
    data: Vec<f64>,
    parity: Option<[Parity; 3]>,
}

impl Field {
    pub fn zeros(shape: Shape) -> Self {
        Self::constant(shape, 0.0)
    }

    pub fn constant(shape: Shape, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.padded_len()],
            parity: None,
        }
    }

    /// Builds a field from a function of zero-based interior indices.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(shape);
        for k in 0..shape.nz {
            for j in 0..shape.ny {
                for i in 0..shape.nx {
                    out.data[shape.cell(i, j, k)] = f(i, j, k);
                }
            }
        }
        out
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.shape.cell(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let at = self.shape.cell(i, j, k);
        self.data[at] = v;
        self.parity = None;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable storage; invalidates the ghost ring.
    pub fn data_mut(&mut self) -> &mut [f64] {
        self.parity = None;
        &mut self.data
    }

    pub fn ghosts_filled(&self) -> bool {
        self.parity.is_some()
    }

    pub fn parity(&self) -> Option<[Parity; 3]> {
        self.parity
    }

    /// Panics if the ghost ring is stale; operators call this on entry.
    #[track_caller]
    pub fn require_ghosts(&self) -> [Parity; 3] {
        self.parity
            .expect("contract violation: ghost cells must be filled before applying a stencil")
    }

    pub fn interior_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.shape.interior().map(move |c| self.data[c])
    }

    pub fn max_abs(&self) -> f64 {
        self.interior_values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.interior_values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.interior_values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.interior_values().all(f64::is_finite)
    }

    /// Sum of interior values times `weight`, compensated.
    pub fn integrate(&self, weight: f64) -> f64 {
        let mut acc = Accumulator::new();
        for v in self.interior_values() {
            acc.add(v);
        }
        acc.value() * weight
    }

    /// Fills the ghost ring by mirroring across each wall with the given parity
    /// per axis. Edges and corners are filled by composing the reflections.
    pub fn fill_ghosts(&mut self, parity: [Parity; 3]) {
        let s = self.shape;
        let (nx, ny, nz) = (s.nx, s.ny, s.nz);
        let sx = parity[0].sign();
        let sy = parity[1].sign();
        let sz = parity[2].sign();
        let d = &mut self.data;
        for k in 1..=nz {
            for j in 1..=ny {
                d[s.idx(0, j, k)] = sx * d[s.idx(1, j, k)];
                d[s.idx(nx + 1, j, k)] = sx * d[s.idx(nx, j, k)];
            }
        }
        for k in 1..=nz {
            for i in 0..=nx + 1 {
                d[s.idx(i, 0, k)] = sy * d[s.idx(i, 1, k)];
                d[s.idx(i, ny + 1, k)] = sy * d[s.idx(i, ny, k)];
            }
        }
        for j in 0..=ny + 1 {
            for i in 0..=nx + 1 {
                d[s.idx(i, j, 0)] = sz * d[s.idx(i, j, 1)];
                d[s.idx(i, j, nz + 1)] = sz * d[s.idx(i, j, nz)];
            }
        }
        self.parity = Some(parity);
    }

    pub fn axpy(&mut self, alpha: f64, other: &Field) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        self.parity = None;
    }
}

/// A field with 2 or 3 components.
#[derive(Debug, Clone, PartialEq)]
pub struct VecField {
    pub comps: Vec<Field>,
}

impl VecField {
    pub fn zeros(shape: Shape, n: usize) -> Self {
        Self {
            comps: (0..n).map(|_| Field::zeros(shape)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn shape(&self) -> Shape {
        self.comps[0].shape()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }
}

/// Row-major `n × n` tensor field.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub n: usize,
    pub comps: Vec<Field>,
}

impl TensorField {
    pub fn get(&self, row: usize, col: usize) -> &Field {
        &self.comps[row * self.n + col]
    }
}

/// Centred derivative along `axis` at padded index `c`, with spacing `h`.
#[inline]
pub(crate) fn centered(data: &[f64], c: usize, stride: usize, h: f64) -> f64 {
    (data[c + stride] - data[c - stride]) / (2.0 * h)
}

fn gradient(f: &Field, spacings: &[f64]) -> VecField {
    f.require_ghosts();
    let s = f.shape();
    let mut out = VecField::zeros(s, spacings.len());
    for (axis, (comp, &h)) in out.comps.iter_mut().zip(spacings).enumerate() {
        let stride = s.stride(axis);
        let d = comp.data_mut();
        for c in s.interior() {
            d[c] = centered(&f.data, c, stride, h);
        }
    }
    out
}

fn divergence(v: &VecField, spacings: &[f64]) -> Field {
    assert_eq!(v.dim(), spacings.len(), "component count must match dimension");
    let s = v.shape();
    let mut out = Field::zeros(s);
    for (axis, (comp, &h)) in v.comps.iter().zip(spacings).enumerate() {
        comp.require_ghosts();
        let stride = s.stride(axis);
        let d = out.data_mut();
        for c in s.interior() {
            d[c] += centered(&comp.data, c, stride, h);
        }
    }
    out
}

fn spacings_3d(grid: &Grid3D) -> [f64; 3] {
    [grid.scaled_spacing(0), grid.scaled_spacing(1), grid.scaled_spacing(2)]
}

fn spacings_2d(grid: &Grid2D) -> [f64; 2] {
    [grid.hx(), grid.hy()]
}

fn check_shape(f: &Field, expected: Shape) {
    assert_eq!(f.shape(), expected, "field shape does not match the grid");
}

/// `∇_ε f = (∂₁f, ∂₂f, ε⁻¹∂₃f)`.
pub fn grad_eps(f: &Field, grid: &Grid3D) -> VecField {
    check_shape(f, grid.shape());
    gradient(f, &spacings_3d(grid))
}

/// `div_ε v = ∂₁v₁ + ∂₂v₂ + ε⁻¹∂₃v₃`.
pub fn div_eps(v: &VecField, grid: &Grid3D) -> Field {
    check_shape(&v.comps[0], grid.shape());
    divergence(v, &spacings_3d(grid))
}

/// `Δ_ε f = div_ε ∇_ε f`, built by composing the two centred stencils with the
/// gradient's ghosts filled by the parities induced from those of `f`.
pub fn laplace_eps(f: &Field, grid: &Grid3D) -> Field {
    let parity = f.require_ghosts();
    let mut g = grad_eps(f, grid);
    fill_gradient_ghosts(&mut g, parity);
    div_eps(&g, grid)
}

/// Ghost parities of `∂_d f`: flipped along axis `d`, inherited elsewhere.
pub fn fill_gradient_ghosts(g: &mut VecField, parity: [Parity; 3]) {
    for (d, comp) in g.comps.iter_mut().enumerate() {
        let mut p = parity;
        p[d] = p[d].flip();
        comp.fill_ghosts(p);
    }
}

pub fn grad_h(f: &Field, grid: &Grid2D) -> VecField {
    check_shape(f, grid.shape());
    gradient(f, &spacings_2d(grid))
}

pub fn div_h(v: &VecField, grid: &Grid2D) -> Field {
    check_shape(&v.comps[0], grid.shape());
    divergence(v, &spacings_2d(grid))
}

pub fn laplace_h(f: &Field, grid: &Grid2D) -> Field {
    let parity = f.require_ghosts();
    let mut g = grad_h(f, grid);
    fill_gradient_ghosts(&mut g, parity);
    div_h(&g, grid)
}

/// `μ (G + Gᵀ - (2/3) tr G · I)` for a velocity gradient `G[m][d] = ∂_d u_m`.
/// In the plane this equals `μ(∇V + ∇Vᵀ - div V I) + (μ/3) div V I`.
#[inline]
pub fn stress_from_gradient<const N: usize>(mu: f64, g: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut tr = 0.0;
    for (d, row) in g.iter().enumerate() {
        tr += row[d];
    }
    let mut s = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            s[i][j] = mu * (g[i][j] + g[j][i]);
        }
        s[i][i] -= mu * 2.0 / 3.0 * tr;
    }
    s
}

/// `S : G = 2μ |D - (tr D / 3) I₃|²` with `D` the symmetric part of `G`
/// (padded by zeros to 3×3 in the plane). A sum of squares, hence ≥ 0.
#[inline]
pub fn dissipation<const N: usize>(mu: f64, g: &[[f64; N]; N]) -> f64 {
    let mut tr = 0.0;
    for (d, row) in g.iter().enumerate() {
        tr += row[d];
    }
    let third = tr / 3.0;
    let mut sum = 0.0;
    for i in 0..N {
        for j in 0..N {
            let mut dij = 0.5 * (g[i][j] + g[j][i]);
            if i == j {
                dij -= third;
            }
            sum += dij * dij;
        }
    }
    sum += (3 - N) as f64 * third * third;
    2.0 * mu * sum
}

fn velocity_gradient<const N: usize>(u: &VecField, spacings: &[f64; N]) -> Vec<[Field; N]> {
    u.comps
        .iter()
        .map(|c| {
            let g = gradient(c, spacings);
            let mut it = g.comps.into_iter();
            std::array::from_fn(|_| it.next().unwrap())
        })
        .collect()
}

fn stress<const N: usize>(
    params: &ThermoParams,
    theta: &Field,
    u: &VecField,
    spacings: &[f64; N],
) -> Result<TensorField, FieldError> {
    assert_eq!(u.dim(), N);
    let s = theta.shape();
    let grads = velocity_gradient(u, spacings);
    let mut out = TensorField {
        n: N,
        comps: (0..N * N).map(|_| Field::zeros(s)).collect(),
    };
    for c in s.interior() {
        let th = theta.data[c];
        if !(th > 0.0) {
            return Err(ThermoError::Domain {
                what: "temperature",
                value: th,
            }
            .into());
        }
        let g: [[f64; N]; N] = std::array::from_fn(|m| std::array::from_fn(|d| grads[m][d].data[c]));
        let st = stress_from_gradient(params.mu(th), &g);
        for i in 0..N {
            for j in 0..N {
                out.comps[i * N + j].data[c] = st[i][j];
            }
        }
    }
    Ok(out)
}

/// `S = μ(θ)(∇_ε u + ∇_ε uᵀ - (2/3) div_ε u I)` at cell centres.
pub fn stress_3d(
    params: &ThermoParams,
    theta: &Field,
    u: &VecField,
    grid: &Grid3D,
) -> Result<TensorField, FieldError> {
    check_shape(theta, grid.shape());
    stress(params, theta, u, &spacings_3d(grid))
}

/// `S_h = μ(Θ)(∇_h V + ∇_h Vᵀ - div_h V I_h) + (μ/3) div_h V I_h`.
pub fn stress_2d(
    params: &ThermoParams,
    theta: &Field,
    v: &VecField,
    grid: &Grid2D,
) -> Result<TensorField, FieldError> {
    check_shape(theta, grid.shape());
    stress(params, theta, v, &spacings_2d(grid))
}

fn heat_flux(params: &ThermoParams, theta: &Field, spacings: &[f64]) -> Result<VecField, FieldError> {
    let mut q = gradient(theta, spacings);
    for c in theta.shape().interior() {
        let th = theta.data[c];
        if !(th > 0.0) {
            return Err(ThermoError::Domain {
                what: "temperature",
                value: th,
            }
            .into());
        }
        let k = params.kappa(th);
        for comp in q.comps.iter_mut() {
            comp.data[c] *= -k;
        }
    }
    Ok(q)
}

/// Fourier flux `q = -κ(θ) ∇_ε θ`.
pub fn heat_flux_3d(params: &ThermoParams, theta: &Field, grid: &Grid3D) -> Result<VecField, FieldError> {
    check_shape(theta, grid.shape());
    heat_flux(params, theta, &spacings_3d(grid))
}

pub fn heat_flux_2d(params: &ThermoParams, theta: &Field, grid: &Grid2D) -> Result<VecField, FieldError> {
    check_shape(theta, grid.shape());
    heat_flux(params, theta, &spacings_2d(grid))
}

/// Ghost parities of the velocity components in the layer: no-slip on the
/// lateral walls, slip (u₃ odd, u_h even) on the top and bottom.
pub fn velocity_parity_3d(component: usize) -> [Parity; 3] {
    let vertical = if component == 2 { Parity::Odd } else { Parity::Even };
    [Parity::Odd, Parity::Odd, vertical]
}

pub fn velocity_parity_2d() -> [Parity; 3] {
    [Parity::Odd, Parity::Odd, Parity::Even]
}

pub fn apply_bc_3d(rho: &mut Field, u: &mut VecField, theta: &mut Field) {
    rho.fill_ghosts(EVEN);
    theta.fill_ghosts(EVEN);
    for (m, comp) in u.comps.iter_mut().enumerate() {
        comp.fill_ghosts(velocity_parity_3d(m));
    }
}

pub fn apply_bc_2d(r: &mut Field, v: &mut VecField, theta: &mut Field) {
    r.fill_ghosts(EVEN);
    theta.fill_ghosts(EVEN);
    for comp in v.comps.iter_mut() {
        comp.fill_ghosts(velocity_parity_2d());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(eps: f64) -> Grid3D {
        Grid3D::new(Grid2D::unit(8, 10).unwrap(), 6, eps).unwrap()
    }

    #[test]
    fn ghost_indexing_round_trip() {
        let s = Shape::new(3, 4, 5);
        let f = Field::from_fn(s, |i, j, k| (i + 10 * j + 100 * k) as f64);
        assert_eq!(f.get(2, 3, 4), 432.0);
        assert_eq!(f.interior_values().count(), 60);
    }

    #[test]
    #[should_panic(expected = "contract violation")]
    fn stale_ghosts_panic() {
        let g = grid(0.5);
        let f = Field::zeros(g.shape());
        let _ = grad_eps(&f, &g);
    }

    #[test]
    fn vertical_derivative_carries_inverse_eps() {
        let g = grid(0.5);
        let mut f = Field::from_fn(g.shape(), |_, _, k| g.z(k));
        f.fill_ghosts(EVEN);
        let gr = grad_eps(&f, &g);
        let s = g.shape();
        for k in 1..s.nz - 1 {
            assert!((gr.comps[2].get(3, 3, k) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn corners_compose_reflections() {
        let s = Shape::new(4, 4, 4);
        let mut f = Field::constant(s, 2.0);
        f.fill_ghosts([Parity::Odd, Parity::Odd, Parity::Even]);
        assert_eq!(f.data()[s.idx(0, 0, 0)], 2.0);
        assert_eq!(f.data()[s.idx(0, 1, 0)], -2.0);
        assert_eq!(f.data()[s.idx(1, 1, 0)], 2.0);
    }

    #[test]
    fn dissipation_equals_stress_contraction() {
        let g = [[0.3, -1.2, 0.5], [0.7, 0.1, -0.4], [2.0, 0.0, -0.9]];
        let s = stress_from_gradient(1.7, &g);
        let mut contraction = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                contraction += s[i][j] * g[i][j];
            }
        }
        assert!((contraction - dissipation(1.7, &g)).abs() < 1e-12);
        let g2 = [[0.3, -1.2], [0.7, 0.1]];
        let s2 = stress_from_gradient(0.4, &g2);
        let c2: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| s2[i][j] * g2[i][j]).sum();
        assert!((c2 - dissipation(0.4, &g2)).abs() < 1e-12);
    }
}
