//! Discrete convolution of a cell field with an offset-indexed kernel table,
//! `out(i) = Σ_j T(i - j) src(j)`, by direct summation or by zero-padded FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::fields::{Field, Shape};

/// Kernel values for all offsets `(di, dj, dk)` with `|d·| < n·`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    shape: Shape,
    values: Vec<f64>,
}

impl KernelTable {
    pub fn build(shape: Shape, mut f: impl FnMut(isize, isize, isize) -> f64) -> Self {
        let (ex, ey, ez) = (2 * shape.nx - 1, 2 * shape.ny - 1, 2 * shape.nz - 1);
        let mut values = Vec::with_capacity(ex * ey * ez);
        for dk in 0..ez {
            for dj in 0..ey {
                for di in 0..ex {
                    values.push(f(
                        di as isize - (shape.nx as isize - 1),
                        dj as isize - (shape.ny as isize - 1),
                        dk as isize - (shape.nz as isize - 1),
                    ));
                }
            }
        }
        Self { shape, values }
    }

    #[inline]
    pub fn get(&self, di: isize, dj: isize, dk: isize) -> f64 {
        let s = self.shape;
        let ex = 2 * s.nx - 1;
        let ey = 2 * s.ny - 1;
        let i = (di + s.nx as isize - 1) as usize;
        let j = (dj + s.ny as isize - 1) as usize;
        let k = (dk + s.nz as isize - 1) as usize;
        self.values[(k * ey + j) * ex + i]
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }
}

/// Reference O(N²) evaluation.
pub fn convolve_direct(table: &KernelTable, src: &Field) -> Field {
    let s = table.shape();
    assert_eq!(src.shape(), s);
    let sources: Vec<(isize, isize, isize, f64)> = (0..s.nz)
        .flat_map(|k| (0..s.ny).flat_map(move |j| (0..s.nx).map(move |i| (i, j, k))))
        .map(|(i, j, k)| (i as isize, j as isize, k as isize, src.get(i, j, k)))
        .filter(|t| t.3 != 0.0)
        .collect();
    Field::from_fn(s, |i, j, k| {
        let (i, j, k) = (i as isize, j as isize, k as isize);
        sources
            .iter()
            .map(|&(a, b, c, v)| table.get(i - a, j - b, k - c) * v)
            .sum()
    })
}

/// Circulant embedding of one or more kernel tables on a `2n` periodic box.
pub struct FftConvolver {
    shape: Shape,
    dims: [usize; 3],
    plans: [(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>); 3],
    spectra: Vec<Vec<Complex64>>,
}

impl FftConvolver {
    pub fn new(tables: &[KernelTable]) -> Self {
        let shape = tables[0].shape();
        let pad = |n: usize| if n == 1 { 1 } else { 2 * n };
        let dims = [pad(shape.nx), pad(shape.ny), pad(shape.nz)];
        let mut planner = FftPlanner::new();
        let plans = dims.map(|n| (planner.plan_fft_forward(n), planner.plan_fft_inverse(n)));
        let mut conv = Self {
            shape,
            dims,
            plans,
            spectra: Vec::new(),
        };
        for t in tables {
            assert_eq!(t.shape(), shape);
            let mut buf = vec![Complex64::new(0.0, 0.0); dims[0] * dims[1] * dims[2]];
            let wrap = |d: isize, n: usize| d.rem_euclid(n as isize) as usize;
            for dk in -(shape.nz as isize - 1)..shape.nz as isize {
                for dj in -(shape.ny as isize - 1)..shape.ny as isize {
                    for di in -(shape.nx as isize - 1)..shape.nx as isize {
                        let at = conv.lin(wrap(di, dims[0]), wrap(dj, dims[1]), wrap(dk, dims[2]));
                        buf[at] = Complex64::new(t.get(di, dj, dk), 0.0);
                    }
                }
            }
            conv.transform(&mut buf, false);
            conv.spectra.push(buf);
        }
        conv
    }

    #[inline]
    fn lin(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let [nx, ny, nz] = self.dims;
        let pick = |axis: usize| {
            if inverse {
                &self.plans[axis].1
            } else {
                &self.plans[axis].0
            }
        };
        // x lines are contiguous
        if nx > 1 {
            pick(0).process(buf);
        }
        let mut line = Vec::new();
        for (axis, n, stride) in [(1, ny, nx), (2, nz, nx * ny)] {
            if n == 1 {
                continue;
            }
            let plan = pick(axis);
            line.resize(n, Complex64::new(0.0, 0.0));
            let outer = buf.len() / (n * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for (t, slot) in line.iter_mut().enumerate() {
                        *slot = buf[base + t * stride];
                    }
                    plan.process(&mut line);
                    for (t, v) in line.iter().enumerate() {
                        buf[base + t * stride] = *v;
                    }
                }
            }
        }
    }

    /// Convolves `src` with every table; one output field per table.
    pub fn apply(&self, src: &Field) -> Vec<Field> {
        let s = self.shape;
        assert_eq!(src.shape(), s);
        let total = self.dims.iter().product::<usize>();
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        for k in 0..s.nz {
            for j in 0..s.ny {
                for i in 0..s.nx {
                    buf[self.lin(i, j, k)] = Complex64::new(src.get(i, j, k), 0.0);
                }
            }
        }
        self.transform(&mut buf, false);
        let norm = 1.0 / total as f64;
        self.spectra
            .iter()
            .map(|spec| {
                let mut work: Vec<Complex64> = buf.iter().zip(spec).map(|(a, b)| a * b).collect();
                self.transform(&mut work, true);
                Field::from_fn(s, |i, j, k| work[self.lin(i, j, k)].re * norm)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct() {
        for shape in [Shape::new(5, 4, 3), Shape::new(6, 7, 1)] {
            let t = KernelTable::build(shape, |a, b, c| {
                1.0 / (1.0 + (a * a + 2 * b * b + 3 * c * c) as f64) + 0.1 * a as f64
            });
            let src = Field::from_fn(shape, |i, j, k| ((i * 7 + j * 3 + k) % 5) as f64 - 1.5);
            let direct = convolve_direct(&t, &src);
            let fft = FftConvolver::new(std::slice::from_ref(&t)).apply(&src);
            for (a, b) in direct.interior_values().zip(fft[0].interior_values()) {
                assert!((a - b).abs() < 1e-12, "{a} {b}");
            }
        }
    }
}
