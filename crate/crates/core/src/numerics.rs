//! Small numerical helpers shared across modules.

/// Neumaier-compensated accumulator. Used for every global integral so that
/// conservation and cancellation checks are not polluted by summation order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Accumulator::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Trapezoidal rule over possibly non-uniform samples.
pub fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    let mut acc = Accumulator::new();
    for w in 0..t.len().saturating_sub(1) {
        acc.add(0.5 * (t[w + 1] - t[w]) * (f[w] + f[w + 1]));
    }
    acc.value()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut v = vec![1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(v.iter().copied()), 2.0);
        v.reverse();
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let t = [0.0, 0.1, 0.35, 1.0];
        let f: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &f) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.2, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|e| 3.0 * e * e).collect();
        assert!((log_log_slope(&x, &y) - 2.0).abs() < 1e-12);
    }
}
