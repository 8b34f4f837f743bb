//! Closed-form integrals of the Newtonian kernels over axis-aligned cuboids
//! and planar rectangles. Coordinates are `u = y - x` (source minus target).
//! A box integral is the signed sum of an antiderivative over the corners,
//! the sign being `+` for upper and `-` for lower bounds in each axis.

/// `ln(b + r)` with `r = sqrt(b² + rest2)`, stable when `b < 0` and `rest2 ≪ b²`.
#[inline]
fn ln_b_plus_r(b: f64, r: f64, rest2: f64) -> f64 {
    if b >= 0.0 {
        (b + r).ln()
    } else {
        (rest2 / (r - b)).ln()
    }
}

/// `coef · ln(b + r)`, zero whenever the coefficient vanishes (the only way
/// the logarithm can diverge at a corner).
#[inline]
fn weighted_log(coef: f64, b: f64, r: f64, rest2: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else {
        coef * ln_b_plus_r(b, r, rest2)
    }
}

/// `c · atan(ab / (c r))`, zero at `c = 0`.
#[inline]
fn weighted_atan(c: f64, a: f64, b: f64, r: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * (a * b / (c * r)).atan()
    }
}

/// Antiderivative of `1/|u|` over a cuboid.
pub fn potential_antiderivative(u: [f64; 3]) -> f64 {
    let [x, y, z] = u;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    weighted_log(x * y, z, r, x2 + y2) + weighted_log(y * z, x, r, y2 + z2)
        + weighted_log(z * x, y, r, z2 + x2)
        - 0.5 * x * weighted_atan(x, y, z, r)
        - 0.5 * y * weighted_atan(y, z, x, r)
        - 0.5 * z * weighted_atan(z, x, y, r)
}

/// Antiderivatives of `-u/|u|³` (the field `(x - y)/|x - y|³`) over a cuboid, per component.
pub fn field_antiderivative(u: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = u;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    if r == 0.0 {
        return [0.0; 3];
    }
    let lx = if x == 0.0 && y2 + z2 == 0.0 { 0.0 } else { ln_b_plus_r(x, r, y2 + z2) };
    let ly = if y == 0.0 && x2 + z2 == 0.0 { 0.0 } else { ln_b_plus_r(y, r, x2 + z2) };
    let lz = if z == 0.0 && x2 + y2 == 0.0 { 0.0 } else { ln_b_plus_r(z, r, x2 + y2) };
    // A(a, b; c) = a ln(b + r) + b ln(a + r) - c atan(ab/(cr)); logs with a
    // vanishing coefficient are dropped through the multiplication by zero,
    // except when the logarithm itself is infinite, which the guards above exclude.
    let safe = |coef: f64, l: f64| if coef == 0.0 { 0.0 } else { coef * l };
    [
        safe(y, lz) + safe(z, ly) - weighted_atan(x, y, z, r),
        safe(z, lx) + safe(x, lz) - weighted_atan(y, z, x, r),
        safe(x, ly) + safe(y, lx) - weighted_atan(z, x, y, r),
    ]
}

/// `∫_box 1/|u| du`.
pub fn box_potential(lo: [f64; 3], hi: [f64; 3]) -> f64 {
    let mut sum = 0.0;
    for corner in 0..8 {
        let (u, sign) = corner_of(lo, hi, corner);
        sum += sign * potential_antiderivative(u);
    }
    sum
}

/// `∫_box -u/|u|³ du`, i.e. the field at the origin of a unit-density box.
pub fn box_field(lo: [f64; 3], hi: [f64; 3]) -> [f64; 3] {
    let mut sum = [0.0; 3];
    for corner in 0..8 {
        let (u, sign) = corner_of(lo, hi, corner);
        let f = field_antiderivative(u);
        for m in 0..3 {
            sum[m] += sign * f[m];
        }
    }
    sum
}

#[inline]
fn corner_of(lo: [f64; 3], hi: [f64; 3], corner: usize) -> ([f64; 3], f64) {
    let mut u = [0.0; 3];
    let mut sign = 1.0;
    for d in 0..3 {
        if corner >> d & 1 == 1 {
            u[d] = hi[d];
        } else {
            u[d] = lo[d];
            sign = -sign;
        }
    }
    (u, sign)
}

/// `∫_rect 1/|u| du` over a rectangle in the plane of the target.
pub fn square_potential(lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let mut sum = 0.0;
    for corner in 0..4 {
        let (u, sign) = corner_2d(lo, hi, corner);
        let [x, y] = u;
        let r = (x * x + y * y).sqrt();
        if r == 0.0 {
            continue;
        }
        sum += sign * (weighted_log(x, y, r, x * x) + weighted_log(y, x, r, y * y));
    }
    sum
}

/// `∫_rect -u/|u|³ du` over a rectangle in the plane of the target, which
/// must not lie on the rectangle's closure.
pub fn square_field(lo: [f64; 2], hi: [f64; 2]) -> [f64; 2] {
    let mut sum = [0.0; 2];
    for corner in 0..4 {
        let (u, sign) = corner_2d(lo, hi, corner);
        let [x, y] = u;
        let r = (x * x + y * y).sqrt();
        sum[0] += sign * ln_b_plus_r(y, r, x * x);
        sum[1] += sign * ln_b_plus_r(x, r, y * y);
    }
    sum
}

#[inline]
fn corner_2d(lo: [f64; 2], hi: [f64; 2], corner: usize) -> ([f64; 2], f64) {
    let mut u = [0.0; 2];
    let mut sign = 1.0;
    for d in 0..2 {
        if corner >> d & 1 == 1 {
            u[d] = hi[d];
        } else {
            u[d] = lo[d];
            sign = -sign;
        }
    }
    (u, sign)
}
