//! Complementary error function and its inverse.
//!
//! `erfc` uses the Maclaurin series of `erf` near the origin and a Lentz-evaluated
//! continued fraction in the tail. `inv_erfc` brackets the root, then polishes it
//! with safeguarded Newton steps on `ln erfc`, which stays well conditioned deep
//! in the tail where `erfc` itself is tiny.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SERIES_CUTOFF: f64 = 2.0;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_CUTOFF {
        1.0 - erf_series(x)
    } else {
        (-x * x).exp() * tail_fraction(x)
    }
}

/// `ln erfc(x)` for `x >= 0`, finite far beyond the underflow point of `erfc`.
fn ln_erfc_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < SERIES_CUTOFF {
        (1.0 - erf_series(x)).ln()
    } else {
        -x * x + tail_fraction(x).ln()
    }
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= -x2 / n;
        let contrib = term / (2.0 * n + 1.0);
        sum += contrib;
        if contrib.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

/// `erfc(x) * exp(x^2)` for `x >= 2`, from
/// `1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`.
fn tail_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (f * PI.sqrt())
}

/// Inverse of [`erfc`] on the open interval `(0, 2)`.
pub fn inv_erfc(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 2.0) {
        return Err(Error::domain(
            "inv_erfc",
            format!("argument {x} outside (0, 2)"),
        ));
    }
    if x == 1.0 {
        return Ok(0.0);
    }
    if x > 1.0 {
        // 2 - x is exact here (Sterbenz).
        return Ok(-inv_erfc_upper(2.0 - x));
    }
    Ok(inv_erfc_upper(x))
}

/// Root `y >= 0` of `erfc(y) = x` for `x` in `(0, 1)`.
fn inv_erfc_upper(x: f64) -> f64 {
    let target = x.ln();
    let f = |y: f64| ln_erfc_nonneg(y) - target;

    // ln erfc is strictly decreasing; widen until the root is bracketed.
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut y = 0.5 * (lo + hi);
    for _ in 0..50 {
        let fy = f(y);
        if fy == 0.0 {
            break;
        }
        if fy > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        // d/dy ln erfc(y) = -2/sqrt(pi) * exp(-y^2) / erfc(y)
        let slope = -FRAC_2_SQRT_PI * (-y * y - ln_erfc_nonneg(y)).exp();
        let mut next = y - fy / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-15 * y.max(1.0) {
            y = next;
            break;
        }
        y = next;
    }
    y
}
