//! Floating-point functions that `core` does not provide.

pub(crate) use libm::{cos, erfc, exp, fabs as abs, floor, log as ln, log1p, pow, sin, sqrt};

#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    pow(x, n as f64)
}
