//! Scalar helpers backed by `libm` so results are identical with and
//! without `std`.

use core::f64::consts::PI;

use nalgebra::{Complex, DMatrix};

/// Complex double.
pub type C64 = Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = DMatrix<C64>;

pub const TWO_PI: f64 = 2.0 * PI;

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn acos(x: f64) -> f64 {
    libm::acos(x)
}

#[inline]
pub fn asin(x: f64) -> f64 {
    libm::asin(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn pow10(x: f64) -> f64 {
    libm::pow(10.0, x)
}

/// `x` reduced to `[0, 2π)`.
#[inline]
pub fn wrap_two_pi(x: f64) -> f64 {
    let r = x - TWO_PI * libm::floor(x / TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// `e^{jx}`.
#[inline]
pub fn cis(x: f64) -> C64 {
    C64::new(cos(x), sin(x))
}

/// Magnitude of a complex number.
#[inline]
pub fn abs(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

/// Principal argument in `[-π, π]`.
#[inline]
pub fn arg(z: C64) -> f64 {
    libm::atan2(z.im, z.re)
}

/// Conjugated dot product `a^H b`.
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// Frobenius norm of a complex slice.
pub fn frobenius(values: &[C64]) -> f64 {
    sqrt(values.iter().map(|z| z.norm_sqr()).sum())
}
