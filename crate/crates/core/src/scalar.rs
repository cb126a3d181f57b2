//! Real/complex scalar abstraction and the entire trigonometric kernels
//! (`sin z / z` and friends) that every transform is built from.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

/// Field used for spectral-parameter arithmetic: `f64` on the real axis,
/// `Complex64` everywhere else.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn from_real(x: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn abs(self) -> f64;
    fn is_finite(self) -> bool;
    fn to_complex(self) -> Complex64;

    fn zero() -> Self {
        Self::from_real(0.0)
    }
    fn one() -> Self {
        Self::from_real(1.0)
    }
}

impl Scalar for f64 {
    fn from_real(x: f64) -> Self {
        x
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn sin(self) -> Self {
        Complex64::sin(self)
    }
    fn cos(self) -> Self {
        Complex64::cos(self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// `sin z / z`, continuous at zero.
pub fn sinc<T: Scalar>(z: T) -> T {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        T::one() - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `(sin z - z cos z) / z^3`, continuous at zero (value 1/3).
pub fn sinc3<T: Scalar>(z: T) -> T {
    if z.abs() < 0.5 {
        // sum_{n>=1} (-1)^{n+1} 2n z^{2n-2} / (2n+1)!
        let z2 = z * z;
        let mut term = T::one();
        let mut acc = T::zero();
        let mut fact = 6.0; // (2n+1)! for n = 1
        for n in 1..=9usize {
            let coeff = 2.0 * n as f64 / fact;
            if n % 2 == 1 {
                acc += term * coeff;
            } else {
                acc -= term * coeff;
            }
            term *= z2;
            fact *= ((2 * n + 2) * (2 * n + 3)) as f64;
        }
        acc
    } else {
        let (s, c) = z.sin_cos();
        (s - z * c) / (z * z * z)
    }
}

/// `sin(rho x) / rho`, with the limit `x` at `rho = 0`.
pub fn sin_over<T: Scalar>(rho: T, x: f64) -> T {
    sinc(rho * x) * x
}

/// Principal square root of `lambda`.
pub fn principal_sqrt(lambda: Complex64) -> Complex64 {
    lambda.sqrt()
}
