//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar the numerical core is generic over (`f32` or `f64`).
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + LowerExp + Debug + Send + Sync
{
    /// Lossy conversion from an `f64` literal or geometry weight.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 converts to a float scalar")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Relative machine precision of the type.
    fn eps() -> Self {
        <Self as approx::AbsDiffEq>::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a real scalar.
pub type Cplx<T> = Complex<T>;

pub(crate) fn cplx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

/// `|z|` without requiring `num_traits::Float`.
pub fn modulus<T: Real>(z: Cplx<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

pub(crate) fn creal<T: Real>(re: T) -> Cplx<T> {
    Complex::new(re, T::zero())
}
