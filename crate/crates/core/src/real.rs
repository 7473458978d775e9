//! Scalar abstraction for the whole crate.
//!
//! Every numerical routine is generic over [`Real`], so the same code runs in
//! `f32` or `f64`. The shipped binaries and the acceptance tolerances assume
//! `f64`; `f32` instantiations are compile-and-smoke-test territory.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar with the conversions and constants the solvers need.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + 'static
{
    /// Shorthand conversion from an `f64` literal or intermediate.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 -> scalar conversion")
    }

    /// Conversion to `f64` for reporting.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar -> f64 conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `x^n` for small integer exponents, avoiding `powf` in hot loops.
#[inline]
pub fn powi<S: Real>(x: S, n: i32) -> S {
    x.powi(n)
}
