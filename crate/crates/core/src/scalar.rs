//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the estimation core is written against: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Tolerance for conjugate-symmetry checks and imaginary residuals.
    fn symmetry_tol() -> Self;

    /// Cost value standing in for "log of zero probability".
    ///
    /// Any sum containing it saturates to it, so a hypothesis carrying an
    /// impossible term loses every comparison without producing NaN.
    fn impossible() -> Self {
        Self::max_value()
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }
}

impl Scalar for f64 {
    fn symmetry_tol() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn symmetry_tol() -> Self {
        1e-4
    }
}

/// Add two cost terms, saturating at [`Scalar::impossible`].
#[inline]
pub fn cost_add<T: Scalar>(a: T, b: T) -> T {
    let s = a + b;
    if s.is_finite() && s < T::impossible() {
        s
    } else {
        T::impossible()
    }
}

#[inline]
pub fn is_impossible<T: Scalar>(c: T) -> bool {
    c >= T::impossible()
}
