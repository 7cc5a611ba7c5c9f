//! Angle wrapping and unit conversion.
//!
//! Everything inside the crate works in radians; degrees appear only at the
//! CSV/CLI boundary.

use crate::scalar::Scalar;

/// Wrap to (−π, π].
pub fn wrap_pi<T: Scalar>(x: T) -> T {
    let tau = T::TAU();
    let mut r = x % tau;
    if r <= -T::PI() {
        r += tau;
    } else if r > T::PI() {
        r -= tau;
    }
    r
}

/// Wrap to [0, 2π).
pub fn wrap_two_pi<T: Scalar>(x: T) -> T {
    let tau = T::TAU();
    let r = x % tau;
    let r = if r < T::zero() { r + tau } else { r };
    // r + tau may round up to exactly tau for tiny negative r
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Wrap degrees to (−180, 180].
pub fn wrap_deg<T: Scalar>(x: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut r = x % full;
    if r <= -half {
        r += full;
    } else if r > half {
        r -= full;
    }
    r
}

pub fn deg_to_rad<T: Scalar>(d: T) -> T {
    d.to_radians()
}

pub fn rad_to_deg<T: Scalar>(r: T) -> T {
    r.to_degrees()
}

/// Signed circular difference `a − b`, wrapped to (−π, π].
pub fn circ_diff<T: Scalar>(a: T, b: T) -> T {
    wrap_pi(a - b)
}

/// Circular linear interpolation between two bearings (radians), `f` in [0, 1].
pub fn circ_lerp<T: Scalar>(a: T, b: T, f: T) -> T {
    wrap_pi(a + circ_diff(b, a) * f)
}
