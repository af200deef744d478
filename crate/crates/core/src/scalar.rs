//! Scalar abstraction for the whole crate.
//!
//! Every numeric kernel is generic over [`Real`] so the same code runs in
//! `f32` and `f64`. Shipping type aliases at the crate root pin `f64`, which
//! is what the CLI and the reference tolerances assume.

/// Floating-point scalar usable in every kernel of this crate.
pub trait Real:
    nalgebra::RealField
    + Copy
    + Default
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + std::fmt::Display
    + Send
    + Sync
{
    /// `true` when the value is neither NaN nor infinite.
    fn finite(self) -> bool;

    /// Nearest representable value of an `f64` literal.
    fn of(v: f64) -> Self {
        num_traits::FromPrimitive::from_f64(v).expect("literal not representable")
    }

    /// Lossy widening to `f64` (used for logging and file output only).
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar not convertible to f64")
    }
}

impl Real for f32 {
    fn finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Real for f64 {
    fn finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// Shorthand for `R::of`, reads better at call sites with inference.
#[inline]
pub fn real<R: Real>(v: f64) -> R {
    R::of(v)
}
