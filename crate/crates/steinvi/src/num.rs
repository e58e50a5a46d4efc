//! Scalar abstraction for the numerical core.

use nalgebra::RealField;
use num_traits::FromPrimitive;

/// Floating-point scalar usable throughout the crate.
///
/// Blanket-implemented for every type with the required arithmetic, so
/// `f32` and `f64` both qualify.
pub trait Real: RealField + FromPrimitive + Copy {}

impl<T: RealField + FromPrimitive + Copy> Real for T {}

/// Converts an `f64` literal into the working scalar type.
pub(crate) fn real<S: Real>(value: f64) -> S {
    S::from_f64(value).expect("literal representable in scalar type")
}

/// Converts a count into the working scalar type.
pub(crate) fn real_usize<S: Real>(value: usize) -> S {
    S::from_usize(value).expect("count representable in scalar type")
}
