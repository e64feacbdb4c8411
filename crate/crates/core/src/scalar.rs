//! Floating-point abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar usable by every solver in this crate.
///
/// Implemented for `f32` and `f64`. The tolerances used throughout the crate
/// (root refinement to 1e-12, normalization to 1e-10) are only attainable in
/// `f64`; `f32` instantiations are useful for quick surveys.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for [`Scalar::lit`].
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::lit(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip_in_f64() {
        assert_eq!(lit::<f64>(1.25e-7), 1.25e-7);
        assert_eq!(f64::count(600), 600.0);
        assert!((lit::<f32>(0.1) - 0.1f32).abs() < f32::EPSILON);
    }
}
