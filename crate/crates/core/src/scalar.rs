//! Floating-point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the network, aggregation and privacy mechanisms are written against.
///
/// Implemented for `f32` and `f64`. Random draws are always produced in `f64`
/// and narrowed through [`Scalar::of`], so both widths consume identical RNG
/// streams for a given seed.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        // from_f64 is total for f32/f64 (it rounds or saturates to inf).
        Self::from_f64(v).expect("f64 is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narrowing_round_trip() {
        assert_eq!(f32::of(0.5), 0.5f32);
        assert_eq!(f64::of(0.1).as_f64(), 0.1);
        assert!(f32::of(1e300).is_infinite());
    }
}
