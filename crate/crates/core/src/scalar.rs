//! Scalar abstraction shared by the analytic parts of the crate.
//!
//! The mapping probability and the end-to-end delay models only need field
//! arithmetic and ordering, so they are written against [`Scalar`] and work
//! for `f32`, `f64` and exact rationals such as [`crate::Rational`].

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Numeric type usable by the closed-form models.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug {
    /// Converts a nonnegative count into the scalar type.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// Clamps into the closed interval `[lo, hi]`.
    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        if self <= lo {
            lo
        } else if self >= hi {
            hi
        } else {
            self
        }
    }

    /// Lossy conversion used where a value feeds an `f64` random draw.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug {}
