//! Scalar abstraction shared by every numerical module.

use nalgebra::RealField;
use num_traits::{FloatConst, FromPrimitive};
use std::fmt::{Debug, Display};

/// Floating point scalar the solver is generic over (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + FloatConst + Display + Debug + Send + Sync + 'static {
    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count into the scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion to `f64`, used for reporting only.
    fn to_f64(self) -> f64;

    /// Machine epsilon.
    fn eps() -> Self;

    /// Relative tolerance below which two values are "the same" at this
    /// precision: `max(target, 100 eps)`.
    fn tol(target: f64) -> Self {
        let t = Self::lit(target);
        let floor = Self::eps() * Self::lit(100.0);
        if t > floor {
            t
        } else {
            floor
        }
    }
}

impl Real for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn eps() -> Self {
        f32::EPSILON
    }
}
