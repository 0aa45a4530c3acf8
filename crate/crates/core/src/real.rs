//! Scalar abstraction for the math modules.

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar the geometry, kinematics and trajectory math is
/// generic over. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + core::fmt::Debug
    + core::fmt::Display
    + core::ops::AddAssign
    + core::ops::SubAssign
    + core::ops::MulAssign
    + core::ops::DivAssign
    + Default
    + 'static
{
    /// Shorthand for lossy conversion of literal constants.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal converts to any Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}
