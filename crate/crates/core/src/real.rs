//! Float scalar abstraction: geometry and tracking run on f32 or f64.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Default + std::fmt::Debug + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for constants and config values.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap()
    }

    /// Lossy conversion from `usize` counters.
    fn of_usize(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).unwrap()
    }

    /// Widen to `f64` for reporting.
    fn to_f64c(self) -> f64 {
        num_traits::NumCast::from(self).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}
