//! Scalar abstraction for the numeric kernels.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
///
/// Kernels that are pure math (special functions, statistical tests,
/// filters, geodesic distance) are generic over this trait. Documented
/// accuracy targets (e.g. 1e-10 for the distribution tails) assume `f64`.
pub trait Real: Float + FromPrimitive + core::fmt::Debug + 'static {
    /// Lossy conversion from `f64`, used for algorithm constants.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    /// Conversion from usize counts.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
