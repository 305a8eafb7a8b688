//! Scalar abstraction: the numeric kernels are generic over [`Real`] so the
//! same code instantiates at `f64` (the working precision) and `f32`.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar usable by every kernel in this crate.
///
/// `of` converts literal constants; `erf` and `standard_normal` route
/// through `f64` so that the `f32` and `f64` instantiations consume an
/// identical random stream and share the same special-function tables.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + std::iter::Sum
    + std::fmt::Display
    + std::fmt::Debug
    + std::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self;
    fn to_f64(self) -> f64;

    fn erf(self) -> Self {
        Self::of(libm::erf(self.to_f64()))
    }

    /// One N(0,1) draw. Always consumes the `f64` ziggurat path of the RNG
    /// stream, independent of `Self`.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::of(rng.sample::<f64, _>(StandardNormal))
    }
}

impl Real for f64 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
}
