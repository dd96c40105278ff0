//! Scalar abstraction for angles, correlations and probabilities.
//!
//! Counting is always done in integers; the scalar type only enters when a
//! count is turned into a rate, an angle is compared, or a closed-form
//! correlation is evaluated.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Ratio of two counts, computed once at report time.
    fn ratio(num: i64, den: u64) -> Self {
        Self::lit(num as f64 / den as f64)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact rational used for integer accounting identities.
pub type Exact = num_rational::Ratio<i64>;
