//! Scalar abstraction shared by the physics formulas and the tensor engine.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the physics and autograd layers.
///
/// Implemented for `f32` and `f64`. The simulator and trainer are pinned to
/// `f64` (see the aliases at the crate root); `f32` exists for callers that
/// want cheaper inference and accept the loss of bit-reproducibility.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
