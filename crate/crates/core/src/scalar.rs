//! Scalar abstraction for the geometric and closed-form layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Smallest relative tolerance worth requesting from iterative routines.
    fn tolerance_floor() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_tau<T: Real>(angle: T) -> T {
    let tau = T::TAU();
    let r = angle % tau;
    if r < T::zero() {
        let w = r + tau;
        if w >= tau {
            T::zero()
        } else {
            w
        }
    } else {
        r
    }
}

/// Reduces an angle to `(-π, π]`.
pub fn wrap_pi<T: Real>(angle: T) -> T {
    let w = wrap_tau(angle);
    if w > T::PI() {
        w - T::TAU()
    } else {
        w
    }
}
