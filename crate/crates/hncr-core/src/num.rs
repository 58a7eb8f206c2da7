//! Scalar abstractions used throughout the crate.
//!
//! [`Real`] is the floating-point scalar the library is generic over
//! (`f32` or `f64`; all shipped tolerances assume `f64`). [`Value`] is a
//! computational value over a `Real`: either a plain scalar, or a tape
//! variable that records the operation for reverse-mode differentiation.
//! Geometry and model code is written once against `Value` and works in
//! both worlds.

use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Margin keeping points strictly inside the unit ball: after projection
/// `sqrt(c)·‖x‖ ≤ 1 − EPS_BALL`, and `atanh` arguments are clamped to the
/// same bound.
pub const EPS_BALL: f64 = 1e-5;

/// Floating-point scalar the crate is generic over.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + std::iter::Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant; exact for f64, rounded for f32.
    fn real(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A scalar-valued term: plain number or autodiff tape variable.
///
/// Clamping primitives (`atanh`, `clamp_box`, `max_lit`) propagate a zero
/// derivative outside the admissible region, matching the convention that
/// a clipped value is locally constant.
pub trait Value<S: Real>:
    Sized
    + Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<S, Output = Self>
    + Sub<S, Output = Self>
    + Mul<S, Output = Self>
    + Div<S, Output = Self>
{
    /// Current numeric value (forward pass result).
    fn value(&self) -> S;

    /// A constant in the same computational context as `self`.
    fn lit(&self, c: S) -> Self;

    fn tanh(self) -> Self;

    /// `atanh` with the argument clamped to `±(1 − EPS_BALL)`.
    fn atanh(self) -> Self;

    fn exp(self) -> Self;

    fn ln(self) -> Self;

    fn sqrt(self) -> Self;

    fn leaky_relu(self, slope: S) -> Self;

    /// Clamps into `[lo, hi]`; derivative is zero outside.
    fn clamp_box(self, lo: S, hi: S) -> Self;

    /// Clamps from below; derivative is zero where the floor binds.
    fn max_lit(self, lo: S) -> Self;
}

pub(crate) fn atanh_arg_limit<S: Real>() -> S {
    S::one() - S::real(EPS_BALL)
}

impl<S: Real> Value<S> for S {
    fn value(&self) -> S {
        *self
    }

    fn lit(&self, c: S) -> Self {
        c
    }

    fn tanh(self) -> Self {
        num_traits::Float::tanh(self)
    }

    fn atanh(self) -> Self {
        let lim = atanh_arg_limit::<S>();
        num_traits::Float::atanh(num_traits::clamp(self, -lim, lim))
    }

    fn exp(self) -> Self {
        num_traits::Float::exp(self)
    }

    fn ln(self) -> Self {
        num_traits::Float::ln(self)
    }

    fn sqrt(self) -> Self {
        num_traits::Float::sqrt(self)
    }

    fn leaky_relu(self, slope: S) -> Self {
        if self >= S::zero() {
            self
        } else {
            slope * self
        }
    }

    fn clamp_box(self, lo: S, hi: S) -> Self {
        num_traits::clamp(self, lo, hi)
    }

    fn max_lit(self, lo: S) -> Self {
        if self < lo {
            lo
        } else {
            self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_values_behave_like_floats() {
        let x: f64 = 0.5;
        assert_eq!(x.lit(3.0), 3.0);
        assert_eq!(Value::<f64>::value(&x), 0.5);
        assert_eq!(Value::<f64>::leaky_relu(-2.0, 0.01), -0.02);
        assert_eq!(Value::<f64>::leaky_relu(2.0, 0.01), 2.0);
        assert_eq!(Value::<f64>::clamp_box(2.0, 0.0, 1.0), 1.0);
        assert_eq!(Value::<f64>::max_lit(-1.0, 0.0), 0.0);
    }

    #[test]
    fn atanh_is_clamped_near_one() {
        let y = Value::<f64>::atanh(1.0);
        assert!(y.is_finite());
        assert_eq!(y, (1.0f64 - EPS_BALL).atanh());
        // Odd symmetry holds up to libm rounding, not bitwise.
        assert!((Value::<f64>::atanh(-1.0) + y).abs() < 1e-9);
    }
}
