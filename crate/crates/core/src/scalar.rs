use std::iter::Sum;

use ndarray::NdFloat;
use num_traits::{FloatConst, FromPrimitive};

/// Floating-point scalar the numerical routines are generic over.
///
/// Implemented for `f32` and `f64`. Numerical constants are written once as
/// `f64` and converted with [`Scalar::lit`].
pub trait Scalar: NdFloat + FromPrimitive + FloatConst + Sum + Default {
    /// Converts an `f64` literal. Panics only if the target cannot represent
    /// finite values at all, which never happens for `f32`/`f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Logistic sigmoid, evaluated without overflow for large |x|.
    fn sigmoid(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }

    /// `ln(1 + e^x)` without overflow.
    fn softplus(self) -> Self {
        if self > Self::zero() {
            self + (-self).exp().ln_1p()
        } else {
            self.exp().ln_1p()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
