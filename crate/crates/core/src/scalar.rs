//! Scalar abstraction shared by every probability and amplitude computation.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Complex amplitude over a real scalar.
pub type Complex<T> = num_complex::Complex<T>;

/// Floating-point scalar used for amplitudes, probabilities and matrix entries.
///
/// Tolerances are carried by the scalar so that `f32` instantiations get
/// bounds that its mantissa can actually meet.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Serialize + DeserializeOwned + Send + Sync
{
    /// Tolerance for claims that hold exactly in real arithmetic.
    const EXACT_TOL: f64;
    /// Tolerance for eigenvalue-based checks (PSD, operator bounds).
    const EIGEN_TOL: f64;
    /// Squared magnitude below which an amplitude is dropped from a sparse state.
    const PRUNE: f64;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count fits in scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn exact_tol() -> Self {
        Self::lit(Self::EXACT_TOL)
    }

    fn eigen_tol() -> Self {
        Self::lit(Self::EIGEN_TOL)
    }
}

impl Real for f64 {
    const EXACT_TOL: f64 = 1e-10;
    const EIGEN_TOL: f64 = 1e-8;
    const PRUNE: f64 = 1e-30;
}

impl Real for f32 {
    const EXACT_TOL: f64 = 1e-5;
    const EIGEN_TOL: f64 = 1e-4;
    const PRUNE: f64 = 1e-14;
}

pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

pub(crate) fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

pub(crate) fn creal<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// `2^-bits` in the scalar type.
pub(crate) fn inv_pow2<T: Real>(bits: usize) -> T {
    T::lit(0.5f64.powi(bits as i32))
}
