//! Scalar abstraction shared by the real and complex code paths.
//!
//! Boundary data always enters as complex matrices. Forms are assembled in
//! `f64` whenever every input is real, and in [`c64`] otherwise.

use ndarray_linalg::{c64, Lapack, Scalar};

pub trait Field: Scalar<Real = f64> + Lapack + Send + Sync {
    /// Narrow a complex number to this field; `None` if the imaginary part
    /// cannot be represented.
    fn from_c64(z: c64, tol: f64) -> Option<Self>;

    fn to_c64(self) -> c64;
}

impl Field for f64 {
    fn from_c64(z: c64, tol: f64) -> Option<Self> {
        (z.im.abs() <= tol).then_some(z.re)
    }

    fn to_c64(self) -> c64 {
        c64::new(self, 0.0)
    }
}

impl Field for c64 {
    fn from_c64(z: c64, _tol: f64) -> Option<Self> {
        Some(z)
    }

    fn to_c64(self) -> c64 {
        self
    }
}

/// Conjugated inner product `Σ conj(x_i) y_i`.
pub fn dot<S: Field>(x: &[S], y: &[S]) -> S {
    x.iter().zip(y).map(|(a, b)| a.conj() * *b).sum()
}

pub fn norm<S: Field>(x: &[S]) -> f64 {
    x.iter().map(|v| v.square()).sum::<f64>().sqrt()
}
