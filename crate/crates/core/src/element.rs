use num_complex::Complex;

use crate::scalar::Real;

/// An estimated matrix element `<n|rho|n+d>` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasuredElement<T> {
    pub n: usize,
    pub d: usize,
    pub estimate: Complex<T>,
    pub stderr: T,
    pub samples: usize,
    /// The estimate sits on a boundary of its error model (a photon-count
    /// frequency of exactly 0 or 1), so `stderr` is zero without the value
    /// being known exactly.
    pub degenerate: bool,
}

impl<T: Real> MeasuredElement<T> {
    /// A noiseless coefficient, e.g. read off an exact density matrix.
    pub fn exact(n: usize, d: usize, value: Complex<T>) -> Self {
        Self {
            n,
            d,
            estimate: value,
            stderr: T::zero(),
            samples: 0,
            degenerate: false,
        }
    }
}
