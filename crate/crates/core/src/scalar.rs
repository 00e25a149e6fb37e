//! Scalar abstraction for the deterministic parts of the crate.
//!
//! Density matrices, the loss channel and the compensation algebra are
//! written against [`Real`] so they can run in `f32` or `f64`. The Monte
//! Carlo layers (homodyne sampling, photon counting, experiments) are
//! concrete in `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar usable throughout the Fock-space algebra.
pub trait Real:
    Float + FloatConst + FromPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for the supported types.
    fn lit(v: f64) -> Self;

    /// Converts an index or count.
    fn from_index(i: usize) -> Self {
        Self::lit(i as f64)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(v: f64) -> Self {
                v as $t
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
