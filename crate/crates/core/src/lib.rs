//! Loss-error compensation for quantum-state measurement.
//!
//! A signal state measured with detector efficiency `eta` looks like the
//! damped state a perfect detector would see. Inverting the binomial loss map
//! term by term recovers the signal, but with *measured* coefficients the
//! statistical error of the truncated series decides whether the procedure
//! works. This crate simulates the two measurement schemes that matter:
//!
//! * homodyne tomography, whose pattern-function estimates carry an error
//!   that saturates at `sqrt(2/N)` and makes the compensated error diverge
//!   for `eta <= 1/2`;
//! * direct photodetection, whose binomial error vanishes with the
//!   probability itself, so diagonal elements stay recoverable below 1/2.
//!
//! Module map: [`fock`] builds states, [`loss`] holds the exact forward and
//! inverse maps, [`homodyne`] and [`direct`] simulate the measurements,
//! [`compensation`] evaluates the series with measured coefficients, and
//! [`experiments`] drives seeded, CSV-producing runs.
//!
//! The deterministic algebra is generic over [`Real`]; the aliases below fix
//! it to `f64`, which is what the Monte Carlo layers use.

// negated comparisons are deliberate: they route NaN to the error branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compensation;
pub mod direct;
pub mod element;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod homodyne;
pub mod loss;
pub mod scalar;
pub mod special;

pub use compensation::{CompensationResult, TracePoint, Verdict};
pub use element::MeasuredElement;
pub use error::{Error, Result};
pub use fock::{DensityMatrix, StateKind, StateSpec};
pub use loss::{Inversion, LossChannel};
pub use scalar::Real;

pub type DensityMatrix64 = fock::DensityMatrix<f64>;
pub type DensityMatrix32 = fock::DensityMatrix<f32>;
pub type StateSpec64 = fock::StateSpec<f64>;
pub type LossChannel64 = loss::LossChannel<f64>;
pub type LossChannel32 = loss::LossChannel<f32>;
pub type MeasuredElement64 = element::MeasuredElement<f64>;
pub type CompensationResult64 = compensation::CompensationResult<f64>;
