//! Unit-efficiency homodyne detection of the dressed state.
//!
//! Quadrature convention: the phase-`phi` quadrature has vacuum variance
//! 1/4 and outcome density
//!
//! ```text
//! p(x; phi) = sum_{n,m} <n|rho|m> e^{i(n-m)phi} psi_n(x) psi_m(x)
//! ```
//!
//! with `psi_n` the real oscillator eigenfunctions in `x`. Internally the
//! wavefunction and kernel tables work in the standard coordinate
//! `q = sqrt(2) x` (vacuum variance 1/2).
//!
//! Loss is never simulated at the detector: the state handed to this module
//! is already the damped one.

mod estimate;
mod pattern;
mod sampling;
mod wavefunctions;

pub use estimate::{error_saturation_profile, estimate_element, estimate_ray};
pub use pattern::{Kernel, PatternFunctions, DEFAULT_KERNEL_X_MAX};
pub use sampling::{
    quadrature_pdf, read_samples, sample_quadratures, write_samples, QuadratureSample,
    QuadratureSampler,
};
pub use wavefunctions::{hermite_functions, quadrature_wavefunctions};
