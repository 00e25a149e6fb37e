//! Truncated Fock-basis density matrices and the state families used by the
//! experiments.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::special::ln_factorial;

/// Extra Fock levels kept above the largest index a series will read.
pub const HEADROOM: usize = 16;

/// Dimension a state must be generated at so that compensation series up to
/// `j_max` never read elements lost to truncation.
pub fn working_dim(reporting_dim: usize, j_max: usize) -> usize {
    reporting_dim + j_max + HEADROOM
}

/// Hermitian matrix `<n|rho|m>` over the first `dim` Fock states.
///
/// Only the upper triangle is ever written; the lower triangle is mirrored
/// on construction, so the matrix is Hermitian exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    dim: usize,
    elements: Vec<Complex<T>>,
    tail_bound: T,
}

impl<T: Real> DensityMatrix<T> {
    /// Builds a matrix from its upper triangle (`n <= m`). Imaginary parts on
    /// the diagonal are discarded.
    pub fn from_upper_fn<F>(dim: usize, tail_bound: T, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Complex<T>,
    {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        let zero = Complex::new(T::zero(), T::zero());
        let mut elements = vec![zero; dim * dim];
        for n in 0..dim {
            let diag = f(n, n);
            elements[n * dim + n] = Complex::new(diag.re, T::zero());
            for m in n + 1..dim {
                let v = f(n, m);
                elements[n * dim + m] = v;
                elements[m * dim + n] = v.conj();
            }
        }
        Ok(Self {
            dim,
            elements,
            tail_bound,
        })
    }

    /// Diagonal matrix with the given photon-number distribution.
    pub fn from_diagonal(probabilities: &[T], tail_bound: T) -> Result<Self> {
        Self::from_upper_fn(probabilities.len(), tail_bound, |n, m| {
            if n == m {
                Complex::new(probabilities[n], T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Probability mass the generating state has beyond the truncation.
    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    pub fn with_tail_bound(mut self, tail_bound: T) -> Self {
        self.tail_bound = tail_bound;
        self
    }

    /// `<n|rho|m>`; zero outside the truncation.
    pub fn get(&self, n: usize, m: usize) -> Complex<T> {
        if n < self.dim && m < self.dim {
            self.elements[n * self.dim + m]
        } else {
            Complex::new(T::zero(), T::zero())
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|n| self.get(n, n).re).collect()
    }

    pub fn trace(&self) -> T {
        self.diagonal()
            .into_iter()
            .fold(T::zero(), |acc, p| acc + p)
    }

    /// True when every off-diagonal element is at most `tol` in modulus.
    pub fn is_diagonal(&self, tol: T) -> bool {
        (0..self.dim).all(|n| (n + 1..self.dim).all(|m| self.get(n, m).norm() <= tol))
    }

    /// Largest element-wise modulus difference over the common block.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let dim = self.dim.min(other.dim);
        let mut worst = T::zero();
        for n in 0..dim {
            for m in 0..dim {
                worst = worst.max((self.get(n, m) - other.get(n, m)).norm());
            }
        }
        worst
    }

    /// Leading `dim x dim` block. The tail bound is grown by the diagonal
    /// mass that was cut away.
    pub fn truncated(&self, dim: usize) -> Result<Self> {
        if dim == 0 || dim > self.dim {
            return Err(invalid(format!(
                "cannot truncate a {}-level matrix to {dim} levels",
                self.dim
            )));
        }
        let cut = (dim..self.dim).fold(T::zero(), |acc, n| acc + self.get(n, n).re.max(T::zero()));
        Self::from_upper_fn(dim, self.tail_bound + cut, |n, m| self.get(n, m))
    }

    pub fn cast<U: Real>(&self) -> DensityMatrix<U> {
        let c = |v: Complex<T>| {
            Complex::new(
                U::lit(v.re.to_f64().unwrap_or(f64::NAN)),
                U::lit(v.im.to_f64().unwrap_or(f64::NAN)),
            )
        };
        DensityMatrix {
            dim: self.dim,
            elements: self.elements.iter().map(|&v| c(v)).collect(),
            tail_bound: U::lit(self.tail_bound.to_f64().unwrap_or(f64::NAN)),
        }
    }
}

/// Thermal state with mean photon number `mean`:
/// `p_n = mean^n / (1 + mean)^(n+1)`, tail `(mean / (1 + mean))^dim`.
pub fn make_thermal<T: Real>(mean: T, dim: usize) -> Result<DensityMatrix<T>> {
    if !(mean >= T::zero()) || !mean.is_finite() {
        return Err(invalid(format!("thermal mean photon number must be >= 0, got {mean}")));
    }
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let ratio = mean / (T::one() + mean);
    let p0 = T::one() / (T::one() + mean);
    let probs: Vec<T> = (0..dim).map(|n| p0 * ratio.powi(n as i32)).collect();
    DensityMatrix::from_diagonal(&probs, ratio.powi(dim as i32))
}

/// Number state `|m><m|`.
pub fn make_fock<T: Real>(m: usize, dim: usize) -> Result<DensityMatrix<T>> {
    if m >= dim {
        return Err(invalid(format!("photon number {m} does not fit in {dim} levels")));
    }
    let mut probs = vec![T::zero(); dim];
    probs[m] = T::one();
    DensityMatrix::from_diagonal(&probs, T::zero())
}

/// True when `dim` leaves the recommended headroom for a coherent amplitude.
pub fn coherent_headroom_ok<T: Real>(alpha: Complex<T>, dim: usize) -> bool {
    let a = alpha.norm();
    a * a + T::lit(5.0) * a + T::lit(10.0) <= T::from_index(dim)
}

/// Coherent state `<n|rho|m> = e^{-|a|^2} a^n conj(a)^m / sqrt(n! m!)`.
///
/// Too small a `dim` is not an error; the loss shows up in the tail bound
/// (see [`coherent_headroom_ok`]).
pub fn make_coherent<T: Real>(alpha: Complex<T>, dim: usize) -> Result<DensityMatrix<T>> {
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(invalid("coherent amplitude must be finite"));
    }
    let mean = alpha.norm_sqr();
    let r = alpha.norm();
    let theta = alpha.arg();
    // amplitudes c_n = e^{-|a|^2/2} |a|^n e^{i n theta} / sqrt(n!)
    let amps: Vec<Complex<T>> = (0..dim)
        .map(|n| {
            let mag = if r == T::zero() {
                if n == 0 {
                    T::one()
                } else {
                    T::zero()
                }
            } else {
                let ln_mag = T::from_index(n) * r.ln()
                    - T::lit(0.5) * T::lit(ln_factorial(n))
                    - T::lit(0.5) * mean;
                ln_mag.exp()
            };
            Complex::from_polar(mag, T::from_index(n) * theta)
        })
        .collect();
    let tail = poisson_tail(mean, dim);
    DensityMatrix::from_upper_fn(dim, tail, |n, m| amps[n] * amps[m].conj())
}

/// `P(N >= dim)` for a Poisson variable with the given mean, summed directly
/// so it stays accurate when tiny.
fn poisson_tail<T: Real>(mean: T, dim: usize) -> T {
    if mean == T::zero() {
        return T::zero();
    }
    let mut total = T::zero();
    let mut k = dim;
    loop {
        let ln_p = T::from_index(k) * mean.ln() - mean - T::lit(ln_factorial(k));
        let term = ln_p.exp();
        total = total + term;
        // terms are decreasing once k exceeds the mean
        if T::from_index(k) > mean && term <= total * T::epsilon() {
            break;
        }
        k += 1;
        if k > dim + 100_000 {
            break;
        }
    }
    total
}

/// `sum_n n <n|rho|n>` over the truncation.
pub fn mean_photon<T: Real>(rho: &DensityMatrix<T>) -> T {
    rho.diagonal()
        .into_iter()
        .enumerate()
        .fold(T::zero(), |acc, (n, p)| acc + T::from_index(n) * p)
}

/// State family plus the truncation it is generated at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateKind<T> {
    Thermal { mean: T },
    Fock { photons: usize },
    Coherent { alpha: Complex<T> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateSpec<T> {
    pub kind: StateKind<T>,
    pub dim: usize,
}

impl<T: Real> StateSpec<T> {
    pub fn new(kind: StateKind<T>, dim: usize) -> Result<Self> {
        let spec = Self { kind, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        match self.kind {
            StateKind::Thermal { mean } if !(mean >= T::zero()) => {
                Err(invalid(format!("thermal mean must be >= 0, got {mean}")))
            }
            StateKind::Fock { photons } if photons >= self.dim => Err(invalid(format!(
                "photon number {photons} does not fit in {} levels",
                self.dim
            ))),
            _ => Ok(()),
        }
    }

    /// Same family at a different truncation.
    pub fn with_dim(&self, dim: usize) -> Self {
        Self { kind: self.kind, dim }
    }

    pub fn build(&self) -> Result<DensityMatrix<T>> {
        match self.kind {
            StateKind::Thermal { mean } => make_thermal(mean, self.dim),
            StateKind::Fock { photons } => make_fock(photons, self.dim),
            StateKind::Coherent { alpha } => make_coherent(alpha, self.dim),
        }
    }

    /// Probability beyond the truncation.
    pub fn tail_probability(&self) -> T {
        match self.kind {
            StateKind::Thermal { mean } => (mean / (T::one() + mean)).powi(self.dim as i32),
            StateKind::Fock { .. } => T::zero(),
            StateKind::Coherent { alpha } => poisson_tail(alpha.norm_sqr(), self.dim),
        }
    }

    /// Exact `<n|rho|n+d>` of the untruncated state.
    pub fn element(&self, n: usize, d: usize) -> Complex<T> {
        let m = n + d;
        let zero = Complex::new(T::zero(), T::zero());
        match self.kind {
            StateKind::Thermal { mean } => {
                if d != 0 {
                    return zero;
                }
                let p = (mean / (T::one() + mean)).powi(n as i32) / (T::one() + mean);
                Complex::new(p, T::zero())
            }
            StateKind::Fock { photons } => {
                if d == 0 && n == photons {
                    Complex::new(T::one(), T::zero())
                } else {
                    zero
                }
            }
            StateKind::Coherent { alpha } => {
                let r = alpha.norm();
                if r == T::zero() {
                    return if m == 0 { Complex::new(T::one(), T::zero()) } else { zero };
                }
                let ln_mag = T::from_index(n + m) * r.ln()
                    - alpha.norm_sqr()
                    - T::lit(0.5) * T::lit(ln_factorial(n) + ln_factorial(m));
                // a^n conj(a)^m has phase (n - m) theta
                Complex::from_polar(ln_mag.exp(), -T::from_index(d) * alpha.arg())
            }
        }
    }

    /// Mean photon number of the untruncated state.
    pub fn mean_photon(&self) -> T {
        match self.kind {
            StateKind::Thermal { mean } => mean,
            StateKind::Fock { photons } => T::from_index(photons),
            StateKind::Coherent { alpha } => alpha.norm_sqr(),
        }
    }
}

impl StateSpec<f64> {
    /// Parses `thermal:<mean>`, `fock:<m>` or `coherent:<re>[,<im>]`.
    pub fn parse_kind(text: &str) -> Result<StateKind<f64>> {
        let (family, arg) = text
            .split_once(':')
            .ok_or_else(|| invalid(format!("state '{text}' must look like family:value")))?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("bad number '{s}' in state '{text}'")))
        };
        match family.trim() {
            "thermal" => Ok(StateKind::Thermal { mean: num(arg)? }),
            "fock" => arg
                .trim()
                .parse::<usize>()
                .map(|photons| StateKind::Fock { photons })
                .map_err(|_| invalid(format!("bad photon number in state '{text}'"))),
            "coherent" => {
                let mut parts = arg.split(',');
                let re = num(parts.next().unwrap_or(""))?;
                let im = match parts.next() {
                    Some(s) => num(s)?,
                    None => 0.0,
                };
                Ok(StateKind::Coherent {
                    alpha: Complex::new(re, im),
                })
            }
            other => Err(invalid(format!("unknown state family '{other}'"))),
        }
    }

    pub fn kind_label(&self) -> String {
        match self.kind {
            StateKind::Thermal { mean } => format!("thermal:{mean}"),
            StateKind::Fock { photons } => format!("fock:{photons}"),
            StateKind::Coherent { alpha } => format!("coherent:{},{}", alpha.re, alpha.im),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn vacuum_limits() {
        let t = make_thermal(0.0f64, 4).unwrap();
        assert_eq!(t.diagonal(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(t.tail_bound(), 0.0);
        let coh = make_coherent(Complex::new(0.0f64, 0.0), 4).unwrap();
        assert_eq!(coh.diagonal(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(mean_photon(&t), 0.0);
    }

    #[test]
    fn thermal_weights_match_brute_force_normalisation() {
        // normalise (2/3)^n over a long range by summation
        let weights: Vec<f64> = (0..2000).map(|n| (2.0f64 / 3.0).powi(n)).collect();
        let z: f64 = weights.iter().sum();
        let t = make_thermal(2.0f64, 64).unwrap();
        assert!((t.get(0, 0).re - weights[0] / z).abs() < 1e-14);
        assert!((t.get(2, 2).re - weights[2] / z).abs() < 1e-14);
        assert!((t.get(2, 2).re - 4.0 / 27.0).abs() < 1e-15);
        let tail = (2.0f64 / 3.0).powi(64);
        assert!((t.tail_bound() - tail).abs() < 1e-25);
        assert!((t.tail_bound() - 5.372e-12).abs() < 1e-15);
    }

    #[test]
    fn fock_states() {
        assert_eq!(make_fock::<f64>(0, 2).unwrap().diagonal(), vec![1.0, 0.0]);
        assert_eq!(make_fock::<f64>(1, 3).unwrap().diagonal(), vec![0.0, 1.0, 0.0]);
        assert_eq!(make_fock::<f64>(5, 8).unwrap().trace(), 1.0);
        assert_eq!(mean_photon(&make_fock::<f64>(3, 8).unwrap()), 3.0);
        assert!(matches!(make_fock::<f64>(3, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn invalid_thermal_arguments() {
        assert!(make_thermal(-0.1f64, 4).is_err());
        assert!(make_thermal(1.0f64, 0).is_err());
        assert!(make_thermal(f64::NAN, 4).is_err());
    }

    #[test]
    fn coherent_elements() {
        let rho = make_coherent(Complex::new(1.0f64, 0.0), 32).unwrap();
        let poisson0 = (-1.0f64).exp();
        assert!((rho.get(0, 0).re - poisson0).abs() < 1e-15);
        // <0|rho|1> = e^{-1} conj(alpha) = e^{-1}
        assert!((rho.get(0, 1) - c(poisson0)).norm() < 1e-15);

        let rho = make_coherent(Complex::new(1.5f64, 0.0), 32).unwrap();
        let brute: f64 = (0..32)
            .map(|n| {
                let mut p = (-2.25f64).exp();
                for k in 1..=n {
                    p *= 2.25 / k as f64;
                }
                n as f64 * p
            })
            .sum();
        assert!((mean_photon(&rho) - 2.25).abs() < 1e-9);
        assert!((mean_photon(&rho) - brute).abs() < 1e-12);
    }

    #[test]
    fn coherent_phase_convention() {
        let alpha = Complex::from_polar(0.8f64, 0.7);
        let rho = make_coherent(alpha, 24).unwrap();
        let spec = StateSpec::new(StateKind::Coherent { alpha }, 24).unwrap();
        for n in 0..6 {
            for d in 0..4 {
                let expected = (-alpha.norm_sqr()).exp() * alpha.powi(n as i32)
                    * alpha.conj().powi((n + d) as i32)
                    / ((1..=n).product::<usize>() as f64 * (1..=n + d).product::<usize>() as f64)
                        .sqrt();
                assert!((rho.get(n, n + d) - expected).norm() < 1e-14);
                assert!((spec.element(n, d) - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn thermal_mean_converges_with_dimension() {
        let m = mean_photon(&make_thermal(2.0f64, 64).unwrap());
        assert!((m - 2.0).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for dim in [8, 16, 32, 64] {
            let err = (mean_photon(&make_thermal(2.0f64, dim).unwrap()) - 2.0).abs();
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn trace_plus_tail_is_one() {
        for rho in [
            make_thermal(2.0f64, 40).unwrap(),
            make_thermal(0.7f64, 20).unwrap(),
            make_coherent(Complex::new(1.0, 0.5), 12).unwrap(),
            make_coherent(Complex::new(1.5, 0.0), 32).unwrap(),
            make_fock(3, 5).unwrap(),
        ] {
            assert!((rho.trace() + rho.tail_bound() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_by_construction() {
        let rho = make_coherent(Complex::new(0.3f64, -1.1), 10).unwrap();
        for n in 0..10 {
            assert_eq!(rho.get(n, n).im, 0.0);
            for m in 0..10 {
                assert_eq!(rho.get(n, m), rho.get(m, n).conj());
            }
        }
    }

    #[test]
    fn truncation_grows_tail() {
        let rho = make_thermal(2.0f64, 64).unwrap();
        let small = rho.truncated(10).unwrap();
        assert!((small.trace() + small.tail_bound() - 1.0).abs() < 1e-12);
        assert!(rho.truncated(65).is_err());
    }

    #[test]
    fn single_precision_thermal() {
        let t = make_thermal(2.0f32, 32).unwrap();
        assert!((t.get(2, 2).re - 4.0 / 27.0).abs() < 1e-7);
    }

    #[test]
    fn parse_state_kinds() {
        assert_eq!(
            StateSpec::parse_kind("thermal:2").unwrap(),
            StateKind::Thermal { mean: 2.0 }
        );
        assert_eq!(
            StateSpec::parse_kind("fock:3").unwrap(),
            StateKind::Fock { photons: 3 }
        );
        assert_eq!(
            StateSpec::parse_kind("coherent:1,0.5").unwrap(),
            StateKind::Coherent {
                alpha: Complex::new(1.0, 0.5)
            }
        );
        assert!(StateSpec::parse_kind("squeezed:1").is_err());
    }
}
