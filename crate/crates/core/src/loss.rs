//! The generalized Bernoulli loss transformation.
//!
//! Binomial photon loss with efficiency `eta` maps a signal state to the
//! damped ("dressed") state a unit-efficiency detector would see:
//!
//! ```text
//! <n|rho_meas|n+d> = sum_j B_j(n,d,eta) <n+j|rho_sig|n+d+j>
//! B_j(n,d,eta)     = sqrt((n+j)!(n+d+j)!) / (sqrt(n!(n+d)!) j!) * eta^((2n+d)/2) * (1-eta)^j
//! ```
//!
//! The inverse map has the same shape with `eta -> 1/eta`, giving the
//! alternating coefficients `A_j(n,d,eta)` with ratio `z = 1 - 1/eta`.
//! Both are evaluated in log-space so that indices near 200 stay finite.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::fock::DensityMatrix;
use crate::scalar::Real;
use crate::special::ln_ray_ratio;

/// Loss channel of efficiency `eta` in `(0, 1]`, with `z = 1 - 1/eta` and
/// damping time `t = -ln(eta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossChannel<T> {
    eta: T,
    z: T,
    t: T,
}

impl<T: Real> LossChannel<T> {
    pub fn new(eta: T) -> Result<Self> {
        if !(eta > T::zero() && eta <= T::one()) {
            return Err(invalid(format!("efficiency must lie in (0, 1], got {eta}")));
        }
        Ok(Self {
            eta,
            z: T::one() - eta.recip(),
            t: -eta.ln(),
        })
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    /// Ratio of the inverse series, `1 - 1/eta` (never positive).
    pub fn z(&self) -> T {
        self.z
    }

    /// Damping time `-ln(eta)`; additive under composition.
    pub fn t(&self) -> T {
        self.t
    }

    /// Forward coefficient `B_j(n, d, eta)`.
    pub fn forward_coefficient(&self, n: usize, d: usize, j: usize) -> T {
        coefficient(n, d, j, self.eta.ln(), T::one() - self.eta)
    }

    /// Inverse coefficient `A_j(n, d, eta)`.
    pub fn inverse_coefficient(&self, n: usize, d: usize, j: usize) -> T {
        coefficient(n, d, j, -self.eta.ln(), self.z)
    }

    /// Damps `rho_sig` into `rho_meas`. Sums run to the top of `rho`'s own
    /// truncation, so the input should carry working-dimension headroom.
    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        let dim = rho.dim();
        DensityMatrix::from_upper_fn(dim, rho.tail_bound(), |n, m| {
            let d = m - n;
            let mut acc = Complex::new(T::zero(), T::zero());
            for j in 0..dim - m {
                acc = acc + rho.get(n + j, m + j) * self.forward_coefficient(n, d, j);
            }
            acc
        })
    }

    /// Evaluates the inverse series with exact (noiseless) elements,
    /// truncated at `j_max` or at the top of the truncation, whichever comes
    /// first. Divergence is not an error; it shows up in the last-term
    /// diagnostics.
    pub fn invert(&self, rho_meas: &DensityMatrix<T>, j_max: usize) -> Result<Inversion<T>> {
        let dim = rho_meas.dim();
        let mut last_term = vec![T::zero(); dim * dim];
        let state = DensityMatrix::from_upper_fn(dim, rho_meas.tail_bound(), |n, m| {
            let d = m - n;
            let top = j_max.min(dim - 1 - m);
            let mut acc = Complex::new(T::zero(), T::zero());
            let mut last = T::zero();
            for j in 0..=top {
                let term = rho_meas.get(n + j, m + j) * self.inverse_coefficient(n, d, j);
                acc = acc + term;
                last = term.norm();
            }
            last_term[n * dim + m] = last;
            last_term[m * dim + n] = last;
            acc
        })?;
        Ok(Inversion { state, last_term })
    }
}

/// `ratio(n,d,j) * exp(half_power * log_eta) * base^j` with
/// `half_power = (2n+d)/2`, all in log-space.
fn coefficient<T: Real>(n: usize, d: usize, j: usize, log_eta: T, base: T) -> T {
    if j > 0 && base == T::zero() {
        return T::zero();
    }
    let half_power = T::lit((2 * n + d) as f64 * 0.5);
    let mut ln_mag = T::lit(ln_ray_ratio(n, d, j)) + half_power * log_eta;
    if j > 0 {
        ln_mag = ln_mag + T::from_index(j) * base.abs().ln();
    }
    let mag = ln_mag.exp();
    if j % 2 == 1 && base < T::zero() {
        -mag
    } else {
        mag
    }
}

/// `B_j(n, d, eta)` for any `eta > 0`; with `eta > 1` this is the inverse
/// map evaluated at `1/eta`.
pub fn forward_coefficient<T: Real>(n: usize, d: usize, j: usize, eta: T) -> Result<T> {
    if !(eta > T::zero()) || !eta.is_finite() {
        return Err(invalid(format!("efficiency must be positive, got {eta}")));
    }
    Ok(coefficient(n, d, j, eta.ln(), T::one() - eta))
}

/// `A_j(n, d, eta) = eta^{-(2n+d)/2} sqrt((n+j)!(n+d+j)!) / (sqrt(n!(n+d)!) j!) (1 - 1/eta)^j`.
pub fn inverse_coefficient<T: Real>(n: usize, d: usize, j: usize, eta: T) -> Result<T> {
    Ok(LossChannel::new(eta)?.inverse_coefficient(n, d, j))
}

pub fn apply_loss<T: Real>(rho_sig: &DensityMatrix<T>, eta: T) -> Result<DensityMatrix<T>> {
    LossChannel::new(eta)?.apply(rho_sig)
}

pub fn invert_loss<T: Real>(
    rho_meas: &DensityMatrix<T>,
    eta: T,
    j_max: usize,
) -> Result<Inversion<T>> {
    LossChannel::new(eta)?.invert(rho_meas, j_max)
}

/// Result of [`invert_loss`]: the reconstructed signal state and, for each
/// element, the modulus of the last series term that was added.
#[derive(Clone, Debug)]
pub struct Inversion<T> {
    pub state: DensityMatrix<T>,
    last_term: Vec<T>,
}

impl<T: Real> Inversion<T> {
    pub fn last_term(&self, n: usize, m: usize) -> T {
        let dim = self.state.dim();
        self.last_term[n * dim + m]
    }

    /// Largest last-term magnitude over the leading `dim x dim` block.
    pub fn max_last_term(&self, dim: usize) -> T {
        let full = self.state.dim();
        let dim = dim.min(full);
        let mut worst = T::zero();
        for n in 0..dim {
            for m in n..dim {
                worst = worst.max(self.last_term[n * full + m]);
            }
        }
        worst
    }
}

/// Minimum number of ray points the ratio test looks at.
const MIN_RATIO_WINDOW: usize = 4;

/// Geometric decay ratio of `|<n+j|rho|n+d+j>|` along the ray, from a ratio
/// test over the last quartile of available points (at least four).
///
/// The ray is read up to its last nonzero element.
pub fn decay_ratio<T: Real>(rho: &DensityMatrix<T>, n: usize, d: usize) -> Result<T> {
    let dim = rho.dim();
    if n + d >= dim {
        return Err(Error::UndefinedRatio(format!(
            "ray ({n}, {}) lies outside the {dim}-level truncation",
            n + d
        )));
    }
    let ray: Vec<T> = (0..dim - n - d).map(|j| rho.get(n + j, n + d + j).norm()).collect();
    let available = ray
        .iter()
        .rposition(|&v| v > T::zero())
        .map(|i| i + 1)
        .unwrap_or(0);
    let nonzero = ray[..available].iter().filter(|&&v| v > T::zero()).count();
    if nonzero < MIN_RATIO_WINDOW {
        return Err(Error::UndefinedRatio(format!(
            "ray ({n}, {}) has only {nonzero} nonzero elements",
            n + d
        )));
    }
    let window = (available / 4).max(MIN_RATIO_WINDOW);
    let start = available - window;
    let first = ray[start];
    let last = ray[available - 1];
    if first == T::zero() {
        return Err(Error::UndefinedRatio(format!(
            "ray ({n}, {}) has zeros inside the ratio window",
            n + d
        )));
    }
    Ok((last / first).powf(T::from_index(window - 1).recip()))
}

/// Smallest efficiency for which the exact series converges when the dressed
/// elements decay with ratio `r`: `|1 - 1/eta| r < 1`, i.e. `eta > r/(1+r)`.
pub fn analytic_threshold<T: Real>(r: T) -> Result<T> {
    if !(r >= T::zero()) {
        return Err(invalid(format!("decay ratio must be >= 0, got {r}")));
    }
    if r >= T::one() {
        return Err(Error::NoConvergence {
            ratio: r.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(r / (T::one() + r))
}

/// Two readings of the convergence threshold for a thermal signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdReadings<T> {
    /// Threshold from the signal's own decay ratio `nbar/(nbar+1)`.
    pub signal: T,
    /// Threshold from the measured decay ratio of the dressed state.
    pub dressed: T,
    /// Efficiency above which `eta` exceeds the dressed-state threshold it
    /// itself induces: `(nbar - 1) / (2 nbar)`, clamped at zero.
    pub self_consistent: T,
}

/// Computes both threshold readings for a thermal signal of mean `signal_mean`
/// whose dressed state is `rho_meas`. Pass the reporting block of the dressed
/// state; elements near a truncation edge do not decay geometrically.
pub fn threshold_readings<T: Real>(
    signal_mean: T,
    rho_meas: &DensityMatrix<T>,
    n: usize,
    d: usize,
) -> Result<ThresholdReadings<T>> {
    let signal = analytic_threshold(signal_mean / (T::one() + signal_mean))?;
    let dressed = analytic_threshold(decay_ratio(rho_meas, n, d)?)?;
    let self_consistent = if signal_mean > T::zero() {
        ((signal_mean - T::one()) / (T::lit(2.0) * signal_mean)).max(T::zero())
    } else {
        T::zero()
    };
    Ok(ThresholdReadings {
        signal,
        dressed,
        self_consistent,
    })
}
