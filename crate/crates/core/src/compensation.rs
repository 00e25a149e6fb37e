//! The truncated compensation series evaluated with measured coefficients.
//!
//! For a target `<n|rho_sig|n+d>` and coefficients `c_j = <n+j|rho_meas|n+d+j>`
//! with errors `eps_j`,
//!
//! ```text
//! value(j_M) = sum_{j<=j_M} A_j(n,d,eta) c_j
//! error(j_M) = sqrt(sum_{j<=j_M} A_j^2 eps_j^2)
//! ```
//!
//! The error formula treats the coefficients as uncorrelated. Coefficients
//! estimated from one homodyne data set are not, so the cross-trial spread
//! is reported next to it by the experiment drivers.

use num_complex::Complex;

use crate::direct::{estimate_probabilities, CountHistogram};
use crate::element::MeasuredElement;
use crate::error::{invalid, Error, Result};
use crate::fock::DensityMatrix;
use crate::homodyne::{estimate_ray, PatternFunctions, QuadratureSample};
use crate::loss::LossChannel;
use crate::scalar::Real;

/// Regime of a convergence scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Converged,
    Marginal,
    Diverging,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Marginal => "marginal",
            Verdict::Diverging => "diverging",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint<T> {
    pub j_max: usize,
    pub value: Complex<T>,
    pub propagated_error: T,
}

/// Series values versus truncation index for one target element.
///
/// `trace` is ordered by `j_max` and its errors never decrease.
#[derive(Clone, Debug, PartialEq)]
pub struct CompensationResult<T> {
    pub n: usize,
    pub d: usize,
    pub eta: T,
    pub trace: Vec<TracePoint<T>>,
    pub verdict: Verdict,
}

impl<T: Real> CompensationResult<T> {
    pub fn last(&self) -> &TracePoint<T> {
        self.trace.last().expect("a scan has at least one point")
    }

    pub fn at(&self, j_max: usize) -> Option<&TracePoint<T>> {
        self.trace.iter().find(|p| p.j_max == j_max)
    }

    /// Largest `|value|` anywhere in the scan.
    pub fn max_abs_value(&self) -> T {
        self.trace.iter().fold(T::zero(), |acc, p| acc.max(p.value.norm()))
    }
}

/// Evaluates the series at `j_max` from coefficients ordered by `j`.
///
/// `coeffs[j]` must be the element `(n + j, d)`.
pub fn compensated_element<T: Real>(
    coeffs: &[MeasuredElement<T>],
    n: usize,
    d: usize,
    eta: T,
    j_max: usize,
) -> Result<(Complex<T>, T)> {
    let scan = scan_coefficients(coeffs, n, d, eta, &[j_max])?;
    let p = scan.last();
    Ok((p.value, p.propagated_error))
}

/// Evaluates the series at every `j_max` in the strictly ascending
/// `j_list` and classifies the result.
pub fn scan_coefficients<T: Real>(
    coeffs: &[MeasuredElement<T>],
    n: usize,
    d: usize,
    eta: T,
    j_list: &[usize],
) -> Result<CompensationResult<T>> {
    check_j_list(j_list)?;
    let channel = LossChannel::new(eta)?;
    let top = *j_list.last().expect("checked non-empty");
    let mut trace = Vec::with_capacity(j_list.len());
    let mut value = Complex::new(T::zero(), T::zero());
    let mut variance = CompensatedSum::default();
    let mut next = j_list.iter().peekable();
    for j in 0..=top {
        let c = coeffs
            .get(j)
            .filter(|c| c.n == n + j && c.d == d)
            .ok_or_else(|| invalid(format!("missing coefficient for ({}, {})", n + j, n + d + j)))?;
        let a = channel.inverse_coefficient(n, d, j);
        value = value + c.estimate * a;
        variance.add((a * c.stderr).powi(2));
        if next.peek() == Some(&&j) {
            next.next();
            trace.push(TracePoint {
                j_max: j,
                value: residue_checked(value, d)?,
                propagated_error: variance.total().sqrt(),
            });
        }
    }
    let verdict = classify(&trace);
    Ok(CompensationResult {
        n,
        d,
        eta,
        trace,
        verdict,
    })
}

/// Neumaier summation; the error series runs to 10^4 terms.
#[derive(Default)]
struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry = self.carry + ((self.sum - t) + v);
        } else {
            self.carry = self.carry + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    fn total(&self) -> T {
        self.sum + self.carry
    }
}

fn check_j_list(j_list: &[usize]) -> Result<()> {
    if j_list.is_empty() {
        return Err(invalid("truncation list is empty"));
    }
    if j_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("truncation list must be strictly ascending"));
    }
    Ok(())
}

/// Diagonal targets are real; an imaginary residue means a phase bug.
fn residue_checked<T: Real>(value: Complex<T>, d: usize) -> Result<Complex<T>> {
    if d != 0 {
        return Ok(value);
    }
    if value.im.abs() < T::lit(1e-9) * value.re.abs() + T::lit(1e-12) {
        Ok(Complex::new(value.re, T::zero()))
    } else {
        Err(Error::NumericalSanity(format!(
            "diagonal element has imaginary residue {}",
            value.im
        )))
    }
}

/// Converged when the last three values agree within twice the final error
/// and the error moved by less than 10% over them; diverging when the error
/// grew more than threefold over the scan; marginal otherwise.
pub fn classify<T: Real>(trace: &[TracePoint<T>]) -> Verdict {
    if trace.len() < 3 {
        return Verdict::Marginal;
    }
    let tail = &trace[trace.len() - 3..];
    let last = tail[2];
    let spread = tail
        .iter()
        .flat_map(|a| tail.iter().map(move |b| (a.value - b.value).norm()))
        .fold(T::zero(), T::max);
    let allowed = T::lit(2.0) * last.propagated_error
        + T::lit(1e-9) * (T::one() + last.value.norm());
    let err_change = last.propagated_error - tail[0].propagated_error;
    let stable = if last.propagated_error > T::zero() {
        err_change.abs() < T::lit(0.1) * last.propagated_error
    } else {
        err_change == T::zero()
    };
    if spread < allowed && stable {
        return Verdict::Converged;
    }
    let first = trace[0].propagated_error;
    let growing = if first > T::zero() {
        last.propagated_error > T::lit(3.0) * first
    } else {
        last.propagated_error > T::zero()
    };
    if growing {
        Verdict::Diverging
    } else {
        Verdict::Marginal
    }
}

/// `j_max + 1` zero-valued coefficients along the ray of `(n, d)`, all with
/// error `eps`. Feeding these to the scan isolates the error series.
pub fn pinned_coefficients<T: Real>(
    n: usize,
    d: usize,
    j_max: usize,
    eps: T,
) -> Vec<MeasuredElement<T>> {
    (0..=j_max)
        .map(|j| MeasuredElement {
            n: n + j,
            d,
            estimate: Complex::new(T::zero(), T::zero()),
            stderr: eps,
            samples: 0,
            degenerate: false,
        })
        .collect()
}

/// Propagated error per `(eta, j_max)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorGridPoint<T> {
    pub eta: T,
    pub j_max: usize,
    pub propagated_error: T,
}

/// Propagated error on the full `eta_list x j_list` grid. `coeffs_for(eta,
/// j_top)` supplies the measured ray up to `j_top` at each efficiency.
pub fn error_vs_eta<T, F>(
    n: usize,
    d: usize,
    eta_list: &[T],
    j_list: &[usize],
    mut coeffs_for: F,
) -> Result<Vec<ErrorGridPoint<T>>>
where
    T: Real,
    F: FnMut(T, usize) -> Result<Vec<MeasuredElement<T>>>,
{
    check_j_list(j_list)?;
    let top = *j_list.last().expect("checked non-empty");
    let mut grid = Vec::with_capacity(eta_list.len() * j_list.len());
    for &eta in eta_list {
        let coeffs = coeffs_for(eta, top)?;
        let scan = scan_coefficients(&coeffs, n, d, eta, j_list)?;
        grid.extend(scan.trace.iter().map(|p| ErrorGridPoint {
            eta,
            j_max: p.j_max,
            propagated_error: p.propagated_error,
        }));
    }
    Ok(grid)
}

/// Where the coefficients of a scan come from.
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    Homodyne {
        samples: &'a [QuadratureSample],
        kernels: &'a PatternFunctions,
    },
    /// Photon counting; only diagonal rays are measurable.
    Direct(&'a CountHistogram),
    /// Noiseless elements of a known dressed state.
    Exact(&'a DensityMatrix<f64>),
}

impl Source<'_> {
    /// Measured ray `(n + j, d)` for `j = 0..=j_max`.
    pub fn ray(&self, n: usize, d: usize, j_max: usize) -> Result<Vec<MeasuredElement<f64>>> {
        match *self {
            Source::Homodyne { samples, kernels } => estimate_ray(samples, n, d, j_max, kernels),
            Source::Direct(hist) => {
                if d != 0 {
                    return Err(invalid("photon counting only measures diagonal elements"));
                }
                let probs = estimate_probabilities(hist);
                Ok((n..=n + j_max)
                    .map(|k| {
                        probs.get(k).copied().unwrap_or(MeasuredElement {
                            n: k,
                            d: 0,
                            estimate: Complex::new(0.0, 0.0),
                            stderr: 0.0,
                            samples: hist.shots() as usize,
                            degenerate: true,
                        })
                    })
                    .collect())
            }
            Source::Exact(rho) => Ok((0..=j_max)
                .map(|j| MeasuredElement::exact(n + j, d, rho.get(n + j, n + d + j)))
                .collect()),
        }
    }
}

/// Scans the series for `(n, d)` at efficiency `eta` over `j_list`.
pub fn convergence_scan(
    source: &Source<'_>,
    n: usize,
    d: usize,
    eta: f64,
    j_list: &[usize],
) -> Result<CompensationResult<f64>> {
    check_j_list(j_list)?;
    let coeffs = source.ray(n, d, *j_list.last().expect("checked non-empty"))?;
    scan_coefficients(&coeffs, n, d, eta, j_list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_thermal, working_dim};
    use crate::loss::{apply_loss, invert_loss};

    fn point(j: usize, v: f64, e: f64) -> TracePoint<f64> {
        TracePoint {
            j_max: j,
            value: Complex::new(v, 0.0),
            propagated_error: e,
        }
    }

    #[test]
    fn single_term() {
        let eta = 0.6f64;
        let c = [MeasuredElement {
            n: 2,
            d: 0,
            estimate: Complex::new(0.05, 0.0),
            stderr: 0.01,
            samples: 10,
            degenerate: false,
        }];
        let (v, e) = compensated_element(&c, 2, 0, eta, 0).unwrap();
        let scale = eta.powf(-2.0);
        assert!((v.re - 0.05 * scale).abs() < 1e-15);
        assert!((e - 0.01 * scale).abs() < 1e-15);
    }

    #[test]
    fn missing_coefficient_is_invalid() {
        let c = pinned_coefficients(0, 0, 3, 0.1f64);
        assert!(matches!(
            compensated_element(&c, 0, 0, 0.7, 4),
            Err(Error::InvalidArgument(_))
        ));
        assert!(compensated_element(&c, 1, 0, 0.7, 2).is_err());
        assert!(scan_coefficients(&c, 0, 0, 0.7, &[2, 1]).is_err());
        assert!(scan_coefficients(&c, 0, 0, 0.7, &[]).is_err());
    }

    #[test]
    fn error_identity_at_half() {
        let eps = 0.0123;
        let c = pinned_coefficients(0, 0, 50, eps);
        for j in [0, 1, 9, 50] {
            let (_, e) = compensated_element(&c, 0, 0, 0.5, j).unwrap();
            let expected = eps * ((j + 1) as f64).sqrt();
            assert!((e - expected).abs() <= 4.0 * f64::EPSILON * expected);
        }
    }

    #[test]
    fn exact_coefficients_match_inversion() {
        let d_work = working_dim(10, 40);
        let rho_meas = apply_loss(&make_thermal(2.0, d_work).unwrap(), 0.6).unwrap();
        let inv = invert_loss(&rho_meas, 0.6, 40).unwrap();
        let source = Source::Exact(&rho_meas);
        for n in 0..4 {
            let scan = convergence_scan(&source, n, 0, 0.6, &[10, 20, 40]).unwrap();
            assert!((scan.last().value.re - inv.state.get(n, n).re).abs() < 1e-10);
        }
        let scan = convergence_scan(&source, 2, 0, 0.6, &[38, 39, 40]).unwrap();
        assert!((scan.last().value.re - 4.0 / 27.0).abs() < 1e-6);
        assert_eq!(scan.verdict, Verdict::Converged);
    }

    #[test]
    fn error_grid_transition() {
        let eps = (2.0f64 / 8000.0).sqrt();
        let grid = error_vs_eta(0, 0, &[0.7, 0.5, 0.4], &[10, 20, 100], |_, top| {
            Ok(pinned_coefficients(0, 0, top, eps))
        })
        .unwrap();
        let err = |eta: f64, j: usize| {
            grid.iter()
                .find(|p| p.eta == eta && p.j_max == j)
                .unwrap()
                .propagated_error
        };
        assert!((err(0.7, 100) / err(0.7, 10) - 1.0).abs() < 0.05);
        assert!((err(0.5, 100) / err(0.5, 10) - (101.0f64 / 11.0).sqrt()).abs() < 1e-12);
        assert!(err(0.4, 100) / err(0.4, 10) > 10.0);
    }

    #[test]
    fn errors_never_decrease() {
        let c = pinned_coefficients(3, 1, 30, 0.02f64);
        for eta in [0.9, 0.6, 0.5, 0.3] {
            let scan = scan_coefficients(&c, 3, 1, eta, &(0..=30).collect::<Vec<_>>()).unwrap();
            assert!(scan.trace.windows(2).all(|w| w[1].propagated_error >= w[0].propagated_error));
        }
    }

    #[test]
    fn verdict_rules() {
        let flat = [point(1, 0.2, 0.01), point(2, 0.21, 0.0101), point(3, 0.205, 0.0102)];
        assert_eq!(classify(&flat), Verdict::Converged);
        let blowup = [point(1, 0.2, 0.01), point(2, -3.0, 0.1), point(3, 9.0, 0.5)];
        assert_eq!(classify(&blowup), Verdict::Diverging);
        let drifting = [point(1, 0.2, 0.01), point(2, 0.5, 0.012), point(3, 0.9, 0.013)];
        assert_eq!(classify(&drifting), Verdict::Marginal);
        assert_eq!(classify(&flat[..2]), Verdict::Marginal);
    }

    #[test]
    fn imaginary_residue_on_diagonal_is_caught() {
        let mut c = pinned_coefficients(0, 0, 2, 0.0f64);
        c[1].estimate = Complex::new(0.1, 0.01);
        assert!(matches!(
            compensated_element(&c, 0, 0, 0.8, 2),
            Err(Error::NumericalSanity(_))
        ));
    }

    #[test]
    fn direct_source_pads_unobserved_levels() {
        let h = CountHistogram::new(vec![5, 3, 2]).unwrap();
        let ray = Source::Direct(&h).ray(1, 0, 4).unwrap();
        assert_eq!(ray.len(), 5);
        assert_eq!(ray[4].n, 5);
        assert!(ray[4].degenerate && ray[4].stderr == 0.0);
        assert!(Source::Direct(&h).ray(0, 1, 2).is_err());
    }
}
