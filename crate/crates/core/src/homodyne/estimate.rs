use num_complex::Complex64;

use crate::element::MeasuredElement;
use crate::error::{invalid, Error, Result};

use super::pattern::{Kernel, PatternFunctions};
use super::sampling::QuadratureSample;

/// Pattern-function estimate of `<n|rho|n+d>`:
/// the mean of `e^{i d phi_k} f_{n,n+d}(x_k)` over the samples.
///
/// The standard error is the sample standard deviation of the summands over
/// `sqrt(N)`; for `d > 0` the larger of the real- and imaginary-part errors
/// is reported.
pub fn estimate_element(
    samples: &[QuadratureSample],
    n: usize,
    d: usize,
    kernels: &PatternFunctions,
) -> Result<MeasuredElement<f64>> {
    if samples.len() < 2 {
        return Err(invalid(format!(
            "need at least two samples to estimate an element, got {}",
            samples.len()
        )));
    }
    let kernel = kernels.kernel(n, n + d)?;
    check_range(samples, kernels.x_max())?;
    Ok(estimate_with(samples, n, d, &kernel))
}

/// Estimates the ray `<n+j|rho|n+d+j>` for `j = 0..=j_max`.
pub fn estimate_ray(
    samples: &[QuadratureSample],
    n: usize,
    d: usize,
    j_max: usize,
    kernels: &PatternFunctions,
) -> Result<Vec<MeasuredElement<f64>>> {
    if samples.len() < 2 {
        return Err(invalid(format!(
            "need at least two samples to estimate an element, got {}",
            samples.len()
        )));
    }
    check_range(samples, kernels.x_max())?;
    (0..=j_max)
        .map(|j| {
            let kernel = kernels.kernel(n + j, n + d + j)?;
            Ok(estimate_with(samples, n + j, d, &kernel))
        })
        .collect()
}

fn check_range(samples: &[QuadratureSample], x_max: f64) -> Result<()> {
    match samples.iter().find(|s| !(s.x.abs() <= x_max)) {
        Some(s) => Err(Error::Extrapolation { x: s.x, limit: x_max }),
        None => Ok(()),
    }
}

fn estimate_with(
    samples: &[QuadratureSample],
    n: usize,
    d: usize,
    kernel: &Kernel,
) -> MeasuredElement<f64> {
    let count = samples.len() as f64;
    let summands: Vec<Complex64> = samples
        .iter()
        .map(|s| {
            let f = kernel.eval_unchecked(s.x);
            if d == 0 {
                Complex64::new(f, 0.0)
            } else {
                Complex64::from_polar(f, d as f64 * s.phi)
            }
        })
        .collect();
    let mean = summands.iter().sum::<Complex64>() / count;
    let (var_re, var_im) = summands.iter().fold((0.0, 0.0), |(re, im), s| {
        let dev = s - mean;
        (re + dev.re * dev.re, im + dev.im * dev.im)
    });
    let spread = if d == 0 {
        var_re
    } else {
        var_re.max(var_im)
    };
    let stderr = (spread / (count - 1.0)).sqrt() / count.sqrt();
    MeasuredElement {
        n,
        d,
        estimate: if d == 0 {
            Complex64::new(mean.re, 0.0)
        } else {
            mean
        },
        stderr,
        samples: samples.len(),
        degenerate: false,
    }
}

/// `eps_j sqrt(N)` for the elements `(n0 + j, n0 + d + j)`, `j` in `j_list`.
/// Homodyne errors saturate at `sqrt(2)` on this scale.
pub fn error_saturation_profile(
    samples: &[QuadratureSample],
    j_list: &[usize],
    n0: usize,
    d: usize,
    kernels: &PatternFunctions,
) -> Result<Vec<(usize, f64)>> {
    let root_n = (samples.len() as f64).sqrt();
    j_list
        .iter()
        .map(|&j| {
            let e = estimate_element(samples, n0 + j, d, kernels)?;
            Ok((j, e.stderr * root_n))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_fock, make_thermal};
    use crate::homodyne::sample_quadratures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn rejects_tiny_sample_sets() {
        let pf = PatternFunctions::new(4, 6.0).unwrap();
        assert!(matches!(estimate_element(&[], 0, 0, &pf), Err(Error::InvalidArgument(_))));
        let one = [QuadratureSample { x: 0.1, phi: 0.2 }];
        assert!(estimate_element(&one, 0, 0, &pf).is_err());
    }

    #[test]
    fn out_of_range_sample_is_an_error() {
        let pf = PatternFunctions::new(4, 3.0).unwrap();
        let s = [
            QuadratureSample { x: 0.1, phi: 0.2 },
            QuadratureSample { x: 3.5, phi: 0.2 },
        ];
        assert!(matches!(estimate_element(&s, 0, 0, &pf), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn vacuum_and_single_photon() {
        let pf = PatternFunctions::new(4, DEFAULT_RANGE).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let vac = sample_quadratures(&make_thermal(0.0, 8).unwrap(), 100_000, &mut rng).unwrap();
        let e = estimate_element(&vac, 0, 0, &pf).unwrap();
        assert!((e.estimate.re - 1.0).abs() < 3.0 * e.stderr, "{e:?}");
        assert_eq!(e.estimate.im, 0.0);

        let one = sample_quadratures(&make_fock(1, 4).unwrap(), 100_000, &mut rng).unwrap();
        let e = estimate_element(&one, 0, 0, &pf).unwrap();
        assert!(e.estimate.re.abs() < 3.0 * e.stderr, "{e:?}");
    }

    const DEFAULT_RANGE: f64 = crate::homodyne::DEFAULT_KERNEL_X_MAX;
}
