//! Direct photodetection of the dressed state's photon-number distribution.
//!
//! Photon counting only sees the diagonal, but its binomial error
//! `sqrt(p (1 - p) / N)` vanishes with `p`, unlike the homodyne error.

use num_complex::Complex64;
use rand::Rng;

use crate::element::MeasuredElement;
use crate::error::{invalid, Error, Result};
use crate::fock::DensityMatrix;

/// Photon-number counts from `shots` independent detections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountHistogram {
    counts: Vec<u64>,
    shots: u64,
}

impl CountHistogram {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let shots = counts.iter().sum();
        if shots == 0 {
            return Err(invalid("a histogram needs at least one shot"));
        }
        Ok(Self { counts, shots })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }
}

/// Draws `shots` photon numbers from the diagonal of `rho_meas`, one
/// categorical draw per shot.
pub fn sample_counts<R: Rng + ?Sized>(
    rho_meas: &DensityMatrix<f64>,
    shots: usize,
    rng: &mut R,
) -> Result<CountHistogram> {
    if shots == 0 {
        return Err(invalid("shot count must be at least 1"));
    }
    let p = rho_meas.diagonal();
    if let Some(n) = p.iter().position(|&v| v < -1e-12) {
        return Err(Error::NumericalSanity(format!(
            "negative photon-number probability at n = {n}"
        )));
    }
    let trace: f64 = p.iter().sum();
    let deficit = (1.0 - trace).abs();
    if deficit > rho_meas.tail_bound() + 1e-9 {
        return Err(Error::NumericalSanity(format!(
            "diagonal sums to {trace}, beyond the declared tail bound {}",
            rho_meas.tail_bound()
        )));
    }
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for v in &p {
        acc += v.max(0.0) / trace;
        cdf.push(acc);
    }
    let last_occupied = p.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    let mut counts = vec![0u64; p.len()];
    for _ in 0..shots {
        let u: f64 = rng.random();
        let n = cdf.partition_point(|&c| c <= u).min(last_occupied);
        counts[n] += 1;
    }
    CountHistogram::new(counts)
}

/// `p_j = counts_j / N` with binomial error `sqrt((1 - p_j) p_j / N)`.
/// Frequencies of exactly 0 or 1 get zero error and the degenerate flag.
pub fn estimate_probabilities(h: &CountHistogram) -> Vec<MeasuredElement<f64>> {
    let shots = h.shots as f64;
    h.counts
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let p = c as f64 / shots;
            MeasuredElement {
                n: j,
                d: 0,
                estimate: Complex64::new(p, 0.0),
                stderr: ((1.0 - p) * p / shots).sqrt(),
                samples: h.shots as usize,
                degenerate: c == 0 || c == h.shots,
            }
        })
        .collect()
}
