//! Pattern functions: bounded kernels whose phase-weighted average over
//! homodyne data is an unbiased estimate of a density-matrix element.
//!
//! In the standard coordinate `q`, for `m >= n`,
//!
//! ```text
//! f_nm(q) = d/dq [ psi_n(q) chi_m(q) ]
//! ```
//!
//! where `chi_m` is the irregular solution of the oscillator equation at
//! energy `m + 1/2`, with parity opposite to `psi_m`. `chi_m` is integrated
//! outward from the origin and scaled so that the Wronskian
//! `psi_m chi_m' - psi_m' chi_m` equals 2; with that scale
//! `int psi_k psi_{k+d} f_{n,n+d} dq = delta_{kn}`.
//!
//! Kernels are even or odd in `q` (parity `(-1)^(n+m)`), so only `q >= 0`
//! is tabulated. Values are interpolated with cubic Hermite splines using
//! exact slopes from the oscillator equation.

use std::f64::consts::SQRT_2;

use crate::error::{invalid, Error, Result};

use super::wavefunctions::hermite_functions;

/// Default half-width of the tabulated quadrature range.
pub const DEFAULT_KERNEL_X_MAX: f64 = 9.0;

const DEFAULT_STEP: f64 = 0.0025;
const RK_SUBSTEPS: usize = 4;
const WRONSKIAN: f64 = 2.0;
// chi_0 grows like exp(q^2/2); keep it far from overflow.
const MAX_Q: f64 = 36.0;

/// Tabulated regular and irregular oscillator solutions up to `max_index`.
///
/// Immutable once built and cheap to share between threads.
#[derive(Clone, Debug)]
pub struct PatternFunctions {
    max_index: usize,
    step: f64,
    x_max: f64,
    // [index][node], nodes at q = i * step
    psi: Vec<Vec<f64>>,
    dpsi: Vec<Vec<f64>>,
    chi: Vec<Vec<f64>>,
    dchi: Vec<Vec<f64>>,
}

impl PatternFunctions {
    pub fn new(max_index: usize, x_max: f64) -> Result<Self> {
        Self::with_step(max_index, x_max, DEFAULT_STEP)
    }

    /// As [`PatternFunctions::new`] with an explicit grid step in `q`.
    pub fn with_step(max_index: usize, x_max: f64, step: f64) -> Result<Self> {
        if !(x_max > 0.0) || SQRT_2 * x_max > MAX_Q {
            return Err(invalid(format!("kernel range x_max = {x_max} out of bounds")));
        }
        if !(step > 0.0 && step < 0.1) {
            return Err(invalid(format!("kernel grid step {step} out of bounds")));
        }
        let q_max = SQRT_2 * x_max;
        let nodes = (q_max / step).ceil() as usize + 1;

        let mut psi = vec![vec![0.0; nodes]; max_index + 2];
        for i in 0..nodes {
            let values = hermite_functions(i as f64 * step, max_index + 1);
            for (n, v) in values.into_iter().enumerate() {
                psi[n][i] = v;
            }
        }
        let dpsi: Vec<Vec<f64>> = (0..=max_index)
            .map(|n| {
                let up = (n + 1) as f64;
                (0..nodes)
                    .map(|i| {
                        let lower = if n > 0 { (n as f64).sqrt() * psi[n - 1][i] } else { 0.0 };
                        (lower - up.sqrt() * psi[n + 1][i]) / SQRT_2
                    })
                    .collect()
            })
            .collect();
        psi.truncate(max_index + 1);

        let mut chi = Vec::with_capacity(max_index + 1);
        let mut dchi = Vec::with_capacity(max_index + 1);
        for m in 0..=max_index {
            let (mut c, mut dc) = integrate_irregular(m, step, nodes);
            // Wronskian at the origin: even m starts (0, 1), odd m starts (1, 0)
            let w0 = psi[m][0] * dc[0] - dpsi[m][0] * c[0];
            if w0 == 0.0 || !w0.is_finite() {
                return Err(Error::NumericalSanity(format!(
                    "degenerate Wronskian for irregular solution {m}"
                )));
            }
            let scale = WRONSKIAN / w0;
            c.iter_mut().for_each(|v| *v *= scale);
            dc.iter_mut().for_each(|v| *v *= scale);
            chi.push(c);
            dchi.push(dc);
        }

        Ok(Self {
            max_index,
            step,
            x_max,
            psi,
            dpsi,
            chi,
            dchi,
        })
    }

    pub fn max_index(&self) -> usize {
        self.max_index
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Grid nodes in `q`, for diagnostics.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.psi[0].len()).map(move |i| i as f64 * self.step)
    }

    /// `(chi_m, chi_m')` on the grid nodes.
    pub fn irregular(&self, m: usize) -> (&[f64], &[f64]) {
        (&self.chi[m], &self.dchi[m])
    }

    /// `(psi_n, psi_n')` on the grid nodes.
    pub fn regular(&self, n: usize) -> (&[f64], &[f64]) {
        (&self.psi[n], &self.dpsi[n])
    }

    /// Interpolation table for `f_nm`, `n <= m <= max_index`.
    pub fn kernel(&self, n: usize, m: usize) -> Result<Kernel> {
        if n > m {
            return Err(invalid(format!("pattern function needs n <= m, got ({n}, {m})")));
        }
        if m > self.max_index {
            return Err(invalid(format!(
                "index {m} exceeds tabulated maximum {}",
                self.max_index
            )));
        }
        let (psi, dpsi) = (&self.psi[n], &self.dpsi[n]);
        let (chi, dchi) = (&self.chi[m], &self.dchi[m]);
        let en = (2 * n + 1) as f64;
        let em = (2 * m + 1) as f64;
        let mut value = Vec::with_capacity(psi.len());
        let mut slope = Vec::with_capacity(psi.len());
        for i in 0..psi.len() {
            let q = i as f64 * self.step;
            let d2psi = (q * q - en) * psi[i];
            let d2chi = (q * q - em) * chi[i];
            value.push(dpsi[i] * chi[i] + psi[i] * dchi[i]);
            slope.push(d2psi * chi[i] + 2.0 * dpsi[i] * dchi[i] + psi[i] * d2chi);
        }
        Ok(Kernel {
            n,
            m,
            step: self.step,
            x_max: self.x_max,
            odd: (n + m) % 2 == 1,
            value,
            slope,
        })
    }

    /// `f_nm(x)` in the quadrature convention of the crate.
    pub fn pattern_function(&self, n: usize, m: usize, x: f64) -> Result<f64> {
        self.kernel(n, m)?.eval(x)
    }
}

/// RK4 for `chi'' = (q^2 - (2m+1)) chi` from the origin, with the parity
/// opposite to `psi_m`.
fn integrate_irregular(m: usize, step: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let energy = (2 * m + 1) as f64;
    let (mut y, mut v) = if m.is_multiple_of(2) { (0.0, 1.0) } else { (1.0, 0.0) };
    let mut chi = Vec::with_capacity(nodes);
    let mut dchi = Vec::with_capacity(nodes);
    chi.push(y);
    dchi.push(v);
    let h = step / RK_SUBSTEPS as f64;
    let accel = |q: f64, y: f64| (q * q - energy) * y;
    for i in 1..nodes {
        let base = (i - 1) as f64 * step;
        for s in 0..RK_SUBSTEPS {
            let q = base + s as f64 * h;
            let k1y = v;
            let k1v = accel(q, y);
            let k2y = v + 0.5 * h * k1v;
            let k2v = accel(q + 0.5 * h, y + 0.5 * h * k1y);
            let k3y = v + 0.5 * h * k2v;
            let k3v = accel(q + 0.5 * h, y + 0.5 * h * k2y);
            let k4y = v + h * k3v;
            let k4v = accel(q + h, y + h * k3y);
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        chi.push(y);
        dchi.push(v);
    }
    (chi, dchi)
}

/// One tabulated pattern function `f_nm`.
#[derive(Clone, Debug)]
pub struct Kernel {
    n: usize,
    m: usize,
    step: f64,
    x_max: f64,
    odd: bool,
    value: Vec<f64>,
    slope: Vec<f64>,
}

impl Kernel {
    pub fn indices(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    /// `f_nm(x)`; errors outside the tabulated range.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x.abs() <= self.x_max) {
            return Err(Error::Extrapolation {
                x,
                limit: self.x_max,
            });
        }
        Ok(self.eval_unchecked(x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        let q = SQRT_2 * x.abs();
        let pos = q / self.step;
        let i = (pos as usize).min(self.value.len() - 2);
        let t = pos - i as f64;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * self.value[i]
            + h10 * self.step * self.slope[i]
            + h01 * self.value[i + 1]
            + h11 * self.step * self.slope[i + 1];
        if self.odd && x < 0.0 {
            -v
        } else {
            v
        }
    }

    /// Largest tabulated `|f_nm|`.
    pub fn max_abs(&self) -> f64 {
        self.value.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}
