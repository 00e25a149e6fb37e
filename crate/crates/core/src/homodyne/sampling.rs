use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::fock::DensityMatrix;

use super::wavefunctions::quadrature_wavefunctions;

/// One homodyne datum: quadrature outcome `x` at local-oscillator phase
/// `phi` in `[0, pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSample {
    pub x: f64,
    pub phi: f64,
}

/// Outcome density `p(x; phi)` of the phase-`phi` quadrature.
pub fn quadrature_pdf(rho: &DensityMatrix<f64>, phi: f64, x: f64) -> f64 {
    let dim = rho.dim();
    let psi = quadrature_wavefunctions(x, dim - 1);
    let mut p = 0.0;
    for n in 0..dim {
        p += rho.get(n, n).re * psi[n] * psi[n];
        for m in n + 1..dim {
            let phase = Complex64::from_polar(1.0, (n as f64 - m as f64) * phi);
            p += 2.0 * (rho.get(n, m) * phase).re * psi[n] * psi[m];
        }
    }
    p
}

// Trace deficit beyond which the truncation is considered broken.
const TRACE_TOLERANCE: f64 = 1e-6;
// Grid mass deficit beyond which a tabulated density is rejected.
const MASS_TOLERANCE: f64 = 1e-6;
const MAX_GRID_STEP: f64 = 0.01;

/// Draws i.i.d. homodyne samples from a fixed state.
///
/// Thermal states (including vacuum) are Gaussian in every quadrature and
/// are drawn exactly. Other phase-invariant states are drawn as a photon
/// number followed by a quadrature from `psi_n^2`. Anything else goes
/// through the eigen-decomposition of `rho`: pick a component, then invert
/// the cumulative distribution of `p(x; phi)` on a grid adapted to the
/// highest occupied Fock level.
#[derive(Clone, Debug)]
pub struct QuadratureSampler {
    strategy: Strategy,
}

#[derive(Clone, Debug)]
enum Strategy {
    Gaussian { sigma: f64 },
    FockMixture(FockMixture),
    Spectral(Spectral),
}

impl QuadratureSampler {
    pub fn new(rho: &DensityMatrix<f64>) -> Result<Self> {
        let trace = rho.trace();
        if !((trace - 1.0).abs() <= TRACE_TOLERANCE) {
            return Err(Error::NumericalSanity(format!(
                "state trace {trace} is not normalizable; increase the truncation"
            )));
        }
        let strategy = if let Some(mean) = thermal_mean(rho) {
            Strategy::Gaussian {
                sigma: ((2.0 * mean + 1.0) / 4.0).sqrt(),
            }
        } else if rho.is_diagonal(1e-14) {
            Strategy::FockMixture(FockMixture::new(rho)?)
        } else {
            Strategy::Spectral(Spectral::new(rho)?)
        };
        Ok(Self { strategy })
    }

    /// True when the exact Gaussian path is in use.
    pub fn is_gaussian(&self) -> bool {
        matches!(self.strategy, Strategy::Gaussian { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<QuadratureSample> {
        let mut out = Vec::with_capacity(n);
        let mut scratch = Vec::new();
        for _ in 0..n {
            let phi = rng.random::<f64>() * PI;
            let x = match &self.strategy {
                Strategy::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
                Strategy::FockMixture(m) => m.draw(rng),
                Strategy::Spectral(s) => s.draw(phi, rng, &mut scratch),
            };
            out.push(QuadratureSample { x, phi });
        }
        out
    }
}

/// `n` homodyne samples of `rho` with uniformly random phases.
pub fn sample_quadratures<R: Rng + ?Sized>(
    rho: &DensityMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<QuadratureSample>> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    Ok(QuadratureSampler::new(rho)?.sample(n, rng))
}

/// Mean photon number if `rho` is diagonal with geometric weights.
fn thermal_mean(rho: &DensityMatrix<f64>) -> Option<f64> {
    if !rho.is_diagonal(1e-14) {
        return None;
    }
    let p = rho.diagonal();
    let p0 = p[0];
    if !(p0 > 0.0) {
        return None;
    }
    let r = if p.len() > 1 { p[1] / p0 } else { 0.0 };
    if !(0.0..1.0).contains(&r) || (p0 - (1.0 - r)).abs() > 1e-9 {
        return None;
    }
    let mut expected = p0;
    for &pn in &p {
        if (pn - expected).abs() > 1e-9 * p0 {
            return None;
        }
        expected *= r;
    }
    Some(r / (1.0 - r))
}

/// Uniform grid wide enough for Fock levels up to `n_top`, fine enough to
/// resolve the oscillations of `psi_{n_top}^2`.
#[derive(Clone, Debug)]
struct Grid {
    x0: f64,
    step: f64,
    len: usize,
}

impl Grid {
    fn for_level(n_top: usize) -> Self {
        let k = ((2 * n_top + 1) as f64).sqrt();
        let half_width = k / std::f64::consts::SQRT_2 + 4.5;
        let step = (PI / (std::f64::consts::SQRT_2 * k * 16.0)).min(MAX_GRID_STEP);
        let len = (2.0 * half_width / step).ceil() as usize + 1;
        Self {
            x0: -half_width,
            step,
            len,
        }
    }

    fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.step
    }

    /// Basis table `psi_n(x_i)` laid out `[i * width + n]`.
    fn basis(&self, width: usize) -> Vec<f64> {
        let mut table = Vec::with_capacity(self.len * width);
        for i in 0..self.len {
            table.extend(quadrature_wavefunctions(self.x(i), width - 1));
        }
        table
    }
}

/// Cumulative trapezoid of a nonnegative piecewise-linear density.
fn cumulative(pdf: &[f64], step: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(0.0);
    let mut acc = 0.0;
    for w in pdf.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * step;
        out.push(acc);
    }
}

/// Inverts the cumulative distribution of a piecewise-linear density at
/// `u * total`, solving the quadratic inside the cell exactly.
fn invert_piecewise_linear(grid: &Grid, pdf: &[f64], cdf: &[f64], u: f64) -> f64 {
    let total = *cdf.last().unwrap_or(&0.0);
    let target = u * total;
    let i = cdf.partition_point(|&c| c <= target).clamp(1, cdf.len() - 1) - 1;
    let a = pdf[i];
    let b = pdf[i + 1];
    let rem = (target - cdf[i]).max(0.0);
    let slope = (b - a) / grid.step;
    let disc = (a * a + 2.0 * slope * rem).max(0.0);
    let denom = a + disc.sqrt();
    let s = if denom > 0.0 { 2.0 * rem / denom } else { 0.0 };
    grid.x(i) + s.clamp(0.0, grid.step)
}

#[derive(Clone, Debug)]
struct Table {
    pdf: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Clone, Debug)]
struct FockMixture {
    photon_cdf: Vec<f64>,
    grid: Grid,
    tables: Vec<Option<Table>>,
}

impl FockMixture {
    fn new(rho: &DensityMatrix<f64>) -> Result<Self> {
        let p = rho.diagonal();
        if let Some(bad) = p.iter().position(|&v| v < -1e-12) {
            return Err(Error::NumericalSanity(format!(
                "negative photon-number probability at n = {bad}"
            )));
        }
        let trace: f64 = p.iter().map(|v| v.max(0.0)).sum();
        let n_top = p.iter().rposition(|&v| v > 0.0).unwrap_or(0);
        let grid = Grid::for_level(n_top);
        let width = n_top + 1;
        let basis = grid.basis(width);
        let mut photon_cdf = Vec::with_capacity(width);
        let mut acc = 0.0;
        let mut tables = Vec::with_capacity(width);
        for (n, &pn) in p.iter().take(width).enumerate() {
            acc += pn.max(0.0) / trace;
            photon_cdf.push(acc);
            if pn > 0.0 {
                let pdf: Vec<f64> = (0..grid.len).map(|i| basis[i * width + n].powi(2)).collect();
                let mut cdf = Vec::new();
                cumulative(&pdf, grid.step, &mut cdf);
                let mass = *cdf.last().unwrap();
                if (mass - 1.0).abs() > MASS_TOLERANCE {
                    return Err(Error::NumericalSanity(format!(
                        "tabulated |psi_{n}|^2 has mass {mass}"
                    )));
                }
                tables.push(Some(Table { pdf, cdf }));
            } else {
                tables.push(None);
            }
        }
        Ok(Self {
            photon_cdf,
            grid,
            tables,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut n = self.photon_cdf.partition_point(|&c| c <= u);
        // guard against rounding in the last cumulative value
        n = n.min(self.photon_cdf.len() - 1);
        while self.tables[n].is_none() {
            n -= 1;
        }
        let table = self.tables[n].as_ref().unwrap();
        invert_piecewise_linear(&self.grid, &table.pdf, &table.cdf, rng.random())
    }
}

#[derive(Clone, Debug)]
struct Spectral {
    weight_cdf: Vec<f64>,
    components: Vec<Vec<Complex64>>,
    width: usize,
    grid: Grid,
    basis: Vec<f64>,
}

impl Spectral {
    fn new(rho: &DensityMatrix<f64>) -> Result<Self> {
        let dim = rho.dim();
        let matrix = DMatrix::from_fn(dim, dim, |r, c| rho.get(r, c));
        let eig = matrix.symmetric_eigen();
        let trace = rho.trace();
        let mut weights = Vec::new();
        let mut components = Vec::new();
        let mut width = 1;
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda < -1e-8 {
                return Err(Error::NumericalSanity(format!(
                    "density matrix has eigenvalue {lambda}"
                )));
            }
            if lambda <= 1e-12 * trace {
                continue;
            }
            let v: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
            let top = v.iter().rposition(|c| c.norm() > 1e-13).unwrap_or(0);
            width = width.max(top + 1);
            weights.push(lambda);
            components.push(v);
        }
        if components.is_empty() {
            return Err(Error::NumericalSanity("density matrix has no positive weight".into()));
        }
        for v in &mut components {
            v.truncate(width);
        }
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let weight_cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        let grid = Grid::for_level(width - 1);
        let basis = grid.basis(width);
        let spectral = Self {
            weight_cdf,
            components,
            width,
            grid,
            basis,
        };
        let mut pdf = Vec::new();
        let mut cdf = Vec::new();
        for k in 0..spectral.components.len() {
            spectral.component_pdf(k, 0.0, &mut pdf);
            cumulative(&pdf, spectral.grid.step, &mut cdf);
            let mass = *cdf.last().unwrap();
            let norm: f64 = spectral.components[k].iter().map(|c| c.norm_sqr()).sum();
            if (mass - norm).abs() > MASS_TOLERANCE {
                return Err(Error::NumericalSanity(format!(
                    "quadrature density of component {k} has mass {mass}, expected {norm}"
                )));
            }
        }
        Ok(spectral)
    }

    fn component_pdf(&self, k: usize, phi: f64, pdf: &mut Vec<f64>) {
        let v = &self.components[k];
        let rotated: Vec<Complex64> = v
            .iter()
            .enumerate()
            .map(|(n, c)| c * Complex64::from_polar(1.0, n as f64 * phi))
            .collect();
        pdf.clear();
        for i in 0..self.grid.len {
            let row = &self.basis[i * self.width..(i + 1) * self.width];
            let amp = rotated
                .iter()
                .zip(row)
                .fold(Complex64::new(0.0, 0.0), |acc, (c, &psi)| acc + c * psi);
            pdf.push(amp.norm_sqr());
        }
    }

    fn draw<R: Rng + ?Sized>(&self, phi: f64, rng: &mut R, scratch: &mut Vec<f64>) -> f64 {
        let u: f64 = rng.random();
        let k = self
            .weight_cdf
            .partition_point(|&c| c <= u)
            .min(self.components.len() - 1);
        let mut pdf = std::mem::take(scratch);
        self.component_pdf(k, phi, &mut pdf);
        let mut cdf = Vec::with_capacity(pdf.len());
        cumulative(&pdf, self.grid.step, &mut cdf);
        let x = invert_piecewise_linear(&self.grid, &pdf, &cdf, rng.random());
        *scratch = pdf;
        x
    }
}

/// Writes one `x<TAB>phi` record per sample, 12 significant digits.
pub fn write_samples<W: Write>(mut out: W, samples: &[QuadratureSample]) -> Result<()> {
    for s in samples {
        writeln!(out, "{:.11e}\t{:.11e}", s.x, s.phi)?;
    }
    Ok(())
}

/// Reads the format produced by [`write_samples`].
pub fn read_samples<R: BufRead>(input: R) -> Result<Vec<QuadratureSample>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (x, phi) = line.split_once('\t').ok_or_else(|| Error::Config {
            line: i + 1,
            message: "expected x<TAB>phi".into(),
        })?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::Config {
                line: i + 1,
                message: format!("bad number '{s}'"),
            })
        };
        out.push(QuadratureSample {
            x: parse(x)?,
            phi: parse(phi)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_coherent, make_fock, make_thermal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        // composite Simpson
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(lo + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn pdf_closed_forms() {
        let vac = make_thermal(0.0, 4).unwrap();
        assert!((quadrature_pdf(&vac, 0.3, 0.0) - (2.0 / PI).sqrt()).abs() < 1e-14);
        let th = make_thermal(2.0, 80).unwrap();
        let expected = 1.0 / (2.0 * PI * 1.25f64).sqrt();
        assert!((quadrature_pdf(&th, 1.1, 0.0) - expected).abs() < 1e-10);
        let one = make_fock(1, 3).unwrap();
        for phi in [0.0, 0.5, 2.0] {
            assert_eq!(quadrature_pdf(&one, phi, 0.0), 0.0);
        }
    }

    #[test]
    fn thermal_variance_by_numerical_moments() {
        let th = make_thermal(2.0, 80).unwrap();
        let var = integrate(|x| x * x * quadrature_pdf(&th, 0.4, x), -12.0, 12.0, 4000);
        assert!((var - 1.25).abs() < 1e-8);
    }

    #[test]
    fn pdf_normalised_at_eight_phases() {
        let coh = make_coherent(Complex64::new(1.0, 0.6), 24).unwrap();
        for k in 0..8 {
            let phi = k as f64 * PI / 8.0;
            let mass = integrate(|x| quadrature_pdf(&coh, phi, x), -10.0, 10.0, 4000);
            assert!((mass - coh.trace()).abs() < 1e-8, "phi {phi}: {mass}");
            for i in 0..200 {
                let x = -5.0 + 0.05 * i as f64;
                assert!(quadrature_pdf(&coh, phi, x) > -1e-10);
            }
        }
    }

    #[test]
    fn coherent_mean_follows_phase() {
        // <x_phi> = Re(alpha e^{i phi})
        let alpha = Complex64::new(1.0, 0.6);
        let coh = make_coherent(alpha, 24).unwrap();
        for phi in [0.0, 0.9, 2.2] {
            let mean = integrate(|x| x * quadrature_pdf(&coh, phi, x), -10.0, 10.0, 4000);
            let expected = (alpha * Complex64::from_polar(1.0, phi)).re;
            assert!((mean - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn strategies_selected() {
        assert!(QuadratureSampler::new(&make_thermal(1.2, 64).unwrap()).unwrap().is_gaussian());
        assert!(!QuadratureSampler::new(&make_fock(2, 6).unwrap()).unwrap().is_gaussian());
        let bad = make_thermal(2.0, 5).unwrap();
        assert!(matches!(QuadratureSampler::new(&bad), Err(Error::NumericalSanity(_))));
    }

    #[test]
    fn thermal_sample_moments() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let s = sample_quadratures(&make_thermal(2.0, 64).unwrap(), 100_000, &mut rng).unwrap();
        let n = s.len() as f64;
        let mean = s.iter().map(|q| q.x).sum::<f64>() / n;
        let var = s.iter().map(|q| (q.x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.25).abs() < 0.02, "{var}");
        assert!(s.iter().all(|q| (0.0..PI).contains(&q.phi)));
    }

    #[test]
    fn vacuum_sample_mean() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let s = sample_quadratures(&make_thermal(0.0, 8).unwrap(), 100_000, &mut rng).unwrap();
        let mean = s.iter().map(|q| q.x).sum::<f64>() / s.len() as f64;
        assert!(mean.abs() < 0.003, "{mean}");
    }

    #[test]
    fn fock_samples_match_second_moment() {
        // <x^2> = (2n + 1) / 4 for |n>
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let s = sample_quadratures(&make_fock(3, 6).unwrap(), 100_000, &mut rng).unwrap();
        let m2 = s.iter().map(|q| q.x * q.x).sum::<f64>() / s.len() as f64;
        // var(x^2) for |3> is O(1); 4 sigma is about 0.02
        assert!((m2 - 1.75).abs() < 0.02, "{m2}");
    }

    #[test]
    fn coherent_samples_follow_phase() {
        let alpha = Complex64::new(1.0, 0.0);
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let s = sample_quadratures(&make_coherent(alpha, 24).unwrap(), 40_000, &mut rng).unwrap();
        // x - cos(phi) is N(0, 1/4) for every phase
        let resid: Vec<f64> = s.iter().map(|q| q.x - q.phi.cos()).collect();
        let n = resid.len() as f64;
        let mean = resid.iter().sum::<f64>() / n;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 * (0.25 / n).sqrt(), "{mean}");
        assert!((var - 0.25).abs() < 0.01, "{var}");
    }

    #[test]
    fn deterministic_given_seed() {
        let rho = make_coherent(Complex64::new(0.5, 0.5), 16).unwrap();
        let a = sample_quadratures(&rho, 10, &mut ChaCha20Rng::seed_from_u64(99)).unwrap();
        let b = sample_quadratures(&rho, 10, &mut ChaCha20Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
        assert!(sample_quadratures(&rho, 0, &mut ChaCha20Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let samples = vec![
            QuadratureSample { x: -1.234567890123, phi: 0.5 },
            QuadratureSample { x: 3.0e-7, phi: 3.1 },
        ];
        let mut buf = Vec::new();
        write_samples(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("-1.23456789012e0\t5.00000000000e-1\n"));
        let back = read_samples(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[0].x - samples[0].x).abs() < 1e-11);
    }
}
