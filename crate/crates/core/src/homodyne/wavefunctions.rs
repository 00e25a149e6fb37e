use std::f64::consts::{PI, SQRT_2};

/// `psi_0(q) .. psi_{n_max}(q)` of the oscillator in the standard
/// coordinate (vacuum variance 1/2), by the usual three-term recursion.
pub fn hermite_functions(q: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(PI.powf(-0.25) * (-0.5 * q * q).exp());
    if n_max >= 1 {
        out.push(SQRT_2 * q * out[0]);
    }
    for n in 1..n_max {
        let next = (SQRT_2 * q * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// Oscillator eigenfunctions in the quadrature convention of this crate,
/// `2^{1/4} psi_n(sqrt(2) x)`, normalized over `x`.
pub fn quadrature_wavefunctions(x: f64, n_max: usize) -> Vec<f64> {
    let scale = 2f64.powf(0.25);
    let mut out = hermite_functions(SQRT_2 * x, n_max);
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_on_a_grid() {
        let h = 0.002;
        let nodes: Vec<f64> = (-6000..=6000).map(|i| i as f64 * h).collect();
        let table: Vec<Vec<f64>> = nodes.iter().map(|&x| quadrature_wavefunctions(x, 12)).collect();
        for a in 0..=12 {
            for b in 0..=12 {
                let s: f64 = table.iter().map(|row| row[a] * row[b]).sum::<f64>() * h;
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((s - expected).abs() < 1e-10, "{a} {b} {s}");
            }
        }
    }

    #[test]
    fn vacuum_peak() {
        let psi = quadrature_wavefunctions(0.0, 1);
        assert!((psi[0] * psi[0] - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert_eq!(psi[1], 0.0);
    }
}
