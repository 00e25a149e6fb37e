//! Log-space factorials and the factorial ratios of the Bernoulli series.

use std::sync::OnceLock;

const TABLE_LEN: usize = 4096;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..TABLE_LEN {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < TABLE_LEN {
        return table()[n];
    }
    // Stirling series; the first omitted term is O(n^-7).
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// Log of the factorial ratio shared by the forward and inverse loss maps,
///
/// `ln[ sqrt((n+j)! (n+d+j)!) / (sqrt(n! (n+d)!) j!) ]`.
pub fn ln_ray_ratio(n: usize, d: usize, j: usize) -> f64 {
    if j == 0 {
        return 0.0;
    }
    0.5 * (ln_factorial(n + j) + ln_factorial(n + d + j) - ln_factorial(n) - ln_factorial(n + d))
        - ln_factorial(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_factorials() {
        let mut f = 1.0f64;
        for n in 0..25 {
            if n > 0 {
                f *= n as f64;
            }
            assert!((ln_factorial(n) - f.ln()).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn stirling_branch_matches_table() {
        // direct sum past the table boundary
        let mut acc = ln_factorial(TABLE_LEN - 1);
        for k in TABLE_LEN..TABLE_LEN + 10 {
            acc += (k as f64).ln();
            let rel = (ln_factorial(k) - acc).abs() / acc;
            assert!(rel < 1e-13, "k = {k}: {rel}");
        }
    }

    #[test]
    fn ray_ratio_on_diagonal_is_binomial() {
        // d = 0 collapses to C(n+j, j)
        let c = ln_ray_ratio(3, 0, 4).exp();
        assert!((c - 35.0).abs() < 1e-11);
    }
}
