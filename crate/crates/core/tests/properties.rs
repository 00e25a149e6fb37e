use losscomp::compensation::{pinned_coefficients, scan_coefficients};
use losscomp::fock::{make_coherent, make_thermal};
use losscomp::loss::{apply_loss, invert_loss};
use losscomp::DensityMatrix64;
use num_complex::Complex64;
use proptest::prelude::*;

fn fixture(kind: u8, param: f64, dim: usize) -> DensityMatrix64 {
    match kind {
        0 => make_thermal(param * 3.0, dim).unwrap(),
        _ => make_coherent(Complex64::from_polar(param * 1.5, param * 4.0), dim).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn loss_composes(kind in 0u8..2, param in 0.05f64..1.0, a in 0.3f64..1.0, b in 0.3f64..1.0) {
        let rho = fixture(kind, param, 40);
        let twice = apply_loss(&apply_loss(&rho, a).unwrap(), b).unwrap();
        let once = apply_loss(&rho, a * b).unwrap();
        prop_assert!(twice.max_abs_diff(&once) < 1e-12);
    }

    #[test]
    fn loss_preserves_trace(kind in 0u8..2, param in 0.05f64..1.0, eta in 0.05f64..1.0) {
        let rho = fixture(kind, param, 40);
        let out = apply_loss(&rho, eta).unwrap();
        prop_assert!((out.trace() - rho.trace()).abs() < 1e-13);
    }

    #[test]
    fn inversion_undoes_loss(kind in 0u8..2, param in 0.05f64..1.0, eta in 0.6f64..1.0) {
        let rho = fixture(kind, param, 32);
        let back = invert_loss(&apply_loss(&rho, eta).unwrap(), eta, 32).unwrap().state;
        prop_assert!(back.max_abs_diff(&rho) < 1e-9);
    }

    #[test]
    fn propagated_error_never_decreases(n in 0usize..6, d in 0usize..4, eta in 0.2f64..1.0, eps in 1e-4f64..1e-1) {
        let c = pinned_coefficients(n, d, 40, eps);
        let j_list: Vec<usize> = (0..=40).collect();
        let scan = scan_coefficients(&c, n, d, eta, &j_list).unwrap();
        prop_assert!(scan.trace.windows(2).all(|w| w[1].propagated_error >= w[0].propagated_error));
    }
}
