use losscomp::compensation::{scan_coefficients, Verdict};
use losscomp::experiments::{run_scans, Detection, Experiment, ExperimentConfig, DEFAULT_SEED};
use losscomp::fock::make_thermal;
use losscomp::MeasuredElement64;
use num_complex::Complex64;

/// Exact thermal probabilities of the dressed state with binomial errors.
fn binomial_ray(signal_mean: f64, eta: f64, n: usize, j_max: usize, shots: f64) -> Vec<MeasuredElement64> {
    let dressed = make_thermal(eta * signal_mean, n + j_max + 1).unwrap();
    (0..=j_max)
        .map(|j| {
            let p = dressed.get(n + j, n + j).re;
            MeasuredElement64 {
                n: n + j,
                d: 0,
                estimate: Complex64::new(p, 0.0),
                stderr: ((1.0 - p) * p / shots).sqrt(),
                samples: shots as usize,
                degenerate: false,
            }
        })
        .collect()
}

#[test]
fn empirical_spread_matches_propagated_error() {
    let cfg = ExperimentConfig {
        eta: vec![0.6],
        j_max: vec![20],
        trials: 100,
        seed: DEFAULT_SEED,
        ..ExperimentConfig::default_for(Experiment::Fig1)
    };
    let run = &run_scans(&cfg, Detection::Homodyne).unwrap()[0];
    let values: Vec<f64> = run.scans.iter().map(|s| s.last().value.re).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt();
    let propagated =
        run.scans.iter().map(|s| s.last().propagated_error).sum::<f64>() / run.scans.len() as f64;
    let ratio = spread / propagated;
    println!("empirical / propagated at eta 0.6, j_M 20: {ratio:.3}");
    assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn direct_error_series_converges_below_one_half() {
    // the binomial error series sum A_j^2 p_j / N converges while
    // z^2 r < 1, i.e. eta > nbar / (2 nbar + 1) = 0.4 for nbar = 2
    let j_list = [200, 400, 800];
    for eta in [0.5, 0.45, 0.42, 0.41] {
        let ray = binomial_ray(2.0, eta, 2, 800, 24_000.0);
        let scan = scan_coefficients(&ray, 2, 0, eta, &j_list).unwrap();
        let e = |k: usize| scan.trace[k].propagated_error;
        assert!((e(2) / e(1) - 1.0).abs() < 1e-6, "eta {eta}: {} vs {}", e(1), e(2));
        assert!((scan.last().value.re - 4.0 / 27.0).abs() < 1e-8, "eta {eta}");
        assert_eq!(scan.verdict, Verdict::Converged);
    }
    // between the value threshold 0.25 and 0.4 the values still converge
    // but the error series does not
    let ray = binomial_ray(2.0, 0.35, 2, 800, 24_000.0);
    let scan = scan_coefficients(&ray, 2, 0, 0.35, &j_list).unwrap();
    assert!((scan.last().value.re - 4.0 / 27.0).abs() < 1e-8);
    assert!(scan.trace[2].propagated_error > 100.0 * scan.trace[1].propagated_error);
}
