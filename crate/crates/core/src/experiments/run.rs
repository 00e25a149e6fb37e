use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::compensation::{convergence_scan, CompensationResult, Source};
use crate::direct::sample_counts;
use crate::error::Result;
use crate::fock::{working_dim, DensityMatrix, StateKind, StateSpec, HEADROOM};
use crate::homodyne::{PatternFunctions, QuadratureSampler};
use crate::loss::apply_loss;

use super::config::{Detection, Experiment, ExperimentConfig};

// Probability mass a sampling truncation may drop.
const SAMPLING_TAIL: f64 = 1e-13;

/// The RNG of one trial. Streams of one master seed never overlap:
/// `stream = tag << 56 | eta_index << 32 | trial`, with tag 1 for homodyne
/// and 2 for photon counting.
pub fn trial_rng(seed: u64, detection: Detection, eta_index: usize, trial: usize) -> ChaCha20Rng {
    let tag: u64 = match detection {
        Detection::Homodyne => 1,
        Detection::Direct => 2,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((tag << 56) | ((eta_index as u64) << 32) | trial as u64);
    rng
}

/// Signal truncation covering the scanned rays and the state's own tail,
/// plus headroom.
fn signal_dim(cfg: &ExperimentConfig) -> usize {
    let ray = working_dim(cfg.target.0 + cfg.target.1 + 1, cfg.top_j_max());
    let state = match cfg.state {
        StateKind::Thermal { mean } if mean > 0.0 => {
            let r = mean / (1.0 + mean);
            (SAMPLING_TAIL.ln() / r.ln()).ceil() as usize + HEADROOM
        }
        StateKind::Thermal { .. } => 0,
        StateKind::Fock { photons } => photons + 1 + HEADROOM,
        StateKind::Coherent { alpha } => {
            let mean = alpha.norm_sqr();
            (mean + 12.0 * mean.sqrt()).ceil() as usize + HEADROOM
        }
    };
    ray.max(state)
}

/// Dressed state at one efficiency, cut down to the levels that carry
/// probability so sampling stays cheap.
struct Prepared {
    eta: f64,
    dressed: DensityMatrix<f64>,
    sampler: Option<QuadratureSampler>,
}

impl Prepared {
    fn new(cfg: &ExperimentConfig, eta: f64, homodyne: bool) -> Result<Self> {
        let spec = StateSpec::new(cfg.state, signal_dim(cfg))?;
        let full = apply_loss(&spec.build()?, eta)?;
        let p = full.diagonal();
        let mut tail = 0.0;
        let mut keep = p.len();
        while keep > 1 && tail + p[keep - 1].max(0.0) < SAMPLING_TAIL {
            tail += p[keep - 1].max(0.0);
            keep -= 1;
        }
        let dressed = full.truncated(keep)?;
        let sampler = if homodyne {
            Some(QuadratureSampler::new(&dressed)?)
        } else {
            None
        };
        Ok(Self {
            eta,
            dressed,
            sampler,
        })
    }
}

/// All trials of one detection scheme at one efficiency.
#[derive(Clone, Debug)]
pub struct ScanRun {
    pub eta: f64,
    pub detection: Detection,
    pub j_list: Vec<usize>,
    pub scans: Vec<CompensationResult<f64>>,
}

/// Runs every `(eta, trial)` scan of `cfg` with the given detection scheme.
pub fn run_scans(cfg: &ExperimentConfig, detection: Detection) -> Result<Vec<ScanRun>> {
    cfg.validate()?;
    let (n, d) = cfg.target;
    let homodyne = detection == Detection::Homodyne;
    let prepared: Vec<Prepared> = cfg
        .eta
        .par_iter()
        .map(|&eta| Prepared::new(cfg, eta, homodyne))
        .collect::<Result<_>>()?;
    let kernels = if homodyne {
        Some(PatternFunctions::new(n + d + cfg.top_j_max(), cfg.kernel_x_max)?)
    } else {
        None
    };
    let j_lists: Vec<Vec<usize>> = cfg.eta.iter().map(|&e| cfg.j_list(e)).collect();

    let jobs: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|e| (0..cfg.trials).map(move |t| (e, t)))
        .collect();
    let results: Vec<CompensationResult<f64>> = jobs
        .par_iter()
        .map(|&(e, trial)| {
            let prep = &prepared[e];
            let mut rng = trial_rng(cfg.seed, detection, e, trial);
            match (&prep.sampler, &kernels) {
                (Some(sampler), Some(kernels)) => {
                    let samples = sampler.sample(cfg.samples, &mut rng);
                    let source = Source::Homodyne {
                        samples: &samples,
                        kernels,
                    };
                    convergence_scan(&source, n, d, prep.eta, &j_lists[e])
                }
                _ => {
                    let hist = sample_counts(&prep.dressed, cfg.samples, &mut rng)?;
                    convergence_scan(&Source::Direct(&hist), n, d, prep.eta, &j_lists[e])
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut results = results.into_iter();
    Ok(prepared
        .iter()
        .zip(j_lists)
        .map(|(prep, j_list)| ScanRun {
            eta: prep.eta,
            detection,
            j_list,
            scans: results.by_ref().take(cfg.trials).collect(),
        })
        .collect())
}

/// Trial averages at one `(eta, j_M)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryRow {
    pub eta: f64,
    pub j_max: usize,
    /// Mean of the real part over trials.
    pub value: f64,
    pub propagated_error: f64,
    /// Cross-trial standard deviation of the value; NaN for one trial.
    pub empirical_error: f64,
}

pub fn summarize(run: &ScanRun) -> Vec<SummaryRow> {
    run.j_list
        .iter()
        .enumerate()
        .map(|(k, &j_max)| {
            let values: Vec<f64> = run.scans.iter().map(|s| s.trace[k].value.re).collect();
            let errors: Vec<f64> = run.scans.iter().map(|s| s.trace[k].propagated_error).collect();
            SummaryRow {
                eta: run.eta,
                j_max,
                value: mean(&values),
                propagated_error: mean(&errors),
                empirical_error: sample_std(&values),
            }
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Nine significant digits.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.8e}")
    }
}

/// `<out>` with its extension replaced by `<label>.csv`.
pub fn sibling_path(out: &Path, label: &str) -> PathBuf {
    out.with_extension(format!("{label}.csv"))
}

/// Output of `fig1` and `direct`: compensated values versus `j_M`.
#[derive(Clone, Debug)]
pub struct ScanReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub theory: f64,
    pub runs: Vec<ScanRun>,
    /// Homodyne scans of the same dressed states, when requested.
    pub control: Vec<ScanRun>,
}

impl ScanReport {
    pub fn main_csv(&self) -> String {
        self.summary_csv(&self.runs)
    }

    pub fn control_csv(&self) -> Option<String> {
        (!self.control.is_empty()).then(|| self.summary_csv(&self.control))
    }

    fn summary_csv(&self, runs: &[ScanRun]) -> String {
        let mut s = String::from("eta,j_M,value,propagated_error,empirical_error,theory,config_hash\n");
        for row in runs.iter().flat_map(summarize) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                fmt_real(row.eta),
                row.j_max,
                fmt_real(row.value),
                fmt_real(row.propagated_error),
                fmt_real(row.empirical_error),
                fmt_real(self.theory),
                self.config_hash
            );
        }
        s
    }

    /// One row per `(detection, eta, trial, j_M)`.
    pub fn trials_csv(&self) -> String {
        let mut s = String::from("detection,eta,trial,j_M,value,propagated_error,config_hash\n");
        for run in self.runs.iter().chain(&self.control) {
            for (trial, scan) in run.scans.iter().enumerate() {
                for p in &scan.trace {
                    let _ = writeln!(
                        s,
                        "{},{},{trial},{},{},{},{}",
                        run.detection.name(),
                        fmt_real(run.eta),
                        p.j_max,
                        fmt_real(p.value.re),
                        fmt_real(p.propagated_error),
                        self.config_hash
                    );
                }
            }
        }
        s
    }

    /// One row per `(detection, eta, trial)` with the scan verdict.
    pub fn verdicts_csv(&self) -> String {
        let mut s = String::from(
            "detection,eta,trial,verdict,value,propagated_error,max_abs_value,config_hash\n",
        );
        for run in self.runs.iter().chain(&self.control) {
            for (trial, scan) in run.scans.iter().enumerate() {
                let last = scan.last();
                let _ = writeln!(
                    s,
                    "{},{},{trial},{},{},{},{},{}",
                    run.detection.name(),
                    fmt_real(run.eta),
                    scan.verdict,
                    fmt_real(last.value.re),
                    fmt_real(last.propagated_error),
                    fmt_real(scan.max_abs_value()),
                    self.config_hash
                );
            }
        }
        s
    }

    /// Writes `<out>`, `<out>.trials.csv`, `<out>.verdicts.csv` and, with a
    /// control run, `<out>.control.csv`. Returns the paths written.
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let mut files = vec![
            (out.to_path_buf(), self.main_csv()),
            (sibling_path(out, "trials"), self.trials_csv()),
            (sibling_path(out, "verdicts"), self.verdicts_csv()),
        ];
        if let Some(control) = self.control_csv() {
            files.push((sibling_path(out, "control"), control));
        }
        write_files(files)
    }
}

fn write_files(files: Vec<(PathBuf, String)>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(files.len());
    for (path, body) in files {
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

fn theory(cfg: &ExperimentConfig) -> f64 {
    let (n, d) = cfg.target;
    StateSpec { kind: cfg.state, dim: usize::MAX }.element(n, d).re
}

/// Compensated target element versus `j_M` from homodyne data.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<ScanReport> {
    let runs = run_scans(cfg, cfg.detection)?;
    Ok(ScanReport {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        theory: theory(cfg),
        runs,
        control: Vec::new(),
    })
}

/// Photon-counting scans plus, when `control` is set, homodyne scans of the
/// same dressed states.
pub fn run_direct_contrast(cfg: &ExperimentConfig) -> Result<ScanReport> {
    let runs = run_scans(cfg, cfg.detection)?;
    let control = if cfg.control {
        run_scans(cfg, Detection::Homodyne)?
    } else {
        Vec::new()
    };
    Ok(ScanReport {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        theory: theory(cfg),
        runs,
        control,
    })
}

/// Trial-averaged propagated error on the `eta x j_M` grid.
#[derive(Clone, Debug)]
pub struct ErrorTable {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub runs: Vec<ScanRun>,
}

impl ErrorTable {
    pub fn rows(&self) -> Vec<SummaryRow> {
        self.runs.iter().flat_map(summarize).collect()
    }

    /// Mean propagated error at `(eta, j_max)`.
    pub fn error(&self, eta: f64, j_max: usize) -> Option<f64> {
        self.rows()
            .into_iter()
            .find(|r| (r.eta - eta).abs() < 1e-12 && r.j_max == j_max)
            .map(|r| r.propagated_error)
    }

    pub fn main_csv(&self) -> String {
        let mut s = String::from("eta,j_M,propagated_error,config_hash\n");
        for row in self.rows() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_real(row.eta),
                row.j_max,
                fmt_real(row.propagated_error),
                self.config_hash
            );
        }
        s
    }

    pub fn trials_csv(&self) -> String {
        let mut s = String::from("eta,trial,j_M,propagated_error,config_hash\n");
        for run in &self.runs {
            for (trial, scan) in run.scans.iter().enumerate() {
                for p in &scan.trace {
                    let _ = writeln!(
                        s,
                        "{},{trial},{},{},{}",
                        fmt_real(run.eta),
                        p.j_max,
                        fmt_real(p.propagated_error),
                        self.config_hash
                    );
                }
            }
        }
        s
    }

    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        write_files(vec![
            (out.to_path_buf(), self.main_csv()),
            (sibling_path(out, "trials"), self.trials_csv()),
        ])
    }
}

pub fn run_fig2(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    let runs = run_scans(cfg, cfg.detection)?;
    Ok(ErrorTable {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        runs,
    })
}

/// Either kind of experiment output.
#[derive(Clone, Debug)]
pub enum Report {
    Scan(ScanReport),
    Errors(ErrorTable),
}

impl Report {
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        match self {
            Report::Scan(r) => r.write(out),
            Report::Errors(t) => t.write(out),
        }
    }
}

/// Runs the experiment named in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    Ok(match cfg.experiment {
        Experiment::Fig1 => Report::Scan(run_fig1(cfg)?),
        Experiment::Fig2 => Report::Errors(run_fig2(cfg)?),
        Experiment::Direct => Report::Scan(run_direct_contrast(cfg)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn small(experiment: Experiment) -> ExperimentConfig {
        ExperimentConfig {
            samples: 1500,
            trials: 3,
            ..ExperimentConfig::default_for(experiment)
        }
    }

    #[test]
    fn streams_are_distinct_and_repeatable() {
        let mut a = trial_rng(7, Detection::Homodyne, 0, 0);
        let mut b = trial_rng(7, Detection::Homodyne, 0, 1);
        let mut c = trial_rng(7, Detection::Direct, 0, 0);
        let mut a2 = trial_rng(7, Detection::Homodyne, 0, 0);
        let x = a.next_u64();
        assert_eq!(x, a2.next_u64());
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
    }

    #[test]
    fn fig1_tables_have_expected_shape() {
        let cfg = ExperimentConfig {
            eta: vec![0.6, 0.5],
            ..small(Experiment::Fig1)
        };
        let report = run_fig1(&cfg).unwrap();
        let csv = report.main_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "eta,j_M,value,propagated_error,empirical_error,theory,config_hash");
        assert_eq!(lines.len(), 1 + 20 + 36);
        assert!(lines[1].starts_with("6.00000000e-1,1,"));
        assert!(lines[1].ends_with(&format!("1.48148148e-1,{}", cfg.hash())));
        assert!(!csv.contains('\r'));
        assert_eq!(report.trials_csv().lines().count(), 1 + 3 * (20 + 36));
        assert_eq!(report.verdicts_csv().lines().count(), 1 + 2 * 3);
        for run in &report.runs {
            for scan in &run.scans {
                assert!(scan
                    .trace
                    .windows(2)
                    .all(|w| w[1].propagated_error >= w[0].propagated_error));
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = ExperimentConfig {
            eta: vec![0.45],
            j_max: (1..=10).collect(),
            ..small(Experiment::Direct)
        };
        let a = run_direct_contrast(&cfg).unwrap();
        let b = run_direct_contrast(&cfg).unwrap();
        assert_eq!(a.main_csv(), b.main_csv());
        assert_eq!(a.control_csv(), b.control_csv());
        assert_eq!(a.trials_csv(), b.trials_csv());
        let other = run_direct_contrast(&ExperimentConfig { seed: 99, ..cfg }).unwrap();
        assert_ne!(a.trials_csv(), other.trials_csv());
    }

    #[test]
    fn fig2_table() {
        let cfg = ExperimentConfig {
            eta: vec![0.5, 0.8],
            ..small(Experiment::Fig2)
        };
        let table = run_fig2(&cfg).unwrap();
        assert_eq!(table.main_csv().lines().count(), 1 + 2 * 3);
        assert!(table.error(0.5, 100).unwrap() > table.error(0.5, 10).unwrap());
        assert!(table.error(0.7, 10).is_none());
    }

    #[test]
    fn fock_and_coherent_states_run() {
        for state in ["fock:3", "coherent:1,0.5"] {
            let cfg = ExperimentConfig {
                state: StateSpec::parse_kind(state).unwrap(),
                target: (0, 1),
                eta: vec![0.8],
                j_max: vec![2, 4, 6],
                samples: 500,
                trials: 2,
                ..ExperimentConfig::default_for(Experiment::Fig1)
            };
            let report = run_fig1(&cfg).unwrap();
            assert_eq!(report.runs[0].scans.len(), 2);
        }
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling_path(Path::new("out/fig1.csv"), "trials"), PathBuf::from("out/fig1.trials.csv"));
        assert_eq!(sibling_path(Path::new("fig1"), "control"), PathBuf::from("fig1.control.csv"));
        assert_eq!(fmt_real(f64::NAN), "nan");
        assert_eq!(fmt_real(4.0 / 27.0), "1.48148148e-1");
    }
}
