use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock::{StateKind, StateSpec};
use crate::homodyne::DEFAULT_KERNEL_X_MAX;

/// Upper limit on `samples * max(j_max)` for one trial: the kernel
/// evaluations a single scan costs.
pub const COMPUTE_BUDGET: u64 = 100_000_000;
pub const MAX_TRIALS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Fig1,
    Fig2,
    Direct,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Direct => "direct",
        }
    }

    fn parse(text: &str) -> Option<Self> {
        match text {
            "fig1" => Some(Experiment::Fig1),
            "fig2" => Some(Experiment::Fig2),
            "direct" => Some(Experiment::Direct),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detection {
    Homodyne,
    Direct,
}

impl Detection {
    pub fn name(&self) -> &'static str {
        match self {
            Detection::Homodyne => "homodyne",
            Detection::Direct => "direct",
        }
    }
}

/// Everything that determines a run. Two runs with equal configs produce
/// identical output.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub state: StateKind<f64>,
    /// Target element `(n, d)`, i.e. `<n|rho_sig|n+d>`.
    pub target: (usize, usize),
    pub detection: Detection,
    pub samples: usize,
    pub eta: Vec<f64>,
    pub j_max: Vec<usize>,
    /// Extra truncation indices scanned when `eta <= extend_at_or_below`.
    pub extended_j_max: Vec<usize>,
    pub extend_at_or_below: f64,
    pub trials: usize,
    pub seed: u64,
    /// Also run a homodyne scan on the same dressed states.
    pub control: bool,
    pub kernel_x_max: f64,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn default_for(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            state: StateKind::Thermal { mean: 2.0 },
            target: (2, 0),
            detection: Detection::Homodyne,
            samples: 24_000,
            eta: vec![0.6, 0.55, 0.53, 0.5],
            j_max: (1..=20).collect(),
            extended_j_max: (25..=100).step_by(5).collect(),
            extend_at_or_below: 0.53,
            trials: 10,
            seed: DEFAULT_SEED,
            control: false,
            kernel_x_max: DEFAULT_KERNEL_X_MAX,
            output: PathBuf::from(format!("{}.csv", experiment.name())),
        };
        match experiment {
            Experiment::Fig1 => base,
            Experiment::Fig2 => Self {
                samples: 8000,
                eta: float_range(0.4, 0.9, 0.025),
                j_max: vec![10, 20, 100],
                extended_j_max: Vec::new(),
                extend_at_or_below: 0.0,
                ..base
            },
            Experiment::Direct => Self {
                detection: Detection::Direct,
                eta: vec![0.45, 0.42],
                j_max: (1..=40).collect(),
                extended_j_max: Vec::new(),
                extend_at_or_below: 0.0,
                control: true,
                ..base
            },
        }
    }

    /// Parses `key = value` lines over the defaults of `fallback` (or of the
    /// `experiment` key, when present). `#` starts a comment.
    pub fn parse(text: &str, fallback: Experiment) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected key = value, got '{content}'"),
            })?;
            let key = key.trim().to_string();
            if !seen.insert(key.clone()) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key '{key}'"),
                });
            }
            entries.push((line, key, value.trim().to_string()));
        }

        let experiment = match entries.iter().find(|(_, k, _)| k == "experiment") {
            Some((line, _, v)) => Experiment::parse(v).ok_or_else(|| Error::Config {
                line: *line,
                message: format!("unknown experiment '{v}'"),
            })?,
            None => fallback,
        };
        let mut cfg = Self::default_for(experiment);
        for (line, key, value) in &entries {
            cfg.apply(key, value).map_err(|message| Error::Config {
                line: *line,
                message,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let num = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number '{v}'"));
        let int = |v: &str| v.parse::<usize>().map_err(|_| format!("bad integer '{v}'"));
        match key {
            "experiment" => {}
            "state" => {
                self.state = StateSpec::parse_kind(value).map_err(|e| e.to_string())?;
            }
            "target" => {
                let (n, d) = value
                    .split_once(',')
                    .ok_or_else(|| format!("target must be n,d, got '{value}'"))?;
                self.target = (int(n.trim())?, int(d.trim())?);
            }
            "detection" => {
                self.detection = match value {
                    "homodyne" => Detection::Homodyne,
                    "direct" => Detection::Direct,
                    other => return Err(format!("unknown detection '{other}'")),
                }
            }
            "samples" => self.samples = int(value)?,
            "eta" => self.eta = parse_float_list(value)?,
            "j_max" => self.j_max = parse_index_list(value)?,
            "extended_j_max" => self.extended_j_max = parse_index_list(value)?,
            "extend_at_or_below" => self.extend_at_or_below = num(value)?,
            "trials" => self.trials = int(value)?,
            "seed" => {
                self.seed = value.parse().map_err(|_| format!("bad seed '{value}'"))?;
            }
            "control" => {
                self.control = value.parse().map_err(|_| "control must be true or false".to_string())?;
            }
            "kernel_x_max" => self.kernel_x_max = num(value)?,
            "output" => self.output = PathBuf::from(value),
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Err(Error::Config { line: 0, message });
        StateSpec { kind: self.state, dim: usize::MAX }
            .validate()
            .map_err(|e| Error::Config { line: 0, message: e.to_string() })?;
        if self.eta.is_empty() || self.j_max.is_empty() {
            return bad("eta and j_max lists must be non-empty".into());
        }
        if let Some(eta) = self.eta.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return bad(format!("efficiency {eta} outside (0, 1]"));
        }
        for (name, list) in [("j_max", &self.j_max), ("extended_j_max", &self.extended_j_max)] {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("{name} must be strictly ascending"));
            }
        }
        if self.samples < 2 {
            return bad("samples must be at least 2".into());
        }
        if self.trials == 0 || self.trials > MAX_TRIALS {
            return bad(format!("trials must lie in 1..={MAX_TRIALS}"));
        }
        let top = self.top_j_max() as u64;
        if (self.samples as u64).saturating_mul(top.max(1)) > COMPUTE_BUDGET {
            return bad(format!(
                "samples * max(j_max) = {} exceeds the compute budget {COMPUTE_BUDGET}",
                self.samples as u64 * top
            ));
        }
        if self.detection == Detection::Direct && self.target.1 != 0 {
            return bad("direct detection only measures diagonal targets".into());
        }
        if !(self.kernel_x_max > 0.0 && self.kernel_x_max <= 25.0) {
            return bad(format!("kernel_x_max {} outside (0, 25]", self.kernel_x_max));
        }
        Ok(())
    }

    /// Truncation indices scanned at efficiency `eta`, ascending.
    pub fn j_list(&self, eta: f64) -> Vec<usize> {
        let mut set: BTreeSet<usize> = self.j_max.iter().copied().collect();
        if eta <= self.extend_at_or_below + 1e-12 {
            set.extend(self.extended_j_max.iter().copied());
        }
        set.into_iter().collect()
    }

    pub fn top_j_max(&self) -> usize {
        let base = self.j_max.last().copied().unwrap_or(0);
        let extended = if self.eta.iter().any(|&e| e <= self.extend_at_or_below + 1e-12) {
            self.extended_j_max.last().copied().unwrap_or(0)
        } else {
            0
        };
        base.max(extended)
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = self.body();
        let _ = writeln!(s, "output = {}", self.output.display());
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical text, output path
    /// excluded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.body().as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn body(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment.name());
        let _ = writeln!(s, "state = {}", StateSpec { kind: self.state, dim: 1 }.kind_label());
        let _ = writeln!(s, "target = {},{}", self.target.0, self.target.1);
        let _ = writeln!(s, "detection = {}", self.detection.name());
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "eta = {}", join(&self.eta));
        let _ = writeln!(s, "j_max = {}", format_index_list(&self.j_max));
        let _ = writeln!(s, "extended_j_max = {}", format_index_list(&self.extended_j_max));
        let _ = writeln!(s, "extend_at_or_below = {}", self.extend_at_or_below);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "control = {}", self.control);
        let _ = writeln!(s, "kernel_x_max = {}", self.kernel_x_max);
        s
    }
}

/// `a,b,c`, `a..b` (inclusive) or `a..b:step`, mixed freely.
pub fn parse_index_list(text: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let int = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad integer '{v}'"));
        match part.split_once("..") {
            Some((lo, rest)) => {
                let (hi, step) = match rest.split_once(':') {
                    Some((hi, step)) => (int(hi)?, int(step)?),
                    None => (int(rest)?, 1),
                };
                if step == 0 {
                    return Err(format!("zero step in '{part}'"));
                }
                out.extend((int(lo)?..=hi).step_by(step));
            }
            None => out.push(int(part)?),
        }
    }
    Ok(out)
}

pub fn parse_float_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number '{v}'"));
        match part.split_once("..") {
            Some((lo, rest)) => {
                let (hi, step) = rest
                    .split_once(':')
                    .ok_or_else(|| format!("real range '{part}' needs a step"))?;
                let step = num(step)?;
                if !(step > 0.0) {
                    return Err(format!("non-positive step in '{part}'"));
                }
                out.extend(float_range(num(lo)?, num(hi)?, step));
            }
            None => out.push(num(part)?),
        }
    }
    Ok(out)
}

/// `lo, lo + step, ...` up to `hi` inclusive, rounded to 12 decimals so the
/// grid prints cleanly.
fn float_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

/// Compresses runs with a constant step back into `a..b:step`.
fn format_index_list(list: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < list.len() {
        let mut j = i + 1;
        if j < list.len() {
            let step = list[j] - list[i];
            while j + 1 < list.len() && list[j + 1] - list[j] == step {
                j += 1;
            }
            if j - i >= 2 {
                parts.push(if step == 1 {
                    format!("{}..{}", list[i], list[j])
                } else {
                    format!("{}..{}:{step}", list[i], list[j])
                });
                i = j + 1;
                continue;
            }
        }
        parts.push(list[i].to_string());
        i += 1;
    }
    parts.join(",")
}
