//! Experiment harness: reference solvers, error metrics, the experiment
//! drivers and their CSV output.

pub mod data;
pub mod extension;
pub mod graph_sigma;
pub mod metrics;
pub mod oracle;
pub mod scaling;
pub mod synthetic;

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub use extension::run_extension_compare;
pub use graph_sigma::run_graph_sigma;
pub use scaling::run_scaling;
pub use synthetic::run_synthetic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SyntheticRankOne,
    GraphSigma,
    ExtensionCompare,
    Scaling,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SyntheticRankOne => "synthetic",
            ExperimentKind::GraphSigma => "graph-sigma",
            ExperimentKind::ExtensionCompare => "extension",
            ExperimentKind::Scaling => "scaling",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ExperimentKind::SyntheticRankOne,
            ExperimentKind::GraphSigma,
            ExperimentKind::ExtensionCompare,
            ExperimentKind::Scaling,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

/// Parameters of one experiment. Fields a kind does not use are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Matrix size (synthetic) or number of base points (graph kinds).
    pub n: usize,
    /// Number of known eigenpairs.
    pub m: usize,
    /// Trials per setting (synthetic) or insertions (graph kinds).
    pub trials: usize,
    /// Means of the unknown eigenvalues (synthetic).
    pub mu_hats: Vec<f64>,
    /// Standard deviation of the unknown eigenvalues (synthetic).
    pub tail_sigma: f64,
    /// Neighbour counts (graph kinds; the extension uses the first).
    pub ks: Vec<usize>,
    /// Point dimension, mixture components and centre spread (graph kinds).
    pub dim: usize,
    pub components: usize,
    pub center_scale: f64,
    /// Kernel width as a multiple of the mean squared `k`-th neighbour
    /// distance (graph kinds).
    pub epsilon_factor: f64,
    pub self_loops: bool,
    /// Matrix sizes (scaling).
    pub ns: Vec<usize>,
    /// Known-pair counts for the eigenvector timing ladder (scaling).
    pub ms: Vec<usize>,
    /// Stored entries per row of the sparse test matrix (scaling).
    pub nnz_per_row: usize,
    /// Timed repetitions per setting; the minimum is reported (scaling).
    pub repeats: usize,
}

impl ExperimentSpec {
    /// The default desk-scale setting of each kind.
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        let base = Self {
            kind,
            seed,
            n: 1000,
            m: 10,
            trials: 5,
            mu_hats: vec![1e0, 1e-1, 1e-2, 1e-3, 1e-4],
            tail_sigma: 1e-4,
            ks: vec![5, 10, 20, 40],
            dim: 8,
            components: 6,
            center_scale: 1.0,
            epsilon_factor: 2.0,
            self_loops: true,
            ns: vec![2000, 4000, 8000, 16000],
            ms: vec![50, 100, 200, 400],
            nnz_per_row: 100,
            repeats: 5,
        };
        match kind {
            ExperimentKind::SyntheticRankOne => base,
            ExperimentKind::GraphSigma => Self { trials: 10, ..base },
            ExperimentKind::ExtensionCompare => Self {
                m: 5,
                trials: 10,
                ks: vec![10],
                ..base
            },
            ExperimentKind::Scaling => Self { n: 4000, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        match self.kind {
            ExperimentKind::SyntheticRankOne => {
                if self.m >= self.n {
                    return bad("m must be smaller than n");
                }
                if self.mu_hats.is_empty() || self.mu_hats.iter().any(|&x| !(x > 0.0)) {
                    return bad("mu_hats must be positive");
                }
                if !(self.tail_sigma >= 0.0) {
                    return bad("tail_sigma must be non-negative");
                }
            }
            ExperimentKind::GraphSigma | ExperimentKind::ExtensionCompare => {
                if self.ks.is_empty() || self.ks.iter().any(|&k| k == 0 || k >= self.n) {
                    return bad("every k must lie in 1..n");
                }
                if self.dim == 0 || self.components == 0 {
                    return bad("dim and components must be positive");
                }
                if !(self.epsilon_factor > 0.0) {
                    return bad("epsilon_factor must be positive");
                }
                if self.kind == ExperimentKind::ExtensionCompare && self.m >= self.n {
                    return bad("m must be smaller than n");
                }
            }
            ExperimentKind::Scaling => {
                if self.ns.is_empty() || self.repeats == 0 || self.nnz_per_row == 0 {
                    return bad("scaling needs sizes, repeats and a row density");
                }
                if self.ns.iter().chain(&self.ms).any(|&x| x < 2) {
                    return bad("sizes must be at least 2");
                }
            }
        }
        Ok(())
    }
}

/// One CSV line: either a measurement (with `trial`) or a summary statistic
/// (with `statistic` and `value`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricRow {
    pub experiment: String,
    pub variant: String,
    /// The swept parameter: `mu_hat`, `k` or `n`.
    pub param: f64,
    pub trial: Option<usize>,
    /// Max over the `m` pairs.
    pub eigenvalue_abs_err: Option<f64>,
    /// Max over the `m` pairs, in `[0, 90]`.
    pub eigenvector_angle_deg: Option<f64>,
    pub sigma: Option<[f64; 4]>,
    /// Seconds; only the scaling experiment records it.
    pub wall_time: Option<f64>,
    pub statistic: Option<String>,
    pub value: Option<f64>,
}

impl MetricRow {
    pub fn summary(
        experiment: &str,
        variant: &str,
        param: f64,
        statistic: &str,
        value: f64,
    ) -> Self {
        Self {
            experiment: experiment.into(),
            variant: variant.into(),
            param,
            statistic: Some(statistic.into()),
            value: Some(value),
            ..Self::default()
        }
    }
}

/// The value of the summary row `(variant, statistic)`, if present.
pub fn find_summary(rows: &[MetricRow], variant: &str, statistic: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.variant == variant && r.statistic.as_deref() == Some(statistic))
        .and_then(|r| r.value)
}

/// Measurement rows of one variant.
pub fn measurements<'a>(
    rows: &'a [MetricRow],
    variant: &'a str,
) -> impl Iterator<Item = &'a MetricRow> {
    rows.iter()
        .filter(move |r| r.variant == variant && r.trial.is_some())
}

pub const CSV_HEADER: &str = "experiment,variant,param,trial,eigenvalue_abs_err,eigenvector_angle_deg,sigma1,sigma2,sigma3,sigma4,wall_time,statistic,value";

/// Nine significant digits.
fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt9).unwrap_or_default()
}

pub fn to_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let sig = match r.sigma {
            Some(s) => s.map(fmt9).join(","),
            None => ",,,".into(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.variant,
            fmt9(r.param),
            r.trial.map(|t| t.to_string()).unwrap_or_default(),
            opt(r.eigenvalue_abs_err),
            opt(r.eigenvector_angle_deg),
            sig,
            opt(r.wall_time),
            r.statistic.as_deref().unwrap_or(""),
            opt(r.value),
        );
    }
    out
}

/// Runs the experiment named by `spec.kind`.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<MetricRow>> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::SyntheticRankOne => run_synthetic(spec),
        ExperimentKind::GraphSigma => run_graph_sigma(spec),
        ExperimentKind::ExtensionCompare => run_extension_compare(spec),
        ExperimentKind::Scaling => run_scaling(spec),
    }
}
