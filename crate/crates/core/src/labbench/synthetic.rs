//! Rank-one updates of random matrices with `m` known leading eigenpairs and
//! a clustered unknown tail, swept over the tail mean.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::data::{gaussian_vector, haar_orthonormal, random_unit_vector, trial_rng};
use super::metrics::{log2_slope, max_abs_diff, max_angle, mean, median};
use super::oracle::full_secular_top;
use super::{ExperimentSpec, MetricRow};
use crate::error::Result;
use crate::linalg::{PartialEigen, RankOneUpdate, SymmetricMatrix};
use crate::secular::{MuPolicy, Order, TruncationConfig};
use crate::update::rank_one_update;

const NAME: &str = "synthetic";

/// Errors below this are at rounding level and left out of slope fits for
/// the second-order `mu = 0` variant.
pub const SLOPE_FLOOR: f64 = 1e-12;

/// Variant labels with their order and `mu` policy.
pub const VARIANTS: [(&str, Order, MuPolicy); 6] = [
    ("first_mu0", Order::First, MuPolicy::Zero),
    ("second_mu0", Order::Second, MuPolicy::Zero),
    ("first_mustar", Order::First, MuPolicy::Star),
    ("second_mustar", Order::Second, MuPolicy::Star),
    ("first_mumean", Order::First, MuPolicy::Mean),
    ("second_mumean", Order::Second, MuPolicy::Mean),
];

/// One random instance shared by every tail mean of a trial: the tail
/// values are `mu_hat + sigma * g` with the same `g` throughout.
pub struct SyntheticInstance {
    /// Full orthonormal eigenbasis; the first `m` columns are known.
    pub q: DMatrix<f64>,
    /// Known leading values, descending.
    pub top: Vec<f64>,
    /// Standard normal tail offsets, sorted descending.
    pub tail_offsets: Vec<f64>,
    pub v: DVector<f64>,
    /// `Q_t diag(g) Q_t^T` over the unknown columns.
    tail_part: DMatrix<f64>,
}

impl SyntheticInstance {
    pub fn generate<R: Rng>(rng: &mut R, n: usize, m: usize) -> Self {
        let q = haar_orthonormal(rng, n, n);
        let mut top: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..2.0)).collect();
        top.sort_by(|a, b| b.total_cmp(a));
        let mut tail_offsets: Vec<f64> = gaussian_vector(rng, n - m).iter().copied().collect();
        tail_offsets.sort_by(|a, b| b.total_cmp(a));
        let v = random_unit_vector(rng, n);
        let qt = q.columns(m, n - m);
        let mut scaled = qt.into_owned();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= tail_offsets[j];
        }
        let tail_part = scaled * qt.transpose();
        Self {
            q,
            top,
            tail_offsets,
            v,
            tail_part,
        }
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.top.len()
    }

    /// All eigenvalues for tail mean `mu_hat` and spread `sigma`.
    pub fn spectrum(&self, mu_hat: f64, sigma: f64) -> Vec<f64> {
        self.top
            .iter()
            .copied()
            .chain(self.tail_offsets.iter().map(|g| mu_hat + sigma * g))
            .collect()
    }

    /// `A = mu_hat I + Q_m (Lambda_m - mu_hat) Q_m^T + sigma Q_t diag(g) Q_t^T`.
    pub fn matrix(&self, mu_hat: f64, sigma: f64) -> Result<SymmetricMatrix> {
        let n = self.n();
        let m = self.m();
        let qm = self.q.columns(0, m);
        let mut scaled = qm.into_owned();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.top[j] - mu_hat;
        }
        let mut a = scaled * qm.transpose() + &self.tail_part * sigma;
        for i in 0..n {
            a[(i, i)] += mu_hat;
        }
        let sym = (&a + a.transpose()) * 0.5;
        SymmetricMatrix::from_dense(sym)
    }

    pub fn known(&self) -> Result<PartialEigen> {
        let m = self.m();
        PartialEigen::new(
            DVector::from_vec(self.top.clone()),
            self.q.columns(0, m).into_owned(),
            None,
        )
    }

    /// Leading `m` eigenpairs of `A + rho v v^T`, exact up to rounding.
    pub fn truth(&self, mu_hat: f64, sigma: f64, rho: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let z = self.q.tr_mul(&self.v);
        let (values, y) =
            full_secular_top(&self.spectrum(mu_hat, sigma), z.as_slice(), rho, self.m())?;
        Ok((values, &self.q * y))
    }
}

struct Measurement {
    mu_idx: usize,
    variant: usize,
    trial: usize,
    value_err: f64,
    angle: f64,
}

fn run_trial(spec: &ExperimentSpec, trial: usize) -> Result<Vec<Measurement>> {
    let mut rng = trial_rng(spec.seed, trial as u64);
    let inst = SyntheticInstance::generate(&mut rng, spec.n, spec.m);
    let known = inst.known()?;
    let upd = RankOneUpdate::new(1.0, inst.v.clone())?;
    let mut out = Vec::new();
    for (mu_idx, &mu_hat) in spec.mu_hats.iter().enumerate() {
        let a = inst.matrix(mu_hat, spec.tail_sigma)?;
        let (t_true, p_true) = inst.truth(mu_hat, spec.tail_sigma, 1.0)?;
        for (variant, &(_, order, policy)) in VARIANTS.iter().enumerate() {
            let cfg = TruncationConfig::new(order, policy);
            let res = rank_one_update(&known, &upd, &cfg, Some(&a), false)?;
            out.push(Measurement {
                mu_idx,
                variant,
                trial,
                value_err: max_abs_diff(&res.values, &t_true),
                angle: max_angle(&res.vectors, &p_true)?,
            });
        }
    }
    Ok(out)
}

/// One row per (tail mean, variant, trial), then per-variant means and
/// medians for each tail mean and log2-log2 slopes against the tail mean.
pub fn run_synthetic(spec: &ExperimentSpec) -> Result<Vec<MetricRow>> {
    spec.validate()?;
    let per_trial: Vec<Vec<Measurement>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, t))
        .collect::<Result<_>>()?;
    let mut all: Vec<&Measurement> = per_trial.iter().flatten().collect();
    all.sort_by_key(|x| (x.mu_idx, x.variant, x.trial));

    let mut rows: Vec<MetricRow> = all
        .iter()
        .map(|x| MetricRow {
            experiment: NAME.into(),
            variant: VARIANTS[x.variant].0.into(),
            param: spec.mu_hats[x.mu_idx],
            trial: Some(x.trial),
            eigenvalue_abs_err: Some(x.value_err),
            eigenvector_angle_deg: Some(x.angle),
            ..MetricRow::default()
        })
        .collect();

    for (vi, &(label, order, policy)) in VARIANTS.iter().enumerate() {
        let mut mean_err = Vec::new();
        let mut mean_ang = Vec::new();
        for (mi, &mu_hat) in spec.mu_hats.iter().enumerate() {
            let errs: Vec<f64> = all
                .iter()
                .filter(|x| x.variant == vi && x.mu_idx == mi)
                .map(|x| x.value_err)
                .collect();
            let angs: Vec<f64> = all
                .iter()
                .filter(|x| x.variant == vi && x.mu_idx == mi)
                .map(|x| x.angle)
                .collect();
            mean_err.push(mean(&errs));
            mean_ang.push(mean(&angs));
            rows.push(MetricRow::summary(
                NAME,
                label,
                mu_hat,
                "mean_eigenvalue_abs_err",
                mean(&errs),
            ));
            rows.push(MetricRow::summary(
                NAME,
                label,
                mu_hat,
                "median_eigenvalue_abs_err",
                median(&errs),
            ));
            rows.push(MetricRow::summary(
                NAME,
                label,
                mu_hat,
                "mean_eigenvector_angle_deg",
                mean(&angs),
            ));
        }
        let floor = order == Order::Second && policy == MuPolicy::Zero;
        let fit = |ys: &[f64]| {
            let (x, y): (Vec<f64>, Vec<f64>) = spec
                .mu_hats
                .iter()
                .zip(ys)
                .filter(|(_, &e)| !floor || e > SLOPE_FLOOR)
                .map(|(&a, &b)| (a, b))
                .unzip();
            if x.len() >= 2 {
                log2_slope(&x, &y)
            } else {
                f64::NAN
            }
        };
        rows.push(MetricRow::summary(
            NAME,
            label,
            f64::NAN,
            "slope_eigenvalue",
            fit(&mean_err),
        ));
        rows.push(MetricRow::summary(
            NAME,
            label,
            f64::NAN,
            "slope_angle",
            fit(&mean_ang),
        ));
    }
    Ok(rows)
}
