//! Wall-clock scaling of the update in `n` and of the eigenvector formula in
//! `m`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use super::data::{gaussian_matrix, random_unit_vector, trial_rng};
use super::metrics::log2_slope;
use super::oracle::dense_eigh;
use super::{ExperimentSpec, MetricRow};
use crate::eigvec::{eigvec_estimate, EigvecFormula};
use crate::error::Result;
use crate::linalg::{PartialEigen, RankOneUpdate, SymmetricMatrix};
use crate::secular::{MuPolicy, Order, TruncationConfig};
use crate::update::rank_one_update;

const NAME: &str = "scaling";

pub const UPDATE_VARIANTS: [(&str, Order, MuPolicy); 2] = [
    ("update_first_mu0", Order::First, MuPolicy::Zero),
    ("update_second_mustar", Order::Second, MuPolicy::Star),
];

pub const EIGVEC_VARIANT: &str = "eigvec_second_mustar";

/// A sparse symmetric matrix with known eigenpairs: random dense diagonal
/// blocks of size `block` under a random symmetric permutation.
pub struct BlockInstance {
    pub a: SymmetricMatrix,
    /// All eigenvalues, descending, with their eigenvectors stored sparsely
    /// as (row indices, entries).
    values: Vec<f64>,
    vectors: Vec<(Vec<usize>, Vec<f64>)>,
}

impl BlockInstance {
    pub fn generate<R: Rng>(rng: &mut R, n: usize, block: usize) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let mut entries = Vec::new();
        let mut pairs: Vec<(f64, Vec<usize>, Vec<f64>)> = Vec::new();
        let mut start = 0;
        while start < n {
            let b = block.min(n - start);
            let g = gaussian_matrix(rng, b, b);
            let blk = (&g + g.transpose()) * (0.5 / (b as f64).sqrt());
            let rows: Vec<usize> = (start..start + b).map(|i| perm[i]).collect();
            for i in 0..b {
                for j in i..b {
                    let (r, c) = (rows[i].min(rows[j]), rows[i].max(rows[j]));
                    entries.push((r, c, blk[(i, j)]));
                }
            }
            let e = dense_eigh(&SymmetricMatrix::from_dense(blk)?);
            for (k, &lam) in e.values.iter().enumerate() {
                pairs.push((
                    lam,
                    rows.clone(),
                    e.vectors.column(k).iter().copied().collect(),
                ));
            }
            start += b;
        }
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
        Ok(Self {
            a: SymmetricMatrix::from_triplets(n, entries)?,
            values: pairs.iter().map(|p| p.0).collect(),
            vectors: pairs.into_iter().map(|p| (p.1, p.2)).collect(),
        })
    }

    /// The leading `m` eigenpairs with the trace as hint.
    pub fn known(&self, m: usize) -> Result<PartialEigen> {
        let n = self.a.n();
        let mut q = DMatrix::zeros(n, m);
        for (j, (rows, x)) in self.vectors.iter().take(m).enumerate() {
            for (&r, &v) in rows.iter().zip(x) {
                q[(r, j)] = v;
            }
        }
        let values = DVector::from_iterator(m, self.values.iter().copied().take(m));
        Ok(PartialEigen::new(values, q, None)?.with_trace(self.a.trace()))
    }
}

fn min_time<F: FnMut() -> Result<()>>(repeats: usize, mut f: F) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Minimum wall time over `repeats` runs of the update for each `n` in
/// `spec.ns` (param `n`), and of the second-order eigenvector formula for
/// each `m` in `spec.ms` at size `spec.n` (param `m`), with fitted
/// log2-log2 exponents. Times vary between runs; every other column is
/// deterministic.
pub fn run_scaling(spec: &ExperimentSpec) -> Result<Vec<MetricRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut times = vec![Vec::new(); UPDATE_VARIANTS.len()];
    for (idx, &n) in spec.ns.iter().enumerate() {
        let mut rng = trial_rng(spec.seed, idx as u64);
        let inst = BlockInstance::generate(&mut rng, n, spec.nnz_per_row)?;
        let known = inst.known(spec.m.min(n - 1))?;
        let upd = RankOneUpdate::new(1.0, random_unit_vector(&mut rng, n))?;
        for (vi, &(label, order, policy)) in UPDATE_VARIANTS.iter().enumerate() {
            let cfg = TruncationConfig::new(order, policy);
            let t = min_time(spec.repeats, || {
                rank_one_update(&known, &upd, &cfg, Some(&inst.a), false).map(|_| ())
            })?;
            times[vi].push(t);
            rows.push(MetricRow {
                experiment: NAME.into(),
                variant: label.into(),
                param: n as f64,
                trial: Some(0),
                wall_time: Some(t),
                ..MetricRow::default()
            });
        }
    }
    if spec.ns.len() >= 2 {
        let ns: Vec<f64> = spec.ns.iter().map(|&n| n as f64).collect();
        for (vi, &(label, _, _)) in UPDATE_VARIANTS.iter().enumerate() {
            rows.push(MetricRow::summary(
                NAME,
                label,
                f64::NAN,
                "time_exponent_n",
                log2_slope(&ns, &times[vi]),
            ));
        }
    }

    if !spec.ms.is_empty() {
        let n = spec.n;
        let mut rng = trial_rng(spec.seed, spec.ns.len() as u64);
        let inst = BlockInstance::generate(&mut rng, n, spec.nnz_per_row)?;
        let v = random_unit_vector(&mut rng, n);
        let cfg = TruncationConfig::new(Order::Second, MuPolicy::Star);
        let upd = RankOneUpdate::new(1.0, v.clone())?;
        let mut mtimes = Vec::new();
        for &m in &spec.ms {
            let known = inst.known(m.min(n - 1))?;
            let res = rank_one_update(&known, &upd, &cfg, Some(&inst.a), false)?;
            let mu = res.mu_used().unwrap_or(0.0);
            let t = min_time(spec.repeats, || {
                eigvec_estimate(
                    &known,
                    &v,
                    &res.values,
                    mu,
                    EigvecFormula::SecondOrder,
                    Some(&inst.a),
                )
                .map(|_| ())
            })?;
            mtimes.push(t);
            rows.push(MetricRow {
                experiment: NAME.into(),
                variant: EIGVEC_VARIANT.into(),
                param: m as f64,
                trial: Some(0),
                wall_time: Some(t),
                ..MetricRow::default()
            });
        }
        if spec.ms.len() >= 2 {
            let ms: Vec<f64> = spec.ms.iter().map(|&m| m as f64).collect();
            rows.push(MetricRow::summary(
                NAME,
                EIGVEC_VARIANT,
                f64::NAN,
                "time_exponent_m",
                log2_slope(&ms, &mtimes),
            ));
        }
    }
    Ok(rows)
}
