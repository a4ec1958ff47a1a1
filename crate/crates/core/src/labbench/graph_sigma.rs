//! Singular values of the Laplacian change for point insertions, swept over
//! the neighbour count.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::data::{mixture_cloud, trial_rng};
use super::metrics::{log2_slope, mean};
use super::oracle::jacobi_eigh;
use super::{ExperimentSpec, MetricRow};
use crate::error::Result;
use crate::graph::{
    augment_and_delta_with, build_weights, knn_epsilon, laplacian_sym, GraphConfig, LaplacianPair,
    PointCloud,
};

const NAME: &str = "graph-sigma";

/// Base points and insertion points drawn from one mixture.
pub struct InsertionCloud {
    pub base: PointCloud,
    pub insertions: Vec<Vec<f64>>,
}

impl InsertionCloud {
    /// `n + count` mixture points; the first `count` become insertions.
    pub fn generate(spec: &ExperimentSpec, count: usize) -> Result<Self> {
        let mut rng = trial_rng(spec.seed, u64::MAX);
        let all = mixture_cloud(
            &mut rng,
            spec.n + count,
            spec.dim,
            spec.components,
            spec.center_scale,
        )?;
        let pts = all.points();
        let insertions = (0..count)
            .map(|i| pts.row(i).iter().copied().collect())
            .collect();
        let base = PointCloud::new(pts.rows(count, spec.n).into_owned())?;
        Ok(Self { base, insertions })
    }

    /// The kNN configuration for `k` with the kernel width scaled to the
    /// base cloud.
    pub fn config(&self, k: usize, spec: &ExperimentSpec) -> Result<GraphConfig> {
        let mut cfg = GraphConfig::knn(k, knn_epsilon(&self.base, k, spec.epsilon_factor)?);
        cfg.self_loops = spec.self_loops;
        Ok(cfg)
    }
}

/// The largest `count` singular values of `pair.delta`, descending.
///
/// `Delta L` vanishes outside the rows and columns of the affected set `K`,
/// so on its support it has the form `[[M, B^T], [B, 0]]`. With `B = Q R`
/// the orthogonal similarity `diag(I, Q)` reduces it to
/// `[[M, R^T], [R, 0]]`, whose nonzero spectrum is that of `Delta L`.
pub fn delta_singular_values(pair: &LaplacianPair, count: usize) -> Result<Vec<f64>> {
    let delta = &pair.delta;
    let core = &pair.affected;
    let in_core: HashSet<usize> = core.iter().copied().collect();
    let outer: Vec<usize> = delta
        .support()
        .into_iter()
        .filter(|i| !in_core.contains(i))
        .collect();
    let outer_pos: std::collections::HashMap<usize, usize> =
        outer.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let core_pos: std::collections::HashMap<usize, usize> =
        core.iter().enumerate().map(|(p, &i)| (i, p)).collect();

    let kc = core.len();
    let mut m = DMatrix::zeros(kc, kc);
    let mut b = DMatrix::zeros(outer.len(), kc);
    let mut closed = true;
    for (i, j, x) in delta.upper_entries() {
        match (core_pos.get(&i), core_pos.get(&j)) {
            (Some(&p), Some(&q)) => {
                m[(p, q)] = x;
                m[(q, p)] = x;
            }
            (Some(&p), None) => b[(outer_pos[&j], p)] = x,
            (None, Some(&q)) => b[(outer_pos[&i], q)] = x,
            (None, None) => closed = false,
        }
    }
    let reduced = if closed {
        let r = if outer.is_empty() {
            DMatrix::zeros(0, kc)
        } else {
            b.qr().r()
        };
        let rr = r.nrows();
        let mut h = DMatrix::zeros(kc + rr, kc + rr);
        h.view_mut((0, 0), (kc, kc)).copy_from(&m);
        h.view_mut((kc, 0), (rr, kc)).copy_from(&r);
        h.view_mut((0, kc), (kc, rr)).copy_from(&r.transpose());
        h
    } else {
        let support = delta.support();
        delta.principal_submatrix(&support)
    };
    let e = jacobi_eigh(&reduced)?;
    let mut s: Vec<f64> = e.values.iter().map(|x| x.abs()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.resize(count.max(s.len()), 0.0);
    s.truncate(count);
    Ok(s)
}

/// Per `k` and insertion: `sigma_1..sigma_4` of `Delta L`. Summary rows give
/// the means per `k` and the slopes of `log2(1 - mean sigma_1)` and
/// `log2(mean sigma_2)` against `log2 k`.
pub fn run_graph_sigma(spec: &ExperimentSpec) -> Result<Vec<MetricRow>> {
    spec.validate()?;
    let cloud = InsertionCloud::generate(spec, spec.trials)?;
    let mut rows = Vec::new();
    let mut mean1 = Vec::new();
    let mut mean2 = Vec::new();
    for &k in &spec.ks {
        let cfg = cloud.config(k, spec)?;
        let w0 = build_weights(&cloud.base, &cfg)?;
        let l0 = laplacian_sym(&w0)?;
        let sigmas: Vec<[f64; 4]> = cloud
            .insertions
            .par_iter()
            .map(|x0| {
                let pair = augment_and_delta_with(&cloud.base, &w0, &l0, x0, &cfg)?;
                let s = delta_singular_values(&pair, 4)?;
                Ok([s[0], s[1], s[2], s[3]])
            })
            .collect::<Result<_>>()?;
        for (t, s) in sigmas.iter().enumerate() {
            rows.push(MetricRow {
                experiment: NAME.into(),
                variant: "knn".into(),
                param: k as f64,
                trial: Some(t),
                sigma: Some(*s),
                ..MetricRow::default()
            });
        }
        let s1: Vec<f64> = sigmas.iter().map(|s| s[0]).collect();
        let s2: Vec<f64> = sigmas.iter().map(|s| s[1]).collect();
        mean1.push(mean(&s1));
        mean2.push(mean(&s2));
        rows.push(MetricRow::summary(
            NAME,
            "knn",
            k as f64,
            "mean_sigma1",
            mean(&s1),
        ));
        rows.push(MetricRow::summary(
            NAME,
            "knn",
            k as f64,
            "mean_sigma2",
            mean(&s2),
        ));
        rows.push(MetricRow::summary(NAME, "knn", k as f64, "epsilon", {
            let crate::graph::Kernel::Gaussian { epsilon } = cfg.kernel;
            epsilon
        }));
    }
    if spec.ks.len() >= 2 {
        let ks: Vec<f64> = spec.ks.iter().map(|&k| k as f64).collect();
        let gap: Vec<f64> = mean1.iter().map(|s| 1.0 - s).collect();
        rows.push(MetricRow::summary(
            NAME,
            "knn",
            f64::NAN,
            "slope_one_minus_sigma1",
            log2_slope(&ks, &gap),
        ));
        rows.push(MetricRow::summary(
            NAME,
            "knn",
            f64::NAN,
            "slope_sigma2",
            log2_slope(&ks, &mean2),
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labbench::oracle::dense_eigenvalues;
    use crate::labbench::ExperimentKind;

    fn small_spec() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(ExperimentKind::GraphSigma, 5);
        spec.n = 120;
        spec.trials = 3;
        spec.ks = vec![4, 8];
        spec
    }

    #[test]
    fn reduction_matches_dense_spectrum() {
        let spec = small_spec();
        let cloud = InsertionCloud::generate(&spec, 3).unwrap();
        for &k in &spec.ks {
            let cfg = cloud.config(k, &spec).unwrap();
            let w0 = build_weights(&cloud.base, &cfg).unwrap();
            let l0 = laplacian_sym(&w0).unwrap();
            for x0 in &cloud.insertions {
                let pair = augment_and_delta_with(&cloud.base, &w0, &l0, x0, &cfg).unwrap();
                let fast = delta_singular_values(&pair, 4).unwrap();
                let mut dense: Vec<f64> = dense_eigenvalues(pair.delta.to_dense())
                    .iter()
                    .map(|x| x.abs())
                    .collect();
                dense.sort_by(|a, b| b.total_cmp(a));
                for i in 0..4 {
                    assert!((fast[i] - dense[i]).abs() < 1e-12, "{fast:?} vs {dense:?}");
                }
            }
        }
    }

    #[test]
    fn small_run_rows() {
        let rows = run_graph_sigma(&small_spec()).unwrap();
        assert_eq!(rows.iter().filter(|r| r.trial.is_some()).count(), 6);
        assert!(super::super::find_summary(&rows, "knn", "slope_sigma2").is_some());
    }
}
