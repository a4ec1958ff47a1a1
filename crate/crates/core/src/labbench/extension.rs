//! Out-of-sample extension against the exact eigenpairs of the enlarged
//! Laplacian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::graph_sigma::InsertionCloud;
use super::metrics::{max_abs_diff, max_angle, median};
use super::oracle::dense_eigh;
use super::{ExperimentSpec, MetricRow};
use crate::error::Result;
use crate::extend::{extend, lift_eigenpairs};
use crate::graph::{augment_and_delta_with, build_weights, laplacian_sym};
use crate::linalg::PartialEigen;
use crate::secular::{MuPolicy, Order, TruncationConfig};

const NAME: &str = "extension";

/// Update variants with their order and `mu` policy.
pub const UPDATE_VARIANTS: [(&str, Order, MuPolicy); 2] = [
    ("first_mu0", Order::First, MuPolicy::Zero),
    ("second_mustar", Order::Second, MuPolicy::Star),
];

/// Row labels in output order.
pub const LABELS: [&str; 5] = [
    "no_update",
    "first_mu0_raw",
    "first_mu0_corrected",
    "second_mustar_raw",
    "second_mustar_corrected",
];

fn leading(
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    m: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    (
        values.rows(0, m).into_owned(),
        vectors.columns(0, m).into_owned(),
    )
}

/// One row per (label, insertion) with the max eigenvalue error and max
/// eigenvector angle over the leading `m` pairs, then medians per label.
///
/// The update starts from `m + 1` lifted pairs (the `m` stored pairs and
/// the isolated-vertex pair) and is scored on its leading `m` outputs. The
/// no-update baseline is the stored pairs padded with a zero.
pub fn run_extension_compare(spec: &ExperimentSpec) -> Result<Vec<MetricRow>> {
    spec.validate()?;
    let k = spec.ks[0];
    let m = spec.m;
    let cloud = InsertionCloud::generate(spec, spec.trials)?;
    let cfg = cloud.config(k, spec)?;
    let w0 = build_weights(&cloud.base, &cfg)?;
    let l0 = laplacian_sym(&w0)?;
    let full0 = dense_eigh(&l0);
    let (v0, q0) = full0.leading(m);
    let stored = PartialEigen::new(v0.clone(), q0.clone(), None)?;
    let lifted = lift_eigenpairs(&stored, m + 1)?;
    let n1 = spec.n + 1;
    let mut padded = DMatrix::zeros(n1, m);
    padded.view_mut((1, 0), (spec.n, m)).copy_from(&q0);

    let per_insertion: Vec<Vec<(f64, f64)>> = cloud
        .insertions
        .par_iter()
        .map(|x0| {
            let pair = augment_and_delta_with(&cloud.base, &w0, &l0, x0, &cfg)?;
            let (t_true, p_true) = dense_eigh(&pair.l1).leading(m);
            let mut out = vec![(max_abs_diff(&v0, &t_true), max_angle(&padded, &p_true)?)];
            for &(_, order, policy) in &UPDATE_VARIANTS {
                let res = extend(&lifted, &pair, &TruncationConfig::new(order, policy), true)?;
                let (t, p) = leading(&res.uncorrected_values, &res.uncorrected_vectors, m);
                out.push((max_abs_diff(&t, &t_true), max_angle(&p, &p_true)?));
                let c = res.corrected.expect("correction requested");
                let (t, p) = leading(&c.values, &c.vectors, m);
                out.push((max_abs_diff(&t, &t_true), max_angle(&p, &p_true)?));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (li, label) in LABELS.iter().enumerate() {
        for (trial, res) in per_insertion.iter().enumerate() {
            rows.push(MetricRow {
                experiment: NAME.into(),
                variant: (*label).into(),
                param: k as f64,
                trial: Some(trial),
                eigenvalue_abs_err: Some(res[li].0),
                eigenvector_angle_deg: Some(res[li].1),
                ..MetricRow::default()
            });
        }
    }
    for (li, label) in LABELS.iter().enumerate() {
        let errs: Vec<f64> = per_insertion.iter().map(|r| r[li].0).collect();
        let angs: Vec<f64> = per_insertion.iter().map(|r| r[li].1).collect();
        rows.push(MetricRow::summary(
            NAME,
            label,
            k as f64,
            "median_eigenvalue_abs_err",
            median(&errs),
        ));
        rows.push(MetricRow::summary(
            NAME,
            label,
            k as f64,
            "median_eigenvector_angle_deg",
            median(&angs),
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labbench::{find_summary, ExperimentKind};

    #[test]
    fn small_run_orders_errors() {
        let mut spec = ExperimentSpec::new(ExperimentKind::ExtensionCompare, 2);
        spec.n = 200;
        spec.m = 3;
        spec.trials = 4;
        let rows = run_extension_compare(&spec).unwrap();
        assert_eq!(
            rows.iter().filter(|r| r.trial.is_some()).count(),
            4 * LABELS.len()
        );
        let ang = |l| find_summary(&rows, l, "median_eigenvector_angle_deg").unwrap();
        assert!(ang("no_update") > 0.0);
        assert!(ang("second_mustar_raw") < ang("no_update"));
    }
}
