//! Out-of-sample extension of a graph Laplacian's leading eigenpairs.
//!
//! The Laplacian change `Delta L` of a point insertion is replaced by its
//! dominant eigenpair `rho v v^T`, the rank-one update is applied to the
//! lifted eigenpairs, and the remainder `C = Delta L - rho v v^T` is folded
//! back in with first-order perturbation corrections.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{top_eigenpair_power, LaplacianPair, POWER_MAX_ITERS, POWER_TOL};
use crate::linalg::{gram_defect, PartialEigen, RankOneUpdate, SymmetricMatrix};
use crate::secular::TruncationConfig;
use crate::update::{rank_one_update, UpdateResult};

/// Relative eigenvalue gap below which a correction term is skipped.
pub const CORRECTION_GAP_REL: f64 = 1e-10;

/// Eigenpairs of the `n`-point Laplacian lifted to the augmented one: each
/// vector gets a leading zero for the new vertex, and the isolated-vertex
/// pair `(1, e_0)` is inserted in sorted position (ahead of equal values).
/// At most `keep` pairs are returned.
pub fn lift_eigenpairs(eig: &PartialEigen, keep: usize) -> Result<PartialEigen> {
    let n = eig.n();
    let m = eig.m();
    let pos = eig.values().iter().take_while(|&&x| x > 1.0).count();
    let total = (m + 1).min(keep);
    let mut values = Vec::with_capacity(total);
    let mut vectors = DMatrix::zeros(n + 1, total);
    let mut src = 0;
    for col in 0..total {
        if col == pos {
            values.push(1.0);
            vectors[(0, col)] = 1.0;
        } else {
            values.push(eig.values()[src]);
            vectors
                .view_mut((1, col), (n, 1))
                .copy_from(&eig.vectors().column(src));
            src += 1;
        }
    }
    let lifted = PartialEigen::new(DVector::from_vec(values), vectors, None)?;
    Ok(match eig.trace_hint() {
        Some(tr) => lifted.with_trace(tr + 1.0),
        None => lifted,
    })
}

/// Output of [`perturbation_correct`].
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    /// `t^`, re-sorted descending.
    pub values: DVector<f64>,
    /// `P^`, unit columns in the order of `values`.
    pub vectors: DMatrix<f64>,
    /// Cross terms dropped because their eigenvalue gap was too small.
    pub skipped: usize,
}

/// `t^_i = t_i + p_i^T C p_i` and
/// `p^_i = p_i + sum_{j != i} (p_j^T C p_i) / (t_i - t_j) p_j`, with the sum
/// over the supplied columns only. Terms with `|t_i - t_j|` below
/// [`CORRECTION_GAP_REL`] times the spread of `t` are skipped.
pub fn perturbation_correct(
    c: &SymmetricMatrix,
    t: &DVector<f64>,
    p: &DMatrix<f64>,
) -> Result<Correction> {
    let m = t.len();
    if p.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: p.ncols(),
        });
    }
    let cp = c.apply_block(p)?;
    let h = p.tr_mul(&cp);
    let spread = t.max() - t.min();
    let gap_tol = CORRECTION_GAP_REL * spread;

    let mut values: Vec<f64> = (0..m).map(|i| t[i] + h[(i, i)]).collect();
    let mut coef = DMatrix::<f64>::identity(m, m);
    let mut skipped = 0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let gap = t[i] - t[j];
            if gap.abs() <= gap_tol {
                skipped += 1;
                continue;
            }
            coef[(j, i)] = 0.5 * (h[(j, i)] + h[(i, j)]) / gap;
        }
    }
    let mut vectors = p * coef;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        col /= norm;
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let sorted =
        DMatrix::from_columns(&order.iter().map(|&i| vectors.column(i)).collect::<Vec<_>>());
    values = order.iter().map(|&i| values[i]).collect();
    Ok(Correction {
        values: DVector::from_vec(values),
        vectors: if m == 0 { vectors } else { sorted },
        skipped,
    })
}

/// `Delta L - rho v v^T`, stored on the union of the supports of both terms.
pub fn proxy_remainder(
    delta: &SymmetricMatrix,
    rho: f64,
    v: &DVector<f64>,
) -> Result<SymmetricMatrix> {
    let n = delta.n();
    let mut support = delta.support();
    support.extend((0..n).filter(|&i| v[i] != 0.0));
    support.sort_unstable();
    support.dedup();
    let mut entries = Vec::new();
    for (a, &i) in support.iter().enumerate() {
        for &j in &support[a..] {
            entries.push((i, j, delta.get(i, j) - rho * v[i] * v[j]));
        }
    }
    SymmetricMatrix::from_triplets(n, entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionResult {
    /// Dominant eigenpair of `Delta L`; zero and empty when `Delta L = 0`.
    pub rho: f64,
    pub v: DVector<f64>,
    pub power_iterations: usize,
    /// Rank-one update output `(t~, P~)`.
    pub uncorrected_values: DVector<f64>,
    pub uncorrected_vectors: DMatrix<f64>,
    /// `(t^, P^)` when correction was requested.
    pub corrected: Option<Correction>,
    /// `|C|_F` with `C = Delta L - rho v v^T`, when correction was requested.
    pub correction_matrix_norm: Option<f64>,
    pub gram_defect: f64,
    /// The update diagnostics, absent for a disconnected insertion.
    pub update: Option<UpdateResult>,
    /// `Delta L` vanished, so the input pairs were returned unchanged.
    pub disconnected: bool,
}

/// Updates the lifted eigenpairs `eig` of `pair.l0_aug` to estimates for
/// `pair.l1`, optionally with perturbation correction.
pub fn extend(
    eig: &PartialEigen,
    pair: &LaplacianPair,
    cfg: &TruncationConfig,
    correct: bool,
) -> Result<ExtensionResult> {
    let n = pair.l0_aug.n();
    if eig.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: eig.n(),
        });
    }
    let power = match top_eigenpair_power(&pair.delta, POWER_TOL, POWER_MAX_ITERS, None) {
        Err(Error::ZeroMatrix) => {
            let corrected = correct.then(|| Correction {
                values: eig.values().clone(),
                vectors: eig.vectors().clone(),
                skipped: 0,
            });
            return Ok(ExtensionResult {
                rho: 0.0,
                v: DVector::zeros(n),
                power_iterations: 0,
                uncorrected_values: eig.values().clone(),
                uncorrected_vectors: eig.vectors().clone(),
                corrected,
                correction_matrix_norm: correct.then_some(0.0),
                gram_defect: gram_defect(eig.vectors()),
                update: None,
                disconnected: true,
            });
        }
        other => other?,
    };
    let upd = RankOneUpdate::new(power.rho, power.v.clone())?;
    let res = rank_one_update(eig, &upd, cfg, Some(&pair.l0_aug), false)?;
    let (corrected, cnorm) = if correct {
        let c = proxy_remainder(&pair.delta, power.rho, upd.v())?;
        let fixed = perturbation_correct(&c, &res.values, &res.vectors)?;
        (Some(fixed), Some(c.frobenius_norm()))
    } else {
        (None, None)
    };
    Ok(ExtensionResult {
        rho: power.rho,
        v: upd.v().clone(),
        power_iterations: power.iterations,
        uncorrected_values: res.values.clone(),
        uncorrected_vectors: res.vectors.clone(),
        corrected,
        correction_matrix_norm: cnorm,
        gram_defect: res.gram_defect,
        update: Some(res),
        disconnected: false,
    })
}
