//! Truncated eigenvector formulas.
//!
//! For an updated eigenvalue `t_i` the exact eigenvector of
//! `A + rho v v^T` is proportional to `(A - t_i)^{-1} v`. Only the known part
//! of that resolvent is available; the unknown part acting on
//! `r = v - Q Q^T v` is replaced by its expansion around `mu`:
//!
//! ```text
//! naive:  p_i = Q (Lambda - t_i)^{-1} z
//! first:  p_i = naive + r / (mu - t_i)
//! second: p_i = naive + (1 / (mu - t_i) + mu / (mu - t_i)^2) r - A r / (mu - t_i)^2
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{coefficients_z, PartialEigen, SymmetricMatrix};

/// Relative distance below which an updated value counts as sitting on a
/// pole of the formula.
pub const POLE_COLLISION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigvecFormula {
    Naive,
    FirstOrder,
    SecondOrder,
}

/// Normalized estimates of the eigenvectors belonging to the updated values
/// `t`, one column per value, each flipped so that its largest-magnitude
/// entry is positive.
pub fn eigvec_estimate(
    eig: &PartialEigen,
    v: &DVector<f64>,
    t: &DVector<f64>,
    mu: f64,
    variant: EigvecFormula,
    a: Option<&SymmetricMatrix>,
) -> Result<DMatrix<f64>> {
    normalize_columns(eigvec_unnormalized(eig, v, t, mu, variant, a)?)
}

/// The formulas without normalization or sign fixing.
pub fn eigvec_unnormalized(
    eig: &PartialEigen,
    v: &DVector<f64>,
    t: &DVector<f64>,
    mu: f64,
    variant: EigvecFormula,
    a: Option<&SymmetricMatrix>,
) -> Result<DMatrix<f64>> {
    let q = eig.vectors();
    let z = coefficients_z(q, v)?;
    let r = v - q * &z;
    let ar = match variant {
        EigvecFormula::SecondOrder => Some(a.ok_or(Error::MissingMatrix)?.matvec(&r)?),
        _ => None,
    };
    truncated_vectors(
        q,
        eig.values().as_slice(),
        &z,
        &r,
        ar.as_ref(),
        t.as_slice(),
        mu,
        variant,
    )
}

/// The formulas for an explicit known block: columns `q` with values
/// `lambdas` and coefficients `z`, residual `r` and, for the second-order
/// variant, `A r`. Returns unnormalized columns, one per entry of `t`.
#[allow(clippy::too_many_arguments)]
pub fn truncated_vectors(
    q: &DMatrix<f64>,
    lambdas: &[f64],
    z: &DVector<f64>,
    r: &DVector<f64>,
    ar: Option<&DVector<f64>>,
    t: &[f64],
    mu: f64,
    variant: EigvecFormula,
) -> Result<DMatrix<f64>> {
    let m = lambdas.len();
    if q.ncols() != m || z.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: q.ncols().min(z.len()),
        });
    }
    if r.len() != q.nrows() {
        return Err(Error::DimensionMismatch {
            expected: q.nrows(),
            found: r.len(),
        });
    }
    if variant == EigvecFormula::SecondOrder && ar.is_none() {
        return Err(Error::MissingMatrix);
    }
    let scale = lambdas
        .iter()
        .chain(t)
        .chain(std::iter::once(&mu))
        .fold(0.0f64, |s, x| s.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = POLE_COLLISION_TOL * scale;
    let uses_tail = variant != EigvecFormula::Naive;

    let k = t.len();
    let mut coeffs = DMatrix::zeros(m, k);
    let mut r_coef = vec![0.0; k];
    let mut ar_coef = vec![0.0; k];
    for (i, &ti) in t.iter().enumerate() {
        for j in 0..m {
            let d = lambdas[j] - ti;
            if d.abs() < tol {
                return Err(Error::PoleCollision {
                    index: i,
                    distance: d.abs(),
                });
            }
            coeffs[(j, i)] = z[j] / d;
        }
        if uses_tail {
            let dm = mu - ti;
            if dm.abs() < tol {
                return Err(Error::PoleCollision {
                    index: i,
                    distance: dm.abs(),
                });
            }
            r_coef[i] = 1.0 / dm;
            if variant == EigvecFormula::SecondOrder {
                r_coef[i] += mu / (dm * dm);
                ar_coef[i] = -1.0 / (dm * dm);
            }
        }
    }
    let mut p = q * coeffs;
    if uses_tail {
        for i in 0..k {
            let mut col = p.column_mut(i);
            col.axpy(r_coef[i], r, 1.0);
            if let Some(ar) = ar {
                col.axpy(ar_coef[i], ar, 1.0);
            }
        }
    }
    Ok(p)
}

/// Scales each column to unit norm and flips it so that its entry of
/// largest magnitude (first such entry on ties) is positive.
pub fn normalize_columns(mut p: DMatrix<f64>) -> Result<DMatrix<f64>> {
    for mut col in p.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        let mut lead = 0.0f64;
        for &x in col.iter() {
            if x.abs() > lead.abs() {
                lead = x;
            }
        }
        col /= if lead < 0.0 { -norm } else { norm };
    }
    Ok(p)
}
