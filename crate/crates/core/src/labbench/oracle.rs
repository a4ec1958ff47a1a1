//! Reference eigensolvers used to check the fast paths.
//!
//! [`jacobi_eigh`] is a cyclic Jacobi solver with no code shared with the
//! update. [`full_secular_top`] solves the complete secular equation of
//! `diag(lambda) + rho z z^T` by bisection; it gives the exact leading
//! eigenpairs of a rank-one update whose full spectrum is known, at `O(n)`
//! cost per evaluation. [`dense_eigh`] wraps nalgebra's symmetric solver and
//! is used where Jacobi would be too slow.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Sweep limit for [`jacobi_eigh`].
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// A full eigendecomposition, values descending.
#[derive(Debug, Clone, PartialEq)]
pub struct FullEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl FullEigen {
    fn sorted(values: DVector<f64>, vectors: DMatrix<f64>) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
        Self {
            values: DVector::from_iterator(n, order.iter().map(|&i| values[i])),
            vectors: DMatrix::from_columns(
                &order.iter().map(|&i| vectors.column(i)).collect::<Vec<_>>(),
            ),
        }
    }

    /// The leading `m` pairs.
    pub fn leading(&self, m: usize) -> (DVector<f64>, DMatrix<f64>) {
        (
            self.values.rows(0, m).into_owned(),
            self.vectors.columns(0, m).into_owned(),
        )
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn oracle_eigh(a: &SymmetricMatrix) -> Result<FullEigen> {
    jacobi_eigh(&a.to_dense())
}

/// Cyclic Jacobi on a dense symmetric matrix (only the symmetric part is
/// used). Sweeps continue until the off-diagonal mass is below
/// `1e-15 |A|_F` or no rotation changes the matrix.
pub fn jacobi_eigh(a: &DMatrix<f64>) -> Result<FullEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix entry"));
    }
    // Row-major working copy of the symmetric part.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = 1e-15 * norm;

    let mut converged = n < 2 || norm == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NonConvergence { sweeps });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = w[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = w[p * n + p];
                let aqq = w[q * n + q];
                // Skip entries that are negligible next to both diagonals.
                let small = 100.0 * apq.abs();
                if app.abs() + small == app.abs() && aqq.abs() + small == aqq.abs() && sweeps > 4 {
                    w[p * n + q] = 0.0;
                    w[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                if s == 0.0 {
                    continue;
                }
                rotated = true;
                for k in 0..n {
                    let akp = w[k * n + p];
                    let akq = w[k * n + q];
                    w[k * n + p] = c * akp - s * akq;
                    w[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = w[p * n + k];
                    let aqk = w[q * n + k];
                    w[p * n + k] = c * apk - s * aqk;
                    w[q * n + k] = s * apk + c * aqk;
                }
                w[p * n + q] = 0.0;
                w[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += w[i * n + j] * w[i * n + j];
                }
            }
        }
        converged = off.sqrt() <= target || !rotated;
    }
    let values = DVector::from_iterator(n, (0..n).map(|i| w[i * n + i]));
    let vectors = DMatrix::from_row_slice(n, n, &v);
    Ok(FullEigen::sorted(values, vectors))
}

/// nalgebra's symmetric eigensolver, values sorted descending.
pub fn dense_eigh(a: &SymmetricMatrix) -> FullEigen {
    let e = SymmetricEigen::new(a.to_dense());
    FullEigen::sorted(e.eigenvalues, e.eigenvectors)
}

/// Eigenvalues only, descending, from nalgebra's symmetric solver.
pub fn dense_eigenvalues(a: DMatrix<f64>) -> DVector<f64> {
    let mut values: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    DVector::from_vec(values)
}

/// The `k` largest eigenvalues of `diag(lambdas) + rho z z^T` and the
/// corresponding unit eigenvectors expressed in the eigenbasis of the
/// diagonal part (so the eigenvectors of `Q diag(lambdas) Q^T + rho v v^T`
/// with `z = Q^T v` are `Q y`).
///
/// `lambdas` must be strictly descending, every `z_i` nonzero and `rho > 0`.
/// Roots are found by bisection on the full secular equation, evaluated in
/// coordinates centred on the nearer pole.
pub fn full_secular_top(
    lambdas: &[f64],
    z: &[f64],
    rho: f64,
    k: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = lambdas.len();
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: z.len(),
        });
    }
    if !(rho > 0.0) || k > n || k == 0 {
        return Err(Error::InvalidParameter(
            "full secular oracle needs rho > 0 and 1 <= k <= n".into(),
        ));
    }
    if let Some(i) = (1..n).find(|&i| lambdas[i] >= lambdas[i - 1]) {
        return Err(Error::NotDescending(i));
    }
    if z.contains(&0.0) {
        return Err(Error::InvalidParameter("zero coupling coefficient".into()));
    }
    let z2: Vec<f64> = z.iter().map(|x| x * x).collect();
    let znorm2: f64 = z2.iter().sum();
    let mut values = Vec::with_capacity(k);
    let mut vectors = DMatrix::zeros(n, k);
    for i in 0..k {
        let lo = lambdas[i];
        let hi = if i == 0 {
            lambdas[0] + rho * znorm2
        } else {
            lambdas[i - 1]
        };
        // f(origin + tau) with shifted pole differences.
        let f = |origin: f64, tau: f64| -> f64 {
            let mut s = 0.0;
            for (l, w) in lambdas.iter().zip(&z2) {
                s += w / ((l - origin) - tau);
            }
            1.0 + rho * s
        };
        let mid = 0.5 * (lo + hi);
        let fm = f(mid, 0.0);
        // f increases on (lo, hi); a positive midpoint puts the root below.
        let origin = if fm > 0.0 || i == 0 { lo } else { hi };
        let (mut a, mut b) = if fm > 0.0 {
            (0.0, mid - origin)
        } else {
            (mid - origin, hi - origin)
        };
        if fm == 0.0 {
            a = mid - origin;
            b = a;
        }
        for _ in 0..2000 {
            let c = 0.5 * (a + b);
            if c <= a || c >= b {
                break;
            }
            if f(origin, c) > 0.0 {
                b = c;
            } else {
                a = c;
            }
        }
        let tau = 0.5 * (a + b);
        let mut y = DVector::from_iterator(
            n,
            lambdas
                .iter()
                .zip(z)
                .map(|(l, zj)| zj / ((l - origin) - tau)),
        );
        y /= y.norm();
        values.push(origin + tau);
        vectors.set_column(i, &y);
    }
    Ok((DVector::from_vec(values), vectors))
}
