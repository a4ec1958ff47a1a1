//! Matrix storage and the elementary operations shared by the update,
//! graph and experiment modules.
//!
//! Everything is `f64`. Dense vectors and `n x m` blocks use nalgebra;
//! symmetric operators use [`SymmetricMatrix`], which is either a dense
//! square matrix or a compressed-row store of the upper triangle.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`SymmetricMatrix::from_dense`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Orthonormality accepted by [`PartialEigen::new`], per column.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(DMatrix<f64>),
    /// Upper triangle (including the diagonal) in compressed rows.
    /// Column indices are strictly increasing within a row.
    Upper {
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
}

/// A real symmetric `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    storage: Storage,
}

impl SymmetricMatrix {
    /// Wraps a dense matrix, rejecting asymmetry above
    /// `SYMMETRY_TOL * max|a_ij|`. The stored matrix is the symmetric part.
    pub fn from_dense(a: DMatrix<f64>) -> Result<Self> {
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
        let scale = a.amax();
        let mut worst = (0, 0, 0.0);
        for j in 0..n {
            for i in 0..j {
                let d = (a[(i, j)] - a[(j, i)]).abs();
                if d > worst.2 {
                    worst = (i, j, d);
                }
            }
        }
        if worst.2 > SYMMETRY_TOL * scale {
            return Err(Error::Asymmetric {
                row: worst.0,
                col: worst.1,
                defect: worst.2,
            });
        }
        let sym = (&a + a.transpose()) * 0.5;
        Ok(Self {
            n,
            storage: Storage::Dense(sym),
        })
    }

    /// Builds a sparse matrix from `(i, j, value)` entries. Entries below the
    /// diagonal are mirrored into the upper triangle and duplicates are summed,
    /// so each off-diagonal pair should be given once.
    pub fn from_triplets<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut upper: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfBounds { row: i, col: j, n });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("matrix entry"));
            }
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            upper.push((r, c, v));
        }
        upper.sort_by_key(|e| (e.0, e.1));

        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(upper.len());
        let mut vals: Vec<f64> = Vec::with_capacity(upper.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in upper {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = Self {
            n,
            storage: Storage::Upper {
                row_ptr,
                cols,
                vals,
            },
        };
        m.drop_zeros();
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, diag.iter().enumerate().map(|(i, &d)| (i, i, d)))
            .expect("diagonal entries are in bounds")
    }

    fn drop_zeros(&mut self) {
        if let Storage::Upper {
            row_ptr,
            cols,
            vals,
        } = &mut self.storage
        {
            let mut new_ptr = vec![0usize; row_ptr.len()];
            let mut w = 0;
            for r in 0..row_ptr.len() - 1 {
                for k in row_ptr[r]..row_ptr[r + 1] {
                    if vals[k] != 0.0 {
                        cols[w] = cols[k];
                        vals[w] = vals[k];
                        w += 1;
                    }
                }
                new_ptr[r + 1] = w;
            }
            cols.truncate(w);
            vals.truncate(w);
            *row_ptr = new_ptr;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Upper { .. })
    }

    /// Nonzeros in the upper triangle, diagonal included.
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(a) => (0..self.n)
                .map(|j| (0..=j).filter(|&i| a[(i, j)] != 0.0).count())
                .sum(),
            Storage::Upper { vals, .. } => vals.len(),
        }
    }

    /// Nonzeros of the full mirrored matrix.
    pub fn nnz_full(&self) -> usize {
        self.upper_entries()
            .iter()
            .map(|&(i, j, _)| if i == j { 1 } else { 2 })
            .sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index out of bounds");
        match &self.storage {
            Storage::Dense(a) => a[(i, j)],
            Storage::Upper {
                row_ptr,
                cols,
                vals,
            } => {
                let (r, c) = if i <= j { (i, j) } else { (j, i) };
                let row = &cols[row_ptr[r]..row_ptr[r + 1]];
                match row.binary_search(&c) {
                    Ok(k) => vals[row_ptr[r] + k],
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Upper-triangle nonzeros as `(i, j, value)` with `i <= j`, row-major.
    pub fn upper_entries(&self) -> Vec<(usize, usize, f64)> {
        match &self.storage {
            Storage::Dense(a) => {
                let mut out = Vec::new();
                for i in 0..self.n {
                    for j in i..self.n {
                        if a[(i, j)] != 0.0 {
                            out.push((i, j, a[(i, j)]));
                        }
                    }
                }
                out
            }
            Storage::Upper {
                row_ptr,
                cols,
                vals,
            } => {
                let mut out = Vec::with_capacity(vals.len());
                for r in 0..self.n {
                    for k in row_ptr[r]..row_ptr[r + 1] {
                        out.push((r, cols[k], vals[k]));
                    }
                }
                out
            }
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| self.get(i, i))
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a.norm(),
            Storage::Upper { .. } => self
                .upper_entries()
                .iter()
                .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a.amax(),
            Storage::Upper { vals, .. } => vals.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// The explicitly mirrored dense form.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Upper { .. } => {
                let mut a = DMatrix::zeros(self.n, self.n);
                for (i, j, v) in self.upper_entries() {
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
                a
            }
        }
    }

    /// Dense principal submatrix on `indices` (in the given order).
    pub fn principal_submatrix(&self, indices: &[usize]) -> DMatrix<f64> {
        let k = indices.len();
        match &self.storage {
            Storage::Dense(a) => DMatrix::from_fn(k, k, |r, c| a[(indices[r], indices[c])]),
            Storage::Upper { .. } => {
                let mut pos = vec![usize::MAX; self.n];
                for (p, &i) in indices.iter().enumerate() {
                    pos[i] = p;
                }
                let mut out = DMatrix::zeros(k, k);
                for (i, j, v) in self.upper_entries() {
                    let (pi, pj) = (pos[i], pos[j]);
                    if pi != usize::MAX && pj != usize::MAX {
                        out[(pi, pj)] = v;
                        out[(pj, pi)] = v;
                    }
                }
                out
            }
        }
    }

    /// Indices of rows holding at least one nonzero.
    pub fn support(&self) -> Vec<usize> {
        let mut hit = vec![false; self.n];
        for (i, j, _) in self.upper_entries() {
            hit[i] = true;
            hit[j] = true;
        }
        (0..self.n).filter(|&i| hit[i]).collect()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x.len())?;
        let mut y = DVector::zeros(self.n);
        self.matvec_into(x.as_slice(), y.as_mut_slice());
        Ok(y)
    }

    fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        match &self.storage {
            Storage::Dense(a) => {
                for (j, col) in a.column_iter().enumerate() {
                    let xj = x[j];
                    if xj != 0.0 {
                        for (yi, aij) in y.iter_mut().zip(col.iter()) {
                            *yi += aij * xj;
                        }
                    }
                }
            }
            Storage::Upper {
                row_ptr,
                cols,
                vals,
            } => {
                for r in 0..self.n {
                    let xr = x[r];
                    let mut acc = 0.0;
                    for k in row_ptr[r]..row_ptr[r + 1] {
                        let c = cols[k];
                        let v = vals[k];
                        acc += v * x[c];
                        if c != r {
                            y[c] += v * xr;
                        }
                    }
                    y[r] += acc;
                }
            }
        }
    }

    /// `A P` for an `n x m` block.
    pub fn apply_block(&self, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_len(p.nrows())?;
        let mut out = DMatrix::zeros(self.n, p.ncols());
        for j in 0..p.ncols() {
            let col: Vec<f64> = p.column(j).iter().copied().collect();
            let mut y = vec![0.0; self.n];
            self.matvec_into(&col, &mut y);
            out.column_mut(j).copy_from_slice(&y);
        }
        Ok(out)
    }

    /// Sparse difference `self - other`.
    pub fn sub(&self, other: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        self.check_len(other.n)?;
        let entries = self.upper_entries().into_iter().chain(
            other
                .upper_entries()
                .into_iter()
                .map(|(i, j, v)| (i, j, -v)),
        );
        SymmetricMatrix::from_triplets(self.n, entries)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }
}

/// The `m` known leading eigenpairs of an `n x n` symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialEigen {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    trace_hint: Option<f64>,
}

impl PartialEigen {
    /// Checks that `values` is non-increasing, that its length matches the
    /// number of columns of `vectors`, and that the columns are orthonormal
    /// to within `ORTHONORMAL_TOL * m` in Frobenius norm.
    pub fn new(
        values: DVector<f64>,
        vectors: DMatrix<f64>,
        trace_hint: Option<f64>,
    ) -> Result<Self> {
        let m = values.len();
        if vectors.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: vectors.ncols(),
            });
        }
        if m == 0 {
            return Err(Error::InvalidParameter(
                "at least one eigenpair is required".into(),
            ));
        }
        if m > vectors.nrows() {
            return Err(Error::DimensionMismatch {
                expected: vectors.nrows(),
                found: m,
            });
        }
        if values.iter().chain(vectors.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("eigenpair"));
        }
        if let Some(i) = (1..m).find(|&i| values[i] > values[i - 1]) {
            return Err(Error::NotDescending(i));
        }
        let defect = gram_defect(&vectors);
        if defect > ORTHONORMAL_TOL * m as f64 {
            return Err(Error::NotOrthonormal { defect });
        }
        Ok(Self {
            values,
            vectors,
            trace_hint,
        })
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn trace_hint(&self) -> Option<f64> {
        self.trace_hint
    }

    pub fn with_trace(mut self, trace: f64) -> Self {
        self.trace_hint = Some(trace);
        self
    }

    /// Keeps the leading `m` pairs.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m() {
            return Err(Error::InvalidParameter(format!(
                "cannot keep {m} of {} pairs",
                self.m()
            )));
        }
        Ok(Self {
            values: self.values.rows(0, m).into_owned(),
            vectors: self.vectors.columns(0, m).into_owned(),
            trace_hint: self.trace_hint,
        })
    }
}

/// A perturbation `rho v v^T` with `||v|| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneUpdate {
    rho: f64,
    v: DVector<f64>,
}

impl RankOneUpdate {
    /// Normalizes `v` and rescales `rho` so that `rho v v^T` is unchanged.
    pub fn new(rho: f64, v: DVector<f64>) -> Result<Self> {
        if !rho.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rank-one update"));
        }
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            rho: rho * norm * norm,
            v: v / norm,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }
}

/// `r = v - Q Q^T v`, the part of `v` outside the span of the columns of `Q`.
pub fn project_residual(q: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let z = coefficients_z(q, v)?;
    Ok(v - q * z)
}

/// `z = Q^T v`.
pub fn coefficients_z(q: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if q.nrows() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: q.nrows(),
            found: v.len(),
        });
    }
    Ok(q.tr_mul(v))
}

/// `||P^T P - I||_F`.
pub fn gram_defect(p: &DMatrix<f64>) -> f64 {
    let mut g = p.tr_mul(p);
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    g.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, density: f64, seed: u64) -> SymmetricMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                if rng.random::<f64>() < density {
                    entries.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        SymmetricMatrix::from_triplets(n, entries).unwrap()
    }

    #[test]
    fn identity_matvec() {
        let a = SymmetricMatrix::identity(3);
        let y = a.matvec(&DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagonal_matvec() {
        let a = SymmetricMatrix::from_diagonal(&[1.0, 0.0]);
        let y = a.matvec(&DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn sparse_matvec_matches_mirrored_dense() {
        let a = random_sparse(8, 0.4, 7);
        let dense = a.to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let diff = a.matvec(&x).unwrap() - &dense * &x;
        assert!(diff.norm() <= 1e-12);
    }

    #[test]
    fn matvec_rejects_wrong_length() {
        let a = SymmetricMatrix::identity(3);
        let err = a.matvec(&DVector::zeros(2)).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 3,
                found: 2
            }
        );
    }

    #[test]
    fn dense_rejects_asymmetry() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-6, 1.0]);
        assert!(matches!(
            SymmetricMatrix::from_dense(a),
            Err(Error::Asymmetric { .. })
        ));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-14, 1.0]);
        assert!(SymmetricMatrix::from_dense(b).is_ok());
    }

    #[test]
    fn triplets_mirror_and_sum_duplicates() {
        let a =
            SymmetricMatrix::from_triplets(3, vec![(2, 0, 1.0), (0, 2, 0.5), (1, 1, 2.0)]).unwrap();
        assert_eq!(a.get(0, 2), 1.5);
        assert_eq!(a.get(2, 0), 1.5);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.nnz_full(), 3);
        assert_eq!(a.trace(), 2.0);
        assert!(SymmetricMatrix::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn sub_cancels_to_empty() {
        let a = random_sparse(6, 0.5, 3);
        let d = a.sub(&a).unwrap();
        assert_eq!(d.nnz(), 0);
        assert!(d.support().is_empty());
    }

    #[test]
    fn trace_and_norms_agree_between_storages() {
        let a = random_sparse(10, 0.3, 11);
        let d = SymmetricMatrix::from_dense(a.to_dense()).unwrap();
        assert!((a.trace() - d.trace()).abs() < 1e-14);
        assert!((a.frobenius_norm() - d.frobenius_norm()).abs() < 1e-12);
        assert_eq!(a.nnz(), d.nnz());
        assert_eq!(a.upper_entries(), d.upper_entries());
    }

    #[test]
    fn residual_examples() {
        let q = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let r = project_residual(&q, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(r.norm(), 0.0);
        let h = 0.5f64.sqrt();
        let r = project_residual(&q, &DVector::from_vec(vec![h, h])).unwrap();
        assert!(r[0].abs() < 1e-16 && (r[1] - h).abs() < 1e-16);
    }

    #[test]
    fn coefficient_examples() {
        let q = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let z = coefficients_z(&q, &DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 0.0]);
        let q1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let h = 0.5f64.sqrt();
        let z = coefficients_z(&q1, &DVector::from_vec(vec![h, h])).unwrap();
        assert!((z[0] - h).abs() < 1e-16);
        assert!(coefficients_z(&q1, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn rank_one_update_normalizes() {
        let u = RankOneUpdate::new(2.0, DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert!((u.v().norm() - 1.0).abs() < 1e-15);
        assert!((u.rho() - 50.0).abs() < 1e-12);
        assert_eq!(
            RankOneUpdate::new(1.0, DVector::zeros(2)).unwrap_err(),
            Error::ZeroVector
        );
    }

    #[test]
    fn partial_eigen_validation() {
        let q = DMatrix::<f64>::identity(3, 2);
        assert!(PartialEigen::new(DVector::from_vec(vec![2.0, 1.0]), q.clone(), None).is_ok());
        assert_eq!(
            PartialEigen::new(DVector::from_vec(vec![1.0, 2.0]), q.clone(), None).unwrap_err(),
            Error::NotDescending(1)
        );
        let mut bad = q.clone();
        bad[(0, 1)] = 0.1;
        assert!(matches!(
            PartialEigen::new(DVector::from_vec(vec![2.0, 1.0]), bad, None),
            Err(Error::NotOrthonormal { .. })
        ));
    }
}
