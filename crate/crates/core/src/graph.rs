//! Similarity graphs, the symmetric normalized Laplacian
//! `L = D^{-1/2} W D^{-1/2}`, and the Laplacian change caused by inserting
//! one new point.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Points as rows of an `n x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
    ids: Vec<usize>,
}

impl PointCloud {
    /// Rows are numbered `0..n` as their ids.
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        let ids = (0..points.nrows()).collect();
        Self::with_ids(points, ids)
    }

    pub fn with_ids(points: DMatrix<f64>, ids: Vec<usize>) -> Result<Self> {
        if ids.len() != points.nrows() {
            return Err(Error::DimensionMismatch {
                expected: points.nrows(),
                found: ids.len(),
            });
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("point coordinate"));
        }
        Ok(Self { points, ids })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let points = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(points)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// A new cloud with `x0` as row 0 and the existing points after it. The
    /// new point gets id `usize::MAX`.
    pub fn with_point_prepended(&self, x0: &[f64]) -> Result<Self> {
        if x0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x0.len(),
            });
        }
        let n = self.n();
        let points = DMatrix::from_fn(n + 1, self.dim(), |i, j| {
            if i == 0 {
                x0[j]
            } else {
                self.points[(i - 1, j)]
            }
        });
        let ids = std::iter::once(usize::MAX)
            .chain(self.ids.iter().copied())
            .collect();
        Self::with_ids(points, ids)
    }

    /// `|x_i - x_j|^2`, accumulated in coordinate order.
    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        let mut s = 0.0;
        for c in 0..self.dim() {
            let d = self.points[(i, c)] - self.points[(j, c)];
            s += d * d;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborRule {
    /// `i ~ j` when either is among the `k` nearest neighbours of the other.
    Knn(usize),
    /// `i ~ j` when `|x_i - x_j| <= delta`.
    Delta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `exp(-|x_i - x_j|^2 / epsilon)`.
    Gaussian { epsilon: f64 },
}

impl Kernel {
    pub fn weight(&self, squared_distance: f64) -> f64 {
        match *self {
            Kernel::Gaussian { epsilon } => (-squared_distance / epsilon).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphConfig {
    pub rule: NeighborRule,
    pub kernel: Kernel,
    /// Adds `w_ii = 1` (the kernel at distance zero).
    pub self_loops: bool,
}

impl GraphConfig {
    pub fn knn(k: usize, epsilon: f64) -> Self {
        Self {
            rule: NeighborRule::Knn(k),
            kernel: Kernel::Gaussian { epsilon },
            self_loops: true,
        }
    }

    pub fn delta(delta: f64, epsilon: f64) -> Self {
        Self {
            rule: NeighborRule::Delta(delta),
            kernel: Kernel::Gaussian { epsilon },
            self_loops: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.rule {
            NeighborRule::Knn(0) => {
                return Err(Error::InvalidParameter("k must be at least 1".into()));
            }
            NeighborRule::Delta(d) if !(d > 0.0 && d.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "delta must be positive, got {d}"
                )));
            }
            _ => {}
        }
        let Kernel::Gaussian { epsilon } = self.kernel;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(())
    }
}

/// Neighbour lists (sorted, without `i` itself) under `rule`, before
/// symmetrization.
fn neighbor_lists(pc: &PointCloud, rule: NeighborRule) -> Vec<Vec<usize>> {
    let n = pc.n();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (pc.squared_distance(i, j), j))
                .collect();
            let mut out: Vec<usize> = match rule {
                NeighborRule::Knn(k) => {
                    let by = |a: &(f64, usize), b: &(f64, usize)| {
                        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
                    };
                    if k < cand.len() {
                        cand.select_nth_unstable_by(k - 1, by);
                        cand.truncate(k);
                    }
                    cand.into_iter().map(|(_, j)| j).collect()
                }
                NeighborRule::Delta(delta) => cand
                    .into_iter()
                    .filter(|&(d2, _)| d2 <= delta * delta)
                    .map(|(_, j)| j)
                    .collect(),
            };
            out.sort_unstable();
            out
        })
        .collect()
}

/// Squared distance from each point to its `k`-th nearest other point.
pub fn kth_neighbor_sq_distances(pc: &PointCloud, k: usize) -> Result<Vec<f64>> {
    let n = pc.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must lie in 1..{n}, got {k}"
        )));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| pc.squared_distance(i, j))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect())
}

/// Kernel width `factor * mean_i d_k(x_i)^2`, scaling the Gaussian to the
/// typical squared distance of a `k`-th neighbour.
pub fn knn_epsilon(pc: &PointCloud, k: usize, factor: f64) -> Result<f64> {
    let d = kth_neighbor_sq_distances(pc, k)?;
    Ok(factor * d.iter().sum::<f64>() / d.len() as f64)
}

/// The weight matrix `W` of the similarity graph on `pc`.
pub fn build_weights(pc: &PointCloud, cfg: &GraphConfig) -> Result<SymmetricMatrix> {
    cfg.validate()?;
    let n = pc.n();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "a graph needs at least two points".into(),
        ));
    }
    let lists = neighbor_lists(pc, cfg.rule);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let mut entries: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .map(|(i, j)| (i, j, cfg.kernel.weight(pc.squared_distance(i, j))))
        .collect();
    if cfg.self_loops {
        entries.extend((0..n).map(|i| (i, i, cfg.kernel.weight(0.0))));
    }
    let w = SymmetricMatrix::from_triplets(n, entries)?;
    if !cfg.self_loops {
        let deg = degrees(&w);
        if let Some(i) = deg.iter().position(|&d| d == 0.0) {
            return Err(Error::IsolatedVertexWithoutSelfLoop(i));
        }
    }
    Ok(w)
}

/// Row sums of a symmetric matrix, accumulated in storage order.
pub fn degrees(w: &SymmetricMatrix) -> Vec<f64> {
    let mut d = vec![0.0; w.n()];
    for (i, j, x) in w.upper_entries() {
        d[i] += x;
        if i != j {
            d[j] += x;
        }
    }
    d
}

/// `L = D^{-1/2} W D^{-1/2}`.
pub fn laplacian_sym(w: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let d = degrees(w);
    if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::ZeroDegree(i));
    }
    SymmetricMatrix::from_triplets(
        w.n(),
        w.upper_entries()
            .into_iter()
            .map(|(i, j, x)| (i, j, x / (d[i] * d[j]).sqrt())),
    )
}

/// Laplacians before and after inserting a point at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPair {
    /// The `n`-point Laplacian with the new point added as an isolated
    /// vertex (row and column 0 equal to `e_0`).
    pub l0_aug: SymmetricMatrix,
    /// The `(n+1)`-point Laplacian.
    pub l1: SymmetricMatrix,
    /// `L1 - L0_aug`.
    pub delta: SymmetricMatrix,
    /// Vertices whose incident weights changed, including the new vertex
    /// when it connects to anything. With the kNN rule this can include
    /// vertices that lost a neighbour to the new point. Every nonzero of
    /// `delta` lies in a row or column listed here.
    pub affected: Vec<usize>,
}

/// Embeds an `n x n` matrix at indices `1..=n` with a unit entry at (0, 0).
pub fn augment_isolated(l0: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let entries = l0.upper_entries();
    SymmetricMatrix::from_triplets(
        l0.n() + 1,
        std::iter::once((0, 0, 1.0)).chain(entries.into_iter().map(|(i, j, x)| (i + 1, j + 1, x))),
    )
}

/// Builds `L0_aug`, `L1` and `Delta L` for inserting `x0` into `pc`.
pub fn augment_and_delta(pc: &PointCloud, x0: &[f64], cfg: &GraphConfig) -> Result<LaplacianPair> {
    let w0 = build_weights(pc, cfg)?;
    let l0 = laplacian_sym(&w0)?;
    augment_and_delta_with(pc, &w0, &l0, x0, cfg)
}

/// As [`augment_and_delta`] with the `n`-point weights and Laplacian
/// supplied, for repeated insertions into the same cloud.
pub fn augment_and_delta_with(
    pc: &PointCloud,
    w0: &SymmetricMatrix,
    l0: &SymmetricMatrix,
    x0: &[f64],
    cfg: &GraphConfig,
) -> Result<LaplacianPair> {
    if w0.n() != pc.n() || l0.n() != pc.n() {
        return Err(Error::DimensionMismatch {
            expected: pc.n(),
            found: w0.n().min(l0.n()),
        });
    }
    let aug = pc.with_point_prepended(x0)?;
    let w1 = build_weights(&aug, cfg)?;
    let l1 = laplacian_sym(&w1)?;
    let l0_aug = augment_isolated(l0)?;
    let w0_aug = augment_isolated(w0)?;
    let dw = w1.sub(&w0_aug)?;
    let mut affected: Vec<usize> = Vec::new();
    for (i, j, _) in dw.upper_entries() {
        affected.push(i);
        affected.push(j);
    }
    affected.sort_unstable();
    affected.dedup();
    let delta = l1.sub(&l0_aug)?;
    Ok(LaplacianPair {
        l0_aug,
        l1,
        delta,
        affected,
    })
}

/// Dominant eigenpair found by the power method.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    /// Rayleigh quotient; its magnitude is the largest eigenvalue magnitude.
    pub rho: f64,
    pub v: DVector<f64>,
    pub iterations: usize,
}

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 1000;

/// Power iteration for the eigenvalue of largest magnitude. Stops when
/// `|M v - rho v| <= tol |M|_F`. The default start is `e_0`.
pub fn top_eigenpair_power(
    m: &SymmetricMatrix,
    tol: f64,
    max_iters: usize,
    seed: Option<&DVector<f64>>,
) -> Result<PowerResult> {
    let n = m.n();
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let mut v = match seed {
        Some(s) => {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: s.len(),
                });
            }
            s.clone()
        }
        None => {
            let mut e = DVector::zeros(n);
            e[0] = 1.0;
            e
        }
    };
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    v /= norm;
    let mut mv = m.matvec(&v)?;
    if mv.norm() == 0.0 {
        // The seed lies in the null space; restart from a fixed dense vector.
        v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt().fract());
        v /= v.norm();
        mv = m.matvec(&v)?;
    }
    for it in 1..=max_iters {
        let rho = v.dot(&mv);
        let resid = (&mv - rho * &v).norm();
        if resid <= tol * scale {
            let mut v = v;
            let lead = v
                .iter()
                .fold(0.0f64, |a, &x| if x.abs() > a.abs() { x } else { a });
            if lead < 0.0 {
                v = -v;
            }
            return Ok(PowerResult {
                rho,
                v,
                iterations: it,
            });
        }
        let norm = mv.norm();
        if norm == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        v = mv / norm;
        mv = m.matvec(&v)?;
    }
    Err(Error::MaxIterations { iters: max_iters })
}
