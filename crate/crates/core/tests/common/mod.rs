//! Random instances with a fully known spectrum and the oracle bounds checked
//! against them.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rankone::eigvec::{truncated_vectors, EigvecFormula};
use rankone::labbench::data::{haar_orthonormal, random_unit_vector};
use rankone::labbench::oracle::full_secular_top;
use rankone::secular::{solve_roots, tail_moments, SecularProblem};
use rankone::{MuPolicy, Order, PartialEigen, RankOneUpdate, SymmetricMatrix, TruncationConfig};

/// Rounding allowance added to every oracle bound, in units of machine
/// epsilon times the relevant scale.
pub const FLOOR_ULPS: f64 = 64.0;

/// `A = Q diag(lambdas) Q^T` with every eigenpair known, plus an update
/// `rho v v^T` with `rho > 0`.
pub struct Instance {
    pub a: SymmetricMatrix,
    pub lambdas: Vec<f64>,
    pub q: DMatrix<f64>,
    pub v: DVector<f64>,
    pub rho: f64,
}

impl Instance {
    /// Gaussian eigenvalues, Haar eigenvectors, random unit `v` and
    /// `rho` uniform in `[0.1, 2]`.
    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Self {
        let mut lambdas: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        lambdas.sort_by(|x, y| y.total_cmp(x));
        let q = haar_orthonormal(rng, n, n);
        let v = random_unit_vector(rng, n);
        let rho = rng.random_range(0.1..2.0);
        Self::from_parts(lambdas, q, v, rho)
    }

    pub fn from_parts(lambdas: Vec<f64>, q: DMatrix<f64>, v: DVector<f64>, rho: f64) -> Self {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&lambdas));
        let dense = &q * d * q.transpose();
        let a = SymmetricMatrix::from_dense((&dense + dense.transpose()) * 0.5).unwrap();
        Self {
            a,
            lambdas,
            q,
            v,
            rho,
        }
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn known(&self, m: usize) -> PartialEigen {
        let values = DVector::from_column_slice(&self.lambdas[..m]);
        PartialEigen::new(values, self.q.columns(0, m).into_owned(), None)
            .unwrap()
            .with_trace(self.lambdas.iter().sum())
    }

    pub fn update(&self) -> RankOneUpdate {
        RankOneUpdate::new(self.rho, self.v.clone()).unwrap()
    }

    /// `z = Q^T v` over the full eigenbasis.
    pub fn z(&self) -> DVector<f64> {
        self.q.tr_mul(&self.v)
    }

    /// `A + rho v v^T`.
    pub fn updated(&self) -> SymmetricMatrix {
        let mut b = self.a.to_dense();
        b.ger(self.rho, &self.v, &self.v, 1.0);
        SymmetricMatrix::from_dense(b).unwrap()
    }

    /// The `k` largest eigenvalues of `A + rho v v^T` and their eigenvectors,
    /// from the full secular equation.
    pub fn exact_top(&self, k: usize) -> (DVector<f64>, DMatrix<f64>) {
        let z = self.z();
        let (t, y) = full_secular_top(&self.lambdas, z.as_slice(), self.rho, k).unwrap();
        (t, &self.q * y)
    }

    /// The candidate values of `mu` that lie below `lambda_m`.
    pub fn mu_candidates(&self, m: usize) -> Vec<(MuPolicy, f64)> {
        let tail = &self.lambdas[m..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let moments = tail_moments(&self.a, &self.q.columns(0, m).into_owned(), &self.v).unwrap();
        let star = moments.s / moments.residual_mass;
        [
            (MuPolicy::Zero, 0.0),
            (MuPolicy::Mean, mean),
            (MuPolicy::Star, star),
        ]
        .into_iter()
        .filter(|&(_, mu)| mu < self.lambdas[m - 1])
        .collect()
    }

    /// The truncated secular equation for `m` known pairs and a given `mu`.
    pub fn problem(&self, m: usize, mu: f64) -> SecularProblem {
        let known = self.q.columns(0, m).into_owned();
        let moments = tail_moments(&self.a, &known, &self.v).unwrap();
        SecularProblem::with_residual_mass(
            self.lambdas[..m].to_vec(),
            moments.z.iter().copied().collect(),
            self.rho,
            mu,
            Some(moments.s),
            moments.residual_mass,
        )
        .unwrap()
    }

    pub fn spectral_scale(&self) -> f64 {
        self.lambdas.iter().fold(0.0f64, |s, x| s.max(x.abs())) + self.rho
    }
}

/// Outcome of one bound check.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub error: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.error <= self.bound
    }
}

/// Eigenvalue bounds for the `m` truncated roots: the first-order constant
/// `(l_k - mu)^{-1} (l_m - l_{m+1})^{-1} max{(l_k - l_1)^2, (l_{k-1} - l_n)^2}`
/// times `max_{j>m} |l_j - mu|`, and for second order an extra
/// `(l_k - mu)^{-1}` with the squared tail spread. `l_0 = l_1 + rho`.
pub fn eigenvalue_bounds(inst: &Instance, m: usize, mu: f64, order: Order) -> Vec<BoundCheck> {
    let lam = &inst.lambdas;
    let n = inst.n();
    let p = inst.problem(m, mu);
    let cfg = TruncationConfig {
        root_tol: 1e-15,
        max_iters: 400,
        ..TruncationConfig::new(order, MuPolicy::Explicit(mu))
    };
    let approx = solve_roots(&p, &cfg).unwrap();
    let (exact, _) = inst.exact_top(m);
    let spread = lam[m..].iter().fold(0.0f64, |s, l| s.max((l - mu).abs()));
    let floor = FLOOR_ULPS * f64::EPSILON * inst.spectral_scale();
    (0..m)
        .map(|k| {
            let lk = lam[k];
            let prev = if k == 0 {
                lam[0] + inst.rho
            } else {
                lam[k - 1]
            };
            let geometry = (lk - lam[0]).powi(2).max((prev - lam[n - 1]).powi(2));
            let c = geometry / ((lk - mu) * (lam[m - 1] - lam[m]));
            let bound = match order {
                Order::First => c * spread,
                Order::Second => c / (lk - mu) * spread * spread,
            };
            BoundCheck {
                error: (exact[k] - approx[k]).abs(),
                bound: bound + floor,
            }
        })
        .collect()
}

/// Eigenvector bounds for the unnormalized truncated formulas evaluated at
/// the exact updated eigenvalues: `|mu - t_i|^{-1} |l_{m+1} - t_i|^{-1}`
/// times `max_{j>m} |l_j - mu|` (first order), with the first factor and
/// the spread squared for second order.
pub fn eigenvector_bounds(
    inst: &Instance,
    m: usize,
    mu: f64,
    formula: EigvecFormula,
) -> Vec<BoundCheck> {
    let lam = &inst.lambdas;
    let z = inst.z();
    let (t, _) = inst.exact_top(m);
    let known = inst.q.columns(0, m).into_owned();
    let zm = z.rows(0, m).into_owned();
    let r = &inst.v - &known * &zm;
    let ar = inst.a.matvec(&r).unwrap();
    let approx = truncated_vectors(
        &known,
        &lam[..m],
        &zm,
        &r,
        Some(&ar),
        t.as_slice(),
        mu,
        formula,
    )
    .unwrap();
    let spread = lam[m..].iter().fold(0.0f64, |s, l| s.max((l - mu).abs()));
    let scale = inst.spectral_scale();
    (0..m)
        .map(|i| {
            let ti = t[i];
            let coeffs =
                DVector::from_iterator(inst.n(), (0..inst.n()).map(|k| z[k] / (lam[k] - ti)));
            let exact = &inst.q * &coeffs;
            // Sensitivity of the exact vector to the rounding in t_i.
            let slope = (0..inst.n())
                .map(|k| (z[k] / (lam[k] - ti).powi(2)).powi(2))
                .sum::<f64>()
                .sqrt();
            let floor = FLOOR_ULPS
                * f64::EPSILON
                * (exact.norm() + approx.column(i).norm() + scale * slope);
            let dm = (mu - ti).abs();
            let dt = (lam[m] - ti).abs();
            let bound = match formula {
                EigvecFormula::SecondOrder => spread * spread / (dm * dm * dt),
                _ => spread / (dm * dt),
            };
            BoundCheck {
                error: rankone::labbench::metrics::aligned_distance(
                    &exact,
                    &approx.column(i).into_owned(),
                ),
                bound: bound + floor,
            }
        })
        .collect()
}
