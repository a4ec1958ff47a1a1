//! The rank-one update with partial spectrum: deflation, choice of `mu`,
//! truncated secular roots and truncated eigenvectors, followed by optional
//! re-orthogonalization of the estimates.

use nalgebra::{DMatrix, DVector};

use crate::eigvec::{normalize_columns, truncated_vectors, EigvecFormula, POLE_COLLISION_TOL};
use crate::error::{Error, Result};
use crate::linalg::{coefficients_z, gram_defect, PartialEigen, RankOneUpdate, SymmetricMatrix};
use crate::secular::{
    choose_mu_with_fallback, solve_roots, solve_tail_root, tail_moments, MuChoice, Order,
    SecularProblem, TailMoments, TruncationConfig,
};

/// Coefficients `|z_i|` below this are treated as exactly zero.
pub const TAU_Z: f64 = 1e-12;

/// Eigenvalues closer than this multiple of `max |lambda|` are merged.
pub const TAU_LAMBDA_REL: f64 = 1e-10;

/// Relative column norm below which re-orthogonalization reports a rank
/// deficiency.
const RANK_TOL: f64 = 1e-10;

/// Outcome of the deflation step. Indices refer to the known pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflationReport {
    /// Pairs entering the secular solve, as members of `groups`.
    pub kept: Vec<usize>,
    /// Pairs with `|z_i| < tau_z`; they pass through unchanged.
    pub frozen: Vec<usize>,
    /// Kept pairs grouped by (numerically) equal eigenvalue. Each group is
    /// one pole of the secular equation with weight `sum z_i^2`.
    pub groups: Vec<Vec<usize>>,
    /// Groups (by position in `groups`) whose root landed on their own pole,
    /// i.e. whose coupling was too weak to move the eigenvalue.
    pub pinned: Vec<usize>,
    pub tau_z: f64,
    pub tau_lambda: f64,
}

impl DeflationReport {
    /// Groups with more than one member.
    pub fn merged(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.groups.iter().filter(|g| g.len() > 1)
    }
}

/// Splits the known pairs into frozen ones (`|z_i| < tau_z`) and groups of
/// kept pairs whose eigenvalues lie within `tau_lambda` of the group's
/// largest one.
pub fn deflate(
    eig: &PartialEigen,
    v: &DVector<f64>,
    tau_z: f64,
    tau_lambda: f64,
) -> Result<DeflationReport> {
    let z = coefficients_z(eig.vectors(), v)?;
    deflate_z(eig.values().as_slice(), z.as_slice(), tau_z, tau_lambda)
}

fn deflate_z(lambdas: &[f64], z: &[f64], tau_z: f64, tau_lambda: f64) -> Result<DeflationReport> {
    let mut kept = Vec::new();
    let mut frozen = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, (&l, &zi)) in lambdas.iter().zip(z).enumerate() {
        if zi.abs() < tau_z {
            frozen.push(i);
            continue;
        }
        kept.push(i);
        match groups.last_mut() {
            Some(g) if lambdas[g[0]] - l <= tau_lambda => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    if kept.is_empty() {
        return Err(Error::AllDeflated);
    }
    Ok(DeflationReport {
        kept,
        frozen,
        groups,
        pinned: Vec::new(),
        tau_z,
        tau_lambda,
    })
}

/// Bound on `E` in `P~ = P_bar (I + E)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EBound {
    /// `|E|_F < 2 |G|_F`, valid because `|G|_F < 1/4`.
    Bounded(f64),
    /// `|G|_F >= 1/4`; no bound is available.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrthoMethod {
    /// Classical Gram-Schmidt applied twice.
    #[default]
    GramSchmidt,
    /// `P (P^T P)^{-1/2}`, formed as `U V^T` from the thin SVD.
    Polar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reorthogonalized {
    pub vectors: DMatrix<f64>,
    /// `|P~^T P~ - I|_F` of the input.
    pub gram_defect: f64,
    pub e_bound: EBound,
}

/// Orthonormalizes the columns of `p` (column space preserved for
/// Gram-Schmidt; closest orthonormal matrix for the polar variant).
pub fn reorthogonalize(p: &DMatrix<f64>, method: OrthoMethod) -> Result<Reorthogonalized> {
    let defect = gram_defect(p);
    let e_bound = if defect < 0.25 {
        EBound::Bounded(2.0 * defect)
    } else {
        EBound::Unbounded
    };
    let vectors = match method {
        OrthoMethod::GramSchmidt => gram_schmidt2(p)?,
        OrthoMethod::Polar => polar(p)?,
    };
    Ok(Reorthogonalized {
        vectors,
        gram_defect: defect,
        e_bound,
    })
}

fn gram_schmidt2(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = p.ncols();
    let mut q = p.clone();
    let mut rank = 0;
    for j in 0..m {
        let original = p.column(j).norm();
        let mut col = q.column(j).into_owned();
        for _ in 0..2 {
            let prev = q.columns(0, j);
            let c = prev.tr_mul(&col);
            col -= prev * c;
        }
        let norm = col.norm();
        if !(norm > RANK_TOL * original) {
            continue;
        }
        rank += 1;
        q.set_column(j, &(col / norm));
    }
    if rank < m {
        return Err(Error::RankDeficient { rank, expected: m });
    }
    Ok(q)
}

fn polar(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = p.ncols();
    let svd = p.clone().svd(true, true);
    let top = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * top)
        .count();
    if rank < m || !(top > 0.0) {
        return Err(Error::RankDeficient { rank, expected: m });
    }
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    Ok(u * v_t)
}

/// `|B P - P diag(t)|_F`.
pub fn residual_quality(b: &SymmetricMatrix, p: &DMatrix<f64>, t: &DVector<f64>) -> Result<f64> {
    let bp = b.apply_block(p)?;
    Ok(residual_from_product(bp, p, t))
}

/// `|B P - P diag(t)|_F` for `B = A + rho v v^T`, without forming `B`.
pub fn residual_quality_rank_one(
    a: &SymmetricMatrix,
    upd: &RankOneUpdate,
    p: &DMatrix<f64>,
    t: &DVector<f64>,
) -> Result<f64> {
    let mut bp = a.apply_block(p)?;
    let vp = p.tr_mul(upd.v());
    bp.ger(upd.rho(), upd.v(), &vp, 1.0);
    Ok(residual_from_product(bp, p, t))
}

fn residual_from_product(mut bp: DMatrix<f64>, p: &DMatrix<f64>, t: &DVector<f64>) -> f64 {
    for (j, mut col) in bp.column_iter_mut().enumerate() {
        col.axpy(-t[j], &p.column(j), 1.0);
    }
    bp.norm()
}

/// Why the update returned its input unchanged, if it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Passthrough {
    ZeroRho,
    AllDeflated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateResult {
    /// Estimates `t~`, descending.
    pub values: DVector<f64>,
    /// Estimates `P~`, re-orthogonalized when requested.
    pub vectors: DMatrix<f64>,
    /// The estimates before re-orthogonalization, kept only when
    /// re-orthogonalization was requested.
    pub raw_vectors: Option<DMatrix<f64>>,
    pub deflation: Option<DeflationReport>,
    pub mu: Option<MuChoice>,
    /// `|P~^T P~ - I|_F` of the raw estimates.
    pub gram_defect: f64,
    pub e_bound: Option<EBound>,
    /// `|B P - P diag(t)|_F` of the returned pairs, when `A` was supplied.
    pub residual_quality: Option<f64>,
    /// Whether a root lifted out of the unknown tail displaced a known pair.
    pub tail_root_used: bool,
    pub passthrough: Option<Passthrough>,
}

impl UpdateResult {
    pub fn mu_used(&self) -> Option<f64> {
        self.mu.map(|c| c.value)
    }

    fn passthrough(eig: &PartialEigen, why: Passthrough, report: Option<DeflationReport>) -> Self {
        Self {
            values: eig.values().clone(),
            vectors: eig.vectors().clone(),
            raw_vectors: None,
            deflation: report,
            mu: None,
            gram_defect: gram_defect(eig.vectors()),
            e_bound: None,
            residual_quality: None,
            tail_root_used: false,
            passthrough: Some(why),
        }
    }
}

/// Options beyond the truncation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateOptions {
    pub orthogonalize: bool,
    pub ortho_method: OrthoMethod,
}

/// Estimates the `m` leading eigenpairs of `A + rho v v^T` from the `m`
/// leading eigenpairs of `A`. `a` is needed for the second-order variant,
/// for `mu = mu*`, and for the residual diagnostic; `mu_mean` can use the
/// trace hint of `eig` instead.
pub fn rank_one_update(
    eig: &PartialEigen,
    upd: &RankOneUpdate,
    cfg: &TruncationConfig,
    a: Option<&SymmetricMatrix>,
    orthogonalize: bool,
) -> Result<UpdateResult> {
    let opts = UpdateOptions {
        orthogonalize,
        ..UpdateOptions::default()
    };
    rank_one_update_with(eig, upd, cfg, a, &opts)
}

/// A secular pole: a group of known pairs sharing one eigenvalue, with the
/// direction `u = sum z_i q_i / zeta` and weight `zeta = |z_group|`.
struct Atom {
    lambda: f64,
    zeta: f64,
    u: DVector<f64>,
}

struct Candidate {
    value: f64,
    vector: DVector<f64>,
    /// Position used to break ties: the index of the known pair it came from,
    /// or `m` for the tail root.
    rank: usize,
}

pub fn rank_one_update_with(
    eig: &PartialEigen,
    upd: &RankOneUpdate,
    cfg: &TruncationConfig,
    a: Option<&SymmetricMatrix>,
    opts: &UpdateOptions,
) -> Result<UpdateResult> {
    cfg.validate()?;
    let n = eig.n();
    let m = eig.m();
    if upd.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: upd.n(),
        });
    }
    if let Some(a) = a {
        if a.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.n(),
            });
        }
    }
    if upd.rho() == 0.0 {
        return Ok(UpdateResult::passthrough(eig, Passthrough::ZeroRho, None));
    }
    if cfg.order == Order::Second && a.is_none() {
        return Err(Error::MissingMatrix);
    }

    let q = eig.vectors();
    let lambdas = eig.values().as_slice();
    let v = upd.v();
    let moments = match a {
        Some(a) => tail_moments(a, q, v)?,
        None => {
            let z = coefficients_z(q, v)?;
            let r = v - q * &z;
            let residual_mass = r.norm_squared().min(1.0);
            TailMoments {
                z,
                ar: DVector::zeros(0),
                r,
                s: f64::NAN,
                residual_mass,
            }
        }
    };
    let z = &moments.z;
    let scale = lambdas.iter().fold(0.0f64, |s, l| s.max(l.abs()));
    let mut report = match deflate_z(lambdas, z.as_slice(), TAU_Z, TAU_LAMBDA_REL * scale) {
        Ok(r) => r,
        Err(Error::AllDeflated) => {
            let report = DeflationReport {
                kept: Vec::new(),
                frozen: (0..m).collect(),
                groups: Vec::new(),
                pinned: Vec::new(),
                tau_z: TAU_Z,
                tau_lambda: TAU_LAMBDA_REL * scale,
            };
            return Ok(UpdateResult::passthrough(
                eig,
                Passthrough::AllDeflated,
                Some(report),
            ));
        }
        Err(e) => return Err(e),
    };

    let mu = choose_mu_with_fallback(cfg.mu_policy, eig, a, a.map(|_| &moments))?;

    let mut atoms = Vec::with_capacity(report.groups.len());
    let mut candidates: Vec<Candidate> = Vec::with_capacity(m + 1);
    for g in &report.groups {
        let zeta = g.iter().map(|&i| z[i] * z[i]).sum::<f64>().sqrt();
        let mut u = DVector::zeros(n);
        for &i in g {
            u.axpy(z[i] / zeta, &q.column(i), 1.0);
        }
        if g.len() > 1 {
            for (k, w) in group_complement(q, z, g, zeta).into_iter().enumerate() {
                candidates.push(Candidate {
                    value: lambdas[g[0]],
                    vector: w,
                    rank: g[k + 1],
                });
            }
        }
        atoms.push(Atom {
            lambda: lambdas[g[0]],
            zeta,
            u,
        });
    }
    for &i in &report.frozen {
        candidates.push(Candidate {
            value: lambdas[i],
            vector: q.column(i).into_owned(),
            rank: i,
        });
    }

    let s = match cfg.order {
        Order::First => None,
        Order::Second => Some(moments.s),
    };
    let problem = SecularProblem::with_residual_mass(
        atoms.iter().map(|a| a.lambda).collect(),
        atoms.iter().map(|a| a.zeta).collect(),
        upd.rho(),
        mu.value,
        s,
        moments.residual_mass,
    )?;
    let roots: Vec<f64> = solve_roots(&problem, cfg)?.iter().copied().collect();
    let mut tail_root = None;
    if !candidates.is_empty() {
        tail_root = solve_tail_root(&problem, cfg)?;
    }

    // Roots within rounding of a pole keep that pole's direction; the
    // formula cannot be evaluated there.
    let span = atoms
        .iter()
        .map(|a| a.lambda.abs())
        .fold(mu.value.abs(), f64::max)
        .max(roots.iter().fold(0.0f64, |s, t| s.max(t.abs())));
    let pin_tol = POLE_COLLISION_TOL * span.max(f64::MIN_POSITIVE);
    let mut free = Vec::with_capacity(roots.len());
    for (i, &t) in roots.iter().enumerate() {
        let nearest = atoms
            .iter()
            .enumerate()
            .map(|(j, a)| (j, (a.lambda - t).abs()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if nearest.1 < pin_tol {
            report.pinned.push(nearest.0);
            candidates.push(Candidate {
                value: t,
                vector: atoms[nearest.0].u.clone(),
                rank: report.groups[nearest.0][0],
            });
        } else {
            free.push(i);
        }
    }
    let formula = match cfg.order {
        Order::First => EigvecFormula::FirstOrder,
        Order::Second => EigvecFormula::SecondOrder,
    };
    let mut targets: Vec<f64> = free.iter().map(|&i| roots[i]).collect();
    if let Some(t) = tail_root {
        targets.push(t);
    }
    if !targets.is_empty() {
        let u = DMatrix::from_columns(&atoms.iter().map(|a| a.u.clone()).collect::<Vec<_>>());
        let zeta = DVector::from_iterator(atoms.len(), atoms.iter().map(|a| a.zeta));
        let ar = (formula == EigvecFormula::SecondOrder).then_some(&moments.ar);
        let p = truncated_vectors(
            &u,
            problem.lambdas(),
            &zeta,
            &moments.r,
            ar,
            &targets,
            mu.value,
            formula,
        )?;
        let p = normalize_columns(p)?;
        for (c, &t) in targets.iter().enumerate() {
            let rank = if c < free.len() {
                report.groups[free[c]][0]
            } else {
                m
            };
            candidates.push(Candidate {
                value: t,
                vector: p.column(c).into_owned(),
                rank,
            });
        }
    }

    candidates.sort_by(|x, y| y.value.total_cmp(&x.value).then(x.rank.cmp(&y.rank)));
    candidates.truncate(m);
    let tail_root_used = candidates.iter().any(|c| c.rank == m);
    let values = DVector::from_iterator(m, candidates.iter().map(|c| c.value));
    let raw = DMatrix::from_columns(
        &candidates
            .iter()
            .map(|c| c.vector.clone())
            .collect::<Vec<_>>(),
    );

    let defect = gram_defect(&raw);
    let (vectors, raw_vectors, e_bound) = if opts.orthogonalize {
        let o = reorthogonalize(&raw, opts.ortho_method)?;
        (o.vectors, Some(raw), Some(o.e_bound))
    } else {
        (raw, None, None)
    };
    let residual_quality = match a {
        Some(a) => Some(residual_quality_rank_one(a, upd, &vectors, &values)?),
        None => None,
    };
    Ok(UpdateResult {
        values,
        vectors,
        raw_vectors,
        deflation: Some(report),
        mu: Some(mu),
        gram_defect: defect,
        e_bound,
        residual_quality,
        tail_root_used,
        passthrough: None,
    })
}

/// Orthonormal vectors spanning the part of a merged group's eigenspace that
/// is orthogonal to `u`; these are untouched by the perturbation.
fn group_complement(
    q: &DMatrix<f64>,
    z: &DVector<f64>,
    g: &[usize],
    zeta: f64,
) -> Vec<DVector<f64>> {
    let k = g.len();
    let c = DVector::from_iterator(k, g.iter().map(|&i| z[i] / zeta));
    // Householder reflector H with H e_1 = -sign(c_1) c; its remaining
    // columns span the orthogonal complement of c.
    let mut w = c.clone();
    w[0] += if c[0] >= 0.0 { 1.0 } else { -1.0 };
    let ww = w.norm_squared();
    let qg = DMatrix::from_columns(&g.iter().map(|&i| q.column(i)).collect::<Vec<_>>());
    (1..k)
        .map(|j| {
            let mut h = DVector::zeros(k);
            h[j] = 1.0;
            h.axpy(-2.0 * w[j] / ww, &w, 1.0);
            &qg * h
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::secular::MuPolicy;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn identity_block(n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn orthogonal_v_freezes_everything() {
        let eig = PartialEigen::new(
            DVector::from_vec(vec![2.0, 1.0]),
            identity_block(3, 2),
            None,
        )
        .unwrap();
        let upd = RankOneUpdate::new(0.5, DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        let cfg = TruncationConfig::new(Order::First, MuPolicy::Zero);
        let out = rank_one_update(&eig, &upd, &cfg, None, false).unwrap();
        assert_eq!(out.passthrough, Some(Passthrough::AllDeflated));
        assert_eq!(out.values, *eig.values());
        assert_eq!(out.vectors, *eig.vectors());
    }

    #[test]
    fn zero_rho_passes_through() {
        let eig =
            PartialEigen::new(DVector::from_vec(vec![2.0]), identity_block(2, 1), None).unwrap();
        let upd = RankOneUpdate::new(0.0, DVector::from_vec(vec![1.0, 1.0])).unwrap();
        let out = rank_one_update(&eig, &upd, &TruncationConfig::default(), None, false).unwrap();
        assert_eq!(out.passthrough, Some(Passthrough::ZeroRho));
        assert_eq!(out.values, *eig.values());
    }

    #[test]
    fn two_by_two_closed_form() {
        let eig =
            PartialEigen::new(DVector::from_vec(vec![1.0]), identity_block(2, 1), None).unwrap();
        let upd =
            RankOneUpdate::new(1.0, DVector::from_vec(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2])).unwrap();
        let cfg = TruncationConfig::new(Order::First, MuPolicy::Zero);
        let out = rank_one_update(&eig, &upd, &cfg, None, false).unwrap();
        assert!((out.values[0] - (1.0 + FRAC_1_SQRT_2)).abs() < 1e-12);
        assert!((out.vectors[(0, 0)] - 0.9238795325112867).abs() < 1e-12);
        assert!((out.vectors[(1, 0)] - 0.3826834323650898).abs() < 1e-12);
    }

    #[test]
    fn frozen_pair_is_bit_identical() {
        let eig = PartialEigen::new(
            DVector::from_vec(vec![3.0, 2.0, 1.0]),
            identity_block(4, 3),
            None,
        )
        .unwrap();
        let upd = RankOneUpdate::new(0.3, DVector::from_vec(vec![0.6, 0.0, 0.6, 0.52915])).unwrap();
        let a = SymmetricMatrix::from_diagonal(&[3.0, 2.0, 1.0, 0.5]);
        let out =
            rank_one_update(&eig, &upd, &TruncationConfig::default(), Some(&a), false).unwrap();
        let report = out.deflation.unwrap();
        assert_eq!(report.frozen, vec![1]);
        let j = (0..3).find(|&j| out.values[j] == 2.0).unwrap();
        assert_eq!(out.vectors.column(j), eig.vectors().column(1));
    }

    #[test]
    fn gram_schmidt_keeps_orthonormal_input() {
        let p = identity_block(4, 2);
        let o = reorthogonalize(&p, OrthoMethod::GramSchmidt).unwrap();
        assert_eq!(o.gram_defect, 0.0);
        assert_eq!(o.e_bound, EBound::Bounded(0.0));
        assert!((o.vectors - p).norm() < 1e-15);
    }

    #[test]
    fn rank_deficient_block() {
        let p = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let err = reorthogonalize(&p, OrthoMethod::GramSchmidt).unwrap_err();
        assert_eq!(
            err,
            Error::RankDeficient {
                rank: 1,
                expected: 2
            }
        );
        let err = reorthogonalize(&p, OrthoMethod::Polar).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn large_defect_is_unbounded() {
        let p = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let o = reorthogonalize(&p, OrthoMethod::GramSchmidt).unwrap();
        assert_eq!(o.e_bound, EBound::Unbounded);
        assert!(gram_defect(&o.vectors) < 1e-14);
    }
}
