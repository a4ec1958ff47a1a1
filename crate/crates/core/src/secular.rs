//! Truncated secular equations and their roots.
//!
//! With known eigenpairs `(lambda_i, q_i)`, `i <= m`, coefficients
//! `z = Q^T v` and residual mass `R = 1 - |z|^2`, the unknown tail of the
//! spectrum is collapsed onto a single pole at `mu`:
//!
//! ```text
//! w1(t) = 1 + rho * (sum_i z_i^2 / (lambda_i - t) + R / (mu - t))
//! w2(t) = w1(t) - rho * (s - mu R) / (mu - t)^2
//! ```
//!
//! where `s = v^T A (I - Q Q^T) v`. The roots above `lambda_m` (for
//! `rho > 0`) approximate the `m` leading eigenvalues of `A + rho v v^T`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{coefficients_z, PartialEigen, SymmetricMatrix};

/// Residual mass below which the unknown tail is treated as empty.
pub const EMPTY_TAIL: f64 = 1e-14;

/// Residual mass below which the weighted tail mean is rejected.
pub const DEGENERATE_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

/// How the tail pole `mu` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuPolicy {
    Zero,
    /// Mean of the unknown eigenvalues, `(tr A - sum lambda_i) / (n - m)`.
    Mean,
    /// Mean of the unknown eigenvalues weighted by `z_i^2`, `s / R`.
    Star,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    pub order: Order,
    pub mu_policy: MuPolicy,
    /// Root acceptance, relative to `|rho|` for `|w|` and to the spectral
    /// span for the bracket width.
    pub root_tol: f64,
    pub max_iters: usize,
    /// Initial distance of bracket endpoints from a pole, relative to the
    /// bracket width.
    pub pole_offset: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            order: Order::Second,
            mu_policy: MuPolicy::Star,
            root_tol: 1e-12,
            max_iters: 200,
            pole_offset: 1e-9,
        }
    }
}

impl TruncationConfig {
    pub fn new(order: Order, mu_policy: MuPolicy) -> Self {
        Self {
            order,
            mu_policy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.root_tol > 0.0 && self.root_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "root_tol must be positive, got {}",
                self.root_tol
            )));
        }
        if !(self.pole_offset > 0.0 && self.pole_offset < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "pole_offset must lie in (0, 0.5), got {}",
                self.pole_offset
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if let MuPolicy::Explicit(mu) = self.mu_policy {
            if !mu.is_finite() {
                return Err(Error::NonFinite("mu"));
            }
        }
        Ok(())
    }
}

/// Quantities of the unknown part of `v`, computed with one product by `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailMoments {
    /// `z = Q^T v`.
    pub z: DVector<f64>,
    /// `r = v - Q z`.
    pub r: DVector<f64>,
    /// `A r`.
    pub ar: DVector<f64>,
    /// `s = r^T A r`, which equals `v^T A (I - Q Q^T) v` when the columns of
    /// `Q` span an invariant subspace of `A`.
    pub s: f64,
    /// `|r|^2`, the mass of `v` outside the known subspace.
    pub residual_mass: f64,
}

/// `z`, `r`, `A r` and `s` for the known block `q` and unit vector `v`.
pub fn tail_moments(
    a: &SymmetricMatrix,
    q: &DMatrix<f64>,
    v: &DVector<f64>,
) -> Result<TailMoments> {
    if a.n() != q.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: q.nrows(),
        });
    }
    let z = coefficients_z(q, v)?;
    let r = v - q * &z;
    let ar = a.matvec(&r)?;
    let s = r.dot(&ar);
    let residual_mass = r.norm_squared().min(1.0);
    Ok(TailMoments {
        z,
        r,
        ar,
        s,
        residual_mass,
    })
}

/// `s = v^T A (I - Q Q^T) v`, the `z^2`-weighted sum of the unknown
/// eigenvalues.
pub fn compute_s(a: &SymmetricMatrix, q: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    Ok(tail_moments(a, q, v)?.s)
}

/// Mean of the `n - m` unknown eigenvalues, from the trace hint or from `a`.
pub fn mu_mean(eig: &PartialEigen, a: Option<&SymmetricMatrix>) -> Result<f64> {
    let trace = eig
        .trace_hint()
        .or_else(|| a.map(SymmetricMatrix::trace))
        .ok_or(Error::MissingTrace)?;
    let unknown = eig.n() - eig.m();
    if unknown == 0 {
        return Err(Error::DegenerateResidual(0.0));
    }
    Ok((trace - eig.values().sum()) / unknown as f64)
}

/// Weighted tail mean `s / R`.
pub fn mu_star(moments: &TailMoments) -> Result<f64> {
    if moments.residual_mass < DEGENERATE_RESIDUAL {
        return Err(Error::DegenerateResidual(moments.residual_mass));
    }
    Ok(moments.s / moments.residual_mass)
}

/// Evaluates a policy without fallback.
pub fn choose_mu(
    policy: MuPolicy,
    eig: &PartialEigen,
    a: Option<&SymmetricMatrix>,
    v: Option<&DVector<f64>>,
) -> Result<f64> {
    match policy {
        MuPolicy::Zero => Ok(0.0),
        MuPolicy::Explicit(mu) if mu.is_finite() => Ok(mu),
        MuPolicy::Explicit(_) => Err(Error::NonFinite("mu")),
        MuPolicy::Mean => mu_mean(eig, a),
        MuPolicy::Star => {
            let a = a.ok_or(Error::MissingMatrix)?;
            let v = v.ok_or_else(|| Error::InvalidParameter("mu star needs v".into()))?;
            mu_star(&tail_moments(a, eig.vectors(), v)?)
        }
    }
}

/// The value of `mu` actually used and the policy that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuChoice {
    pub value: f64,
    pub requested: MuPolicy,
    pub used: MuPolicy,
}

impl MuChoice {
    pub fn fell_back(&self) -> bool {
        self.requested != self.used
    }
}

/// Evaluates `policy`, falling back Star -> Mean -> Zero when the weighted
/// mean is degenerate or the trace is unavailable.
pub fn choose_mu_with_fallback(
    policy: MuPolicy,
    eig: &PartialEigen,
    a: Option<&SymmetricMatrix>,
    moments: Option<&TailMoments>,
) -> Result<MuChoice> {
    let choice = |used, value| MuChoice {
        value,
        requested: policy,
        used,
    };
    match policy {
        MuPolicy::Zero => Ok(choice(MuPolicy::Zero, 0.0)),
        MuPolicy::Explicit(mu) => {
            if mu.is_finite() {
                Ok(choice(policy, mu))
            } else {
                Err(Error::NonFinite("mu"))
            }
        }
        MuPolicy::Star | MuPolicy::Mean => {
            if policy == MuPolicy::Star {
                if let Some(Ok(mu)) = moments.map(mu_star) {
                    return Ok(choice(MuPolicy::Star, mu));
                }
            }
            match mu_mean(eig, a) {
                Ok(mu) => Ok(choice(MuPolicy::Mean, mu)),
                Err(Error::MissingTrace | Error::DegenerateResidual(_)) => {
                    Ok(choice(MuPolicy::Zero, 0.0))
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// A truncated secular equation.
#[derive(Debug, Clone, PartialEq)]
pub struct SecularProblem {
    lambdas: Vec<f64>,
    z: Vec<f64>,
    weights: Vec<f64>,
    rho: f64,
    mu: f64,
    s: Option<f64>,
    residual_mass: f64,
}

impl SecularProblem {
    /// The residual mass is taken as `1 - sum z_i^2`, clamped to `[0, 1]`.
    pub fn new(lambdas: Vec<f64>, z: Vec<f64>, rho: f64, mu: f64, s: Option<f64>) -> Result<Self> {
        let r = 1.0 - z.iter().map(|x| x * x).sum::<f64>();
        Self::with_residual_mass(lambdas, z, rho, mu, s, r)
    }

    /// As [`SecularProblem::new`] with an explicitly supplied residual mass,
    /// e.g. `|r|^2`, which is more accurate than `1 - |z|^2` when it is small.
    pub fn with_residual_mass(
        lambdas: Vec<f64>,
        z: Vec<f64>,
        rho: f64,
        mu: f64,
        s: Option<f64>,
        residual_mass: f64,
    ) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidParameter("no eigenvalues".into()));
        }
        if lambdas.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: lambdas.len(),
                found: z.len(),
            });
        }
        let finite = lambdas.iter().chain(&z).all(|x| x.is_finite())
            && rho.is_finite()
            && mu.is_finite()
            && residual_mass.is_finite()
            && s.is_none_or(f64::is_finite);
        if !finite {
            return Err(Error::NonFinite("secular problem"));
        }
        if let Some(i) = (1..lambdas.len()).find(|&i| lambdas[i] >= lambdas[i - 1]) {
            return Err(Error::NotDescending(i));
        }
        let residual_mass = residual_mass.clamp(0.0, 1.0);
        let lambda_m = *lambdas.last().unwrap();
        let mut p = Self {
            weights: z.iter().map(|x| x * x).collect(),
            lambdas,
            z,
            rho,
            mu,
            s,
            residual_mass,
        };
        if p.tail_is_empty() {
            p.residual_mass = 0.0;
            p.s = s.map(|_| 0.0);
        } else if mu >= lambda_m {
            return Err(Error::InvalidParameter(format!(
                "mu = {mu} must lie below the smallest known eigenvalue {lambda_m}"
            )));
        }
        Ok(p)
    }

    pub fn m(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn s(&self) -> Option<f64> {
        self.s
    }

    pub fn residual_mass(&self) -> f64 {
        self.residual_mass
    }

    pub fn tail_is_empty(&self) -> bool {
        self.residual_mass < EMPTY_TAIL
    }

    /// Length scale of the root search: the spread of the known eigenvalues,
    /// the distance to `mu` and `|rho|`.
    pub fn spectral_span(&self) -> f64 {
        let lambda_1 = self.lambdas[0];
        let lambda_m = *self.lambdas.last().unwrap();
        let tail = if self.tail_is_empty() {
            0.0
        } else {
            lambda_m - self.mu
        };
        (lambda_1 - lambda_m) + tail + self.rho.abs()
    }

    /// `w1(t)`.
    pub fn eval_w1(&self, t: f64) -> Result<f64> {
        self.eval(Order::First, t)
    }

    /// `w2(t)`; needs `s`.
    pub fn eval_w2(&self, t: f64) -> Result<f64> {
        self.eval(Order::Second, t)
    }

    pub fn eval(&self, order: Order, t: f64) -> Result<f64> {
        Ok(self.eval_with_derivative(order, t)?.0)
    }

    /// `(w(t), w'(t))`.
    pub fn eval_with_derivative(&self, order: Order, t: f64) -> Result<(f64, f64)> {
        if order == Order::Second && self.s.is_none() {
            return Err(Error::MissingS);
        }
        if self.lambdas.contains(&t) || (!self.tail_is_empty() && t == self.mu) {
            return Err(Error::PoleEvaluation { t });
        }
        let (f, df) = Shifted::new(self, order, 0.0).eval(t);
        if !f.is_finite() {
            return Err(Error::PoleEvaluation { t });
        }
        Ok((f, df))
    }

    /// Sign of `w` as `t` approaches pole `i` (or `mu` when `i == m`) from
    /// the right (`from_above`) or the left.
    fn limit_sign(&self, order: Order, i: usize, from_above: bool) -> f64 {
        let simple = if from_above { -self.rho } else { self.rho };
        if i < self.m() || order == Order::First {
            return simple.signum();
        }
        let double = -self.rho * (self.s.unwrap_or(0.0) - self.mu * self.residual_mass);
        if double != 0.0 {
            double.signum()
        } else {
            simple.signum()
        }
    }
}

/// The secular function written in `tau = t - origin`, with the pole
/// differences formed once so that roots close to a pole keep full relative
/// accuracy.
struct Shifted<'a> {
    p: &'a SecularProblem,
    poles: Vec<f64>,
    mu: f64,
    /// `-rho (s - mu R)`, zero for the first-order equation.
    double: f64,
}

impl<'a> Shifted<'a> {
    fn new(p: &'a SecularProblem, order: Order, origin: f64) -> Self {
        let double = match order {
            Order::First => 0.0,
            Order::Second => -p.rho * (p.s.unwrap_or(0.0) - p.mu * p.residual_mass),
        };
        Self {
            p,
            poles: p.lambdas.iter().map(|l| l - origin).collect(),
            mu: p.mu - origin,
            double,
        }
    }

    fn eval(&self, tau: f64) -> (f64, f64) {
        let mut sum = 0.0;
        let mut dsum = 0.0;
        for (d, w) in self.poles.iter().zip(&self.p.weights) {
            let inv = 1.0 / (d - tau);
            sum += w * inv;
            dsum += w * inv * inv;
        }
        let mut f = 1.0;
        let mut df = 0.0;
        if self.p.residual_mass > 0.0 {
            let inv = 1.0 / (self.mu - tau);
            sum += self.p.residual_mass * inv;
            dsum += self.p.residual_mass * inv * inv;
            f += self.double * inv * inv;
            df += 2.0 * self.double * inv * inv * inv;
        }
        f += self.p.rho * sum;
        df += self.p.rho * dsum;
        (f, df)
    }

    fn value(&self, tau: f64) -> f64 {
        self.eval(tau).0
    }
}

/// One end of a root bracket. `limit` is the sign of `w` next to the end
/// when the end is a pole.
#[derive(Debug, Clone, Copy)]
struct End {
    at: f64,
    limit: Option<f64>,
}

impl End {
    fn plain(at: f64) -> Self {
        Self { at, limit: None }
    }

    fn pole(at: f64, limit: f64) -> Self {
        Self {
            at,
            limit: Some(limit),
        }
    }
}

fn same_sign(a: f64, b: f64) -> bool {
    (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)
}

/// Moves a pole endpoint inwards until `w` takes the pole's limiting sign.
/// Returns the endpoint and its value, and whether the root sits within one
/// ulp of the pole.
fn pull_in(
    p: &SecularProblem,
    order: Order,
    end: End,
    inward: f64,
    width: f64,
    pole_offset: f64,
) -> (f64, f64, bool) {
    let Some(limit) = end.limit else {
        let f = Shifted::new(p, order, end.at).value(0.0);
        return (end.at, f, false);
    };
    let shifted = Shifted::new(p, order, end.at);
    let mut off = pole_offset * width;
    loop {
        let mut t = end.at + inward * off;
        let at_ulp = t == end.at || (end.at + inward * off * 1e-4) == end.at;
        if at_ulp {
            t = if inward > 0.0 {
                end.at.next_up()
            } else {
                end.at.next_down()
            };
        }
        let f = shifted.value(t - end.at);
        if f == 0.0 || same_sign(f, limit) {
            return (t, f, false);
        }
        if at_ulp {
            return (t, f, true);
        }
        off *= 1e-4;
    }
}

/// Finds the root of `w` between `lo` and `hi`.
fn solve_bracket(
    p: &SecularProblem,
    order: Order,
    cfg: &TruncationConfig,
    lo: End,
    hi: End,
    index: usize,
) -> Result<f64> {
    let width = hi.at - lo.at;
    let (a, fa, pinned_lo) = pull_in(p, order, lo, 1.0, width, cfg.pole_offset);
    let (b, fb, pinned_hi) = pull_in(p, order, hi, -1.0, width, cfg.pole_offset);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if same_sign(fa, fb) {
        if pinned_lo {
            return Ok(a);
        }
        if pinned_hi {
            return Ok(b);
        }
        return Err(Error::NoSignChange {
            bracket: index,
            lo: lo.at,
            hi: hi.at,
        });
    }

    let mid = 0.5 * (a + b);
    let fm = Shifted::new(p, order, 0.0).value(mid);
    let root_below_mid = !same_sign(fm, fa);
    let origin = match (root_below_mid, lo.limit.is_some(), hi.limit.is_some()) {
        (true, true, _) | (false, true, false) => lo.at,
        (false, _, true) | (true, false, true) => hi.at,
        _ => lo.at,
    };
    let f = Shifted::new(p, order, origin);
    let tol_f = cfg.root_tol * p.rho.abs();
    let tol_x = cfg.root_tol * p.spectral_span();

    let sign_a = fa.signum();
    let (mut xa, mut xb) = (a - origin, b - origin);
    let mut x = mid - origin;
    let mut best = (f64::INFINITY, x);
    let mut dx_old = (xb - xa).abs();
    let mut dx = dx_old;
    for _ in 0..cfg.max_iters {
        let (fx, dfx) = f.eval(x);
        if fx.abs() < best.0 {
            best = (fx.abs(), x);
        }
        if fx == 0.0 || fx.abs() <= tol_f {
            break;
        }
        if fx.signum() == sign_a {
            xa = x;
        } else {
            xb = x;
        }
        let (l, h) = if xa < xb { (xa, xb) } else { (xb, xa) };
        let mid = 0.5 * (l + h);
        if h - l <= tol_x || mid <= l || mid >= h {
            break;
        }
        let newton = x - fx / dfx;
        let use_newton =
            dfx != 0.0 && newton > l && newton < h && (2.0 * fx).abs() <= (dx_old * dfx).abs();
        dx_old = dx;
        let next = if use_newton { newton } else { mid };
        dx = next - x;
        x = next;
        if dx == 0.0 {
            break;
        }
    }
    if best.0 > tol_f {
        let (l, h) = if xa < xb { (xa, xb) } else { (xb, xa) };
        let settled = h - l <= tol_x || 0.5 * (l + h) <= l || 0.5 * (l + h) >= h;
        if !settled {
            return Err(Error::MaxIterations {
                iters: cfg.max_iters,
            });
        }
    }
    Ok((origin + best.1).clamp(a, b))
}

/// Root of `w` below `lambda_m`, found by sweeping downwards from `lambda_m`
/// in geometrically growing steps, stopping at `mu` when the tail is present.
fn solve_lower(
    p: &SecularProblem,
    order: Order,
    cfg: &TruncationConfig,
    index: usize,
) -> Result<f64> {
    let m = p.m();
    let lambda_m = p.lambdas[m - 1];
    let hi = End::pole(lambda_m, p.limit_sign(order, m - 1, false));
    let span = p.spectral_span();
    let mut step = if m > 1 {
        (p.lambdas[0] - lambda_m) / (m - 1) as f64
    } else {
        p.rho.abs()
    };
    if step <= 0.0 {
        step = p.rho.abs();
    }
    let floor = p.mu.min(lambda_m) - span - p.rho.abs();
    let eval = Shifted::new(p, order, lambda_m);
    let hi_sign = hi.limit.unwrap();
    loop {
        let t = lambda_m - step;
        if !p.tail_is_empty() && t <= p.mu {
            let lo = End::pole(p.mu, p.limit_sign(order, m, true));
            return solve_bracket(p, order, cfg, lo, hi, index);
        }
        if t < floor {
            return Err(Error::NoSignChange {
                bracket: index,
                lo: floor,
                hi: lambda_m,
            });
        }
        let f = eval.value(t - lambda_m);
        if f == 0.0 {
            return Ok(t);
        }
        if !same_sign(f, hi_sign) {
            return solve_bracket(p, order, cfg, End::plain(t), hi, index);
        }
        step *= 2.0;
    }
}

/// The `m` largest roots of the truncated secular equation, descending.
pub fn solve_roots(p: &SecularProblem, cfg: &TruncationConfig) -> Result<DVector<f64>> {
    cfg.validate()?;
    let order = cfg.order;
    if order == Order::Second && p.s.is_none() {
        return Err(Error::MissingS);
    }
    if p.rho == 0.0 {
        return Err(Error::InvalidParameter("rho must be nonzero".into()));
    }
    let m = p.m();
    let lam = &p.lambdas;
    let mut roots = Vec::with_capacity(m);
    if p.rho > 0.0 {
        let lo = End::pole(lam[0], p.limit_sign(order, 0, true));
        let mut top = lam[0] + p.rho;
        let shifted = Shifted::new(p, order, lam[0]);
        let mut grow = 0;
        while shifted.value(top - lam[0]) < 0.0 {
            grow += 1;
            if grow > 60 {
                return Err(Error::NoSignChange {
                    bracket: 0,
                    lo: lam[0],
                    hi: top,
                });
            }
            top = lam[0] + 2.0 * (top - lam[0]);
        }
        roots.push(solve_bracket(p, order, cfg, lo, End::plain(top), 0)?);
        for k in 1..m {
            let lo = End::pole(lam[k], p.limit_sign(order, k, true));
            let hi = End::pole(lam[k - 1], p.limit_sign(order, k - 1, false));
            roots.push(solve_bracket(p, order, cfg, lo, hi, k)?);
        }
    } else {
        for k in 0..m - 1 {
            let lo = End::pole(lam[k + 1], p.limit_sign(order, k + 1, true));
            let hi = End::pole(lam[k], p.limit_sign(order, k, false));
            roots.push(solve_bracket(p, order, cfg, lo, hi, k)?);
        }
        roots.push(solve_lower(p, order, cfg, m - 1)?);
    }
    Ok(DVector::from_vec(roots))
}

/// For `rho > 0`, the root between `mu` and `lambda_m`, i.e. the estimate of
/// the eigenvalue that the perturbation lifts out of the unknown tail.
/// `None` when the tail is empty or `rho <= 0`.
pub fn solve_tail_root(p: &SecularProblem, cfg: &TruncationConfig) -> Result<Option<f64>> {
    cfg.validate()?;
    if p.rho <= 0.0 || p.tail_is_empty() {
        return Ok(None);
    }
    solve_lower(p, cfg.order, cfg, p.m()).map(Some)
}
