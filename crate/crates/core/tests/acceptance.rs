//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines reach the test
//! output. The process fails if any criterion outside `KNOWN_FAILURES`
//! fails.

mod common;

use std::time::Instant;

use common::{eigenvalue_bounds, eigenvector_bounds, Instance};
use nalgebra::DMatrix;
use rand::Rng;
use rankone::eigvec::EigvecFormula;
use rankone::labbench::data::{gaussian_matrix, random_unit_vector, trial_rng};
use rankone::labbench::metrics::{max_abs_diff, max_angle};
use rankone::labbench::oracle::oracle_eigh;
use rankone::labbench::{
    self, find_summary, measurements, ExperimentKind, ExperimentSpec, MetricRow,
};
use rankone::update::{rank_one_update, EBound};
use rankone::{MuPolicy, Order, PartialEigen, RankOneUpdate, SymmetricMatrix, TruncationConfig};

/// Criteria expected to fail with the reference construction; see README.
const KNOWN_FAILURES: [usize; 1] = [2];

const SUITE_INSTANCES: usize = 100;
const SUITE_N: usize = 40;

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn report(id: usize, title: &str, pass: bool, detail: String, start: Instant) -> Outcome {
    println!(
        "criterion {id:>2} {} {title}: {detail} [{:.2} s]",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    Outcome { id, pass, detail }
}

fn within(x: f64, centre: f64, tol: f64) -> bool {
    (x - centre).abs() <= tol
}

fn random_symmetric(seed: u64, stream: u64, n: usize) -> SymmetricMatrix {
    let mut rng = trial_rng(seed, stream);
    let g = gaussian_matrix(&mut rng, n, n);
    SymmetricMatrix::from_dense((&g + g.transpose()) * 0.5).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut err, mut ang) = (0.0f64, 0.0f64);
    let mut slowest = 0.0f64;
    for trial in 0..10 {
        let a = random_symmetric(11, trial, 50);
        let mut rng = trial_rng(12, trial);
        let v = random_unit_vector(&mut rng, 50);
        let rho = rng.random_range(0.1..2.0);
        let t0 = Instant::now();
        let e = oracle_eigh(&a).unwrap();
        let known = PartialEigen::new(e.values.clone(), e.vectors.clone(), None).unwrap();
        let res = rank_one_update(
            &known,
            &RankOneUpdate::new(rho, v.clone()).unwrap(),
            &TruncationConfig::default(),
            Some(&a),
            false,
        )
        .unwrap();
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        let mut b = a.to_dense();
        b.ger(rho, &v, &v, 1.0);
        let truth = oracle_eigh(&SymmetricMatrix::from_dense(b).unwrap()).unwrap();
        err = err.max(max_abs_diff(&res.values, &truth.values));
        ang = ang.max(max_angle(&res.vectors, &truth.vectors).unwrap());
    }
    let pass = err <= 1e-8 && ang <= 1e-6 && slowest < 1.0;
    report(
        1,
        "exactness with every eigenpair known",
        pass,
        format!("max |dt| {err:.2e} (<= 1e-8), max angle {ang:.2e} deg (<= 1e-6), slowest {slowest:.3} s (< 1)"),
        start,
    )
}

fn criteria_2_3() -> (Outcome, Outcome) {
    let start = Instant::now();
    let rows = labbench::run(&ExperimentSpec::new(ExperimentKind::SyntheticRankOne, 1)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let s = |variant| find_summary(&rows, variant, "slope_eigenvalue").unwrap();
    let star = [s("first_mustar"), s("second_mustar")];
    let (first, second) = (s("first_mu0"), s("second_mu0"));
    let pass2 = star.iter().all(|&x| within(x, 0.0, 0.25))
        && within(first, 1.0, 0.25)
        && within(second, 2.0, 0.35)
        && elapsed < 120.0;
    let c2 = report(
        2,
        "error slopes in the tail mean",
        pass2,
        format!(
            "mu* slopes {:.3}/{:.3} (0 +- 0.25), first order mu=0 {first:.3} (1 +- 0.25), second order mu=0 {second:.3} (2 +- 0.35)",
            star[0], star[1]
        ),
        start,
    );

    let start3 = Instant::now();
    let median_at = |variant: &str| {
        rows.iter()
            .find(|r| {
                r.variant == variant
                    && r.param == 1e-2
                    && r.statistic.as_deref() == Some("median_eigenvalue_abs_err")
            })
            .and_then(|r| r.value)
            .unwrap()
    };
    let (e1, e2) = (median_at("first_mu0"), median_at("second_mu0"));
    let pass3 = (3e-5..=3e-3).contains(&e1) && (3e-7..=3e-5).contains(&e2);
    let c3 = report(
        3,
        "error magnitudes at mu_hat = 1e-2",
        pass3,
        format!("first order {e1:.2e} in [3e-5, 3e-3], second order {e2:.2e} in [3e-7, 3e-5]"),
        start3,
    );
    (c2, c3)
}

/// The bound-suite ensemble: 100 random 40x40 instances with `m` in 2..=10.
fn suite() -> Vec<(Instance, usize)> {
    (0..SUITE_INSTANCES as u64)
        .map(|i| {
            let mut rng = trial_rng(40, i);
            let m = rng.random_range(2..=10);
            (Instance::random(&mut rng, SUITE_N), m)
        })
        .collect()
}

fn criterion_4(ens: &[(Instance, usize)]) -> Outcome {
    let start = Instant::now();
    let (mut checks, mut violations, mut worst) = (0, 0, 0.0f64);
    for (inst, m) in ens {
        for (_, mu) in inst.mu_candidates(*m) {
            for order in [Order::First, Order::Second] {
                for c in eigenvalue_bounds(inst, *m, mu, order) {
                    checks += 1;
                    worst = worst.max(c.error / c.bound);
                    if !c.holds() {
                        violations += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        4,
        "eigenvalue bound suite",
        violations == 0 && elapsed < 60.0,
        format!("{violations} violations in {checks} root checks, worst error/bound {worst:.3}"),
        start,
    )
}

fn criterion_5(ens: &[(Instance, usize)]) -> Outcome {
    let start = Instant::now();
    let (mut checks, mut violations, mut worst) = (0, 0, 0.0f64);
    for (inst, m) in ens {
        for (_, mu) in inst.mu_candidates(*m) {
            for f in [EigvecFormula::FirstOrder, EigvecFormula::SecondOrder] {
                for c in eigenvector_bounds(inst, *m, mu, f) {
                    checks += 1;
                    worst = worst.max(c.error / c.bound);
                    if !c.holds() {
                        violations += 1;
                    }
                }
            }
        }
    }
    report(
        5,
        "eigenvector bound suite",
        violations == 0,
        format!("{violations} violations in {checks} vector checks, worst error/bound {worst:.3}"),
        start,
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut samples = 0;
    for i in 0..20 {
        let mut rng = trial_rng(60, i);
        let inst = Instance::random(&mut rng, 30);
        let m = rng.random_range(2..=8);
        let star = inst
            .mu_candidates(m)
            .into_iter()
            .find(|(p, _)| *p == MuPolicy::Star);
        let Some((_, mu)) = star else { continue };
        let p = inst.problem(m, mu);
        let lo = inst.lambdas[m - 1];
        let hi = inst.lambdas[0] + 2.0 * inst.rho;
        let mut taken = 0;
        while taken < 100 {
            let t = rng.random_range(lo..hi);
            if inst.lambdas[..m].iter().any(|l| (l - t).abs() < 1e-6) {
                continue;
            }
            let d = (p.eval_w2(t).unwrap() - p.eval_w1(t).unwrap()).abs();
            worst = worst.max(d);
            taken += 1;
        }
        samples += taken;
    }
    report(
        6,
        "second-order equation equals first order at mu*",
        worst <= 1e-12 && samples == 2000,
        format!("max |w2 - w1| {worst:.2e} over {samples} points (<= 1e-12)"),
        start,
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let rows = labbench::run(&ExperimentSpec::new(ExperimentKind::GraphSigma, 1)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    // Bands apply to the mean over insertions; single insertions may sit
    // slightly above 1 since sigma_1 is only pinned to 1 - O(1/k).
    let mut pass = elapsed < 300.0;
    let mut detail = Vec::new();
    for k in [5.0, 10.0, 20.0, 40.0] {
        let at_k: Vec<[f64; 4]> = measurements(&rows, "knn")
            .filter(|r| r.param == k)
            .map(|r| r.sigma.unwrap())
            .collect();
        let mean1 = at_k.iter().map(|s| s[0]).sum::<f64>() / at_k.len() as f64;
        let mean2 = at_k.iter().map(|s| s[1]).sum::<f64>() / at_k.len() as f64;
        pass &= (0.88..=1.0).contains(&mean1);
        if k >= 10.0 {
            pass &= mean2 <= 0.12;
        }
        let min1 = at_k.iter().map(|s| s[0]).fold(f64::INFINITY, f64::min);
        let max1 = at_k.iter().map(|s| s[0]).fold(0.0, f64::max);
        let max2 = at_k.iter().map(|s| s[1]).fold(0.0, f64::max);
        detail.push(format!(
            "k={k}: mean s1 {mean1:.3} (range {min1:.3}..{max1:.3}), mean s2 {mean2:.3} (max {max2:.3})"
        ));
    }
    let g1 = find_summary(&rows, "knn", "slope_one_minus_sigma1").unwrap();
    let g2 = find_summary(&rows, "knn", "slope_sigma2").unwrap();
    pass &= within(g1, -1.0, 0.3) && within(g2, -1.0, 0.3);
    detail.push(format!("slopes {g1:.3}, {g2:.3} (-1 +- 0.3)"));
    report(
        7,
        "singular values of the Laplacian change",
        pass,
        detail.join("; "),
        start,
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let rows = labbench::run(&ExperimentSpec::new(ExperimentKind::ExtensionCompare, 1)).unwrap();
    let ang = |l: &str| find_summary(&rows, l, "median_eigenvector_angle_deg").unwrap();
    let err = |l: &str| find_summary(&rows, l, "median_eigenvalue_abs_err").unwrap();
    let mut pass = true;
    let mut detail = vec![format!("no update {:.3} deg", ang("no_update"))];
    for v in ["first_mu0", "second_mustar"] {
        let (raw, cor) = (format!("{v}_raw"), format!("{v}_corrected"));
        let ratio = err(&raw) / err(&cor);
        pass &= ang(&cor) <= ang(&raw) && ang(&raw) <= ang("no_update") && ratio >= 2.0;
        detail.push(format!(
            "{v}: angle {:.3} -> {:.3} deg, eigenvalue error {:.2e} -> {:.2e} ({ratio:.1}x)",
            ang(&raw),
            ang(&cor),
            err(&raw),
            err(&cor)
        ));
    }
    report(
        8,
        "extension ordering and correction gain",
        pass,
        detail.join("; "),
        start,
    )
}

fn criterion_9(ens: &[(Instance, usize)]) -> Outcome {
    let start = Instant::now();
    let (mut checks, mut violations, mut worst) = (0, 0, 0.0f64);
    let configs = [
        TruncationConfig::new(Order::First, MuPolicy::Zero),
        TruncationConfig::new(Order::First, MuPolicy::Mean),
        TruncationConfig::new(Order::Second, MuPolicy::Star),
    ];
    for (inst, m) in ens {
        let known = inst.known(*m);
        let b = inst.updated();
        let b_norm = b.frobenius_norm();
        for cfg in &configs {
            let res = rank_one_update(&known, &inst.update(), cfg, Some(&inst.a), true).unwrap();
            if !matches!(res.e_bound, Some(EBound::Bounded(_))) {
                continue;
            }
            let raw = res.raw_vectors.as_ref().unwrap();
            let t = &res.values;
            let lhs = rankone::update::residual_quality(&b, &res.vectors, t).unwrap();
            let before = rankone::update::residual_quality(&b, raw, t).unwrap();
            let g = (raw.tr_mul(raw) - DMatrix::identity(*m, *m)).norm();
            let slack = 2.0 * g * res.vectors.norm() * (b_norm + t.norm());
            let floor = common::FLOOR_ULPS * f64::EPSILON * (b_norm + t.norm()) * (*m as f64);
            checks += 1;
            worst = worst.max((lhs - before) / slack.max(f64::MIN_POSITIVE));
            if lhs > before + slack + floor {
                violations += 1;
            }
        }
    }
    report(
        9,
        "re-orthogonalization residual inequality",
        violations == 0 && checks > 0,
        format!("{violations} violations in {checks} orthogonalized updates, worst used fraction of slack {worst:.3}"),
        start,
    )
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let rows = labbench::run(&ExperimentSpec::new(ExperimentKind::Scaling, 1)).unwrap();
    let e1 = find_summary(&rows, "update_first_mu0", "time_exponent_n").unwrap();
    let e2 = find_summary(&rows, "update_second_mustar", "time_exponent_n").unwrap();
    let em = find_summary(&rows, "eigvec_second_mustar", "time_exponent_m").unwrap();
    report(
        10,
        "update time scaling in n",
        e1 <= 1.3 && e2 <= 1.3,
        format!("exponents {e1:.3} (first, mu=0), {e2:.3} (second, mu*) (<= 1.3); eigenvector time exponent in m {em:.3}"),
        start,
    )
}

/// CSV with wall times and the exponents fitted to them blanked, the only
/// values that depend on the machine rather than the seed.
fn csv_without_times(rows: &[MetricRow]) -> String {
    let blanked: Vec<MetricRow> = rows
        .iter()
        .cloned()
        .map(|mut r| {
            r.wall_time = None;
            if r.statistic
                .as_deref()
                .is_some_and(|s| s.starts_with("time_exponent"))
            {
                r.value = None;
            }
            r
        })
        .collect();
    labbench::to_csv(&blanked)
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let mut specs = Vec::new();
    let mut s = ExperimentSpec::new(ExperimentKind::SyntheticRankOne, 7);
    s.n = 300;
    s.trials = 3;
    specs.push(s);
    let mut s = ExperimentSpec::new(ExperimentKind::GraphSigma, 7);
    s.n = 300;
    s.trials = 4;
    specs.push(s);
    let mut s = ExperimentSpec::new(ExperimentKind::ExtensionCompare, 7);
    s.n = 300;
    s.trials = 4;
    specs.push(s);
    let mut s = ExperimentSpec::new(ExperimentKind::Scaling, 7);
    s.ns = vec![500, 1000];
    s.n = 500;
    s.ms = vec![5, 10];
    s.nnz_per_row = 20;
    s.repeats = 1;
    specs.push(s);
    let mut pass = true;
    let mut detail = Vec::new();
    for spec in &specs {
        let a = labbench::run(spec).unwrap();
        let b = labbench::run(spec).unwrap();
        let same = if spec.kind == ExperimentKind::Scaling {
            csv_without_times(&a) == csv_without_times(&b)
        } else {
            labbench::to_csv(&a) == labbench::to_csv(&b)
        };
        pass &= same;
        detail.push(format!(
            "{} {}",
            spec.kind.name(),
            if same { "identical" } else { "differs" }
        ));
    }
    report(
        11,
        "same seed gives the same CSV bytes",
        pass,
        detail.join(", "),
        start,
    )
}

fn main() {
    let total = Instant::now();
    let mut outcomes = vec![criterion_1()];
    let (c2, c3) = criteria_2_3();
    outcomes.push(c2);
    outcomes.push(c3);
    let ens = suite();
    outcomes.push(criterion_4(&ens));
    outcomes.push(criterion_5(&ens));
    outcomes.push(criterion_6());
    outcomes.push(criterion_7());
    outcomes.push(criterion_8());
    outcomes.push(criterion_9(&ens));
    outcomes.push(criterion_10());
    outcomes.push(criterion_11());

    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.pass).collect();
    let unexpected: Vec<&&Outcome> = failed
        .iter()
        .filter(|o| !KNOWN_FAILURES.contains(&o.id))
        .collect();
    let passed = outcomes.len() - failed.len();
    println!(
        "acceptance: {passed}/{} criteria pass [{:.1} s]",
        outcomes.len(),
        total.elapsed().as_secs_f64()
    );
    for o in &failed {
        let tag = if KNOWN_FAILURES.contains(&o.id) {
            "known"
        } else {
            "unexpected"
        };
        println!("  {tag} failure: criterion {} ({})", o.id, o.detail);
    }
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
