//! Subcommand bodies: read inputs, call the library, write outputs.

use std::path::Path;

use rankone::extend::{extend as extend_pairs, lift_eigenpairs};
use rankone::graph::{augment_and_delta, build_weights, laplacian_sym, GraphConfig, Kernel};
use rankone::io;
use rankone::labbench::{self, ExperimentKind, ExperimentSpec};
use rankone::update::{rank_one_update_with, EBound, UpdateOptions, UpdateResult};
use rankone::{Error, MuPolicy, Order, PartialEigen, RankOneUpdate, Result, TruncationConfig};
use serde_json::{json, Value};

use crate::output::{sidecar, write_atomic, write_manifest, Inputs};
use crate::{ExperimentArgs, ExtendArgs, GraphArgs, LaplacianArgs, TruncArgs, UpdateArgs};

/// Prefixes parse errors with the file they came from.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn graph_config(g: &GraphArgs) -> GraphConfig {
    GraphConfig {
        rule: g.rule,
        kernel: Kernel::Gaussian { epsilon: g.epsilon },
        self_loops: g.self_loops,
    }
}

fn graph_json(g: &GraphArgs) -> Value {
    let rule = match g.rule {
        rankone::graph::NeighborRule::Knn(k) => json!({ "knn": k }),
        rankone::graph::NeighborRule::Delta(d) => json!({ "delta": d }),
    };
    json!({ "rule": rule, "epsilon": g.epsilon, "self_loops": g.self_loops })
}

fn trunc_config(t: &TruncArgs) -> TruncationConfig {
    TruncationConfig {
        root_tol: t.root_tol,
        max_iters: t.max_iters,
        ..TruncationConfig::new(t.order, t.mu)
    }
}

fn mu_name(p: MuPolicy) -> String {
    match p {
        MuPolicy::Zero => "zero".into(),
        MuPolicy::Mean => "mean".into(),
        MuPolicy::Star => "star".into(),
        MuPolicy::Explicit(x) => format!("{x}"),
    }
}

fn trunc_json(cfg: &TruncationConfig) -> Value {
    json!({
        "order": match cfg.order { Order::First => 1, Order::Second => 2 },
        "mu": mu_name(cfg.mu_policy),
        "root_tol": cfg.root_tol,
        "max_iters": cfg.max_iters,
        "pole_offset": cfg.pole_offset,
    })
}

fn update_diagnostics(res: &UpdateResult) -> Value {
    let mut warnings = Vec::new();
    if let Some(p) = res.passthrough {
        warnings.push(format!("input returned unchanged: {p:?}"));
    }
    if let Some(mu) = res.mu {
        if mu.fell_back() {
            warnings.push(format!(
                "mu policy {} fell back to {}",
                mu_name(mu.requested),
                mu_name(mu.used)
            ));
        }
    }
    json!({
        "mu_requested": res.mu.map(|m| mu_name(m.requested)),
        "mu_used": res.mu.map(|m| mu_name(m.used)),
        "mu_value": res.mu_used(),
        "gram_defect": res.gram_defect,
        "e_bound": res.e_bound.map(|b| match b {
            EBound::Bounded(x) => json!(x),
            EBound::Unbounded => json!("unbounded"),
        }),
        "residual_quality": res.residual_quality,
        "deflation": res.deflation.as_ref().map(|d| json!({
            "kept": d.kept.len(),
            "frozen": d.frozen.len(),
            "merged_groups": d.merged().count(),
            "pinned": d.pinned.len(),
        })),
        "tail_root_used": res.tail_root_used,
        "passthrough": res.passthrough.map(|p| format!("{p:?}")),
        "warnings": warnings,
    })
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    write_atomic(
        path,
        &(serde_json::to_string_pretty(v).expect("json serializes") + "\n"),
    )
}

fn warn_all(diag: &Value) {
    if let Some(ws) = diag["warnings"].as_array() {
        for w in ws {
            eprintln!("warning: {}", w.as_str().unwrap_or_default());
        }
    }
}

pub fn laplacian(a: &LaplacianArgs) -> Result<()> {
    let mut inputs = Inputs::new();
    let pc = in_file(&a.points, io::read_point_cloud(&inputs.read(&a.points)?))?;
    let cfg = graph_config(&a.graph);
    let l = laplacian_sym(&build_weights(&pc, &cfg)?)?;
    write_atomic(&a.out, &io::write_sym_coo(&l))?;
    write_manifest(
        &a.out,
        "laplacian",
        graph_json(&a.graph),
        &inputs,
        None,
        &[&a.out],
    )
}

pub fn update(a: &UpdateArgs) -> Result<()> {
    let mut inputs = Inputs::new();
    let (values, vectors) = in_file(&a.eigs, io::read_eig(&inputs.read(&a.eigs)?))?;
    let eig = PartialEigen::new(values, vectors, None)?;
    let v = in_file(&a.v, io::read_vector(&inputs.read(&a.v)?))?;
    let matrix = match &a.matrix {
        Some(p) => Some(in_file(p, io::read_sym_coo(&inputs.read(p)?))?),
        None => None,
    };
    let cfg = trunc_config(&a.trunc);
    let upd = RankOneUpdate::new(a.rho, v)?;
    let opts = UpdateOptions {
        orthogonalize: a.orthogonalize,
        ..UpdateOptions::default()
    };
    let res = rank_one_update_with(&eig, &upd, &cfg, matrix.as_ref(), &opts)?;
    let diag = update_diagnostics(&res);
    warn_all(&diag);
    let diag_path = sidecar(&a.out, ".diag.json");
    write_atomic(&a.out, &io::write_eig(&res.values, &res.vectors))?;
    write_json(&diag_path, &diag)?;
    let config = json!({
        "truncation": trunc_json(&cfg),
        "rho": a.rho,
        "orthogonalize": a.orthogonalize,
    });
    write_manifest(
        &a.out,
        "update",
        config,
        &inputs,
        None,
        &[&a.out, &diag_path],
    )
}

pub fn extend(a: &ExtendArgs) -> Result<()> {
    let mut inputs = Inputs::new();
    let pc = in_file(&a.points, io::read_point_cloud(&inputs.read(&a.points)?))?;
    let x0 = in_file(&a.new_point, io::read_vector(&inputs.read(&a.new_point)?))?;
    let (values, vectors) = in_file(&a.eigs, io::read_eig(&inputs.read(&a.eigs)?))?;
    let stored = PartialEigen::new(values, vectors, None)?;
    let gcfg = graph_config(&a.graph);
    let tcfg = trunc_config(&a.trunc);
    let keep = a.keep.unwrap_or(stored.m() + 1);
    let pair = augment_and_delta(&pc, x0.as_slice(), &gcfg)?;
    let lifted = lift_eigenpairs(&stored, keep)?;
    let res = extend_pairs(&lifted, &pair, &tcfg, a.correct)?;

    let mut diag = match &res.update {
        Some(u) => update_diagnostics(u),
        None => {
            json!({ "warnings": ["new point is disconnected; lifted pairs returned unchanged"] })
        }
    };
    diag["rho"] = json!(res.rho);
    diag["power_iterations"] = json!(res.power_iterations);
    diag["correction_matrix_norm"] = json!(res.correction_matrix_norm);
    diag["skipped_corrections"] = json!(res.corrected.as_ref().map(|c| c.skipped));
    diag["disconnected"] = json!(res.disconnected);
    diag["affected_vertices"] = json!(pair.affected.len());
    diag["lifted_pairs"] = json!(lifted.m());
    warn_all(&diag);

    let diag_path = sidecar(&a.out, ".diag.json");
    let raw_path = sidecar(&a.out, ".uncorrected");
    let mut outputs = vec![a.out.as_path()];
    match &res.corrected {
        Some(c) => {
            write_atomic(&a.out, &io::write_eig(&c.values, &c.vectors))?;
            write_atomic(
                &raw_path,
                &io::write_eig(&res.uncorrected_values, &res.uncorrected_vectors),
            )?;
            outputs.push(&raw_path);
        }
        None => write_atomic(
            &a.out,
            &io::write_eig(&res.uncorrected_values, &res.uncorrected_vectors),
        )?,
    }
    write_json(&diag_path, &diag)?;
    outputs.push(&diag_path);
    let config = json!({
        "graph": graph_json(&a.graph),
        "truncation": trunc_json(&tcfg),
        "correct": a.correct,
        "keep": keep,
    });
    write_manifest(&a.out, "extend", config, &inputs, None, &outputs)
}

fn spec_json(s: &ExperimentSpec) -> Value {
    json!({
        "kind": s.kind.name(),
        "seed": s.seed,
        "n": s.n,
        "m": s.m,
        "trials": s.trials,
        "mu_hats": s.mu_hats,
        "tail_sigma": s.tail_sigma,
        "ks": s.ks,
        "dim": s.dim,
        "components": s.components,
        "center_scale": s.center_scale,
        "epsilon_factor": s.epsilon_factor,
        "self_loops": s.self_loops,
        "ns": s.ns,
        "ms": s.ms,
        "nnz_per_row": s.nnz_per_row,
        "repeats": s.repeats,
    })
}

pub fn experiment(a: &ExperimentArgs) -> Result<()> {
    let kind = ExperimentKind::parse(&a.kind)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment kind `{}`", a.kind)))?;
    let mut spec = ExperimentSpec::new(kind, a.seed);
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(m) = a.m {
        spec.m = m;
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(ks) = &a.ks {
        spec.ks = ks.clone();
    }
    if let Some(mh) = &a.mu_hats {
        spec.mu_hats = mh.clone();
    }
    if let Some(ns) = &a.ns {
        spec.ns = ns.clone();
    }
    if let Some(ms) = &a.ms {
        spec.ms = ms.clone();
    }
    if let Some(r) = a.repeats {
        spec.repeats = r;
    }
    let rows = labbench::run(&spec)?;
    write_atomic(&a.out, &labbench::to_csv(&rows))?;
    write_manifest(
        &a.out,
        "experiment",
        spec_json(&spec),
        &Inputs::new(),
        Some(spec.seed),
        &[&a.out],
    )
}
