//! Executes a [`RunConfig`]: the convergence ladder, optional reference run,
//! and all files written to the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use anyhow::{Context, Result};
use hjb_bdf2::analysis::{
    convergence_table_partial, doubling_ladder, oscillation_metric, ConvergenceTable, ErrorPolicy,
    ErrorRange, Rung,
};
use hjb_bdf2::fd_ops::{assemble_step_system, StepHistory};
use hjb_bdf2::problem::{
    check_assumptions, controlled_diffusion_problem, eikonal_problem, eikonal_problem_negative,
    AssumptionReport, DriftMode, HjbProblem,
};
use hjb_bdf2::stepper::{run_scheme, Retention, Scheme1D, StepRecord, Trajectory};
use hjb_bdf2::{Grid1D, SolverOptions, TimeGrid};
use serde_json::{json, Value};

use crate::config::{CustomSpec, ReferenceSpec, RunConfig, Scenario, SchemeChoice};

pub struct RunOutcome {
    pub table: ConvergenceTable,
    /// Every row completed and every step had a feasible certificate.
    pub success: bool,
    pub files: Vec<PathBuf>,
}

fn custom_problem(c: &CustomSpec) -> HjbProblem {
    let lookup = |values: &[f64], controls: &[f64]| {
        let pairs: Vec<(f64, f64)> = controls
            .iter()
            .copied()
            .zip(values.iter().copied())
            .collect();
        move |_: f64, _: f64, a: f64| {
            pairs
                .iter()
                .find(|(ctl, _)| *ctl == a)
                .map_or(f64::NAN, |(_, v)| *v)
        }
    };
    // constant data keep every difference quotient at zero, so the exact
    // solution solves v' + max_a source_a = 0
    let top = c.source.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v0 = c.initial;
    let exact = move |t: f64, _: f64| v0 - t * top;
    HjbProblem::new(c.controls.clone(), c.domain, c.horizon)
        .named("custom")
        .with_sigma(lookup(&c.sigma, &c.controls))
        .with_drift(lookup(&c.drift, &c.controls))
        .with_source(lookup(&c.source, &c.controls))
        .with_initial(move |_| v0)
        .with_boundary(exact)
        .with_exact(exact)
}

pub fn build_problem(cfg: &RunConfig) -> HjbProblem {
    let p = match cfg.scenario {
        Scenario::Eikonal => eikonal_problem(),
        Scenario::EikonalNeg => eikonal_problem_negative(),
        Scenario::ControlledDiffusion => controlled_diffusion_problem(),
        Scenario::Custom => custom_problem(cfg.custom.as_ref().expect("validated custom spec")),
    };
    if cfg.scheme == SchemeChoice::Bdf2CenteredDrift {
        p.with_drift_mode(DriftMode::Centered)
    } else {
        p
    }
}

fn scheme_1d(s: SchemeChoice) -> Scheme1D {
    match s {
        SchemeChoice::Bdf2 | SchemeChoice::Bdf2CenteredDrift => Scheme1D::Bdf2,
        SchemeChoice::Euler => Scheme1D::ImplicitEuler,
        SchemeChoice::Cn => Scheme1D::CrankNicolson,
    }
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        policy_predictor: cfg.policy_predictor,
        ..SolverOptions::default()
    }
}

fn grids(cfg: &RunConfig, n: usize, cells: usize) -> Result<(Grid1D, TimeGrid)> {
    let (a, b) = cfg.domain();
    Ok((
        Grid1D::new(a, b, cells - 1)?,
        TimeGrid::new(cfg.horizon(), n)?,
    ))
}

/// What is kept from each row's run for the report and profiles.
struct RowCapture {
    steps: Vec<StepRecord>,
    assumptions: AssumptionReport,
    oscillation: f64,
    profile: Vec<u8>,
}

fn assumption_json(r: &AssumptionReport) -> Value {
    json!({
        "samples": {
            "x_min": r.samples.x_min,
            "x_max": r.samples.x_max,
            "nodes": r.samples.nodes,
            "h": r.samples.h,
            "time_levels": r.samples.time_levels,
            "tau": r.samples.tau,
            "controls": r.samples.controls,
        },
        "sup_sigma": r.sup_sigma,
        "sup_drift": r.sup_drift,
        "sup_discount": r.sup_discount,
        "ellipticity_eta": r.ellipticity_eta,
        "sigma_control_independent": r.sigma_control_independent,
        "sigma2_lipschitz": r.sigma2_lipschitz,
        "drift_control_independent": r.drift_control_independent,
        "drift_lipschitz": r.drift_lipschitz,
        "semiconcavity": r.semiconcavity,
        "a1_bounded": r.a1_bounded(),
        "a2_elliptic": r.a2_elliptic(),
        "a3_holds": r.a3_holds(),
        "a4_holds": r.a4_holds(),
    })
}

fn step_json(s: &StepRecord) -> Value {
    json!({
        "step": s.step,
        "t": s.t,
        "kind": format!("{:?}", s.kind),
        "cfl_ratio": s.cfl_ratio,
        "certificate_ratio": s.stats.certificate_ratio,
        "iterations": s.stats.iterations,
        "final_residual_inf": s.stats.final_residual_inf,
        "contraction_estimate": s.stats.contraction_estimate,
        "predictor_rounds": s.stats.predictor_rounds,
    })
}

fn config_json(cfg: &RunConfig) -> Value {
    let reference = match cfg.reference {
        ReferenceSpec::Exact { range } => json!({
            "kind": "exact",
            "range": match range {
                ErrorRange::FromSecondStep => "from-second-step",
                ErrorRange::AllLevels => "all",
                ErrorRange::FinalLevel => "final",
            },
        }),
        ReferenceSpec::EulerReference { n, cells } => {
            json!({"kind": "euler-reference", "n": n, "cells": cells})
        }
    };
    json!({
        "scenario": cfg.scenario.name(),
        "scheme": cfg.scheme.name(),
        "ladder": {"n0": cfg.ladder.n0, "cells0": cfg.ladder.cells0, "levels": cfg.ladder.levels},
        "cfl": cfg.cfl,
        "norms": cfg.norms.iter().map(|n| n.name()).collect::<Vec<_>>(),
        "reference": reference,
        "solver": {
            "tol": cfg.tol,
            "max_iter": cfg.max_iter,
            "policy_predictor": cfg.policy_predictor,
        },
    })
}

fn write_file(path: &Path, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    files.push(path.to_path_buf());
    Ok(())
}

/// One dump per control of the first (backward-Euler) step matrix on the
/// coarsest row.
fn dump_matrices(
    cfg: &RunConfig,
    problem: &HjbProblem,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let (grid, time) = grids(cfg, cfg.ladder.n0, cfg.ladder.cells0)?;
    let u0: Vec<f64> = grid
        .interior_nodes()
        .iter()
        .map(|&x| (problem.initial)(x))
        .collect();
    let sys = assemble_step_system(
        problem,
        &grid,
        time.t(1),
        time.tau(),
        StepHistory::Euler { previous: &u0 },
    )?;
    let dir = out.join("matrices");
    fs::create_dir_all(&dir)?;
    for (a, m) in sys.matrices.iter().enumerate() {
        let mut buf = Vec::new();
        m.write_dump(&mut buf)?;
        write_file(&dir.join(format!("step1_control{a}.txt")), &buf, files)?;
    }
    let mut rhs = String::from("control,i,q\n");
    for (a, q) in sys.rhs.iter().enumerate() {
        for (i, v) in q.iter().enumerate() {
            rhs.push_str(&format!("{a},{},{v:.17e}\n", i + 1));
        }
    }
    write_file(&dir.join("step1_rhs.csv"), rhs.as_bytes(), files)
}

/// Runs the ladder and writes `table.csv`, `report.json` and, if requested,
/// profiles and matrix dumps into `out`.
pub fn run_scenario(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let problem = build_problem(cfg);
    let opts = solver_options(cfg);
    let scheme = scheme_1d(cfg.scheme);
    let ladder = doubling_ladder(cfg.ladder.n0, cfg.ladder.cells0, cfg.ladder.levels);

    let reference_start = Instant::now();
    let reference = match cfg.reference {
        ReferenceSpec::EulerReference { n, cells } => {
            let (grid, time) = grids(cfg, n, cells)?;
            let r = run_scheme(
                Scheme1D::ImplicitEuler,
                &problem,
                &grid,
                &time,
                &opts,
                Retention::LastTwo,
            )
            .context("reference run failed")?;
            Some(r)
        }
        ReferenceSpec::Exact { .. } => None,
    };
    let reference_s = reference_start.elapsed().as_secs_f64();

    let exact = problem.exact.clone();
    let policy = match (&cfg.reference, &reference) {
        (ReferenceSpec::Exact { range }, _) => ErrorPolicy::Exact {
            exact: &**exact.as_ref().context("scenario has no exact solution")?,
            range: *range,
        },
        (_, Some(r)) => ErrorPolicy::Reference(r),
        _ => unreachable!("reference computed above"),
    };
    let retention = match cfg.reference {
        ReferenceSpec::Exact {
            range: ErrorRange::FinalLevel,
        }
        | ReferenceSpec::EulerReference { .. } => Retention::LastTwo,
        ReferenceSpec::Exact { .. } => Retention::AllLevels,
    };

    let captures: Arc<Mutex<BTreeMap<(usize, usize), RowCapture>>> = Arc::default();
    let (table, failure) =
        convergence_table_partial(&ladder, &cfg.norms, &policy, cfg.parallel, |r: Rung| {
            let (a, b) = cfg.domain();
            let grid = Grid1D::new(a, b, r.i_plus_1 - 1)?;
            let time = TimeGrid::new(cfg.horizon(), r.n)?;
            let traj: Trajectory = run_scheme(scheme, &problem, &grid, &time, &opts, retention)?;
            let mut profile = Vec::new();
            traj.write_snapshot_csv(r.n, &mut profile)
                .expect("writing to memory");
            let capture = RowCapture {
                steps: traj.steps.clone(),
                assumptions: check_assumptions(&problem, &grid, &time),
                oscillation: oscillation_metric(traj.final_level()),
                profile,
            };
            captures
                .lock()
                .expect("capture lock")
                .insert((r.n, r.i_plus_1), capture);
            Ok(traj)
        })?;
    let captures = Arc::try_unwrap(captures)
        .ok()
        .expect("no outstanding capture handles")
        .into_inner()
        .expect("capture lock");

    let mut files = Vec::new();
    write_file(
        &out.join("table.csv"),
        table.to_csv_string().as_bytes(),
        &mut files,
    )?;

    let mut certificates_feasible = true;
    let mut rows_json = Vec::new();
    for row in &table.rows {
        let cap = captures.get(&(row.rung.n, row.rung.i_plus_1));
        let feasible = cap.is_some_and(|c| c.steps.iter().all(|s| s.stats.certificate_ratio < 1.0));
        if row.errors.is_some() {
            certificates_feasible &= feasible;
        }
        rows_json.push(json!({
            "n": row.rung.n,
            "i_plus_1": row.rung.i_plus_1,
            "status": if row.errors.is_some() { "ok" } else { "failed" },
            "failure": row.failure,
            "errors": row.errors.as_ref().map(|e| {
                table.norms.iter().zip(e).map(|(k, v)| (k.name().to_string(), json!(v)))
                    .collect::<serde_json::Map<_, _>>()
            }),
            "orders": table.norms.iter().zip(&row.orders).map(|(k, o)| (k.name().to_string(), json!(o)))
                .collect::<serde_json::Map<_, _>>(),
            "cpu_s": row.cpu_s,
            "worst_certificate_ratio": row.worst_certificate_ratio,
            "certificates_feasible": feasible,
            "total_iterations": row.total_iterations,
            "max_residual": row.max_residual,
            "oscillation": cap.map(|c| c.oscillation),
            "assumptions": cap.map(|c| assumption_json(&c.assumptions)),
            "steps": cap.map(|c| c.steps.iter().map(step_json).collect::<Vec<_>>()),
        }));
    }
    let success = failure.is_none() && certificates_feasible;
    let report = json!({
        "config": config_json(cfg),
        "reference": reference.as_ref().map(|r| json!({
            "n": r.time.steps(),
            "i_plus_1": r.grid.interior_count() + 1,
            "cpu_s": reference_s,
            "worst_certificate_ratio": r.worst_certificate_ratio(),
        })),
        "rows": rows_json,
        "success": success,
        "first_failure": failure.as_ref().map(|e| e.to_string()),
    });
    let report_path = out.join("report.json");
    let mut w = BufWriter::new(fs::File::create(&report_path)?);
    serde_json::to_writer_pretty(&mut w, &report)?;
    drop(w);
    files.push(report_path);

    if cfg.dump_profiles {
        let dir = out.join("profiles");
        fs::create_dir_all(&dir)?;
        for ((n, cells), cap) in &captures {
            write_file(
                &dir.join(format!("profile_N{n}_I{cells}.csv")),
                &cap.profile,
                &mut files,
            )?;
        }
    }
    if cfg.dump_matrices {
        dump_matrices(cfg, &problem, out, &mut files)?;
    }
    Ok(RunOutcome {
        table,
        success,
        files,
    })
}
