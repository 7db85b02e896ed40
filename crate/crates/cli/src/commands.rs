//! The six verbs. Each returns the JSON printed on stdout and, when an
//! output directory is configured, writes its files there.

use std::fs;
use std::path::{Path, PathBuf};

use neumann_rigidity::continuation::{bifurcation_report, rigidity_sweep, trace_branch, BranchPoint};
use neumann_rigidity::diagnostics::run_diagnostics;
use neumann_rigidity::io::{read_field, write_batch_csv, write_branch_csv, write_field, write_sweep_csv};
use neumann_rigidity::scalar_model::{bifurcation_epsilon, constant_chain, lipschitz_k, threshold_of_m, ModelParams};
use neumann_rigidity::solver::{residual, residual_norm, SolutionRecord, StartSpec, SteadyStateProblem, CLASSIFICATION_THRESHOLD};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Upward schedule (fractions of the detected `ε*`) that checks the branch
/// closes back onto the constant.
pub const CLOSURE_FRACTIONS: [f64; 7] = [0.96, 0.98, 0.99, 0.995, 1.005, 1.02, 1.05];

/// Default downward continuation schedule, fractions of the predicted `ε*`.
pub fn default_branch_fractions() -> Vec<f64> {
    (0..9).map(|k| 0.90 - 0.05 * k as f64).collect()
}

fn output_dir(config: &ExperimentConfig) -> CliResult<Option<PathBuf>> {
    match &config.output {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn to_value(value: &impl Serialize) -> Value {
    serde_json::to_value(value).expect("serializable")
}

/// A solution record without its nodal values, for summaries and sidecars.
fn record_summary(rec: &SolutionRecord) -> Value {
    let mut v = to_value(rec);
    v.as_object_mut().expect("record is an object").remove("u");
    v
}

pub fn cmd_constants(config: &ExperimentConfig) -> CliResult<Value> {
    let problem = config.problem()?;
    let params = ModelParams::new(config.a, config.eps.unwrap_or(1.0), config.q)?;
    let chain = constant_chain(&params, problem.op.area, problem.op.diameter)?;
    let mu1 = problem.mu1();
    let thresholds: Vec<Value> = config
        .m_values
        .iter()
        .map(|&m| json!({ "m": m, "k": lipschitz_k(m, config.a), "threshold": threshold_of_m(m, config.a, mu1) }))
        .collect();
    let mut out = to_value(&chain);
    let obj = out.as_object_mut().expect("chain is an object");
    obj.insert("mu1".into(), json!(mu1));
    obj.insert("mu1_degenerate".into(), json!(problem.eigen.degenerate));
    obj.insert("eps_star".into(), json!(bifurcation_epsilon(config.a, mu1)?));
    obj.insert("thresholds".into(), Value::Array(thresholds));
    if let Some(dir) = output_dir(config)? {
        write_json(&dir.join("constants.json"), &out)?;
    }
    Ok(out)
}

pub fn cmd_eigen(config: &ExperimentConfig) -> CliResult<Value> {
    let problem = config.problem()?;
    let e = &problem.eigen;
    let out = json!({
        "mu1": e.mu1,
        "mu2": e.mu2,
        "degenerate": e.degenerate,
        "nodes": problem.dim(),
        "area": problem.op.area,
        "diameter": problem.op.diameter,
        "h": problem.op.h,
    });
    if let Some(dir) = output_dir(config)? {
        write_json(&dir.join("eigen.json"), &out)?;
        // The header's ε is a placeholder unless the config sets one.
        write_field(&dir.join("eigenfunction.field"), &e.phi1, config.eps.unwrap_or(0.0), config.a)?;
    }
    Ok(out)
}

/// Parses `const:<value>` (also `const:xi`, `const:ln_a`), `eig:<s>` for
/// `ξ_a + s ξ_a φ₁`, and `noise:<index>` with the config seed.
pub fn parse_start(spec: &str, problem: &SteadyStateProblem, seed: u64) -> CliResult<StartSpec> {
    let bad = || CliError::Validation(format!("cannot parse start spec {spec:?} (expected const:<v|xi|ln_a>, eig:<s>, noise:<i>)"));
    let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
    Ok(match kind {
        "const" => StartSpec::Constant {
            value: match arg {
                "xi" => problem.xi,
                "ln_a" => problem.a.ln(),
                v => v.parse().map_err(|_| bad())?,
            },
        },
        "eig" => {
            let s: f64 = arg.parse().map_err(|_| bad())?;
            StartSpec::Eigen { amplitude: s * problem.xi }
        }
        "noise" => StartSpec::Noise {
            seed,
            index: arg.parse().map_err(|_| bad())?,
        },
        _ => return Err(bad()),
    })
}

pub fn cmd_solve(config: &ExperimentConfig, start: &str) -> CliResult<Value> {
    let eps = config.require_eps()?;
    let problem = config.problem()?;
    let spec = parse_start(start, &problem, config.seed)?;
    let rec = problem.newton_solve(&problem.start_field(&spec), eps)?;
    let mut out = record_summary(&rec);
    out.as_object_mut()
        .expect("record is an object")
        .insert("start".into(), json!(spec.label()));
    if let Some(dir) = output_dir(config)? {
        write_field(&dir.join("solution.field"), &rec.u, eps, config.a)?;
        write_json(&dir.join("solution.json"), &out)?;
    }
    Ok(out)
}

pub fn cmd_sweep(config: &ExperimentConfig) -> CliResult<Value> {
    let grid = config.require_grid()?;
    let problem = config.problem()?;
    let report = rigidity_sweep(&problem, grid, config.n_starts, config.seed)?;
    let out = to_value(&report);
    if let Some(dir) = output_dir(config)? {
        write_sweep_csv(&dir.join("sweep.csv"), &report.rows)?;
        write_batch_csv(&dir.join("batch.csv"), &report.runs)?;
        write_json(&dir.join("sweep.json"), &report)?;
    }
    Ok(out)
}

fn closure_summary(points: &[BranchPoint]) -> Value {
    let merged = points
        .last()
        .is_some_and(|p| p.solution.sup_fluct < CLASSIFICATION_THRESHOLD * p.solution.mean.abs().max(1.0));
    json!({ "points": points.len(), "merged_with_constant": merged })
}

pub fn cmd_bifurcate(config: &ExperimentConfig) -> CliResult<Value> {
    let problem = config.problem()?;
    let predicted = problem.eps_star_predicted();
    let bracket = config.bracket.unwrap_or([0.5 * predicted, 1.5 * predicted]);
    let tol = 1e-9 * predicted;
    let amplitude = config.amplitude * problem.xi;
    let schedule: Vec<f64> = match &config.branch_schedule {
        Some(s) => s.clone(),
        None => default_branch_fractions().iter().map(|f| f * predicted).collect(),
    };
    let report = bifurcation_report(&problem, (bracket[0], bracket[1]), tol, amplitude, &schedule)?;
    let up: Vec<f64> = CLOSURE_FRACTIONS.iter().map(|f| f * report.eps_star_detected).collect();
    let (closure, closure_lost) = trace_branch(&problem, &report.branch[0].solution, &up);
    let out = json!({
        "eps_star_detected": report.eps_star_detected,
        "eps_star_predicted": report.eps_star_predicted,
        "relative_gap": report.relative_gap,
        "mu1": report.mu1,
        "mu2": report.mu2,
        "degenerate": report.degenerate,
        "branch_points": report.branch.len(),
        "branch_lost_at": report.branch_lost_at,
        "switch_sup_fluct": report.branch[0].solution.sup_fluct,
        "closure": closure_summary(&closure),
        "closure_error": closure_lost.map(|e| e.to_string()),
    });
    if let Some(dir) = output_dir(config)? {
        write_json(&dir.join("bifurcation.json"), &report)?;
        write_branch_csv(&dir.join("branch.csv"), &report.branch)?;
        write_branch_csv(&dir.join("closure.csv"), &closure)?;
    }
    Ok(out)
}

pub fn cmd_check(config: &ExperimentConfig, field: &Path) -> CliResult<Value> {
    let file = read_field(field)?;
    let problem = config.problem()?;
    let tol = problem.diagnostic_tolerances;
    let report = run_diagnostics(&file.values, file.epsilon, file.a, config.q, &problem.op, problem.mu1(), &tol)?;
    let res = residual_norm(&residual(&file.values, file.epsilon, file.a, &problem.op)?, &problem.op.lumped_mass);
    let mut out = to_value(&report);
    let obj = out.as_object_mut().expect("report is an object");
    obj.insert("epsilon".into(), json!(file.epsilon));
    obj.insert("a".into(), json!(file.a));
    obj.insert("residual_norm".into(), json!(res));
    obj.insert("all_pass".into(), json!(report.all_pass()));
    if let Some(dir) = output_dir(config)? {
        write_json(&dir.join("check.json"), &out)?;
    }
    Ok(out)
}
