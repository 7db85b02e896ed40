//! Stability of the constant branch `u ≡ ξ_a`, detection of its primary
//! bifurcation, switching onto the nonconstant branch, natural continuation
//! along it, and ε-sweeps that count distinct steady states.
//!
//! The stability indicator of a state `u` is the smallest eigenvalue of the
//! Jacobian `J = ε A - diag(m f'(u))` relative to the lumped mass, restricted
//! to weighted-mean-zero fields. At `u ≡ ξ_a` that spectrum is exactly
//! `ε μₖʰ - f'(ξ_a)`, so the indicator changes sign at `f'(ξ_a) / μ₁ʰ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::DiscreteOperator;
use crate::error::{Error, Result};
use crate::linalg::smallest_subspace_eigen;
use crate::scalar_model::{check_epsilon, eval_f_prime, threshold_of_m};
use crate::solver::{
    jacobian, residual, residual_norm, MultiStartReport, NewtonOptions, SolutionRecord, SteadyStateProblem,
};

/// Relative tolerance of the inverse iteration behind the indicator.
const INDICATOR_TOL: f64 = 1e-12;
/// Largest number of step halvings in [`continue_branch`].
pub const MAX_HALVINGS: u32 = 6;
/// Default relative offset below `ε*` for [`branch_switch`].
pub const SWITCH_OFFSET: f64 = 0.05;
/// Step cap for Newton near the pitchfork. Full steps from a large
/// amplitude overshoot the nonconstant root and land in the basin of the
/// constant; short steps follow the Newton flow, which does not.
pub const BRANCH_MAX_STEP: f64 = 0.1;

fn branch_newton(problem: &SteadyStateProblem) -> NewtonOptions {
    let cap = problem.newton.max_step.map_or(BRANCH_MAX_STEP, |c| c.min(BRANCH_MAX_STEP));
    NewtonOptions {
        max_step: Some(cap),
        max_iter: problem.newton.max_iter.max(200),
        ..problem.newton
    }
}

/// One accepted point of a branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub epsilon: f64,
    pub solution: SolutionRecord,
    pub stability_indicator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub eps_star_detected: f64,
    pub eps_star_predicted: f64,
    pub relative_gap: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// `μ₁ʰ` is (numerically) double; the branch then depends on which
    /// eigenvector was used for the switch.
    pub degenerate: bool,
    /// Direction of the switch, `Σ m d² = 1`.
    pub switch_direction: Vec<f64>,
    /// Nonconstant side of the pitchfork, in continuation order.
    pub branch: Vec<BranchPoint>,
    /// Set when continuation stopped before the end of its schedule.
    pub branch_lost_at: Option<f64>,
}

/// Indicator of `u` at `ε` with its eigenvector. `start` warm-starts the
/// inverse iteration.
pub fn stability_indicator_with(
    u: &[f64],
    epsilon: f64,
    a: f64,
    op: &DiscreteOperator,
    start: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    let j = jacobian(u, epsilon, a, op)?;
    // εA is semidefinite, so -max f' bounds the spectrum from below.
    let max_fp = u.iter().map(|&t| eval_f_prime(t, a)).fold(f64::NEG_INFINITY, f64::max);
    smallest_subspace_eigen(&j, &op.lumped_mass, -max_fp, start, INDICATOR_TOL)
}

/// Smallest mean-zero-subspace eigenvalue of the Jacobian at `u`.
pub fn stability_indicator(u: &[f64], epsilon: f64, a: f64, op: &DiscreteOperator) -> Result<f64> {
    stability_indicator_with(u, epsilon, a, op, None).map(|(lambda, _)| lambda)
}

fn constant_xi_point(problem: &SteadyStateProblem, epsilon: f64, start: Option<&[f64]>) -> Result<(BranchPoint, Vec<f64>)> {
    let u = vec![problem.xi; problem.dim()];
    let res = residual_norm(&residual(&u, epsilon, problem.a, &problem.op)?, &problem.op.lumped_mass);
    let (indicator, vec) = stability_indicator_with(&u, epsilon, problem.a, &problem.op, start)?;
    let solution = problem.record(u, epsilon, res, 0)?;
    Ok((
        BranchPoint {
            epsilon,
            solution,
            stability_indicator: indicator,
        },
        vec,
    ))
}

/// Indicator along the constant branch `u ≡ ξ_a` for a decreasing grid.
pub fn trivial_branch_stability(problem: &SteadyStateProblem, eps_grid: &[f64]) -> Result<Vec<BranchPoint>> {
    if eps_grid.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidParameter("eps_grid must be strictly decreasing".into()));
    }
    let mut warm = problem.eigen.phi1.clone();
    let mut points = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        check_epsilon(eps)?;
        let (point, vec) = constant_xi_point(problem, eps, Some(&warm))?;
        warm = vec;
        points.push(point);
    }
    Ok(points)
}

/// Bisects the sign change of the constant-branch indicator inside
/// `bracket` until the bracket is at most `tol` wide; returns its midpoint.
pub fn detect_bifurcation(problem: &SteadyStateProblem, bracket: (f64, f64), tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    check_epsilon(lo)?;
    check_epsilon(hi)?;
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("bracket must satisfy lo < hi (got {lo}, {hi})")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive (got {tol})")));
    }
    let xi = vec![problem.xi; problem.dim()];
    let mut warm = problem.eigen.phi1.clone();
    let mut indicator = |eps: f64| -> Result<f64> {
        let (lambda, vec) = stability_indicator_with(&xi, eps, problem.a, &problem.op, Some(&warm))?;
        warm = vec;
        Ok(lambda)
    };
    let s_lo = indicator(lo)?;
    let s_hi = indicator(hi)?;
    if s_lo.signum() == s_hi.signum() || s_lo == 0.0 || s_hi == 0.0 {
        if s_lo == 0.0 {
            return Ok(lo);
        }
        if s_hi == 0.0 {
            return Ok(hi);
        }
        return Err(Error::InvalidBracket { lo: s_lo, hi: s_hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = indicator(mid)?;
        if s == 0.0 {
            return Ok(mid);
        }
        if s.signum() == s_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton at `(1 - δ) ε*` from `ξ_a + amplitude · direction`; `direction`
/// defaults to `φ₁`. Succeeds only on a nonconstant solution. Newton steps
/// are capped at [`BRANCH_MAX_STEP`].
pub fn branch_switch_along(
    problem: &SteadyStateProblem,
    eps_star: f64,
    amplitude: f64,
    delta: f64,
    direction: Option<&[f64]>,
) -> Result<SolutionRecord> {
    check_epsilon(eps_star)?;
    if amplitude == 0.0 || !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!("amplitude must be nonzero and finite (got {amplitude})")));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1) (got {delta})")));
    }
    let dir = direction.unwrap_or(&problem.eigen.phi1);
    if dir.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: dir.len(),
        });
    }
    let u0: Vec<f64> = dir.iter().map(|d| problem.xi + amplitude * d).collect();
    let rec = problem.newton_solve_with(&u0, (1.0 - delta) * eps_star, &branch_newton(problem))?;
    if rec.is_constant() {
        return Err(Error::FellBackToConstant(rec.mean));
    }
    Ok(rec)
}

/// [`branch_switch_along`] with `δ = 0.05` along `φ₁`.
pub fn branch_switch(problem: &SteadyStateProblem, eps_star: f64, amplitude: f64) -> Result<SolutionRecord> {
    branch_switch_along(problem, eps_star, amplitude, SWITCH_OFFSET, None)
}

fn branch_point(problem: &SteadyStateProblem, solution: SolutionRecord, warm: Option<&[f64]>) -> Result<(BranchPoint, Vec<f64>)> {
    let (indicator, vec) = stability_indicator_with(&solution.u, solution.epsilon, problem.a, &problem.op, warm)?;
    Ok((
        BranchPoint {
            epsilon: solution.epsilon,
            solution,
            stability_indicator: indicator,
        },
        vec,
    ))
}

/// Natural continuation from `start` through `schedule`, keeping every
/// accepted point (intermediate ones from step halving included). Stops at
/// the first target that cannot be reached; the error is returned alongside
/// the points collected so far.
pub fn trace_branch(
    problem: &SteadyStateProblem,
    start: &SolutionRecord,
    schedule: &[f64],
) -> (Vec<BranchPoint>, Option<Error>) {
    let mut points = Vec::new();
    let mut current = start.clone();
    let mut warm: Option<Vec<f64>> = None;
    let opts = branch_newton(problem);
    for &target in schedule {
        if let Err(e) = check_epsilon(target) {
            return (points, Some(e));
        }
        while current.epsilon != target {
            let mut step = target - current.epsilon;
            let mut halvings = 0;
            let next = loop {
                // The full remaining step lands exactly on the target.
                let eps = if halvings == 0 { target } else { current.epsilon + step };
                match problem.newton_solve_with(&current.u, eps, &opts) {
                    Ok(rec) => break rec,
                    Err(_) if halvings < MAX_HALVINGS => {
                        step *= 0.5;
                        halvings += 1;
                    }
                    Err(_) => return (points, Some(Error::BranchLost(current.epsilon))),
                }
            };
            match branch_point(problem, next, warm.as_deref()) {
                Ok((point, vec)) => {
                    warm = Some(vec);
                    current = point.solution.clone();
                    points.push(point);
                }
                Err(e) => return (points, Some(e)),
            }
        }
    }
    (points, None)
}

/// Natural continuation; fails with `BranchLost` when a step underflows.
pub fn continue_branch(problem: &SteadyStateProblem, start: &SolutionRecord, schedule: &[f64]) -> Result<Vec<BranchPoint>> {
    match trace_branch(problem, start, schedule) {
        (points, None) => Ok(points),
        (_, Some(e)) => Err(e),
    }
}

/// Full bifurcation experiment: detection in `bracket`, a switch along `φ₁`
/// at `(1 - δ) ε*` with the given amplitude, then continuation through
/// `schedule`.
pub fn bifurcation_report(
    problem: &SteadyStateProblem,
    bracket: (f64, f64),
    tol: f64,
    amplitude: f64,
    schedule: &[f64],
) -> Result<BifurcationReport> {
    let detected = detect_bifurcation(problem, bracket, tol)?;
    let predicted = problem.eps_star_predicted();
    let start = branch_switch(problem, detected, amplitude)?;
    let (first, _) = branch_point(problem, start.clone(), Some(&problem.eigen.phi1))?;
    let (mut rest, lost) = trace_branch(problem, &start, schedule);
    let mut branch = vec![first];
    branch.append(&mut rest);
    let branch_lost_at = match lost {
        Some(Error::BranchLost(eps)) => Some(eps),
        Some(other) => return Err(other),
        None => None,
    };
    Ok(BifurcationReport {
        eps_star_detected: detected,
        eps_star_predicted: predicted,
        relative_gap: (detected - predicted).abs() / predicted,
        mu1: problem.eigen.mu1,
        mu2: problem.eigen.mu2,
        degenerate: problem.eigen.degenerate,
        switch_direction: problem.eigen.phi1.clone(),
        branch,
        branch_lost_at,
    })
}

/// One grid point of a rigidity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub n_distinct: usize,
    pub any_nonconstant: bool,
    pub n_failed: usize,
    /// Largest `‖u‖∞` among the distinct solutions.
    pub max_sup_norm: f64,
    /// Largest `Σ m e^{q|v|}` among the distinct solutions.
    pub max_exp_integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Smallest grid `ε` from which on no nonconstant solution was found.
    pub eps_hat: Option<f64>,
    /// Distance from `eps_hat` to the grid point below it: the uncertainty
    /// of the empirical threshold.
    pub grid_spacing: Option<f64>,
    /// Largest `‖u‖∞` over all solutions found.
    pub m_emp: f64,
    /// `K(m_emp) / μ₁ʰ`.
    pub threshold_of_m_emp: f64,
    /// `eps_hat ≤ threshold_of_m_emp`. Vacuous when no nonconstant solution
    /// was found: `eps_hat` is then just the lowest grid point.
    pub threshold_consistent: bool,
    /// Full per-ε results, kept in memory only.
    #[serde(skip)]
    pub runs: Vec<MultiStartReport>,
}

/// Multi-start at every grid `ε` (concurrently) and the empirical threshold.
pub fn rigidity_sweep(problem: &SteadyStateProblem, eps_grid: &[f64], n_starts: usize, seed: u64) -> Result<SweepReport> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidParameter("eps_grid must not be empty".into()));
    }
    for &eps in eps_grid {
        check_epsilon(eps)?;
    }
    let runs: Vec<MultiStartReport> = eps_grid
        .par_iter()
        .map(|&eps| problem.multi_start(eps, n_starts, seed))
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = runs
        .iter()
        .map(|r| SweepRow {
            epsilon: r.epsilon,
            n_distinct: r.solutions.len(),
            any_nonconstant: r.any_nonconstant(),
            n_failed: r.failures(),
            max_sup_norm: r.solutions.iter().map(|s| s.sup_norm()).fold(0.0, f64::max),
            max_exp_integral: r.solutions.iter().map(|s| s.diagnostics.exp_integral_q).fold(0.0, f64::max),
        })
        .collect();

    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|x, y| x.epsilon.total_cmp(&y.epsilon));
    let first_rigid = sorted
        .iter()
        .rposition(|r| r.any_nonconstant)
        .map_or(0, |k| k + 1);
    let eps_hat = sorted.get(first_rigid).map(|r| r.epsilon);
    let grid_spacing = if first_rigid > 0 && first_rigid < sorted.len() {
        Some(sorted[first_rigid].epsilon - sorted[first_rigid - 1].epsilon)
    } else {
        None
    };
    let m_emp = rows.iter().map(|r| r.max_sup_norm).fold(0.0, f64::max);
    let threshold_of_m_emp = threshold_of_m(m_emp, problem.a, problem.mu1());
    Ok(SweepReport {
        threshold_consistent: first_rigid == 0 || eps_hat.is_none_or(|e| e <= threshold_of_m_emp),
        rows,
        eps_hat,
        grid_spacing,
        m_emp,
        threshold_of_m_emp,
        runs,
    })
}
