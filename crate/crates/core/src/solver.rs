//! Damped Newton iteration for the discrete steady-state system
//! `ε A u = m ∘ f(u)`, solution classification, and multi-start search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::ops::Deref;

use crate::diagnostics::{run_diagnostics, DiagnosticTolerances, DiagnosticsReport};
use crate::discretization::DiscreteOperator;
use crate::error::{Error, Result};
use crate::linalg::{smallest_nonzero_eigen, weighted_mean, BandedLu, EigenPair, SparseSym};
use crate::scalar_model::{check_a, check_epsilon, eval_f_prime, eval_f_saturating, find_xi, ModelParams};

/// Nodal values of a field on a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldVector(pub Vec<f64>);

impl FieldVector {
    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl Deref for FieldVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FieldVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Outcome of the constancy test `‖u - ū‖∞ ≤ 1e-6 max(1, |ū|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Constant { value: f64 },
    Nonconstant { sup_fluct: f64 },
}

impl Classification {
    pub fn is_constant(&self) -> bool {
        matches!(self, Classification::Constant { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Classification::Constant { .. } => "constant",
            Classification::Nonconstant { .. } => "nonconstant",
        }
    }
}

pub const CLASSIFICATION_THRESHOLD: f64 = 1e-6;

/// Mass-weighted mean `Σ m u / Σ m`.
pub fn weighted_mean_of(u: &[f64], mass: &[f64]) -> f64 {
    weighted_mean(u, mass)
}

/// `(ū, ‖u - ū‖∞)`.
pub fn mean_and_fluctuation(u: &[f64], mass: &[f64]) -> (f64, f64) {
    let mean = weighted_mean(u, mass);
    let fluct = u.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    (mean, fluct)
}

pub fn classify(u: &[f64], mass: &[f64]) -> Classification {
    let (mean, sup_fluct) = mean_and_fluctuation(u, mass);
    if sup_fluct <= CLASSIFICATION_THRESHOLD * mean.abs().max(1.0) {
        Classification::Constant { value: mean }
    } else {
        Classification::Nonconstant { sup_fluct }
    }
}

fn check_len(u: &[f64], op: &DiscreteOperator) -> Result<()> {
    if u.len() == op.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: op.dim(), got: u.len() })
    }
}

/// `R = ε A u - m ∘ f(u)`. Fails with [`Error::Overflow`] when any nodal
/// value saturates the exponential.
pub fn residual(u: &[f64], epsilon: f64, a: f64, op: &DiscreteOperator) -> Result<Vec<f64>> {
    check_len(u, op)?;
    let mut r = op.stiffness.mul_vec(u);
    for ((ri, &ui), &mi) in r.iter_mut().zip(u).zip(&op.lumped_mass) {
        let f = eval_f_saturating(ui, a);
        if f.saturated {
            return Err(Error::Overflow);
        }
        *ri = epsilon * *ri - mi * f.value;
    }
    Ok(r)
}

/// Mass-weighted ℓ² norm of a load-type vector: `sqrt(Σ R_i² / m_i)`, the
/// lumped L² norm of the nodal strong residual `R_i / m_i`.
pub fn residual_norm(r: &[f64], mass: &[f64]) -> f64 {
    r.iter().zip(mass).map(|(ri, mi)| ri * ri / mi).sum::<f64>().sqrt()
}

/// `J = ε A - diag(m ∘ f'(u))`.
pub fn jacobian(u: &[f64], epsilon: f64, a: f64, op: &DiscreteOperator) -> Result<SparseSym> {
    check_len(u, op)?;
    let shift: Vec<f64> = u
        .iter()
        .zip(&op.lumped_mass)
        .map(|(&ui, &mi)| -mi * eval_f_prime(ui, a))
        .collect();
    Ok(op.stiffness.scaled_plus_diag(epsilon, &shift))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Absolute tolerance on [`residual_norm`]; `None` means
    /// `1e-10 (1 + |Ω|)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Initial step length of the backtracking line search.
    pub damping: f64,
    /// Newton steps longer than this in the sup norm are scaled down before
    /// the line search. Keeps far-off starts out of the exponential regime.
    pub max_step: Option<f64>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: 100,
            damping: 1.0,
            max_step: Some(1.0),
        }
    }
}

impl NewtonOptions {
    pub fn resolved_tol(&self, area: f64) -> f64 {
        self.tol.unwrap_or(1e-10 * (1.0 + area))
    }
}

/// Raw result of a converged Newton run.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub u: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

const MIN_STEP: f64 = 1e-10;

/// Damped Newton iteration from `u0`.
///
/// Each step solves `J δ = -R` with a banded LU factorization and
/// backtracks `α ∈ {α0, α0/2, …}` (with `α0` the damping, reduced to honour
/// `max_step`) until the residual norm
/// decreases; saturated trial points count as rejections.
pub fn newton_solve(
    u0: &[f64],
    epsilon: f64,
    a: f64,
    op: &DiscreteOperator,
    opts: &NewtonOptions,
) -> Result<NewtonResult> {
    check_a(a)?;
    check_epsilon(epsilon)?;
    check_len(u0, op)?;
    let tol = opts.resolved_tol(op.area);
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("newton tol must be positive (got {tol})")));
    }
    let mass = &op.lumped_mass;
    let mut u = u0.to_vec();
    let mut r = residual(&u, epsilon, a, op)?;
    let mut norm = residual_norm(&r, mass);
    let mut trial = vec![0.0; u.len()];
    for iter in 0..=opts.max_iter {
        if norm <= tol {
            return Ok(NewtonResult {
                u,
                residual_norm: norm,
                iterations: iter,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let j = jacobian(&u, epsilon, a, op)?;
        let lu = BandedLu::factor(&j)?;
        let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
        lu.solve_in_place(&mut step);
        if step.iter().any(|s| !s.is_finite()) {
            return Err(Error::SingularJacobian(iter));
        }
        let mut alpha = opts.damping;
        if let Some(cap) = opts.max_step {
            let len = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            if len > cap {
                alpha *= cap / len;
            }
        }
        loop {
            for ((t, ui), si) in trial.iter_mut().zip(&u).zip(&step) {
                *t = ui + alpha * si;
            }
            if let Ok(r_trial) = residual(&trial, epsilon, a, op) {
                let n_trial = residual_norm(&r_trial, mass);
                if n_trial < norm {
                    std::mem::swap(&mut u, &mut trial);
                    r = r_trial;
                    norm = n_trial;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                return Err(Error::NoConvergence {
                    iterations: iter + 1,
                    residual: norm,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: norm,
    })
}

/// A converged steady state with its classification and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub u: FieldVector,
    pub epsilon: f64,
    pub a: f64,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub classification: Classification,
    pub mean: f64,
    pub sup_fluct: f64,
    pub diagnostics: DiagnosticsReport,
}

impl SolutionRecord {
    pub fn is_constant(&self) -> bool {
        self.classification.is_constant()
    }

    /// `‖u‖∞`.
    pub fn sup_norm(&self) -> f64 {
        self.u.sup_norm()
    }
}

/// How a multi-start initial field was built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StartSpec {
    Constant { value: f64 },
    /// `ξ_a + amplitude φ1`.
    Eigen { amplitude: f64 },
    /// Uniform noise in `[-2, ξ_a + 2]` from stream `index` of the seed.
    Noise { seed: u64, index: u64 },
}

impl StartSpec {
    pub fn label(&self) -> String {
        match self {
            StartSpec::Constant { value } => format!("const:{value}"),
            StartSpec::Eigen { amplitude } => format!("eig:{amplitude}"),
            StartSpec::Noise { seed, index } => format!("noise:{seed}:{index}"),
        }
    }
}

/// Per-start outcome of a multi-start batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start_id: usize,
    pub start: StartSpec,
    pub epsilon: f64,
    /// `Err` carries the failure message; the batch does not abort.
    pub result: std::result::Result<SolutionRecord, String>,
}

/// Result of [`SteadyStateProblem::multi_start`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStartReport {
    pub epsilon: f64,
    /// Distinct converged solutions in canonical order (constants first,
    /// then by mean and fluctuation).
    pub solutions: Vec<SolutionRecord>,
    pub outcomes: Vec<StartOutcome>,
}

impl MultiStartReport {
    pub fn any_nonconstant(&self) -> bool {
        self.solutions.iter().any(|s| !s.is_constant())
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }
}

/// Two solutions coincide when `‖u - u'‖∞ ≤ 1e-5 (1 + ‖u‖∞)`.
pub fn same_solution(u: &[f64], other: &[f64]) -> bool {
    let scale = 1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    u.iter().zip(other).all(|(p, q)| (p - q).abs() <= 1e-5 * scale)
}

fn canonical_order(x: &SolutionRecord, y: &SolutionRecord) -> Ordering {
    let quantize = |v: f64| (v * 1e6).round();
    (!x.is_constant())
        .cmp(&!y.is_constant())
        .then(quantize(x.mean).total_cmp(&quantize(y.mean)))
        .then(quantize(x.sup_fluct).total_cmp(&quantize(y.sup_fluct)))
        .then_with(|| {
            x.u.iter()
                .zip(y.u.iter())
                .map(|(p, q)| quantize(*p).total_cmp(&quantize(*q)))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Keeps the first representative of each cluster of coinciding solutions
/// and sorts the survivors canonically.
pub fn deduplicate(records: impl IntoIterator<Item = SolutionRecord>) -> Vec<SolutionRecord> {
    let mut distinct: Vec<SolutionRecord> = Vec::new();
    for rec in records {
        if !distinct.iter().any(|d| same_solution(&d.u, &rec.u)) {
            distinct.push(rec);
        }
    }
    distinct.sort_by(canonical_order);
    distinct
}

/// Mesh, model coefficients, first Neumann eigenpair, and solver settings:
/// everything needed to compute and certify steady states at any `ε`.
#[derive(Debug, Clone)]
pub struct SteadyStateProblem {
    pub op: DiscreteOperator,
    pub a: f64,
    pub q: f64,
    pub xi: f64,
    pub eigen: EigenPair,
    pub newton: NewtonOptions,
    pub diagnostic_tolerances: DiagnosticTolerances,
}

impl SteadyStateProblem {
    /// Validates `a` and `q`, finds `ξ_a`, and computes `μ1` to `eig_tol`.
    pub fn new(op: DiscreteOperator, a: f64, q: f64, eig_tol: f64) -> Result<Self> {
        ModelParams::new(a, 1.0, q)?;
        let xi = find_xi(a, 1e-14)?;
        let eigen = smallest_nonzero_eigen(&op.stiffness, &op.lumped_mass, eig_tol)?;
        let newton = NewtonOptions::default();
        let diagnostic_tolerances = DiagnosticTolerances::from_newton_tol(newton.resolved_tol(op.area));
        Ok(Self {
            op,
            a,
            q,
            xi,
            eigen,
            newton,
            diagnostic_tolerances,
        })
    }

    /// Replaces the Newton options and re-derives the diagnostics tolerances.
    pub fn with_newton(mut self, newton: NewtonOptions) -> Self {
        self.diagnostic_tolerances = DiagnosticTolerances::from_newton_tol(newton.resolved_tol(self.op.area));
        self.newton = newton;
        self
    }

    pub fn newton_tol(&self) -> f64 {
        self.newton.resolved_tol(self.op.area)
    }

    pub fn mu1(&self) -> f64 {
        self.eigen.mu1
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Predicted primary bifurcation `f'(ξ_a) / μ1ʰ`.
    pub fn eps_star_predicted(&self) -> f64 {
        eval_f_prime(self.xi, self.a) / self.eigen.mu1
    }

    /// Classifies and certifies a field that solves the equations at `ε`.
    pub fn record(&self, u: Vec<f64>, epsilon: f64, residual_norm: f64, newton_iters: usize) -> Result<SolutionRecord> {
        let classification = classify(&u, &self.op.lumped_mass);
        let (mean, sup_fluct) = mean_and_fluctuation(&u, &self.op.lumped_mass);
        let diagnostics = run_diagnostics(
            &u,
            epsilon,
            self.a,
            self.q,
            &self.op,
            self.eigen.mu1,
            &self.diagnostic_tolerances,
        )?;
        Ok(SolutionRecord {
            u: FieldVector(u),
            epsilon,
            a: self.a,
            residual_norm,
            newton_iters,
            classification,
            mean,
            sup_fluct,
            diagnostics,
        })
    }

    pub fn newton_solve(&self, u0: &[f64], epsilon: f64) -> Result<SolutionRecord> {
        self.newton_solve_with(u0, epsilon, &self.newton)
    }

    /// Newton with one-off options. The diagnostics keep the problem's
    /// tolerances.
    pub fn newton_solve_with(&self, u0: &[f64], epsilon: f64, opts: &NewtonOptions) -> Result<SolutionRecord> {
        let res = newton_solve(u0, epsilon, self.a, &self.op, opts)?;
        self.record(res.u, epsilon, res.residual_norm, res.iterations)
    }

    /// Initial field for a start specification.
    pub fn start_field(&self, spec: &StartSpec) -> Vec<f64> {
        let n = self.dim();
        match *spec {
            StartSpec::Constant { value } => vec![value; n],
            StartSpec::Eigen { amplitude } => self.eigen.phi1.iter().map(|p| self.xi + amplitude * p).collect(),
            StartSpec::Noise { seed, index } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(index);
                (0..n).map(|_| rng.gen_range(-2.0..self.xi + 2.0)).collect()
            }
        }
    }

    /// The first `n_starts` members of the start family: the constants
    /// `0, ξ_a, log a`, then `ξ_a + α φ1` for `α ∈ {±0.1, ±0.5, ±1} ξ_a`,
    /// then seeded noise fields.
    pub fn start_family(&self, n_starts: usize, seed: u64) -> Vec<StartSpec> {
        let xi = self.xi;
        let mut family = vec![
            StartSpec::Constant { value: 0.0 },
            StartSpec::Constant { value: xi },
            StartSpec::Constant { value: self.a.ln() },
        ];
        for s in [0.1, -0.1, 0.5, -0.5, 1.0, -1.0] {
            family.push(StartSpec::Eigen { amplitude: s * xi });
        }
        family.truncate(n_starts);
        let mut index = 0;
        while family.len() < n_starts {
            family.push(StartSpec::Noise { seed, index });
            index += 1;
        }
        family
    }

    /// Runs Newton from each start (in parallel) and deduplicates the
    /// converged solutions. Deterministic for a given seed.
    pub fn multi_start(&self, epsilon: f64, n_starts: usize, seed: u64) -> Result<MultiStartReport> {
        if n_starts == 0 {
            return Err(Error::InvalidParameter("n_starts must be at least 1".into()));
        }
        check_epsilon(epsilon)?;
        let family = self.start_family(n_starts, seed);
        Ok(self.multi_start_from(epsilon, &family))
    }

    /// Multi-start over an explicit list of starts.
    pub fn multi_start_from(&self, epsilon: f64, starts: &[StartSpec]) -> MultiStartReport {
        let outcomes: Vec<StartOutcome> = starts
            .par_iter()
            .enumerate()
            .map(|(start_id, spec)| {
                let u0 = self.start_field(spec);
                let result = self.newton_solve(&u0, epsilon).map_err(|e| e.to_string());
                StartOutcome {
                    start_id,
                    start: *spec,
                    epsilon,
                    result,
                }
            })
            .collect();
        let solutions = deduplicate(outcomes.iter().filter_map(|o| o.result.as_ref().ok().cloned()));
        MultiStartReport {
            epsilon,
            solutions,
            outcomes,
        }
    }
}
