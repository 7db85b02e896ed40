//! Checks of the a priori estimates on computed fields.
//!
//! Every check takes nodal values and the discrete operator; integrals are
//! lumped-mass quadratures `Σ m_i g(u_i)`, Dirichlet energies are `vᵀ A v`.
//! The L¹ bound, the mean bounds and the zero-average and energy identities
//! hold exactly for the discrete equations up to the Newton residual, so the
//! default tolerances are tied to the Newton tolerance.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::discretization::{dist, DiscreteOperator};
use crate::error::{Error, Result};
use crate::linalg::{project_mean_zero, solve_projected, weighted_mean, CgOptions};
use crate::scalar_model::{c0, eval_f, find_xi, SATURATION_LIMIT};

/// Pass/fail thresholds of the diagnostics suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticTolerances {
    pub zero_average: f64,
    pub energy: f64,
    pub representation: f64,
    /// Absolute slack on the mean bounds.
    pub mean_slack: f64,
}

impl DiagnosticTolerances {
    /// Multiples of the Newton tolerance at which a converged discrete
    /// solution satisfies the identities.
    pub fn from_newton_tol(newton_tol: f64) -> Self {
        Self {
            zero_average: 10.0 * newton_tol,
            energy: 10.0 * newton_tol,
            representation: 100.0 * newton_tol,
            mean_slack: 1e-6,
        }
    }
}

/// Everything the suite measures on one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub zero_avg_residual: f64,
    pub zero_avg_pass: bool,
    pub l1_norm_f: f64,
    /// `2 C0 |Ω|`.
    pub l1_bound: f64,
    pub l1_pass: bool,
    pub mean_u: f64,
    pub mean_in_bounds: bool,
    pub q: f64,
    /// `Σ m e^{q |v|}`.
    pub exp_integral_q: f64,
    /// `|Ω|`, the value for `v ≡ 0`.
    pub exp_reference: f64,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    pub energy_pass: bool,
    /// `None` for constant fields, where the ratio is undefined.
    pub poincare_ratio: Option<f64>,
    pub poincare_pass: bool,
    pub representation_error: f64,
    pub representation_pass: bool,
    pub sup_norm: f64,
}

impl DiagnosticsReport {
    /// Zero average, L¹ bound, mean bounds, energy identity and
    /// representation all pass.
    pub fn all_pass(&self) -> bool {
        self.zero_avg_pass && self.l1_pass && self.mean_in_bounds && self.energy_pass && self.representation_pass
    }
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `|Σ m f(u)|`; passes when at most `tol (1 + Σ m |f(u)|)`.
pub fn check_zero_average(u: &[f64], mass: &[f64], a: f64, tol: f64) -> (f64, bool) {
    let (sum, abs_sum) = u.iter().zip(mass).fold((0.0, 0.0), |(s, t), (&ui, &mi)| {
        let fi = eval_f(ui, a);
        (s + mi * fi, t + mi * fi.abs())
    });
    let residual = sum.abs();
    (residual, residual <= tol * (1.0 + abs_sum))
}

/// `(Σ m |f(u)|, 2 C0 |Ω|, pass)`.
pub fn check_l1_bound(u: &[f64], mass: &[f64], a: f64) -> (f64, f64, bool) {
    let l1: f64 = u.iter().zip(mass).map(|(&ui, &mi)| mi * eval_f(ui, a).abs()).sum();
    let area: f64 = mass.iter().sum();
    let bound = 2.0 * c0(a) * area;
    (l1, bound, l1 <= bound * (1.0 + 1e-8))
}

/// Weighted mean and whether `-tol ≤ ū ≤ ξ_a + tol`.
pub fn check_mean_bounds(u: &[f64], mass: &[f64], a: f64, tol: f64) -> Result<(f64, bool)> {
    let xi = find_xi(a, 1e-14)?;
    let mean = weighted_mean(u, mass);
    Ok((mean, mean >= -tol && mean <= xi + tol))
}

/// `(Σ m e^{q |v|}, |Ω|)` with `v = u - ū`.
pub fn check_exp_integrability(u: &[f64], mass: &[f64], q: f64) -> Result<(f64, f64)> {
    if !(q > 2.0) {
        return Err(Error::InvalidParameter(format!("q must exceed 2 (got {q})")));
    }
    let v = project_mean_zero(u, mass);
    if v.iter().any(|vi| q * vi.abs() > SATURATION_LIMIT) {
        return Err(Error::Overflow);
    }
    let integral = v.iter().zip(mass).map(|(vi, mi)| mi * (q * vi.abs()).exp()).sum();
    Ok((integral, mass.iter().sum()))
}

/// `ε vᵀ A v` against `Σ m (f(u) - f(ū)) v`.
pub fn check_energy_identity(u: &[f64], epsilon: f64, op: &DiscreteOperator, a: f64, tol: f64) -> (f64, f64, bool) {
    let mass = &op.lumped_mass;
    let mean = weighted_mean(u, mass);
    let v: Vec<f64> = u.iter().map(|ui| ui - mean).collect();
    let lhs = epsilon * op.stiffness.quadratic_form(&v);
    let f_mean = eval_f(mean, a);
    let rhs = u
        .iter()
        .zip(&v)
        .zip(mass)
        .map(|((&ui, &vi), &mi)| mi * (eval_f(ui, a) - f_mean) * vi)
        .sum();
    (lhs, rhs, (lhs - rhs).abs() <= tol * (1.0 + lhs.abs()))
}

/// `vᵀ A v / (μ1 Σ m v²)`; passes when at least `1 - 1e-8`.
pub fn check_poincare(v: &[f64], op: &DiscreteOperator, mu1: f64) -> Result<(f64, bool)> {
    let mass_norm: f64 = v.iter().zip(&op.lumped_mass).map(|(vi, mi)| mi * vi * vi).sum();
    if !(mass_norm > 0.0) {
        return Err(Error::ZeroField);
    }
    let ratio = op.stiffness.quadratic_form(v) / (mu1 * mass_norm);
    Ok((ratio, ratio >= 1.0 - 1e-8))
}

/// Solves the discrete Neumann problem `A w = m f(u) / ε` with zero mean and
/// compares `w` with the fluctuation `v = u - ū`:
/// `error = ‖w - v‖∞ / (1 + ‖v‖∞)`.
pub fn check_representation(u: &[f64], epsilon: f64, a: f64, op: &DiscreteOperator, tol: f64) -> Result<(f64, bool)> {
    let mass = &op.lumped_mass;
    let load: Vec<f64> = u.iter().zip(mass).map(|(&ui, &mi)| mi * eval_f(ui, a) / epsilon).collect();
    let w = solve_projected(&op.stiffness, mass, &load, CgOptions::with_tol(1e-12))?;
    let v = project_mean_zero(u, mass);
    let diff = w.iter().zip(&v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let error = diff / (1.0 + sup_norm(&v));
    Ok((error, error <= tol))
}

/// Runs the full suite on a field.
pub fn run_diagnostics(
    u: &[f64],
    epsilon: f64,
    a: f64,
    q: f64,
    op: &DiscreteOperator,
    mu1: f64,
    tol: &DiagnosticTolerances,
) -> Result<DiagnosticsReport> {
    if u.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: u.len() });
    }
    let mass = &op.lumped_mass;
    let (zero_avg_residual, zero_avg_pass) = check_zero_average(u, mass, a, tol.zero_average);
    let (l1_norm_f, l1_bound, l1_pass) = check_l1_bound(u, mass, a);
    let (mean_u, mean_in_bounds) = check_mean_bounds(u, mass, a, tol.mean_slack)?;
    let (exp_integral_q, exp_reference) = check_exp_integrability(u, mass, q)?;
    let (energy_lhs, energy_rhs, energy_pass) = check_energy_identity(u, epsilon, op, a, tol.energy);
    let v = project_mean_zero(u, mass);
    let (poincare_ratio, poincare_pass) = match check_poincare(&v, op, mu1) {
        Ok((ratio, pass)) if sup_norm(&v) > 1e-12 * (1.0 + mean_u.abs()) => (Some(ratio), pass),
        _ => (None, true),
    };
    let (representation_error, representation_pass) = check_representation(u, epsilon, a, op, tol.representation)?;
    Ok(DiagnosticsReport {
        zero_avg_residual,
        zero_avg_pass,
        l1_norm_f,
        l1_bound,
        l1_pass,
        mean_u,
        mean_in_bounds,
        q,
        exp_integral_q,
        exp_reference,
        energy_lhs,
        energy_rhs,
        energy_pass,
        poincare_ratio,
        poincare_pass,
        representation_error,
        representation_pass,
        sup_norm: sup_norm(u),
    })
}

/// Discrete Neumann Green column for a source at `node`: the zero-mean
/// solution of `A g = e_node - m / |Ω|`.
pub fn green_column(op: &DiscreteOperator, node: usize) -> Result<Vec<f64>> {
    if node >= op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: node + 1 });
    }
    let mut load = vec![0.0; op.dim()];
    load[node] = 1.0;
    solve_projected(&op.stiffness, &op.lumped_mass, &load, CgOptions::with_tol(1e-12))
}

/// Numerical estimates of the Green-function constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenEstimate {
    /// `max |G(x, y)| - (1/π) log(D / |x - y|)` over sampled sources and
    /// nodes farther than `2h` from the source.
    pub k_green_est: f64,
    /// `max_y Σ m_i D / |x_i - y|` over sampled sources.
    pub c2_est: f64,
    /// `2π D²`.
    pub c2_bound: f64,
    /// `C_q ≈ C2 e^{π K}` with the estimated constants. Numerical estimate,
    /// not a certified constant.
    pub cq_estimate: f64,
    pub sources: Vec<usize>,
}

pub fn estimate_green_constants(op: &DiscreteOperator, sample_count: usize, seed: u64) -> Result<GreenEstimate> {
    if sample_count == 0 {
        return Err(Error::InvalidParameter("sample_count must be at least 1".into()));
    }
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources: Vec<usize> = sample(&mut rng, n, sample_count.min(n)).into_vec();
    sources.sort_unstable();
    let d = op.diameter;
    let exclusion = 2.0 * op.h;
    let nodes = op.nodes();
    let mut k_green_est = f64::NEG_INFINITY;
    let mut c2_est = 0.0f64;
    for &y in &sources {
        let g = green_column(op, y)?;
        let mut c2 = 0.0;
        for (i, gi) in g.iter().enumerate() {
            let r = dist(nodes[i], nodes[y]);
            if r > 0.0 {
                c2 += op.lumped_mass[i] * d / r;
            }
            if r > exclusion {
                k_green_est = k_green_est.max(gi.abs() - (d / r).ln() / PI);
            }
        }
        c2_est = c2_est.max(c2);
    }
    if !k_green_est.is_finite() {
        return Err(Error::InvalidMesh("no nodes outside the Green exclusion radius".into()));
    }
    Ok(GreenEstimate {
        k_green_est,
        c2_est,
        c2_bound: 2.0 * PI * d * d,
        cq_estimate: c2_est * (PI * k_green_est).exp(),
        sources,
    })
}
