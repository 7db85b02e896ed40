use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cg::{project_mean_zero_in_place, solve_projected, CgOptions};
use super::sparse::SparseSym;
use crate::error::{Error, Result};

/// First nonzero generalized eigenpair of `A x = μ M x`, plus the next one,
/// which is used to flag multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub mu1: f64,
    /// Weighted mean zero, `Σ m φ² = 1`.
    pub phi1: Vec<f64>,
    pub mu2: f64,
    pub phi2: Vec<f64>,
    /// `μ2` lies within `10 tol` (relative) of `μ1`.
    pub degenerate: bool,
}

const MAX_OUTER: usize = 1000;

fn mass_dot(x: &[f64], y: &[f64], mass: &[f64]) -> f64 {
    x.iter().zip(y).zip(mass).map(|((a, b), m)| a * b * m).sum()
}

fn normalize(x: &mut [f64], mass: &[f64]) -> Result<()> {
    let nrm = mass_dot(x, x, mass).sqrt();
    if !(nrm > 0.0) || !nrm.is_finite() {
        return Err(Error::ZeroField);
    }
    for v in x.iter_mut() {
        *v /= nrm;
    }
    Ok(())
}

/// Rayleigh quotient `x^T B x / Σ m x²`.
pub fn rayleigh_quotient(matrix: &SparseSym, mass: &[f64], x: &[f64]) -> f64 {
    matrix.quadratic_form(x) / mass_dot(x, x, mass)
}

/// Deterministic mean-zero start vector.
fn start_vector(n: usize, mass: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    project_mean_zero_in_place(&mut x, mass);
    x
}

/// Inverse iteration for the smallest eigenvalue of `B x = λ M x` on the
/// weighted-mean-zero subspace, M-orthogonal to `deflate` (which must be
/// M-orthonormal eigenvectors of `B`). `B` must be positive definite there.
/// Converges when successive Rayleigh quotients differ by at most `tol`
/// relative. Returns `(λ, x)` with `Σ m x² = 1`.
pub fn inverse_iteration(
    matrix: &SparseSym,
    mass: &[f64],
    deflate: &[&[f64]],
    start: Option<&[f64]>,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = matrix.dim();
    // A fresh seed per deflation level: the first start vector has no
    // component left in a degenerate eigenspace once its projection is removed.
    let seed = 0x5eed + 2 * deflate.len() as u64;
    let mut x = match start {
        Some(s) if s.len() == n => {
            let mut s = s.to_vec();
            project_mean_zero_in_place(&mut s, mass);
            s
        }
        _ => start_vector(n, mass, seed),
    };
    let orthogonalize = |x: &mut [f64]| {
        for d in deflate {
            let c = mass_dot(x, d, mass);
            for (xi, di) in x.iter_mut().zip(d.iter()) {
                *xi -= c * di;
            }
        }
    };
    orthogonalize(&mut x);
    if normalize(&mut x, mass).is_err() {
        x = start_vector(n, mass, seed + 1);
        orthogonalize(&mut x);
        normalize(&mut x, mass)?;
    }
    let inner = CgOptions::with_tol(1e-12);
    let mut rq = rayleigh_quotient(matrix, mass, &x);
    for _ in 0..MAX_OUTER {
        let rhs: Vec<f64> = x.iter().zip(mass).map(|(v, m)| v * m).collect();
        let mut y = solve_projected(matrix, mass, &rhs, inner)?;
        orthogonalize(&mut y);
        normalize(&mut y, mass)?;
        let next = rayleigh_quotient(matrix, mass, &y);
        x = y;
        let converged = (next - rq).abs() <= tol * next.abs();
        rq = next;
        if converged {
            return Ok((rq, x));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_OUTER,
        residual: rq,
    })
}

/// First nonzero eigenvalue `μ1` of the Neumann stiffness `A` relative to
/// the lumped mass, with its eigenfunction; the second one is computed by
/// deflation to detect multiplicity.
pub fn smallest_nonzero_eigen(stiffness: &SparseSym, mass: &[f64], tol: f64) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive (got {tol})")));
    }
    if mass.len() != stiffness.dim() {
        return Err(Error::DimensionMismatch {
            expected: stiffness.dim(),
            got: mass.len(),
        });
    }
    let (mu1, phi1) = inverse_iteration(stiffness, mass, &[], None, tol)?;
    let (mu2, phi2) = inverse_iteration(stiffness, mass, &[&phi1], None, tol)?;
    // Inverse iteration finds the eigenvalue nearest zero: the first pair is
    // the minimum, but guard the ordering anyway.
    let (mu1, phi1, mu2, phi2) = if mu2 < mu1 {
        (mu2, phi2, mu1, phi1)
    } else {
        (mu1, phi1, mu2, phi2)
    };
    Ok(EigenPair {
        degenerate: (mu2 - mu1).abs() <= 10.0 * tol * mu1,
        mu1,
        phi1,
        mu2,
        phi2,
    })
}

/// Smallest eigenvalue of `J x = λ M x` on the weighted-mean-zero subspace
/// for a symmetric, possibly indefinite `J`. `lower_bound` must bound that
/// spectrum from below; inverse iteration runs on `J + (1 - lower_bound) M`.
pub fn smallest_subspace_eigen(
    matrix: &SparseSym,
    mass: &[f64],
    lower_bound: f64,
    start: Option<&[f64]>,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let shift = 1.0 - lower_bound;
    let diag: Vec<f64> = mass.iter().map(|m| shift * m).collect();
    let shifted = matrix.scaled_plus_diag(1.0, &diag);
    let (_, x) = inverse_iteration(&shifted, mass, &[], start, tol)?;
    Ok((rayleigh_quotient(matrix, mass, &x), x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble, build_rectangle_mesh};
    use crate::linalg::cg::weighted_mean;
    use std::f64::consts::PI;

    #[test]
    fn rectangle_pair_is_normalized_and_mean_zero() {
        let op = assemble(&build_rectangle_mesh(24, 12, 2.0, 1.0).unwrap()).unwrap();
        let pair = smallest_nonzero_eigen(&op.stiffness, &op.lumped_mass, 1e-11).unwrap();
        let m = &op.lumped_mass;
        assert!(weighted_mean(&pair.phi1, m).abs() * op.area <= 1e-10 * op.area);
        assert!((mass_dot(&pair.phi1, &pair.phi1, m) - 1.0).abs() < 1e-12);
        let rq = rayleigh_quotient(&op.stiffness, m, &pair.phi1);
        assert!((rq - pair.mu1).abs() <= 1e-8 * pair.mu1);
        assert!((pair.mu1 - (PI / 2.0).powi(2)).abs() < 0.01 * (PI / 2.0).powi(2));
        assert!(!pair.degenerate);
        assert!(pair.mu2 > 3.0 * pair.mu1);
    }

    #[test]
    fn square_first_eigenvalue_is_double() {
        let op = assemble(&build_rectangle_mesh(16, 16, 1.0, 1.0).unwrap()).unwrap();
        let pair = smallest_nonzero_eigen(&op.stiffness, &op.lumped_mass, 1e-11).unwrap();
        assert!(pair.degenerate, "mu1 = {}, mu2 = {}", pair.mu1, pair.mu2);
        assert!(mass_dot(&pair.phi1, &pair.phi2, &op.lumped_mass).abs() < 1e-8);
    }

    #[test]
    fn subspace_eigen_of_shifted_stiffness() {
        let op = assemble(&build_rectangle_mesh(12, 12, 1.0, 1.0).unwrap()).unwrap();
        let pair = smallest_nonzero_eigen(&op.stiffness, &op.lumped_mass, 1e-12).unwrap();
        // J = 0.1 A - 1.5 M has subspace spectrum 0.1 μ_k - 1.5.
        let shift: Vec<f64> = op.lumped_mass.iter().map(|m| -1.5 * m).collect();
        let j = op.stiffness.scaled_plus_diag(0.1, &shift);
        let (lambda, _) = smallest_subspace_eigen(&j, &op.lumped_mass, -1.5, None, 1e-13).unwrap();
        let exact = 0.1 * pair.mu1 - 1.5;
        assert!((lambda - exact).abs() <= 1e-9 * exact.abs(), "{lambda} vs {exact}");
    }
}
