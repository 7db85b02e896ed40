use super::sparse::SparseSym;
use crate::error::{Error, Result};

/// Mass-weighted mean `Σ m_i x_i / Σ m_i`.
pub fn weighted_mean(x: &[f64], mass: &[f64]) -> f64 {
    let total: f64 = mass.iter().sum();
    x.iter().zip(mass).map(|(xi, mi)| xi * mi).sum::<f64>() / total
}

/// Removes the weighted mean: `x - (Σ m x / Σ m) 1`.
pub fn project_mean_zero(x: &[f64], mass: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    project_mean_zero_in_place(&mut out, mass);
    out
}

pub fn project_mean_zero_in_place(x: &mut [f64], mass: &[f64]) {
    let mean = weighted_mean(x, mass);
    for xi in x.iter_mut() {
        *xi -= mean;
    }
}

/// Makes a load vector compatible with the Neumann nullspace:
/// `b - m (Σ b / Σ m)`, so that `Σ b = 0`.
pub fn project_load_in_place(b: &mut [f64], mass: &[f64]) {
    let total: f64 = mass.iter().sum();
    let s: f64 = b.iter().sum::<f64>() / total;
    for (bi, mi) in b.iter_mut().zip(mass) {
        *bi -= s * mi;
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    /// `None` means `10 n`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: None,
        }
    }
}

impl CgOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Solves `A x = b` on the weighted-mean-zero subspace.
///
/// The right-hand side is first made compatible (`Σ b = 0`); the returned
/// `x` has zero weighted mean and satisfies `‖A x - b‖ ≤ tol ‖b‖`. Conjugate
/// gradients with a diagonal preconditioner, re-projecting the residual and
/// search direction every iteration. `A` must be positive definite on the
/// subspace.
pub fn solve_projected(matrix: &SparseSym, mass: &[f64], b: &[f64], opts: CgOptions) -> Result<Vec<f64>> {
    let n = matrix.dim();
    if mass.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mass.len() });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let inv_diag: Vec<f64> = matrix
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let max_iter = opts.max_iter.unwrap_or(10 * n).max(1);

    let mut r = b.to_vec();
    project_load_in_place(&mut r, mass);
    let b_norm = norm(&r);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let precondition = |r: &[f64], z: &mut Vec<f64>| {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&inv_diag) {
            *zi = ri * di;
        }
        project_mean_zero_in_place(z, mass);
    };
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = b_norm;
    for _ in 0..max_iter {
        matrix.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: res / b_norm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project_load_in_place(&mut r, mass);
        res = norm(&r);
        if res <= opts.tol * b_norm {
            project_mean_zero_in_place(&mut x, mass);
            return Ok(x);
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: res / b_norm,
    })
}
