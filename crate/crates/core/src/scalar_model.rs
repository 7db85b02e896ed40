//! The scalar nonlinearity `f(t) = e^t - 1 - a t` and the explicit constants
//! of the a priori estimate chain (L¹ bound, exponential integrability
//! threshold, Lipschitz bound, rigidity threshold).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Arguments above this limit saturate instead of overflowing to infinity.
pub const SATURATION_LIMIT: f64 = 700.0;

/// Scalar data of the problem: reaction coefficient `a`, diffusion rate
/// `epsilon` and the integrability exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub epsilon: f64,
    pub q: f64,
}

impl ModelParams {
    pub fn new(a: f64, epsilon: f64, q: f64) -> Result<Self> {
        check_a(a)?;
        check_epsilon(epsilon)?;
        if !(q > 2.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must exceed 2 (got {q})")));
        }
        Ok(Self { a, epsilon, q })
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        Self::new(self.a, epsilon, self.q)
    }
}

pub(crate) fn check_a(a: f64) -> Result<()> {
    if a > 1.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("a must exceed 1 (got {a})")))
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must be positive (got {epsilon})"
        )))
    }
}

/// `f(t) = e^t - 1 - a t`, evaluated as written.
#[inline]
pub fn eval_f(t: f64, a: f64) -> f64 {
    t.exp() - 1.0 - a * t
}

/// `f'(t) = e^t - a`.
#[inline]
pub fn eval_f_prime(t: f64, a: f64) -> f64 {
    t.exp() - a
}

/// Value of `f` together with a saturation flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturating {
    pub value: f64,
    pub saturated: bool,
}

/// `f` with the overflow policy applied: arguments above [`SATURATION_LIMIT`]
/// return `f(SATURATION_LIMIT)` and raise the flag.
#[inline]
pub fn eval_f_saturating(t: f64, a: f64) -> Saturating {
    if t > SATURATION_LIMIT || t.is_nan() {
        Saturating {
            value: eval_f(SATURATION_LIMIT, a),
            saturated: true,
        }
    } else {
        Saturating {
            value: eval_f(t, a),
            saturated: false,
        }
    }
}

/// Positive root `xi_a` of `f`.
///
/// Bisection on a bracket starting at `[log a, log a + max(2, 4a)]`, widened
/// by doubling until `f` changes sign, followed by a Newton polish that is
/// only accepted while it stays inside the final bracket.
pub fn find_xi(a: f64, tol: f64) -> Result<f64> {
    check_a(a)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive (got {tol})")));
    }
    let mut lo = a.ln();
    let mut width = (4.0 * a).max(2.0);
    let mut hi = lo + width;
    while eval_f(hi, a) <= 0.0 {
        lo = hi;
        width *= 2.0;
        hi = lo + width;
        if !hi.is_finite() || hi > SATURATION_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "could not bracket the positive root for a = {a}"
            )));
        }
    }

    // f < 0 on [log a, xi), f > 0 beyond.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = eval_f(mid, a);
        if fm.abs() <= tol {
            lo = mid;
            hi = mid;
            break;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-3 {
            break;
        }
    }

    let mut t = 0.5 * (lo + hi);
    for _ in 0..60 {
        let ft = eval_f(t, a);
        if ft.abs() <= tol * 1e-3 {
            break;
        }
        let step = ft / eval_f_prime(t, a);
        let next = t - step;
        if !(next > lo && next < hi) && hi > lo {
            // Newton left the bracket: fall back to one bisection step.
            if ft < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            t = 0.5 * (lo + hi);
        } else {
            if ft < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if next == t {
                break;
            }
            t = next;
        }
    }
    if eval_f(t, a).abs() > tol {
        return Err(Error::NoConvergence {
            iterations: 60,
            residual: eval_f(t, a).abs(),
        });
    }
    Ok(t)
}

/// Depth of the global minimum of `f`: `C0 = a log a - a + 1`.
pub fn c0(a: f64) -> f64 {
    a * a.ln() - a + 1.0
}

/// Lipschitz bound of `f` on `[-M, M]`: `max{e^M - a, a - e^{-M}}`.
pub fn lipschitz_k(m: f64, a: f64) -> f64 {
    (m.exp() - a).max(a - (-m).exp())
}

/// Rigidity threshold `K(M) / mu1` beyond which the energy argument forces
/// constancy.
pub fn threshold_of_m(m: f64, a: f64, mu1: f64) -> f64 {
    lipschitz_k(m, a) / mu1
}

/// The `epsilon` at which the mode with eigenvalue `mu_k` of the
/// linearization about `u = xi_a` becomes neutral: `f'(xi_a) / mu_k`.
pub fn bifurcation_epsilon(a: f64, mu_k: f64) -> Result<f64> {
    if !(mu_k > 0.0) {
        return Err(Error::InvalidParameter(format!("mu_k must be positive (got {mu_k})")));
    }
    let xi = find_xi(a, 1e-14)?;
    Ok(eval_f_prime(xi, a) / mu_k)
}

/// Explicit constants of the estimate chain for a given domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantChain {
    pub a: f64,
    pub q: f64,
    pub area: f64,
    pub diameter: f64,
    pub xi_a: f64,
    pub c0: f64,
    /// L¹ bound on `f(u)`: `2 C0 |Ω|`.
    pub c1: f64,
    /// Threshold `q C1 / π` of the exponential integrability estimate.
    pub eps0_of_q: f64,
    /// Upper bound `2π D²` for `sup_y ∫ D/|x-y| dx`.
    pub c2_bound: f64,
    /// Regular-part bound of the Neumann Green function; numerical estimate,
    /// filled in by the diagnostics module.
    pub k_green: Option<f64>,
}

impl ConstantChain {
    pub fn lipschitz_k_of_m(&self, m: f64) -> f64 {
        lipschitz_k(m, self.a)
    }

    pub fn threshold_of_m(&self, m: f64, mu1: f64) -> f64 {
        threshold_of_m(m, self.a, mu1)
    }

    /// `C_q = C2 e^{π K}` using the bound `2πD²` for `C2`. Numerical estimate,
    /// not a certified constant; `None` until `k_green` is known.
    pub fn cq_estimate(&self) -> Option<f64> {
        self.k_green.map(|k| self.c2_bound * (PI * k).exp())
    }
}

pub fn constant_chain(params: &ModelParams, area: f64, diameter: f64) -> Result<ConstantChain> {
    if !(area > 0.0) || !(diameter > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "area and diameter must be positive (got {area}, {diameter})"
        )));
    }
    let xi_a = find_xi(params.a, 1e-14)?;
    let c0 = c0(params.a);
    let c1 = 2.0 * c0 * area;
    Ok(ConstantChain {
        a: params.a,
        q: params.q,
        area,
        diameter,
        xi_a,
        c0,
        c1,
        eps0_of_q: params.q * c1 / PI,
        c2_bound: 2.0 * PI * diameter * diameter,
        k_green: None,
    })
}
