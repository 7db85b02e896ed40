//! Numerical laboratory for the semilinear Neumann problem
//!
//! ```text
//!   -ε Δu = e^u - 1 - a u   in Ω,     ∂u/∂ν = 0   on ∂Ω,
//! ```
//!
//! on planar domains (`a > 1`, `ε > 0`). The crate discretizes the problem
//! with P1 elements and lumped mass, finds steady states by damped Newton
//! iteration from many starts, tracks the primary bifurcation off the
//! constant state `u ≡ ξ_a`, and checks on every computed solution the
//! estimates that force all solutions to be constant when diffusion is large:
//!
//! * zero average of the nonlinearity, `∫ f(u) = 0`;
//! * the L¹ bound `‖f(u)‖₁ ≤ 2 C₀ |Ω|` and the mean bounds `0 ≤ ū ≤ ξ_a`;
//! * exponential integrability of the fluctuation `v = u - ū`;
//! * the energy identity `ε ∫|∇v|² = ∫ (f(u) - f(ū)) v` and the Poincaré
//!   inequality with the first nonzero Neumann eigenvalue `μ₁`;
//! * the Neumann Green representation of `v`.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`scalar_model`] | `f`, `f'`, `ξ_a`, explicit constants |
//! | [`discretization`] | meshes, stiffness, lumped mass, `|Ω|`, `D` |
//! | [`linalg`] | sparse storage, projected CG, eigenpairs, banded LU |
//! | [`solver`] | residual, Jacobian, Newton, classification, multi-start |
//! | [`continuation`] | stability indicator, bifurcation, branch tracking, sweeps |
//! | [`diagnostics`] | checks of the a priori estimates |
//! | [`io`] | mesh/field text files and CSV tables |

// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod io;
pub mod linalg;
pub mod scalar_model;
pub mod solver;

pub use error::{Error, Result};
