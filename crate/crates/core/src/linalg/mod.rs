//! Sparse symmetric storage, solves on the Neumann mean-zero subspace, and
//! the first nonzero Neumann eigenpair.

pub mod banded;
pub mod cg;
pub mod eigen;
pub mod sparse;

pub use banded::BandedLu;
pub use cg::{
    project_load_in_place, project_mean_zero, project_mean_zero_in_place, solve_projected, weighted_mean,
    CgOptions,
};
pub use eigen::{inverse_iteration, rayleigh_quotient, smallest_nonzero_eigen, smallest_subspace_eigen, EigenPair};
pub use sparse::SparseSym;
