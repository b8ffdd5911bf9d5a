//! Independent reference solutions.
//!
//! Every accuracy claim in the benchmark protocol is checked against one of
//! these, none of which share an optimization path with the solvers:
//!
//! - manufactured closed-form solutions for the nonlinear Poisson problem
//!   (the induced source and boundary data make the closed form exact);
//! - a conservative finite-volume solver (Godunov flux, SSP-RK3) for 1D
//!   viscous Burgers;
//! - the closed-form affine minimizer for hyperelastic Dirichlet problems on
//!   solid domains.

mod burgers_fv;
mod elastic_affine;
mod mse;
mod poisson_mms;

pub use burgers_fv::{
    godunov_flux, fv_step, solve_burgers_reference, BurgersSnapshots, FvError, FvGrid,
};
pub use elastic_affine::{affine_elastic_reference, AffineElastic};
pub use mse::{mse_eval, Field};
pub use poisson_mms::ManufacturedPoisson;
