//! Meta-learned initializations for mesh-free neural PDE solvers.
//!
//! A collocation-residual solver represents the PDE solution with a small
//! sinusoidal network and minimizes a Monte Carlo residual loss. Gradient-based
//! meta-learning (MAML with learned per-step per-parameter step sizes, and
//! LEAP) trains an initialization over a distribution of related PDE tasks so
//! that a fresh task is solved in a few gradient steps.
//!
//! Crate layout:
//!
//! - [`ad`] — scalar computation-graph engine: reverse-mode tape, forward-mode
//!   second-order jets, and backpropagation through unrolled inner loops.
//! - [`siren`] — sinusoidal network, its initialization scheme, and the
//!   canonical flat parameter layout.
//! - [`tasks`] — the three PDE families (nonlinear Poisson, 1D viscous
//!   Burgers, planar neo-Hookean hyperelasticity): samplers, residual and
//!   boundary operators, and collocation loss builders.
//! - [`batch`] — vectorized evaluation of the same losses, gradients, and
//!   Hessian-vector products; equivalence with [`ad`] is enforced by tests.
//! - [`meta`] — MAML/LEAP meta-trainers and the deployment adaptation loop.
//! - [`oracles`] — independent references: manufactured Poisson solutions, a
//!   Godunov/SSP-RK3 finite-volume Burgers solver, and closed-form affine
//!   hyperelastic deformations.
//! - [`cli`] — command-line entry points, config files, checkpoints, and CSV
//!   emitters for the speed/accuracy benchmark protocol.

pub mod ad;
pub mod batch;
pub mod cli;
pub mod meta;
pub mod num;
pub mod oracles;
pub mod siren;
pub mod tasks;
