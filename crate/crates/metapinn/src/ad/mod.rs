//! Scalar computation-graph engine.
//!
//! Three differentiation services, layered on one append-only arena:
//!
//! 1. first/second derivatives of network outputs with respect to
//!    spatial/temporal inputs — forward-mode jets ([`Jet2`]), whose
//!    coefficients become tape nodes when the downstream loss is recorded;
//! 2. gradients of any recorded scalar with respect to parameters — one
//!    reverse sweep ([`grad`]);
//! 3. gradients through a K-step unrolled inner optimization — the reverse
//!    sweep can *emit adjoints as new nodes* ([`grad_nodes`]), so recorded
//!    gradient-descent updates stay differentiable and [`unrolled_grad`]
//!    recovers exact second-order meta-gradients.
//!
//! Graphs are confined to one worker thread (a thread-local arena, reset
//! between adaptation runs); there is no shared mutable state.

mod jet;
mod tape;

pub use jet::{seed_jets, spatial_jet, Jet2};
pub use tape::{
    constant, dot, grad, grad_nodes, input, inputs, node_count, reset, stop_grad, sum,
    unrolled_grad, value, AdError, Var,
};
