//! Meta-trainers over task distributions and the deployment-time adaptation
//! loop.
//!
//! Two gradient-based meta-learners share one deployment interface:
//!
//! - MAML: backpropagation through K unrolled SGD steps updates both the
//!   initialization θ⁰ and a per-step, per-parameter step-size array α.
//!   The inner optimizer is plain SGD; the outer optimizer is Adam.
//! - LEAP: the meta-gradient pulls θ⁰ along observed adaptation paths,
//!   shortening the squared gradient-path length on the loss manifold under
//!   the frozen-gradient approximation. The inner optimizer is Adam at a
//!   single learned-free rate; the outer optimizer is Adam.
//!
//! Gradients in both the inner and outer loops are norm-clipped at
//! `clip_norm` before being applied.

mod adam;
mod adapt;
mod leap;
mod maml;
mod train;

pub use adam::Adam;
pub use adapt::{adapt, adapt_traced, clip_to_norm, AdaptReport, PathTrace};
pub use leap::{leap_increment, leap_outer_step, path_distance};
pub use maml::{maml_outer_step, maml_task_grads, MamlRoute, TaskMetaGrad};
pub use train::{holdout_eval, holdout_tasks, meta_train, train_batch_points, TrainLog, TrainRow};

use serde::{Deserialize, Serialize};

use crate::siren::{NetConfig, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Maml,
    Leap,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Maml => "maml",
            Method::Leap => "leap",
        }
    }
    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "maml" => Some(Method::Maml),
            "leap" => Some(Method::Leap),
            _ => None,
        }
    }
}

/// Per-step step sizes: a K × P array for MAML, a single scalar rate for
/// LEAP's inner Adam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Alpha {
    PerStep(Vec<Vec<f64>>),
    Scalar(f64),
}

/// Meta-learned initialization plus step sizes and deployment settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaState {
    pub method: Method,
    pub net: NetConfig,
    pub theta0: ParamVector,
    pub alpha: Alpha,
    pub inner_steps: usize,
    pub clip_norm: f64,
}

impl MetaState {
    /// Fresh state from the sinusoidal initialization scheme, with α rows
    /// filled by the configured inner rate (MAML) or the scalar rate (LEAP).
    pub fn fresh(method: Method, net: NetConfig, inner_steps: usize, inner_lr: f64, clip_norm: f64, seed: u64) -> MetaState {
        let theta0 = crate::siren::init_siren(&net, seed);
        let alpha = match method {
            Method::Maml => {
                Alpha::PerStep(vec![vec![inner_lr; theta0.len()]; inner_steps])
            }
            Method::Leap => Alpha::Scalar(inner_lr),
        };
        MetaState {
            method,
            net,
            theta0,
            alpha,
            inner_steps,
            clip_norm,
        }
    }

    /// The α row used at (0-based) step k; steps beyond K reuse the last
    /// learned row.
    pub fn alpha_row(&self, k: usize) -> Option<&[f64]> {
        match &self.alpha {
            Alpha::PerStep(rows) => {
                let idx = k.min(rows.len().saturating_sub(1));
                rows.get(idx).map(|r| r.as_slice())
            }
            Alpha::Scalar(_) => None,
        }
    }

    pub fn check(&self) {
        assert!(self.clip_norm > 0.0, "clip_norm must be positive");
        if let Alpha::PerStep(rows) = &self.alpha {
            assert_eq!(rows.len(), self.inner_steps, "alpha rows must equal K");
            for r in rows {
                assert_eq!(r.len(), self.theta0.len(), "alpha row length mismatch");
            }
        }
    }
}

/// Training-loop hyperparameters. The inner optimizer is SGD for MAML and
/// Adam for LEAP; the outer optimizer is Adam for both.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub outer_lr: f64,
    pub inner_lr: f64,
    pub batch_size: usize,
    pub iterations: usize,
    /// Collocation points sampled per task per outer iteration, divided
    /// across the K inner batches plus the meta batch.
    pub points: usize,
    pub inner_steps: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub eval_tasks: usize,
    /// First-order approximation: stop gradients at each inner update
    /// (not the primary method; kept for ablation).
    pub first_order: bool,
    /// Compute MAML meta-gradients by recording the full unroll on the tape
    /// instead of the vectorized adjoint recursion. The two routes agree to
    /// high precision; the tape is practical only for small problems.
    pub use_tape_unroll: bool,
}

impl MetaConfig {
    /// Points per collocation batch: the per-task budget split across the
    /// K inner batches plus the meta/eval batch.
    pub fn points_per_batch(&self) -> usize {
        (self.points / (self.inner_steps + 1)).max(4)
    }
}
