//! MAML outer step: exact second-order meta-gradients through the unrolled
//! inner SGD (including the gradient-clipping nonlinearity), with respect to
//! both the initialization θ⁰ and the per-step per-parameter step sizes α.
//!
//! Two equivalent routes compute the same quantity:
//!
//! - `MamlRoute::Adjoint` — the reverse recursion over the stored inner
//!   trajectory. With v_K = ∇L_meta(θᴷ):
//!   ᾱ_k = −v_k ⊙ g̃_k, then v_{k−1} = v_k − H_k · J_k(α_k ⊙ v_k),
//!   where g̃ is the clipped gradient, H_k the loss Hessian at θ^{k−1}
//!   (applied as an exact Hessian-vector product), and J_k the clip
//!   Jacobian (c/‖g‖)(I − ĝĝᵀ) when clipping fired, identity otherwise.
//! - `MamlRoute::Tape` — record the whole unroll on the tape with
//!   gradient-emitting reverse sweeps and differentiate the meta-loss
//!   directly. Practical for small problems; the equivalence of the two
//!   routes is enforced by tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Adam, Alpha, MetaConfig, MetaState};
use crate::ad;
use crate::batch::loss_grad;
use crate::tasks::{build_loss, CollocationBatch, SamplerConfig, TaskSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MamlRoute {
    Adjoint,
    Tape,
}

/// Per-task meta-gradient contribution.
#[derive(Clone, Debug)]
pub struct TaskMetaGrad {
    pub theta0_grad: Vec<f64>,
    pub alpha_grad: Vec<Vec<f64>>,
    pub meta_loss: f64,
}

/// Draw the K inner batches plus the meta batch for one task.
fn draw_batches(
    task: &TaskSpec,
    k: usize,
    points: usize,
    sampler: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<CollocationBatch>> {
    (0..=k)
        .map(|_| CollocationBatch::sample(task, rng, points, sampler.interior_frac).ok())
        .collect()
}

/// Meta-gradients of one task's K-step unrolled meta-loss. Returns `None`
/// when a non-finite value forces the task to be skipped.
pub fn maml_task_grads(
    state: &MetaState,
    task: &TaskSpec,
    batches: &[CollocationBatch],
    first_order: bool,
    route: MamlRoute,
) -> Option<TaskMetaGrad> {
    match route {
        MamlRoute::Adjoint => maml_grads_adjoint(state, task, batches, first_order),
        MamlRoute::Tape => maml_grads_tape(state, task, batches, first_order),
    }
}

fn finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

fn maml_grads_adjoint(
    state: &MetaState,
    task: &TaskSpec,
    batches: &[CollocationBatch],
    first_order: bool,
) -> Option<TaskMetaGrad> {
    let k_steps = state.inner_steps;
    assert_eq!(batches.len(), k_steps + 1, "need K inner batches + meta batch");
    let alpha = match &state.alpha {
        Alpha::PerStep(rows) => rows,
        Alpha::Scalar(_) => panic!("MAML state must carry per-step alpha"),
    };
    let p = state.theta0.len();
    // forward: inner SGD, storing iterates and clipped gradients
    let mut thetas: Vec<Vec<f64>> = Vec::with_capacity(k_steps + 1);
    thetas.push(state.theta0.0.clone());
    let mut raw_norms = Vec::with_capacity(k_steps);
    let mut clipped_grads: Vec<Vec<f64>> = Vec::with_capacity(k_steps);
    for k in 0..k_steps {
        let out = loss_grad(task, &batches[k], &state.net, &thetas[k], None);
        if !out.loss.is_finite() || !finite(&out.grad) {
            return None;
        }
        let mut g = out.grad;
        let (norm, _) = super::clip_to_norm(&mut g, state.clip_norm);
        raw_norms.push(norm);
        let mut next = thetas[k].clone();
        for i in 0..p {
            next[i] -= alpha[k][i] * g[i];
        }
        clipped_grads.push(g);
        thetas.push(next);
    }
    // meta-loss and its gradient at θᴷ
    let meta = loss_grad(task, &batches[k_steps], &state.net, &thetas[k_steps], None);
    if !meta.loss.is_finite() || !finite(&meta.grad) {
        return None;
    }
    let mut v = meta.grad;
    let mut alpha_grad = vec![vec![0.0; p]; k_steps];
    for k in (0..k_steps).rev() {
        let g_tilde = &clipped_grads[k];
        for i in 0..p {
            alpha_grad[k][i] = -v[i] * g_tilde[i];
        }
        if first_order {
            continue;
        }
        // w = J_k (α_k ⊙ v)
        let mut w: Vec<f64> = (0..p).map(|i| alpha[k][i] * v[i]).collect();
        let norm = raw_norms[k];
        if norm > state.clip_norm {
            // J = (c/‖g‖)(I − ĝĝᵀ), with ĝ from the clipped gradient
            // (same direction as the raw one)
            let scale = state.clip_norm / norm;
            let c_norm = state.clip_norm; // ‖g̃‖ after clipping
            let dot = w
                .iter()
                .zip(g_tilde)
                .map(|(wi, gi)| wi * gi / c_norm)
                .sum::<f64>();
            for i in 0..p {
                w[i] = scale * (w[i] - g_tilde[i] / c_norm * dot);
            }
        }
        let hv = loss_grad(task, &batches[k], &state.net, &thetas[k], Some(&w));
        let hvp = hv.grad_t.expect("tangent mode");
        if !finite(&hvp) {
            return None;
        }
        for i in 0..p {
            v[i] -= hvp[i];
        }
    }
    Some(TaskMetaGrad {
        theta0_grad: v,
        alpha_grad,
        meta_loss: meta.loss,
    })
}

fn maml_grads_tape(
    state: &MetaState,
    task: &TaskSpec,
    batches: &[CollocationBatch],
    first_order: bool,
) -> Option<TaskMetaGrad> {
    let k_steps = state.inner_steps;
    assert_eq!(batches.len(), k_steps + 1);
    let alpha = match &state.alpha {
        Alpha::PerStep(rows) => rows,
        Alpha::Scalar(_) => panic!("MAML state must carry per-step alpha"),
    };
    let p = state.theta0.len();
    ad::reset();
    let theta0: Vec<ad::Var> = ad::inputs(&state.theta0.0);
    let alpha_nodes: Vec<Vec<ad::Var>> = alpha.iter().map(|row| ad::inputs(row)).collect();
    let mut theta = theta0.clone();
    for k in 0..k_steps {
        let loss = build_loss(task, &batches[k], &state.net, &theta);
        if !ad::value(loss).is_finite() {
            return None;
        }
        let mut g = ad::grad_nodes(loss, &theta);
        // recorded clip: scale by c/‖g‖ when the norm exceeds the threshold
        let norm2 = ad::dot(&g, &g);
        let norm = crate::num::Real::sqrt(norm2);
        if ad::value(norm) > state.clip_norm {
            let scale = ad::constant(state.clip_norm) / norm;
            g = g.iter().map(|&gi| gi * scale).collect();
        }
        if first_order {
            g = g.iter().map(|&gi| ad::stop_grad(gi)).collect();
        }
        theta = (0..p)
            .map(|i| theta[i] - alpha_nodes[k][i] * g[i])
            .collect();
    }
    let meta_loss = build_loss(task, &batches[k_steps], &state.net, &theta);
    if !ad::value(meta_loss).is_finite() {
        return None;
    }
    let (gt, ga) = ad::unrolled_grad(meta_loss, &theta0, &alpha_nodes).ok()?;
    let value = ad::value(meta_loss);
    ad::reset();
    Some(TaskMetaGrad {
        theta0_grad: gt,
        alpha_grad: ga,
        meta_loss: value,
    })
}

/// Outcome of one outer step.
#[derive(Clone, Copy, Debug, Default)]
pub struct OuterStepLog {
    pub mean_meta_loss: f64,
    pub used_tasks: usize,
    pub skipped_tasks: usize,
    pub applied: bool,
    pub meta_grad_norm: f64,
    pub meta_grad_clipped: bool,
}

/// One MAML outer update: per-task inner unrolls (concurrently, on immutable
/// θ⁰ snapshots), an ordered average of the meta-gradients, a shared norm
/// clip over (θ⁰, α), and one Adam step on both.
pub fn maml_outer_step(
    state: &mut MetaState,
    opt: &mut Adam,
    tasks: &[(TaskSpec, u64)],
    cfg: &MetaConfig,
    sampler: &SamplerConfig,
) -> OuterStepLog {
    assert!(!tasks.is_empty());
    let route = if cfg.use_tape_unroll {
        MamlRoute::Tape
    } else {
        MamlRoute::Adjoint
    };
    let points = cfg.points_per_batch();
    let shared: &MetaState = state;
    let results: Vec<Option<TaskMetaGrad>> = tasks
        .par_iter()
        .map(|(task, batch_seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(*batch_seed);
            let batches = draw_batches(task, shared.inner_steps, points, sampler, &mut rng)?;
            maml_task_grads(shared, task, &batches, cfg.first_order, route)
        })
        .collect();

    let p = state.theta0.len();
    let k_steps = state.inner_steps;
    let mut gt = vec![0.0; p];
    let mut ga = vec![vec![0.0; p]; k_steps];
    let mut loss_sum = 0.0;
    let mut used = 0usize;
    for r in results.iter().flatten() {
        for i in 0..p {
            gt[i] += r.theta0_grad[i];
        }
        for k in 0..k_steps {
            for i in 0..p {
                ga[k][i] += r.alpha_grad[k][i];
            }
        }
        loss_sum += r.meta_loss;
        used += 1;
    }
    let skipped = tasks.len() - used;
    if used == 0 {
        return OuterStepLog {
            mean_meta_loss: f64::NAN,
            used_tasks: 0,
            skipped_tasks: skipped,
            applied: false,
            ..Default::default()
        };
    }
    let inv = 1.0 / used as f64;
    // concatenated meta-gradient over (θ⁰, α) shares one clip norm
    let mut flat = Vec::with_capacity(p * (1 + k_steps));
    flat.extend(gt.iter().map(|g| g * inv));
    for row in &ga {
        flat.extend(row.iter().map(|g| g * inv));
    }
    let (norm, clipped) = super::clip_to_norm(&mut flat, state.clip_norm);

    let alpha_rows = match &mut state.alpha {
        Alpha::PerStep(rows) => rows,
        Alpha::Scalar(_) => unreachable!(),
    };
    let mut params = Vec::with_capacity(flat.len());
    params.extend_from_slice(&state.theta0.0);
    for row in alpha_rows.iter() {
        params.extend_from_slice(row);
    }
    opt.step(&mut params, &flat);
    state.theta0.0.copy_from_slice(&params[..p]);
    for (k, row) in alpha_rows.iter_mut().enumerate() {
        row.copy_from_slice(&params[p * (1 + k)..p * (2 + k)]);
    }
    OuterStepLog {
        mean_meta_loss: loss_sum * inv,
        used_tasks: used,
        skipped_tasks: skipped,
        applied: true,
        meta_grad_norm: norm,
        meta_grad_clipped: clipped,
    }
}

/// Deterministic per-task batch seeds for one outer iteration.
pub(crate) fn batch_seeds(rng: &mut ChaCha8Rng, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.gen()).collect()
}
