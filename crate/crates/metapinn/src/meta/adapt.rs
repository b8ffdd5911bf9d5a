//! Deployment-time adaptation: K steps of stochastic optimization from the
//! meta-learned initialization, resampling a fresh collocation batch each
//! step.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Alpha, MetaState};
use crate::batch::{loss_grad, loss_value};
use crate::siren::ParamVector;
use crate::tasks::{CollocationBatch, SamplerConfig, TaskSpec};

/// Per-step record of one adaptation run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct AdaptReport {
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub clip_events: Vec<bool>,
    pub step_seconds: Vec<f64>,
    /// Set when adaptation aborted on a non-finite loss or gradient; the
    /// per-step vectors keep the completed prefix.
    pub aborted: Option<String>,
}

/// Adaptation trace: (θ after k steps, loss recorded at that iterate) pairs.
#[derive(Clone, Debug)]
pub struct PathTrace {
    pub thetas: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
}

/// Rescale `g` to `max_norm` when it exceeds it. Returns the pre-clip norm
/// and whether clipping fired.
pub fn clip_to_norm(g: &mut [f64], max_norm: f64) -> (f64, bool) {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for x in g.iter_mut() {
            *x *= s;
        }
        (norm, true)
    } else {
        (norm, false)
    }
}

/// Run `steps` updates from the meta-state's initialization. MAML uses the
/// learned per-step step sizes with plain SGD (steps beyond K reuse the last
/// row); LEAP uses Adam at its stored rate. Every gradient is norm-clipped
/// before the update.
pub fn adapt(
    state: &MetaState,
    task: &TaskSpec,
    steps: usize,
    points_per_step: usize,
    sampler: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> (ParamVector, AdaptReport) {
    let (theta, report, _) = adapt_inner(state, task, steps, points_per_step, sampler, rng, false);
    (theta, report)
}

/// [`adapt`] that also records the (θᵏ, Lᵏ) trace, evaluating one extra loss
/// at the final iterate so the trace has `steps + 1` entries.
pub fn adapt_traced(
    state: &MetaState,
    task: &TaskSpec,
    steps: usize,
    points_per_step: usize,
    sampler: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> (ParamVector, AdaptReport, PathTrace) {
    let (theta, report, trace) =
        adapt_inner(state, task, steps, points_per_step, sampler, rng, true);
    (theta, report, trace.expect("trace requested"))
}

fn adapt_inner(
    state: &MetaState,
    task: &TaskSpec,
    steps: usize,
    points_per_step: usize,
    sampler: &SamplerConfig,
    rng: &mut ChaCha8Rng,
    traced: bool,
) -> (ParamVector, AdaptReport, Option<PathTrace>) {
    state.check();
    let mut theta = state.theta0.0.clone();
    let mut report = AdaptReport::default();
    let mut trace = traced.then(|| PathTrace {
        thetas: vec![theta.clone()],
        losses: Vec::new(),
    });
    // LEAP adapts with its own optimizer state per run
    let mut adam = match state.alpha {
        Alpha::Scalar(rate) => Some(super::Adam::new(rate, theta.len())),
        Alpha::PerStep(_) => None,
    };
    for k in 0..steps {
        let t0 = Instant::now();
        let batch = match CollocationBatch::sample(task, rng, points_per_step, sampler.interior_frac)
        {
            Ok(b) => b,
            Err(e) => {
                report.aborted = Some(format!("sampling failed at step {k}: {e}"));
                break;
            }
        };
        let out = loss_grad(task, &batch, &state.net, &theta, None);
        if !out.loss.is_finite() || out.grad.iter().any(|g| !g.is_finite()) {
            report.aborted = Some(format!("non-finite loss or gradient at step {k}"));
            break;
        }
        let mut g = out.grad;
        let (norm, clipped) = clip_to_norm(&mut g, state.clip_norm);
        match &state.alpha {
            Alpha::PerStep(_) => {
                let row = state.alpha_row(k).expect("per-step alpha");
                for (p, (a, gi)) in theta.iter_mut().zip(row.iter().zip(&g)) {
                    *p -= a * gi;
                }
            }
            Alpha::Scalar(_) => {
                adam.as_mut().unwrap().step(&mut theta, &g);
            }
        }
        report.losses.push(out.loss);
        report.grad_norms.push(norm);
        report.clip_events.push(clipped);
        report.step_seconds.push(t0.elapsed().as_secs_f64());
        if let Some(tr) = &mut trace {
            tr.thetas.push(theta.clone());
            tr.losses.push(out.loss);
        }
    }
    if let Some(tr) = &mut trace {
        // trailing loss at the final iterate, on one more fresh batch
        if report.aborted.is_none() {
            if let Ok(batch) =
                CollocationBatch::sample(task, rng, points_per_step, sampler.interior_frac)
            {
                let (l, _) = loss_value(task, &batch, &state.net, &theta);
                tr.losses.push(l);
            }
        }
    }
    (ParamVector(theta), report, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::Method;
    use crate::siren::NetConfig;
    use crate::tasks::{sample_poisson_task, Family};
    use rand::SeedableRng;

    fn quick_state(method: Method) -> (MetaState, TaskSpec, SamplerConfig) {
        let sampler = SamplerConfig::default();
        let task = sample_poisson_task(&sampler, 7);
        let (di, doo) = Family::Poisson.net_dims();
        let net = NetConfig::new(di, doo, 1, 6);
        let state = MetaState::fresh(method, net, 3, 1e-3, 100.0, 5);
        (state, task, sampler)
    }

    #[test]
    fn zero_steps_returns_theta0_unchanged() {
        let (state, task, sampler) = quick_state(Method::Maml);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (theta, report) = adapt(&state, &task, 0, 32, &sampler, &mut rng);
        assert_eq!(theta, state.theta0);
        assert!(report.losses.is_empty());
        assert!(report.aborted.is_none());
    }

    #[test]
    fn clip_scales_to_max_norm() {
        let mut g = vec![120.0, 160.0]; // norm 200
        let (norm, clipped) = clip_to_norm(&mut g, 100.0);
        assert_eq!(norm, 200.0);
        assert!(clipped);
        // scaled by 0.5
        assert_eq!(g, vec![60.0, 80.0]);
        let mut g2 = vec![3.0, 4.0];
        let (n2, c2) = clip_to_norm(&mut g2, 100.0);
        assert_eq!(n2, 5.0);
        assert!(!c2);
        assert_eq!(g2, vec![3.0, 4.0]);
    }

    #[test]
    fn steps_beyond_k_execute_and_record() {
        let (state, task, sampler) = quick_state(Method::Maml);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = 4;
        let (_, report) = adapt(&state, &task, state.inner_steps + m, 32, &sampler, &mut rng);
        assert_eq!(report.losses.len(), state.inner_steps + m);
        assert!(report.aborted.is_none());
    }

    #[test]
    fn fixed_seed_is_bit_deterministic() {
        let (state, task, sampler) = quick_state(Method::Leap);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let (theta, report) = adapt(&state, &task, 5, 32, &sampler, &mut rng);
            (
                theta.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                report.losses.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn loss_trace_prefix_property() {
        // the 10-step run's first 5 losses equal the 5-step run's losses
        let (state, task, sampler) = quick_state(Method::Maml);
        let mut rng5 = ChaCha8Rng::seed_from_u64(9);
        let (_, r5) = adapt(&state, &task, 5, 32, &sampler, &mut rng5);
        let mut rng10 = ChaCha8Rng::seed_from_u64(9);
        let (_, r10) = adapt(&state, &task, 10, 32, &sampler, &mut rng10);
        assert_eq!(&r10.losses[..5], &r5.losses[..]);
    }

    #[test]
    fn traced_adapt_has_full_path() {
        let (state, task, sampler) = quick_state(Method::Maml);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (_, _, trace) = adapt_traced(&state, &task, 4, 32, &sampler, &mut rng);
        assert_eq!(trace.thetas.len(), 5);
        assert_eq!(trace.losses.len(), 5);
    }
}
