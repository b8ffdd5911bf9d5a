//! PDE task distributions, geometry samplers, residual/boundary operators,
//! and Monte Carlo loss builders.
//!
//! A task is one parameterization of a PDE: samplers for its domain and
//! boundary plus pure residual operators. The three families share one
//! 2-coordinate input convention (space/space or space/time), one collocation
//! batch shape, and one loss assembly:
//!
//! - interior mean of the governing-residual term (squared residual for
//!   Poisson/Burgers, energy density for elasticity),
//! - boundary mean of the squared constraint mismatch,
//! - initial-condition mean of the squared mismatch (time-dependent only).
//!
//! Residual operators are generic over the scalar type, so the same code
//! serves plain evaluation, tape recording, and tangent propagation.

pub mod burgers;
pub mod elastic;
pub mod poisson;

use arrayvec::ArrayVec;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ad::{Jet2, Var};
use crate::num::Real;
use crate::siren::{forward, NetConfig};

pub use burgers::{burgers_residual_jets, sample_burgers_task, BurgersIc, BurgersTask};
pub use elastic::{
    elastic_energy_density_jets, sample_elastic_task, sample_porous_domain, ElasticBc,
    ElasticTask, Material, PoreLattice, INVERSION_PENALTY,
};
pub use poisson::{poisson_residual_jets, sample_poisson_task, PoissonData, PoissonTask, StarShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Poisson,
    Burgers,
    Elasticity,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Burgers => "burgers",
            Family::Elasticity => "elasticity",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "poisson" => Some(Family::Poisson),
            "burgers" => Some(Family::Burgers),
            "elasticity" => Some(Family::Elasticity),
            _ => None,
        }
    }

    /// Network input/output dimensions for this family.
    pub fn net_dims(self) -> (usize, usize) {
        match self {
            Family::Poisson => (2, 1),
            Family::Burgers => (2, 1),
            Family::Elasticity => (2, 2),
        }
    }

    pub fn time_dependent(self) -> bool {
        matches!(self, Family::Burgers)
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error(
        "pore layout invalid: max pore radius {max_r:.4} exceeds half the cell spacing {half_cell:.4}"
    )]
    PoreOverlap { max_r: f64, half_cell: f64 },
    #[error("rejection sampling stalled after {attempts} attempts")]
    SamplingStalled { attempts: usize },
}

/// Distribution parameters for task sampling. Defaults follow the task
/// distributions of the three experiment families; the narrowed desk-scale
/// distributions override individual fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Fraction of a collocation batch placed in the interior.
    pub interior_frac: f64,
    // nonlinear Poisson
    pub c_max: f64,
    /// Number of boundary Fourier harmonics beyond b0 (0 or 2).
    pub b_harmonics: usize,
    pub n_sources: usize,
    /// Fix the source to a single unit-amplitude bump at the origin.
    pub fixed_source: bool,
    pub b0_max: f64,
    // Burgers
    pub theta_max: f64,
    pub nu: f64,
    pub t_end: f64,
    // elasticity
    pub phi0_min: f64,
    pub phi0_max: f64,
    pub pore_c_max: f64,
    pub delta: f64,
    pub l0: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            interior_frac: 0.8,
            c_max: 0.2,
            b_harmonics: 2,
            n_sources: 3,
            fixed_source: false,
            b0_max: 1.0,
            theta_max: 2.0,
            nu: 0.01,
            t_end: 1.0,
            phi0_min: 0.0,
            phi0_max: 0.75,
            pore_c_max: 0.0,
            delta: 0.1,
            l0: 0.5,
            lambda: 1.5,
            mu: 1.0,
        }
    }
}

/// One PDE instance: geometry, operators, and parameter record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// Seed that drew this task (task id in manifests and bench rows).
    pub seed: u64,
    pub kind: TaskKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TaskKind {
    Poisson(PoissonTask),
    Burgers(BurgersTask),
    Elastic(ElasticTask),
}

impl TaskSpec {
    pub fn family(&self) -> Family {
        match self.kind {
            TaskKind::Poisson(_) => Family::Poisson,
            TaskKind::Burgers(_) => Family::Burgers,
            TaskKind::Elastic(_) => Family::Elasticity,
        }
    }

    /// Domain membership predicate for interior points.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        match &self.kind {
            TaskKind::Poisson(t) => t.shape.contains(x),
            TaskKind::Burgers(t) => {
                (0.0..=1.0).contains(&x[0]) && x[1] >= 0.0 && x[1] <= t.t_end
            }
            TaskKind::Elastic(t) => t.lattice.contains(x),
        }
    }

    pub fn sample_interior<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Vec<[f64; 2]>, TaskError> {
        match &self.kind {
            TaskKind::Poisson(t) => Ok(t.shape.sample_interior(rng, n)),
            TaskKind::Burgers(t) => Ok((0..n)
                .map(|_| [rng.gen_range(0.0..1.0), t.t_end - rng.gen_range(0.0..t.t_end)])
                .collect()),
            TaskKind::Elastic(t) => sample_porous_domain(&t.lattice, rng, n),
        }
    }

    pub fn sample_boundary<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<BoundaryPoint> {
        match &self.kind {
            TaskKind::Poisson(t) => (0..n)
                .map(|_| {
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    let r = t.shape.radius(theta);
                    BoundaryPoint {
                        x: [r * theta.cos(), r * theta.sin()],
                        tag: BoundaryTag::Plain,
                    }
                })
                .collect(),
            TaskKind::Burgers(t) => (0..n)
                .map(|_| {
                    let x = if rng.gen::<bool>() { 1.0 } else { 0.0 };
                    BoundaryPoint {
                        x: [x, t.t_end - rng.gen_range(0.0..t.t_end)],
                        tag: BoundaryTag::Plain,
                    }
                })
                .collect(),
            TaskKind::Elastic(t) => t.sample_boundary(rng, n),
        }
    }

    pub fn sample_initial<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<[f64; 2]> {
        match &self.kind {
            TaskKind::Burgers(_) => (0..n).map(|_| [rng.gen_range(0.0..1.0), 0.0]).collect(),
            _ => Vec::new(),
        }
    }

    /// Governing-operator term at an interior point, from the output jets.
    /// Squared residual for Poisson/Burgers; energy density for elasticity
    /// (with the inversion-penalty branch reported through `events`).
    pub fn interior_term<T: Real>(
        &self,
        jets: &[Jet2<T, 2>],
        x: [f64; 2],
        events: &mut LossEvents,
    ) -> T {
        match &self.kind {
            TaskKind::Poisson(t) => {
                let r = poisson_residual_jets(&jets[0], T::from_f64(t.source(x)));
                r * r
            }
            TaskKind::Burgers(t) => {
                let r = burgers_residual_jets(&jets[0], t.nu);
                r * r
            }
            TaskKind::Elastic(t) => {
                let (psi, inverted) = elastic_energy_density_jets(jets, &t.material);
                if inverted {
                    events.inversions += 1;
                }
                psi
            }
        }
    }

    /// Boundary-operator residual components at a boundary point, from the
    /// output values.
    pub fn boundary_residual<T: Real>(&self, values: &[T], bp: &BoundaryPoint) -> ArrayVec<T, 2> {
        let mut out = ArrayVec::new();
        match &self.kind {
            TaskKind::Poisson(t) => {
                out.push(values[0] - T::from_f64(t.boundary_value(bp.x)));
            }
            TaskKind::Burgers(t) => {
                out.push(values[0] - T::from_f64(t.boundary_value(bp.x)));
            }
            TaskKind::Elastic(t) => t.boundary_residual(values, bp, &mut out),
        }
        out
    }

    /// Initial-condition residual (time-dependent families only).
    pub fn initial_residual<T: Real>(&self, values: &[T], x: [f64; 2]) -> ArrayVec<T, 2> {
        let mut out = ArrayVec::new();
        if let TaskKind::Burgers(t) = &self.kind {
            out.push(values[0] - T::from_f64(t.initial_value(x[0])));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    Plain,
    Top,
    Bottom,
    CornerBl,
    CornerBr,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub x: [f64; 2],
    pub tag: BoundaryTag,
}

/// Sampled interior/boundary/initial points forming one Monte Carlo loss
/// estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationBatch {
    pub interior: Vec<[f64; 2]>,
    pub boundary: Vec<BoundaryPoint>,
    pub initial: Vec<[f64; 2]>,
}

impl CollocationBatch {
    /// Draw a batch of `total` points: `interior_frac` interior, the rest
    /// boundary (split evenly with initial-condition points when the family
    /// is time-dependent). Every bucket gets at least one point.
    pub fn sample<R: Rng>(
        task: &TaskSpec,
        rng: &mut R,
        total: usize,
        interior_frac: f64,
    ) -> Result<CollocationBatch, TaskError> {
        let n_int = ((total as f64 * interior_frac).round() as usize).max(1);
        let rest = total.saturating_sub(n_int).max(1);
        let (n_bnd, n_ic) = if task.family().time_dependent() {
            let half = (rest / 2).max(1);
            (half, rest - half)
        } else {
            (rest, 0)
        };
        Ok(CollocationBatch {
            interior: task.sample_interior(rng, n_int)?,
            boundary: task.sample_boundary(rng, n_bnd),
            initial: task.sample_initial(rng, n_ic.max(if task.family().time_dependent() { 1 } else { 0 })),
        })
    }
}

/// Events observed while assembling a loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LossEvents {
    /// Elastic element inversions (J ≤ 0) replaced by the penalty value.
    pub inversions: usize,
}

/// A differentiable field: output jets at interior points, output values at
/// boundary/initial points. Implemented by networks and by closed-form
/// reference solutions, so the same loss assembly serves both.
pub trait JetField<T: Real> {
    fn jets(&self, x: [f64; 2]) -> Vec<Jet2<T, 2>>;
    fn values(&self, x: [f64; 2]) -> Vec<T>;
}

/// A network viewed as a jet field. Coordinates enter as constants of the
/// scalar type; parameters are whatever `T` the caller recorded them as.
pub struct NetField<'a, T: Real> {
    pub cfg: &'a NetConfig,
    pub params: &'a [T],
}

impl<'a, T: Real> JetField<T> for NetField<'a, T> {
    fn jets(&self, x: [f64; 2]) -> Vec<Jet2<T, 2>> {
        let seeded: Vec<Jet2<T, 2>> = x
            .iter()
            .enumerate()
            .map(|(i, &c)| Jet2::seeded(T::from_f64(c), i))
            .collect();
        forward(self.cfg, self.params, &seeded)
    }

    fn values(&self, x: [f64; 2]) -> Vec<T> {
        let consts: Vec<Jet2<T, 0>> = x.iter().map(|&c| Jet2::constant(T::from_f64(c))).collect();
        forward(self.cfg, self.params, &consts)
            .into_iter()
            .map(|j| j.v)
            .collect()
    }
}

/// Monte Carlo collocation loss of an arbitrary jet field:
/// interior mean + boundary mean (+ initial-condition mean).
pub fn loss_of_field<T: Real, F: JetField<T>>(
    task: &TaskSpec,
    batch: &CollocationBatch,
    field: &F,
) -> (T, LossEvents) {
    assert!(!batch.interior.is_empty(), "loss: empty interior bucket");
    assert!(!batch.boundary.is_empty(), "loss: empty boundary bucket");
    if task.family().time_dependent() {
        assert!(!batch.initial.is_empty(), "loss: empty initial bucket");
    }
    let mut events = LossEvents::default();

    let interior_terms: Vec<T> = batch
        .interior
        .iter()
        .map(|&x| {
            let jets = field.jets(x);
            task.interior_term(&jets, x, &mut events)
        })
        .collect();
    let boundary_terms: Vec<T> = batch
        .boundary
        .iter()
        .map(|bp| {
            let values = field.values(bp.x);
            let comps = task.boundary_residual(&values, bp);
            let mut acc = T::zero();
            for c in comps {
                acc = acc + c * c;
            }
            acc
        })
        .collect();

    let mean = |terms: &[T]| T::sum_slice(terms) * T::from_f64(1.0 / terms.len() as f64);
    let mut loss = mean(&interior_terms) + mean(&boundary_terms);

    if !batch.initial.is_empty() {
        let ic_terms: Vec<T> = batch
            .initial
            .iter()
            .map(|&x| {
                let values = field.values(x);
                let comps = task.initial_residual(&values, x);
                let mut acc = T::zero();
                for c in comps {
                    acc = acc + c * c;
                }
                acc
            })
            .collect();
        loss = loss + mean(&ic_terms);
    }
    (loss, events)
}

/// Collocation loss of a network recorded on the tape, returned as a
/// differentiable graph node.
pub fn build_loss(
    task: &TaskSpec,
    batch: &CollocationBatch,
    cfg: &NetConfig,
    params: &[Var],
) -> Var {
    let field = NetField { cfg, params };
    loss_of_field(task, batch, &field).0
}

/// Draw one task from a family distribution.
pub fn sample_task(
    family: Family,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<TaskSpec, TaskError> {
    match family {
        Family::Poisson => Ok(sample_poisson_task(sampler, seed)),
        Family::Burgers => Ok(sample_burgers_task(sampler, seed)),
        Family::Elasticity => sample_elastic_task(sampler, seed),
    }
}
