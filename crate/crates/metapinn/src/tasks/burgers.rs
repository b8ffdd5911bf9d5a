//! 1D viscous Burgers problems on the unit pipe.
//!
//! Strong form `∂u/∂t + u ∂u/∂x − ν ∂²u/∂x² = 0` on x ∈ [0,1], t ∈ [0,T],
//! with Dirichlet boundaries ū = 0 and sinusoidal initial conditions
//! u0(x) = sin(πx) + θ1 sin(2πx) + θ2 sin(4πx), θ ~ U(−θmax, θmax).
//!
//! Network input convention: coordinate 0 is x, coordinate 1 is t.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SamplerConfig, TaskKind, TaskSpec};
use crate::ad::Jet2;
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurgersTask {
    pub ic: BurgersIc,
    pub nu: f64,
    pub t_end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BurgersIc {
    /// sin(πx) + θ1 sin(2πx) + θ2 sin(4πx), boundary value 0.
    SineMix { theta1: f64, theta2: f64 },
    /// Traveling viscous shock u = c − a·tanh(a (x − c t − x0) / (2ν)),
    /// an exact solution used by verification; boundary values follow the
    /// profile.
    Traveling { a: f64, c: f64, x0: f64 },
}

impl BurgersTask {
    pub fn initial_value(&self, x: f64) -> f64 {
        match self.ic {
            BurgersIc::SineMix { theta1, theta2 } => {
                let pi = std::f64::consts::PI;
                (pi * x).sin() + theta1 * (2.0 * pi * x).sin() + theta2 * (4.0 * pi * x).sin()
            }
            BurgersIc::Traveling { .. } => self.exact_value(x, 0.0),
        }
    }

    pub fn boundary_value(&self, x: [f64; 2]) -> f64 {
        match self.ic {
            BurgersIc::SineMix { .. } => 0.0,
            BurgersIc::Traveling { .. } => self.exact_value(x[0], x[1]),
        }
    }

    /// Closed-form value for the traveling-shock variant.
    pub fn exact_value(&self, x: f64, t: f64) -> f64 {
        match self.ic {
            BurgersIc::Traveling { a, c, x0 } => {
                c - a * ((a * (x - c * t - x0)) / (2.0 * self.nu)).tanh()
            }
            BurgersIc::SineMix { .. } => panic!("no closed form for sine-mix tasks"),
        }
    }

    /// Exact jets of the traveling-shock solution (directions: x, t).
    pub fn exact_jet(&self, x: f64, t: f64) -> Jet2<f64, 2> {
        match self.ic {
            BurgersIc::Traveling { a, c, x0 } => {
                let xs = Jet2::<f64, 2>::seeded(x, 0);
                let ts = Jet2::<f64, 2>::seeded(t, 1);
                let arg = (xs - ts.scale(c) - Jet2::constant(x0)).scale(a / (2.0 * self.nu));
                Jet2::constant(c) - arg.tanh().scale(a)
            }
            BurgersIc::SineMix { .. } => panic!("no closed form for sine-mix tasks"),
        }
    }
}

/// Governing residual from the solution jet (direction 0 = x, 1 = t):
/// u_t + u·u_x − ν·u_xx.
pub fn burgers_residual_jets<T: Real>(u: &Jet2<T, 2>, nu: f64) -> T {
    u.d[1] + u.v * u.d[0] - T::from_f64(nu) * u.dd[0]
}

/// The traveling-shock task viewed as an exact field, so the loss assembly
/// can be evaluated at the analytic solution.
impl crate::tasks::JetField<f64> for BurgersTask {
    fn jets(&self, x: [f64; 2]) -> Vec<Jet2<f64, 2>> {
        vec![self.exact_jet(x[0], x[1])]
    }
    fn values(&self, x: [f64; 2]) -> Vec<f64> {
        vec![self.exact_value(x[0], x[1])]
    }
}

/// Draw a task: θ1, θ2 ~ U(−θmax, θmax), fixed ν and horizon.
pub fn sample_burgers_task(cfg: &SamplerConfig, seed: u64) -> TaskSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6275_7267_6572_7300);
    TaskSpec {
        seed,
        kind: TaskKind::Burgers(BurgersTask {
            ic: BurgersIc::SineMix {
                theta1: rng.gen_range(-cfg.theta_max..cfg.theta_max),
                theta2: rng.gen_range(-cfg.theta_max..cfg.theta_max),
            },
            nu: cfg.nu,
            t_end: cfg.t_end,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_zero_residual() {
        let u = Jet2::<f64, 2>::constant(0.0);
        assert_eq!(burgers_residual_jets(&u, 0.01), 0.0);
    }

    #[test]
    fn linear_in_x_gives_advection_residual() {
        // u(x,t) = x: u_t = 0, u_x = 1, u_xx = 0 → residual = x.
        let u = Jet2::<f64, 2>::seeded(0.5, 0);
        let r = burgers_residual_jets(&u, 0.01);
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn traveling_shock_residual_vanishes() {
        let task = BurgersTask {
            ic: BurgersIc::Traveling {
                a: 0.6,
                c: 0.75,
                x0: 0.3,
            },
            nu: 0.01,
            t_end: 1.0,
        };
        for (x, t) in [(0.31, 0.02), (0.35, 0.05), (0.5, 0.2), (0.29, 0.01)] {
            let jet = task.exact_jet(x, t);
            let r = burgers_residual_jets(&jet, task.nu);
            assert!(r.abs() <= 1e-8, "residual {r} at ({x},{t})");
        }
    }

    #[test]
    fn interior_points_in_pipe() {
        let cfg = SamplerConfig::default();
        let task = sample_burgers_task(&cfg, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = task.sample_interior(&mut rng, 2000).unwrap();
        for p in &pts {
            assert!((0.0..=1.0).contains(&p[0]));
            assert!(p[1] > 0.0 && p[1] <= 1.0);
        }
        let bps = task.sample_boundary(&mut rng, 200);
        assert!(bps.iter().all(|b| b.x[0] == 0.0 || b.x[0] == 1.0));
        let ics = task.sample_initial(&mut rng, 200);
        assert!(ics.iter().all(|p| p[1] == 0.0));
    }
}
