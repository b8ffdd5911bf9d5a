//! Nonlinear Poisson problems on star-shaped domains.
//!
//! Governing equation `∇·((1 + 0.1 u²)∇u) = f` with Dirichlet data `u = b` on
//! the boundary. The domain is disc-like, r(θ) = r0·[1 + c1 cos4θ + c2 cos8θ]
//! with r0 = 1. The source is a sum of radial bumps Σ βᵢ exp(−‖x−μᵢ‖²) and
//! the boundary data a low-order Fourier series
//! b(θ) = b0 + b1 cosθ + b2 sinθ + b3 cos2θ + b4 sin2θ.
//!
//! Manufactured variants replace (f, b) with the source and trace induced by
//! a closed form, making that closed form the exact solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{SamplerConfig, TaskKind, TaskSpec};
use crate::ad::Jet2;
use crate::num::Real;
use crate::oracles::ManufacturedPoisson;

/// Disc-like region r(θ) = r0·[1 + c1 cos(4θ) + c2 cos(8θ)].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarShape {
    pub r0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl StarShape {
    pub fn radius(&self, theta: f64) -> f64 {
        self.r0 * (1.0 + self.c1 * (4.0 * theta).cos() + self.c2 * (8.0 * theta).cos())
    }

    /// Radius of the bounding disc used for rejection sampling.
    pub fn r_bound(&self) -> f64 {
        self.r0 * (1.0 + self.c1.abs() + self.c2.abs())
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        r <= self.radius(x[1].atan2(x[0]))
    }

    /// Uniform interior points by rejection from the bounding disc.
    pub fn sample_interior<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<[f64; 2]> {
        let rb = self.r_bound();
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let x = [rng.gen_range(-rb..rb), rng.gen_range(-rb..rb)];
            if self.contains(x) {
                pts.push(x);
            }
        }
        pts
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonTask {
    pub shape: StarShape,
    pub data: PoissonData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PoissonData {
    /// Radial-bump source terms (β, μ) and Fourier boundary coefficients.
    Rbf {
        sources: Vec<(f64, [f64; 2])>,
        b: [f64; 5],
    },
    /// Source and boundary data induced by a closed-form exact solution.
    Manufactured(ManufacturedPoisson),
}

impl PoissonTask {
    pub fn source(&self, x: [f64; 2]) -> f64 {
        match &self.data {
            PoissonData::Rbf { sources, .. } => sources
                .iter()
                .map(|&(beta, mu)| {
                    let dx = x[0] - mu[0];
                    let dy = x[1] - mu[1];
                    beta * (-(dx * dx + dy * dy)).exp()
                })
                .sum(),
            PoissonData::Manufactured(m) => m.source(x),
        }
    }

    pub fn boundary_value(&self, x: [f64; 2]) -> f64 {
        match &self.data {
            PoissonData::Rbf { b, .. } => {
                let theta = x[1].atan2(x[0]);
                b[0]
                    + b[1] * theta.cos()
                    + b[2] * theta.sin()
                    + b[3] * (2.0 * theta).cos()
                    + b[4] * (2.0 * theta).sin()
            }
            PoissonData::Manufactured(m) => m.boundary(x),
        }
    }

    /// A unit-disc task whose exact solution is the given closed form.
    pub fn manufactured(m: ManufacturedPoisson) -> TaskSpec {
        TaskSpec {
            seed: 0,
            kind: TaskKind::Poisson(PoissonTask {
                shape: StarShape {
                    r0: 1.0,
                    c1: 0.0,
                    c2: 0.0,
                },
                data: PoissonData::Manufactured(m),
            }),
        }
    }
}

/// Expanded governing residual from the solution jet:
/// (1 + 0.1 u²)Δu + 0.2 u ‖∇u‖² − f.
pub fn poisson_residual_jets<T: Real>(u: &Jet2<T, 2>, f: T) -> T {
    let lap = u.dd[0] + u.dd[1];
    let gsq = u.d[0] * u.d[0] + u.d[1] * u.d[1];
    (T::one() + T::from_f64(0.1) * u.v * u.v) * lap + T::from_f64(0.2) * u.v * gsq - f
}

/// Draw a task: c1, c2 ~ U(−c_max, c_max); βᵢ, μᵢ standard normal;
/// b0 ~ U(−b0_max, b0_max), higher harmonics U(−1, 1) when enabled.
pub fn sample_poisson_task(cfg: &SamplerConfig, seed: u64) -> TaskSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x706f_6973_736f_6e00);
    let (c1, c2) = if cfg.c_max > 0.0 {
        (
            rng.gen_range(-cfg.c_max..cfg.c_max),
            rng.gen_range(-cfg.c_max..cfg.c_max),
        )
    } else {
        (0.0, 0.0)
    };
    let sources = if cfg.fixed_source {
        vec![(1.0, [0.0, 0.0])]
    } else {
        (0..cfg.n_sources)
            .map(|_| {
                let beta: f64 = rng.sample(StandardNormal);
                let mu = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
                (beta, mu)
            })
            .collect()
    };
    let mut b = [0.0; 5];
    b[0] = rng.gen_range(-cfg.b0_max..cfg.b0_max);
    if cfg.b_harmonics > 0 {
        for slot in b.iter_mut().skip(1) {
            *slot = rng.gen_range(-1.0..1.0);
        }
    }
    TaskSpec {
        seed,
        kind: TaskKind::Poisson(PoissonTask {
            shape: StarShape { r0: 1.0, c1, c2 },
            data: PoissonData::Rbf { sources, b },
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{BoundaryTag, LossEvents};

    #[test]
    fn circle_boundary_point_at_theta_zero() {
        let cfg = SamplerConfig {
            c_max: 0.0,
            ..SamplerConfig::default()
        };
        let task = sample_poisson_task(&cfg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bps = task.sample_boundary(&mut rng, 64);
        for bp in &bps {
            let r = (bp.x[0] * bp.x[0] + bp.x[1] * bp.x[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
            assert_eq!(bp.tag, BoundaryTag::Plain);
        }
        // θ = 0 maps to (r0, 0) = (1, 0)
        let shape = StarShape {
            r0: 1.0,
            c1: 0.0,
            c2: 0.0,
        };
        assert_eq!(shape.radius(0.0), 1.0);
    }

    #[test]
    fn star_radius_at_theta_zero() {
        let shape = StarShape {
            r0: 1.0,
            c1: 0.2,
            c2: 0.0,
        };
        assert!((shape.radius(0.0) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn interior_samples_satisfy_membership() {
        let cfg = SamplerConfig::default();
        let task = sample_poisson_task(&cfg, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = task.sample_interior(&mut rng, 10_000).unwrap();
        assert!(pts.iter().all(|&p| task.contains(p)));
    }

    #[test]
    fn zero_network_zero_source_zero_residual() {
        let u = Jet2::<f64, 2>::constant(0.0);
        assert_eq!(poisson_residual_jets(&u, 0.0), 0.0);
        // constant u: all derivatives vanish, residual still 0
        let c = Jet2::<f64, 2>::constant(4.2);
        assert_eq!(poisson_residual_jets(&c, 0.0), 0.0);
    }

    #[test]
    fn manufactured_solution_residual_vanishes() {
        // quadratic u* with its induced source, evaluated at (0.3, 0.4)
        let m = ManufacturedPoisson::Quadratic;
        let x = [0.3, 0.4];
        let r = poisson_residual_jets(&m.jet(x), m.source(x));
        assert!(r.abs() <= 1e-10, "residual {r}");
        // and at random points
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let r = poisson_residual_jets(&m.jet(x), m.source(x));
            assert!(r.abs() <= 1e-10, "residual {r} at {x:?}");
        }
    }

    #[test]
    fn interior_term_is_squared_residual() {
        let cfg = SamplerConfig::default();
        let task = sample_poisson_task(&cfg, 5);
        let mut ev = LossEvents::default();
        let u = Jet2::<f64, 2>::constant(0.0);
        let x = [0.1, 0.2];
        let term = task.interior_term(&[u], x, &mut ev);
        let f = match &task.kind {
            TaskKind::Poisson(t) => t.source(x),
            _ => unreachable!(),
        };
        assert!((term - f * f).abs() < 1e-15);
    }
}
