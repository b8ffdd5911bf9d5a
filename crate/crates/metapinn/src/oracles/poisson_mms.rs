//! Manufactured solutions for the nonlinear Poisson problem.
//!
//! A closed form u* is chosen, and the source it induces under
//! `∇·((1 + 0.1 u²)∇u)` plus the boundary trace u*|∂Ω are attached to a task;
//! u* is then the exact solution of that task. The induced source expands by
//! the product rule to `(1 + 0.1 u²)Δu + 0.2 u ‖∇u‖²`, evaluated here from
//! exact forward-mode jets of the closed form.

use serde::{Deserialize, Serialize};

use crate::ad::{seed_jets, Jet2};
use crate::siren::{NetConfig, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ManufacturedPoisson {
    /// u* = x1² + x2²
    Quadratic,
    /// u* = amp · sin(ω0 (w1 x1 + w2 x2)) — representable exactly by a
    /// one-unit sine layer with a linear head, which lets tests evaluate the
    /// whole loss pipeline at the exact minimizer.
    SineRidge { w: [f64; 2], amp: f64, omega0: f64 },
    /// u* = amp · sin(k1 x1 + p1) · sin(k2 x2 + p2)
    TrigProduct { k: [f64; 2], phase: [f64; 2], amp: f64 },
}

impl ManufacturedPoisson {
    /// Value, gradient, and pure second derivatives of u* at `x`, exact to
    /// floating point.
    pub fn jet(&self, x: [f64; 2]) -> Jet2<f64, 2> {
        let xs: Vec<Jet2<f64, 2>> = seed_jets(&x);
        match *self {
            ManufacturedPoisson::Quadratic => xs[0] * xs[0] + xs[1] * xs[1],
            ManufacturedPoisson::SineRidge { w, amp, omega0 } => (xs[0].scale(w[0])
                + xs[1].scale(w[1]))
            .scale(omega0)
            .sin()
            .scale(amp),
            ManufacturedPoisson::TrigProduct { k, phase, amp } => {
                let a = (xs[0].scale(k[0]) + Jet2::constant(phase[0])).sin();
                let b = (xs[1].scale(k[1]) + Jet2::constant(phase[1])).sin();
                (a * b).scale(amp)
            }
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.jet(x).v
    }

    /// Induced source f* = (1 + 0.1 u²)Δu + 0.2 u ‖∇u‖².
    pub fn source(&self, x: [f64; 2]) -> f64 {
        let u = self.jet(x);
        let lap = u.dd[0] + u.dd[1];
        let gsq = u.d[0] * u.d[0] + u.d[1] * u.d[1];
        (1.0 + 0.1 * u.v * u.v) * lap + 0.2 * u.v * gsq
    }

    /// Induced Dirichlet data b* = u*|∂Ω.
    pub fn boundary(&self, x: [f64; 2]) -> f64 {
        self.value(x)
    }

    /// For `SineRidge`, the parameters of the smallest network that
    /// represents u* exactly: one sine unit and a linear head.
    pub fn exact_net(&self) -> Option<(NetConfig, ParamVector)> {
        match *self {
            ManufacturedPoisson::SineRidge { w, amp, omega0 } => {
                let cfg = NetConfig {
                    input_dim: 2,
                    output_dim: 1,
                    hidden_layers: 1,
                    layer_width: 1,
                    omega0,
                };
                // layer 0: W = [w1 w2], b = 0; head: W = [amp], b = 0.
                let params = ParamVector(vec![w[0], w[1], 0.0, amp, 0.0]);
                Some((cfg, params))
            }
            _ => None,
        }
    }
}

impl crate::tasks::JetField<f64> for ManufacturedPoisson {
    fn jets(&self, x: [f64; 2]) -> Vec<Jet2<f64, 2>> {
        vec![self.jet(x)]
    }
    fn values(&self, x: [f64; 2]) -> Vec<f64> {
        vec![self.value(x)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_jet_is_exact() {
        let m = ManufacturedPoisson::Quadratic;
        let j = m.jet([0.3, 0.4]);
        assert_eq!(j.v, 0.25);
        assert_eq!(j.d, [0.6, 0.8]);
        assert_eq!(j.dd, [2.0, 2.0]);
    }

    #[test]
    fn sine_ridge_matches_its_exact_net() {
        let m = ManufacturedPoisson::SineRidge {
            w: [0.4, 0.3],
            amp: 1.0,
            omega0: 3.0,
        };
        let (cfg, p) = m.exact_net().unwrap();
        for pt in [[0.1, 0.2], [-0.5, 0.9], [0.7, -0.7]] {
            let net = crate::siren::forward_values(&cfg, &p.0, &pt)[0];
            assert!((net - m.value(pt)).abs() < 1e-15);
        }
    }
}
