//! Planar neo-Hookean hyperelasticity on porous cells.
//!
//! The displacement u maps reference positions X to deformed positions
//! x = X + u. With deformation gradient F = I + ∂u/∂X, J = det F and
//! I_c = tr(FᵀF), the stored energy density is
//!
//! ψ = ½λ (ln J)² − μ ln J + ½μ (I_c − 2),
//!
//! and the solution minimizes ∫ψ plus squared Dirichlet mismatch. The
//! reference domain is the unit square with a 2×2 lattice of star-shaped
//! pores (center spacing L0 = 0.5); pore size follows from the prescribed
//! porosity φ0 via r0 = L0·√(2φ0)/√(π(2 + c1² + c2²)).
//!
//! Boundary conditions: uniaxial compression (u2 = −δ on the top edge,
//! u2 = 0 on the bottom, u1 = 0 at the bottom corners to pin rigid modes,
//! traction-free elsewhere) or affine Dirichlet data on the whole boundary
//! for the closed-form verification case.

use arrayvec::ArrayVec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BoundaryPoint, BoundaryTag, SamplerConfig, TaskError, TaskKind, TaskSpec};
use crate::ad::Jet2;
use crate::num::Real;

/// Energy assigned when an element inverts (J ≤ 0), in place of the
/// undefined logarithm. Constant, so it contributes no gradient.
pub const INVERSION_PENALTY: f64 = 1.0e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
}

/// 2×2 pore lattice on the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoreLattice {
    pub phi0: f64,
    pub c1: f64,
    pub c2: f64,
    pub l0: f64,
}

impl PoreLattice {
    /// Base pore radius from the porosity: r0 = L0·√(2φ0)/√(π(2+c1²+c2²)).
    pub fn r0(&self) -> f64 {
        self.l0 * (2.0 * self.phi0).sqrt()
            / (std::f64::consts::PI * (2.0 + self.c1 * self.c1 + self.c2 * self.c2)).sqrt()
    }

    pub fn pore_radius(&self, theta: f64) -> f64 {
        self.r0() * (1.0 + self.c1 * (4.0 * theta).cos() + self.c2 * (8.0 * theta).cos())
    }

    pub fn max_radius(&self) -> f64 {
        self.r0() * (1.0 + self.c1.abs() + self.c2.abs())
    }

    pub fn centers(&self) -> [[f64; 2]; 4] {
        let h = self.l0 / 2.0;
        [
            [h, h],
            [h, self.l0 + h],
            [self.l0 + h, h],
            [self.l0 + h, self.l0 + h],
        ]
    }

    pub fn in_any_pore(&self, x: [f64; 2]) -> bool {
        if self.phi0 <= 0.0 {
            return false;
        }
        self.centers().iter().any(|c| {
            let dx = x[0] - c[0];
            let dy = x[1] - c[1];
            let r = (dx * dx + dy * dy).sqrt();
            r < self.pore_radius(dy.atan2(dx))
        })
    }

    /// Solid-material membership: inside the unit square, outside every pore.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        (0.0..=1.0).contains(&x[0]) && (0.0..=1.0).contains(&x[1]) && !self.in_any_pore(x)
    }

    /// Pores must stay strictly inside their cells.
    pub fn check_layout(&self) -> Result<(), TaskError> {
        let max_r = self.max_radius();
        let half_cell = self.l0 / 2.0;
        if max_r >= half_cell {
            return Err(TaskError::PoreOverlap { max_r, half_cell });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ElasticBc {
    /// u2 = −δ on top, u2 = 0 on bottom, u1 = 0 at the bottom corners.
    UniaxialCompression { delta: f64 },
    /// u = (F̄ − I)X on the whole boundary, F̄ = diag(stretch).
    AffineDirichlet { stretch: [f64; 2] },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticTask {
    pub lattice: PoreLattice,
    pub material: Material,
    pub bc: ElasticBc,
}

impl ElasticTask {
    /// Solid unit square (no pores) with affine Dirichlet data; its exact
    /// minimizer is the affine map.
    pub fn affine(stretch: [f64; 2], material: Material) -> TaskSpec {
        TaskSpec {
            seed: 0,
            kind: TaskKind::Elastic(ElasticTask {
                lattice: PoreLattice {
                    phi0: 0.0,
                    c1: 0.0,
                    c2: 0.0,
                    l0: 0.5,
                },
                material,
                bc: ElasticBc::AffineDirichlet { stretch },
            }),
        }
    }

    pub fn sample_boundary<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<BoundaryPoint> {
        match self.bc {
            ElasticBc::UniaxialCompression { .. } => {
                // Half top, half bottom, plus the two pinned corners.
                let mut pts = Vec::with_capacity(n + 2);
                let n_top = (n / 2).max(1);
                for _ in 0..n_top {
                    pts.push(BoundaryPoint {
                        x: [rng.gen_range(0.0..1.0), 1.0],
                        tag: BoundaryTag::Top,
                    });
                }
                for _ in 0..(n - n_top).max(1) {
                    pts.push(BoundaryPoint {
                        x: [rng.gen_range(0.0..1.0), 0.0],
                        tag: BoundaryTag::Bottom,
                    });
                }
                pts.push(BoundaryPoint {
                    x: [0.0, 0.0],
                    tag: BoundaryTag::CornerBl,
                });
                pts.push(BoundaryPoint {
                    x: [1.0, 0.0],
                    tag: BoundaryTag::CornerBr,
                });
                pts
            }
            ElasticBc::AffineDirichlet { .. } => (0..n)
                .map(|_| {
                    let s: f64 = rng.gen_range(0.0..4.0);
                    let (edge, frac) = (s as usize, s.fract());
                    let x = match edge {
                        0 => [frac, 0.0],
                        1 => [1.0, frac],
                        2 => [frac, 1.0],
                        _ => [0.0, frac],
                    };
                    BoundaryPoint {
                        x,
                        tag: BoundaryTag::Plain,
                    }
                })
                .collect(),
        }
    }

    /// Dirichlet mismatch components at a boundary point.
    pub fn boundary_residual<T: Real>(
        &self,
        values: &[T],
        bp: &BoundaryPoint,
        out: &mut ArrayVec<T, 2>,
    ) {
        match self.bc {
            ElasticBc::UniaxialCompression { delta } => match bp.tag {
                BoundaryTag::Top => out.push(values[1] + T::from_f64(delta)),
                BoundaryTag::Bottom => out.push(values[1]),
                BoundaryTag::CornerBl | BoundaryTag::CornerBr => {
                    out.push(values[1]);
                    out.push(values[0]);
                }
                BoundaryTag::Plain => {}
            },
            ElasticBc::AffineDirichlet { stretch } => {
                out.push(values[0] - T::from_f64((stretch[0] - 1.0) * bp.x[0]));
                out.push(values[1] - T::from_f64((stretch[1] - 1.0) * bp.x[1]));
            }
        }
    }
}

/// Neo-Hookean energy density from the displacement jets (first spatial
/// derivatives only). Returns `(ψ, inverted)`; an inverted element (J ≤ 0)
/// yields the constant penalty instead of a NaN from the logarithm.
pub fn elastic_energy_density_jets<T: Real>(u: &[Jet2<T, 2>], mat: &Material) -> (T, bool) {
    let f11 = T::one() + u[0].d[0];
    let f12 = u[0].d[1];
    let f21 = u[1].d[0];
    let f22 = T::one() + u[1].d[1];
    let j = f11 * f22 - f12 * f21;
    if j.val() <= 0.0 {
        return (T::from_f64(INVERSION_PENALTY), true);
    }
    let ic = f11 * f11 + f12 * f12 + f21 * f21 + f22 * f22;
    let lnj = j.ln();
    let psi = T::from_f64(0.5 * mat.lambda) * lnj * lnj - T::from_f64(mat.mu) * lnj
        + T::from_f64(0.5 * mat.mu) * (ic - T::from_f64(2.0));
    (psi, false)
}

/// Rejection sampler for the solid phase: uniform in the unit square, reject
/// points inside any pore. Errors if the pore layout is invalid or the
/// acceptance rate collapses.
pub fn sample_porous_domain<R: Rng>(
    lattice: &PoreLattice,
    rng: &mut R,
    n: usize,
) -> Result<Vec<[f64; 2]>, TaskError> {
    lattice.check_layout()?;
    let mut pts = Vec::with_capacity(n);
    let mut attempts = 0usize;
    let max_attempts = 100 * n.max(64);
    while pts.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(TaskError::SamplingStalled { attempts });
        }
        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        if !lattice.in_any_pore(x) {
            pts.push(x);
        }
    }
    Ok(pts)
}

/// Draw a task: φ0 ~ U(φmin, φmax), pore shape c1,c2 ~ U(−cmax, cmax),
/// fixed L0, material constants, and compression magnitude.
pub fn sample_elastic_task(cfg: &SamplerConfig, seed: u64) -> Result<TaskSpec, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x656c_6173_7469_6300);
    let phi0 = rng.gen_range(cfg.phi0_min..cfg.phi0_max.max(cfg.phi0_min + 1e-12));
    let (c1, c2) = if cfg.pore_c_max > 0.0 {
        (
            rng.gen_range(-cfg.pore_c_max..cfg.pore_c_max),
            rng.gen_range(-cfg.pore_c_max..cfg.pore_c_max),
        )
    } else {
        (0.0, 0.0)
    };
    let lattice = PoreLattice {
        phi0,
        c1,
        c2,
        l0: cfg.l0,
    };
    lattice.check_layout()?;
    Ok(TaskSpec {
        seed,
        kind: TaskKind::Elastic(ElasticTask {
            lattice,
            material: Material {
                lambda: cfg.lambda,
                mu: cfg.mu,
            },
            bc: ElasticBc::UniaxialCompression { delta: cfg.delta },
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAT: Material = Material {
        lambda: 1.5,
        mu: 1.0,
    };

    fn const_jets(u1: f64, u2: f64) -> Vec<Jet2<f64, 2>> {
        vec![Jet2::constant(u1), Jet2::constant(u2)]
    }

    #[test]
    fn undeformed_state_has_zero_energy() {
        let (psi, inv) = elastic_energy_density_jets(&const_jets(0.0, 0.0), &MAT);
        assert_eq!(psi, 0.0);
        assert!(!inv);
    }

    #[test]
    fn uniform_stretch_energy_matches_closed_form() {
        // u = (0.1·X1, 0): F = diag(1.1, 1), J = 1.1, I_c = 2.21,
        // ψ = 0.75 (ln 1.1)² − ln 1.1 + 0.5·0.21.
        let mut u1 = Jet2::<f64, 2>::constant(0.0);
        u1.d[0] = 0.1;
        let u = vec![u1, Jet2::constant(0.0)];
        let (psi, inv) = elastic_energy_density_jets(&u, &MAT);
        assert!(!inv);
        let expected = 0.75 * 1.1f64.ln().powi(2) - 1.1f64.ln() + 0.5 * 0.21;
        assert!((psi - expected).abs() < 1e-14, "{psi} vs {expected}");
    }

    #[test]
    fn degenerate_deformation_triggers_penalty() {
        // u = (−X1, 0): F = diag(0, 1), J = 0.
        let mut u1 = Jet2::<f64, 2>::constant(0.0);
        u1.d[0] = -1.0;
        let u = vec![u1, Jet2::constant(0.0)];
        let (psi, inv) = elastic_energy_density_jets(&u, &MAT);
        assert!(inv);
        assert_eq!(psi, INVERSION_PENALTY);
    }

    #[test]
    fn energy_zero_iff_identity() {
        // random small perturbations of F = I have strictly positive energy
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let mut u1 = Jet2::<f64, 2>::constant(0.0);
            let mut u2 = Jet2::<f64, 2>::constant(0.0);
            u1.d[0] = rng.gen_range(-0.1..0.1);
            u1.d[1] = rng.gen_range(-0.1..0.1);
            u2.d[0] = rng.gen_range(-0.1..0.1);
            u2.d[1] = rng.gen_range(-0.1..0.1);
            let any = [u1.d[0], u1.d[1], u2.d[0], u2.d[1]]
                .iter()
                .any(|g| g.abs() > 1e-9);
            let (psi, inv) = elastic_energy_density_jets(&[u1, u2], &MAT);
            if any && !inv {
                assert!(psi > 0.0, "psi = {psi}");
            }
        }
    }

    #[test]
    fn porosity_zero_accepts_everything() {
        let lattice = PoreLattice {
            phi0: 0.0,
            c1: 0.0,
            c2: 0.0,
            l0: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = sample_porous_domain(&lattice, &mut rng, 1000).unwrap();
        assert_eq!(pts.len(), 1000);
        assert!(pts.iter().all(|&p| lattice.contains(p)));
    }

    #[test]
    fn acceptance_rate_equals_solid_fraction() {
        // φ0 = 0.5, circular pores: measured acceptance ≈ 0.5 ± 0.02.
        let lattice = PoreLattice {
            phi0: 0.5,
            c1: 0.0,
            c2: 0.0,
            l0: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut accepted = 0usize;
        for _ in 0..n {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            if !lattice.in_any_pore(x) {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / n as f64;
        assert!((rate - 0.5).abs() <= 0.02, "acceptance {rate}");
    }

    #[test]
    fn accepted_points_outside_every_pore() {
        let lattice = PoreLattice {
            phi0: 0.6,
            c1: 0.0,
            c2: 0.0,
            l0: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = sample_porous_domain(&lattice, &mut rng, 5000).unwrap();
        let r = lattice.pore_radius(0.0);
        for p in &pts {
            for c in lattice.centers() {
                let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
                assert!(d >= r - 1e-12);
            }
        }
    }

    #[test]
    fn flower_pores_at_high_porosity_rejected() {
        // §-style shape study ranges can push lobes past the cell boundary.
        let lattice = PoreLattice {
            phi0: 0.5,
            c1: 0.4,
            c2: 0.4,
            l0: 0.5,
        };
        assert!(matches!(
            lattice.check_layout(),
            Err(TaskError::PoreOverlap { .. })
        ));
    }

    #[test]
    fn porosity_formula_consistent_with_pore_area() {
        // area of one star pore = ½∫r(θ)²dθ = πr0²(2+c1²+c2²)/2 = L0²·φ0.
        let lattice = PoreLattice {
            phi0: 0.37,
            c1: 0.1,
            c2: -0.05,
            l0: 0.5,
        };
        let n = 200_000;
        let mut area = 0.0;
        for i in 0..n {
            let theta = std::f64::consts::TAU * (i as f64 + 0.5) / n as f64;
            let r = lattice.pore_radius(theta);
            area += 0.5 * r * r * std::f64::consts::TAU / n as f64;
        }
        let expected = lattice.l0 * lattice.l0 * lattice.phi0;
        assert!((area - expected).abs() < 1e-6, "{area} vs {expected}");
    }
}
