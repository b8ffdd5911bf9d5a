//! Closed-form affine reference for hyperelastic Dirichlet problems.
//!
//! On a solid domain with affine Dirichlet data u = (F̄ − I)X on the whole
//! boundary, the stored energy is quasiconvex, so the affine map itself
//! minimizes the total energy: u(X) = (F̄ − I)X with Π = ψ(F̄) · area.

use serde::{Deserialize, Serialize};

use crate::tasks::Material;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineElastic {
    pub stretch: [f64; 2],
    pub material: Material,
    pub area: f64,
}

impl AffineElastic {
    pub fn displacement(&self, x: [f64; 2]) -> [f64; 2] {
        [
            (self.stretch[0] - 1.0) * x[0],
            (self.stretch[1] - 1.0) * x[1],
        ]
    }

    /// ψ(F̄) for F̄ = diag(λ1, λ2): J = λ1λ2, I_c = λ1² + λ2².
    pub fn energy_density(&self) -> f64 {
        let j = self.stretch[0] * self.stretch[1];
        let ic = self.stretch[0] * self.stretch[0] + self.stretch[1] * self.stretch[1];
        let (lambda, mu) = (self.material.lambda, self.material.mu);
        0.5 * lambda * j.ln().powi(2) - mu * j.ln() + 0.5 * mu * (ic - 2.0)
    }

    pub fn total_energy(&self) -> f64 {
        self.energy_density() * self.area
    }
}

impl crate::tasks::JetField<f64> for AffineElastic {
    fn jets(&self, x: [f64; 2]) -> Vec<crate::ad::Jet2<f64, 2>> {
        use crate::ad::Jet2;
        let u = self.displacement(x);
        let mut j1 = Jet2::constant(u[0]);
        let mut j2 = Jet2::constant(u[1]);
        j1.d[0] = self.stretch[0] - 1.0;
        j2.d[1] = self.stretch[1] - 1.0;
        vec![j1, j2]
    }
    fn values(&self, x: [f64; 2]) -> Vec<f64> {
        self.displacement(x).to_vec()
    }
}

/// Build the reference for a diagonal stretch on the unit square.
/// Rejected when the deformation is orientation-destroying (λ1·λ2 ≤ 0).
pub fn affine_elastic_reference(
    stretch: [f64; 2],
    material: Material,
) -> Result<AffineElastic, String> {
    if stretch[0] * stretch[1] <= 0.0 {
        return Err(format!(
            "affine reference requires λ1·λ2 > 0, got {} · {}",
            stretch[0], stretch[1]
        ));
    }
    Ok(AffineElastic {
        stretch,
        material,
        area: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::Jet2;
    use crate::tasks::elastic_energy_density_jets;

    const MAT: Material = Material {
        lambda: 1.5,
        mu: 1.0,
    };

    #[test]
    fn identity_stretch_gives_zero() {
        let r = affine_elastic_reference([1.0, 1.0], MAT).unwrap();
        assert_eq!(r.total_energy(), 0.0);
        assert_eq!(r.displacement([0.4, 0.9]), [0.0, 0.0]);
    }

    #[test]
    fn compression_energy_closed_form() {
        // λ1 = 0.9, λ2 = 1, unit area:
        // Π = 0.75 (ln 0.9)² − ln 0.9 + 0.5 (0.81 + 1 − 2)
        let r = affine_elastic_reference([0.9, 1.0], MAT).unwrap();
        let expected = 0.75 * 0.9f64.ln().powi(2) - 0.9f64.ln() + 0.5 * (0.81f64 + 1.0 - 2.0);
        assert!((r.total_energy() - expected).abs() < 1e-15);
    }

    #[test]
    fn doubling_area_doubles_energy() {
        let mut r = affine_elastic_reference([0.9, 1.1], MAT).unwrap();
        let single = r.total_energy();
        r.area = 2.0;
        assert!((r.total_energy() - 2.0 * single).abs() < 1e-15);
    }

    #[test]
    fn orientation_destroying_stretch_rejected() {
        assert!(affine_elastic_reference([-0.5, 1.0], MAT).is_err());
    }

    #[test]
    fn energy_density_agrees_with_task_operator() {
        // constant-gradient displacement jets reproduce ψ(F̄) exactly, so the
        // closed form equals quadrature of a constant integrand.
        let r = affine_elastic_reference([0.9, 1.0], MAT).unwrap();
        let mut u1 = Jet2::<f64, 2>::constant(0.0);
        let mut u2 = Jet2::<f64, 2>::constant(0.0);
        u1.d[0] = r.stretch[0] - 1.0;
        u2.d[1] = r.stretch[1] - 1.0;
        let (psi, inv) = elastic_energy_density_jets(&[u1, u2], &MAT);
        assert!(!inv);
        assert!((psi - r.energy_density()).abs() <= 1e-10);
    }
}
