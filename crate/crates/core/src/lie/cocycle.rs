use nalgebra::DMatrix;
use serde::Serialize;

use crate::actions::ActionSpec;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, RANK_TOL};
use crate::poisson::PoissonTensor;

/// `Σ_{ij} = ω(m)((e_i)_M(m), (e_j)_M(m))` together with `ker Σ^♭`.
#[derive(Clone, Debug, Serialize)]
pub struct SigmaReport {
    pub point: Vec<f64>,
    #[serde(serialize_with = "serialize_matrix")]
    pub sigma: DMatrix<f64>,
    /// Orthonormal basis of `ker Σ^♭` in the algebra.
    pub kernel: Vec<Vec<f64>>,
    pub rank: usize,
    /// Largest `|Σ_{ij}|`; zero exactly when the orbit is isotropic.
    pub max_entry: f64,
}

impl SigmaReport {
    pub fn is_isotropic(&self, tol: f64) -> bool {
        self.max_entry <= tol
    }

    /// `Σ^♭(ξ) = Σ(ξ, ·)`.
    pub fn flat(&self, xi: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.sigma.transpose(), xi)
    }
}

pub(crate) fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    serde::Serialize::serialize(&rows, s)
}

fn assemble(action: &ActionSpec, w: &DMatrix<f64>, m: &[f64]) -> SigmaReport {
    let g = action.generator_matrix(m);
    let mut sigma = g.transpose() * w * &g;
    // exact antisymmetry
    sigma = (&sigma - sigma.transpose()) * 0.5;
    let gen_scale = g.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scale = w.norm() * gen_scale * gen_scale;
    let kernel = linalg::nullspace(&sigma, RANK_TOL, scale.max(f64::MIN_POSITIVE));
    let rank = action.dim() - kernel.len();
    let max_entry = linalg::max_abs(&sigma);
    SigmaReport { point: m.to_vec(), sigma, kernel, rank, max_entry }
}

/// `Σ` with `ω = −B⁻¹`; requires `B` nondegenerate at `m`.
pub fn sigma_cocycle(action: &ActionSpec, tensor: &PoissonTensor, m: &[f64]) -> Result<SigmaReport> {
    check_dim(tensor.dim(), m.len())?;
    check_dim(tensor.dim(), action.space.dim)?;
    if !tensor.is_nondegenerate(m) {
        return Err(Error::NotApplicable(format!(
            "Poisson tensor {} is degenerate at {m:?}; use the leafwise cocycle",
            tensor.label
        )));
    }
    let w =
        -tensor.matrix(m).try_inverse().ok_or_else(|| Error::NumericDomain("Poisson tensor not invertible".into()))?;
    Ok(assemble(action, &w, m))
}

/// `Σ` with the symplectic form of the leaf through `m`; generators must be
/// tangent to that leaf.
pub fn sigma_cocycle_leafwise(action: &ActionSpec, tensor: &PoissonTensor, m: &[f64]) -> Result<SigmaReport> {
    check_dim(tensor.dim(), m.len())?;
    check_dim(tensor.dim(), action.space.dim)?;
    let b = tensor.matrix(m);
    let image = linalg::SubspaceSample::from_vectors_scaled(
        m,
        tensor.dim(),
        linalg::matrix_columns(&b),
        RANK_TOL,
        tensor.scale(m),
    );
    let orbit = action.orbit_tangent(m);
    if !orbit.is_contained_in(&image, 1e-8) {
        return Err(Error::HypothesisViolation("orbit is not tangent to the symplectic leaf".into()));
    }
    Ok(assemble(action, &tensor.leaf_form(m), m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PhaseSpace, VectorField};
    use crate::lie::LieAlgebra;
    use std::sync::Arc;

    fn plane() -> (ActionSpec, PoissonTensor) {
        let space = Arc::new(PhaseSpace::euclidean("R2", 2).unwrap());
        let omega = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let tensor = PoissonTensor::from_symplectic(space.clone(), "dx^dy", omega).unwrap();
        let gens = vec![
            VectorField::constant(space.clone(), "dx", &[1.0, 0.0]).unwrap(),
            VectorField::constant(space.clone(), "dy", &[0.0, 1.0]).unwrap(),
        ];
        (ActionSpec::new("translations", LieAlgebra::abelian(2).unwrap(), space, gens).unwrap(), tensor)
    }

    #[test]
    fn translations_of_the_plane() {
        let (action, tensor) = plane();
        let r = sigma_cocycle(&action, &tensor, &[0.3, -2.0]).unwrap();
        assert!((r.sigma[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((r.sigma[(1, 0)] + 1.0).abs() < 1e-15);
        assert!(r.kernel.is_empty());
    }

    #[test]
    fn leafwise_so3_at_pole() {
        let so3 = LieAlgebra::so3();
        let tensor = PoissonTensor::lie_poisson(&so3).unwrap();
        let action = ActionSpec::coadjoint(&so3, &tensor).unwrap();
        let m = [0.0, 0.0, 1.0];
        assert!(matches!(sigma_cocycle(&action, &tensor, &m), Err(Error::NotApplicable(_))));
        let r = sigma_cocycle_leafwise(&action, &tensor, &m).unwrap();
        assert!((r.sigma[(0, 1)] - 1.0).abs() < 1e-12);
        assert_eq!(r.kernel.len(), 1);
        assert!((r.kernel[0][2].abs() - 1.0).abs() < 1e-12);
    }
}
