//! Ready-made systems: a Poisson manifold with a canonical action.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::actions::ActionSpec;
use crate::error::{Error, Result};
use crate::geometry::{PhaseSpace, Poly, ScalarField, Table, VectorField};
use crate::lie::{GroupModel, LieAlgebra};
use crate::poisson::PoissonTensor;

#[derive(Clone, Debug)]
pub struct System {
    pub name: String,
    pub tensor: PoissonTensor,
    pub action: ActionSpec,
    /// Known Casimir functions of the tensor.
    pub casimirs: Vec<ScalarField>,
    /// Half-width of the sampling box on non-periodic coordinates.
    pub sample_half_width: f64,
}

impl System {
    pub fn space(&self) -> &Arc<PhaseSpace> {
        &self.tensor.space
    }

    pub fn default_degree(&self) -> usize {
        if self.space().all_periodic() {
            6
        } else {
            4
        }
    }

    /// Uniform samples over the chart box.
    pub fn sample_points<R: rand::Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.space().sample(rng, self.sample_half_width)).collect()
    }
}

pub struct BuiltinInfo {
    pub name: &'static str,
    pub description: &'static str,
}

/// Alphabetical.
pub const BUILTINS: &[BuiltinInfo] = &[
    BuiltinInfo {
        name: "r2-translations",
        description: "translations of the plane, ω := dx ∧ dy; nonzero symplectic cocycle",
    },
    BuiltinInfo {
        name: "se2-coadjoint",
        description: "coadjoint action of SE(2) on se(2)*, Lie-Poisson structure; orbits are cylinders",
    },
    BuiltinInfo {
        name: "so3-coadjoint",
        description: "coadjoint action of SO(3) on so(3)*, Lie-Poisson structure; orbits are spheres",
    },
    BuiltinInfo {
        name: "t2-irrational-flow",
        description: "irrational linear flow (1, √2) on T², ω := dθ1 ∧ dθ2; Howe pair that is not a dual pair",
    },
    BuiltinInfo {
        name: "t2-rotation",
        description: "circle rotating the first angle of T², ω := dθ1 ∧ dθ2; Lagrangian orbits",
    },
    BuiltinInfo {
        name: "t4-example-7-8",
        description: "diagonal circle on T² × T², ω := dθ1 ∧ dθ2 + √2 dψ1 ∧ dψ2; not von Neumann",
    },
];

pub fn names() -> Vec<&'static str> {
    BUILTINS.iter().map(|b| b.name).collect()
}

pub fn builtin(name: &str) -> Result<System> {
    match name {
        "t2-rotation" => t2_rotation(),
        "t2-irrational-flow" => t2_irrational_flow(),
        "t4-example-7-8" => t4_diagonal_circle(),
        "so3-coadjoint" => coadjoint(LieAlgebra::so3(), Some(GroupModel::so3()), true),
        "se2-coadjoint" => coadjoint(LieAlgebra::se2(), Some(se2_group()), false),
        "r2-translations" => r2_translations(),
        other => Err(Error::InvalidInput(format!("unknown builtin {other:?}; available: {}", names().join(", ")))),
    }
}

/// `[[0, 1], [-1, 0]]`, the matrix of `dx ∧ dy`.
fn area_form() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

fn t2() -> Result<(Arc<PhaseSpace>, PoissonTensor)> {
    let space = Arc::new(PhaseSpace::with_coordinates("T2", vec![true, true], vec!["theta1".into(), "theta2".into()])?);
    let tensor = PoissonTensor::from_symplectic(space.clone(), "dtheta1^dtheta2", area_form())?;
    Ok((space, tensor))
}

fn circle_action(name: &str, space: Arc<PhaseSpace>, direction: &[f64]) -> Result<ActionSpec> {
    let gen = VectorField::constant(space.clone(), "e_M", direction)?;
    Ok(ActionSpec::new(name, LieAlgebra::abelian(1)?, space, vec![gen])?.compact(true))
}

fn t2_rotation() -> Result<System> {
    let (space, tensor) = t2()?;
    let action = circle_action("t2-rotation", space, &[1.0, 0.0])?;
    Ok(System { name: "t2-rotation".into(), tensor, action, casimirs: Vec::new(), sample_half_width: 1.0 })
}

fn t2_irrational_flow() -> Result<System> {
    let (space, tensor) = t2()?;
    let gen = VectorField::constant(space.clone(), "e_M", &[1.0, SQRT_2])?;
    let action = ActionSpec::new("t2-irrational-flow", LieAlgebra::abelian(1)?, space, vec![gen])?;
    Ok(System { name: "t2-irrational-flow".into(), tensor, action, casimirs: Vec::new(), sample_half_width: 1.0 })
}

fn t4_diagonal_circle() -> Result<System> {
    let space = Arc::new(PhaseSpace::with_coordinates(
        "T2xT2",
        vec![true; 4],
        vec!["theta1".into(), "theta2".into(), "psi1".into(), "psi2".into()],
    )?);
    let mut omega = DMatrix::zeros(4, 4);
    omega.view_mut((0, 0), (2, 2)).copy_from(&area_form());
    omega.view_mut((2, 2), (2, 2)).copy_from(&(area_form() * SQRT_2));
    let tensor = PoissonTensor::from_symplectic(space.clone(), "dtheta1^dtheta2 + sqrt2 dpsi1^dpsi2", omega)?;
    let action = circle_action("t4-example-7-8", space, &[1.0, 0.0, 1.0, 0.0])?;
    Ok(System { name: "t4-example-7-8".into(), tensor, action, casimirs: Vec::new(), sample_half_width: 1.0 })
}

fn coadjoint(alg: LieAlgebra, group: Option<GroupModel>, compact: bool) -> Result<System> {
    let tensor = PoissonTensor::lie_poisson(&alg)?;
    let mut action = ActionSpec::coadjoint(&alg, &tensor)?.compact(compact);
    if let Some(g) = group {
        action = action.with_group(g);
    }
    let n = alg.dim;
    let casimirs = match alg.name.as_str() {
        "so(3)" => {
            let mut p = Poly::zero(n);
            for i in 0..n {
                let mut e = vec![0; n];
                e[i] = 2;
                p.add_term(e, 1.0);
            }
            vec![ScalarField::from_table("|mu|^2", Table::Poly(p))]
        }
        "se(2)" => {
            let mut p = Poly::zero(n);
            p.add_term(vec![0, 2, 0], 1.0);
            p.add_term(vec![0, 0, 2], 1.0);
            vec![ScalarField::from_table("|p|^2", Table::Poly(p))]
        }
        _ => Vec::new(),
    };
    let name = format!("{}-coadjoint", alg.name.replace(['(', ')'], ""));
    Ok(System { name, tensor, action, casimirs, sample_half_width: 1.0 })
}

/// `SE(2)` as affine 3×3 matrices, basis `(J, P1, P2)`.
fn se2_group() -> GroupModel {
    let mut j = DMatrix::zeros(3, 3);
    j[(0, 1)] = -1.0;
    j[(1, 0)] = 1.0;
    let mut p1 = DMatrix::zeros(3, 3);
    p1[(0, 2)] = 1.0;
    let mut p2 = DMatrix::zeros(3, 3);
    p2[(1, 2)] = 1.0;
    GroupModel::matrix(LieAlgebra::se2(), vec![j, p1, p2]).expect("SE(2) affine matrices close")
}

fn r2_translations() -> Result<System> {
    let space = Arc::new(PhaseSpace::with_coordinates("R2", vec![false, false], vec!["x".into(), "y".into()])?);
    let tensor = PoissonTensor::from_symplectic(space.clone(), "dx^dy", area_form())?;
    let gens = vec![
        VectorField::constant(space.clone(), "d/dx", &[1.0, 0.0])?,
        VectorField::constant(space.clone(), "d/dy", &[0.0, 1.0])?,
    ];
    let action = ActionSpec::new("r2-translations", LieAlgebra::abelian(2)?, space, gens)?
        .with_group(GroupModel::r2_translations());
    Ok(System { name: "r2-translations".into(), tensor, action, casimirs: Vec::new(), sample_half_width: 2.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_builtin_builds() {
        for name in names() {
            let sys = builtin(name).unwrap();
            assert_eq!(sys.name, name);
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn listing_is_alphabetical() {
        let n = names();
        let mut sorted = n.clone();
        sorted.sort();
        assert_eq!(n, sorted);
    }

    #[test]
    fn generators_respect_brackets() {
        let mut rng = crate::rng::stream(1, "test");
        for name in names() {
            let sys = builtin(name).unwrap();
            let pts = sys.sample_points(&mut rng, 5);
            assert!(sys.action.bracket_residual(&pts) < 1e-9, "{name}");
        }
    }
}
