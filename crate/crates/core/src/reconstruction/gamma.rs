//! The cocycle `Σ`, the one-form `γ` it induces on the group, and the
//! hypothesis checklist for von Neumann conclusions on symplectic actions.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{averaged_inner_product, orthogonal_within, sigma_at, stability_residual, STABILITY_TOL};
use crate::actions::ActionSpec;
use crate::error::{check_dim, Result};
use crate::lie::{GroupElement, GroupModel, LieAlgebra, SigmaReport};
use crate::linalg::{self, RANK_TOL};
use crate::poisson::{IsotropyReport, PoissonTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    /// `Σ = 0`: the orbit is isotropic.
    IsotropicOrbit,
    /// Compact group with perfect Lie algebra, so `H¹(G) = 0`.
    TrivialFirstCohomology,
    NotEstablished,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaReport {
    pub sigma: SigmaReport,
    /// Whether `Σ` used the leaf form of a degenerate tensor.
    pub leafwise: bool,
    pub orbit: IsotropyReport,
    pub isotropic: bool,
    pub coisotropic: bool,
    pub k_abelian: bool,
    pub invariant_complement: bool,
    pub exactness: Exactness,
    pub checklist: Vec<HypothesisCheck>,
    pub all_hold: bool,
    pub note: String,
}

/// `Γ(g)_{ηξ} = −Σ(Ad_{g⁻¹} ξ, η)`: the value of `γ(g)` on `T_eL_g η`,
/// paired with `ξ`, for basis vectors `η = e_i` (rows) and `ξ = e_j`
/// (columns).
pub fn gamma_form(model: &GroupModel, sigma: &DMatrix<f64>, g: &GroupElement) -> Result<DMatrix<f64>> {
    check_dim(model.dim(), sigma.nrows())?;
    let ad = model.ad(&model.inverse(g)?)?;
    Ok(-(sigma.transpose() * ad))
}

/// Largest `|Γ(g)_{ηξ} − ⟨d/dt θ(g·exp(tη)), ξ⟩|` over the given elements,
/// derivatives by central differences of step `h`. Zero exactly when
/// `γ = dθ` on the samples.
pub fn gamma_exactness_residual(
    model: &GroupModel,
    sigma: &DMatrix<f64>,
    theta: &dyn Fn(&GroupElement) -> Vec<f64>,
    elements: &[GroupElement],
    h: f64,
) -> Result<f64> {
    let d = model.dim();
    let mut worst: f64 = 0.0;
    for g in elements {
        let gamma = gamma_form(model, sigma, g)?;
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = h;
            let plus = theta(&model.mul(g, &model.exp(&e)));
            e[i] = -h;
            let minus = theta(&model.mul(g, &model.exp(&e)));
            check_dim(d, plus.len())?;
            for j in 0..d {
                let dtheta = (plus[j] - minus[j]) / (2.0 * h);
                worst = worst.max((gamma[(i, j)] - dtheta).abs());
            }
        }
    }
    Ok(worst)
}

fn is_perfect(alg: &LieAlgebra) -> bool {
    let n = alg.dim;
    let mut brackets = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in i + 1..n {
            brackets.push(alg.bracket(&crate::actions::unit(n, i), &crate::actions::unit(n, j)));
        }
    }
    linalg::orthonormal_basis(&brackets, n, RANK_TOL, 0.0).len() == n
}

/// Averages over `K_m` when it is a torus; otherwise accepts the Euclidean
/// complement only if it is already `ad_k`-stable.
fn invariant_complement(alg: &LieAlgebra, k: &[Vec<f64>]) -> (bool, String) {
    let n = alg.dim;
    if k.is_empty() || k.len() == n {
        return (true, "complement is trivial".into());
    }
    let euclid = DMatrix::identity(n, n);
    let gram = match averaged_inner_product(alg, k, &euclid) {
        Ok(g) => g,
        Err(e) => {
            let q = orthogonal_within(k, &linalg::identity_vectors(n), &euclid, n);
            let r = stability_residual(alg, k, &q);
            return if r <= STABILITY_TOL {
                (true, "orthogonal complement is ad_k-stable".into())
            } else {
                (false, format!("no averaging available ({e}); orthogonal complement drifts by {r:e}"))
            };
        }
    };
    let q = orthogonal_within(k, &linalg::identity_vectors(n), &gram, n);
    let r = stability_residual(alg, k, &q);
    if r <= STABILITY_TOL {
        (true, "averaged complement is ad_k-stable".into())
    } else {
        (false, format!("averaged complement drifts by {r:e}"))
    }
}

/// `Σ`, `k_m = ker Σ^♭`, and the checklist: coisotropic orbit,
/// `Ad(K_m)`-invariant complement, abelian `k_m`, exact `γ`.
pub fn gamma_diagnostics(action: &ActionSpec, tensor: &PoissonTensor, m: &[f64]) -> Result<GammaReport> {
    let (sigma, leafwise) = sigma_at(action, tensor, m)?;
    let orbit_space = action.orbit_tangent(m);
    let orbit = if leafwise {
        tensor.classify_isotropy_leafwise(&orbit_space)?
    } else {
        tensor.classify_isotropy(&orbit_space)?
    };
    let alg = &action.algebra;
    let scale = sigma.sigma.norm().max(1.0);
    let isotropic = sigma.max_entry <= 1e-10 * scale;
    let coisotropic = orbit.coisotropic;
    let k_abelian = alg.is_abelian_span(&sigma.kernel, 1e-10);
    let (invariant_complement, complement_detail) = invariant_complement(alg, &sigma.kernel);
    let exactness = if isotropic {
        Exactness::IsotropicOrbit
    } else if action.compact && is_perfect(alg) {
        Exactness::TrivialFirstCohomology
    } else {
        Exactness::NotEstablished
    };
    let checklist = vec![
        HypothesisCheck {
            name: "coisotropic orbit",
            holds: coisotropic,
            detail: format!(
                "orbit is {:?} (rank {}, orthogonal rank {})",
                orbit.class, orbit.rank, orbit.orthogonal_rank
            ),
        },
        HypothesisCheck { name: "invariant complement to k_m", holds: invariant_complement, detail: complement_detail },
        HypothesisCheck { name: "k_m abelian", holds: k_abelian, detail: format!("dim k_m = {}", sigma.kernel.len()) },
        HypothesisCheck {
            name: "gamma exact",
            holds: exactness != Exactness::NotEstablished,
            detail: format!("{exactness:?}"),
        },
    ];
    let all_hold = checklist.iter().all(|c| c.holds);
    let note = match exactness {
        Exactness::IsotropicOrbit => "Σ = 0: orbit isotropic, γ exact".to_string(),
        Exactness::TrivialFirstCohomology => "H¹(G) = 0: γ exact".to_string(),
        Exactness::NotEstablished => {
            format!("exactness not established: Σ ≠ 0 (max entry {:.3e}) and H¹(G) = 0 is not known", sigma.max_entry)
        }
    };
    Ok(GammaReport {
        sigma,
        leafwise,
        orbit,
        isotropic,
        coisotropic,
        k_abelian,
        invariant_complement,
        exactness,
        checklist,
        all_hold,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use crate::lie::group::cocycle_derivative;

    #[test]
    fn circle_on_torus_meets_every_hypothesis() {
        let sys = builtin("t2-rotation").unwrap();
        let r = gamma_diagnostics(&sys.action, &sys.tensor, &[0.3, 1.2]).unwrap();
        assert!(r.isotropic);
        assert_eq!(r.exactness, Exactness::IsotropicOrbit);
        assert!(r.all_hold, "{:?}", r.checklist);
    }

    #[test]
    fn plane_translations_leave_exactness_open() {
        let sys = builtin("r2-translations").unwrap();
        let r = gamma_diagnostics(&sys.action, &sys.tensor, &[0.5, -0.5]).unwrap();
        assert!(!r.isotropic);
        assert_eq!(r.exactness, Exactness::NotEstablished);
        assert!(r.note.contains("exactness not established"));
        assert!(r.sigma.kernel.is_empty());
        assert!((r.sigma.sigma[(0, 1)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rotation_group_has_trivial_cohomology() {
        let sys = builtin("so3-coadjoint").unwrap();
        let r = gamma_diagnostics(&sys.action, &sys.tensor, &[0.0, 0.0, 1.0]).unwrap();
        assert!(r.leafwise);
        assert_eq!(r.exactness, Exactness::TrivialFirstCohomology);
        assert!(r.all_hold, "{:?}", r.checklist);
    }

    /// `θ(x, y) = (−y, x)` on the translation group of the plane.
    fn theta(g: &GroupElement) -> Vec<f64> {
        vec![-g.matrix[(1, 2)], g.matrix[(0, 2)]]
    }

    #[test]
    fn plane_cocycle_integrates_sigma() {
        let sys = builtin("r2-translations").unwrap();
        let model = sys.action.group.clone().unwrap();
        let sigma = gamma_diagnostics(&sys.action, &sys.tensor, &[0.1, 0.2]).unwrap().sigma;
        // T_eθ = Σ^♭, whose columns are Σ(e_i, ·)
        let dtheta = cocycle_derivative(&model, &theta, 1e-4);
        assert!((dtheta - sigma.sigma.transpose()).amax() < 1e-10);
        let elements: Vec<GroupElement> = [[0.0, 0.0], [1.5, -0.3], [-2.0, 4.0]].iter().map(|x| model.exp(x)).collect();
        assert!(gamma_exactness_residual(&model, &sigma.sigma, &theta, &elements, 1e-4).unwrap() < 1e-9);
        let wrong = |g: &GroupElement| vec![g.matrix[(1, 2)], -g.matrix[(0, 2)]];
        assert!(gamma_exactness_residual(&model, &sigma.sigma, &wrong, &elements, 1e-4).unwrap() > 1.0);
    }

    #[test]
    fn plane_cocycle_satisfies_the_cocycle_identity() {
        let model = GroupModel::r2_translations();
        let (g, h) = (model.exp(&[0.7, -1.1]), model.exp(&[2.0, 0.4]));
        // θ(gh) = θ(g) + Ad*_{g⁻¹} θ(h)
        let lhs = theta(&model.mul(&g, &h));
        let ginv = model.inverse(&g).unwrap();
        let moved = model.coad(&ginv, &theta(&h)).unwrap();
        let rhs: Vec<f64> = theta(&g).iter().zip(&moved).map(|(a, b)| a + b).collect();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
