//! Compactly supported Hamiltonians whose time-one flow moves a point along
//! `exp(ξ)`, while commuting with every invariant.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use super::{orthogonal_within, BumpProfile};
use crate::actions::{invariant_finder, span_at, ActionSpec, ORBIT_SCALE};
use crate::dual::Dual;
use crate::error::{check_dim, Error, Result};
use crate::geometry::space::shortest_arc;
use crate::geometry::{flow, ScalarField, VectorField, DEFAULT_STEP};
use crate::linalg::{self, RANK_TOL};
use crate::poisson::{Isotropy, PoissonTensor, TensorKind};

/// Order of the Gauss–Legendre rule used for line integrals.
const QUADRATURE_ORDER: usize = 16;
/// Largest integer coefficient tried when searching for rational relations.
const RELATION_BOUND: i64 = 12;

#[derive(Clone, Debug)]
pub struct BumpOptions {
    /// Truncation degree of the invariant family used in the centralizer
    /// check; `None` picks 6 on tori and 4 otherwise.
    pub degree: Option<usize>,
    pub step: f64,
    /// Points near `m` at which brackets are sampled, besides `m` itself.
    pub samples: usize,
    pub seed: u64,
}

impl Default for BumpOptions {
    fn default() -> Self {
        Self { degree: None, step: DEFAULT_STEP, samples: 40, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BumpCertificate {
    /// `F_1(m)` for the flow of `X_f`.
    pub endpoint: Vec<f64>,
    /// `exp(ξ)·m`.
    pub target: Vec<f64>,
    pub endpoint_error: f64,
    /// `max |{f, l}|` over the sampled points and invariant family.
    pub centralizer_residual: f64,
    pub invariants: usize,
    pub degree: usize,
}

#[derive(Clone, Debug)]
pub struct BumpHamiltonian {
    pub f: ScalarField,
    /// Basis of the Lie algebra of the closure of `exp(tξ)`.
    pub closure: Vec<Vec<f64>>,
    /// Orbit class of the closure at `m`; `None` when `ξ = 0`.
    pub orbit_class: Option<Isotropy>,
    /// Basis of the directions whose momenta the bump is cut off in.
    pub momentum_directions: Vec<Vec<f64>>,
    pub certificate: BumpCertificate,
}

/// Nodes and weights of the Gauss–Legendre rule on `[0, 1]`
/// (Golub–Welsch).
fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut rule: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (eig.eigenvalues[i] + 1.0), v0 * v0)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Lie algebra of the closure of `{exp(tξ)}`.
///
/// On compact abelian groups (basis vectors of period 2π) this is the
/// smallest rational subspace containing `ξ`, found from the integer
/// relations `n·ξ = 0` with `|n_i| ≤ 12`; otherwise it is `span{ξ}`.
pub fn closure_algebra(action: &ActionSpec, xi: &[f64]) -> Result<Vec<Vec<f64>>> {
    let k = action.dim();
    check_dim(k, xi.len())?;
    let norm = linalg::norm(xi);
    if norm == 0.0 {
        return Ok(Vec::new());
    }
    let unit: Vec<f64> = xi.iter().map(|x| x / norm).collect();
    if !(action.compact && action.algebra.is_abelian()) || k == 1 {
        return Ok(vec![unit]);
    }
    if k > 4 {
        return Err(Error::NotApplicable(format!(
            "rational closure search supports tori of dimension at most 4, got {k}"
        )));
    }
    let side = (2 * RELATION_BOUND + 1) as usize;
    let mut relations: Vec<Vec<f64>> = Vec::new();
    let mut n = vec![0i64; k];
    for idx in 0..side.pow(k as u32) {
        let mut r = idx;
        for c in n.iter_mut() {
            *c = (r % side) as i64 - RELATION_BOUND;
            r /= side;
        }
        let nf: Vec<f64> = n.iter().map(|&c| c as f64).collect();
        let len = linalg::norm(&nf);
        if len == 0.0 {
            continue;
        }
        if linalg::dot(&nf, &unit).abs() <= 1e-9 * len {
            relations.push(nf);
        }
    }
    let rel = linalg::orthonormal_basis(&relations, k, RANK_TOL, 0.0);
    Ok(linalg::complement_basis(&rel, k))
}

/// A function `h` near `m` with `dh = i_{η_M} ω` and `h(m) = 0`.
///
/// Coadjoint-type actions on a Lie–Poisson space (`η_M = B·η`) use the
/// linear momentum `⟨z − m, η⟩`. Constant symplectic tensors integrate
/// `i_{η_M} ω` along the straight segment from `m` (shortest arcs on
/// periodic coordinates).
pub fn local_primitive(action: &ActionSpec, tensor: &PoissonTensor, m: &[f64], eta: &[f64]) -> Result<ScalarField> {
    let n = tensor.dim();
    check_dim(n, m.len())?;
    check_dim(action.dim(), eta.len())?;
    let label = format!("primitive of {eta:?}");
    match &tensor.kind {
        TensorKind::LiePoisson(_) => {
            let probes = [m.to_vec(), m.iter().map(|x| x + 0.37).collect(), m.iter().map(|x| 0.5 * x - 0.21).collect()];
            for z in &probes {
                let lhs = action.generator_at(eta, z);
                let rhs = linalg::mat_vec(&tensor.matrix(z), eta);
                let scale = 1.0 + linalg::norm(&rhs);
                if lhs.iter().zip(&rhs).any(|(a, b)| (a - b).abs() > 1e-12 * scale) {
                    return Err(Error::NotApplicable(
                        "generators are not the Hamiltonian fields of linear functions; supply a primitive".into(),
                    ));
                }
            }
            let (m, eta) = (m.to_vec(), eta.to_vec());
            Ok(ScalarField::closed(n, label, move |z| {
                z.iter().zip(&m).zip(&eta).map(|((zi, mi), e)| (*zi - *mi) * *e).sum()
            }))
        }
        TensorKind::Constant(b) => {
            let w = -b
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::NotApplicable("tensor is not symplectic; supply a primitive".into()))?;
            let field: VectorField = action.generator(eta)?;
            if field.eval_dual(&crate::dual::constants(m)).is_none() {
                return Err(Error::Representation(format!(
                    "generator {} cannot be evaluated at dual points",
                    field.label
                )));
            }
            let rule = gauss_legendre(QUADRATURE_ORDER);
            let periodic = tensor.space.periodic.clone();
            let m = m.to_vec();
            Ok(ScalarField::closed(n, label, move |z| {
                let d: Vec<Dual> = z
                    .iter()
                    .zip(&m)
                    .zip(&periodic)
                    .map(|((zi, mi), &p)| {
                        let re = if p { shortest_arc(zi.re - mi) } else { zi.re - mi };
                        Dual::new(re, zi.eps)
                    })
                    .collect();
                let mut total = Dual::constant(0.0);
                for &(s, weight) in &rule {
                    let p: Vec<Dual> = m.iter().zip(&d).map(|(mi, di)| *di * s + *mi).collect();
                    let x = field.eval_dual(&p).expect("checked above");
                    for k in 0..n {
                        let mut alpha = Dual::constant(0.0);
                        for j in 0..n {
                            alpha += x[j] * w[(j, k)];
                        }
                        total += alpha * d[k] * weight;
                    }
                }
                total
            }))
        }
        _ => Err(Error::NotApplicable(format!(
            "no closed-form primitive for {} tensors; supply a primitive",
            tensor.kind_tag()
        ))),
    }
}

/// [`bump_hamiltonian_with`] with default options.
pub fn bump_hamiltonian(
    action: &ActionSpec,
    tensor: &PoissonTensor,
    m: &[f64],
    xi: &[f64],
    profile: &BumpProfile,
) -> Result<BumpHamiltonian> {
    bump_hamiltonian_with(action, tensor, m, xi, profile, &BumpOptions::default())
}

/// `f = Φ·h`: `h` a local primitive of `i_{ξ_M} ω` and `Φ` the profile
/// applied to the norm of the momenta along the `m`-directions of the
/// closure torus of `ξ`. Requires the closure orbit through `m` to be
/// coisotropic.
pub fn bump_hamiltonian_with(
    action: &ActionSpec,
    tensor: &PoissonTensor,
    m: &[f64],
    xi: &[f64],
    profile: &BumpProfile,
    options: &BumpOptions,
) -> Result<BumpHamiltonian> {
    let n = tensor.dim();
    check_dim(n, m.len())?;
    check_dim(n, action.space.dim)?;
    check_dim(action.dim(), xi.len())?;
    let closure = closure_algebra(action, xi)?;
    if closure.is_empty() {
        let f = ScalarField::constant(n, 0.0);
        let certificate = certify(action, tensor, m, xi, &f, options)?;
        return Ok(BumpHamiltonian { f, closure, orbit_class: None, momentum_directions: Vec::new(), certificate });
    }

    let fields: Vec<Arc<VectorField>> =
        closure.iter().map(|c| action.generator(c).map(Arc::new)).collect::<Result<_>>()?;
    let orbit = span_at(&fields, m, n);
    let report = if tensor.is_nondegenerate(m) {
        tensor.classify_isotropy(&orbit)?
    } else {
        tensor.classify_isotropy_leafwise(&orbit)?
    };
    if !report.coisotropic {
        return Err(Error::HypothesisViolation(format!(
            "orbit of the closure of exp(tξ) through {m:?} is {:?}, not coisotropic",
            report.class
        )));
    }
    let leaf = tensor.leaf_form(m);
    let xi_m = action.generator_at(xi, m);
    let alpha = linalg::mat_vec(&leaf.transpose(), &xi_m);
    let leak = orbit.basis.iter().map(|o| linalg::dot(&alpha, o).abs()).fold(0.0, f64::max);
    if leak > 1e-9 * (1.0 + leaf.norm() * linalg::norm(&xi_m)) {
        return Err(Error::HypothesisViolation(format!(
            "i_(ξ_M) ω does not vanish on the closure orbit (residual {leak:e})"
        )));
    }

    // split the closure algebra: isotropy, then m inside ker Σ
    let t = closure.len();
    let gm = action.generator_matrix(m) * linalg::columns_to_matrix(&closure, action.dim());
    let sigma = gm.transpose() * &leaf * &gm;
    let sigma = (&sigma - sigma.transpose()) * 0.5;
    let col_scale = gm.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let kernel = linalg::nullspace(&sigma, RANK_TOL, (leaf.norm() * col_scale * col_scale).max(f64::MIN_POSITIVE));
    let isotropy = linalg::nullspace(&gm, RANK_TOL, ORBIT_SCALE);
    let m_local = orthogonal_within(&isotropy, &kernel, &DMatrix::identity(t, t), t);
    let momentum_directions: Vec<Vec<f64>> = m_local
        .iter()
        .map(|c| {
            let mut v = vec![0.0; action.dim()];
            for (b, &cb) in closure.iter().zip(c) {
                for k in 0..v.len() {
                    v[k] += cb * b[k];
                }
            }
            v
        })
        .collect();

    let h = local_primitive(action, tensor, m, xi)?;
    let momenta: Vec<ScalarField> =
        momentum_directions.iter().map(|d| local_primitive(action, tensor, m, d)).collect::<Result<_>>()?;
    let profile = *profile;
    let f = ScalarField::closed(n, format!("bump Hamiltonian for {xi:?}"), move |z| {
        let mut sq = Dual::constant(0.0);
        for p in &momenta {
            let v = p.eval_dual(z);
            sq += v * v;
        }
        let radius = if sq.re > 0.0 { sq.sqrt() } else { Dual::constant(0.0) };
        profile.value_dual(radius) * h.eval_dual(z)
    });
    let certificate = certify(action, tensor, m, xi, &f, options)?;
    Ok(BumpHamiltonian { f, closure, orbit_class: Some(report.class), momentum_directions, certificate })
}

fn certify(
    action: &ActionSpec,
    tensor: &PoissonTensor,
    m: &[f64],
    xi: &[f64],
    f: &ScalarField,
    options: &BumpOptions,
) -> Result<BumpCertificate> {
    let space = &tensor.space;
    let xf = tensor.hamiltonian_field(f)?;
    let endpoint = flow(&xf, m, 1.0, options.step)?;
    let target = space.wrapped(&action.act(xi, m, options.step)?);
    let endpoint_error = space.distance(&endpoint, &target);

    let degree = options.degree.unwrap_or(if space.all_periodic() { 6 } else { 4 });
    let kind = action
        .table_kind()
        .ok_or_else(|| Error::Representation("action has no coefficient tables for the invariant family".into()))?;
    let family = invariant_finder(&action.generators, kind, space.dim, degree)?.family;
    let mut rng = crate::rng::stream(options.seed, "bump");
    let mut points = vec![m.to_vec()];
    for i in 0..options.samples {
        // alternate between the support of f and the wider chart
        let z = if i % 2 == 0 {
            m.iter().map(|mi| mi + rng.gen_range(-0.8..0.8)).collect()
        } else {
            space.sample(&mut rng, 2.0)
        };
        points.push(z);
    }
    let mut centralizer_residual: f64 = 0.0;
    for z in &points {
        for l in &family.members {
            centralizer_residual = centralizer_residual.max(tensor.bracket(f, l, z)?.abs());
        }
    }
    Ok(BumpCertificate {
        endpoint,
        target,
        endpoint_error,
        centralizer_residual,
        invariants: family.members.len(),
        degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(QUADRATURE_ORDER);
        let total: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        // ∫_0^1 x^k = 1/(k+1), exact up to degree 2·16 − 1
        for k in [1, 7, 20, 31] {
            let q: f64 = rule.iter().map(|&(x, w)| w * x.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "{k}");
        }
    }

    #[test]
    fn closure_of_rational_and_irrational_directions() {
        let space = std::sync::Arc::new(crate::geometry::PhaseSpace::torus("T2", 2).unwrap());
        let gens = vec![
            VectorField::constant(space.clone(), "a", &[1.0, 0.0]).unwrap(),
            VectorField::constant(space.clone(), "b", &[0.0, 1.0]).unwrap(),
        ];
        let action =
            ActionSpec::new("T2", crate::lie::LieAlgebra::abelian(2).unwrap(), space, gens).unwrap().compact(true);
        assert_eq!(closure_algebra(&action, &[1.0, 2.0]).unwrap().len(), 1);
        assert_eq!(closure_algebra(&action, &[1.0, std::f64::consts::SQRT_2]).unwrap().len(), 2);
        assert!(closure_algebra(&action, &[0.0, 0.0]).unwrap().is_empty());
    }

    #[test]
    fn torus_primitive_is_the_second_angle() {
        let sys = builtin("t2-rotation").unwrap();
        let m = [0.5, 6.0];
        let h = local_primitive(&sys.action, &sys.tensor, &m, &[2.0]).unwrap();
        // dh = i_{2∂θ1}(dθ1∧dθ2) = 2 dθ2; 6.0 + 0.5 wraps past 2π
        let z = [3.0, 0.2];
        let expected = 2.0 * shortest_arc(0.2 - 6.0);
        assert!((h.eval(&z).unwrap() - expected).abs() < 1e-13);
        let g = h.gradient(&z).unwrap();
        assert!(g[0].abs() < 1e-14 && (g[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn zero_generator_gives_zero() {
        let sys = builtin("t2-rotation").unwrap();
        let profile = BumpProfile::for_radius(1.0).unwrap();
        let b = bump_hamiltonian(&sys.action, &sys.tensor, &[1.0, 2.0], &[0.0], &profile).unwrap();
        assert_eq!(b.certificate.endpoint_error, 0.0);
        assert_eq!(b.f.gradient(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn diagonal_circle_violates_coisotropy() {
        let sys = builtin("t4-example-7-8").unwrap();
        let profile = BumpProfile::for_radius(1.0).unwrap();
        let err = bump_hamiltonian(&sys.action, &sys.tensor, &[0.1, 0.2, 0.3, 0.4], &[1.0], &profile).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolation(_)), "{err}");
    }
}
