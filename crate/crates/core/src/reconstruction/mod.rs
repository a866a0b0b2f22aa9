//! Tube data around an orbit: the splitting `g = h ⊕ m ⊕ q`, the pairing on
//! `q`, the implicit solve for `τ`, and Hamiltonian fields written in tube
//! coordinates `(g, ρ, v)`.

mod bump;
mod gamma;

use nalgebra::DMatrix;
use serde::Serialize;

pub use bump::{
    bump_hamiltonian, bump_hamiltonian_with, closure_algebra, local_primitive, BumpCertificate, BumpHamiltonian,
    BumpOptions,
};
pub use gamma::{gamma_diagnostics, gamma_exactness_residual, gamma_form, Exactness, GammaReport, HypothesisCheck};

use crate::actions::{circle_sample, ActionSpec};
use crate::dual::Dual;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{PlateauProfile, ScalarField};
use crate::lie::cocycle::serialize_matrix;
use crate::lie::{sigma_cocycle, sigma_cocycle_leafwise, LieAlgebra, SigmaReport};
use crate::linalg::{self, RANK_TOL};
use crate::poisson::PoissonTensor;

/// Plateau `r/2`, support `3r/4`; see [`PlateauProfile::for_radius`].
pub type BumpProfile = PlateauProfile;

/// Default residual target for [`solve_tau`].
pub const TAU_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// `|det P|` below this makes the pairing on `q` degenerate.
pub const PAIRING_DET_TOL: f64 = 1e-10;
/// Residual allowed when checking that summands are `ad_h`-stable.
pub(crate) const STABILITY_TOL: f64 = 1e-8;

/// `V_m = (g·m)^ω / ((g·m)^ω ∩ g·m)`, realised as a complement inside
/// `(g·m)^ω`.
#[derive(Clone, Debug, Serialize)]
pub struct SymplecticNormal {
    pub dim: usize,
    /// Ambient tangent vectors at `m` spanning the complement.
    pub basis: Vec<Vec<f64>>,
    /// `ω_V(u, v) = uᵀ Ω v` in the basis above.
    #[serde(serialize_with = "serialize_matrix")]
    pub omega: DMatrix<f64>,
    /// Linearised action of each isotropy basis vector on `V_m`.
    #[serde(skip)]
    pub isotropy_action: Vec<DMatrix<f64>>,
}

impl SymplecticNormal {
    pub fn trivial(isotropy_dim: usize) -> Self {
        Self {
            dim: 0,
            basis: Vec::new(),
            omega: DMatrix::zeros(0, 0),
            isotropy_action: vec![DMatrix::zeros(0, 0); isotropy_dim],
        }
    }

    /// `⟨J_V(v), η_b⟩ = ½ ω_V(η_b·v, v)` for each isotropy basis vector.
    pub fn momentum(&self, v: &[f64]) -> Vec<f64> {
        self.isotropy_action
            .iter()
            .map(|a| {
                let av = linalg::mat_vec(a, v);
                0.5 * linalg::dot(&av, &linalg::mat_vec(&self.omega, v))
            })
            .collect()
    }

    /// `B_V = −Ω⁻¹`.
    pub fn poisson(&self) -> Result<DMatrix<f64>> {
        if self.dim == 0 {
            return Ok(DMatrix::zeros(0, 0));
        }
        self.omega
            .clone()
            .try_inverse()
            .map(|w| -w)
            .ok_or_else(|| Error::SplittingFailure("symplectic normal form is degenerate".into()))
    }
}

/// Everything needed to write Hamiltonian fields in the tube
/// `G ×_H (m*_r × (V_m)_r)` around the orbit through `point`.
#[derive(Clone, Debug, Serialize)]
pub struct TubeData {
    pub point: Vec<f64>,
    #[serde(skip)]
    pub algebra: LieAlgebra,
    /// Basis of the isotropy algebra `h`.
    pub isotropy: Vec<Vec<f64>>,
    /// Basis of `m`, with `h ⊕ m = k_m`.
    pub m_part: Vec<Vec<f64>>,
    /// Basis of `q`, with `k_m ⊕ q = g`.
    pub q_part: Vec<Vec<f64>>,
    /// `P_{ij} = ⟨q_i, q_j⟩_q = Σ(q_i, q_j)`.
    #[serde(serialize_with = "serialize_matrix")]
    pub pairing: DMatrix<f64>,
    pub normal: SymplecticNormal,
    pub radius: f64,
    /// Columns `[h | m | q]`.
    #[serde(skip)]
    adapted: DMatrix<f64>,
    #[serde(skip)]
    adapted_inv: DMatrix<f64>,
}

impl TubeData {
    /// Assembles tube data from explicit summands; `sigma` is the cocycle on
    /// the whole algebra.
    pub fn from_parts(
        point: Vec<f64>,
        algebra: LieAlgebra,
        isotropy: Vec<Vec<f64>>,
        m_part: Vec<Vec<f64>>,
        q_part: Vec<Vec<f64>>,
        sigma: &DMatrix<f64>,
        normal: SymplecticNormal,
    ) -> Result<Self> {
        let n = algebra.dim;
        check_dim(n, sigma.nrows())?;
        check_dim(n, sigma.ncols())?;
        for v in isotropy.iter().chain(&m_part).chain(&q_part) {
            check_dim(n, v.len())?;
        }
        if normal.isotropy_action.len() != isotropy.len() {
            return Err(Error::Dimension { expected: isotropy.len(), got: normal.isotropy_action.len() });
        }
        let total = isotropy.len() + m_part.len() + q_part.len();
        if total != n {
            return Err(Error::SplittingFailure(format!(
                "h ⊕ m ⊕ q has {total} basis vectors, the algebra has dimension {n}"
            )));
        }
        let cols: Vec<Vec<f64>> = isotropy.iter().chain(&m_part).chain(&q_part).cloned().collect();
        let adapted = linalg::columns_to_matrix(&cols, n);
        let adapted_inv = adapted
            .clone()
            .try_inverse()
            .filter(|_| linalg::smallest_singular_value(&adapted) > RANK_TOL * adapted.norm())
            .ok_or_else(|| Error::SplittingFailure("summands h, m, q are not independent".into()))?;
        let nq = q_part.len();
        let pairing = DMatrix::from_fn(nq, nq, |i, j| linalg::dot(&q_part[i], &linalg::mat_vec(sigma, &q_part[j])));
        if nq > 0 {
            let det = pairing.determinant();
            if det.abs() <= PAIRING_DET_TOL {
                return Err(Error::SplittingFailure(format!("pairing on q is degenerate (det {det:e})")));
            }
        }
        Ok(Self { point, algebra, isotropy, m_part, q_part, pairing, normal, radius: 1.0, adapted, adapted_inv })
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = r;
        self
    }

    pub fn k_dim(&self) -> usize {
        self.isotropy.len() + self.m_part.len()
    }

    /// `h ⊕ m`.
    pub fn k_basis(&self) -> Vec<Vec<f64>> {
        self.isotropy.iter().chain(&self.m_part).cloned().collect()
    }

    /// Pairings `⟨λ, b⟩` with the adapted basis `[h | m | q]`.
    pub fn coefficients(&self, lambda: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.adapted.transpose(), lambda)
    }

    /// The covector with the given pairings on `h` and `m`, vanishing on `q`.
    pub fn covector(&self, on_h: &[f64], on_m: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.algebra.dim];
        c[..on_h.len()].copy_from_slice(on_h);
        let nh = self.isotropy.len();
        c[nh..nh + on_m.len()].copy_from_slice(on_m);
        linalg::mat_vec(&self.adapted_inv.transpose(), &c)
    }

    /// Coordinates of `ξ` in the adapted basis.
    pub fn components(&self, xi: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.adapted_inv, xi)
    }

    /// Largest `‖λ‖` for which the Jacobian of `F` in `τ` is certainly
    /// invertible: `σ_min(P)` over the operator norm of `λ ↦ ⟨λ, [q_j, q_i]⟩`.
    pub fn basin_radius(&self) -> f64 {
        let nq = self.q_part.len();
        if nq == 0 {
            return f64::INFINITY;
        }
        let smin = linalg::smallest_singular_value(&self.pairing);
        let n = self.algebra.dim;
        let mut bound = 0.0;
        for k in 0..n {
            let a = DMatrix::from_fn(nq, nq, |i, j| self.algebra.bracket(&self.q_part[j], &self.q_part[i])[k]);
            bound += a.norm_squared();
        }
        if bound == 0.0 {
            f64::INFINITY
        } else {
            smin / bound.sqrt()
        }
    }

    /// `F(ξ, λ, τ)_i = ⟨λ, [ξ + τ, q_i]⟩ + ⟨τ, q_i⟩_q` with `τ = Σ τ_j q_j`.
    pub fn tau_map(&self, xi: &[f64], lambda: &[f64], tau: &[f64]) -> Vec<f64> {
        let t: Vec<Dual> = tau.iter().map(|&x| Dual::constant(x)).collect();
        self.tau_map_dual(xi, lambda, &t).into_iter().map(|d| d.re).collect()
    }

    fn tau_map_dual(&self, xi: &[f64], lambda: &[f64], tau: &[Dual]) -> Vec<Dual> {
        let n = self.algebra.dim;
        let mut x: Vec<Dual> = xi.iter().map(|&v| Dual::constant(v)).collect();
        for (tj, q) in tau.iter().zip(&self.q_part) {
            for k in 0..n {
                x[k] += *tj * q[k];
            }
        }
        self.q_part
            .iter()
            .enumerate()
            .map(|(i, qi)| {
                let mut s = Dual::constant(0.0);
                for (k, &lk) in lambda.iter().enumerate() {
                    if lk == 0.0 {
                        continue;
                    }
                    for (a, xa) in x.iter().enumerate() {
                        for (b, &qb) in qi.iter().enumerate() {
                            let c = self.algebra.c(k, a, b) * qb;
                            if c != 0.0 {
                                s += *xa * (c * lk);
                            }
                        }
                    }
                }
                for (j, tj) in tau.iter().enumerate() {
                    s += *tj * self.pairing[(j, i)];
                }
                s
            })
            .collect()
    }

    fn check_in_k(&self, xi: &[f64]) -> Result<()> {
        let c = self.components(xi);
        let off = linalg::norm(&c[self.k_dim()..]);
        if off > 1e-10 * (1.0 + linalg::norm(xi)) {
            return Err(Error::InvalidInput(format!("{xi:?} is not in k_m (q-component {off:e})")));
        }
        Ok(())
    }

    fn check_in_k_dual(&self, lambda: &[f64]) -> Result<()> {
        let c = self.coefficients(lambda);
        let off = linalg::norm(&c[self.k_dim()..]);
        if off > 1e-10 * (1.0 + linalg::norm(lambda)) {
            return Err(Error::InvalidInput(format!("{lambda:?} does not vanish on q (pairing {off:e})")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TauSolution {
    /// Coordinates in the basis of `q`.
    pub tau: Vec<f64>,
    /// `Σ τ_j q_j` as an algebra vector.
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `F(ξ, λ, τ) = 0` for `τ ∈ q` by Newton's method from `τ = 0`,
/// with the Jacobian by forward-mode differentiation. `ξ ∈ k_m`; `λ` is a
/// covector vanishing on `q`.
pub fn solve_tau(tube: &TubeData, xi: &[f64], lambda: &[f64], tol: f64) -> Result<TauSolution> {
    let n = tube.algebra.dim;
    check_dim(n, xi.len())?;
    check_dim(n, lambda.len())?;
    tube.check_in_k(xi)?;
    tube.check_in_k_dual(lambda)?;
    let nq = tube.q_part.len();
    let mut tau = vec![0.0; nq];
    if nq == 0 {
        return Ok(TauSolution { tau, vector: vec![0.0; n], residual: 0.0, iterations: 0 });
    }
    let mut residual = f64::INFINITY;
    for it in 0..=NEWTON_MAX_ITER {
        let f = tube.tau_map(xi, lambda, &tau);
        residual = linalg::norm(&f);
        if !residual.is_finite() {
            break;
        }
        if residual < tol {
            let vector = combine(&tube.q_part, &tau, n);
            return Ok(TauSolution { tau, vector, residual, iterations: it });
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let mut jac = DMatrix::zeros(nq, nq);
        for j in 0..nq {
            let seeded = crate::dual::seed(&tau, j);
            for (i, d) in tube.tau_map_dual(xi, lambda, &seeded).into_iter().enumerate() {
                jac[(i, j)] = d.eps;
            }
        }
        let rhs = nalgebra::DVector::from_iterator(nq, f.iter().map(|x| -x));
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };
        for (t, s) in tau.iter_mut().zip(step.iter()) {
            *t += s;
        }
    }
    Err(Error::BasinExceeded { iterations: NEWTON_MAX_ITER, residual })
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (b, &c) in basis.iter().zip(coeffs) {
        for k in 0..n {
            out[k] += c * b[k];
        }
    }
    out
}

/// Vectors of `span(t)` orthogonal to `span(s)` for the inner product `gram`.
pub(crate) fn orthogonal_within(s: &[Vec<f64>], t: &[Vec<f64>], gram: &DMatrix<f64>, n: usize) -> Vec<Vec<f64>> {
    if t.is_empty() {
        return Vec::new();
    }
    if s.is_empty() {
        return linalg::orthonormal_basis(t, n, RANK_TOL, 0.0);
    }
    let sm = linalg::columns_to_matrix(s, n);
    let tm = linalg::columns_to_matrix(t, n);
    let a = sm.transpose() * gram * &tm;
    let vecs: Vec<Vec<f64>> =
        linalg::nullspace(&a, RANK_TOL, gram.norm()).iter().map(|c| linalg::mat_vec(&tm, c)).collect();
    linalg::orthonormal_basis(&vecs, n, 0.5, 1.0)
}

/// `inner` averaged over the circles generated by the isotropy basis.
pub(crate) fn averaged_inner_product(
    algebra: &LieAlgebra,
    isotropy: &[Vec<f64>],
    inner: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if !algebra.is_abelian_span(isotropy, 1e-10) {
        return Err(Error::UnsupportedIsotropy(
            "isotropy algebra is not abelian; only toral isotropy is averaged".into(),
        ));
    }
    let mut g = inner.clone();
    for zeta in isotropy {
        let ad = algebra.ad_matrix(zeta);
        if ad.amax() == 0.0 {
            continue;
        }
        let maps = circle_sample(&ad)?;
        let mut acc = DMatrix::zeros(g.nrows(), g.ncols());
        for a in &maps {
            acc += a.transpose() * &g * a;
        }
        g = acc / maps.len() as f64;
    }
    Ok(g)
}

/// Largest component of `ad_ζ(span)` outside `span`, over `ζ ∈ generators`.
pub(crate) fn stability_residual(algebra: &LieAlgebra, generators: &[Vec<f64>], span: &[Vec<f64>]) -> f64 {
    let n = algebra.dim;
    let q = linalg::orthonormal_basis(span, n, RANK_TOL, 0.0);
    let mut worst: f64 = 0.0;
    for zeta in generators {
        for v in span {
            let w = algebra.bracket(zeta, v);
            let mut r = w.clone();
            for b in &q {
                let c = linalg::dot(b, &w);
                for k in 0..n {
                    r[k] -= c * b[k];
                }
            }
            worst = worst.max(linalg::norm(&r));
        }
    }
    worst
}

/// `Σ` at `m`, with `ω = −B⁻¹` when `B` is invertible and the leaf form
/// otherwise. The flag reports which one was used.
pub fn sigma_at(action: &ActionSpec, tensor: &PoissonTensor, m: &[f64]) -> Result<(SigmaReport, bool)> {
    if tensor.is_nondegenerate(m) {
        Ok((sigma_cocycle(action, tensor, m)?, false))
    } else {
        Ok((sigma_cocycle_leafwise(action, tensor, m)?, true))
    }
}

fn symplectic_normal(
    action: &ActionSpec,
    tensor: &PoissonTensor,
    m: &[f64],
    isotropy: &[Vec<f64>],
) -> Result<SymplecticNormal> {
    let n = tensor.dim();
    let orbit = action.orbit_tangent(m);
    let w = tensor.symplectic_orthogonal(&orbit)?;
    if w.rank == 0 {
        return Ok(SymplecticNormal::trivial(isotropy.len()));
    }
    // N = W ∩ g·m: combinations of W with no component off the orbit
    let wm = w.basis_matrix();
    let off: Vec<Vec<f64>> = w
        .basis
        .iter()
        .map(|v| {
            let p = orbit.project(v);
            v.iter().zip(&p).map(|(a, b)| a - b).collect()
        })
        .collect();
    let off = linalg::columns_to_matrix(&off, n);
    let nvecs: Vec<Vec<f64>> = linalg::nullspace(&off, RANK_TOL, 1.0).iter().map(|c| linalg::mat_vec(&wm, c)).collect();
    let nbasis = linalg::orthonormal_basis(&nvecs, n, 0.5, 1.0);
    let vbasis = orthogonal_within(&nbasis, &w.basis, &DMatrix::identity(n, n), n);
    let d = vbasis.len();
    if d == 0 {
        return Ok(SymplecticNormal::trivial(isotropy.len()));
    }
    let leaf = tensor.leaf_form(m);
    let omega = DMatrix::from_fn(d, d, |a, b| linalg::dot(&vbasis[a], &linalg::mat_vec(&leaf, &vbasis[b])));
    if linalg::smallest_singular_value(&omega) <= RANK_TOL * leaf.norm().max(1.0) {
        return Err(Error::SplittingFailure("symplectic normal space is degenerate".into()));
    }
    let jacobians: Vec<DMatrix<f64>> = action.generators.iter().map(|g| g.jacobian(m)).collect();
    let frame: Vec<Vec<f64>> = vbasis.iter().chain(&nbasis).cloned().collect();
    let frame_pinv = linalg::pseudo_inverse(&linalg::columns_to_matrix(&frame, n));
    let isotropy_action = isotropy
        .iter()
        .map(|zeta| {
            let mut a = DMatrix::zeros(n, n);
            for (j, &c) in jacobians.iter().zip(zeta) {
                a += j * c;
            }
            DMatrix::from_fn(d, d, |i, b| {
                let image = linalg::mat_vec(&a, &vbasis[b]);
                linalg::mat_vec(&frame_pinv, &image)[i]
            })
        })
        .collect();
    Ok(SymplecticNormal { dim: d, basis: vbasis, omega, isotropy_action })
}

/// The splitting `g = h ⊕ m ⊕ q` at `m`: `h` the isotropy algebra,
/// `k_m = ker Σ^♭ = h ⊕ m`, with `m` and `q` orthogonal complements for the
/// `Ad_H`-averaged inner product (`inner`, default Euclidean).
pub fn build_splitting(
    action: &ActionSpec,
    tensor: &PoissonTensor,
    m: &[f64],
    inner: Option<&DMatrix<f64>>,
) -> Result<TubeData> {
    check_dim(tensor.dim(), m.len())?;
    check_dim(tensor.dim(), action.space.dim)?;
    let alg = &action.algebra;
    let n = alg.dim;
    let base = match inner {
        Some(g) => {
            check_dim(n, g.nrows())?;
            check_dim(n, g.ncols())?;
            if (g - g.transpose()).amax() > 1e-12 || g.clone().cholesky().is_none() {
                return Err(Error::InvalidInput("inner product must be symmetric positive definite".into()));
            }
            g.clone()
        }
        None => DMatrix::identity(n, n),
    };
    let (sigma, _) = sigma_at(action, tensor, m)?;
    let isotropy = action.isotropy_algebra(m).basis;
    let gram = averaged_inner_product(alg, &isotropy, &base)?;
    let k = sigma.kernel.clone();
    let m_part = orthogonal_within(&isotropy, &k, &gram, n);
    let q_part = orthogonal_within(&k, &linalg::identity_vectors(n), &gram, n);
    let drift = stability_residual(alg, &isotropy, &m_part).max(stability_residual(alg, &isotropy, &q_part));
    if drift > STABILITY_TOL {
        return Err(Error::SplittingFailure(format!(
            "averaged complements are not Ad_H-invariant (residual {drift:e})"
        )));
    }
    let normal = symplectic_normal(action, tensor, m, &isotropy)?;
    TubeData::from_parts(m.to_vec(), alg.clone(), isotropy, m_part, q_part, &sigma.sigma, normal)
}

/// Hamiltonian field of `h(ρ, v)` in tube coordinates.
#[derive(Clone, Debug, Serialize)]
pub struct ReconstructedField {
    /// Body-frame velocity in `g`, independent of the group coordinate.
    pub group: Vec<f64>,
    /// `ρ̇`, as pairings with the basis of `m`.
    pub coalgebra: Vec<f64>,
    /// `v̇` in the basis of `V_m`.
    pub normal: Vec<f64>,
    /// `ψ(ρ, v) ∈ q`.
    pub psi: Vec<f64>,
    pub tau_iterations: usize,
    pub tau_residual: f64,
}

/// The reconstruction equations for `h` on `m* × V_m` at `(ρ, v)`, with `ρ`
/// given by its pairings with the basis of `m`.
pub fn reconstruction_field(
    tube: &TubeData,
    h: &ScalarField,
    rho: &[f64],
    v: &[f64],
    tol: f64,
) -> Result<ReconstructedField> {
    let (nm, nv, nh) = (tube.m_part.len(), tube.normal.dim, tube.isotropy.len());
    check_dim(nm, rho.len())?;
    check_dim(nv, v.len())?;
    check_dim(nm + nv, h.dim)?;
    if linalg::norm(rho) >= tube.radius || linalg::norm(v) >= tube.radius {
        return Err(Error::InvalidInput(format!(
            "(ρ, v) = ({rho:?}, {v:?}) lies outside the tube of radius {}",
            tube.radius
        )));
    }
    let alg = &tube.algebra;
    let n = alg.dim;
    let z: Vec<f64> = rho.iter().chain(v).copied().collect();
    let grad = h.gradient(&z)?;
    let (d_rho, d_v) = grad.split_at(nm);
    let rho_hat = tube.covector(&vec![0.0; nh], rho);

    // H-invariance of h at (ρ, v)
    let scale = 1.0 + linalg::norm(&grad) * (1.0 + linalg::norm(&z));
    for (zeta, a) in tube.isotropy.iter().zip(&tube.normal.isotropy_action) {
        let mut drift = linalg::dot(d_v, &linalg::mat_vec(a, v));
        for (b, mb) in tube.m_part.iter().enumerate() {
            drift -= d_rho[b] * linalg::dot(&rho_hat, &alg.bracket(zeta, mb));
        }
        if drift.abs() > 1e-8 * scale {
            return Err(Error::HypothesisViolation(format!(
                "h is not H-invariant at ({rho:?}, {v:?}) (drift {drift:e})"
            )));
        }
    }

    let d = combine(&tube.m_part, d_rho, n);
    let j = tube.normal.momentum(v);
    let j_hat = tube.covector(&j, &vec![0.0; nm]);
    let lambda: Vec<f64> = rho_hat.iter().zip(&j_hat).map(|(a, b)| a + b).collect();
    let tau = solve_tau(tube, &d, &lambda, tol)?;
    let psi = tau.vector.clone();
    let group: Vec<f64> = psi.iter().zip(&d).map(|(a, b)| a + b).collect();

    let mut total = alg.coad(&d, &rho_hat);
    for (t, x) in total.iter_mut().zip(alg.coad(&d, &j_hat)) {
        *t += x;
    }
    for (t, x) in total.iter_mut().zip(alg.coad(&psi, &lambda)) {
        *t += x;
    }
    let coalgebra = tube.m_part.iter().map(|mb| linalg::dot(&total, mb)).collect();

    let normal = linalg::mat_vec(&tube.normal.poisson()?, d_v);
    Ok(ReconstructedField { group, coalgebra, normal, psi, tau_iterations: tau.iterations, tau_residual: tau.residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use crate::geometry::{PhaseSpace, VectorField};
    use std::sync::Arc;

    #[test]
    fn t2_rotation_has_no_q() {
        let sys = builtin("t2-rotation").unwrap();
        let tube = build_splitting(&sys.action, &sys.tensor, &[0.4, 2.0], None).unwrap();
        assert!(tube.isotropy.is_empty());
        assert_eq!(tube.m_part, vec![vec![1.0]]);
        assert!(tube.q_part.is_empty());
        assert_eq!(tube.pairing.shape(), (0, 0));
        assert_eq!(tube.normal.dim, 0);
    }

    #[test]
    fn plane_translations_put_everything_in_q() {
        let sys = builtin("r2-translations").unwrap();
        let tube = build_splitting(&sys.action, &sys.tensor, &[0.3, -1.0], None).unwrap();
        assert_eq!(tube.k_dim(), 0);
        assert_eq!(tube.q_part.len(), 2);
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((&tube.pairing - expected).amax() < 1e-14);
    }

    #[test]
    fn so3_pole_splits_off_the_axis() {
        let sys = builtin("so3-coadjoint").unwrap();
        let tube = build_splitting(&sys.action, &sys.tensor, &[0.0, 0.0, 1.0], None).unwrap();
        assert_eq!(tube.isotropy.len(), 1);
        assert!((tube.isotropy[0][2] - 1.0).abs() < 1e-12);
        assert!(tube.m_part.is_empty());
        assert_eq!(tube.q_part.len(), 2);
        for q in &tube.q_part {
            assert!(q[2].abs() < 1e-12);
        }
        assert!(tube.pairing.determinant().abs() > 0.5);
        assert_eq!(tube.normal.dim, 0);
    }

    #[test]
    fn nonabelian_isotropy_is_refused() {
        let sys = builtin("so3-coadjoint").unwrap();
        let err = build_splitting(&sys.action, &sys.tensor, &[0.0, 0.0, 0.0], None).unwrap_err();
        assert!(matches!(err, Error::UnsupportedIsotropy(_)), "{err}");
    }

    /// The circle rotating the plane about its fixed origin.
    fn plane_rotation() -> (ActionSpec, PoissonTensor) {
        let space = Arc::new(PhaseSpace::euclidean("R2", 2).unwrap());
        let omega = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let tensor = PoissonTensor::from_symplectic(space.clone(), "dx^dy", omega).unwrap();
        let gen = VectorField::from_dual(space.clone(), "rotation", |z| vec![-z[1], z[0]]);
        let action =
            ActionSpec::new("rotation", LieAlgebra::abelian(1).unwrap(), space, vec![gen]).unwrap().compact(true);
        (action, tensor)
    }

    #[test]
    fn fixed_point_has_full_normal_space() {
        let (action, tensor) = plane_rotation();
        let tube = build_splitting(&action, &tensor, &[0.0, 0.0], None).unwrap();
        assert_eq!(tube.isotropy.len(), 1);
        assert_eq!(tube.normal.dim, 2);
        // J_V(v) = −|v|²/2 up to the sign of the isotropy basis vector
        let sign = tube.isotropy[0][0];
        for v in [[0.3, 0.1], [-0.2, 0.5]] {
            let j = tube.normal.momentum(&v)[0];
            assert!((j + sign * 0.5 * (v[0] * v[0] + v[1] * v[1])).abs() < 1e-12);
            // equivariance under the isotropy circle
            let a = &tube.normal.isotropy_action[0];
            for t in [0.3, 1.7, 4.0] {
                let g = crate::lie::group::expm(&(a * t));
                let gv = linalg::mat_vec(&g, &v);
                assert!((tube.normal.momentum(&gv)[0] - j).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tau_vanishes_at_the_origin_and_without_q() {
        let sys = builtin("so3-coadjoint").unwrap();
        let tube = build_splitting(&sys.action, &sys.tensor, &[0.0, 0.0, 1.0], None).unwrap();
        let s = solve_tau(&tube, &[0.0; 3], &[0.0; 3], TAU_TOL).unwrap();
        assert_eq!(s.tau, vec![0.0, 0.0]);
        let sys = builtin("t2-rotation").unwrap();
        let tube = build_splitting(&sys.action, &sys.tensor, &[0.0, 0.0], None).unwrap();
        let s = solve_tau(&tube, &[0.7], &[-0.2], TAU_TOL).unwrap();
        assert!(s.tau.is_empty());
        assert_eq!(s.vector, vec![0.0]);
    }

    #[test]
    fn tau_rejects_arguments_outside_k() {
        let sys = builtin("so3-coadjoint").unwrap();
        let tube = build_splitting(&sys.action, &sys.tensor, &[0.0, 0.0, 1.0], None).unwrap();
        assert!(matches!(solve_tau(&tube, &[1.0, 0.0, 0.0], &[0.0; 3], TAU_TOL), Err(Error::InvalidInput(_))));
        assert!(matches!(solve_tau(&tube, &[0.0; 3], &[0.0, 1.0, 0.0], TAU_TOL), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn constant_hamiltonian_reconstructs_to_zero() {
        let sys = builtin("t2-rotation").unwrap();
        let tube = build_splitting(&sys.action, &sys.tensor, &[0.0, 0.0], None).unwrap();
        let h = ScalarField::constant(1, 3.0);
        let r = reconstruction_field(&tube, &h, &[0.2], &[], TAU_TOL).unwrap();
        assert_eq!(r.group, vec![0.0]);
        assert_eq!(r.coalgebra, vec![0.0]);
        assert!(r.normal.is_empty());
    }

    #[test]
    fn points_outside_the_tube_are_rejected() {
        let sys = builtin("t2-rotation").unwrap();
        let tube = build_splitting(&sys.action, &sys.tensor, &[0.0, 0.0], None).unwrap();
        let h = ScalarField::coordinate(1, 0);
        assert!(reconstruction_field(&tube, &h, &[1.5], &[], TAU_TOL).is_err());
    }

    #[test]
    fn non_invariant_hamiltonian_is_flagged() {
        let (action, tensor) = plane_rotation();
        let tube = build_splitting(&action, &tensor, &[0.0, 0.0], None).unwrap();
        // m is trivial here, so h lives on V_m alone
        let h = ScalarField::coordinate(2, 0);
        let err = reconstruction_field(&tube, &h, &[], &[0.1, 0.2], TAU_TOL).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolation(_)));
        let r2 = ScalarField::closed(2, "|v|^2", |v| v[0] * v[0] + v[1] * v[1]);
        let r = reconstruction_field(&tube, &r2, &[], &[0.1, 0.2], TAU_TOL).unwrap();
        assert!(r.normal.iter().all(|x| x.is_finite()));
    }
}
