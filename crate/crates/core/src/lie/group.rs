use nalgebra::{DMatrix, DVector};

use super::algebra::LieAlgebra;
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// How group elements are represented.
#[derive(Clone, Debug)]
pub enum GroupRepr {
    /// A faithful matrix representation: `E_i` realise the basis `e_i`.
    Matrix { basis: Vec<DMatrix<f64>> },
    /// Elements stored through their adjoint action, `Ad_{exp ξ} = exp(ad_ξ)`.
    Adjoint,
}

#[derive(Clone, Debug)]
pub struct GroupModel {
    pub algebra: LieAlgebra,
    pub repr: GroupRepr,
    /// Pseudo-inverse of the vectorised basis, for reading algebra
    /// coordinates off a matrix.
    decompose: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    pub matrix: DMatrix<f64>,
}

fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Matrix exponential: Rodrigues for 3×3 antisymmetric input, otherwise
/// scaling and squaring with a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 3 && (a + a.transpose()).amax() == 0.0 {
        return rodrigues(a);
    }
    let norm = a.amax() * n as f64;
    let mut s = 0;
    if norm > 0.5 {
        s = (norm / 0.5).log2().ceil() as i32;
    }
    let scaled = a / 2f64.powi(s);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn rodrigues(a: &DMatrix<f64>) -> DMatrix<f64> {
    // a = [w]_x with w = (a21, a02, a10)
    let w = [a[(2, 1)], a[(0, 2)], a[(1, 0)]];
    let theta = linalg::norm(&w);
    let id = DMatrix::<f64>::identity(3, 3);
    if theta < 1e-12 {
        return id + a + a * a * 0.5;
    }
    let s = theta.sin() / theta;
    let c = (1.0 - theta.cos()) / (theta * theta);
    id + a * s + a * a * c
}

impl GroupModel {
    /// Validates `[E_i, E_j] = Σ c^k_{ij} E_k`.
    pub fn matrix(algebra: LieAlgebra, basis: Vec<DMatrix<f64>>) -> Result<Self> {
        check_dim(algebra.dim, basis.len())?;
        let n = basis[0].nrows();
        if basis.iter().any(|e| e.nrows() != n || e.ncols() != n) {
            return Err(Error::Representation("basis matrices must share one square shape".into()));
        }
        for i in 0..algebra.dim {
            for j in 0..algebra.dim {
                let lhs = commutator(&basis[i], &basis[j]);
                let mut rhs = DMatrix::zeros(n, n);
                for (k, e) in basis.iter().enumerate() {
                    rhs += e * algebra.c(k, i, j);
                }
                let err = (lhs - rhs).amax();
                if err > 1e-12 {
                    return Err(Error::Representation(format!("basis matrices violate [e{i}, e{j}] by {err:e}")));
                }
            }
        }
        let stacked = DMatrix::from_fn(n * n, algebra.dim, |r, c| basis[c][(r % n, r / n)]);
        let decompose = crate::linalg::pseudo_inverse_with(&stacked, 1e-12);
        if (&decompose * &stacked - DMatrix::<f64>::identity(algebra.dim, algebra.dim)).amax() > 1e-9 {
            return Err(Error::Representation("basis matrices are linearly dependent".into()));
        }
        Ok(Self { algebra, repr: GroupRepr::Matrix { basis }, decompose: Some(decompose) })
    }

    pub fn adjoint(algebra: LieAlgebra) -> Self {
        Self { algebra, repr: GroupRepr::Adjoint, decompose: None }
    }

    /// `SO(3)` by its defining representation (`E_i` the cross-product
    /// matrices), realising `[e1, e2] = e3`.
    pub fn so3() -> Self {
        let alg = LieAlgebra::so3();
        let basis = (0..3).map(|i| alg.ad_matrix(&linalg::identity_vectors(3)[i])).collect();
        Self::matrix(alg, basis).expect("so(3) adjoint matrices close")
    }

    /// Translations of the plane as affine 3×3 matrices.
    pub fn r2_translations() -> Self {
        let mut e1 = DMatrix::zeros(3, 3);
        e1[(0, 2)] = 1.0;
        let mut e2 = DMatrix::zeros(3, 3);
        e2[(1, 2)] = 1.0;
        Self::matrix(LieAlgebra::abelian(2).expect("dimension 2"), vec![e1, e2]).expect("translations commute")
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim
    }

    fn size(&self) -> usize {
        match &self.repr {
            GroupRepr::Matrix { basis } => basis[0].nrows(),
            GroupRepr::Adjoint => self.algebra.dim,
        }
    }

    pub fn identity(&self) -> GroupElement {
        let n = self.size();
        GroupElement { matrix: DMatrix::identity(n, n) }
    }

    /// The algebra element as a matrix in this representation.
    pub fn algebra_matrix(&self, xi: &[f64]) -> DMatrix<f64> {
        match &self.repr {
            GroupRepr::Matrix { basis } => {
                let n = basis[0].nrows();
                let mut m = DMatrix::zeros(n, n);
                for (e, &x) in basis.iter().zip(xi) {
                    m += e * x;
                }
                m
            }
            GroupRepr::Adjoint => self.algebra.ad_matrix(xi),
        }
    }

    /// Algebra coordinates of a matrix in the span of the basis.
    pub fn coordinates(&self, m: &DMatrix<f64>) -> Vec<f64> {
        match &self.decompose {
            Some(d) => {
                let v = DVector::from_iterator(m.len(), m.iter().copied());
                (d * v).iter().copied().collect()
            }
            None => Vec::new(),
        }
    }

    pub fn exp(&self, xi: &[f64]) -> GroupElement {
        GroupElement { matrix: expm(&self.algebra_matrix(xi)) }
    }

    pub fn mul(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        GroupElement { matrix: &g.matrix * &h.matrix }
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        g.matrix
            .clone()
            .try_inverse()
            .map(|matrix| GroupElement { matrix })
            .ok_or_else(|| Error::NumericDomain("singular group element".into()))
    }

    /// Matrix of `Ad_g` on the algebra.
    pub fn ad(&self, g: &GroupElement) -> Result<DMatrix<f64>> {
        match &self.repr {
            GroupRepr::Adjoint => Ok(g.matrix.clone()),
            GroupRepr::Matrix { basis } => {
                let inv = self.inverse(g)?;
                let d = self.dim();
                let mut out = DMatrix::zeros(d, d);
                for (j, e) in basis.iter().enumerate() {
                    let conj = &g.matrix * e * &inv.matrix;
                    for (i, c) in self.coordinates(&conj).into_iter().enumerate() {
                        out[(i, j)] = c;
                    }
                }
                Ok(out)
            }
        }
    }

    /// `Ad*_g = (Ad_g)ᵀ`, so that `⟨Ad*_g μ, ξ⟩ = ⟨μ, Ad_g ξ⟩`.
    pub fn coad(&self, g: &GroupElement, mu: &[f64]) -> Result<Vec<f64>> {
        let a = self.ad(g)?;
        Ok(linalg::mat_vec(&a.transpose(), mu))
    }
}

/// `J_θ(g, ν) = Ad*_{g⁻¹} ν − θ(g)`.
pub fn momentum_with_cocycle(
    model: &GroupModel,
    theta: &dyn Fn(&GroupElement) -> Vec<f64>,
    g: &GroupElement,
    nu: &[f64],
) -> Result<Vec<f64>> {
    check_dim(model.dim(), nu.len())?;
    let ginv = model.inverse(g)?;
    let a = model.coad(&ginv, nu)?;
    let th = theta(g);
    check_dim(model.dim(), th.len())?;
    Ok(a.iter().zip(&th).map(|(x, t)| x - t).collect())
}

/// `T_eθ` by central differences along `exp(±h e_i)`; column `i` is
/// `dθ/dt (exp t e_i)` at `t = 0`.
pub fn cocycle_derivative(model: &GroupModel, theta: &dyn Fn(&GroupElement) -> Vec<f64>, h: f64) -> DMatrix<f64> {
    let d = model.dim();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = h;
        let plus = theta(&model.exp(&e));
        e[i] = -h;
        let minus = theta(&model.exp(&e));
        for k in 0..d {
            out[(k, i)] = (plus[k] - minus[k]) / (2.0 * h);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rodrigues_matches_series() {
        let so3 = LieAlgebra::so3();
        let a = so3.ad_matrix(&[0.3, -0.5, 0.8]);
        let r = rodrigues(&a);
        let mut term = DMatrix::<f64>::identity(3, 3);
        let mut series = term.clone();
        for k in 1..40 {
            term = &term * &a / k as f64;
            series += &term;
        }
        assert!((r - series).amax() < 1e-14);
    }

    #[test]
    fn adjoint_of_exponential_is_exponential_of_ad() {
        let model = GroupModel::so3();
        let xi = [0.2, 0.5, -0.6];
        let lhs = model.ad(&model.exp(&xi)).unwrap();
        let rhs = expm(&model.algebra.ad_matrix(&xi));
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn rejects_non_representation() {
        let so3 = LieAlgebra::so3();
        let basis = vec![DMatrix::identity(2, 2); 3];
        assert!(GroupModel::matrix(so3, basis).is_err());
    }

    #[test]
    fn equivariant_momentum_without_cocycle() {
        let model = GroupModel::so3();
        let zero = |_: &GroupElement| vec![0.0; 3];
        let g = model.exp(&[0.1, 0.7, -0.2]);
        let h = model.exp(&[-0.4, 0.3, 0.9]);
        let nu = [0.5, -1.0, 2.0];
        let e = model.identity();
        for (a, b) in momentum_with_cocycle(&model, &zero, &e, &nu).unwrap().iter().zip(&nu) {
            assert!((a - b).abs() < 1e-14);
        }
        let gh = model.mul(&g, &h);
        let lhs = momentum_with_cocycle(&model, &zero, &gh, &nu).unwrap();
        let inner = momentum_with_cocycle(&model, &zero, &h, &nu).unwrap();
        let rhs = momentum_with_cocycle(&model, &zero, &g, &inner).unwrap();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
