use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};

/// `(i, j, terms)` with `[e_i, e_j] = Σ coef e_k` over `(k, coef)` in `terms`.
pub type BracketEntry<'a> = (usize, usize, &'a [(usize, f64)]);

/// A finite-dimensional real Lie algebra given by structure constants
/// `[e_i, e_j] = Σ_k c^k_{ij} e_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LieAlgebra {
    pub name: String,
    pub dim: usize,
    pub labels: Vec<String>,
    /// `c[(k * dim + i) * dim + j] = c^k_{ij}`.
    constants: Vec<f64>,
}

pub const JACOBI_TOL: f64 = 1e-12;

impl LieAlgebra {
    /// Validates antisymmetry (exact) and the Jacobi identity.
    pub fn new(name: impl Into<String>, labels: Vec<String>, constants: Vec<f64>) -> Result<Self> {
        let dim = labels.len();
        if dim == 0 {
            return Err(Error::InvalidAlgebra("dimension must be at least 1".into()));
        }
        check_dim(dim * dim * dim, constants.len())?;
        if constants.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidAlgebra("non-finite structure constant".into()));
        }
        let alg = Self { name: name.into(), dim, labels, constants };
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    if alg.c(k, i, j) != -alg.c(k, j, i) {
                        return Err(Error::InvalidAlgebra(format!("c^{k}_({i},{j}) is not antisymmetric")));
                    }
                }
            }
        }
        let r = alg.jacobi_residual();
        if r > JACOBI_TOL {
            return Err(Error::InvalidAlgebra(format!("Jacobi identity fails by {r:e}")));
        }
        Ok(alg)
    }

    /// Builds an algebra from its nonzero brackets `[e_i, e_j] = Σ coef e_k`,
    /// listed once per unordered pair.
    pub fn from_brackets(name: impl Into<String>, labels: &[&str], brackets: &[BracketEntry<'_>]) -> Result<Self> {
        let dim = labels.len();
        let mut c = vec![0.0; dim * dim * dim];
        for &(i, j, terms) in brackets {
            if i >= dim || j >= dim {
                return Err(Error::InvalidAlgebra(format!("bracket index ({i},{j}) out of range")));
            }
            for &(k, v) in terms {
                if k >= dim {
                    return Err(Error::InvalidAlgebra(format!("bracket target {k} out of range")));
                }
                c[(k * dim + i) * dim + j] += v;
                c[(k * dim + j) * dim + i] -= v;
            }
        }
        Self::new(name, labels.iter().map(|s| s.to_string()).collect(), c)
    }

    pub fn abelian(dim: usize) -> Result<Self> {
        let labels: Vec<String> = (1..=dim).map(|i| format!("e{i}")).collect();
        Self::new(format!("abelian({dim})"), labels, vec![0.0; dim * dim * dim])
    }

    /// `[e1,e2] = e3`, `[e2,e3] = e1`, `[e3,e1] = e2`.
    pub fn so3() -> Self {
        Self::from_brackets(
            "so(3)",
            &["e1", "e2", "e3"],
            &[(0, 1, &[(2, 1.0)]), (1, 2, &[(0, 1.0)]), (2, 0, &[(1, 1.0)])],
        )
        .expect("so(3) constants are valid")
    }

    /// Basis `(J, P1, P2)`: `[J,P1] = P2`, `[J,P2] = -P1`, `[P1,P2] = 0`.
    pub fn se2() -> Self {
        Self::from_brackets("se(2)", &["J", "P1", "P2"], &[(0, 1, &[(2, 1.0)]), (0, 2, &[(1, -1.0)])])
            .expect("se(2) constants are valid")
    }

    /// Basis `(X, Y, Z)`: `[X,Y] = Z`, `Z` central.
    pub fn heisenberg() -> Self {
        Self::from_brackets("heisenberg(3)", &["X", "Y", "Z"], &[(0, 1, &[(2, 1.0)])])
            .expect("Heisenberg constants are valid")
    }

    /// `c^k_{ij}`.
    #[inline]
    pub fn c(&self, k: usize, i: usize, j: usize) -> f64 {
        self.constants[(k * self.dim + i) * self.dim + j]
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn is_abelian(&self) -> bool {
        self.constants.iter().all(|&c| c == 0.0)
    }

    /// Largest `|Σ_m c^m_{ij} c^l_{mk} + c^m_{jk} c^l_{mi} + c^m_{ki} c^l_{mj}|`.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s: f64 = (0..n)
                            .map(|m| {
                                self.c(m, i, j) * self.c(l, m, k)
                                    + self.c(m, j, k) * self.c(l, m, i)
                                    + self.c(m, k, i) * self.c(l, m, j)
                            })
                            .sum();
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// `[ξ, η]^k = Σ c^k_{ij} ξ^i η^j`.
    pub fn bracket(&self, xi: &[f64], eta: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    if xi[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        s += self.c(k, i, j) * xi[i] * eta[j];
                    }
                }
                s
            })
            .collect()
    }

    /// Matrix of `ad_ξ`: `(ad_ξ)_{kj} = Σ_i c^k_{ij} ξ^i`.
    pub fn ad_matrix(&self, xi: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |k, j| (0..n).map(|i| self.c(k, i, j) * xi[i]).sum())
    }

    /// `ad*_ξ μ`, defined by `⟨ad*_ξ μ, η⟩ = ⟨μ, [ξ, η]⟩`.
    pub fn coad(&self, xi: &[f64], mu: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|j| {
                let mut s = 0.0;
                for k in 0..n {
                    if mu[k] == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        s += self.c(k, i, j) * xi[i] * mu[k];
                    }
                }
                s
            })
            .collect()
    }

    /// Structure-constant contraction `B_{jk}(μ) = Σ_i c^i_{jk} μ_i`.
    pub fn lie_poisson_matrix(&self, mu: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |j, k| (0..n).map(|i| self.c(i, j, k) * mu[i]).sum())
    }

    /// Whether `span(basis)` is closed under the bracket (least-squares
    /// residual below `tol`).
    pub fn is_subalgebra(&self, basis: &[Vec<f64>], tol: f64) -> bool {
        let proj = |v: &[f64]| -> Vec<f64> {
            let q = crate::linalg::orthonormal_basis(basis, self.dim, crate::linalg::RANK_TOL, 0.0);
            let mut out = vec![0.0; self.dim];
            for b in &q {
                let c = crate::linalg::dot(b, v);
                for (o, bi) in out.iter_mut().zip(b) {
                    *o += c * bi;
                }
            }
            out
        };
        for a in basis {
            for b in basis {
                let br = self.bracket(a, b);
                let p = proj(&br);
                let r: f64 = br.iter().zip(&p).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                if r > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Whether all brackets among `basis` vanish (to `tol`).
    pub fn is_abelian_span(&self, basis: &[Vec<f64>], tol: f64) -> bool {
        basis.iter().all(|a| basis.iter().all(|b| self.bracket(a, b).iter().all(|x| x.abs() <= tol)))
    }
}
