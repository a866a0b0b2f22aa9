//! Poisson tensors, brackets, Hamiltonian vector fields, annihilators and
//! symplectic orthogonals.
//!
//! Convention: `X_f = B·df` and `{f, g} = df·B·dg`, so that
//! `d/dt f(F_t(m)) = {f, g}(F_t(m))` along the flow `F_t` of `X_g`. For a
//! symplectic form with matrix `Ω` this means `B = −Ω⁻¹`, i.e.
//! `i_{X_f} ω = df`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::geometry::field::MatFn;
use crate::geometry::{flow, PhaseSpace, ScalarField, Table, TableKind, VectorField};
use crate::lie::LieAlgebra;
use crate::linalg::{self, SubspaceSample, RANK_TOL};

#[derive(Clone)]
pub enum TensorKind {
    /// Constant `B`, typically the negative inverse of a symplectic matrix.
    Constant(DMatrix<f64>),
    /// `B_{jk}(μ) = Σ_i c^i_{jk} μ_i` on the dual of a Lie algebra.
    LiePoisson(LieAlgebra),
    /// Entries given by coefficient tables, row-major.
    Tables(Vec<Table>),
    /// Arbitrary evaluator; derivatives by central differences.
    Custom(MatFn),
}

#[derive(Clone)]
pub struct PoissonTensor {
    pub space: Arc<PhaseSpace>,
    pub label: String,
    pub kind: TensorKind,
}

impl std::fmt::Debug for PoissonTensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PoissonTensor({} on {})", self.label, self.space.name)
    }
}

const ANTISYMMETRY_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-5;

fn check_antisymmetric(b: &DMatrix<f64>) -> Result<()> {
    let r = (b + b.transpose()).amax();
    if r > ANTISYMMETRY_TOL {
        return Err(Error::InvalidInput(format!("Poisson tensor is not antisymmetric (residual {r:e})")));
    }
    Ok(())
}

/// Relation of a subspace to its symplectic orthogonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Isotropy {
    Lagrangian,
    Isotropic,
    Coisotropic,
    Symplectic,
    Mixed,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsotropyReport {
    pub class: Isotropy,
    pub isotropic: bool,
    pub coisotropic: bool,
    pub symplectic: bool,
    pub rank: usize,
    pub orthogonal_rank: usize,
}

impl IsotropyReport {
    pub fn is_coisotropic(&self) -> bool {
        self.coisotropic
    }
}

/// Principal-angle tolerance for subspace containment.
pub const CONTAINMENT_TOL: f64 = 1e-8;

impl PoissonTensor {
    pub fn constant(space: Arc<PhaseSpace>, label: impl Into<String>, b: DMatrix<f64>) -> Result<Self> {
        check_dim(space.dim, b.nrows())?;
        check_dim(space.dim, b.ncols())?;
        check_antisymmetric(&b)?;
        Ok(Self { space, label: label.into(), kind: TensorKind::Constant(b) })
    }

    /// `B = −Ω⁻¹` for a constant symplectic matrix `Ω_{ij} = ω(∂_i, ∂_j)`.
    pub fn from_symplectic(space: Arc<PhaseSpace>, label: impl Into<String>, omega: DMatrix<f64>) -> Result<Self> {
        check_antisymmetric(&omega)?;
        let inv =
            omega.clone().try_inverse().ok_or_else(|| Error::InvalidInput("symplectic matrix is degenerate".into()))?;
        let b = -inv;
        Self::constant(space, label, (&b - b.transpose()) * 0.5)
    }

    /// Lie–Poisson tensor on `g*` (chart coordinates `μ_1, …, μ_n`).
    pub fn lie_poisson(alg: &LieAlgebra) -> Result<Self> {
        let r = alg.jacobi_residual();
        if r > crate::lie::algebra::JACOBI_TOL {
            return Err(Error::InvalidAlgebra(format!("Jacobi identity fails by {r:e}")));
        }
        let coords = (1..=alg.dim).map(|i| format!("mu{i}")).collect();
        let space = PhaseSpace::with_coordinates(format!("{}*", alg.name), vec![false; alg.dim], coords)?;
        Ok(Self {
            space: Arc::new(space),
            label: format!("Lie-Poisson on {}*", alg.name),
            kind: TensorKind::LiePoisson(alg.clone()),
        })
    }

    pub fn from_tables(space: Arc<PhaseSpace>, label: impl Into<String>, tables: Vec<Table>) -> Result<Self> {
        let n = space.dim;
        check_dim(n * n, tables.len())?;
        for i in 0..n {
            for j in 0..n {
                let s = tables[i * n + j].add(&tables[j * n + i])?.pruned(ANTISYMMETRY_TOL);
                if !s.is_zero() {
                    return Err(Error::InvalidInput(format!("tensor tables not antisymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { space, label: label.into(), kind: TensorKind::Tables(tables) })
    }

    pub fn custom(
        space: Arc<PhaseSpace>,
        label: impl Into<String>,
        f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { space, label: label.into(), kind: TensorKind::Custom(Arc::new(f)) }
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn kind_tag(&self) -> &'static str {
        match self.kind {
            TensorKind::Constant(_) => "constant",
            TensorKind::LiePoisson(_) => "lie-poisson",
            TensorKind::Tables(_) => "tables",
            TensorKind::Custom(_) => "custom",
        }
    }

    pub fn matrix(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        match &self.kind {
            TensorKind::Constant(b) => b.clone(),
            TensorKind::LiePoisson(alg) => alg.lie_poisson_matrix(z),
            TensorKind::Tables(t) => DMatrix::from_fn(n, n, |i, j| t[i * n + j].eval(z)),
            TensorKind::Custom(f) => f(z),
        }
    }

    /// `∂B/∂z_k`.
    pub fn derivative(&self, z: &[f64], k: usize) -> DMatrix<f64> {
        let n = self.dim();
        match &self.kind {
            TensorKind::Constant(_) => DMatrix::zeros(n, n),
            TensorKind::LiePoisson(alg) => DMatrix::from_fn(n, n, |i, j| alg.c(k, i, j)),
            TensorKind::Tables(t) => DMatrix::from_fn(n, n, |i, j| t[i * n + j].derivative(k).eval(z)),
            TensorKind::Custom(f) => {
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[k] += FD_STEP;
                zm[k] -= FD_STEP;
                (f(&zp) - f(&zm)) / (2.0 * FD_STEP)
            }
        }
    }

    /// `B♯(z) α`.
    pub fn sharp(&self, z: &[f64], alpha: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), z.len())?;
        check_dim(self.dim(), alpha.len())?;
        let v = linalg::mat_vec(&self.matrix(z), alpha);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericDomain(format!("sharp map of {} at {z:?}", self.label)));
        }
        Ok(v)
    }

    /// `{f, g}(z) = df·B·dg`.
    pub fn bracket(&self, f: &ScalarField, g: &ScalarField, z: &[f64]) -> Result<f64> {
        let df = f.gradient(z)?;
        let dg = g.gradient(z)?;
        Ok(linalg::dot(&df, &self.sharp(z, &dg)?))
    }

    /// Coefficient tables of `X_f` when `f` is a table and `B` is polynomial
    /// in the same table family.
    fn hamiltonian_tables(&self, f: &Table) -> Option<Vec<Table>> {
        let n = self.dim();
        let grads: Vec<Table> = (0..n).map(|j| f.derivative(j)).collect();
        let entry = |i: usize, j: usize| -> Option<Table> {
            match &self.kind {
                TensorKind::Constant(b) => Some(Table::constant(f.kind(), n, b[(i, j)])),
                TensorKind::LiePoisson(alg) if f.kind() == TableKind::Poly => {
                    let mut p = crate::geometry::Poly::zero(n);
                    for k in 0..n {
                        let c = alg.c(k, i, j);
                        if c != 0.0 {
                            p = p.add(&crate::geometry::Poly::coordinate(n, k).scale(c));
                        }
                    }
                    Some(Table::Poly(p))
                }
                TensorKind::Tables(t) if t[i * n + j].kind() == f.kind() => Some(t[i * n + j].clone()),
                _ => None,
            }
        };
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = Table::zero(f.kind(), n);
            for (j, g) in grads.iter().enumerate() {
                if g.is_zero() {
                    continue;
                }
                let b = entry(i, j)?;
                if b.is_zero() {
                    continue;
                }
                acc = acc.add(&b.mul(g).ok()?).ok()?;
            }
            out.push(acc.pruned(0.0));
        }
        Some(out)
    }

    /// `X_f = B♯(df)`.
    pub fn hamiltonian_field(&self, f: &ScalarField) -> Result<VectorField> {
        check_dim(self.dim(), f.dim)?;
        let label = format!("X[{}]", f.label);
        if let Some(t) = f.table() {
            if let Some(tables) = self.hamiltonian_tables(t) {
                return VectorField::from_tables(self.space.clone(), label, tables);
            }
        }
        let (b1, f1) = (self.clone(), f.clone());
        let (b2, f2) = (self.clone(), f.clone());
        let n = self.dim();
        Ok(VectorField::from_fn_with_jacobian(
            self.space.clone(),
            label,
            move |z| {
                let g = f1.gradient(z).unwrap_or_else(|_| vec![f64::NAN; n]);
                linalg::mat_vec(&b1.matrix(z), &g)
            },
            move |z| {
                let g = f2.gradient(z).unwrap_or_else(|_| vec![f64::NAN; n]);
                let h = f2.hessian(z).unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN));
                let mut j = b2.matrix(z) * h;
                for k in 0..n {
                    let col = linalg::mat_vec(&b2.derivative(z, k), &g);
                    for i in 0..n {
                        j[(i, k)] += col[i];
                    }
                }
                j
            },
        ))
    }

    /// Largest cyclic sum `Σ_l ∂_l B_{ij} B_{lk} + ∂_l B_{jk} B_{li} + ∂_l B_{ki} B_{lj}`,
    /// the Jacobi identity on coordinate functions.
    pub fn jacobi_residual(&self, z: &[f64]) -> f64 {
        let n = self.dim();
        if matches!(self.kind, TensorKind::Constant(_)) {
            return 0.0;
        }
        let b = self.matrix(z);
        let d: Vec<DMatrix<f64>> = (0..n).map(|l| self.derivative(z, l)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s: f64 = (0..n)
                        .map(|l| d[l][(i, j)] * b[(l, k)] + d[l][(j, k)] * b[(l, i)] + d[l][(k, i)] * b[(l, j)])
                        .sum();
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }

    pub fn antisymmetry_residual(&self, z: &[f64]) -> f64 {
        let b = self.matrix(z);
        (&b + b.transpose()).amax()
    }

    pub fn rank(&self, z: &[f64]) -> usize {
        let b = self.matrix(z);
        let s = linalg::singular_values(&b);
        let smax = s.first().copied().unwrap_or(0.0);
        s.iter().filter(|&&x| x > RANK_TOL * smax && x > 0.0).count()
    }

    pub fn is_nondegenerate(&self, z: &[f64]) -> bool {
        self.rank(z) == self.dim()
    }

    /// Matrix `W` of the leaf symplectic form, `ω(u, v) = uᵀ W v` for
    /// `u, v` in the image of `B`; `W = −B⁻¹` when `B` is invertible.
    pub fn leaf_form(&self, z: &[f64]) -> DMatrix<f64> {
        let b = self.matrix(z);
        let p = linalg::pseudo_inverse(&b);
        p.transpose() * &b * &p
    }

    /// `ω(u, v)` with the leaf form.
    pub fn omega(&self, z: &[f64], u: &[f64], v: &[f64]) -> f64 {
        linalg::dot(u, &linalg::mat_vec(&self.leaf_form(z), v))
    }

    /// Natural size of `B` at `z`, used to scale rank thresholds.
    pub fn scale(&self, z: &[f64]) -> f64 {
        self.matrix(z).norm()
    }

    /// `S° = {α : α·v = 0 for v ∈ S}`.
    pub fn annihilator(s: &SubspaceSample) -> SubspaceSample {
        let basis = linalg::complement_basis(&s.basis, s.dim);
        SubspaceSample::from_basis(&s.base_point, s.dim, basis, s.tolerance)
    }

    /// `S^ω = B♯(S°)`; for degenerate `B` this is the characteristic image.
    pub fn symplectic_orthogonal(&self, s: &SubspaceSample) -> Result<SubspaceSample> {
        let z = &s.base_point;
        check_dim(self.dim(), s.dim)?;
        let ann = Self::annihilator(s);
        let b = self.matrix(z);
        let vectors: Vec<Vec<f64>> = ann.basis.iter().map(|a| linalg::mat_vec(&b, a)).collect();
        Ok(SubspaceSample::from_vectors_scaled(z, s.dim, vectors, s.tolerance, b.norm()))
    }

    /// Isotropy class of `S` at its base point; requires `B` nondegenerate.
    pub fn classify_isotropy(&self, s: &SubspaceSample) -> Result<IsotropyReport> {
        if !self.is_nondegenerate(&s.base_point) {
            return Err(Error::NotApplicable(format!(
                "isotropy classes need a nondegenerate tensor; {} has rank {} at {:?}",
                self.label,
                self.rank(&s.base_point),
                s.base_point
            )));
        }
        let orth = self.symplectic_orthogonal(s)?;
        Ok(classify(s, &orth))
    }

    /// Isotropy class of `S ⊆ image(B)` inside the symplectic leaf, using
    /// the leaf form; agrees with [`classify_isotropy`](Self::classify_isotropy)
    /// when `B` is nondegenerate.
    pub fn classify_isotropy_leafwise(&self, s: &SubspaceSample) -> Result<IsotropyReport> {
        let z = &s.base_point;
        let b = self.matrix(z);
        let leaf = SubspaceSample::from_vectors_scaled(z, s.dim, linalg::matrix_columns(&b), RANK_TOL, b.norm());
        if !s.is_contained_in(&leaf, CONTAINMENT_TOL) {
            return Err(Error::NotApplicable("subspace is not tangent to the symplectic leaf".into()));
        }
        // S^ω within the leaf: vectors B·α with α annihilating S.
        let orth = self.symplectic_orthogonal(s)?;
        Ok(classify(s, &orth))
    }

    /// Eq.-of-motion check: `|d/dt f(F_t(m)) − {f, g}(F_t(m))|` along the
    /// flow of `X_g`, the time derivative taken by central differences of
    /// the integrated trajectory. Returns the largest discrepancy over `times`.
    pub fn convention_residual(
        &self,
        f: &ScalarField,
        g: &ScalarField,
        m: &[f64],
        times: &[f64],
        step: f64,
    ) -> Result<f64> {
        let xg = self.hamiltonian_field(g)?;
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for &t in times {
            let z = flow::flow(&xg, m, t, step)?;
            let zp = flow::flow(&xg, &z, h, step)?;
            let zm = flow::flow(&xg, &z, -h, step)?;
            let fd = (f.eval(&zp)? - f.eval(&zm)?) / (2.0 * h);
            worst = worst.max((fd - self.bracket(f, g, &z)?).abs());
        }
        Ok(worst)
    }
}

fn classify(s: &SubspaceSample, orth: &SubspaceSample) -> IsotropyReport {
    let isotropic = s.is_contained_in(orth, CONTAINMENT_TOL);
    let coisotropic = orth.is_contained_in(s, CONTAINMENT_TOL);
    let symplectic = s.intersection_dim(orth) == 0;
    let class = match (isotropic, coisotropic) {
        (true, true) => Isotropy::Lagrangian,
        (true, false) => Isotropy::Isotropic,
        (false, true) => Isotropy::Coisotropic,
        _ if symplectic => Isotropy::Symplectic,
        _ => Isotropy::Mixed,
    };
    IsotropyReport { class, isotropic, coisotropic, symplectic, rank: s.rank, orthogonal_rank: orth.rank }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TrigPoly;

    fn t2() -> PoissonTensor {
        let space = Arc::new(PhaseSpace::torus("T2", 2).unwrap());
        let omega = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        PoissonTensor::from_symplectic(space, "area", omega).unwrap()
    }

    #[test]
    fn sharp_on_torus() {
        let b = t2();
        // i_{X} ω = dθ2 forces X = ∂/∂θ1 for ω = dθ1 ∧ dθ2
        assert_eq!(b.sharp(&[0.0, 0.0], &[0.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(b.sharp(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn sharp_on_so3_dual_matches_the_levi_civita_contraction() {
        let b = PoissonTensor::lie_poisson(&LieAlgebra::so3()).unwrap();
        assert_eq!(b.sharp(&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap(), vec![0.0, -1.0, 0.0]);
        // (B α)_k = Σ ε_{kji} μ_i α_j, i.e. α × μ
        let levi = |a: usize, b: usize, c: usize| -> f64 {
            match (a, b, c) {
                (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
                _ => 0.0,
            }
        };
        let (mu, alpha) = ([0.3, -0.7, 1.1], [0.5, 0.2, -0.9]);
        let got = b.sharp(&mu, &alpha).unwrap();
        for k in 0..3 {
            let want: f64 =
                (0..3).flat_map(|j| (0..3).map(move |i| (i, j))).map(|(i, j)| levi(k, j, i) * mu[i] * alpha[j]).sum();
            assert!((got[k] - want).abs() < 1e-15, "{got:?}");
        }
    }

    #[test]
    fn hamiltonian_field_of_theta2_function() {
        let b = t2();
        let mut p = TrigPoly::cos(vec![0, 1], 1.0);
        p.add_term(vec![0, 2], 0.0, 0.5);
        let f = ScalarField::from_table("g", Table::Trig(p.clone()));
        let x = b.hamiltonian_field(&f).unwrap();
        assert!(x.tables().is_some());
        let z = [0.4, 1.3];
        let gp = p.derivative(1).eval(&z);
        let v = x.eval(&z);
        assert!((v[0] - gp).abs() < 1e-14 && v[1].abs() < 1e-14);
    }

    #[test]
    fn isotropy_classes() {
        let b = t2();
        let z = [0.0, 0.0];
        let zero = SubspaceSample::zero(&z, 2);
        assert_eq!(b.classify_isotropy(&zero).unwrap().class, Isotropy::Isotropic);
        let line = SubspaceSample::from_vectors(&z, 2, vec![vec![1.0, 0.0]], RANK_TOL);
        assert_eq!(b.classify_isotropy(&line).unwrap().class, Isotropy::Lagrangian);
        let full = SubspaceSample::full(&z, 2);
        let r = b.classify_isotropy(&full).unwrap();
        assert_eq!(r.class, Isotropy::Coisotropic);
        assert!(r.symplectic);
    }

    #[test]
    fn degenerate_tensor_refuses_classification() {
        let b = PoissonTensor::lie_poisson(&LieAlgebra::so3()).unwrap();
        let s = SubspaceSample::zero(&[0.0, 0.0, 1.0], 3);
        assert!(matches!(b.classify_isotropy(&s), Err(Error::NotApplicable(_))));
        let orth = b.symplectic_orthogonal(&s).unwrap();
        assert_eq!(orth.rank, 2);
    }
}
