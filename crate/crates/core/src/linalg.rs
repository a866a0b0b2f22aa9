//! Dense linear algebra on small subspaces: ranks, orthonormal bases,
//! complements and principal angles.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Default relative rank tolerance on singular values.
pub const RANK_TOL: f64 = 1e-9;

/// A pointwise sample of a linear subspace of `R^dim` (tangent or cotangent).
#[derive(Clone, Debug, Serialize)]
pub struct SubspaceSample {
    pub base_point: Vec<f64>,
    pub dim: usize,
    pub rank: usize,
    pub tolerance: f64,
    /// Orthonormal basis, one vector per entry.
    pub basis: Vec<Vec<f64>>,
    #[serde(skip)]
    pub spanning: Vec<Vec<f64>>,
}

impl SubspaceSample {
    /// Spans `vectors` with singular values counted against `tol · σ_max`.
    pub fn from_vectors(base_point: &[f64], dim: usize, vectors: Vec<Vec<f64>>, tol: f64) -> Self {
        Self::from_vectors_scaled(base_point, dim, vectors, tol, 0.0)
    }

    /// As [`from_vectors`](Self::from_vectors), but singular values are
    /// compared with `tol · max(σ_max, scale)`. `scale` carries the natural
    /// size of the operator that produced the vectors, so roundoff-level
    /// vectors do not register as rank.
    pub fn from_vectors_scaled(base_point: &[f64], dim: usize, vectors: Vec<Vec<f64>>, tol: f64, scale: f64) -> Self {
        let basis = orthonormal_basis(&vectors, dim, tol, scale);
        Self { base_point: base_point.to_vec(), dim, rank: basis.len(), tolerance: tol, basis, spanning: vectors }
    }

    pub fn from_basis(base_point: &[f64], dim: usize, basis: Vec<Vec<f64>>, tol: f64) -> Self {
        Self::from_vectors(base_point, dim, basis, tol)
    }

    pub fn zero(base_point: &[f64], dim: usize) -> Self {
        Self::from_vectors(base_point, dim, Vec::new(), RANK_TOL)
    }

    pub fn full(base_point: &[f64], dim: usize) -> Self {
        Self::from_vectors(base_point, dim, identity_vectors(dim), RANK_TOL)
    }

    pub fn basis_matrix(&self) -> DMatrix<f64> {
        columns_to_matrix(&self.basis, self.dim)
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for b in &self.basis {
            let c = dot(b, v);
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        out
    }

    /// Largest principal angle of `self` measured against `other`
    /// (zero iff `self ⊆ other`).
    pub fn containment_angle_in(&self, other: &SubspaceSample) -> f64 {
        containment_angle(&self.basis, &other.basis, self.dim)
    }

    pub fn is_contained_in(&self, other: &SubspaceSample, tol: f64) -> bool {
        self.containment_angle_in(other) < tol
    }

    pub fn equals(&self, other: &SubspaceSample, tol: f64) -> bool {
        self.rank == other.rank && self.is_contained_in(other, tol) && other.is_contained_in(self, tol)
    }

    /// Largest principal angle between two subspaces of equal rank, or π/2
    /// when the ranks differ.
    pub fn distance(&self, other: &SubspaceSample) -> f64 {
        if self.rank != other.rank {
            return std::f64::consts::FRAC_PI_2;
        }
        self.containment_angle_in(other).max(other.containment_angle_in(self))
    }

    /// Dimension of `self ∩ other`.
    pub fn intersection_dim(&self, other: &SubspaceSample) -> usize {
        let mut all = self.basis.clone();
        all.extend(other.basis.iter().cloned());
        let sum = orthonormal_basis(&all, self.dim, self.tolerance.max(RANK_TOL), 1.0);
        (self.rank + other.rank).saturating_sub(sum.len())
    }
}

pub fn identity_vectors(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            e
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn columns_to_matrix(columns: &[Vec<f64>], rows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i])
}

pub fn matrix_columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).iter().copied().collect()
}

/// Full singular value decomposition `a = U diag(σ) Vᵀ`, singular values
/// nonincreasing.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return Svd { u: DMatrix::identity(r, r), singular_values: Vec::new(), v: DMatrix::identity(c, c) };
    }
    match to_faer(a).svd() {
        Ok(d) => Svd {
            u: from_faer(d.U()),
            singular_values: d.S().column_vector().iter().copied().collect(),
            v: from_faer(d.V()),
        },
        Err(_) => Svd {
            u: DMatrix::from_element(r, r, f64::NAN),
            singular_values: vec![f64::NAN; r.min(c)],
            v: DMatrix::from_element(c, c, f64::NAN),
        },
    }
}

/// Singular values, nonincreasing.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    to_faer(a).singular_values().unwrap_or_else(|_| vec![f64::NAN; a.nrows().min(a.ncols())])
}

pub fn largest_singular_value(a: &DMatrix<f64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Smallest of the `min(rows, cols)` singular values.
pub fn smallest_singular_value(a: &DMatrix<f64>) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Moore–Penrose pseudoinverse dropping singular values `≤ threshold`.
pub fn pseudo_inverse_with(a: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let d = svd(a);
    let mut p = DMatrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in d.singular_values.iter().enumerate() {
        if s > threshold {
            p += d.v.column(k) * d.u.column(k).transpose() / s;
        }
    }
    p
}

/// Orthonormal basis of `span(vectors)`, keeping left singular vectors with
/// `σ > tol · max(σ_max, scale)`.
pub fn orthonormal_basis(vectors: &[Vec<f64>], dim: usize, tol: f64, scale: f64) -> Vec<Vec<f64>> {
    if vectors.is_empty() || dim == 0 {
        return Vec::new();
    }
    let a = columns_to_matrix(vectors, dim);
    let svd = svd(&a);
    let u = svd.u;
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let reference = smax.max(scale);
    if reference == 0.0 || !reference.is_finite() {
        return Vec::new();
    }
    let mut picked: Vec<(f64, Vec<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol * reference)
        .map(|(i, &s)| (s, u.column(i).iter().copied().collect()))
        .collect();
    picked.sort_by(|a, b| b.0.total_cmp(&a.0));
    picked.into_iter().map(|(_, v)| canonical_sign(v)).collect()
}

/// Flips a vector so its largest-magnitude entry is positive.
fn canonical_sign(mut v: Vec<f64>) -> Vec<f64> {
    let pivot = v.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() + 1e-12 { x } else { acc });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Orthonormal basis of the Euclidean orthogonal complement of an
/// orthonormal family.
pub fn complement_basis(basis: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut proj = DMatrix::<f64>::identity(dim, dim);
    for b in basis {
        let v = DVector::from_column_slice(b);
        proj -= &v * v.transpose();
    }
    let cols = matrix_columns(&proj);
    let out = orthonormal_basis(&cols, dim, 0.5, 1.0);
    debug_assert_eq!(out.len(), dim - basis.len());
    out
}

/// `asin` of the spectral norm of `(I - P_b) Q_a`.
pub fn containment_angle(a: &[Vec<f64>], b: &[Vec<f64>], dim: usize) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let mut residuals = Vec::with_capacity(a.len());
    for v in a {
        let mut r = v.clone();
        for w in b {
            let c = dot(w, v);
            for (ri, wi) in r.iter_mut().zip(w) {
                *ri -= c * wi;
            }
        }
        residuals.push(r);
    }
    let m = columns_to_matrix(&residuals, dim);
    let s = largest_singular_value(&m);
    s.min(1.0).asin()
}

/// Principal angles between two subspaces given by orthonormal bases,
/// ascending.
pub fn principal_angles(a: &[Vec<f64>], b: &[Vec<f64>], dim: usize) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let qa = columns_to_matrix(a, dim);
    let qb = columns_to_matrix(b, dim);
    let m = qa.transpose() * qb;
    let mut angles: Vec<f64> = singular_values(&m).iter().map(|&c| c.clamp(-1.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// Orthonormal basis of the right nullspace of `a` (singular values below
/// `tol · max(σ_max, scale)` count as zero).
pub fn nullspace(a: &DMatrix<f64>, tol: f64, scale: f64) -> Vec<Vec<f64>> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Vec::new();
    }
    if rows == 0 {
        return identity_vectors(cols);
    }
    let svd = svd(a);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let threshold = tol * smax.max(scale);
    (0..cols)
        .filter(|&i| svd.singular_values.get(i).is_none_or(|&s| s <= threshold))
        .map(|i| svd.v.column(i).iter().copied().collect())
        .collect()
}

/// Moore–Penrose pseudoinverse with the default rank tolerance.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let smax = largest_singular_value(a);
    pseudo_inverse_with(a, RANK_TOL * smax)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_basis_of_dependent_family() {
        let s = SubspaceSample::from_vectors(
            &[0.0; 3],
            3,
            vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]],
            RANK_TOL,
        );
        assert_eq!(s.rank, 2);
        let plane =
            SubspaceSample::from_vectors(&[0.0; 3], 3, vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]], RANK_TOL);
        assert!(s.equals(&plane, 1e-12));
    }

    #[test]
    fn zero_vectors_have_rank_zero() {
        let s = SubspaceSample::from_vectors(&[0.0; 2], 2, vec![vec![0.0, 0.0]], RANK_TOL);
        assert_eq!(s.rank, 0);
        let noisy = SubspaceSample::from_vectors_scaled(&[0.0; 2], 2, vec![vec![1e-17, 0.0]], RANK_TOL, 1.0);
        assert_eq!(noisy.rank, 0);
    }

    #[test]
    fn complement_and_angles() {
        let b = vec![vec![1.0, 0.0, 0.0]];
        let c = complement_basis(&b, 3);
        assert_eq!(c.len(), 2);
        for v in &c {
            assert!(dot(v, &b[0]).abs() < 1e-14);
        }
        let line = vec![vec![1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0]];
        let a = principal_angles(&line, &b, 3);
        assert!((a[0] - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!((containment_angle(&line, &b, 3) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert_eq!(containment_angle(&[], &b, 3), 0.0);
    }

    #[test]
    fn nullspace_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = nullspace(&a, RANK_TOL, 0.0);
        assert_eq!(n.len(), 2);
        for v in &n {
            assert!((v[0] + v[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn intersection_dimension() {
        let xy = SubspaceSample::from_vectors(&[0.0; 3], 3, identity_vectors(3)[..2].to_vec(), RANK_TOL);
        let yz = SubspaceSample::from_vectors(&[0.0; 3], 3, identity_vectors(3)[1..].to_vec(), RANK_TOL);
        assert_eq!(xy.intersection_dim(&yz), 1);
    }

    #[test]
    fn rank_one_tall_matrix_recomposes() {
        let a = DMatrix::from_column_slice(
            3,
            2,
            &[
                0.6292441815144058,
                0.34853909878943107,
                -0.6427058027760726,
                -0.5312146752527707,
                -0.29424043895125274,
                0.5425791200533271,
            ],
        );
        let d = svd(&a);
        let mut s = DMatrix::zeros(3, 2);
        for (k, &x) in d.singular_values.iter().enumerate() {
            s[(k, k)] = x;
        }
        assert!((&d.u * s * d.v.transpose() - &a).amax() < 1e-14);
        let span = orthonormal_basis(&matrix_columns(&a), 3, RANK_TOL, 0.0);
        assert_eq!(span.len(), 1);
        let c = a.column(0).normalize();
        assert!((dot(&span[0], c.as_slice()).abs() - 1.0).abs() < 1e-14);
        let p = pseudo_inverse(&a);
        assert!((&a * &p * &a - &a).amax() < 1e-14);
    }
}
