use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::space::{BoxRegion, PhaseSpace};
use super::table::{Poly, Table, TableKind};
use crate::dual::{self, Dual};
use crate::error::{check_dim, Error, Result};

pub type DualFn = Arc<dyn Fn(&[Dual]) -> Dual + Send + Sync>;
pub type DualVecFn = Arc<dyn Fn(&[Dual]) -> Vec<Dual> + Send + Sync>;
pub type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Step used for finite-difference Hessians and Jacobians of closed forms.
const FD_STEP: f64 = 1e-5;

#[derive(Clone)]
pub enum ScalarRepr {
    /// Closed form written once against dual numbers.
    Closed(DualFn),
    Table(Table),
}

/// A smooth function on a chart with an exact first-derivative contract.
#[derive(Clone)]
pub struct ScalarField {
    pub dim: usize,
    pub label: String,
    pub repr: ScalarRepr,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            ScalarRepr::Closed(_) => "closed",
            ScalarRepr::Table(_) => "table",
        };
        write!(f, "ScalarField({}, {kind}, dim {})", self.label, self.dim)
    }
}

impl ScalarField {
    pub fn closed(dim: usize, label: impl Into<String>, f: impl Fn(&[Dual]) -> Dual + Send + Sync + 'static) -> Self {
        Self { dim, label: label.into(), repr: ScalarRepr::Closed(Arc::new(f)) }
    }

    pub fn from_table(label: impl Into<String>, table: Table) -> Self {
        Self { dim: table.dim(), label: label.into(), repr: ScalarRepr::Table(table) }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_table(format!("{c}"), Table::Poly(Poly::constant(dim, c)))
    }

    /// The coordinate function `z ↦ z_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        Self::from_table(format!("x{}", i + 1), Table::Poly(Poly::coordinate(dim, i)))
    }

    pub fn table(&self) -> Option<&Table> {
        match &self.repr {
            ScalarRepr::Table(t) => Some(t),
            ScalarRepr::Closed(_) => None,
        }
    }

    fn finite(&self, v: f64, z: &[f64]) -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NumericDomain(format!("{} at {z:?}", self.label)))
        }
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim, z.len())?;
        let v = match &self.repr {
            ScalarRepr::Closed(f) => f(&dual::constants(z)).re,
            ScalarRepr::Table(t) => t.eval(z),
        };
        self.finite(v, z)
    }

    pub fn eval_dual(&self, z: &[Dual]) -> Dual {
        match &self.repr {
            ScalarRepr::Closed(f) => f(z),
            ScalarRepr::Table(t) => t.eval_dual(z),
        }
    }

    /// `df(z)`: exact for tables, forward-mode for closed forms.
    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, z.len())?;
        let g = match &self.repr {
            ScalarRepr::Table(t) => t.gradient(z),
            ScalarRepr::Closed(f) => (0..self.dim).map(|j| f(&dual::seed(z, j)).eps).collect(),
        };
        for &v in &g {
            self.finite(v, z)?;
        }
        Ok(g)
    }

    /// Second derivatives: exact for tables, central differences of the
    /// forward-mode gradient otherwise.
    pub fn hessian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim, z.len())?;
        match &self.repr {
            ScalarRepr::Table(t) => {
                let mut h = DMatrix::zeros(self.dim, self.dim);
                for j in 0..self.dim {
                    let g = t.derivative(j).gradient(z);
                    for (i, v) in g.into_iter().enumerate() {
                        h[(j, i)] = v;
                    }
                }
                Ok(h)
            }
            ScalarRepr::Closed(_) => {
                let mut h = DMatrix::zeros(self.dim, self.dim);
                for k in 0..self.dim {
                    let mut zp = z.to_vec();
                    let mut zm = z.to_vec();
                    zp[k] += FD_STEP;
                    zm[k] -= FD_STEP;
                    let gp = self.gradient(&zp)?;
                    let gm = self.gradient(&zm)?;
                    for i in 0..self.dim {
                        h[(i, k)] = (gp[i] - gm[i]) / (2.0 * FD_STEP);
                    }
                }
                Ok((&h + h.transpose()) * 0.5)
            }
        }
    }

    fn as_dual_fn(&self) -> DualFn {
        match &self.repr {
            ScalarRepr::Closed(f) => f.clone(),
            ScalarRepr::Table(t) => {
                let t = t.clone();
                Arc::new(move |z| t.eval_dual(z))
            }
        }
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        check_dim(self.dim, other.dim)?;
        let label = format!("({})*({})", self.label, other.label);
        if let (Some(a), Some(b)) = (self.table(), other.table()) {
            if a.kind() == b.kind() {
                return Ok(Self::from_table(label, a.mul(b)?));
            }
        }
        let (a, b) = (self.as_dual_fn(), other.as_dual_fn());
        Ok(Self::closed(self.dim, label, move |z| a(z) * b(z)))
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        check_dim(self.dim, other.dim)?;
        let label = format!("{} + {}", self.label, other.label);
        if let (Some(a), Some(b)) = (self.table(), other.table()) {
            if a.kind() == b.kind() {
                return Ok(Self::from_table(label, a.add(b)?));
            }
        }
        let (a, b) = (self.as_dual_fn(), other.as_dual_fn());
        Ok(Self::closed(self.dim, label, move |z| a(z) + b(z)))
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        let label = format!("{c}*({})", self.label);
        match &self.repr {
            ScalarRepr::Table(t) => Self::from_table(label, t.scale(c)),
            ScalarRepr::Closed(f) => {
                let f = f.clone();
                Self::closed(self.dim, label, move |z| f(z) * c)
            }
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

#[derive(Clone)]
pub enum FieldRepr {
    /// One coefficient table per component.
    Tables(Vec<Table>),
    /// Dual-number evaluator; Jacobian by forward mode.
    Dual(DualVecFn),
    /// Plain evaluator with an optional exact Jacobian.
    Plain { eval: VecFn, jacobian: Option<MatFn> },
}

/// A vector field on a phase space, optionally compactly supported in a box
/// and optionally restricted to a validity box for flows.
#[derive(Clone)]
pub struct VectorField {
    pub space: Arc<PhaseSpace>,
    pub label: String,
    pub repr: FieldRepr,
    pub support: Option<BoxRegion>,
    pub validity: Option<BoxRegion>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField({} on {})", self.label, self.space.name)
    }
}

impl VectorField {
    fn with_repr(space: Arc<PhaseSpace>, label: impl Into<String>, repr: FieldRepr) -> Self {
        Self { space, label: label.into(), repr, support: None, validity: None }
    }

    pub fn from_tables(space: Arc<PhaseSpace>, label: impl Into<String>, tables: Vec<Table>) -> Result<Self> {
        check_dim(space.dim, tables.len())?;
        if let Some(t) = tables.iter().find(|t| t.dim() != space.dim) {
            return Err(Error::Dimension { expected: space.dim, got: t.dim() });
        }
        Ok(Self::with_repr(space, label, FieldRepr::Tables(tables)))
    }

    pub fn from_dual(
        space: Arc<PhaseSpace>,
        label: impl Into<String>,
        f: impl Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    ) -> Self {
        Self::with_repr(space, label, FieldRepr::Dual(Arc::new(f)))
    }

    pub fn from_fn(
        space: Arc<PhaseSpace>,
        label: impl Into<String>,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::with_repr(space, label, FieldRepr::Plain { eval: Arc::new(f), jacobian: None })
    }

    pub fn from_fn_with_jacobian(
        space: Arc<PhaseSpace>,
        label: impl Into<String>,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::with_repr(space, label, FieldRepr::Plain { eval: Arc::new(f), jacobian: Some(Arc::new(jacobian)) })
    }

    /// A constant field (a table field when the chart is periodic or flat).
    pub fn constant(space: Arc<PhaseSpace>, label: impl Into<String>, v: &[f64]) -> Result<Self> {
        check_dim(space.dim, v.len())?;
        let kind = if space.all_periodic() { TableKind::Trig } else { TableKind::Poly };
        let tables = v.iter().map(|&c| Table::constant(kind, space.dim, c)).collect();
        Self::from_tables(space, label, tables)
    }

    pub fn zero(space: Arc<PhaseSpace>) -> Self {
        let v = vec![0.0; space.dim];
        Self::constant(space, "0", &v).expect("dimension matches by construction")
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn tables(&self) -> Option<&[Table]> {
        match &self.repr {
            FieldRepr::Tables(t) => Some(t),
            _ => None,
        }
    }

    pub fn with_support(mut self, support: BoxRegion) -> Self {
        self.support = Some(support);
        self
    }

    pub fn with_validity(mut self, validity: BoxRegion) -> Self {
        self.validity = Some(validity);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn outside_support(&self, z: &[f64]) -> bool {
        self.support.as_ref().is_some_and(|s| !s.contains(z))
    }

    fn raw_eval(&self, z: &[f64]) -> Vec<f64> {
        match &self.repr {
            FieldRepr::Tables(t) => t.iter().map(|c| c.eval(z)).collect(),
            FieldRepr::Dual(f) => f(&dual::constants(z)).into_iter().map(|d| d.re).collect(),
            FieldRepr::Plain { eval, .. } => eval(z),
        }
    }

    /// `X(z)`; exactly zero outside a declared support box.
    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        if self.outside_support(z) {
            return vec![0.0; self.dim()];
        }
        self.raw_eval(z)
    }

    /// `X(z)` at dual-number points, for table and dual representations.
    /// Support boxes are ignored.
    pub fn eval_dual(&self, z: &[Dual]) -> Option<Vec<Dual>> {
        match &self.repr {
            FieldRepr::Tables(t) => Some(t.iter().map(|c| c.eval_dual(z)).collect()),
            FieldRepr::Dual(f) => Some(f(z)),
            FieldRepr::Plain { .. } => None,
        }
    }

    pub fn try_eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), z.len())?;
        let v = self.eval(z);
        check_dim(self.dim(), v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericDomain(format!("{} at {z:?}", self.label)));
        }
        Ok(v)
    }

    /// `∂X^i/∂z_j`: exact for tables, forward mode for dual evaluators,
    /// central differences otherwise.
    pub fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        if self.outside_support(z) {
            return DMatrix::zeros(n, n);
        }
        match &self.repr {
            FieldRepr::Tables(t) => DMatrix::from_fn(n, n, |i, j| t[i].derivative(j).eval(z)),
            FieldRepr::Dual(f) => {
                let mut m = DMatrix::zeros(n, n);
                for j in 0..n {
                    for (i, d) in f(&dual::seed(z, j)).into_iter().enumerate() {
                        m[(i, j)] = d.eps;
                    }
                }
                m
            }
            FieldRepr::Plain { jacobian: Some(jac), .. } => jac(z),
            FieldRepr::Plain { eval, jacobian: None } => {
                let mut m = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut zp = z.to_vec();
                    let mut zm = z.to_vec();
                    zp[j] += FD_STEP;
                    zm[j] -= FD_STEP;
                    let (fp, fm) = (eval(&zp), eval(&zm));
                    for i in 0..n {
                        m[(i, j)] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
                    }
                }
                m
            }
        }
    }

    /// Directional derivative `X[f](z) = df(z)·X(z)`.
    pub fn apply(&self, f: &ScalarField, z: &[f64]) -> Result<f64> {
        let g = f.gradient(z)?;
        Ok(crate::linalg::dot(&g, &self.eval(z)))
    }

    /// `X[f]` as a coefficient table, when both sides are tables of one kind.
    pub fn apply_table(&self, f: &Table) -> Result<Table> {
        let tables = self
            .tables()
            .ok_or_else(|| Error::Representation(format!("field {} has no coefficient tables", self.label)))?;
        let mut out = Table::zero(f.kind(), f.dim());
        for (j, c) in tables.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let d = f.derivative(j);
            if d.is_zero() {
                continue;
            }
            out = out.add(&c.mul(&d)?)?;
        }
        Ok(out)
    }

    /// `Σ c_i X_i`, kept in table form when every term is a table field.
    pub fn linear_combination(
        space: Arc<PhaseSpace>,
        label: impl Into<String>,
        coefficients: &[f64],
        fields: &[VectorField],
    ) -> Result<VectorField> {
        check_dim(fields.len(), coefficients.len())?;
        let label = label.into();
        let all_tables: Option<Vec<&[Table]>> = fields.iter().map(|f| f.tables()).collect();
        let supported = fields.iter().any(|f| f.support.is_some());
        if let (Some(tabs), false) = (all_tables, supported) {
            let kinds: Vec<TableKind> = tabs.iter().flat_map(|t| t.iter().map(|x| x.kind())).collect();
            if kinds.windows(2).all(|w| w[0] == w[1]) {
                let kind = kinds.first().copied().unwrap_or(TableKind::Poly);
                let mut out = vec![Table::zero(kind, space.dim); space.dim];
                for (c, t) in coefficients.iter().zip(&tabs) {
                    if *c == 0.0 {
                        continue;
                    }
                    for (o, ti) in out.iter_mut().zip(t.iter()) {
                        *o = o.add(&ti.scale(*c))?.pruned(0.0);
                    }
                }
                return VectorField::from_tables(space, label, out);
            }
        }
        let fields: Vec<VectorField> = fields.to_vec();
        let coefficients = coefficients.to_vec();
        let n = space.dim;
        let (f2, c2) = (fields.clone(), coefficients.clone());
        Ok(VectorField::from_fn_with_jacobian(
            space,
            label,
            move |z| {
                let mut out = vec![0.0; n];
                for (c, f) in coefficients.iter().zip(&fields) {
                    if *c != 0.0 {
                        for (o, v) in out.iter_mut().zip(f.eval(z)) {
                            *o += c * v;
                        }
                    }
                }
                out
            },
            move |z| {
                let mut out = DMatrix::zeros(n, n);
                for (c, f) in c2.iter().zip(&f2) {
                    if *c != 0.0 {
                        out += f.jacobian(z) * *c;
                    }
                }
                out
            },
        ))
    }

    /// `φ(z)·X(z)` with `φ` a product of one-dimensional plateaus over the
    /// non-periodic coordinates: equal to `X` on `[-inner, inner]` in each such
    /// coordinate and exactly zero outside `[-outer, outer]`. Periodic
    /// coordinates are left untouched, so compact charts are unchanged.
    pub fn plateau(&self, inner: f64, outer: f64) -> Result<VectorField> {
        if !(0.0 < inner && inner < outer) {
            return Err(Error::InvalidInput(format!(
                "plateau radii must satisfy 0 < inner < outer, got {inner}, {outer}"
            )));
        }
        if self.space.all_periodic() {
            return Ok(self.clone());
        }
        let profile = PlateauProfile::new(inner, outer)?;
        let periodic = self.space.periodic.clone();
        let base = self.clone();
        let n = self.dim();
        let lo = periodic.iter().map(|&p| if p { f64::NEG_INFINITY } else { -outer }).collect();
        let hi = periodic.iter().map(|&p| if p { f64::INFINITY } else { outer }).collect();
        let support = BoxRegion::new(lo, hi)?;
        let (p2, b2, per2) = (profile, base.clone(), periodic.clone());
        let cutoff = move |z: &[f64]| -> (f64, Vec<f64>) {
            let mut value = 1.0;
            let mut parts = vec![(1.0, 0.0); z.len()];
            for (i, (&x, &p)) in z.iter().zip(&per2).enumerate() {
                if !p {
                    parts[i] = (p2.value(x.abs()), p2.derivative(x.abs()) * x.signum());
                    value *= parts[i].0;
                }
            }
            let grad = (0..z.len())
                .map(|k| {
                    if per2[k] {
                        return 0.0;
                    }
                    parts.iter().enumerate().map(|(i, &(v, d))| if i == k { d } else { v }).product()
                })
                .collect();
            (value, grad)
        };
        let c2 = cutoff.clone();
        Ok(VectorField::from_fn_with_jacobian(
            self.space.clone(),
            format!("plateau({})", self.label),
            move |z| {
                let (phi, _) = cutoff(z);
                if phi == 0.0 {
                    return vec![0.0; n];
                }
                base.eval(z).into_iter().map(|v| phi * v).collect()
            },
            move |z| {
                let (phi, grad) = c2(z);
                if phi == 0.0 && grad.iter().all(|g| *g == 0.0) {
                    return DMatrix::zeros(n, n);
                }
                let x = b2.eval(z);
                let mut j = b2.jacobian(z) * phi;
                for r in 0..n {
                    for c in 0..n {
                        j[(r, c)] += x[r] * grad[c];
                    }
                }
                j
            },
        )
        .with_support(support))
    }
}

/// A `C^∞` monotone step from 1 (on `[0, inner]`) to 0 (beyond `outer`),
/// built from `e^{-1/x}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateauProfile {
    pub inner: f64,
    pub outer: f64,
}

fn psi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

fn psi_prime(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp() / (x * x)
    }
}

impl PlateauProfile {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(0.0 <= inner && inner < outer && outer.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "plateau radii must satisfy 0 <= inner < outer, got {inner}, {outer}"
            )));
        }
        Ok(Self { inner, outer })
    }

    /// Profile with plateau `r/2` and support `3r/4`.
    pub fn for_radius(r: f64) -> Result<Self> {
        Self::new(0.5 * r, 0.75 * r)
    }

    pub fn value(&self, s: f64) -> f64 {
        if s <= self.inner {
            return 1.0;
        }
        if s >= self.outer {
            return 0.0;
        }
        let x = (self.outer - s) / (self.outer - self.inner);
        let (a, b) = (psi(x), psi(1.0 - x));
        a / (a + b)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        if s <= self.inner || s >= self.outer {
            return 0.0;
        }
        let w = self.outer - self.inner;
        let x = (self.outer - s) / w;
        let (a, b) = (psi(x), psi(1.0 - x));
        let (da, db) = (psi_prime(x), -psi_prime(1.0 - x));
        let dx = -1.0 / w;
        (da * (a + b) - a * (da + db)) / ((a + b) * (a + b)) * dx
    }

    pub fn value_dual(&self, s: Dual) -> Dual {
        Dual::new(self.value(s.re), self.derivative(s.re) * s.eps)
    }
}
