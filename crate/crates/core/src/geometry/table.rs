//! Coefficient tables: real trigonometric polynomials on tori and ordinary
//! polynomials on flat charts. Both support exact products and derivatives,
//! which is what the invariant finder and the Hamiltonian-field builders need.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::error::{Error, Result};

/// `Σ a_k cos(k·θ) + b_k sin(k·θ)` over canonical modes `k` (zero, or first
/// nonzero entry positive).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TrigPoly {
    pub dim: usize,
    pub terms: BTreeMap<Vec<i32>, (f64, f64)>,
}

/// Flips a mode into the canonical half-lattice. Returns `true` when the
/// mode was negated (so the sine coefficient changes sign).
pub fn canonical_mode(mut k: Vec<i32>) -> (Vec<i32>, bool) {
    match k.iter().find(|&&x| x != 0) {
        Some(&first) if first < 0 => {
            k.iter_mut().for_each(|x| *x = -*x);
            (k, true)
        }
        _ => (k, false),
    }
}

impl TrigPoly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c, 0.0);
        p
    }

    pub fn cos(mode: Vec<i32>, c: f64) -> Self {
        let mut p = Self::zero(mode.len());
        p.add_term(mode, c, 0.0);
        p
    }

    pub fn sin(mode: Vec<i32>, c: f64) -> Self {
        let mut p = Self::zero(mode.len());
        p.add_term(mode, 0.0, c);
        p
    }

    /// Adds `a cos(k·θ) + b sin(k·θ)` for an arbitrary (not necessarily
    /// canonical) mode.
    pub fn add_term(&mut self, mode: Vec<i32>, a: f64, b: f64) {
        debug_assert_eq!(mode.len(), self.dim);
        let (k, flipped) = canonical_mode(mode);
        let zero_mode = k.iter().all(|&x| x == 0);
        let b = if zero_mode {
            0.0
        } else if flipped {
            -b
        } else {
            b
        };
        if a == 0.0 && b == 0.0 {
            return;
        }
        let entry = self.terms.entry(k).or_insert((0.0, 0.0));
        entry.0 += a;
        entry.1 += b;
        if entry.0 == 0.0 && entry.1 == 0.0 {
            // keep the map free of exact zeros
        }
    }

    pub fn pruned(mut self, eps: f64) -> Self {
        self.terms.retain(|_, (a, b)| a.abs() > eps || b.abs() > eps);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|(a, b)| *a == 0.0 && *b == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|k| k.iter().map(|x| x.unsigned_abs() as usize).sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(k, &(a, b))| {
                let phase: f64 = k.iter().zip(z).map(|(&ki, &x)| f64::from(ki) * x).sum();
                let (s, c) = phase.sin_cos();
                a * c + b * s
            })
            .sum()
    }

    pub fn eval_dual(&self, z: &[Dual]) -> Dual {
        self.terms
            .iter()
            .map(|(k, &(a, b))| {
                let phase: Dual = k.iter().zip(z).map(|(&ki, &x)| x * f64::from(ki)).sum();
                phase.cos() * a + phase.sin() * b
            })
            .sum()
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (k, &(a, b)) in &self.terms {
            let phase: f64 = k.iter().zip(z).map(|(&ki, &x)| f64::from(ki) * x).sum();
            let (s, c) = phase.sin_cos();
            let d = -a * s + b * c;
            for (gi, &ki) in g.iter_mut().zip(k) {
                *gi += f64::from(ki) * d;
            }
        }
        g
    }

    pub fn derivative(&self, j: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (k, &(a, b)) in &self.terms {
            let kj = f64::from(k[j]);
            if kj != 0.0 {
                out.add_term(k.clone(), kj * b, -kj * a);
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|(a, b)| {
            *a *= c;
            *b *= c;
        });
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, &(a, b)) in &other.terms {
            out.add_term(k.clone(), a, b);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (k, &(a1, b1)) in &self.terms {
            for (l, &(a2, b2)) in &other.terms {
                let sum: Vec<i32> = k.iter().zip(l).map(|(x, y)| x + y).collect();
                let diff: Vec<i32> = k.iter().zip(l).map(|(x, y)| x - y).collect();
                out.add_term(sum, 0.5 * (a1 * a2 - b1 * b2), 0.5 * (a1 * b2 + b1 * a2));
                out.add_term(diff, 0.5 * (a1 * a2 + b1 * b2), 0.5 * (b1 * a2 - a1 * b2));
            }
        }
        out
    }
}

/// `Σ c_e z^e` over exponent multi-indices.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    pub dim: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::monomial(vec![0; dim], c)
    }

    pub fn monomial(exponents: Vec<u32>, c: f64) -> Self {
        let mut p = Self::zero(exponents.len());
        p.add_term(exponents, c);
        p
    }

    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        Self::monomial(e, 1.0)
    }

    pub fn add_term(&mut self, exponents: Vec<u32>, c: f64) {
        debug_assert_eq!(exponents.len(), self.dim);
        if c != 0.0 {
            *self.terms.entry(exponents).or_insert(0.0) += c;
        }
    }

    pub fn pruned(mut self, eps: f64) -> Self {
        self.terms.retain(|_, c| c.abs() > eps);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|c| *c == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| e.iter().map(|&x| x as usize).sum()).max().unwrap_or(0)
    }

    fn powers(&self, z: &[f64]) -> Vec<Vec<f64>> {
        let max = self.degree();
        z.iter()
            .map(|&x| {
                let mut p = Vec::with_capacity(max + 1);
                let mut acc = 1.0;
                for _ in 0..=max {
                    p.push(acc);
                    acc *= x;
                }
                p
            })
            .collect()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let pw = self.powers(z);
        self.terms
            .iter()
            .map(|(e, &c)| c * e.iter().enumerate().map(|(i, &k)| pw[i][k as usize]).product::<f64>())
            .sum()
    }

    pub fn eval_dual(&self, z: &[Dual]) -> Dual {
        self.terms
            .iter()
            .map(|(e, &c)| e.iter().enumerate().fold(Dual::constant(c), |acc, (i, &k)| acc * z[i].powi(k as i32)))
            .sum()
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let pw = self.powers(z);
        let mut g = vec![0.0; self.dim];
        for (e, &c) in &self.terms {
            for j in 0..self.dim {
                if e[j] == 0 {
                    continue;
                }
                let mut term = c * f64::from(e[j]);
                for (i, &k) in e.iter().enumerate() {
                    let k = if i == j { k - 1 } else { k };
                    term *= pw[i][k as usize];
                }
                g[j] += term;
            }
        }
        g
    }

    pub fn derivative(&self, j: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, &c) in &self.terms {
            if e[j] > 0 {
                let mut d = e.clone();
                d[j] -= 1;
                out.add_term(d, c * f64::from(e[j]));
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, &c) in &self.terms {
            for (f, &d) in &other.terms {
                out.add_term(e.iter().zip(f).map(|(a, b)| a + b).collect(), c * d);
            }
        }
        out
    }
}

/// One coefficient table of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Table {
    Trig(TrigPoly),
    Poly(Poly),
}

/// Which family of coefficient tables a basis or a field lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Trig,
    Poly,
}

impl Table {
    pub fn kind(&self) -> TableKind {
        match self {
            Table::Trig(_) => TableKind::Trig,
            Table::Poly(_) => TableKind::Poly,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Table::Trig(p) => p.dim,
            Table::Poly(p) => p.dim,
        }
    }

    pub fn zero(kind: TableKind, dim: usize) -> Self {
        match kind {
            TableKind::Trig => Table::Trig(TrigPoly::zero(dim)),
            TableKind::Poly => Table::Poly(Poly::zero(dim)),
        }
    }

    pub fn constant(kind: TableKind, dim: usize, c: f64) -> Self {
        match kind {
            TableKind::Trig => Table::Trig(TrigPoly::constant(dim, c)),
            TableKind::Poly => Table::Poly(Poly::constant(dim, c)),
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Table::Trig(p) => p.eval(z),
            Table::Poly(p) => p.eval(z),
        }
    }

    pub fn eval_dual(&self, z: &[Dual]) -> Dual {
        match self {
            Table::Trig(p) => p.eval_dual(z),
            Table::Poly(p) => p.eval_dual(z),
        }
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Table::Trig(p) => p.gradient(z),
            Table::Poly(p) => p.gradient(z),
        }
    }

    pub fn derivative(&self, j: usize) -> Table {
        match self {
            Table::Trig(p) => Table::Trig(p.derivative(j)),
            Table::Poly(p) => Table::Poly(p.derivative(j)),
        }
    }

    pub fn scale(&self, c: f64) -> Table {
        match self {
            Table::Trig(p) => Table::Trig(p.scale(c)),
            Table::Poly(p) => Table::Poly(p.scale(c)),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Table::Trig(p) => p.is_zero(),
            Table::Poly(p) => p.is_zero(),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Table::Trig(p) => p.degree(),
            Table::Poly(p) => p.degree(),
        }
    }

    pub fn pruned(self, eps: f64) -> Table {
        match self {
            Table::Trig(p) => Table::Trig(p.pruned(eps)),
            Table::Poly(p) => Table::Poly(p.pruned(eps)),
        }
    }

    pub fn add(&self, other: &Table) -> Result<Table> {
        match (self, other) {
            (Table::Trig(a), Table::Trig(b)) => Ok(Table::Trig(a.add(b))),
            (Table::Poly(a), Table::Poly(b)) => Ok(Table::Poly(a.add(b))),
            _ => Err(mixed()),
        }
    }

    pub fn mul(&self, other: &Table) -> Result<Table> {
        match (self, other) {
            (Table::Trig(a), Table::Trig(b)) => Ok(Table::Trig(a.mul(b))),
            (Table::Poly(a), Table::Poly(b)) => Ok(Table::Poly(a.mul(b))),
            _ => Err(mixed()),
        }
    }

    /// Real coordinates of the table: one `(key, value)` per nonzero real
    /// coefficient. Keys are stable across tables of the same kind.
    pub fn coordinates(&self) -> Vec<(CoeffKey, f64)> {
        match self {
            Table::Trig(p) => p
                .terms
                .iter()
                .flat_map(|(k, &(a, b))| [(CoeffKey::Cos(k.clone()), a), (CoeffKey::Sin(k.clone()), b)])
                .filter(|(_, v)| *v != 0.0)
                .collect(),
            Table::Poly(p) => {
                p.terms.iter().filter(|(_, &c)| c != 0.0).map(|(e, &c)| (CoeffKey::Mono(e.clone()), c)).collect()
            }
        }
    }

    pub fn from_key(key: &CoeffKey, dim: usize, c: f64) -> Table {
        match key {
            CoeffKey::Cos(k) => Table::Trig(TrigPoly::cos(k.clone(), c)),
            CoeffKey::Sin(k) => {
                let mut p = TrigPoly::zero(dim);
                p.add_term(k.clone(), 0.0, c);
                Table::Trig(p)
            }
            CoeffKey::Mono(e) => Table::Poly(Poly::monomial(e.clone(), c)),
        }
    }
}

fn mixed() -> Error {
    Error::Representation("cannot combine trigonometric and polynomial tables".into())
}

/// Index of one real coefficient in a table.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoeffKey {
    Cos(Vec<i32>),
    Sin(Vec<i32>),
    Mono(Vec<u32>),
}

impl CoeffKey {
    pub fn label(&self, coordinates: &[String]) -> String {
        match self {
            CoeffKey::Cos(k) if k.iter().all(|&x| x == 0) => "1".into(),
            CoeffKey::Cos(k) => format!("cos({})", linear_form(k, coordinates)),
            CoeffKey::Sin(k) => format!("sin({})", linear_form(k, coordinates)),
            CoeffKey::Mono(e) => {
                let parts: Vec<String> = e
                    .iter()
                    .zip(coordinates)
                    .filter(|(&p, _)| p > 0)
                    .map(|(&p, c)| if p == 1 { c.clone() } else { format!("{c}^{p}") })
                    .collect();
                if parts.is_empty() {
                    "1".into()
                } else {
                    parts.join("*")
                }
            }
        }
    }
}

fn linear_form(k: &[i32], coordinates: &[String]) -> String {
    let mut out = String::new();
    for (&c, name) in k.iter().zip(coordinates) {
        if c == 0 {
            continue;
        }
        let sign = if c < 0 {
            "-"
        } else if out.is_empty() {
            ""
        } else {
            "+"
        };
        let mag = c.unsigned_abs();
        if mag == 1 {
            out.push_str(&format!("{sign}{name}"));
        } else {
            out.push_str(&format!("{sign}{mag}{name}"));
        }
    }
    out
}

/// Canonical trigonometric modes with `Σ|k_i| ≤ degree`, ordered by degree
/// then lexicographically.
pub fn trig_modes(dim: usize, degree: usize) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let d = degree as i32;
    let mut current = vec![0i32; dim];
    fn rec(i: usize, budget: i32, current: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if i == current.len() {
            let (_, flipped) = canonical_mode(current.clone());
            if !flipped {
                out.push(current.clone());
            }
            return;
        }
        for v in -budget..=budget {
            current[i] = v;
            rec(i + 1, budget - v.abs(), current, out);
        }
        current[i] = 0;
    }
    rec(0, d, &mut current, &mut out);
    out.sort_by(|a, b| {
        let da: i32 = a.iter().map(|x| x.abs()).sum();
        let db: i32 = b.iter().map(|x| x.abs()).sum();
        da.cmp(&db).then_with(|| b.cmp(a))
    });
    out
}

/// Monomial exponents with total degree `≤ degree`, ordered by degree then
/// reverse-lexicographically.
pub fn poly_exponents(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    fn rec(i: usize, budget: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == current.len() {
            out.push(current.clone());
            return;
        }
        for v in 0..=budget {
            current[i] = v;
            rec(i + 1, budget - v, current, out);
        }
        current[i] = 0;
    }
    rec(0, degree as u32, &mut current, &mut out);
    out.sort_by(|a, b| {
        let da: u32 = a.iter().sum();
        let db: u32 = b.iter().sum();
        da.cmp(&db).then_with(|| b.cmp(a))
    });
    out
}

/// The real coefficient keys of a truncated basis.
pub fn basis_keys(kind: TableKind, dim: usize, degree: usize) -> Vec<CoeffKey> {
    match kind {
        TableKind::Trig => trig_modes(dim, degree)
            .into_iter()
            .flat_map(|k| {
                if k.iter().all(|&x| x == 0) {
                    vec![CoeffKey::Cos(k)]
                } else {
                    vec![CoeffKey::Cos(k.clone()), CoeffKey::Sin(k)]
                }
            })
            .collect(),
        TableKind::Poly => poly_exponents(dim, degree).into_iter().map(CoeffKey::Mono).collect(),
    }
}
