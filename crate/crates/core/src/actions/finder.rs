//! Joint nullspace of generator derivations on a truncated basis.
//!
//! Generators are applied one at a time. Each derivation, restricted to the
//! current nullspace, splits into blocks of columns that share output
//! coefficients; every block gets its own dense SVD. Constant-coefficient
//! fields on tori therefore cost one tiny SVD per Fourier mode.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{InvariantFamily, Provenance};
use crate::error::{Error, Result};
use crate::geometry::table::{basis_keys, CoeffKey};
use crate::geometry::{ScalarField, Table, TableKind, VectorField};
use crate::linalg::{self, RANK_TOL};

type Sparse = Vec<(usize, f64)>;

/// Coefficients below this are dropped from sparse vectors.
const DROP: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct FinderOutput {
    pub family: InvariantFamily,
    pub kind: TableKind,
    pub degree: usize,
    pub basis_size: usize,
    /// Coefficient vectors of the members over the truncated basis.
    pub coefficients: Vec<Vec<(CoeffKey, f64)>>,
}

impl FinderOutput {
    pub fn dimension(&self) -> usize {
        self.family.members.len()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = i;
        while self.0[c] != r {
            let n = self.0[c];
            self.0[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn check_generators(generators: &[Arc<VectorField>], kind: TableKind, dim: usize) -> Result<()> {
    for g in generators {
        if g.dim() != dim {
            return Err(Error::Dimension { expected: dim, got: g.dim() });
        }
        let tables = g
            .tables()
            .ok_or_else(|| Error::Representation(format!("generator {} has no coefficient tables", g.label)))?;
        if let Some(t) = tables.iter().find(|t| t.kind() != kind) {
            return Err(Error::Representation(format!(
                "generator {} has {:?} coefficients but the basis is {kind:?}",
                g.label,
                t.kind()
            )));
        }
        if g.support.is_some() {
            return Err(Error::Representation(format!("generator {} is cut off by a support box", g.label)));
        }
    }
    Ok(())
}

/// Orthonormal basis of `{f in span(basis) : X[f] = 0 for every generator}`.
pub fn invariant_finder(
    generators: &[Arc<VectorField>],
    kind: TableKind,
    dim: usize,
    degree: usize,
) -> Result<FinderOutput> {
    check_generators(generators, kind, dim)?;
    let keys = basis_keys(kind, dim, degree);
    let n = keys.len();
    let mut null: Vec<Sparse> = (0..n).map(|i| vec![(i, 1.0)]).collect();

    for g in generators {
        if g.tables().is_some_and(|t| t.iter().all(|c| c.is_zero())) {
            continue;
        }
        // image of every basis function touched by the current nullspace
        let mut used: Vec<usize> = null.iter().flat_map(|v| v.iter().map(|&(i, _)| i)).collect();
        used.sort_unstable();
        used.dedup();
        let images: Vec<(usize, Vec<(CoeffKey, f64)>)> = used
            .par_iter()
            .map(|&i| {
                let t = Table::from_key(&keys[i], dim, 1.0);
                g.apply_table(&t).map(|img| (i, img.pruned(0.0).coordinates()))
            })
            .collect::<Result<_>>()?;
        let mut row_of: HashMap<CoeffKey, usize> = HashMap::new();
        let mut image_rows: HashMap<usize, Sparse> = HashMap::with_capacity(images.len());
        for (i, coords) in images {
            let rows = coords
                .into_iter()
                .map(|(k, v)| {
                    let next = row_of.len();
                    (*row_of.entry(k).or_insert(next), v)
                })
                .collect();
            image_rows.insert(i, rows);
        }

        // X[v] for each nullspace vector, as sparse rows
        let col_images: Vec<Sparse> = null
            .iter()
            .map(|v| {
                let mut acc: HashMap<usize, f64> = HashMap::new();
                for &(i, c) in v {
                    for &(r, x) in &image_rows[&i] {
                        *acc.entry(r).or_insert(0.0) += c * x;
                    }
                }
                let mut out: Sparse = acc.into_iter().filter(|(_, x)| x.abs() > DROP).collect();
                out.sort_unstable_by_key(|&(r, _)| r);
                out
            })
            .collect();

        // connected blocks of columns sharing rows
        let mut uf = UnionFind((0..null.len()).collect());
        let mut owner: HashMap<usize, usize> = HashMap::new();
        for (c, img) in col_images.iter().enumerate() {
            for &(r, _) in img {
                match owner.get(&r) {
                    Some(&o) => uf.union(o, c),
                    None => {
                        owner.insert(r, c);
                    }
                }
            }
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut block_of: HashMap<usize, usize> = HashMap::new();
        let mut survivors: Vec<Sparse> = Vec::new();
        for c in 0..null.len() {
            if col_images[c].is_empty() {
                continue;
            }
            let root = uf.find(c);
            let b = *block_of.entry(root).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(c);
        }

        let decomposed: Vec<(DMatrix<f64>, f64)> = blocks
            .par_iter()
            .map(|cols| {
                let mut rows: Vec<usize> = cols.iter().flat_map(|&c| col_images[c].iter().map(|&(r, _)| r)).collect();
                rows.sort_unstable();
                rows.dedup();
                let local: HashMap<usize, usize> = rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
                let mut a = DMatrix::zeros(rows.len(), cols.len());
                for (j, &c) in cols.iter().enumerate() {
                    for &(r, x) in &col_images[c] {
                        a[(local[&r], j)] = x;
                    }
                }
                let smax = crate::linalg::largest_singular_value(&a);
                (a, smax)
            })
            .collect();
        let global = decomposed.iter().map(|(_, s)| *s).fold(0.0, f64::max);

        let kept: Vec<Vec<Sparse>> = blocks
            .par_iter()
            .zip(decomposed.par_iter())
            .map(|(cols, (a, _))| {
                linalg::nullspace(a, RANK_TOL, global).into_iter().map(|w| combine(&null, cols, &w)).collect()
            })
            .collect();

        for (c, img) in col_images.iter().enumerate() {
            if img.is_empty() {
                survivors.push(null[c].clone());
            }
        }
        survivors.extend(kept.into_iter().flatten());
        null = survivors;
        if null.is_empty() {
            break;
        }
    }

    let mut vectors: Vec<Sparse> = null.into_iter().map(canonical).collect();
    vectors.sort_by(|a, b| {
        let ka: Vec<usize> = a.iter().map(|&(i, _)| i).collect();
        let kb: Vec<usize> = b.iter().map(|&(i, _)| i).collect();
        ka.cmp(&kb)
    });

    let mut members = Vec::with_capacity(vectors.len());
    let mut coefficients = Vec::with_capacity(vectors.len());
    for v in &vectors {
        let mut table = Table::zero(kind, dim);
        let mut coeffs = Vec::with_capacity(v.len());
        for &(i, c) in v {
            table = table.add(&Table::from_key(&keys[i], dim, c))?;
            coeffs.push((keys[i].clone(), c));
        }
        let label = describe(&coeffs, dim);
        members.push(ScalarField::from_table(label, table));
        coefficients.push(coeffs);
    }
    Ok(FinderOutput {
        family: InvariantFamily { members, provenance: Provenance::FinderOutput, degree: Some(degree), residual: 0.0 },
        kind,
        degree,
        basis_size: n,
        coefficients,
    })
}

/// `Σ_j w_j · null[cols[j]]`.
fn combine(null: &[Sparse], cols: &[usize], w: &[f64]) -> Sparse {
    let mut acc: HashMap<usize, f64> = HashMap::new();
    for (&c, &wj) in cols.iter().zip(w) {
        if wj == 0.0 {
            continue;
        }
        for &(i, x) in &null[c] {
            *acc.entry(i).or_insert(0.0) += wj * x;
        }
    }
    let mut out: Sparse = acc.into_iter().filter(|(_, x)| x.abs() > DROP).collect();
    out.sort_unstable_by_key(|&(i, _)| i);
    out
}

/// Sorted support with the first coefficient positive.
fn canonical(mut v: Sparse) -> Sparse {
    v.sort_unstable_by_key(|&(i, _)| i);
    if let Some(&(_, c)) = v.first() {
        if c < 0.0 {
            v.iter_mut().for_each(|(_, x)| *x = -*x);
        }
    }
    v
}

fn describe(coeffs: &[(CoeffKey, f64)], dim: usize) -> String {
    let names: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    let parts: Vec<String> = coeffs.iter().take(4).map(|(k, c)| format!("{c:+.4}*{}", k.label(&names))).collect();
    let mut s = parts.join(" ");
    if coeffs.len() > 4 {
        s.push_str(" ...");
    }
    s
}
