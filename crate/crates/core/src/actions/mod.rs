//! Group actions through their infinitesimal generators: orbit tangents,
//! isotropy, invariance certificates and the truncated invariant finder.

mod finder;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

pub use finder::{invariant_finder, FinderOutput};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{FlowWord, PhaseSpace, ScalarField, TableKind, VectorField};
use crate::lie::{GroupModel, LieAlgebra};
use crate::linalg::{self, SubspaceSample, RANK_TOL};
use crate::poisson::PoissonTensor;

/// Vectors whose entries are all below this are treated as zero when
/// estimating orbit ranks.
pub const ORBIT_SCALE: f64 = 1e-4;

/// Certification threshold for invariant functions.
pub const INVARIANCE_TOL: f64 = 1e-8;

/// A Lie algebra acting through generator fields `(e_i)_M`.
#[derive(Clone, Debug)]
pub struct ActionSpec {
    pub name: String,
    pub algebra: LieAlgebra,
    pub space: Arc<PhaseSpace>,
    pub generators: Vec<Arc<VectorField>>,
    pub group: Option<GroupModel>,
    /// Whether the acting group is compact (tori, `SO(3)`), which decides
    /// how isotropy groups are averaged.
    pub compact: bool,
}

impl ActionSpec {
    pub fn new(
        name: impl Into<String>,
        algebra: LieAlgebra,
        space: Arc<PhaseSpace>,
        generators: Vec<VectorField>,
    ) -> Result<Self> {
        check_dim(algebra.dim, generators.len())?;
        for g in &generators {
            check_dim(space.dim, g.dim())?;
        }
        Ok(Self {
            name: name.into(),
            algebra,
            space,
            generators: generators.into_iter().map(Arc::new).collect(),
            group: None,
            compact: false,
        })
    }

    pub fn with_group(mut self, group: GroupModel) -> Self {
        self.group = Some(group);
        self
    }

    pub fn compact(mut self, compact: bool) -> Self {
        self.compact = compact;
        self
    }

    /// The coadjoint action on `g*`: `ξ_M(μ) = −ad*_ξ μ = B(μ)·ξ`.
    pub fn coadjoint(alg: &LieAlgebra, tensor: &PoissonTensor) -> Result<Self> {
        let n = alg.dim;
        let mut gens = Vec::with_capacity(n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let f = ScalarField::from_table(
                format!("<mu,{}>", alg.labels[i]),
                crate::geometry::Table::Poly(crate::geometry::Poly::coordinate(n, i)),
            );
            gens.push(tensor.hamiltonian_field(&f)?.with_label(format!("({})_M", alg.labels[i])));
        }
        Self::new(format!("coadjoint {}", alg.name), alg.clone(), tensor.space.clone(), gens)
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim
    }

    /// Generator values as columns: `G(m)_{·i} = (e_i)_M(m)`.
    pub fn generator_matrix(&self, m: &[f64]) -> DMatrix<f64> {
        let cols: Vec<Vec<f64>> = self.generators.iter().map(|g| g.eval(m)).collect();
        linalg::columns_to_matrix(&cols, self.space.dim)
    }

    /// `ξ_M = Σ ξ^i (e_i)_M`.
    pub fn generator(&self, xi: &[f64]) -> Result<VectorField> {
        check_dim(self.dim(), xi.len())?;
        let fields: Vec<VectorField> = self.generators.iter().map(|g| (**g).clone()).collect();
        VectorField::linear_combination(self.space.clone(), format!("xi_M {xi:?}"), xi, &fields)
    }

    /// `ξ_M(m)`.
    pub fn generator_at(&self, xi: &[f64], m: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.generator_matrix(m), xi)
    }

    /// `T_m(G·m) = span{(e_i)_M(m)}`.
    pub fn orbit_tangent(&self, m: &[f64]) -> SubspaceSample {
        span_at(&self.generators, m, self.space.dim)
    }

    /// `{ξ : ξ_M(m) = 0}`, as a subspace of the algebra.
    pub fn isotropy_algebra(&self, m: &[f64]) -> SubspaceSample {
        let g = self.generator_matrix(m);
        let basis = linalg::nullspace(&g, RANK_TOL, ORBIT_SCALE);
        let basis = linalg::orthonormal_basis(&basis, self.dim(), 0.5, 1.0);
        SubspaceSample::from_basis(m, self.dim(), basis, RANK_TOL)
    }

    /// The element `exp(ξ)` acting on `m`, realised as the time-one flow of `ξ_M`.
    pub fn act(&self, xi: &[f64], m: &[f64], step: f64) -> Result<Vec<f64>> {
        let x = self.generator(xi)?;
        crate::geometry::flow(&x, m, 1.0, step)
    }

    /// A flow word over the generators.
    pub fn word(&self, letters: &[(usize, f64)]) -> FlowWord {
        FlowWord::from_letters(letters.iter().map(|&(i, t)| (self.generators[i].clone(), t)).collect())
    }

    /// Max over samples and generators of `|(e_i)_M[f]|`.
    pub fn check_invariance(&self, f: &ScalarField, samples: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for z in samples {
            for g in &self.generators {
                worst = worst.max(g.apply(f, z)?.abs());
            }
        }
        Ok(worst)
    }

    /// Largest deviation from `[ξ_M, η_M] = −[ξ, η]_M` over basis pairs
    /// and samples, with `[X, Y] = DY·X − DX·Y`.
    pub fn bracket_residual(&self, samples: &[Vec<f64>]) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for z in samples {
            let vals: Vec<Vec<f64>> = self.generators.iter().map(|g| g.eval(z)).collect();
            let jacs: Vec<DMatrix<f64>> = self.generators.iter().map(|g| g.jacobian(z)).collect();
            for i in 0..n {
                for j in (i + 1)..n {
                    let lie = linalg::mat_vec(&jacs[j], &vals[i]);
                    let back = linalg::mat_vec(&jacs[i], &vals[j]);
                    let br = self.algebra.bracket(&unit(n, i), &unit(n, j));
                    let rhs = self.generator_at(&br, z);
                    for k in 0..self.space.dim {
                        worst = worst.max((lie[k] - back[k] + rhs[k]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest violation of `X[{f,g}] = {X[f], g} + {f, X[g]}` over the
    /// generators, the given function pairs and samples.
    pub fn canonical_residual(
        &self,
        tensor: &PoissonTensor,
        pairs: &[(ScalarField, ScalarField)],
        samples: &[Vec<f64>],
    ) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for z in samples {
            let b = tensor.matrix(z);
            let n = self.space.dim;
            let db: Vec<DMatrix<f64>> = (0..n).map(|k| tensor.derivative(z, k)).collect();
            for (f, g) in pairs {
                let (df, dg) = (f.gradient(z)?, g.gradient(z)?);
                let (hf, hg) = (f.hessian(z)?, g.hessian(z)?);
                let bdf = linalg::mat_vec(&b, &df);
                let bdg = linalg::mat_vec(&b, &dg);
                // d{f,g} = H_f B dg − H_g B df + (df·∂_k B·dg)_k
                let mut dfg = linalg::mat_vec(&hf, &bdg);
                let hgbdf = linalg::mat_vec(&hg, &bdf);
                for k in 0..n {
                    dfg[k] -= hgbdf[k];
                    dfg[k] += linalg::dot(&df, &linalg::mat_vec(&db[k], &dg));
                }
                for x in &self.generators {
                    let xv = x.eval(z);
                    let jx = x.jacobian(z);
                    // d(X[f]) = H_f X + DXᵀ df
                    let dxf: Vec<f64> = linalg::mat_vec(&hf, &xv)
                        .iter()
                        .zip(linalg::mat_vec(&jx.transpose(), &df))
                        .map(|(a, b)| a + b)
                        .collect();
                    let dxg: Vec<f64> = linalg::mat_vec(&hg, &xv)
                        .iter()
                        .zip(linalg::mat_vec(&jx.transpose(), &dg))
                        .map(|(a, b)| a + b)
                        .collect();
                    let lhs = linalg::dot(&dfg, &xv);
                    let rhs = linalg::dot(&dxf, &bdg) + linalg::dot(&df, &linalg::mat_vec(&b, &dxg));
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
        Ok(worst)
    }

    /// The table family the generators are written in, if any.
    pub fn table_kind(&self) -> Option<TableKind> {
        let mut kind = None;
        for g in &self.generators {
            for t in g.tables()? {
                match kind {
                    None => kind = Some(t.kind()),
                    Some(k) if k != t.kind() => return None,
                    _ => {}
                }
            }
        }
        kind.or(Some(if self.space.all_periodic() { TableKind::Trig } else { TableKind::Poly }))
    }
}

/// `span{X(m)}` over the given fields, with the orbit rank threshold.
pub fn span_at(fields: &[Arc<VectorField>], m: &[f64], dim: usize) -> SubspaceSample {
    let cols = fields.iter().map(|g| g.eval(m)).collect();
    SubspaceSample::from_vectors_scaled(m, dim, cols, RANK_TOL, ORBIT_SCALE)
}

pub(crate) fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    UserSupplied,
    FinderOutput,
}

/// Functions certified invariant under a set of generator fields.
#[derive(Clone, Debug)]
pub struct InvariantFamily {
    pub members: Vec<ScalarField>,
    pub provenance: Provenance,
    /// Truncation degree when produced by the finder.
    pub degree: Option<usize>,
    /// Largest `|X[f]|` seen while certifying.
    pub residual: f64,
}

impl InvariantFamily {
    /// Certifies user-supplied functions against `generators` at `samples`.
    pub fn certify(members: Vec<ScalarField>, generators: &[Arc<VectorField>], samples: &[Vec<f64>]) -> Result<Self> {
        let mut worst: f64 = 0.0;
        for f in &members {
            for z in samples {
                for g in generators {
                    worst = worst.max(g.apply(f, z)?.abs());
                }
            }
        }
        if worst >= INVARIANCE_TOL {
            return Err(Error::HypothesisViolation(format!("family is not invariant: residual {worst:e}")));
        }
        Ok(Self { members, provenance: Provenance::UserSupplied, degree: None, residual: worst })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `X_f` for every member.
    pub fn hamiltonian_fields(&self, tensor: &PoissonTensor) -> Result<Vec<Arc<VectorField>>> {
        self.members.iter().map(|f| tensor.hamiltonian_field(f).map(Arc::new)).collect()
    }
}

/// Largest `dist(F_t(Φ_g(z)), Φ_g(F_t(z)))` where `F_t` flows `X_f` for
/// members of `family` and `Φ_g` is a random generator word.
pub fn commute_check<R: Rng + ?Sized>(
    action: &ActionSpec,
    tensor: &PoissonTensor,
    family: &InvariantFamily,
    samples: &[Vec<f64>],
    max_time: f64,
    step: f64,
    rng: &mut R,
) -> Result<f64> {
    let fields = family.hamiltonian_fields(tensor)?;
    let mut worst: f64 = 0.0;
    if fields.is_empty() || max_time == 0.0 {
        return Ok(0.0);
    }
    for z in samples {
        let x = &fields[rng.gen_range(0..fields.len())];
        let t = rng.gen_range(-max_time..=max_time);
        let letters: Vec<(usize, f64)> =
            (0..2).map(|_| (rng.gen_range(0..action.dim()), rng.gen_range(-max_time..=max_time))).collect();
        let g = action.word(&letters);
        let f = FlowWord::from_letters(vec![(x.clone(), t)]);
        let a = f.endpoint(&g.endpoint(z, step)?, step)?;
        let b = g.endpoint(&f.endpoint(z, step)?, step)?;
        worst = worst.max(action.space.distance(&a, &b));
    }
    Ok(worst)
}

/// Projector onto the fixed vectors of a finite list of linear maps:
/// their average.
pub fn fixed_point_projector(maps: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let first = maps.first().ok_or_else(|| Error::InvalidInput("no group elements to average".into()))?;
    let mut sum = DMatrix::zeros(first.nrows(), first.ncols());
    for m in maps {
        if m.shape() != first.shape() {
            return Err(Error::Dimension { expected: first.nrows(), got: m.nrows() });
        }
        sum += m;
    }
    Ok(sum / maps.len() as f64)
}

/// Number of equispaced angles used to average over a circle.
pub const CIRCLE_SAMPLES: usize = 64;

/// The maps `exp(s·A)` for `s = 2πk/(ω·64)`, where `A` generates a circle
/// action with angular frequency `ω` (read off the spectrum of `A`).
pub fn circle_sample(generator: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    let period = circle_period(generator)?;
    Ok((0..CIRCLE_SAMPLES)
        .map(|k| crate::lie::group::expm(&(generator * (period * k as f64 / CIRCLE_SAMPLES as f64))))
        .collect())
}

/// Smallest `T > 0` with `exp(T·A) = I`, for `A` with purely imaginary,
/// mutually commensurate eigenvalues.
pub fn circle_period(generator: &DMatrix<f64>) -> Result<f64> {
    let eig = generator.clone().complex_eigenvalues();
    let scale = generator.amax().max(1e-300);
    let mut freqs: Vec<f64> = Vec::new();
    for e in eig.iter() {
        if e.re.abs() > 1e-9 * scale {
            return Err(Error::UnsupportedIsotropy(format!(
                "generator has a non-imaginary eigenvalue {e}; isotropy is not compact"
            )));
        }
        if e.im.abs() > 1e-9 * scale {
            freqs.push(e.im.abs());
        }
    }
    if freqs.is_empty() {
        if generator.amax() > 1e-12 {
            return Err(Error::UnsupportedIsotropy("nilpotent isotropy generator".into()));
        }
        return Ok(std::f64::consts::TAU);
    }
    let base = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    // all frequencies must be integer multiples of a common unit
    for unit_div in 1..=12u32 {
        let unit = base / unit_div as f64;
        if freqs.iter().all(|w| ((w / unit) - (w / unit).round()).abs() < 1e-8) {
            return Ok(std::f64::consts::TAU / unit);
        }
    }
    Err(Error::UnsupportedIsotropy("incommensurate isotropy frequencies".into()))
}
