//! Polar and double-polar distributions, the classical and singular polar
//! formulas, and the dual-pair, von Neumann and Howe verdicts.
//!
//! All verdicts are pointwise: tangent spaces are compared at sample
//! points, and invariants come from a truncated basis, so every result is
//! relative to the truncation degree it reports.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::actions::{self, circle_sample, fixed_point_projector, invariant_finder, ActionSpec, InvariantFamily};
use crate::error::{Error, Result};
use crate::geometry::{TableKind, VectorField};
use crate::linalg::{self, SubspaceSample, RANK_TOL};
use crate::poisson::PoissonTensor;

/// Largest principal angle accepted when two tangent samples are called equal.
pub const EQUALITY_TOL: f64 = 1e-6;
/// `A′ ⊆ A^⊥` containment tolerance.
pub const CONTAINMENT_TOL: f64 = 1e-8;
/// Brackets below this count as commuting.
pub const CENTRALIZER_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// `span{X_f(m) : f ∈ family}`.
pub fn polar_distribution(tensor: &PoissonTensor, family: &InvariantFamily, m: &[f64]) -> Result<SubspaceSample> {
    let b = tensor.matrix(m);
    let mut vectors = Vec::with_capacity(family.len());
    let mut grad_scale: f64 = 0.0;
    for f in &family.members {
        let df = f.gradient(m)?;
        grad_scale = grad_scale.max(linalg::norm(&df));
        vectors.push(linalg::mat_vec(&b, &df));
    }
    Ok(SubspaceSample::from_vectors_scaled(m, tensor.dim(), vectors, RANK_TOL, b.norm() * grad_scale))
}

/// `(g·m)^ω = B♯((g·m)°)`.
pub fn classical_polar(tensor: &PoissonTensor, action: &ActionSpec, m: &[f64]) -> Result<SubspaceSample> {
    tensor.symplectic_orthogonal(&action.orbit_tangent(m))
}

/// `B♯(((g·m)°)^H)`, with `H` the identity component of the isotropy group,
/// averaged over circles. `H` must be a torus generated by closed circles.
pub fn singular_polar_formula(tensor: &PoissonTensor, action: &ActionSpec, m: &[f64]) -> Result<SubspaceSample> {
    let orbit = action.orbit_tangent(m);
    let ann = PoissonTensor::annihilator(&orbit);
    let fixed = fixed_covectors(action, m, &ann)?;
    let b = tensor.matrix(m);
    let vectors = fixed.iter().map(|a| linalg::mat_vec(&b, a)).collect();
    Ok(SubspaceSample::from_vectors_scaled(m, tensor.dim(), vectors, RANK_TOL, b.norm()))
}

/// Projection of `ann` onto the covectors fixed by the isotropy torus.
fn fixed_covectors(action: &ActionSpec, m: &[f64], ann: &SubspaceSample) -> Result<Vec<Vec<f64>>> {
    let h = action.isotropy_algebra(m);
    if h.rank == 0 {
        return Ok(ann.basis.clone());
    }
    if !action.algebra.is_abelian_span(&h.basis, 1e-9) {
        return Err(Error::UnsupportedIsotropy(format!(
            "isotropy algebra at {m:?} is not abelian; only toral isotropy is averaged"
        )));
    }
    let n = action.space.dim;
    let mut projector = DMatrix::<f64>::identity(n, n);
    for xi in &h.basis {
        // the linearised isotropy action on T_m M, transposed onto covectors
        let mut a = DMatrix::zeros(n, n);
        for (g, &c) in action.generators.iter().zip(xi) {
            if c != 0.0 {
                a += g.jacobian(m) * c;
            }
        }
        let p = fixed_point_projector(&circle_sample(&a.transpose())?)?;
        projector = p * projector;
    }
    let images: Vec<Vec<f64>> = ann.basis.iter().map(|v| linalg::mat_vec(&projector, v)).collect();
    Ok(linalg::orthonormal_basis(&images, n, 1e-6, 1.0))
}

/// A set of fields together with the invariants the finder produced for them.
#[derive(Clone, Debug)]
pub struct Leg {
    pub name: String,
    pub generators: Vec<Arc<VectorField>>,
    pub family: InvariantFamily,
    pub kind: TableKind,
    pub degree: usize,
}

impl Leg {
    pub fn from_action(action: &ActionSpec, degree: usize) -> Result<Self> {
        let kind = action
            .table_kind()
            .ok_or_else(|| Error::Representation(format!("action {} has no common coefficient tables", action.name)))?;
        Self::from_generators(action.name.clone(), action.generators.clone(), kind, action.space.dim, degree)
    }

    pub fn from_generators(
        name: impl Into<String>,
        generators: Vec<Arc<VectorField>>,
        kind: TableKind,
        dim: usize,
        degree: usize,
    ) -> Result<Self> {
        let out = invariant_finder(&generators, kind, dim, degree)?;
        Ok(Self { name: name.into(), generators, family: out.family, kind, degree })
    }

    /// The leg generated by the Hamiltonian fields of this leg's invariants.
    pub fn polar(&self, tensor: &PoissonTensor) -> Result<Self> {
        let fields = self.family.hamiltonian_fields(tensor)?;
        Self::from_generators(format!("polar of {}", self.name), fields, self.kind, tensor.dim(), self.degree)
    }

    pub fn orbit_tangent(&self, m: &[f64]) -> SubspaceSample {
        actions::span_at(&self.generators, m, m.len())
    }

    pub fn polar_at(&self, tensor: &PoissonTensor, m: &[f64]) -> Result<SubspaceSample> {
        polar_distribution(tensor, &self.family, m)
    }
}

/// The truncated chain `A → A′ → A″` at one degree.
#[derive(Clone, Debug)]
pub struct PolarChain {
    pub degree: usize,
    pub action: Leg,
    pub polar: Leg,
}

impl PolarChain {
    pub fn new(tensor: &PoissonTensor, action: &ActionSpec, degree: usize) -> Result<Self> {
        let leg = Leg::from_action(action, degree)?;
        let polar = leg.polar(tensor)?;
        Ok(Self { degree, action: leg, polar })
    }

    /// `A′(m)`.
    pub fn polar_at(&self, tensor: &PoissonTensor, m: &[f64]) -> Result<SubspaceSample> {
        self.action.polar_at(tensor, m)
    }

    /// `A″(m)`.
    pub fn double_polar_at(&self, tensor: &PoissonTensor, m: &[f64]) -> Result<SubspaceSample> {
        self.polar.polar_at(tensor, m)
    }
}

/// A sample of `A″(m)` at truncation `degree`.
pub fn double_polar(tensor: &PoissonTensor, action: &ActionSpec, m: &[f64], degree: usize) -> Result<SubspaceSample> {
    PolarChain::new(tensor, action, degree)?.double_polar_at(tensor, m)
}

#[derive(Clone, Debug, Serialize)]
pub struct PolarReport {
    pub point: Vec<f64>,
    pub degree: Option<usize>,
    pub family_size: usize,
    pub polar: SubspaceSample,
    pub classical: SubspaceSample,
    /// `None` when the isotropy type is not supported.
    pub singular: Option<SubspaceSample>,
    /// Largest principal angle of `A′(m)` measured against `A^⊥(m)`.
    pub containment_angle: f64,
    pub polar_in_classical: bool,
}

pub fn polar_report(
    tensor: &PoissonTensor,
    action: &ActionSpec,
    family: &InvariantFamily,
    m: &[f64],
) -> Result<PolarReport> {
    let polar = polar_distribution(tensor, family, m)?;
    let classical = classical_polar(tensor, action, m)?;
    let singular = match singular_polar_formula(tensor, action, m) {
        Ok(s) => Some(s),
        Err(Error::UnsupportedIsotropy(_)) => None,
        Err(e) => return Err(e),
    };
    let angle = polar.containment_angle_in(&classical);
    Ok(PolarReport {
        point: m.to_vec(),
        degree: family.degree,
        family_size: family.len(),
        polar,
        classical,
        singular,
        containment_angle: angle,
        polar_in_classical: angle < CONTAINMENT_TOL,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VonNeumannSample {
    pub point: Vec<f64>,
    pub orbit_rank: usize,
    pub polar_rank: usize,
    pub double_polar_rank: usize,
    pub classical_rank: usize,
    /// Largest principal angle between `A″(m)` and `T_m(G·m)`, or π/2 on a
    /// rank mismatch.
    pub distance: f64,
    pub matches: bool,
    pub polar_in_classical: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VonNeumannReport {
    pub verdict: Verdict,
    pub degree: usize,
    pub action_invariants: usize,
    pub polar_invariants: usize,
    pub samples: Vec<VonNeumannSample>,
    /// Degree of the confirmation run, when one was needed.
    pub rerun_degree: Option<usize>,
    pub rerun_samples: Vec<VonNeumannSample>,
    pub note: String,
}

fn von_neumann_samples(
    tensor: &PoissonTensor,
    action: &ActionSpec,
    chain: &PolarChain,
    samples: &[Vec<f64>],
) -> Result<Vec<VonNeumannSample>> {
    samples
        .par_iter()
        .map(|m| {
            let orbit = action.orbit_tangent(m);
            let a1 = chain.polar_at(tensor, m)?;
            let a2 = chain.double_polar_at(tensor, m)?;
            let classical = classical_polar(tensor, action, m)?;
            let distance = orbit.distance(&a2);
            Ok(VonNeumannSample {
                point: m.clone(),
                orbit_rank: orbit.rank,
                polar_rank: a1.rank,
                double_polar_rank: a2.rank,
                classical_rank: classical.rank,
                distance,
                matches: orbit.rank == a2.rank && distance < EQUALITY_TOL,
                polar_in_classical: a1.is_contained_in(&classical, CONTAINMENT_TOL),
            })
        })
        .collect()
}

/// PASS when `A″(m) = T_m(G·m)` at every sample; FAIL when a mismatch
/// survives raising the degree by two; INCONCLUSIVE otherwise.
pub fn von_neumann_test(
    tensor: &PoissonTensor,
    action: &ActionSpec,
    samples: &[Vec<f64>],
    degree: usize,
) -> Result<VonNeumannReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("von Neumann test needs at least one sample".into()));
    }
    let chain = PolarChain::new(tensor, action, degree)?;
    let first = von_neumann_samples(tensor, action, &chain, samples)?;
    let note = "pointwise comparison of A'' with the orbit tangent; relative to the truncation degree".to_string();
    let mut report = VonNeumannReport {
        verdict: Verdict::Pass,
        degree,
        action_invariants: chain.action.family.len(),
        polar_invariants: chain.polar.family.len(),
        samples: first,
        rerun_degree: None,
        rerun_samples: Vec::new(),
        note,
    };
    let failing: Vec<Vec<f64>> = report.samples.iter().filter(|s| !s.matches).map(|s| s.point.clone()).collect();
    if failing.is_empty() {
        return Ok(report);
    }
    let rerun = PolarChain::new(tensor, action, degree + 2)?;
    let second = von_neumann_samples(tensor, action, &rerun, &failing)?;
    report.verdict = if second.iter().any(|s| !s.matches) { Verdict::Fail } else { Verdict::Inconclusive };
    report.rerun_degree = Some(degree + 2);
    report.rerun_samples = second;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct HoweReport {
    pub verdict: Verdict,
    /// `max |{f, g}(z)|` over the two families and the samples.
    pub residual: f64,
    /// Indices `(f, g)` and sample of the largest bracket.
    pub worst: Option<(usize, usize, usize)>,
    pub note: String,
}

/// Mutual centralizing check `{famA, famB} = 0`.
pub fn howe_check(
    tensor: &PoissonTensor,
    fam_a: &InvariantFamily,
    fam_b: &InvariantFamily,
    samples: &[Vec<f64>],
) -> Result<HoweReport> {
    let per_sample: Vec<(f64, Option<(usize, usize)>)> = samples
        .par_iter()
        .map(|z| {
            let b = tensor.matrix(z);
            let ga = fam_a.members.iter().map(|f| f.gradient(z)).collect::<Result<Vec<_>>>()?;
            let gb = fam_b
                .members
                .iter()
                .map(|g| g.gradient(z).map(|d| linalg::mat_vec(&b, &d)))
                .collect::<Result<Vec<_>>>()?;
            let mut worst = (0.0, None);
            for (i, df) in ga.iter().enumerate() {
                for (j, xg) in gb.iter().enumerate() {
                    let v = linalg::dot(df, xg).abs();
                    if v > worst.0 || worst.1.is_none() {
                        worst = (v, Some((i, j)));
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let mut residual = 0.0;
    let mut worst = None;
    for (k, (v, ij)) in per_sample.into_iter().enumerate() {
        if let Some((i, j)) = ij {
            if worst.is_none() || v > residual {
                residual = v;
                worst = Some((i, j, k));
            }
        }
    }
    Ok(HoweReport {
        verdict: Verdict::from_bool(residual < CENTRALIZER_TOL),
        residual,
        worst,
        note: "only the centralizing direction is checked; equality is read off the double polar".into(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DualPairSample {
    pub point: Vec<f64>,
    pub polar_a_rank: usize,
    pub orbit_b_rank: usize,
    pub polar_b_rank: usize,
    pub orbit_a_rank: usize,
    pub distance_a: f64,
    pub distance_b: f64,
    pub matches: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DualPairReport {
    pub verdict: Verdict,
    pub degree: usize,
    pub samples: Vec<DualPairSample>,
    pub note: String,
}

/// Compares `A′(m)` (from `a`'s invariants) with `b`'s orbit tangent and
/// `B′(m)` with `a`'s orbit tangent.
pub fn dual_pair_check(tensor: &PoissonTensor, a: &Leg, b: &Leg, samples: &[Vec<f64>]) -> Result<DualPairReport> {
    let rows: Vec<DualPairSample> = samples
        .par_iter()
        .map(|m| {
            let pa = a.polar_at(tensor, m)?;
            let ob = b.orbit_tangent(m);
            let pb = b.polar_at(tensor, m)?;
            let oa = a.orbit_tangent(m);
            let (da, db) = (pa.distance(&ob), pb.distance(&oa));
            Ok(DualPairSample {
                point: m.clone(),
                polar_a_rank: pa.rank,
                orbit_b_rank: ob.rank,
                polar_b_rank: pb.rank,
                orbit_a_rank: oa.rank,
                distance_a: da,
                distance_b: db,
                matches: pa.rank == ob.rank && pb.rank == oa.rank && da < EQUALITY_TOL && db < EQUALITY_TOL,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DualPairReport {
        verdict: Verdict::from_bool(rows.iter().all(|r| r.matches)),
        degree: a.degree.max(b.degree),
        samples: rows,
        note: "pointwise tangent comparison; equal partitions from different pseudogroups are not distinguished".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use crate::rng;

    fn points(sys: &crate::builtins::System, n: usize) -> Vec<Vec<f64>> {
        sys.sample_points(&mut rng::stream(3, "polarity"), n)
    }

    #[test]
    fn verdicts_on_the_decided_examples() {
        for (name, expected) in
            [("t2-rotation", Verdict::Pass), ("so3-coadjoint", Verdict::Pass), ("t4-example-7-8", Verdict::Fail)]
        {
            let sys = builtin(name).unwrap();
            let r = von_neumann_test(&sys.tensor, &sys.action, &points(&sys, 5), 4).unwrap();
            assert_eq!(r.verdict, expected, "{name}: {:?}", r.samples[0]);
        }
    }

    #[test]
    fn t4_polar_has_rank_three_inside_classical_polar() {
        let sys = builtin("t4-example-7-8").unwrap();
        let leg = Leg::from_action(&sys.action, 4).unwrap();
        for m in points(&sys, 10) {
            let r = polar_report(&sys.tensor, &sys.action, &leg.family, &m).unwrap();
            assert_eq!(r.polar.rank, 3);
            assert_eq!(r.classical.rank, 3);
            assert!(r.polar_in_classical);
            let expected = SubspaceSample::from_basis(
                &m,
                4,
                vec![
                    vec![1.0, 0.0, 0.0, 0.0],
                    vec![0.0, 0.0, 1.0, 0.0],
                    vec![0.0, -1.0, 0.0, std::f64::consts::FRAC_1_SQRT_2],
                ],
                RANK_TOL,
            );
            assert!(r.polar.equals(&expected, 1e-10));
        }
    }

    #[test]
    fn so3_singular_formula_at_pole_is_zero() {
        let sys = builtin("so3-coadjoint").unwrap();
        let m = [0.0, 0.0, 1.0];
        let s = singular_polar_formula(&sys.tensor, &sys.action, &m).unwrap();
        assert_eq!(s.rank, 0);
        let c = classical_polar(&sys.tensor, &sys.action, &m).unwrap();
        assert_eq!(c.rank, 0);
    }

    #[test]
    fn singular_equals_classical_at_free_points() {
        let sys = builtin("t2-rotation").unwrap();
        for m in points(&sys, 5) {
            let s = singular_polar_formula(&sys.tensor, &sys.action, &m).unwrap();
            let c = classical_polar(&sys.tensor, &sys.action, &m).unwrap();
            assert!(s.equals(&c, 1e-8));
            assert_eq!(s.rank, 1);
        }
    }

    #[test]
    fn dual_pairs() {
        let sys = builtin("t2-rotation").unwrap();
        let a = Leg::from_action(&sys.action, 4).unwrap();
        let b = a.polar(&sys.tensor).unwrap();
        assert_eq!(dual_pair_check(&sys.tensor, &a, &b, &points(&sys, 5)).unwrap().verdict, Verdict::Pass);
        let sys = builtin("t4-example-7-8").unwrap();
        let a = Leg::from_action(&sys.action, 4).unwrap();
        let b = a.polar(&sys.tensor).unwrap();
        assert_eq!(dual_pair_check(&sys.tensor, &a, &b, &points(&sys, 5)).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn howe_constants_and_negative_control() {
        let sys = builtin("t2-irrational-flow").unwrap();
        let a = Leg::from_action(&sys.action, 4).unwrap();
        assert_eq!(a.family.len(), 1);
        let all = invariant_finder(&[], TableKind::Trig, 2, 4).unwrap().family;
        let pts = points(&sys, 20);
        assert_eq!(howe_check(&sys.tensor, &a.family, &all, &pts).unwrap().verdict, Verdict::Pass);
        let rot = builtin("t2-rotation").unwrap();
        let theta2 = Leg::from_action(&rot.action, 4).unwrap();
        let r = howe_check(&sys.tensor, &theta2.family, &all, &pts).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.residual > 0.1);
    }
}
