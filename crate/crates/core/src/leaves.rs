//! Reachable sets of flow words: leaf and orbit clouds, Casimir
//! containment, grid coverage, local dimension, and the leaf
//! correspondence proxy.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{flow, FlowWord, PhaseSpace, ScalarField, VectorField, DEFAULT_STEP};
use crate::linalg;
use crate::poisson::PoissonTensor;
use crate::polarity::{Leg, Verdict};
use crate::rng;

/// Plateau radii used to make fields complete on non-periodic coordinates.
pub const COMPLETION_INNER: f64 = 10.0;
pub const COMPLETION_OUTER: f64 = 20.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WordPolicy {
    pub max_len: usize,
    /// Durations are uniform in `[-max_duration, max_duration]`.
    pub max_duration: f64,
    pub words: usize,
    pub seed: u64,
    pub step: f64,
}

impl Default for WordPolicy {
    fn default() -> Self {
        Self { max_len: 6, max_duration: 1.0, words: 500, seed: 0, step: DEFAULT_STEP }
    }
}

/// One retained word: `(letter, duration)` pairs, last applied first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecordedWord {
    pub index: usize,
    pub letters: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReachCloud {
    pub seed_point: Vec<f64>,
    pub coordinates: Vec<String>,
    pub periodic: Vec<bool>,
    pub fields: Vec<String>,
    pub policy: WordPolicy,
    /// `points[i]` is the endpoint of `words[i]`; `words[0]` is the empty word.
    #[serde(skip)]
    pub points: Vec<Vec<f64>>,
    #[serde(skip)]
    pub words: Vec<RecordedWord>,
    pub dropped: usize,
    pub point_count: usize,
}

impl ReachCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rows for CSV export: coordinates then the word index.
    pub fn rows(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.points.iter().zip(&self.words).map(|(p, w)| (p.as_slice(), w.index))
    }
}

fn draw_words<R: Rng>(rng: &mut R, letters: usize, policy: &WordPolicy) -> Vec<Vec<(usize, f64)>> {
    (0..policy.words)
        .map(|_| {
            if policy.max_len == 0 || letters == 0 {
                return Vec::new();
            }
            let len = rng.gen_range(1..=policy.max_len);
            (0..len)
                .map(|_| {
                    let l = rng.gen_range(0..letters);
                    let t = if policy.max_duration > 0.0 {
                        rng.gen_range(-policy.max_duration..=policy.max_duration)
                    } else {
                        0.0
                    };
                    (l, t)
                })
                .collect()
        })
        .collect()
}

/// Endpoints of random words over `fields` starting at `m`. Words that
/// leave a field's domain are dropped.
pub fn reach_cloud(
    space: &PhaseSpace,
    fields: &[Arc<VectorField>],
    m: &[f64],
    policy: &WordPolicy,
) -> Result<ReachCloud> {
    space.check_point(m)?;
    let mut stream = rng::stream(policy.seed, "words");
    let drawn = draw_words(&mut stream, fields.len(), policy);
    let m0 = space.wrapped(m);
    let ends: Vec<Option<Vec<f64>>> = drawn
        .par_iter()
        .map(|letters| {
            let word = FlowWord::from_letters(letters.iter().map(|&(i, t)| (fields[i].clone(), t)).collect());
            match word.endpoint(&m0, policy.step) {
                Ok(z) => Ok(Some(z)),
                Err(Error::WordDomain { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut points = vec![m0.clone()];
    let mut words = vec![RecordedWord { index: 0, letters: Vec::new() }];
    let mut dropped = 0;
    for (i, (end, letters)) in ends.into_iter().zip(drawn).enumerate() {
        match end {
            Some(z) => {
                points.push(z);
                words.push(RecordedWord { index: i + 1, letters });
            }
            None => dropped += 1,
        }
    }
    Ok(ReachCloud {
        seed_point: m0,
        coordinates: space.coordinates.clone(),
        periodic: space.periodic.clone(),
        fields: fields.iter().map(|f| f.label.clone()).collect(),
        policy: policy.clone(),
        point_count: points.len(),
        points,
        words,
        dropped,
    })
}

/// Hamiltonian fields of `family`, made complete on non-periodic charts.
pub fn complete_hamiltonian_fields(tensor: &PoissonTensor, family: &[ScalarField]) -> Result<Vec<Arc<VectorField>>> {
    family
        .iter()
        .map(|f| {
            let x = tensor.hamiltonian_field(f)?;
            if tensor.space.all_periodic() {
                Ok(Arc::new(x))
            } else {
                x.plateau(COMPLETION_INNER, COMPLETION_OUTER).map(Arc::new)
            }
        })
        .collect()
}

/// Cloud of words over `{X_f : f ∈ family}`.
pub fn leaf_sample(
    tensor: &PoissonTensor,
    family: &[ScalarField],
    m: &[f64],
    policy: &WordPolicy,
) -> Result<ReachCloud> {
    let fields = complete_hamiltonian_fields(tensor, family)?;
    reach_cloud(&tensor.space, &fields, m, policy)
}

/// Samples of one trajectory, every `every` time units, as a cloud.
pub fn trajectory_cloud(x: &VectorField, m: &[f64], total: f64, every: f64, step: f64) -> Result<ReachCloud> {
    let points = flow::trajectory(x, m, total, every, step)?;
    let n = points.len();
    Ok(ReachCloud {
        seed_point: x.space.wrapped(m),
        coordinates: x.space.coordinates.clone(),
        periodic: x.space.periodic.clone(),
        fields: vec![x.label.clone()],
        policy: WordPolicy { max_len: 1, max_duration: total, words: 0, seed: 0, step },
        words: (0..n).map(|i| RecordedWord { index: i, letters: vec![(0, i as f64 * every)] }).collect(),
        point_count: n,
        points,
        dropped: 0,
    })
}

/// `max |f(p) − f(m)|` over the cloud.
pub fn casimir_residual(cloud: &ReachCloud, f: &ScalarField) -> Result<f64> {
    let base = f.eval(&cloud.seed_point)?;
    let mut worst: f64 = 0.0;
    for p in &cloud.points {
        worst = worst.max((f.eval(p)? - base).abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub coordinates: Vec<usize>,
    pub resolution: usize,
    pub cells: usize,
    pub visited: usize,
    pub fraction: f64,
}

fn cell_of(p: &[f64], coords: &[usize], resolution: usize) -> Vec<usize> {
    coords
        .iter()
        .map(|&c| {
            let x = crate::geometry::space::wrap_angle(p[c]) / std::f64::consts::TAU;
            ((x * resolution as f64) as usize).min(resolution - 1)
        })
        .collect()
}

fn check_grid(cloud: &ReachCloud, coords: &[usize], resolution: usize) -> Result<()> {
    if resolution == 0 || coords.is_empty() {
        return Err(Error::InvalidInput("grid needs a positive resolution and at least one coordinate".into()));
    }
    for &c in coords {
        if c >= cloud.periodic.len() || !cloud.periodic[c] {
            return Err(Error::InvalidInput(format!("coordinate {c} is not a periodic coordinate")));
        }
    }
    Ok(())
}

/// Fraction of cells of a uniform grid on the chosen angles hit by the cloud.
pub fn density_report(cloud: &ReachCloud, coords: &[usize], resolution: usize) -> Result<DensityReport> {
    check_grid(cloud, coords, resolution)?;
    let mut seen = std::collections::HashSet::new();
    for p in &cloud.points {
        seen.insert(cell_of(p, coords, resolution));
    }
    let cells = resolution.pow(coords.len() as u32);
    Ok(DensityReport {
        coordinates: coords.to_vec(),
        resolution,
        cells,
        visited: seen.len(),
        fraction: seen.len() as f64 / cells as f64,
    })
}

/// Cells met by the closed straight line `start + s·direction` on the
/// torus of the chosen angles, found by sampling the line far more finely
/// than the grid.
pub fn line_band(
    start: &[f64],
    direction: &[f64],
    period: f64,
    resolution: usize,
) -> std::collections::HashSet<Vec<usize>> {
    let coords: Vec<usize> = (0..start.len()).collect();
    let speed = linalg::norm(direction);
    let cell = std::f64::consts::TAU / resolution as f64;
    let n = ((period * speed / cell) * 64.0).ceil() as usize;
    let mut out = std::collections::HashSet::new();
    for i in 0..=n {
        let s = period * i as f64 / n as f64;
        let p: Vec<f64> = start.iter().zip(direction).map(|(a, d)| a + s * d).collect();
        out.insert(cell_of(&p, &coords, resolution));
    }
    out
}

/// Fraction of all grid cells visited by the cloud but not in `band`.
pub fn coverage_outside(
    cloud: &ReachCloud,
    coords: &[usize],
    resolution: usize,
    band: &std::collections::HashSet<Vec<usize>>,
) -> Result<f64> {
    check_grid(cloud, coords, resolution)?;
    let mut extra = std::collections::HashSet::new();
    for p in &cloud.points {
        let c = cell_of(p, coords, resolution);
        if !band.contains(&c) {
            extra.insert(c);
        }
    }
    Ok(extra.len() as f64 / resolution.pow(coords.len() as u32) as f64)
}

/// Cells per coordinate in the local-dimension grid.
const PCA_CELLS: usize = 4;

/// Number of principal axes of the densest grid cell whose variance
/// exceeds `tolerance` times the largest. Periodic coordinates are
/// unwrapped around the cell centre.
pub fn pca_dimension(cloud: &ReachCloud, tolerance: f64) -> usize {
    if cloud.points.len() < 10 {
        return 0;
    }
    let n = cloud.seed_point.len();
    let tau = std::f64::consts::TAU;
    let mut lo = vec![0.0; n];
    let mut width = vec![tau / PCA_CELLS as f64; n];
    for k in 0..n {
        if !cloud.periodic[k] {
            let (a, b) =
                cloud.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[k]), b.max(p[k])));
            lo[k] = a;
            width[k] = ((b - a) / PCA_CELLS as f64).max(f64::MIN_POSITIVE);
        }
    }
    let index = |p: &[f64]| -> Vec<usize> {
        (0..n)
            .map(|k| {
                let x = if cloud.periodic[k] { crate::geometry::space::wrap_angle(p[k]) } else { p[k] };
                (((x - lo[k]) / width[k]) as usize).min(PCA_CELLS - 1)
            })
            .collect()
    };
    let mut counts: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        counts.entry(index(p)).or_default().push(i);
    }
    // densest cell, ties broken by the smallest cell index
    let (cell, members) =
        counts.iter().max_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| b.0.cmp(a.0))).expect("cloud is non-empty");
    if members.len() < 2 {
        return 0;
    }
    let centre: Vec<f64> = (0..n).map(|k| lo[k] + (cell[k] as f64 + 0.5) * width[k]).collect();
    let local: Vec<Vec<f64>> = members
        .iter()
        .map(|&i| {
            let p = &cloud.points[i];
            (0..n)
                .map(|k| {
                    let d = p[k] - centre[k];
                    if cloud.periodic[k] {
                        crate::geometry::space::shortest_arc(d)
                    } else {
                        d
                    }
                })
                .collect()
        })
        .collect();
    let count = local.len() as f64;
    let mean: Vec<f64> = (0..n).map(|k| local.iter().map(|v| v[k]).sum::<f64>() / count).collect();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for v in &local {
        for a in 0..n {
            for b in 0..n {
                cov[(a, b)] += (v[a] - mean[a]) * (v[b] - mean[b]) / count;
            }
        }
    }
    let eig = SymmetricEigen::new(cov).eigenvalues;
    let largest = eig.iter().copied().fold(0.0, f64::max);
    if largest <= 1e-24 {
        return 0;
    }
    eig.iter().filter(|&&e| e > tolerance * largest).count()
}

/// Distance below which a target counts as reached.
pub const REACH_TOL: f64 = 1e-3;
/// Constancy tolerance for invariants along clouds.
pub const CONSTANCY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct SaturationTarget {
    pub target: Vec<f64>,
    pub reached: Vec<f64>,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafCorrespondenceReport {
    pub verdict: Verdict,
    /// `max |g(p) − g(m)|` for polar-side invariants over the `A′` cloud.
    pub polar_invariant_drift: f64,
    /// `max |f(p) − f(m)|` for `A`-invariants over the `A`-orbit cloud.
    pub invariant_drift: f64,
    pub constancy: bool,
    /// Letters of the `A″` words used for shooting.
    pub letters: usize,
    pub targets: Vec<SaturationTarget>,
    pub saturation: bool,
}

/// Constancy of invariants along both clouds, and saturation: every sampled
/// point of the `A`-orbit of `m` is reached by a word over the polar leg's
/// polar fields (`A″`).
pub fn leaf_correspondence_check(
    tensor: &PoissonTensor,
    action: &Leg,
    polar: &Leg,
    m: &[f64],
    policy: &WordPolicy,
    targets: usize,
) -> Result<LeafCorrespondenceReport> {
    let space = tensor.space.clone();
    let a_prime = complete_hamiltonian_fields(tensor, &action.family.members)?;
    let polar_cloud = reach_cloud(&space, &a_prime, m, policy)?;
    let mut polar_drift: f64 = 0.0;
    for g in &polar.family.members {
        polar_drift = polar_drift.max(casimir_residual(&polar_cloud, g)?);
    }
    let orbit_policy = WordPolicy { words: targets, seed: policy.seed ^ 0x5a5a, ..policy.clone() };
    let orbit_cloud = reach_cloud(&space, &action.generators, m, &orbit_policy)?;
    let mut drift: f64 = 0.0;
    for f in &action.family.members {
        drift = drift.max(casimir_residual(&orbit_cloud, f)?);
    }
    let constancy = polar_drift < CONSTANCY_TOL && drift < CONSTANCY_TOL;

    let a_second = complete_hamiltonian_fields(tensor, &polar.family.members)?;
    let letters = independent_letters(&a_second, m, &space);
    let seed_point = space.wrapped(m);
    let goals: Vec<&Vec<f64>> = orbit_cloud.points.iter().skip(1).collect();
    let reached: Vec<SaturationTarget> = goals
        .par_iter()
        .enumerate()
        .map(|(i, target)| {
            let mut r = rng::stream(policy.seed, &format!("shoot{i}"));
            let z = shoot(&space, &letters, &seed_point, target, policy.step, &mut r)?;
            Ok(SaturationTarget { target: (*target).clone(), distance: space.distance(&z, target), reached: z })
        })
        .collect::<Result<_>>()?;
    let saturation = reached.iter().all(|t| t.distance < REACH_TOL);
    Ok(LeafCorrespondenceReport {
        verdict: Verdict::from_bool(constancy && saturation),
        polar_invariant_drift: polar_drift,
        invariant_drift: drift,
        constancy,
        letters: letters.len(),
        targets: reached,
        saturation,
    })
}

/// Fields with linearly independent values at `m`, chosen greedily.
fn independent_letters(fields: &[Arc<VectorField>], m: &[f64], space: &PhaseSpace) -> Vec<Arc<VectorField>> {
    let mut chosen: Vec<Arc<VectorField>> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let scale = fields.iter().map(|f| linalg::norm(&f.eval(m))).fold(0.0, f64::max);
    for f in fields {
        let mut trial = values.clone();
        trial.push(f.eval(m));
        if linalg::orthonormal_basis(&trial, space.dim, 1e-6, scale).len() == trial.len() {
            values = trial;
            chosen.push(f.clone());
        }
        if chosen.len() == space.dim {
            break;
        }
    }
    chosen
}

const SHOOT_RESTARTS: usize = 8;
const SHOOT_ITERATIONS: usize = 60;

/// Levenberg–Marquardt on the durations of the word `L1 … Lr L1 … Lr`.
fn shoot<R: Rng>(
    space: &PhaseSpace,
    letters: &[Arc<VectorField>],
    from: &[f64],
    target: &[f64],
    step: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if letters.is_empty() {
        return Ok(from.to_vec());
    }
    let word: Vec<Arc<VectorField>> = letters.iter().chain(letters.iter()).cloned().collect();
    let k = word.len();
    let endpoint = |t: &[f64]| -> Result<Vec<f64>> {
        FlowWord::from_letters(word.iter().cloned().zip(t.iter().copied()).collect()).endpoint(from, step)
    };
    let residual = |z: &[f64]| space.displacement(target, z);
    let mut best = from.to_vec();
    let mut best_dist = space.distance(from, target);
    for attempt in 0..SHOOT_RESTARTS {
        let mut t: Vec<f64> =
            if attempt == 0 { vec![0.0; k] } else { (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect() };
        let mut z = endpoint(&t)?;
        let mut r = residual(&z);
        let mut lambda = 1e-3;
        for _ in 0..SHOOT_ITERATIONS {
            let cost = linalg::norm(&r);
            if cost < best_dist {
                best_dist = cost;
                best = z.clone();
            }
            if cost < REACH_TOL * 1e-3 {
                return Ok(z);
            }
            let h = 1e-6;
            let mut jac = DMatrix::<f64>::zeros(space.dim, k);
            for j in 0..k {
                let mut tp = t.clone();
                tp[j] += h;
                let mut tm = t.clone();
                tm[j] -= h;
                let (rp, rm) = (residual(&endpoint(&tp)?), residual(&endpoint(&tm)?));
                for i in 0..space.dim {
                    jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let jt = jac.transpose();
            let g = &jt * nalgebra::DVector::from_column_slice(&r);
            let mut accepted = false;
            for _ in 0..10 {
                let mut a = &jt * &jac;
                for d in 0..k {
                    a[(d, d)] += lambda * (1.0 + a[(d, d)]);
                }
                let Some(delta) = a.lu().solve(&(-&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let tn: Vec<f64> = t.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
                let zn = endpoint(&tn)?;
                let rn = residual(&zn);
                if linalg::norm(&rn) < cost {
                    t = tn;
                    z = zn;
                    r = rn;
                    lambda = (lambda * 0.3).max(1e-12);
                    accepted = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !accepted {
                break;
            }
        }
        if best_dist < REACH_TOL * 1e-3 {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use crate::geometry::{Poly, Table};

    #[test]
    fn empty_words_give_the_seed() {
        let sys = builtin("so3-coadjoint").unwrap();
        let fam: Vec<ScalarField> =
            (0..3).map(|i| ScalarField::from_table("mu", Table::Poly(Poly::coordinate(3, i)))).collect();
        let policy = WordPolicy { max_len: 0, words: 5, ..Default::default() };
        let cloud = leaf_sample(&sys.tensor, &fam, &[0.0, 0.0, 1.0], &policy).unwrap();
        assert!(cloud.points.iter().all(|p| p == &vec![0.0, 0.0, 1.0]));
        assert_eq!(casimir_residual(&cloud, &sys.casimirs[0]).unwrap(), 0.0);
    }

    #[test]
    fn single_point_density_and_dimension() {
        let space = PhaseSpace::torus("T", 2).unwrap();
        let cloud = reach_cloud(&space, &[], &[1.0, 2.0], &WordPolicy { words: 0, ..Default::default() }).unwrap();
        let d = density_report(&cloud, &[0, 1], 8).unwrap();
        assert_eq!(d.visited, 1);
        assert!((d.fraction - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(pca_dimension(&cloud, 0.05), 0);
    }

    #[test]
    fn clouds_are_reproducible() {
        let sys = builtin("t2-rotation").unwrap();
        let fam = vec![ScalarField::from_table("c", Table::Trig(crate::geometry::TrigPoly::cos(vec![1, 1], 1.0)))];
        let policy = WordPolicy { words: 20, seed: 9, step: 1e-2, ..Default::default() };
        let a = leaf_sample(&sys.tensor, &fam, &[0.5, 0.5], &policy).unwrap();
        let b = leaf_sample(&sys.tensor, &fam, &[0.5, 0.5], &policy).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.words, b.words);
    }
}
