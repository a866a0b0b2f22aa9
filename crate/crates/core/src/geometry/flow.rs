//! Fixed-step RK4 flows, their variational equations, and flow words.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::field::VectorField;
use crate::error::{check_dim, Error, Result};

pub const DEFAULT_STEP: f64 = 1e-3;

fn axpy(z: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    z.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn check_state(x: &VectorField, z: &[f64], time: f64) -> Result<()> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericDomain(format!("flow of {} at t = {time}", x.label)));
    }
    if let Some(b) = &x.validity {
        if !b.contains(z) {
            return Err(Error::DomainExit { time, point: z.to_vec() });
        }
    }
    Ok(())
}

/// Step schedule covering `[0, t]`: full steps of `±step` and one partial
/// step landing exactly on `t`.
fn schedule(t: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("flow step must be positive, got {step}")));
    }
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("flow time must be finite, got {t}")));
    }
    let n = (t.abs() / step).floor();
    let mut out = vec![step.copysign(t); n as usize];
    let rest = t - t.signum() * n * step;
    if rest.abs() > 1e-15 * step.max(t.abs()) {
        out.push(rest);
    }
    Ok(out)
}

/// `F_t(z0)` by classical RK4, wrapping periodic coordinates after each step.
pub fn flow(x: &VectorField, z0: &[f64], t: f64, step: f64) -> Result<Vec<f64>> {
    check_dim(x.dim(), z0.len())?;
    let mut z = x.space.wrapped(z0);
    let mut time = 0.0;
    for h in schedule(t, step)? {
        let k1 = x.eval(&z);
        let k2 = x.eval(&axpy(&z, 0.5 * h, &k1));
        let k3 = x.eval(&axpy(&z, 0.5 * h, &k2));
        let k4 = x.eval(&axpy(&z, h, &k3));
        for i in 0..z.len() {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        x.space.wrap(&mut z);
        time += h;
        check_state(x, &z, time)?;
    }
    Ok(z)
}

/// Trajectory samples `F_{k·every}(z0)` for `k = 0..=⌊t/every⌋`.
pub fn trajectory(x: &VectorField, z0: &[f64], t: f64, every: f64, step: f64) -> Result<Vec<Vec<f64>>> {
    if every.is_nan() || every <= 0.0 {
        return Err(Error::InvalidInput(format!("sampling interval must be positive, got {every}")));
    }
    let n = (t.abs() / every).floor() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut z = x.space.wrapped(z0);
    out.push(z.clone());
    for _ in 0..n {
        z = flow(x, &z, every.copysign(t), step)?;
        out.push(z.clone());
    }
    Ok(out)
}

/// `F_t(z0)` together with `T F_t · V` for the tangent columns of `v`,
/// integrating the variational equation `V' = DX(z) V` with the same RK4.
pub fn flow_with_tangent(
    x: &VectorField,
    z0: &[f64],
    v: &DMatrix<f64>,
    t: f64,
    step: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_dim(x.dim(), z0.len())?;
    check_dim(x.dim(), v.nrows())?;
    let mut z = x.space.wrapped(z0);
    let mut w = v.clone();
    let mut time = 0.0;
    for h in schedule(t, step)? {
        let (k1, j1) = (x.eval(&z), x.jacobian(&z));
        let l1 = &j1 * &w;
        let za = axpy(&z, 0.5 * h, &k1);
        let (k2, j2) = (x.eval(&za), x.jacobian(&za));
        let l2 = &j2 * (&w + &l1 * (0.5 * h));
        let zb = axpy(&z, 0.5 * h, &k2);
        let (k3, j3) = (x.eval(&zb), x.jacobian(&zb));
        let l3 = &j3 * (&w + &l2 * (0.5 * h));
        let zc = axpy(&z, h, &k3);
        let (k4, j4) = (x.eval(&zc), x.jacobian(&zc));
        let l4 = &j4 * (&w + &l3 * h);
        for i in 0..z.len() {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        w += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
        x.space.wrap(&mut z);
        time += h;
        check_state(x, &z, time)?;
        if w.iter().any(|c| !c.is_finite()) {
            return Err(Error::NumericDomain(format!("tangent flow of {} at t = {time}", x.label)));
        }
    }
    Ok((z, w))
}

#[derive(Clone, Debug)]
pub struct Letter {
    pub field: Arc<VectorField>,
    pub duration: f64,
}

/// `F¹_{t1} ∘ F²_{t2} ∘ … ∘ F^k_{tk}`: the last letter flows first.
#[derive(Clone, Debug, Default)]
pub struct FlowWord {
    pub letters: Vec<Letter>,
}

impl FlowWord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_letters(letters: Vec<(Arc<VectorField>, f64)>) -> Self {
        Self { letters: letters.into_iter().map(|(field, duration)| Letter { field, duration }).collect() }
    }

    pub fn push(&mut self, field: Arc<VectorField>, duration: f64) {
        self.letters.push(Letter { field, duration });
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.letters.iter().map(|l| l.duration.abs()).sum()
    }

    /// The word whose endpoint map inverts this one.
    pub fn inverse(&self) -> FlowWord {
        FlowWord {
            letters: self
                .letters
                .iter()
                .rev()
                .map(|l| Letter { field: l.field.clone(), duration: -l.duration })
                .collect(),
        }
    }

    /// `self ∘ other`.
    pub fn concat(&self, other: &FlowWord) -> FlowWord {
        let mut letters = self.letters.clone();
        letters.extend(other.letters.iter().cloned());
        FlowWord { letters }
    }

    pub fn endpoint(&self, z0: &[f64], step: f64) -> Result<Vec<f64>> {
        let mut z = z0.to_vec();
        for (index, l) in self.letters.iter().enumerate().rev() {
            z = flow(&l.field, &z, l.duration, step)
                .map_err(|e| Error::WordDomain { letter: index, source: Box::new(e) })?;
        }
        Ok(z)
    }

    /// Endpoint together with the tangent map applied to the columns of `v`.
    pub fn pushforward_matrix(&self, z0: &[f64], v: &DMatrix<f64>, step: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let mut z = z0.to_vec();
        let mut w = v.clone();
        for (index, l) in self.letters.iter().enumerate().rev() {
            let (nz, nw) = flow_with_tangent(&l.field, &z, &w, l.duration, step)
                .map_err(|e| Error::WordDomain { letter: index, source: Box::new(e) })?;
            z = nz;
            w = nw;
        }
        Ok((z, w))
    }

    pub fn pushforward(&self, z0: &[f64], v: &[f64], step: f64) -> Result<Vec<f64>> {
        let m = DMatrix::from_column_slice(v.len(), 1, v);
        let (_, w) = self.pushforward_matrix(z0, &m, step)?;
        Ok(w.column(0).iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::space::{BoxRegion, PhaseSpace};
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn rotation() -> VectorField {
        let plane = Arc::new(PhaseSpace::euclidean("R2", 2).unwrap());
        VectorField::from_fn(plane, "rot", |z| vec![z[1], -z[0]])
    }

    #[test]
    fn schedule_lands_on_target() {
        let s = schedule(1.0, 0.3).unwrap();
        assert_eq!(s.len(), 4);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let s = schedule(-0.6, 0.3).unwrap();
        assert_eq!(s, vec![-0.3, -0.3]);
        assert!(schedule(1.0, 0.0).is_err());
        assert!(schedule(0.0, 0.1).unwrap().is_empty());
    }

    #[test]
    fn rotation_quarter_turn() {
        let z = flow(&rotation(), &[1.0, 0.0], FRAC_PI_2, 1e-3).unwrap();
        // e^{tA} with A = [[0,1],[-1,0]] maps (1,0) to (cos t, -sin t)
        assert!((z[0] - 0.0).abs() < 1e-10);
        assert!((z[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_wrap_on_torus() {
        let t2 = Arc::new(PhaseSpace::torus("T2", 2).unwrap());
        let x = VectorField::constant(t2.clone(), "d1", &[1.0, 0.0]).unwrap();
        let z = flow(&x, &[0.0, 0.0], TAU, 1e-3).unwrap();
        assert!(t2.distance(&z, &[0.0, 0.0]) < 1e-12);
    }

    #[test]
    fn validity_box_exit_is_reported() {
        let x = rotation().with_validity(BoxRegion::new(vec![0.5, -2.0], vec![2.0, 2.0]).unwrap());
        match flow(&x, &[1.0, 0.0], FRAC_PI_2, 1e-2) {
            Err(Error::DomainExit { time, .. }) => assert!(time > 1.0 && time < FRAC_PI_2),
            other => panic!("expected domain exit, got {other:?}"),
        }
        let w = FlowWord::from_letters(vec![(Arc::new(rotation()), 0.1), (Arc::new(x), FRAC_PI_2)]);
        match w.endpoint(&[1.0, 0.0], 1e-2) {
            Err(Error::WordDomain { letter, .. }) => assert_eq!(letter, 1),
            other => panic!("expected word domain error, got {other:?}"),
        }
    }

    #[test]
    fn tangent_of_rotation() {
        let w = FlowWord::from_letters(vec![(Arc::new(rotation()), FRAC_PI_2)]);
        let v = w.pushforward(&[0.3, -0.2], &[1.0, 0.0], 1e-3).unwrap();
        assert!(v[0].abs() < 1e-10 && (v[1] + 1.0).abs() < 1e-10);
    }
}
