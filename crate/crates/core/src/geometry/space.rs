use std::f64::consts::TAU;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// A flat chart `R^dim` where selected coordinates are angles of period 2π.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSpace {
    pub name: String,
    pub dim: usize,
    pub periodic: Vec<bool>,
    pub coordinates: Vec<String>,
}

impl PhaseSpace {
    pub fn new(name: impl Into<String>, periodic: Vec<bool>) -> Result<Self> {
        let coordinates = (1..=periodic.len()).map(|i| format!("x{i}")).collect();
        Self::with_coordinates(name, periodic, coordinates)
    }

    pub fn with_coordinates(name: impl Into<String>, periodic: Vec<bool>, coordinates: Vec<String>) -> Result<Self> {
        if periodic.is_empty() {
            return Err(Error::InvalidInput("phase space dimension must be at least 1".into()));
        }
        if coordinates.len() != periodic.len() {
            return Err(Error::Dimension { expected: periodic.len(), got: coordinates.len() });
        }
        Ok(Self { name: name.into(), dim: periodic.len(), periodic, coordinates })
    }

    pub fn torus(name: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new(name, vec![true; dim])
    }

    pub fn euclidean(name: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new(name, vec![false; dim])
    }

    pub fn is_compact(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }

    pub fn all_periodic(&self) -> bool {
        self.is_compact()
    }

    pub fn none_periodic(&self) -> bool {
        self.periodic.iter().all(|&p| !p)
    }

    /// Reduces periodic coordinates into `[0, 2π)`.
    pub fn wrap(&self, z: &mut [f64]) {
        for (x, &p) in z.iter_mut().zip(&self.periodic) {
            if p {
                *x = wrap_angle(*x);
            }
        }
    }

    pub fn wrapped(&self, z: &[f64]) -> Vec<f64> {
        let mut out = z.to_vec();
        self.wrap(&mut out);
        out
    }

    /// `b - a`, taking the shortest arc on periodic coordinates.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).zip(&self.periodic).map(|((x, y), &p)| if p { shortest_arc(y - x) } else { y - x }).collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.displacement(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn check_point(&self, z: &[f64]) -> Result<()> {
        crate::error::check_dim(self.dim, z.len())?;
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericDomain(format!("point {z:?} in {}", self.name)));
        }
        Ok(())
    }

    /// Uniform sample: periodic coordinates over the circle, the rest over
    /// `[-half_width, half_width]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, half_width: f64) -> Vec<f64> {
        self.periodic
            .iter()
            .map(|&p| if p { rng.gen_range(0.0..TAU) } else { rng.gen_range(-half_width..half_width) })
            .collect()
    }
}

pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Representative of `d` modulo 2π in `(-π, π]`.
pub fn shortest_arc(d: f64) -> f64 {
    let r = d.rem_euclid(TAU);
    if r > std::f64::consts::PI {
        r - TAU
    } else {
        r
    }
}

/// Axis-aligned box; periodic coordinates are normally left unbounded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidInput("box lower corner exceeds upper corner".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *x >= *a && *x <= *b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_empty() {
        assert!(PhaseSpace::new("empty", vec![]).is_err());
    }

    #[test]
    fn wrap_and_arc() {
        assert_eq!(wrap_angle(-1e-18), 0.0);
        assert!((wrap_angle(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((shortest_arc(TAU - 0.1) + 0.1).abs() < 1e-14);
        let t2 = PhaseSpace::torus("T2", 2).unwrap();
        assert!(t2.distance(&[0.0, 0.0], &[TAU, TAU]) < 1e-15);
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(
            a in prop::collection::vec(-10.0..10.0f64, 3),
            b in prop::collection::vec(-10.0..10.0f64, 3),
            c in prop::collection::vec(-10.0..10.0f64, 3),
        ) {
            let s = PhaseSpace::new("cyl", vec![true, false, true]).unwrap();
            let dab = s.distance(&a, &b);
            prop_assert!((dab - s.distance(&b, &a)).abs() < 1e-12);
            prop_assert!(s.distance(&a, &a) < 1e-12);
            prop_assert!(dab <= s.distance(&a, &c) + s.distance(&c, &b) + 1e-9);
            let mut shifted = a.clone();
            shifted[0] += TAU;
            shifted[2] -= 2.0 * TAU;
            prop_assert!(s.distance(&a, &shifted) < 1e-9);
        }
    }
}
