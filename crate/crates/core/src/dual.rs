//! Forward-mode dual numbers `a + bε`, `ε² = 0`.
//!
//! Closed-form scalar fields are written once against [`Dual`]; plain
//! evaluation seeds every tangent with zero and directional derivatives seed
//! one coordinate at a time.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub const fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }

    pub const fn constant(re: f64) -> Self {
        Self { re, eps: 0.0 }
    }

    pub const fn variable(re: f64) -> Self {
        Self { re, eps: 1.0 }
    }

    pub fn sin(self) -> Self {
        Self::new(self.re.sin(), self.eps * self.re.cos())
    }

    pub fn cos(self) -> Self {
        Self::new(self.re.cos(), -self.eps * self.re.sin())
    }

    pub fn exp(self) -> Self {
        let e = self.re.exp();
        Self::new(e, self.eps * e)
    }

    pub fn ln(self) -> Self {
        Self::new(self.re.ln(), self.eps / self.re)
    }

    pub fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Self::new(s, self.eps / (2.0 * s))
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        Self::new(self.re.powi(n), self.eps * f64::from(n) * self.re.powi(n - 1))
    }

    pub fn abs(self) -> Self {
        if self.re < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.re * k, self.eps * k)
    }
}

impl From<f64> for Dual {
    fn from(re: f64) -> Self {
        Self::constant(re)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.re + rhs.re, self.eps + rhs.eps)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(self, rhs: f64) -> Dual {
        Dual::new(self.re + rhs, self.eps)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.re - rhs.re, self.eps - rhs.eps)
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    fn sub(self, rhs: f64) -> Dual {
        Dual::new(self.re - rhs, self.eps)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(self.re * rhs.re, self.re * rhs.eps + self.eps * rhs.re)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        self.scale(rhs)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.re;
        Dual::new(self.re * inv, (self.eps * rhs.re - self.re * rhs.eps) * inv * inv)
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    fn div(self, rhs: f64) -> Dual {
        self.scale(1.0 / rhs)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.eps)
    }
}

impl AddAssign for Dual {
    fn add_assign(&mut self, rhs: Dual) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dual {
    fn sub_assign(&mut self, rhs: Dual) {
        *self = *self - rhs;
    }
}

impl MulAssign for Dual {
    fn mul_assign(&mut self, rhs: Dual) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for Dual {
    fn sum<I: Iterator<Item = Dual>>(iter: I) -> Dual {
        iter.fold(Dual::constant(0.0), |a, b| a + b)
    }
}

/// Lifts a point to duals with tangent `e_index`.
pub fn seed(point: &[f64], index: usize) -> Vec<Dual> {
    point.iter().enumerate().map(|(i, &x)| Dual::new(x, if i == index { 1.0 } else { 0.0 })).collect()
}

/// Lifts a point to duals with an arbitrary tangent direction.
pub fn seed_direction(point: &[f64], direction: &[f64]) -> Vec<Dual> {
    point.iter().zip(direction).map(|(&x, &v)| Dual::new(x, v)).collect()
}

pub fn constants(point: &[f64]) -> Vec<Dual> {
    point.iter().map(|&x| Dual::constant(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chain_rule_through_transcendentals() {
        let x = Dual::variable(0.7);
        let y = (x.sin() * x.exp()).sqrt();
        let h = 1e-6;
        let f = |t: f64| (t.sin() * t.exp()).sqrt();
        let fd = (f(0.7 + h) - f(0.7 - h)) / (2.0 * h);
        assert_relative_eq!(y.re, f(0.7), epsilon = 1e-15);
        assert_relative_eq!(y.eps, fd, epsilon = 1e-8);
    }

    #[test]
    fn quotient_and_powers() {
        let x = Dual::variable(2.0);
        let y = x.powi(3) / (x + 1.0);
        // d/dx x^3/(x+1) = (3x^2(x+1) - x^3)/(x+1)^2 = (36 - 8)/9
        assert_relative_eq!(y.eps, 28.0 / 9.0, epsilon = 1e-14);
        assert_eq!(x.powi(0), Dual::constant(1.0));
    }
}
