//! Forward-mode dual numbers. The scalar saddle objectives are evaluated
//! once per active variable with a seeded dual part, giving exact partial
//! derivatives; the stationarity residual is then free of finite-difference
//! noise.

use crate::real::Real;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value plus one tangent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub v: T,
    pub d: T,
}

impl<T: Real> Dual<T> {
    pub fn new(v: T, d: T) -> Self {
        Dual { v, d }
    }

    pub fn constant(v: T) -> Self {
        Dual { v, d: T::zero() }
    }

    pub fn active(v: T) -> Self {
        Dual { v, d: T::one() }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.v * o.v, self.d * o.v + self.v * o.d)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.v;
        Dual::new(self.v * inv, (self.d - self.v * o.d * inv) * inv)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.v, -self.d)
    }
}

/// The arithmetic the saddle objectives need, implemented by plain reals and
/// by [`Dual`]. Value-level inspection goes through `value()` (used to pick
/// quadrature layouts and prox starting points without touching tangents).
pub trait Scalarish<T: Real>:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn lift(v: T) -> Self;
    fn value(self) -> T;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
}

impl<T: Real> Scalarish<T> for T {
    fn lift(v: T) -> Self {
        v
    }
    fn value(self) -> T {
        self
    }
    fn sqrt(self) -> Self {
        Float::sqrt(self)
    }
    fn exp(self) -> Self {
        Float::exp(self)
    }
    fn ln(self) -> Self {
        Float::ln(self)
    }
}

use num_traits::Float;

impl<T: Real> Scalarish<T> for Dual<T> {
    fn lift(v: T) -> Self {
        Dual::constant(v)
    }
    fn value(self) -> T {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = Float::sqrt(self.v);
        Dual::new(s, self.d / (T::of(2.0) * s))
    }
    fn exp(self) -> Self {
        let e = Float::exp(self.v);
        Dual::new(e, self.d * e)
    }
    fn ln(self) -> Self {
        Dual::new(Float::ln(self.v), self.d / self.v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_and_sqrt() {
        let x = Dual::<f64>::active(3.0);
        let y = x * x * x; // d/dx x^3 = 27
        assert!((y.d - 27.0).abs() < 1e-12);
        let s = (x * x).sqrt(); // d/dx |x| = 1
        assert!((s.d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quotient_and_exp() {
        let x = Dual::<f64>::active(0.7);
        let one = Dual::constant(1.0);
        let f = one / (one + x.exp()); // logistic'(0.7) relation
        let e = (0.7f64).exp();
        let expect = -e / (1.0 + e).powi(2);
        assert!((f.d - expect).abs() < 1e-12);
    }
}
