//! Scalar abstraction for coefficient-level algebra.
//!
//! The closed-form Hessian coefficients are rational functions of the
//! dimension n and the exponent p. Evaluating them both in `f64` and in exact
//! rational arithmetic (for rational p) guards the floating-point path
//! against transcription slips, so the formulas are written once, generically.

use num_rational::Rational64;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Coeff:
    Clone
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_int(v: i64) -> Self;
    /// Exact ratio num/den. Panics on den == 0.
    fn ratio(num: i64, den: i64) -> Self;

    fn zero() -> Self {
        Self::from_int(0)
    }
    fn one() -> Self {
        Self::from_int(1)
    }
}

impl Coeff for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        num as f64 / den as f64
    }
}

impl Coeff for Rational64 {
    fn from_int(v: i64) -> Self {
        Rational64::from_integer(v)
    }
    fn ratio(num: i64, den: i64) -> Self {
        Rational64::new(num, den)
    }
}

/// Quadratic a x^2 + b x + c with coefficients in any `Coeff` scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic<T: Coeff> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Coeff> Quadratic<T> {
    pub fn eval(&self, x: T) -> T {
        (self.a.clone() * x.clone() + self.b.clone()) * x + self.c.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_and_float_agree_on_quadratic() {
        let qf = Quadratic { a: f64::ratio(3, 2), b: f64::from_int(-4), c: f64::ratio(1, 3) };
        let qr = Quadratic {
            a: Rational64::ratio(3, 2),
            b: Rational64::from_int(-4),
            c: Rational64::ratio(1, 3),
        };
        let x = 7i64;
        let vf = qf.eval(x as f64);
        let vr = qr.eval(Rational64::from_int(x));
        let vr_f = *vr.numer() as f64 / *vr.denom() as f64;
        assert!((vf - vr_f).abs() < 1e-12);
    }
}
