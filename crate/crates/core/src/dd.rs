//! Minimal double-double arithmetic (real and complex).
//!
//! Only the handful of operations the Maclaurin summation of Ai needs:
//! addition, multiplication, and division by a small exact integer.
//! Error-free transforms follow Dekker/Knuth; products use `mul_add`.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> f64 {
        self.to_f64().abs()
    }

    /// Division by a (small, exactly representable) positive float.
    pub fn div_f64(self, d: f64) -> Self {
        let q1 = self.hi / d;
        let (p, e) = two_prod(q1, d);
        let r = (self.hi - p - e + self.lo) / d;
        let (hi, lo) = quick_two_sum(q1, r);
        Dd { hi, lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct DdComplex {
    pub re: Dd,
    pub im: Dd,
}

impl DdComplex {
    pub fn new(re: Dd, im: Dd) -> Self {
        DdComplex { re, im }
    }

    pub fn from_c64(z: Complex64) -> Self {
        DdComplex { re: Dd::from_f64(z.re), im: Dd::from_f64(z.im) }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn scale(self, k: Dd) -> Self {
        DdComplex { re: self.re * k, im: self.im * k }
    }

    pub fn div_f64(self, d: f64) -> Self {
        DdComplex { re: self.re.div_f64(d), im: self.im.div_f64(d) }
    }

    /// Cheap magnitude proxy (max norm) in plain double precision.
    pub fn norm_inf(self) -> f64 {
        self.re.abs().max(self.im.abs())
    }
}

impl Add for DdComplex {
    type Output = DdComplex;
    fn add(self, o: DdComplex) -> DdComplex {
        DdComplex { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for DdComplex {
    type Output = DdComplex;
    fn sub(self, o: DdComplex) -> DdComplex {
        DdComplex { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for DdComplex {
    type Output = DdComplex;
    fn mul(self, o: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_has_tail() {
        let third = Dd::from_f64(1.0).div_f64(3.0);
        let back = third * Dd::from_f64(3.0);
        assert_eq!(back.hi, 1.0);
        assert!(back.lo.abs() < 1e-32);
        assert!(third.lo != 0.0);
    }

    #[test]
    fn cancellation_keeps_low_word() {
        let a = Dd::new(1.0, 1e-20);
        let b = Dd::from_f64(1.0);
        assert!(((a - b).to_f64() - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn complex_product() {
        let i = DdComplex::from_c64(Complex64::new(0.0, 1.0));
        let sq = (i * i).to_c64();
        assert_eq!(sq, Complex64::new(-1.0, 0.0));
    }
}
