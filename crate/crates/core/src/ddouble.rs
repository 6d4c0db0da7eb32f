//! Minimal double-double arithmetic (about 32 significant digits).
//!
//! Only what the finite-difference symmetry checks need: exact-enough
//! products and sums so that second differences at step 1e-5 are not
//! swamped by rounding.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct DD {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
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

impl DD {
    pub const ZERO: DD = DD { hi: 0.0, lo: 0.0 };
    pub const ONE: DD = DD { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        DD { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn powi(self, n: u32) -> DD {
        let mut acc = DD::ONE;
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }

}

impl From<f64> for DD {
    fn from(x: f64) -> Self {
        DD::new(x)
    }
}

impl Add for DD {
    type Output = DD;
    fn add(self, o: DD) -> DD {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DD { hi, lo }
    }
}

impl Sub for DD {
    type Output = DD;
    fn sub(self, o: DD) -> DD {
        self + (-o)
    }
}

impl Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for DD {
    type Output = DD;
    fn mul(self, o: DD) -> DD {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DD { hi, lo }
    }
}

impl Mul<f64> for DD {
    type Output = DD;
    fn mul(self, o: f64) -> DD {
        self * DD::new(o)
    }
}

impl Div for DD {
    type Output = DD;
    fn div(self, o: DD) -> DD {
        // long division with one correction step
        let q1 = self.hi / o.hi;
        let r = self - o * DD::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * DD::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DD { hi, lo } + DD::new(q3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_bits_lost_in_f64() {
        let a = DD::new(1.0) + DD::new(1e-20);
        let b = a - DD::new(1.0);
        assert!((b.to_f64() - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn division_is_accurate() {
        let third = DD::ONE / DD::new(3.0);
        let back = third * DD::new(3.0) - DD::ONE;
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn product_keeps_low_word() {
        let x = DD::new(1.0 + 2f64.powi(-30));
        let sq = x * x;
        // (1 + e)^2 = 1 + 2e + e^2 with e^2 = 2^-60 below f64 resolution at 1
        let err = (sq - DD::new(1.0) - DD::new(2.0 * 2f64.powi(-30))).to_f64();
        assert!((err - 2f64.powi(-60)).abs() < 1e-30);
    }
}
