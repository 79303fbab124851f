//! Exact scalars of the form `(a + b·√2)·2^e`.
//!
//! Every amplitude and expectation value produced by this crate lives in this
//! ring: equal-weight amplitudes `1/√M` with `M` a power of two, the `1/√8`
//! weight of the coarse-graining map and the `1/√2` of the half projectors.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// `(a + b·√2)·2^e`, kept normalized so that `a` and `b` are not both even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExactScalar {
    pub a: i128,
    pub b: i128,
    pub e: i64,
}

impl ExactScalar {
    pub const ZERO: ExactScalar = ExactScalar { a: 0, b: 0, e: 0 };
    pub const ONE: ExactScalar = ExactScalar { a: 1, b: 0, e: 0 };

    pub fn new(a: i128, b: i128, e: i64) -> Self {
        ExactScalar { a, b, e }.normalized()
    }

    pub fn integer(n: i128) -> Self {
        Self::new(n, 0, 0)
    }

    pub fn pow2(e: i64) -> Self {
        ExactScalar { a: 1, b: 0, e }
    }

    pub fn sqrt2() -> Self {
        ExactScalar { a: 0, b: 1, e: 0 }
    }

    /// `1/√2`.
    pub fn inv_sqrt2() -> Self {
        ExactScalar { a: 0, b: 1, e: -1 }
    }

    /// `1/√(2^k)`.
    pub fn inv_sqrt_pow2(k: u32) -> Self {
        let k = k as i64;
        if k % 2 == 0 {
            Self::pow2(-k / 2)
        } else {
            ExactScalar { a: 0, b: 1, e: -(k + 1) / 2 }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    /// True when the value is rational (no √2 part).
    pub fn is_rational(&self) -> bool {
        self.b == 0
    }

    fn normalized(mut self) -> Self {
        if self.a == 0 && self.b == 0 {
            return Self::ZERO;
        }
        while self.a % 2 == 0 && self.b % 2 == 0 {
            self.a /= 2;
            self.b /= 2;
            self.e += 1;
        }
        self
    }

    fn shifted(v: i128, by: i64) -> i128 {
        assert!(by < 126, "exact scalar exponent gap too large");
        v.checked_mul(1i128 << by).expect("exact scalar overflow")
    }

    /// Algebraic norm `a² − 2b²` of the integer part.
    fn norm(&self) -> i128 {
        let aa = self.a.checked_mul(self.a).expect("exact scalar overflow");
        let bb = self.b.checked_mul(self.b).expect("exact scalar overflow");
        aa - 2 * bb
    }

    /// Conjugate `a − b√2` (same exponent).
    pub fn conjugate(&self) -> Self {
        ExactScalar { a: self.a, b: -self.b, e: self.e }
    }

    /// Exact quotient when the divisor's norm is `±2^k`, which covers every
    /// divisor arising here (powers of two, `√2`, and units such as `1 ± √2`).
    pub fn checked_div(&self, rhs: &ExactScalar) -> Option<ExactScalar> {
        if rhs.is_zero() {
            return None;
        }
        let n = rhs.norm();
        let mag = n.unsigned_abs();
        if !mag.is_power_of_two() {
            return None;
        }
        let k = mag.trailing_zeros() as i64;
        let num = *self * rhs.conjugate();
        let sign = if n < 0 { -1 } else { 1 };
        // the conjugate carries 2^e as well
        Some(ExactScalar::new(sign * num.a, sign * num.b, num.e - 2 * rhs.e - k))
    }

    /// The value as a rational, if it has no √2 part.
    pub fn to_rational(&self) -> Option<BigRational> {
        if self.b != 0 {
            return None;
        }
        let a = BigInt::from(self.a);
        let one = BigInt::from(1);
        Some(if self.e >= 0 {
            BigRational::from_integer(a << (self.e as usize))
        } else {
            BigRational::new(a, one << ((-self.e) as usize))
        })
    }

    /// `"num/den"` rendering for rational values.
    pub fn rational_string(&self) -> Option<String> {
        self.to_rational().map(|r| rational_string(&r))
    }

    /// Sign of the real value.
    pub fn signum(&self) -> Ordering {
        // sign(a + b√2): compare a with −b√2 via squares
        match (self.a.cmp(&0), self.b.cmp(&0)) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (sa, sb) if sa == sb => sa,
            (sa, _) => {
                if self.norm() > 0 {
                    sa
                } else {
                    sa.reverse()
                }
            }
        }
    }
}

/// `"num/den"` rendering of a rational.
pub fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn serialize_rational<S: serde::Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&rational_string(r))
}

impl Default for ExactScalar {
    fn default() -> Self {
        Self::ZERO
    }
}

impl Add for ExactScalar {
    type Output = ExactScalar;
    fn add(self, rhs: ExactScalar) -> ExactScalar {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let e = self.e.min(rhs.e);
        let (a1, b1) = (Self::shifted(self.a, self.e - e), Self::shifted(self.b, self.e - e));
        let (a2, b2) = (Self::shifted(rhs.a, rhs.e - e), Self::shifted(rhs.b, rhs.e - e));
        ExactScalar::new(
            a1.checked_add(a2).expect("exact scalar overflow"),
            b1.checked_add(b2).expect("exact scalar overflow"),
            e,
        )
    }
}

impl Neg for ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar { a: -self.a, b: -self.b, e: self.e }
    }
}

impl Sub for ExactScalar {
    type Output = ExactScalar;
    fn sub(self, rhs: ExactScalar) -> ExactScalar {
        self + (-rhs)
    }
}

impl Mul for ExactScalar {
    type Output = ExactScalar;
    fn mul(self, rhs: ExactScalar) -> ExactScalar {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        let m = |x: i128, y: i128| x.checked_mul(y).expect("exact scalar overflow");
        let a = m(self.a, rhs.a).checked_add(m(2, m(self.b, rhs.b))).expect("exact scalar overflow");
        let b = m(self.a, rhs.b).checked_add(m(self.b, rhs.a)).expect("exact scalar overflow");
        ExactScalar::new(a, b, self.e + rhs.e)
    }
}

impl std::iter::Sum for ExactScalar {
    fn sum<I: Iterator<Item = ExactScalar>>(iter: I) -> Self {
        iter.fold(ExactScalar::ZERO, |acc, x| acc + x)
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.rational_string() {
            return f.write_str(&r);
        }
        write!(f, "({} + {}√2)·2^{}", self.a, self.b, self.e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn conjugate_units_multiply_to_minus_one() {
        let p = ExactScalar::new(1, 1, 0);
        let q = ExactScalar::new(1, -1, 0);
        assert_eq!(p * q, ExactScalar::integer(-1));
    }

    #[test]
    fn sqrt2_squared_is_two() {
        assert_eq!(ExactScalar::sqrt2() * ExactScalar::sqrt2(), ExactScalar::integer(2));
        assert_eq!(ExactScalar::integer(2), ExactScalar { a: 1, b: 0, e: 1 });
        assert_eq!(ExactScalar::inv_sqrt2() * ExactScalar::sqrt2(), ExactScalar::ONE);
    }

    #[test]
    fn inverse_square_roots_of_powers_of_two() {
        for k in 0..40u32 {
            let s = ExactScalar::inv_sqrt_pow2(k);
            assert_eq!(s * s, ExactScalar::pow2(-(k as i64)), "k = {k}");
        }
        // 1/√8 = √2/4
        assert_eq!(ExactScalar::inv_sqrt_pow2(3), ExactScalar { a: 0, b: 1, e: -2 });
    }

    #[test]
    fn rational_rendering() {
        assert_eq!(ExactScalar::pow2(-4).rational_string().unwrap(), "1/16");
        assert_eq!(ExactScalar::new(-3, 0, 2).rational_string().unwrap(), "-12/1");
        assert_eq!(ExactScalar::ZERO.rational_string().unwrap(), "0/1");
        assert!(ExactScalar::sqrt2().rational_string().is_none());
    }

    #[test]
    fn division_by_units_and_powers() {
        let x = ExactScalar::new(3, 5, -2);
        for d in [ExactScalar::sqrt2(), ExactScalar::new(1, 1, 0), ExactScalar::new(1, -1, 3), ExactScalar::pow2(-7)] {
            let q = x.checked_div(&d).unwrap();
            assert_eq!(q * d, x);
        }
        assert!(x.checked_div(&ExactScalar::integer(3)).is_none());
        assert!(x.checked_div(&ExactScalar::ZERO).is_none());
    }

    #[test]
    fn signum_matches_float() {
        for (a, b) in [(3, -2), (-3, 2), (1, -1), (-1, 1), (2, -1), (0, -4), (5, 0)] {
            let f = a as f64 + b as f64 * 2f64.sqrt();
            let s = ExactScalar::new(a, b, 0).signum();
            assert_eq!(s, f.partial_cmp(&0.0).unwrap(), "{a} {b}");
        }
    }

    fn small() -> impl Strategy<Value = ExactScalar> {
        (-50i128..50, -50i128..50, -6i64..6).prop_map(|(a, b, e)| ExactScalar::new(a, b, e))
    }

    proptest! {
        #[test]
        fn ring_laws(x in small(), y in small(), z in small()) {
            prop_assert_eq!(x + y, y + x);
            prop_assert_eq!(x * y, y * x);
            prop_assert_eq!((x + y) * z, x * z + y * z);
            prop_assert_eq!((x * y) * z, x * (y * z));
            prop_assert_eq!(x - x, ExactScalar::ZERO);
        }

        #[test]
        fn normalization_is_canonical(a in -200i128..200, b in -200i128..200, e in -10i64..10, k in 0i64..5) {
            let x = ExactScalar::new(a, b, e);
            let y = ExactScalar::new(a << k, b << k, e - k);
            prop_assert_eq!(x, y);
        }
    }
}
