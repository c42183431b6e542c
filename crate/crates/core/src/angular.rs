//! Exact angular-momentum algebra: Clebsch-Gordan coefficients, Wigner 6j
//! symbols and the hyperfine recoupling coefficient.
//!
//! Everything is evaluated with big-integer factorials and exact rationals;
//! the conversion to `f64` happens once, at the very end.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest doubled momentum accepted by the exact kernels.
pub const MAX_TWICE: i32 = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AngularError {
    #[error("malformed angular momentum key: {0}")]
    Malformed(String),
    #[error("cannot parse half-integer from {0:?}")]
    Parse(String),
}

/// A half-integer quantum number stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn integer(n: i32) -> Self {
        HalfInt(2 * n)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// 2j + 1.
    pub const fn multiplicity(self) -> i32 {
        self.0 + 1
    }

    pub fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// Projections -j, -j+1, ..., j.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j = self.0;
        (-j..=j).step_by(2).map(HalfInt)
    }

    /// Values |a-b|, ..., a+b allowed by the triangle rule.
    pub fn couplings(a: HalfInt, b: HalfInt) -> impl Iterator<Item = HalfInt> {
        ((a.0 - b.0).abs()..=a.0 + b.0).step_by(2).map(HalfInt)
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for HalfInt {
    type Err = AngularError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || AngularError::Parse(s.to_string());
        match t.split_once('/') {
            Some((num, "2")) => num.trim().parse::<i32>().map(HalfInt).map_err(|_| bad()),
            Some(_) => Err(bad()),
            None => t.parse::<i32>().map(HalfInt::integer).map_err(|_| bad()),
        }
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Key of a Clebsch-Gordan coefficient C^{j,m}_{j1,m1,j2,m2}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CGKey {
    pub j1: HalfInt,
    pub m1: HalfInt,
    pub j2: HalfInt,
    pub m2: HalfInt,
    pub j: HalfInt,
    pub m: HalfInt,
}

impl CGKey {
    pub fn new(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> Self {
        CGKey { j1, m1, j2, m2, j, m }
    }

    /// Same key from doubled integers, in the order j1, m1, j2, m2, j, m.
    pub fn twice(t: [i32; 6]) -> Self {
        let h = HalfInt::from_twice;
        CGKey::new(h(t[0]), h(t[1]), h(t[2]), h(t[3]), h(t[4]), h(t[5]))
    }
}

fn check_projection(j: HalfInt, m: HalfInt, name: &str) -> Result<(), AngularError> {
    if j.0 < 0 || j.0 > MAX_TWICE {
        return Err(AngularError::Malformed(format!("{name}: j = {j} out of range")));
    }
    if (j.0 - m.0) % 2 != 0 {
        return Err(AngularError::Malformed(format!("{name}: m = {m} has wrong parity for j = {j}")));
    }
    if m.0.abs() > j.0 {
        return Err(AngularError::Malformed(format!("{name}: |m| = {} exceeds j = {j}", m.abs())));
    }
    Ok(())
}

fn triangle(a: i32, b: i32, c: i32) -> bool {
    c >= (a - b).abs() && c <= a + b && (a + b + c) % 2 == 0
}

fn factorial(n: i32) -> BigInt {
    debug_assert!(n >= 0);
    (2..=n as u64).fold(BigInt::one(), |acc, k| acc * k)
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

/// sign(s) * sqrt(p * s^2) with p >= 0, done in rationals until the last step.
fn signed_root(p: &BigRational, s: &BigRational) -> f64 {
    if s.is_zero() || p.is_zero() {
        return 0.0;
    }
    let mag = (p * s * s).to_f64().unwrap_or(f64::NAN).sqrt();
    if s.is_negative() {
        -mag
    } else {
        mag
    }
}

/// Squared triangle coefficient Δ(abc)^2 from doubled arguments.
fn delta_sq(a: i32, b: i32, c: i32) -> BigRational {
    ratio(
        factorial((a + b - c) / 2) * factorial((a - b + c) / 2) * factorial((-a + b + c) / 2),
        factorial((a + b + c) / 2 + 1),
    )
}

/// Clebsch-Gordan coefficient in the Condon-Shortley convention.
pub fn clebsch_gordan(key: CGKey) -> Result<f64, AngularError> {
    check_projection(key.j1, key.m1, "j1")?;
    check_projection(key.j2, key.m2, "j2")?;
    check_projection(key.j, key.m, "j")?;
    let (j1, m1, j2, m2, j, m) = (key.j1.0, key.m1.0, key.j2.0, key.m2.0, key.j.0, key.m.0);
    if m != m1 + m2 || !triangle(j1, j2, j) {
        return Ok(0.0);
    }

    let pre = ratio(BigInt::from(j + 1), BigInt::one())
        * delta_sq(j1, j2, j)
        * ratio(
            factorial((j1 + m1) / 2)
                * factorial((j1 - m1) / 2)
                * factorial((j2 + m2) / 2)
                * factorial((j2 - m2) / 2)
                * factorial((j + m) / 2)
                * factorial((j - m) / 2),
            BigInt::one(),
        );

    // Denominator arguments (doubled) as functions of k.
    let a = (j1 + j2 - j) / 2;
    let b = (j1 - m1) / 2;
    let c = (j2 + m2) / 2;
    let d = (j - j2 + m1) / 2;
    let e = (j - j1 - m2) / 2;
    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);

    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(a - k)
            * factorial(b - k)
            * factorial(c - k)
            * factorial(d + k)
            * factorial(e + k);
        let term = ratio(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(signed_root(&pre, &sum))
}

/// Wigner 6j symbol {a b c; d e f}. Ill-formed triads give 0.
pub fn six_j(a: HalfInt, b: HalfInt, c: HalfInt, d: HalfInt, e: HalfInt, f: HalfInt) -> f64 {
    let (a, b, c, d, e, f) = (a.0, b.0, c.0, d.0, e.0, f.0);
    if [a, b, c, d, e, f].iter().any(|&x| !(0..=MAX_TWICE).contains(&x)) {
        return 0.0;
    }
    let triads = [(a, b, c), (a, e, f), (d, b, f), (d, e, c)];
    if !triads.iter().all(|&(x, y, z)| triangle(x, y, z)) {
        return 0.0;
    }
    let pre = triads
        .iter()
        .fold(BigRational::one(), |acc, &(x, y, z)| acc * delta_sq(x, y, z));

    let s1 = (a + b + c) / 2;
    let s2 = (a + e + f) / 2;
    let s3 = (d + b + f) / 2;
    let s4 = (d + e + c) / 2;
    let u1 = (a + b + d + e) / 2;
    let u2 = (a + c + d + f) / 2;
    let u3 = (b + c + e + f) / 2;
    let t_min = s1.max(s2).max(s3).max(s4);
    let t_max = u1.min(u2).min(u3);

    let mut sum = BigRational::zero();
    for t in t_min..=t_max {
        let den = factorial(t - s1)
            * factorial(t - s2)
            * factorial(t - s3)
            * factorial(t - s4)
            * factorial(u1 - t)
            * factorial(u2 - t)
            * factorial(u3 - t);
        let term = ratio(factorial(t + 1), den);
        if t % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    signed_root(&pre, &sum)
}

/// Hyperfine recoupling coefficient
/// c_{I j f}^{j' f'} = (-1)^{1+I+f+j'} sqrt(2f+1) {j I f; f' 1 j'}.
pub fn hf_recoupling(i: HalfInt, j: HalfInt, f: HalfInt, j_prime: HalfInt, f_prime: HalfInt) -> f64 {
    let phase_twice = 2 + i.0 + f.0 + j_prime.0;
    if phase_twice % 2 != 0 || f.0 < 0 {
        return 0.0;
    }
    let sign = if (phase_twice / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let s = six_j(j, i, f, f_prime, HalfInt::ONE, j_prime);
    sign * (f.multiplicity() as f64).sqrt() * s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    #[test]
    fn parse_and_display_roundtrip() {
        for s in ["7/2", "-1/2", "4", "0"] {
            let v: HalfInt = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
        assert!("3/4".parse::<HalfInt>().is_err());
    }

    #[test]
    fn stretched_state() {
        let c = clebsch_gordan(CGKey::twice([1, 1, 1, 1, 2, 2])).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn vanishing_m_zero_same_f() {
        let c = clebsch_gordan(CGKey::twice([8, 0, 2, 0, 8, 0])).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn malformed_keys_error() {
        assert!(clebsch_gordan(CGKey::twice([1, 3, 1, 1, 2, 2])).is_err());
        assert!(clebsch_gordan(CGKey::twice([1, 0, 1, 1, 2, 1])).is_err());
        assert!(clebsch_gordan(CGKey::twice([-1, 1, 1, 1, 2, 2])).is_err());
    }

    #[test]
    fn six_j_triangle_violation_is_zero() {
        assert_eq!(six_j(h(1), h(1), h(6), h(1), h(1), h(2)), 0.0);
    }

    #[test]
    fn recoupling_zero_outside_triangle() {
        assert_eq!(hf_recoupling(h(7), h(1), h(8), h(1), h(12)), 0.0);
    }
}
