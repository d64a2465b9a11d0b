//! Exact rational arithmetic and the q-analogues used by every other module.
//!
//! All identity and pmf computations run on [`ExactScalar`]; the binary-float
//! image of `q` is only consulted by Monte-Carlo paths.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always in lowest terms with positive denominator.
pub type ExactScalar = BigRational;

/// A nonnegative count that may be infinite (letter multiplicities, heights,
/// exponents of `q`). `q^∞` is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Multiplicity {
    Finite(u64),
    Infinite,
}

impl Multiplicity {
    pub const ZERO: Multiplicity = Multiplicity::Finite(0);

    pub fn is_infinite(self) -> bool {
        matches!(self, Multiplicity::Infinite)
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            Multiplicity::Finite(n) => Some(n),
            Multiplicity::Infinite => None,
        }
    }

    /// `self - n`, where `∞ - n = ∞`. Panics on finite underflow.
    pub fn minus(self, n: u64) -> Multiplicity {
        match self {
            Multiplicity::Finite(m) => Multiplicity::Finite(
                m.checked_sub(n).expect("multiplicity underflow"),
            ),
            Multiplicity::Infinite => Multiplicity::Infinite,
        }
    }
}

impl From<u64> for Multiplicity {
    fn from(n: u64) -> Self {
        Multiplicity::Finite(n)
    }
}

impl Add for Multiplicity {
    type Output = Multiplicity;

    fn add(self, rhs: Multiplicity) -> Multiplicity {
        match (self, rhs) {
            (Multiplicity::Finite(a), Multiplicity::Finite(b)) => Multiplicity::Finite(a + b),
            _ => Multiplicity::Infinite,
        }
    }
}

impl PartialOrd for Multiplicity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Multiplicity {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Multiplicity::Finite(a), Multiplicity::Finite(b)) => a.cmp(b),
            (Multiplicity::Finite(_), Multiplicity::Infinite) => Ordering::Less,
            (Multiplicity::Infinite, Multiplicity::Finite(_)) => Ordering::Greater,
            (Multiplicity::Infinite, Multiplicity::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multiplicity::Finite(n) => write!(f, "{n}"),
            Multiplicity::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Multiplicity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Multiplicity::Infinite);
        }
        s.parse::<u64>()
            .map(Multiplicity::Finite)
            .map_err(|_| Error::Parse(format!("bad multiplicity `{s}`")))
    }
}

/// Whether a computation should use exact rationals or the float image of `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    Exact,
    Float,
}

/// The deformation parameter, `0 < q < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QParam {
    value: ExactScalar,
    float: f64,
    mode: Mode,
}

impl QParam {
    pub fn new(value: ExactScalar) -> Result<Self> {
        if !value.is_positive() || value >= ExactScalar::one() {
            return Err(Error::InvalidQ(format!(
                "q = {value} must satisfy 0 < q < 1"
            )));
        }
        let float = to_f64(&value);
        Ok(QParam {
            value,
            float,
            mode: Mode::Exact,
        })
    }

    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        Self::new(ExactScalar::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Parses `A/B` or a decimal literal, both converted exactly.
    pub fn parse(s: &str) -> Result<Self> {
        Self::new(parse_rational(s)?)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn exact(&self) -> &ExactScalar {
        &self.value
    }

    pub fn as_f64(&self) -> f64 {
        self.float
    }

    /// `q^e` for any integer exponent.
    pub fn pow(&self, e: i64) -> ExactScalar {
        rpow(&self.value, e)
    }

    /// `q^m` with `q^∞ = 0`.
    pub fn pow_mult(&self, m: Multiplicity) -> ExactScalar {
        match m {
            Multiplicity::Finite(n) => rpow(&self.value, n as i64),
            Multiplicity::Infinite => ExactScalar::zero(),
        }
    }
}

impl fmt::Display for QParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.value))
    }
}

/// Anything that can serve as the evaluation point of a q-polynomial.
///
/// Identity checks evaluate at arbitrary rationals (including `q̃ > 1` for flag
/// counts), so the kernel functions do not insist on a validated [`QParam`].
pub trait QValue {
    fn q_value(&self) -> &ExactScalar;
}

impl QValue for QParam {
    fn q_value(&self) -> &ExactScalar {
        &self.value
    }
}

impl QValue for ExactScalar {
    fn q_value(&self) -> &ExactScalar {
        self
    }
}

pub fn int(n: i64) -> ExactScalar {
    ExactScalar::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> ExactScalar {
    ExactScalar::new(BigInt::from(num), BigInt::from(den))
}

/// `x^e`; negative exponents invert. Panics on `0^(negative)`.
pub fn rpow(x: &ExactScalar, e: i64) -> ExactScalar {
    let mag = e.unsigned_abs();
    let mag: u32 = mag.try_into().expect("exponent too large");
    let num = num_traits::pow::Pow::pow(x.numer(), mag);
    let den = num_traits::pow::Pow::pow(x.denom(), mag);
    if e >= 0 {
        ExactScalar::new(num, den)
    } else {
        assert!(!num.is_zero(), "zero to a negative power");
        ExactScalar::new(den, num)
    }
}

pub fn checked_div(a: &ExactScalar, b: &ExactScalar) -> Result<ExactScalar> {
    if b.is_zero() {
        Err(Error::DivisionByZero)
    } else {
        Ok(a / b)
    }
}

pub fn to_f64(x: &ExactScalar) -> f64 {
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Scale both sides down so the quotient survives the conversion.
            let shift = x.numer().bits().max(x.denom().bits()).saturating_sub(1000);
            let n = (x.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (x.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
            n / d
        }
    }
}

/// `A/B`, or a decimal such as `0.99`, parsed exactly.
pub fn parse_rational(s: &str) -> Result<ExactScalar> {
    let s = s.trim();
    let bad = || Error::Parse(format!("`{s}` is not a rational number"));
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().map_err(|_| bad())?;
        let b: BigInt = b.trim().parse().map_err(|_| bad())?;
        if b.is_zero() {
            return Err(Error::DivisionByZero);
        }
        return Ok(ExactScalar::new(a, b));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let den = num_traits::pow::Pow::pow(BigInt::from(10u32), frac.len() as u32);
    let r = ExactScalar::new(num, den);
    Ok(if neg { -r } else { r })
}

/// Always `A/B`, including integers (`1/1`), so output is uniformly machine-parsable.
pub fn format_rational(x: &ExactScalar) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Serializes a rational as its `A/B` string.
pub fn serialize_rational<S: serde::Serializer>(x: &ExactScalar, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(x))
}

/// `[n]_q = 1 + q + … + q^(n-1)`.
pub fn q_int<Q: QValue + ?Sized>(n: u64, q: &Q) -> ExactScalar {
    let q = q.q_value();
    let mut sum = ExactScalar::zero();
    let mut term = ExactScalar::one();
    for _ in 0..n {
        sum += &term;
        term *= q;
    }
    sum
}

/// `[n]_q! = [1]_q [2]_q ⋯ [n]_q`.
pub fn q_factorial<Q: QValue + ?Sized>(n: u64, q: &Q) -> ExactScalar {
    (1..=n).fold(ExactScalar::one(), |acc, k| acc * q_int(k, q))
}

/// Gaussian multinomial `[n; n_1, …, n_d]_q` with `n = Σ n_i`.
pub fn gaussian_multinomial<Q: QValue + ?Sized>(parts: &[u64], q: &Q) -> ExactScalar {
    let n: u64 = parts.iter().sum();
    // Multiply out as a product of Gaussian binomials to keep the
    // intermediate numbers small.
    let mut acc = ExactScalar::one();
    let mut top = 0u64;
    for &p in parts {
        top += p;
        acc *= gaussian_binomial(top, p, q);
    }
    debug_assert_eq!(top, n);
    acc
}

/// `[n choose k]_q` via the product `Π_{i=1}^{k} [n-k+i]_q / [i]_q`.
pub fn gaussian_binomial<Q: QValue + ?Sized>(n: u64, k: u64, q: &Q) -> ExactScalar {
    if k > n {
        return ExactScalar::zero();
    }
    let k = k.min(n - k);
    let mut num = ExactScalar::one();
    let mut den = ExactScalar::one();
    for i in 1..=k {
        num *= q_int(n - k + i, q);
        den *= q_int(i, q);
    }
    num / den
}

/// `(x; base)_k = Π_{i=0}^{k-1} (1 - x·base^i)`.
///
/// An infinite length is accepted only for `x = 0`, where the product is 1.
pub fn q_pochhammer(x: &ExactScalar, base: &ExactScalar, k: Multiplicity) -> Result<ExactScalar> {
    match k {
        Multiplicity::Infinite => {
            if x.is_zero() {
                Ok(ExactScalar::one())
            } else {
                Err(Error::Unsupported(
                    "infinite q-Pochhammer symbol with x ≠ 0".into(),
                ))
            }
        }
        Multiplicity::Finite(k) => {
            let mut acc = ExactScalar::one();
            let mut term = x.clone();
            for _ in 0..k {
                acc *= ExactScalar::one() - &term;
                if acc.is_zero() {
                    break;
                }
                term *= base;
            }
            Ok(acc)
        }
    }
}

/// `(q^e; q^{-1})_m` where `q^∞ = 0`; vanishes when `e < m` is finite.
pub fn descending_pochhammer(q: &QParam, e: Multiplicity, m: u64) -> ExactScalar {
    let x = q.pow_mult(e);
    let base = q.pow(-1);
    q_pochhammer(&x, &base, Multiplicity::Finite(m)).expect("finite length")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> QParam {
        QParam::from_ratio(1, 2).unwrap()
    }

    #[test]
    fn q_int_small_cases() {
        let q = half();
        assert_eq!(q_int(0, &q), int(0));
        assert_eq!(q_int(1, &q), int(1));
        assert_eq!(q_int(3, &q), ratio(7, 4));
    }

    #[test]
    fn q_factorial_small_cases() {
        let q = half();
        assert_eq!(q_factorial(0, &q), int(1));
        assert_eq!(q_factorial(3, &q), ratio(21, 8));
    }

    #[test]
    fn q_factorial_three_is_the_inversion_polynomial() {
        // inversion counts over S_3 are {0,1,1,2,2,3}
        for q in [ratio(1, 3), ratio(1, 2), ratio(7, 10)] {
            let poly = int(1) + int(2) * &q + int(2) * rpow(&q, 2) + rpow(&q, 3);
            assert_eq!(q_factorial(3, &q), poly);
        }
    }

    #[test]
    fn gaussian_multinomial_examples() {
        for q in [ratio(1, 3), ratio(1, 2), ratio(7, 10)] {
            let p22 = int(1) + &q + int(2) * rpow(&q, 2) + rpow(&q, 3) + rpow(&q, 4);
            assert_eq!(gaussian_multinomial(&[2, 2], &q), p22);
            assert_eq!(gaussian_multinomial(&[5, 0], &q), int(1));
            let p12 = int(1) + &q + rpow(&q, 2);
            assert_eq!(gaussian_multinomial(&[1, 2], &q), p12);
        }
    }

    #[test]
    fn gaussian_multinomial_at_integer_points() {
        // [2;1,1] at 2 counts the lines of F_2^2
        assert_eq!(gaussian_multinomial(&[1, 1], &int(2)), int(3));
        assert_eq!(gaussian_multinomial(&[1, 2], &int(2)), int(7));
    }

    #[test]
    fn pochhammer_examples() {
        let q = half();
        let qi = q.pow(-1);
        assert_eq!(q_pochhammer(&int(5), q.exact(), Multiplicity::Finite(0)).unwrap(), int(1));
        assert_eq!(
            q_pochhammer(&q.pow(2), &qi, Multiplicity::Finite(1)).unwrap(),
            int(1) - q.pow(2)
        );
        assert_eq!(q_pochhammer(&q.pow(1), &qi, Multiplicity::Finite(2)).unwrap(), int(0));
        assert_eq!(
            q_pochhammer(&int(0), q.exact(), Multiplicity::Infinite).unwrap(),
            int(1)
        );
        assert!(matches!(
            q_pochhammer(&q.pow(1), q.exact(), Multiplicity::Infinite),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn descending_pochhammer_matches_ratio_of_q_factorials() {
        // (q^n; q^-1)_m = (q;q)_n / (q;q)_{n-m}
        for q in [ratio(1, 3), ratio(1, 2), ratio(7, 10)] {
            let qp = QParam::new(q.clone()).unwrap();
            for n in 0..=12u64 {
                for m in 0..=n {
                    let lhs = descending_pochhammer(&qp, Multiplicity::Finite(n), m);
                    let qq = |k: u64| {
                        q_pochhammer(&q, &q, Multiplicity::Finite(k)).unwrap()
                    };
                    assert_eq!(lhs, qq(n) / qq(n - m), "n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn qparam_rejects_out_of_range() {
        assert!(QParam::from_ratio(1, 1).is_err());
        assert!(QParam::from_ratio(0, 1).is_err());
        assert!(QParam::from_ratio(3, 2).is_err());
        assert!(QParam::from_ratio(-1, 2).is_err());
        assert!(QParam::from_ratio(1, 0).is_err());
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("3/5").unwrap(), ratio(3, 5));
        assert_eq!(parse_rational("0.99").unwrap(), ratio(99, 100));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("2").unwrap(), int(2));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
        assert_eq!(format_rational(&ratio(43, 16)), "43/16");
        assert_eq!(format_rational(&int(1)), "1/1");
    }

    #[test]
    fn infinite_power_is_zero() {
        assert_eq!(half().pow_mult(Multiplicity::Infinite), int(0));
        assert_eq!(Multiplicity::Finite(2) + Multiplicity::Infinite, Multiplicity::Infinite);
        assert!(Multiplicity::Finite(u64::MAX) < Multiplicity::Infinite);
    }

    #[test]
    fn to_f64_handles_huge_rationals() {
        let x = rpow(&ratio(99, 100), 5000);
        let f = to_f64(&x);
        assert!((f - 0.99f64.powi(5000)).abs() / f < 1e-9);
    }
}
