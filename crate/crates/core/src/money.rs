//! Exact monetary amounts.
//!
//! Single-minded auction payments have the form `b·√(|B_i|/|B_j|)`, which is irrational
//! whenever the bundle-size ratio is not a perfect square. A [`Money`] value is therefore a
//! finite sum `Σ c_d·√d` with rational coefficients `c_d` and distinct square-free radicands
//! `d` (`d = 1` is the rational part). These sums form a field with an exact total order, so
//! revenues, marginal contributions, Shapley values and redistribution fractions derived from
//! payments never leave exact arithmetic.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::{Serialize, Serializer};
use smallvec::SmallVec;
use thiserror::Error;

/// Exact rational number used for bids and weights.
pub type Rational = BigRational;

type Terms = SmallVec<[(u64, Rational); 1]>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid amount `{0}`")]
pub struct MoneyParseError(pub String);

/// Exact amount in `Q(√2, √3, √5, …)`.
///
/// Terms are kept sorted by radicand with no zero coefficients, so structural equality is
/// numeric equality.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Money {
    terms: Terms,
}

impl Money {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_integer(1)
    }

    pub fn from_integer(v: i64) -> Self {
        Self::from_rational(Rational::from_integer(BigInt::from(v)))
    }

    pub fn from_big_int(v: BigInt) -> Self {
        Self::from_rational(Rational::from_integer(v))
    }

    pub fn from_rational(v: Rational) -> Self {
        let mut terms = Terms::new();
        if !v.is_zero() {
            terms.push((1, v));
        }
        Self { terms }
    }

    /// `coef · √radicand`, with square factors pulled out of the radicand.
    pub fn surd(coef: Rational, radicand: u64) -> Self {
        if radicand == 0 || coef.is_zero() {
            return Self::zero();
        }
        let (outside, inside) = split_square_free(radicand);
        let mut terms = Terms::new();
        terms.push((inside, coef * Rational::from_integer(BigInt::from(outside))));
        Self { terms }
    }

    fn from_unsorted(mut raw: Vec<(u64, Rational)>) -> Self {
        raw.sort_by_key(|(d, _)| *d);
        let mut terms = Terms::new();
        for (d, c) in raw {
            match terms.last_mut() {
                Some((last, acc)) if *last == d => *acc += c,
                _ => terms.push((d, c)),
            }
        }
        terms.retain(|(_, c)| !c.is_zero());
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_rational(&self) -> bool {
        self.terms.iter().all(|(d, _)| *d == 1)
    }

    /// The value as a rational, if it has no surd part.
    pub fn to_rational(&self) -> Option<Rational> {
        match self.terms.as_slice() {
            [] => Some(Rational::zero()),
            [(1, c)] => Some(c.clone()),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(d, c)| c.to_f64().unwrap_or(f64::NAN) * (*d as f64).sqrt())
            // An empty `sum` of f64 is -0.0; start from +0.0 so zero prints as 0.
            .fold(0.0, |acc, x| acc + x)
    }

    /// Multiplies by a rational factor.
    pub fn scale(&self, factor: &Rational) -> Self {
        if factor.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(d, c)| (*d, c * factor)).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        if self.signum() == Ordering::Less {
            -self
        } else {
            self.clone()
        }
    }

    /// Exact sign, as an ordering against zero.
    pub fn signum(&self) -> Ordering {
        match self.terms.as_slice() {
            [] => Ordering::Equal,
            [(_, c)] => c.cmp(&Rational::zero()),
            _ => {
                let p = self.pivot_prime();
                let (a, b) = self.split_by_prime(p);
                let sa = a.signum();
                let sb = b.signum();
                if sb == Ordering::Equal {
                    sa
                } else if sa == Ordering::Equal || sa == sb {
                    sb
                } else {
                    // a + b√p with opposite signs: the larger of |a| and |b|√p wins.
                    let p_rat = Rational::from_integer(BigInt::from(p));
                    let diff = &(&a * &a) - &(&b * &b).scale(&p_rat);
                    match diff.signum() {
                        Ordering::Equal => Ordering::Equal,
                        Ordering::Greater => sa,
                        Ordering::Less => sb,
                    }
                }
            }
        }
    }

    /// Exact division; `None` when dividing by zero.
    pub fn checked_div(&self, rhs: &Money) -> Option<Money> {
        if rhs.is_zero() {
            return None;
        }
        let mut num = self.clone();
        let mut den = rhs.clone();
        while !den.is_rational() {
            let p = den.pivot_prime();
            let conj = den.conjugate(p);
            num = &num * &conj;
            den = &den * &conj;
        }
        let den = den.to_rational().expect("denominator rationalised");
        Some(num.scale(&den.recip()))
    }

    // A prime dividing the largest radicand; only called when some radicand exceeds 1.
    fn pivot_prime(&self) -> u64 {
        let d = self.terms.last().map(|(d, _)| *d).unwrap_or(1);
        debug_assert!(d > 1);
        smallest_prime_factor(d)
    }

    // Writes self = a + b·√p with a, b free of √p.
    fn split_by_prime(&self, p: u64) -> (Money, Money) {
        let mut a = Terms::new();
        let mut b = Terms::new();
        for (d, c) in &self.terms {
            if (*d).is_multiple_of(p) {
                b.push((d / p, c.clone()));
            } else {
                a.push((*d, c.clone()));
            }
        }
        (Money { terms: a }, Money { terms: b })
    }

    fn conjugate(&self, p: u64) -> Money {
        Money {
            terms: self
                .terms
                .iter()
                .map(|(d, c)| {
                    if (*d).is_multiple_of(p) {
                        (*d, -c)
                    } else {
                        (*d, c.clone())
                    }
                })
                .collect(),
        }
    }

    /// Renders as a plain decimal (used for CSV output).
    pub fn to_decimal_string(&self) -> String {
        let v = self.to_f64();
        if v == 0.0 {
            "0".to_string()
        } else {
            format!("{v}")
        }
    }
}

fn split_square_free(mut r: u64) -> (u64, u64) {
    let mut outside = 1u64;
    let mut p = 2u64;
    while p * p <= r {
        if r.is_multiple_of(p * p) {
            r /= p * p;
            outside *= p;
        } else {
            p += 1;
        }
    }
    (outside, r)
}

fn smallest_prime_factor(d: u64) -> u64 {
    let mut p = 2u64;
    while p * p <= d {
        if d.is_multiple_of(p) {
            return p;
        }
        p += 1;
    }
    d
}

fn add_terms(lhs: &Terms, rhs: &Terms, negate_rhs: bool) -> Money {
    let mut out = Terms::with_capacity(lhs.len().max(rhs.len()));
    let (mut i, mut j) = (0, 0);
    let sign = |c: &Rational| if negate_rhs { -c } else { c.clone() };
    while i < lhs.len() || j < rhs.len() {
        match (lhs.get(i), rhs.get(j)) {
            (Some((dl, cl)), Some((dr, cr))) if dl == dr => {
                let c = if negate_rhs { cl - cr } else { cl + cr };
                if !c.is_zero() {
                    out.push((*dl, c));
                }
                i += 1;
                j += 1;
            }
            (Some((dl, cl)), Some((dr, _))) if dl < dr => {
                out.push((*dl, cl.clone()));
                i += 1;
            }
            (Some((dl, cl)), None) => {
                out.push((*dl, cl.clone()));
                i += 1;
            }
            (_, Some((dr, cr))) => {
                out.push((*dr, sign(cr)));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    Money { terms: out }
}

impl Add<&Money> for &Money {
    type Output = Money;
    fn add(self, rhs: &Money) -> Money {
        add_terms(&self.terms, &rhs.terms, false)
    }
}

impl Sub<&Money> for &Money {
    type Output = Money;
    fn sub(self, rhs: &Money) -> Money {
        add_terms(&self.terms, &rhs.terms, true)
    }
}

impl Mul<&Money> for &Money {
    type Output = Money;
    fn mul(self, rhs: &Money) -> Money {
        if self.is_zero() || rhs.is_zero() {
            return Money::zero();
        }
        if let Some(r) = rhs.to_rational() {
            return self.scale(&r);
        }
        if let Some(r) = self.to_rational() {
            return rhs.scale(&r);
        }
        let mut raw = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for (d1, c1) in &self.terms {
            for (d2, c2) in &rhs.terms {
                let g = d1.gcd(d2);
                let radicand = (d1 / g)
                    .checked_mul(d2 / g)
                    .expect("radicand overflow in surd product");
                raw.push((radicand, c1 * c2 * Rational::from_integer(BigInt::from(g))));
            }
        }
        Money::from_unsorted(raw)
    }
}

impl Neg for &Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money {
            terms: self.terms.iter().map(|(d, c)| (*d, -c)).collect(),
        }
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        -&self
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Money> for Money {
            type Output = Money;
            fn $m(self, rhs: Money) -> Money {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Money> for Money {
            type Output = Money;
            fn $m(self, rhs: &Money) -> Money {
                (&self).$m(rhs)
            }
        }
        impl $tr<Money> for &Money {
            type Output = Money;
            fn $m(self, rhs: Money) -> Money {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl AddAssign<&Money> for Money {
    fn add_assign(&mut self, rhs: &Money) {
        if rhs.is_zero() {
            return;
        }
        // Fast path for the common all-rational case.
        if let ([(1, a)], [(1, b)]) = (self.terms.as_mut_slice(), rhs.terms.as_slice()) {
            *a += b;
            if a.is_zero() {
                self.terms.clear();
            }
            return;
        }
        *self = &*self + rhs;
    }
}

impl AddAssign<Money> for Money {
    fn add_assign(&mut self, rhs: Money) {
        *self += &rhs;
    }
}

impl SubAssign<&Money> for Money {
    fn sub_assign(&mut self, rhs: &Money) {
        *self = &*self - rhs;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |mut acc, x| {
            acc += &x;
            acc
        })
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |mut acc, x| {
            acc += x;
            acc
        })
    }
}

impl PartialOrd for Money {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Money {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum()
    }
}

impl From<Rational> for Money {
    fn from(v: Rational) -> Self {
        Money::from_rational(v)
    }
}

impl From<i64> for Money {
    fn from(v: i64) -> Self {
        Money::from_integer(v)
    }
}

/// `8`, `-8/3`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `12`, `-2.75`, `.5`, or `8/3` exactly.
pub fn parse_rational(s: &str) -> Result<Rational, MoneyParseError> {
    let err = || MoneyParseError(s.to_string());
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().map_err(|_| err())?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let v = Rational::new(numer, denom);
    Ok(if neg { -v } else { v })
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (d, c)) in self.terms.iter().enumerate() {
            let mag = format_rational(&c.abs());
            if c.is_negative() {
                f.write_str("-")?;
            } else if i > 0 {
                f.write_str("+")?;
            }
            if *d == 1 {
                f.write_str(&mag)?;
            } else if c.abs().is_one() {
                write!(f, "sqrt({d})")?;
            } else {
                write!(f, "{mag}*sqrt({d})")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Money({self})")
    }
}

impl FromStr for Money {
    type Err = MoneyParseError;

    /// Accepts everything `Display` produces plus plain decimals.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || MoneyParseError(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(err());
        }
        // Split into signed terms; signs never occur inside `sqrt(...)`.
        let mut pieces = Vec::new();
        let mut start = 0;
        for (i, ch) in t.char_indices() {
            if (ch == '+' || ch == '-') && i > start {
                pieces.push(&t[start..i]);
                start = i;
            }
        }
        pieces.push(&t[start..]);
        let mut raw = Vec::new();
        for piece in pieces {
            let (neg, body) = match piece.strip_prefix('-') {
                Some(rest) => (true, rest),
                None => (false, piece.strip_prefix('+').unwrap_or(piece)),
            };
            let (coef, radicand) = if let Some(idx) = body.find("sqrt(") {
                let inner = body[idx + 5..].strip_suffix(')').ok_or_else(err)?;
                let radicand: u64 = inner.parse().map_err(|_| err())?;
                let coef = match &body[..idx] {
                    "" => Rational::one(),
                    c => parse_rational(c.strip_suffix('*').ok_or_else(err)?)?,
                };
                (coef, radicand)
            } else {
                (parse_rational(body)?, 1)
            };
            let coef = if neg { -coef } else { coef };
            for (d, c) in Money::surd(coef, radicand).terms {
                raw.push((d, c));
            }
        }
        Ok(Money::from_unsorted(raw))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MoneyVisitor;
        impl Visitor<'_> for MoneyVisitor {
            type Value = Money;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an exact amount as a string or an integer")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Money, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Money, E> {
                Ok(Money::from_integer(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Money, E> {
                Ok(Money::from_big_int(BigInt::from(v)))
            }
        }
        deserializer.deserialize_any(MoneyVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("2.75").unwrap(), q(11, 4));
        assert_eq!(parse_rational("-0.1").unwrap(), q(-1, 10));
        assert_eq!(parse_rational(".5").unwrap(), q(1, 2));
        assert_eq!(parse_rational("8/3").unwrap(), q(8, 3));
        assert!(parse_rational("1e3").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn surd_pulls_out_squares() {
        assert_eq!(Money::surd(q(1, 1), 8), Money::surd(q(2, 1), 2));
        assert_eq!(Money::surd(q(3, 1), 9), Money::from_integer(9));
    }

    #[test]
    fn sqrt_products_reduce() {
        let r2 = Money::surd(q(1, 1), 2);
        let r6 = Money::surd(q(1, 1), 6);
        assert_eq!(&r2 * &r2, Money::from_integer(2));
        assert_eq!(&r2 * &r6, Money::surd(q(2, 1), 3));
    }

    #[test]
    fn display_round_trip() {
        for s in ["0", "8", "-8/3", "1/2+3*sqrt(2)", "-sqrt(3)+2/5*sqrt(6)"] {
            assert_eq!(m(s).to_string(), s);
        }
    }

    #[test]
    fn sign_of_near_cancellation() {
        // 99/70 is a convergent of √2 from above.
        assert_eq!((m("99/70") - m("sqrt(2)")).signum(), Ordering::Greater);
        assert_eq!((m("140/99") - m("sqrt(2)")).signum(), Ordering::Less);
        // √2 + √3 vs √10: 5 + 2√6 < 10.
        assert!(m("sqrt(2)+sqrt(3)") < m("sqrt(10)"));
        assert!(m("sqrt(2)+sqrt(3)") > m("3146/1000"));
        assert!(m("sqrt(2)+sqrt(3)") < m("3147/1000"));
        assert_eq!(
            (m("sqrt(2)+sqrt(3)") * m("sqrt(2)+sqrt(3)")),
            m("5+2*sqrt(6)")
        );
    }

    #[test]
    fn division_rationalises() {
        let x = m("1+sqrt(2)");
        let inv = Money::one().checked_div(&x).unwrap();
        assert_eq!(inv, m("-1+sqrt(2)"));
        let y = m("sqrt(2)+sqrt(3)+sqrt(5)");
        let z = m("3-sqrt(6)+1/2*sqrt(15)");
        assert_eq!((&y * &z).checked_div(&y).unwrap(), z);
        assert!(y.checked_div(&Money::zero()).is_none());
    }

    fn arb_money() -> impl Strategy<Value = Money> {
        prop::collection::vec(
            (
                -20i64..20,
                1i64..6,
                prop::sample::select(vec![1u64, 2, 3, 5, 6]),
            ),
            0..4,
        )
        .prop_map(|ts| {
            ts.into_iter()
                .map(|(n, d, r)| Money::surd(q(n, d), r))
                .sum()
        })
    }

    proptest! {
        #[test]
        fn ordering_agrees_with_floats(a in arb_money(), b in arb_money()) {
            let (fa, fb) = (a.to_f64(), b.to_f64());
            if (fa - fb).abs() > 1e-9 {
                prop_assert_eq!(a.cmp(&b), fa.partial_cmp(&fb).unwrap());
            }
        }

        #[test]
        fn field_identities(a in arb_money(), b in arb_money()) {
            prop_assert_eq!(&(&a + &b) - &b, a.clone());
            if !b.is_zero() {
                prop_assert_eq!((&a * &b).checked_div(&b).unwrap(), a.clone());
            }
            prop_assert_eq!(a.to_string().parse::<Money>().unwrap(), a);
        }
    }

    #[test]
    fn zero_converts_to_positive_zero() {
        assert!(Money::zero().to_f64().is_sign_positive());
        assert_eq!((m("1/3") - m("1/3")).to_f64().to_string(), "0");
    }
}
