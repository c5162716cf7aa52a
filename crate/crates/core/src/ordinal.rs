//! Ordinals below epsilon-zero in Cantor normal form.
//!
//! An [`Ordinal`] is a finite sum `w^{e1}*c1 + w^{e2}*c2 + ...` with strictly
//! decreasing exponents (themselves ordinals) and positive coefficients. The
//! empty sum is zero. Values are immutable; all arithmetic returns a fresh
//! canonical value.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    exponent: Ordinal,
    coefficient: BigUint,
}

impl Term {
    pub fn exponent(&self) -> &Ordinal {
        &self.exponent
    }

    pub fn coefficient(&self) -> &BigUint {
        &self.coefficient
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Ordinal {
    terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrdinalError {
    #[error("coefficient must be positive")]
    ZeroCoefficient,
    #[error("exponents must be strictly decreasing")]
    NotDecreasing,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::from_u64(1)
    }

    pub fn from_u64(n: u64) -> Self {
        Self::finite(BigUint::from(n))
    }

    pub fn finite(n: BigUint) -> Self {
        if n.is_zero() {
            return Self::zero();
        }
        Ordinal {
            terms: vec![Term {
                exponent: Ordinal::zero(),
                coefficient: n,
            }],
        }
    }

    /// `w`.
    pub fn omega() -> Self {
        Self::omega_pow(Ordinal::one())
    }

    /// `w^e`.
    pub fn omega_pow(exponent: Ordinal) -> Self {
        Ordinal {
            terms: vec![Term {
                exponent,
                coefficient: BigUint::one(),
            }],
        }
    }

    /// Builds an ordinal from `(exponent, coefficient)` pairs, which must
    /// already be in canonical order.
    pub fn from_terms(terms: Vec<(Ordinal, BigUint)>) -> Result<Self, OrdinalError> {
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for (exponent, coefficient) in terms {
            if coefficient.is_zero() {
                return Err(OrdinalError::ZeroCoefficient);
            }
            if let Some(prev) = out.last() {
                if prev.exponent <= exponent {
                    return Err(OrdinalError::NotDecreasing);
                }
            }
            out.push(Term {
                exponent,
                coefficient,
            });
        }
        Ok(Ordinal { terms: out })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|t| t.exponent.is_zero())
    }

    pub fn as_finite(&self) -> Option<BigUint> {
        match self.terms.as_slice() {
            [] => Some(BigUint::zero()),
            [t] if t.exponent.is_zero() => Some(t.coefficient.clone()),
            _ => None,
        }
    }

    /// True iff the ordinal is nonzero and has no finite (constant) term.
    pub fn is_limit(&self) -> bool {
        match self.terms.last() {
            None => false,
            Some(t) => !t.exponent.is_zero(),
        }
    }

    /// The exponent of the leading term; `None` for zero.
    pub fn leading_exponent(&self) -> Option<&Ordinal> {
        self.terms.first().map(|t| &t.exponent)
    }

    /// Splits `self` into its limit part and its trailing finite part.
    pub fn split_finite(&self) -> (Ordinal, BigUint) {
        match self.terms.last() {
            Some(t) if t.exponent.is_zero() => {
                let head = Ordinal {
                    terms: self.terms[..self.terms.len() - 1].to_vec(),
                };
                (head, t.coefficient.clone())
            }
            _ => (self.clone(), BigUint::zero()),
        }
    }

    /// Nesting depth of exponents: 0 for finite ordinals, 1 below `w^w`, etc.
    pub fn height(&self) -> usize {
        self.terms
            .iter()
            .map(|t| {
                if t.exponent.is_zero() {
                    0
                } else {
                    1 + t.exponent.height()
                }
            })
            .max()
            .unwrap_or(0)
    }

    /// Checks the canonical-form invariants recursively.
    pub fn is_canonical(&self) -> bool {
        self.terms.iter().all(|t| !t.coefficient.is_zero() && t.exponent.is_canonical())
            && self
                .terms
                .windows(2)
                .all(|w| w[0].exponent > w[1].exponent)
    }

    /// Ordinal sum `self + rhs`.
    pub fn add(&self, rhs: &Ordinal) -> Ordinal {
        let Some(lead) = rhs.leading_exponent() else {
            return self.clone();
        };
        let mut terms: Vec<Term> = Vec::with_capacity(self.terms.len() + rhs.terms.len());
        let mut merged = false;
        for t in &self.terms {
            match t.exponent.cmp(lead) {
                Ordering::Greater => terms.push(t.clone()),
                Ordering::Equal => {
                    terms.push(Term {
                        exponent: t.exponent.clone(),
                        coefficient: &t.coefficient + &rhs.terms[0].coefficient,
                    });
                    merged = true;
                    break;
                }
                Ordering::Less => break,
            }
        }
        let skip = usize::from(merged);
        terms.extend(rhs.terms.iter().skip(skip).cloned());
        Ordinal { terms }
    }

    /// Ordinal product `self * rhs`, distributing `self` over the terms of `rhs`.
    pub fn mul(&self, rhs: &Ordinal) -> Ordinal {
        if self.is_zero() || rhs.is_zero() {
            return Ordinal::zero();
        }
        let lead = &self.terms[0];
        let mut acc = Ordinal::zero();
        for t in &rhs.terms {
            let part = if t.exponent.is_zero() {
                let mut terms = self.terms.clone();
                terms[0].coefficient = &lead.coefficient * &t.coefficient;
                Ordinal { terms }
            } else {
                Ordinal {
                    terms: vec![Term {
                        exponent: lead.exponent.add(&t.exponent),
                        coefficient: t.coefficient.clone(),
                    }],
                }
            };
            acc = acc.add(&part);
        }
        acc
    }

    pub fn add_u64(&self, n: u64) -> Ordinal {
        self.add(&Ordinal::from_u64(n))
    }

    pub fn mul_u64(&self, n: u64) -> Ordinal {
        self.mul(&Ordinal::from_u64(n))
    }

    fn render(&self, out: &mut String) {
        if self.terms.is_empty() {
            out.push('0');
            return;
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                out.push('+');
            }
            if t.exponent.is_zero() {
                out.push_str(&t.coefficient.to_string());
            } else {
                out.push_str("w^{");
                t.exponent.render(out);
                out.push_str("}*");
                out.push_str(&t.coefficient.to_string());
            }
        }
    }
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.terms.iter().zip(&other.terms) {
            let ord = a
                .exponent
                .cmp(&b.exponent)
                .then_with(|| a.coefficient.cmp(&b.coefficient));
            if ord != Ordering::Equal {
                return ord;
            }
        }
        self.terms.len().cmp(&other.terms.len())
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<u64> for Ordinal {
    fn from(n: u64) -> Self {
        Ordinal::from_u64(n)
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render(&mut s);
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ordinal parse error at byte {position}: {message}")]
pub struct ParseOrdinalError {
    pub position: usize,
    pub message: String,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> ParseOrdinalError {
        ParseOrdinalError {
            position: self.pos,
            message: message.into(),
        }
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.src[self.pos..].starts_with(lit.as_bytes()) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), ParseOrdinalError> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{lit}`")))
        }
    }

    fn nat(&mut self) -> Result<BigUint, ParseOrdinalError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = &self.src[start..self.pos];
        if digits.is_empty() {
            self.pos = start;
            return Err(self.err("expected a natural number"));
        }
        if digits.len() > 1 && digits[0] == b'0' {
            self.pos = start;
            return Err(self.err("leading zero in natural number"));
        }
        // digits are ASCII
        let text = std::str::from_utf8(digits).expect("ascii digits");
        Ok(text.parse().expect("valid decimal"))
    }

    fn ordinal(&mut self) -> Result<Ordinal, ParseOrdinalError> {
        if self.src.get(self.pos) == Some(&b'0')
            && !self
                .src
                .get(self.pos + 1)
                .is_some_and(|b| b.is_ascii_digit())
        {
            self.pos += 1;
            return Ok(Ordinal::zero());
        }
        let mut terms: Vec<Term> = Vec::new();
        loop {
            let term_start = self.pos;
            let term = if self.eat("w^{") {
                let exponent = self.ordinal()?;
                if exponent.is_zero() {
                    self.pos = term_start;
                    return Err(self.err("exponent 0 must be written as a bare natural"));
                }
                self.expect("}*")?;
                let coeff_pos = self.pos;
                let coefficient = self.nat()?;
                if coefficient.is_zero() {
                    self.pos = coeff_pos;
                    return Err(self.err("coefficient must be positive"));
                }
                Term {
                    exponent,
                    coefficient,
                }
            } else {
                let coefficient = self.nat()?;
                if coefficient.is_zero() {
                    self.pos = term_start;
                    return Err(self.err("zero term inside a sum"));
                }
                Term {
                    exponent: Ordinal::zero(),
                    coefficient,
                }
            };
            if let Some(prev) = terms.last() {
                if prev.exponent <= term.exponent {
                    self.pos = term_start;
                    return Err(self.err("exponents must be strictly decreasing"));
                }
            }
            terms.push(term);
            if !self.eat("+") {
                break;
            }
        }
        Ok(Ordinal { terms })
    }
}

impl FromStr for Ordinal {
    type Err = ParseOrdinalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser {
            src: s.as_bytes(),
            pos: 0,
        };
        let ord = p.ordinal()?;
        if p.pos != s.len() {
            return Err(p.err("trailing input"));
        }
        Ok(ord)
    }
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
