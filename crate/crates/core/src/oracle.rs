//! Oracle reals (subsets of the naturals), Cantor pairing and the product join.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Roots;
use thiserror::Error;

/// `p(i, j) = (i+j)(i+j+1)/2 + i`. Returns `None` when the result exceeds `u64`.
pub fn cantor_pair(i: u64, j: u64) -> Option<u64> {
    let s = (i as u128) + (j as u128);
    let v = s.checked_mul(s + 1)? / 2 + i as u128;
    u64::try_from(v).ok()
}

/// Inverse of [`cantor_pair`].
pub fn cantor_unpair(n: u64) -> (u64, u64) {
    let n = n as u128;
    let mut w = ((8 * n + 1).sqrt() - 1) / 2;
    // isqrt is exact, but keep the triangular bracket honest.
    while w * (w + 1) / 2 > n {
        w -= 1;
    }
    while (w + 1) * (w + 2) / 2 <= n {
        w += 1;
    }
    let t = w * (w + 1) / 2;
    let i = n - t;
    let j = w - i;
    (i as u64, j as u64)
}

pub fn cantor_pair_big(i: &BigUint, j: &BigUint) -> BigUint {
    let s = i + j;
    (&s * (&s + 1u32)) / 2u32 + i
}

pub fn cantor_unpair_big(n: &BigUint) -> (BigUint, BigUint) {
    let w = ((n * 8u32 + 1u32).sqrt() - 1u32) / 2u32;
    let t = (&w * (&w + 1u32)) / 2u32;
    let i = n - &t;
    let j = &w - &i;
    (i, j)
}

/// An eventually periodic bit sequence `pre · per^ω`, kept canonical: the
/// period is primitive and the preperiod is as short as possible.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Periodic {
    pre: Vec<bool>,
    per: Vec<bool>,
}

impl Periodic {
    pub fn new(mut pre: Vec<bool>, per: Vec<bool>) -> Result<Self, OracleError> {
        if per.is_empty() {
            return Err(OracleError::EmptyPeriod);
        }
        let mut per = primitive_root(per);
        while let (Some(&a), Some(&b)) = (pre.last(), per.last()) {
            if a != b {
                break;
            }
            pre.pop();
            per.rotate_right(1);
        }
        Ok(Periodic { pre, per })
    }

    pub fn preperiod(&self) -> &[bool] {
        &self.pre
    }

    pub fn period(&self) -> &[bool] {
        &self.per
    }

    pub fn bit(&self, n: u64) -> bool {
        let pre = self.pre.len() as u64;
        if n < pre {
            self.pre[n as usize]
        } else {
            self.per[((n - pre) % self.per.len() as u64) as usize]
        }
    }
}

fn primitive_root(per: Vec<bool>) -> Vec<bool> {
    let n = per.len();
    for d in 1..n {
        if n.is_multiple_of(d) && (d..n).all(|i| per[i] == per[i - d]) {
            return per[..d].to_vec();
        }
    }
    per
}

/// Host-supplied membership function.
#[derive(Clone)]
pub struct Predicate {
    name: String,
    test: Arc<dyn Fn(u64) -> bool + Send + Sync>,
}

impl Predicate {
    pub fn new(name: impl Into<String>, test: impl Fn(u64) -> bool + Send + Sync + 'static) -> Self {
        Predicate {
            name: name.into(),
            test: Arc::new(test),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Predicate").field("name", &self.name).finish()
    }
}

/// A subset of the naturals used as an oracle.
#[derive(Clone, Debug)]
pub enum OracleReal {
    Finite(BTreeSet<u64>),
    Periodic(Periodic),
    Predicate(Predicate),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("period must be nonempty")]
    EmptyPeriod,
    #[error("malformed oracle text `{0}`")]
    Syntax(String),
    #[error("join is only defined for finite or periodic reals")]
    NotRepresentable,
}

impl OracleReal {
    pub fn empty() -> Self {
        OracleReal::Finite(BTreeSet::new())
    }

    pub fn finite(elems: impl IntoIterator<Item = u64>) -> Self {
        OracleReal::Finite(elems.into_iter().collect())
    }

    pub fn evens() -> Self {
        OracleReal::Periodic(Periodic::new(vec![], vec![true, false]).expect("nonempty"))
    }

    pub fn naturals() -> Self {
        OracleReal::Periodic(Periodic::new(vec![], vec![true]).expect("nonempty"))
    }

    pub fn periodic(pre: Vec<bool>, per: Vec<bool>) -> Result<Self, OracleError> {
        Ok(OracleReal::Periodic(Periodic::new(pre, per)?))
    }

    pub fn predicate(name: impl Into<String>, test: impl Fn(u64) -> bool + Send + Sync + 'static) -> Self {
        OracleReal::Predicate(Predicate::new(name, test))
    }

    /// 1 iff `n` is in the set.
    pub fn bit_at(&self, n: u64) -> bool {
        match self {
            OracleReal::Finite(s) => s.contains(&n),
            OracleReal::Periodic(p) => p.bit(n),
            OracleReal::Predicate(p) => (p.test)(n),
        }
    }

    /// `(preperiod length, period length)` when the set is eventually periodic
    /// in a way the representation can prove.
    pub fn eventual_period(&self) -> Option<(u64, u64)> {
        match self {
            OracleReal::Finite(s) => Some((s.last().map_or(0, |m| m + 1), 1)),
            OracleReal::Periodic(p) => Some((p.pre.len() as u64, p.per.len() as u64)),
            OracleReal::Predicate(_) => None,
        }
    }

    /// Canonical periodic re-encoding of finite and periodic reals. Finite
    /// sets with elements beyond 2^24 are not re-encoded.
    pub fn to_periodic(&self) -> Option<Periodic> {
        match self {
            OracleReal::Finite(s) => {
                let len = s.last().map_or(0, |m| m + 1);
                if len > 1 << 24 {
                    return None;
                }
                let mut pre = vec![false; len as usize];
                for &m in s {
                    pre[m as usize] = true;
                }
                Some(Periodic::new(pre, vec![false]).expect("nonempty"))
            }
            OracleReal::Periodic(p) => Some(p.clone()),
            OracleReal::Predicate(_) => None,
        }
    }

    /// Extensional equality. Exact when both sides are finite or periodic;
    /// otherwise compares bits `0..bound`.
    pub fn extensionally_equal(&self, other: &OracleReal, bound: u64) -> bool {
        use OracleReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a == b,
            (Finite(f), Periodic(p)) | (Periodic(p), Finite(f)) => {
                p.per == [false]
                    && f.iter().all(|&m| m < p.pre.len() as u64)
                    && p.pre
                        .iter()
                        .enumerate()
                        .all(|(i, &b)| b == f.contains(&(i as u64)))
            }
            (Periodic(a), Periodic(b)) => a == b,
            _ => (0..bound).all(|n| self.bit_at(n) == other.bit_at(n)),
        }
    }

    fn representable(&self) -> bool {
        !matches!(self, OracleReal::Predicate(_))
    }
}

/// `a ⊕ b = { p(i, j) | i ∈ a, j ∈ b }`.
///
/// Finite inputs give the exact finite product set. Otherwise the result is a
/// predicate that unpairs its argument. Note `∅ ⊕ b = ∅`: the join does not
/// remember `b` when `a` is empty.
pub fn join(a: &OracleReal, b: &OracleReal) -> Result<OracleReal, OracleError> {
    if !a.representable() || !b.representable() {
        return Err(OracleError::NotRepresentable);
    }
    if let (OracleReal::Finite(sa), OracleReal::Finite(sb)) = (a, b) {
        let mut out = BTreeSet::new();
        for &i in sa {
            for &j in sb {
                if let Some(n) = cantor_pair(i, j) {
                    out.insert(n);
                }
            }
        }
        return Ok(OracleReal::Finite(out));
    }
    let (a2, b2) = (a.clone(), b.clone());
    let name = format!("join({a},{b})");
    Ok(OracleReal::predicate(name, move |n| {
        let (i, j) = cantor_unpair(n);
        a2.bit_at(i) && b2.bit_at(j)
    }))
}

/// `{ m | p(i, m) ∈ j }`.
pub fn project_row(j: &OracleReal, i: u64) -> OracleReal {
    match j {
        OracleReal::Finite(s) => OracleReal::Finite(
            s.iter()
                .map(|&n| cantor_unpair(n))
                .filter(|&(a, _)| a == i)
                .map(|(_, m)| m)
                .collect(),
        ),
        _ => {
            let inner = j.clone();
            OracleReal::predicate(format!("row({j},{i})"), move |m| {
                cantor_pair(i, m).is_some_and(|n| inner.bit_at(n))
            })
        }
    }
}

fn bits_text(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

impl fmt::Display for OracleReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleReal::Finite(s) => {
                let items: Vec<String> = s.iter().map(u64::to_string).collect();
                write!(f, "finite:{{{}}}", items.join(","))
            }
            OracleReal::Periodic(p) => {
                write!(f, "periodic:pre={},per={}", bits_text(&p.pre), bits_text(&p.per))
            }
            OracleReal::Predicate(p) => write!(f, "predicate:{}", p.name),
        }
    }
}

impl FromStr for OracleReal {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || OracleError::Syntax(s.to_string());
        match s {
            "empty" => return Ok(OracleReal::empty()),
            "evens" => return Ok(OracleReal::evens()),
            "naturals" => return Ok(OracleReal::naturals()),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("finite:") {
            let inner = rest
                .strip_prefix('{')
                .and_then(|r| r.strip_suffix('}'))
                .ok_or_else(bad)?;
            if inner.is_empty() {
                return Ok(OracleReal::empty());
            }
            let elems = inner
                .split(',')
                .map(|t| t.parse::<u64>().map_err(|_| bad()))
                .collect::<Result<BTreeSet<_>, _>>()?;
            return Ok(OracleReal::Finite(elems));
        }
        if let Some(rest) = s.strip_prefix("periodic:") {
            let (pre, per) = rest.split_once(',').ok_or_else(bad)?;
            let pre = pre.strip_prefix("pre=").and_then(parse_bits).ok_or_else(bad)?;
            let per = per.strip_prefix("per=").and_then(parse_bits).ok_or_else(bad)?;
            return OracleReal::periodic(pre, per).map_err(|_| bad());
        }
        Err(bad())
    }
}
