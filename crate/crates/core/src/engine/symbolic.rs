//! Parametric re-execution of recorded cycles.
//!
//! Register contents are affine expressions `c + Σ k_i·n_i` over naturals
//! `n_i`, where `n_i` counts repetitions of the cycle at nesting depth `i`
//! (depth 0 is the outermost cycle being verified). Re-executing a cycle's
//! recorded shape symbolically proves that the same instruction path and the
//! same affine register evolution hold for every repetition count, which is
//! what licenses taking the liminf.

use crate::isa::{Instruction, Program};
use crate::oracle::OracleReal;

use super::witness::UnitShape;

/// Scanning bit sequences for a drifting oracle address stops here.
const MAX_BIT_SCAN: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Affine {
    constant: u64,
    coeffs: Vec<u64>,
}

impl Affine {
    pub(crate) fn constant(c: u64) -> Self {
        Affine {
            constant: c,
            coeffs: Vec::new(),
        }
    }

    fn normalize(mut self) -> Self {
        while self.coeffs.last() == Some(&0) {
            self.coeffs.pop();
        }
        self
    }

    fn coeff(&self, depth: usize) -> u64 {
        self.coeffs.get(depth).copied().unwrap_or(0)
    }

    pub(crate) fn as_constant(&self) -> Option<u64> {
        self.coeffs.is_empty().then_some(self.constant)
    }

    fn add_const(&self, k: u64) -> Option<Self> {
        Some(Affine {
            constant: self.constant.checked_add(k)?,
            coeffs: self.coeffs.clone(),
        })
    }

    fn with_param(&self, depth: usize, d: u64) -> Option<Self> {
        if d == 0 {
            return Some(self.clone());
        }
        let mut coeffs = self.coeffs.clone();
        if coeffs.len() <= depth {
            coeffs.resize(depth + 1, 0);
        }
        coeffs[depth] = coeffs[depth].checked_add(d)?;
        Some(Affine {
            constant: self.constant,
            coeffs,
        }
        .normalize())
    }

    /// Substitutes `n_i = 0` for every `i >= depth`.
    fn truncate(&self, depth: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(depth);
        Affine {
            constant: self.constant,
            coeffs,
        }
        .normalize()
    }

    fn dominated_by(&self, other: &Affine) -> bool {
        let n = self.coeffs.len().max(other.coeffs.len());
        self.constant >= other.constant && (0..n).all(|i| self.coeff(i) >= other.coeff(i))
    }
}

/// The expression among `cands` that is pointwise least for every parameter
/// value, if one exists.
fn least(cands: &[Affine]) -> Option<Affine> {
    cands
        .iter()
        .find(|e| cands.iter().all(|f| f.dominated_by(e)))
        .cloned()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Always(bool),
    /// Constant up to (but excluding) repetition `at` of the outermost cycle.
    FlipsAt(bool, u64),
}

fn compare(a: &Affine, b: &Affine) -> Option<Outcome> {
    let n = a.coeffs.len().max(b.coeffs.len());
    let c = a.constant as i128 - b.constant as i128;
    let ks: Vec<i128> = (0..n)
        .map(|i| a.coeff(i) as i128 - b.coeff(i) as i128)
        .collect();
    let nonzero: Vec<usize> = (0..n).filter(|&i| ks[i] != 0).collect();
    match nonzero.as_slice() {
        [] => Some(Outcome::Always(c == 0)),
        [q] => {
            let k = ks[*q];
            let root = if c == 0 {
                Some(0)
            } else if (-c) % k == 0 && (-c) / k > 0 {
                Some(((-c) / k) as u64)
            } else {
                None
            };
            match root {
                None => Some(Outcome::Always(false)),
                Some(r) if *q == 0 => {
                    if r == 0 {
                        Some(Outcome::FlipsAt(true, 1))
                    } else {
                        Some(Outcome::FlipsAt(false, r))
                    }
                }
                Some(_) => None,
            }
        }
        many => {
            let g = many.iter().fold(0i128, |g, &i| gcd(g, ks[i].abs()));
            if c % g != 0
                || (c > 0 && many.iter().all(|&i| ks[i] > 0))
                || (c < 0 && many.iter().all(|&i| ks[i] < 0))
            {
                Some(Outcome::Always(false))
            } else {
                None
            }
        }
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn query(oracle: &OracleReal, addr: &Affine) -> Option<Outcome> {
    let base = oracle.bit_at(addr.constant);
    if addr.coeffs.is_empty() {
        return Some(Outcome::Always(base));
    }
    let (pre, per) = oracle.eventual_period()?;
    if addr.coeffs.len() == 1 {
        let k = addr.coeffs[0];
        let settle = if addr.constant >= pre {
            0
        } else {
            (pre - addr.constant).div_ceil(k)
        };
        let horizon = settle.checked_add(per)?;
        if horizon > MAX_BIT_SCAN {
            return None;
        }
        for m in 1..=horizon {
            let a = addr.constant.checked_add(k.checked_mul(m)?)?;
            if oracle.bit_at(a) != base {
                return Some(Outcome::FlipsAt(base, m));
            }
        }
        return Some(Outcome::Always(base));
    }
    (addr.constant >= pre && addr.coeffs.iter().all(|k| k % per == 0)).then_some(Outcome::Always(base))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Summary {
    pub limit_pc: usize,
    pub limit_regs: Vec<Affine>,
    pub pc_floor: usize,
    pub floor_regs: Vec<Affine>,
}

/// Why symbolic verification gave up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Failure {
    PathMismatch(usize),
    UndecidedComparison(usize),
    UndecidedQuery(usize),
    NotAffine(usize),
    NoLeastValue(usize),
    Opaque,
    Overflow,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::PathMismatch(pc) => write!(f, "recorded path disagrees at line {pc}"),
            Failure::UndecidedComparison(pc) => write!(f, "comparison at line {pc} not provably stable"),
            Failure::UndecidedQuery(pc) => write!(f, "oracle read at line {pc} not provably stable"),
            Failure::NotAffine(r) => write!(f, "register {r} does not evolve affinely"),
            Failure::NoLeastValue(r) => write!(f, "liminf of register {r} is not a single affine term"),
            Failure::Opaque => f.write_str("cycle contains a fast-forward"),
            Failure::Overflow => f.write_str("register arithmetic overflow"),
        }
    }
}

pub(crate) struct Verifier<'a> {
    program: &'a Program,
    oracle: &'a OracleReal,
    /// Earliest outermost repetition at which some recorded outcome changes.
    pub breakpoint: Option<u64>,
}

impl<'a> Verifier<'a> {
    pub(crate) fn new(program: &'a Program, oracle: &'a OracleReal) -> Self {
        Verifier {
            program,
            oracle,
            breakpoint: None,
        }
    }

    fn note(&mut self, outcome: Outcome, recorded: bool, pc: usize) -> Result<(), Failure> {
        let at_zero = match outcome {
            Outcome::Always(b) => b,
            Outcome::FlipsAt(b, at) => {
                self.breakpoint = Some(self.breakpoint.map_or(at, |cur| cur.min(at)));
                b
            }
        };
        if at_zero == recorded {
            Ok(())
        } else {
            Err(Failure::PathMismatch(pc))
        }
    }

    /// Verifies that `shapes`, started from `start + n_depth·drift`, returns to
    /// `start + (n_depth+1)·drift` for every `n_depth`, and summarizes its
    /// liminf and floor.
    pub(crate) fn verify_cycle(
        &mut self,
        shapes: &[UnitShape],
        start: &[Affine],
        drift: &[u64],
        depth: usize,
    ) -> Result<Summary, Failure> {
        let mut regs: Vec<Affine> = start
            .iter()
            .zip(drift)
            .map(|(e, &d)| e.with_param(depth, d).ok_or(Failure::Overflow))
            .collect::<Result<_, _>>()?;
        let first_pc = shapes.first().map(UnitShape::start_pc).ok_or(Failure::Opaque)?;
        let mut pc = first_pc;
        let mut floors: Vec<(usize, Vec<Affine>)> = Vec::with_capacity(shapes.len());

        for shape in shapes {
            if shape.start_pc() != pc {
                return Err(Failure::PathMismatch(pc));
            }
            match shape {
                UnitShape::Step { pc: at, next } => {
                    floors.push((*at, regs.clone()));
                    let ins = *self.program.get(*at).ok_or(Failure::PathMismatch(*at))?;
                    let succ = at + 1;
                    match ins {
                        Instruction::Zero(r) => regs[r] = Affine::constant(0),
                        Instruction::Inc(r) => regs[r] = regs[r].add_const(1).ok_or(Failure::Overflow)?,
                        Instruction::Copy(r, s) => regs[s] = regs[r].clone(),
                        Instruction::Qry(r, s) => {
                            let outcome = query(self.oracle, &regs[r]).ok_or(Failure::UndecidedQuery(*at))?;
                            let bit = match outcome {
                                Outcome::Always(b) | Outcome::FlipsAt(b, _) => b,
                            };
                            self.note(outcome, bit, *at)?;
                            regs[s] = Affine::constant(u64::from(bit));
                        }
                        Instruction::Jeq(r, s, t) => {
                            if t != succ {
                                let outcome =
                                    compare(&regs[r], &regs[s]).ok_or(Failure::UndecidedComparison(*at))?;
                                self.note(outcome, *next == t, *at)?;
                            }
                            if *next != t && *next != succ {
                                return Err(Failure::PathMismatch(*at));
                            }
                            pc = *next;
                            continue;
                        }
                    }
                    if *next != succ {
                        return Err(Failure::PathMismatch(*at));
                    }
                    pc = succ;
                }
                UnitShape::Limit(inner) => {
                    let s = self.verify_cycle(&inner.cycle, &regs, &inner.drift, depth + 1)?;
                    floors.push((s.pc_floor, s.floor_regs));
                    regs = s.limit_regs;
                    pc = s.limit_pc;
                }
                UnitShape::Jump { .. } => return Err(Failure::Opaque),
            }
        }

        if pc != first_pc {
            return Err(Failure::PathMismatch(pc));
        }
        for (r, ((end, s), &d)) in regs.iter().zip(start).zip(drift).enumerate() {
            let expect = s
                .add_const(d)
                .and_then(|e| e.with_param(depth, d))
                .ok_or(Failure::Overflow)?;
            if *end != expect {
                return Err(Failure::NotAffine(r));
            }
        }

        let pc_floor = floors.iter().map(|(p, _)| *p).min().expect("nonempty cycle");
        let rc = start.len();
        let mut limit_regs = Vec::with_capacity(rc);
        let mut floor_regs = Vec::with_capacity(rc);
        for r in 0..rc {
            let bounded: Vec<Affine> = floors
                .iter()
                .map(|(_, f)| &f[r])
                .filter(|e| e.coeff(depth) == 0)
                .cloned()
                .collect();
            limit_regs.push(if bounded.is_empty() {
                Affine::constant(0)
            } else {
                least(&bounded).ok_or(Failure::NoLeastValue(r))?
            });
            let at_start: Vec<Affine> = floors.iter().map(|(_, f)| f[r].truncate(depth)).collect();
            floor_regs.push(least(&at_start).ok_or(Failure::NoLeastValue(r))?);
        }
        Ok(Summary {
            limit_pc: pc_floor,
            limit_regs,
            pc_floor,
            floor_regs,
        })
    }
}
