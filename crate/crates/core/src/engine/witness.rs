//! Cycle witnesses and the operations that consume them.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::isa::{Instruction, Program};
use crate::oracle::OracleReal;
use crate::ordinal::Ordinal;

use super::symbolic::{Affine, Verifier};
use super::{exec, Configuration, Overflow};

/// Structural description of one history unit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum UnitShape {
    /// One concrete instruction executed at `pc`, continuing at `next`.
    Step { pc: usize, next: usize },
    /// A collapsed cycle, standing for its ω repetitions and the limit.
    Limit(Arc<LimitShape>),
    /// A fast-forward over finitely many repetitions. Never part of a
    /// verifiable cycle.
    Jump {
        id: u64,
        start_pc: usize,
        level: u32,
        advance: Ordinal,
    },
}

/// The recorded cycle behind a limit unit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LimitShape {
    pub cycle: Vec<UnitShape>,
    /// Per-register drift of the cycle's start configuration.
    pub drift: Vec<u64>,
    /// Order of the limit: 1 for a limit of plain steps.
    pub level: u32,
    /// Ordinal length of one repetition.
    pub rep_advance: Ordinal,
}

impl UnitShape {
    pub fn start_pc(&self) -> usize {
        match self {
            UnitShape::Step { pc, .. } => *pc,
            UnitShape::Limit(s) => s.cycle[0].start_pc(),
            UnitShape::Jump { start_pc, .. } => *start_pc,
        }
    }

    pub fn level(&self) -> u32 {
        match self {
            UnitShape::Step { .. } => 0,
            UnitShape::Limit(s) => s.level,
            UnitShape::Jump { level, .. } => *level,
        }
    }

    /// Ordinal time the unit spans.
    pub fn advance(&self) -> Ordinal {
        match self {
            UnitShape::Step { .. } => Ordinal::one(),
            UnitShape::Limit(s) => s.rep_advance.mul(&Ordinal::omega()),
            UnitShape::Jump { advance, .. } => advance.clone(),
        }
    }
}

/// Evidence that the units starting at `start_clock` repeat with period
/// `cycle_length`, observed over `replay_count + 1` repetitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleWitness {
    pub start_clock: Ordinal,
    pub cycle_length: usize,
    /// Order of the limit this cycle would produce.
    pub level: u32,
    pub units: Vec<UnitShape>,
    /// Program counter at the start of each unit.
    pub pc_trace: Vec<usize>,
    /// Least program counter seen during each unit.
    pub pc_floors: Vec<usize>,
    /// Registers at the start of each unit in the first repetition.
    pub base_values: Vec<Vec<u64>>,
    /// Per-repetition increase of `base_values`.
    pub drifts: Vec<Vec<u64>>,
    /// Least register values seen during each unit in the first repetition.
    pub floor_values: Vec<Vec<u64>>,
    pub floor_drifts: Vec<Vec<u64>>,
    pub rep_advance: Ordinal,
    pub replay_count: u32,
}

/// Number of repetitions compared against the first before a window counts
/// as a candidate.
pub const REPLAY_COUNT: u32 = 3;

/// A witness whose cycle has been proven to repeat forever.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StableCycle {
    witness: Box<CycleWitness>,
}

impl StableCycle {
    pub fn witness(&self) -> &CycleWitness {
        &self.witness
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable(StableCycle),
    /// The recorded path holds for repetitions `0..n` but not for `n`.
    Breakpoint(u64),
    Unknown(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LimitRecord {
    pub clock: Ordinal,
    pub level: u32,
}

/// One history unit as seen by witness construction.
pub(crate) struct UnitView<'a> {
    pub shape: &'a UnitShape,
    pub sig: u64,
    pub start_pc: usize,
    pub pc_floor: usize,
    pub start: &'a [u64],
    pub floor: &'a [u64],
}

type Rows = Vec<Vec<u64>>;

fn affine_rows<'a>(
    rows: impl Fn(usize) -> &'a [u64],
    c: usize,
    reps: usize,
) -> Option<(Rows, Rows)> {
    let mut base = Vec::with_capacity(c);
    let mut drift = Vec::with_capacity(c);
    for k in 0..c {
        let b = rows(k);
        let next = rows(c + k);
        let d: Vec<u64> = b
            .iter()
            .zip(next)
            .map(|(&x, &y)| y.checked_sub(x))
            .collect::<Option<_>>()?;
        for m in 2..reps {
            let row = rows(m * c + k);
            let ok = b.iter().zip(&d).zip(row).all(|((&x, &dx), &y)| {
                dx.checked_mul(m as u64)
                    .and_then(|s| x.checked_add(s))
                    .is_some_and(|v| v == y)
            });
            if !ok {
                return None;
            }
        }
        base.push(b.to_vec());
        drift.push(d);
    }
    Some((base, drift))
}

/// Builds a witness from `units`, which must hold exactly
/// `(REPLAY_COUNT + 1) * c` units.
pub(crate) fn build_witness(
    units: &[UnitView<'_>],
    c: usize,
    start_clock: Ordinal,
    program: &Program,
    oracle: &OracleReal,
) -> Option<CycleWitness> {
    let reps = REPLAY_COUNT as usize + 1;
    if c == 0 || units.len() != reps * c {
        return None;
    }
    for (i, u) in units.iter().enumerate().skip(c) {
        let k = i % c;
        if u.sig != units[k].sig || u.pc_floor != units[k].pc_floor {
            return None;
        }
    }
    if units[..c].iter().any(|u| matches!(u.shape, UnitShape::Jump { .. })) {
        return None;
    }
    let (base_values, drifts) = affine_rows(|i| units[i].start, c, reps)?;
    let (floor_values, floor_drifts) = affine_rows(|i| units[i].floor, c, reps)?;

    let periodic = oracle.eventual_period().is_some();
    for (k, u) in units[..c].iter().enumerate() {
        if let UnitShape::Step { pc, .. } = u.shape {
            if let Some(Instruction::Qry(r, _)) = program.get(*pc) {
                if drifts[k][*r] != 0 && !periodic {
                    return None;
                }
            }
        }
    }

    let level = 1 + units[..c].iter().map(|u| u.shape.level()).max().unwrap_or(0);
    let rep_advance = units[..c]
        .iter()
        .fold(Ordinal::zero(), |acc, u| acc.add(&u.shape.advance()));
    Some(CycleWitness {
        start_clock,
        cycle_length: c,
        level,
        units: units[..c].iter().map(|u| u.shape.clone()).collect(),
        pc_trace: units[..c].iter().map(|u| u.start_pc).collect(),
        pc_floors: units[..c].iter().map(|u| u.pc_floor).collect(),
        base_values,
        drifts,
        floor_values,
        floor_drifts,
        rep_advance,
        replay_count: REPLAY_COUNT,
    })
}

pub(crate) fn step_sig(pc: usize, next: usize) -> u64 {
    ((pc as u64) << 32) | next as u64
}

/// Finds the shortest affine cycle in a run of consecutive concrete
/// configurations, the first of which sits at `start_clock`. Among cycles of
/// equal length the earliest is returned.
pub fn detect_affine_cycle(
    start_clock: &Ordinal,
    configs: &[Configuration],
    program: &Program,
    oracle: &OracleReal,
) -> Option<CycleWitness> {
    if configs.len() < 2 {
        return None;
    }
    let shapes: Vec<UnitShape> = configs
        .windows(2)
        .map(|w| UnitShape::Step {
            pc: w[0].pc,
            next: w[1].pc,
        })
        .collect();
    let views: Vec<UnitView<'_>> = shapes
        .iter()
        .zip(configs)
        .enumerate()
        .map(|(i, (shape, cfg))| UnitView {
            shape,
            sig: step_sig(cfg.pc, configs[i + 1].pc),
            start_pc: cfg.pc,
            pc_floor: cfg.pc,
            start: &cfg.registers,
            floor: &cfg.registers,
        })
        .collect();
    let reps = REPLAY_COUNT as usize + 1;
    let n = views.len();
    for c in 1..=n / reps {
        for s in 0..=n - reps * c {
            let window = &views[s..s + reps * c];
            if (c..window.len()).all(|i| window[i].sig == window[i - c].sig) {
                if let Some(w) = build_witness(window, c, start_clock.add_u64(s as u64), program, oracle) {
                    return Some(w);
                }
            }
        }
    }
    None
}

/// The liminf read directly off the witness: the least program counter, and
/// for each register the least floor among units where it does not drift,
/// or zero if it drifts everywhere.
fn witness_limit(w: &CycleWitness) -> Configuration {
    let pc = *w.pc_floors.iter().min().expect("nonempty cycle");
    let rc = w.base_values.first().map_or(0, Vec::len);
    let registers = (0..rc)
        .map(|r| {
            (0..w.cycle_length)
                .filter(|&k| w.floor_drifts[k][r] == 0)
                .map(|k| w.floor_values[k][r])
                .min()
                .unwrap_or(0)
        })
        .collect();
    Configuration { pc, registers }
}

/// Proves (or refutes) that the witnessed cycle repeats forever.
pub fn stability_check(w: &CycleWitness, program: &Program, oracle: &OracleReal) -> Stability {
    if w.units.len() != w.cycle_length || w.cycle_length == 0 {
        return Stability::Unknown("malformed witness".into());
    }
    let start: Vec<Affine> = w.base_values[0].iter().map(|&v| Affine::constant(v)).collect();
    let mut verifier = Verifier::new(program, oracle);
    let summary = match verifier.verify_cycle(&w.units, &start, &w.drifts[0], 0) {
        Ok(s) => s,
        Err(f) => return Stability::Unknown(f.to_string()),
    };
    if let Some(n) = verifier.breakpoint {
        return Stability::Breakpoint(n);
    }
    let registers: Option<Vec<u64>> = summary.limit_regs.iter().map(Affine::as_constant).collect();
    let Some(registers) = registers else {
        return Stability::Unknown("limit depends on the repetition count".into());
    };
    let symbolic = Configuration {
        pc: summary.limit_pc,
        registers,
    };
    if symbolic != witness_limit(w) {
        return Stability::Unknown("witness disagrees with symbolic limit".into());
    }
    Stability::Stable(StableCycle {
        witness: Box::new(w.clone()),
    })
}

/// The configuration and clock at the limit of a stable cycle.
pub fn accelerate_omega(stable: &StableCycle) -> (Configuration, LimitRecord) {
    let w = &stable.witness;
    let clock = w.start_clock.add(&w.rep_advance.mul(&Ordinal::omega()));
    (
        witness_limit(w),
        LimitRecord {
            clock,
            level: w.level,
        },
    )
}

/// Configuration and clock at the start of repetition `n` of the witnessed
/// cycle.
pub fn fast_forward(w: &CycleWitness, n: u64) -> Result<(Configuration, Ordinal), Overflow> {
    let registers = w.base_values[0]
        .iter()
        .zip(&w.drifts[0])
        .map(|(&b, &d)| d.checked_mul(n).and_then(|s| b.checked_add(s)).ok_or(Overflow))
        .collect::<Result<_, _>>()?;
    let clock = w.start_clock.add(&w.rep_advance.mul_u64(n));
    Ok((
        Configuration {
            pc: w.pc_trace[0],
            registers,
        },
        clock,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BruteError {
    #[error("at least 3 repetitions are needed, got {0}")]
    TooFewReplays(u32),
    #[error("only cycles of plain steps can be replayed, this one has level {0}")]
    Unsupported(u32),
    #[error("path leaves the cycle at repetition {rep}, offset {offset}")]
    PathBreak { rep: u32, offset: usize },
    #[error("register {register} breaks affinity at repetition {rep}, offset {offset}")]
    AffinityBreak { rep: u32, offset: usize, register: usize },
    #[error("the program halted inside the cycle")]
    Halted,
    #[error("register overflow")]
    Overflow,
}

/// Replays `replays` repetitions of a step-level witness concretely and
/// applies the liminf rule to what it observes.
pub fn liminf_brute(
    w: &CycleWitness,
    program: &Program,
    oracle: &OracleReal,
    replays: u32,
) -> Result<Configuration, BruteError> {
    if replays < 3 {
        return Err(BruteError::TooFewReplays(replays));
    }
    if w.level != 1 {
        return Err(BruteError::Unsupported(w.level));
    }
    let c = w.cycle_length;
    let mut pc = w.pc_trace[0];
    let mut regs = w.base_values[0].clone();
    let mut seen: Vec<Vec<Vec<u64>>> = Vec::with_capacity(replays as usize);
    for rep in 0..replays {
        let mut row = Vec::with_capacity(c);
        for offset in 0..c {
            if pc != w.pc_trace[offset] {
                return Err(BruteError::PathBreak { rep, offset });
            }
            row.push(regs.clone());
            pc = match exec(program, oracle, pc, &mut regs) {
                Ok(Some(next)) => next,
                Ok(None) => return Err(BruteError::Halted),
                Err(Overflow) => return Err(BruteError::Overflow),
            };
        }
        seen.push(row);
    }
    if pc != w.pc_trace[0] {
        return Err(BruteError::PathBreak { rep: replays, offset: 0 });
    }
    let rc = regs.len();
    let mut registers = vec![0; rc];
    for (r, out) in registers.iter_mut().enumerate() {
        let mut best: Option<u64> = None;
        for offset in 0..c {
            let v0 = seen[0][offset][r];
            let d = seen[1][offset][r]
                .checked_sub(v0)
                .ok_or(BruteError::AffinityBreak { rep: 1, offset, register: r })?;
            for (rep, row) in seen.iter().enumerate().skip(2) {
                if Some(row[offset][r]) != d.checked_mul(rep as u64).and_then(|s| v0.checked_add(s)) {
                    return Err(BruteError::AffinityBreak {
                        rep: rep as u32,
                        offset,
                        register: r,
                    });
                }
            }
            if d == 0 {
                best = Some(best.map_or(v0, |b| b.min(v0)));
            }
        }
        *out = best.unwrap_or(0);
    }
    Ok(Configuration {
        pc: *w.pc_trace.iter().min().expect("nonempty cycle"),
        registers,
    })
}
