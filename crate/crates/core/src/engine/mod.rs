//! Transfinite execution with cycle acceleration.
//!
//! The engine steps a program concretely and keeps a compressed history of
//! what it did. When the tail of that history repeats affinely and the
//! repetition is proven to go on forever, the engine jumps to the limit and
//! applies the liminf rule. Limits feed back into the history, so cycles of
//! limits are accelerated the same way.

mod certificate;
mod machine;
mod symbolic;
mod trace;
mod witness;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::isa::{Instruction, Program};
use crate::oracle::OracleReal;
use crate::ordinal::Ordinal;

pub use certificate::{verify_divergence, Acceleration, DerivationStep, DivergenceCertificate};
pub use trace::{Trace, TraceEvent, TraceRecord};
pub use witness::{
    accelerate_omega, detect_affine_cycle, fast_forward, liminf_brute, stability_check, BruteError,
    CycleWitness, LimitRecord, LimitShape, Stability, StableCycle, UnitShape, REPLAY_COUNT,
};

use machine::{Machine, Stop};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    pub pc: usize,
    pub registers: Vec<u64>,
}

impl Configuration {
    /// Program counter 0, the input in register 0, every other register 0.
    pub fn initial(program: &Program, input: u64) -> Self {
        let mut registers = vec![0; program.register_count()];
        registers[0] = input;
        Configuration { pc: 0, registers }
    }

    pub fn is_halted(&self, program: &Program) -> bool {
        self.pc >= program.len()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pc={} registers=[", self.pc)?;
        for (i, r) in self.registers.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str("]")
    }
}

/// A register would exceed `u64::MAX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("register overflow")]
pub struct Overflow;

/// Executes the instruction at `pc` in place. Returns the next program
/// counter, or `None` if `pc` is already past the end.
pub(crate) fn exec(
    program: &Program,
    oracle: &OracleReal,
    pc: usize,
    regs: &mut [u64],
) -> Result<Option<usize>, Overflow> {
    let Some(ins) = program.get(pc) else {
        return Ok(None);
    };
    let next = match *ins {
        Instruction::Zero(r) => {
            regs[r] = 0;
            pc + 1
        }
        Instruction::Inc(r) => {
            regs[r] = regs[r].checked_add(1).ok_or(Overflow)?;
            pc + 1
        }
        Instruction::Copy(r, s) => {
            regs[s] = regs[r];
            pc + 1
        }
        Instruction::Jeq(r, s, t) => {
            if regs[r] == regs[s] {
                t
            } else {
                pc + 1
            }
        }
        Instruction::Qry(r, s) => {
            regs[s] = u64::from(oracle.bit_at(regs[r]));
            pc + 1
        }
    };
    Ok(Some(next))
}

/// One successor step.
///
/// # Panics
///
/// If `config` is halted or a register would overflow.
pub fn step(config: &Configuration, program: &Program, oracle: &OracleReal) -> Configuration {
    let mut registers = config.registers.clone();
    let pc = exec(program, oracle, config.pc, &mut registers)
        .expect("register overflow")
        .expect("step from a halted configuration");
    Configuration { pc, registers }
}

/// Plain finite interpretation. Returns the output and the number of steps
/// if the program halts within `max_steps`.
pub fn naive_run(program: &Program, oracle: &OracleReal, input: u64, max_steps: u64) -> Option<(u64, u64)> {
    let mut c = Configuration::initial(program, input);
    for steps in 0..=max_steps {
        if c.is_halted(program) {
            return Some((c.registers[0], steps));
        }
        if steps == max_steps {
            break;
        }
        c.pc = exec(program, oracle, c.pc, &mut c.registers).ok()??;
    }
    None
}

/// Resource limits for one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Budget {
    /// Consecutive units of one level allowed before a limit of higher
    /// level; at level 0 these are concrete steps.
    pub max_steps_per_level: u64,
    /// Highest order of limit the engine may take.
    pub max_level: u32,
    /// Limits plus fast-forwards.
    pub max_accelerations: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_steps_per_level: 100_000,
            max_level: 2,
            max_accelerations: 1_000,
        }
    }
}

impl Budget {
    pub fn doubled(&self) -> Budget {
        Budget {
            max_steps_per_level: self.max_steps_per_level.saturating_mul(2),
            max_level: self.max_level.saturating_mul(2),
            max_accelerations: self.max_accelerations.saturating_mul(2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BudgetReason {
    Steps { level: u32 },
    Accelerations,
    Overflow,
}

impl fmt::Display for BudgetReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BudgetReason::Steps { level } => write!(f, "steps at level {level}"),
            BudgetReason::Accelerations => f.write_str("accelerations"),
            BudgetReason::Overflow => f.write_str("register overflow"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Halted {
        output: u64,
        clock: Ordinal,
    },
    Diverges {
        certificate: DivergenceCertificate,
    },
    BudgetExhausted {
        config: Configuration,
        clock: Ordinal,
        reason: BudgetReason,
    },
}

impl Outcome {
    pub fn is_halted(&self) -> bool {
        matches!(self, Outcome::Halted { .. })
    }

    pub fn is_diverges(&self) -> bool {
        matches!(self, Outcome::Diverges { .. })
    }

    pub fn output(&self) -> Option<u64> {
        match self {
            Outcome::Halted { output, .. } => Some(*output),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Halted { output, clock } => write!(f, "halted output={output} clock={clock}"),
            Outcome::Diverges { certificate } => {
                write!(f, "diverges cert=({}, {})", certificate.clock_a, certificate.clock_b)
            }
            Outcome::BudgetExhausted { config, clock, reason } => {
                write!(f, "budget-exhausted reason={reason} clock={clock} {config}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep a trace with this many of the most recent step records.
    pub trace_steps: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub concrete_steps: u64,
    pub limits: u64,
    pub fast_forwards: u64,
    pub derivation: Vec<DerivationStep>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub stats: RunStats,
    pub trace: Option<Trace>,
}

pub fn run(program: &Program, oracle: &OracleReal, input: u64, budget: &Budget) -> Outcome {
    run_with(program, oracle, input, budget, &RunOptions::default()).outcome
}

pub fn run_with(
    program: &Program,
    oracle: &OracleReal,
    input: u64,
    budget: &Budget,
    options: &RunOptions,
) -> RunResult {
    let mut m = Machine::new(program, oracle, input, *budget, options.trace_steps);
    let outcome = match m.drive() {
        Stop::Done(o) => o,
        Stop::ReachedClock => unreachable!("no stop clock was requested"),
    };
    let trace = m.take_trace().map(|t| {
        let (clock, config, event) = match &outcome {
            Outcome::Halted { clock, .. } => (clock.clone(), m.config(), TraceEvent::Halt),
            Outcome::Diverges { certificate } => {
                (certificate.clock_b.clone(), certificate.config.clone(), TraceEvent::Diverge)
            }
            Outcome::BudgetExhausted { config, clock, .. } => (clock.clone(), config.clone(), TraceEvent::Budget),
        };
        t.finish(clock, &config, event)
    });
    let stats = m.stats();
    RunResult { outcome, stats, trace }
}
