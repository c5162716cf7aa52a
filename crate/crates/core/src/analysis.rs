//! Budgeted sweeps over program codes and oracle corpora.
//!
//! Verdicts are sound but incomplete: a halted or diverges entry is always
//! right, and anything the budget cannot settle is reported as unknown.

use std::ops::Range;

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{run, verify_divergence, Budget, DivergenceCertificate, Outcome};
use crate::isa::{decode_program, Program};
use crate::oracle::OracleReal;
use crate::ordinal::Ordinal;
use crate::par;

/// Bits compared when an oracle can only be checked bit by bit.
pub const EXTENSIONAL_BOUND: u64 = 4096;

const SCAN_NOTE: &str = "budget-truncated approximation: unknown means the budget ran out, not that the program diverges";
const CORPUS_NOTE: &str = "checked only on the listed oracles; says nothing about oracles outside the corpus";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("register count must be at least 1")]
    NoRegisters,
    #[error("code range is empty")]
    EmptyRange,
    #[error("target oracle must be finite or eventually periodic")]
    TargetNotRepresentable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanOptions {
    pub budget: Budget,
    pub inputs: Range<u64>,
    /// Worker threads; 0 picks automatically, 1 runs sequentially.
    pub jobs: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            budget: Budget::default(),
            inputs: 0..1,
            jobs: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Halted { output: u64, clock: Ordinal },
    Diverges { certificate: DivergenceCertificate },
    Unknown { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScanEntry {
    pub code: String,
    pub input: u64,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub halted: u64,
    pub diverges: u64,
    pub unknown: u64,
    pub total: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScanHeader {
    pub register_count: usize,
    pub code_start: String,
    pub code_end: String,
    pub inputs: [u64; 2],
    pub budget: Budget,
    pub oracle: String,
    pub note: &'static str,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HaltingReport {
    pub header: ScanHeader,
    pub counts: Counts,
    pub entries: Vec<ScanEntry>,
}

impl HaltingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// A run's outcome as a sound verdict. Certificates that fail to re-verify
/// are downgraded to unknown.
fn verdict(program: &Program, oracle: &OracleReal, outcome: Outcome) -> Verdict {
    match outcome {
        Outcome::Halted { output, clock } => Verdict::Halted { output, clock },
        Outcome::Diverges { certificate } => {
            if verify_divergence(&certificate, program, oracle) {
                Verdict::Diverges { certificate }
            } else {
                Verdict::Unknown {
                    reason: "certificate failed verification".into(),
                }
            }
        }
        Outcome::BudgetExhausted { reason, .. } => Verdict::Unknown {
            reason: format!("budget exhausted: {reason}"),
        },
    }
}

/// Runs `decode_program(i, n)` for every code `i` in `start..end` and every
/// input in `options.inputs`.
pub fn halting_scan(
    n: usize,
    start: &BigUint,
    end: &BigUint,
    oracle: &OracleReal,
    options: &ScanOptions,
) -> Result<HaltingReport, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::NoRegisters);
    }
    if start >= end || options.inputs.is_empty() {
        return Err(AnalysisError::EmptyRange);
    }
    let mut jobs: Vec<(BigUint, u64)> = Vec::new();
    let mut i = start.clone();
    while &i < end {
        for input in options.inputs.clone() {
            jobs.push((i.clone(), input));
        }
        i += 1u32;
    }
    let budget = options.budget;
    let entries = par::map(&jobs, options.jobs, |(code, input)| {
        let program = decode_program(code, n);
        let outcome = run(&program, oracle, *input, &budget);
        ScanEntry {
            code: code.to_string(),
            input: *input,
            verdict: verdict(&program, oracle, outcome),
        }
    });
    let mut counts = Counts::default();
    for e in &entries {
        match e.verdict {
            Verdict::Halted { .. } => counts.halted += 1,
            Verdict::Diverges { .. } => counts.diverges += 1,
            Verdict::Unknown { .. } => counts.unknown += 1,
        }
        counts.total += 1;
    }
    Ok(HaltingReport {
        header: ScanHeader {
            register_count: n,
            code_start: start.to_string(),
            code_end: end.to_string(),
            inputs: [options.inputs.start, options.inputs.end],
            budget,
            oracle: oracle.to_string(),
            note: SCAN_NOTE,
        },
        counts,
        entries,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict")]
pub enum Decision {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "nonbinary")]
    Nonbinary { output: u64 },
    #[serde(rename = "no_verdict")]
    NoVerdict {
        reason: String,
        certificate: Option<DivergenceCertificate>,
    },
}

impl Decision {
    fn from_outcome(program: &Program, oracle: &OracleReal, outcome: Outcome) -> Decision {
        match verdict(program, oracle, outcome) {
            Verdict::Halted { output: 0, .. } => Decision::Zero,
            Verdict::Halted { output: 1, .. } => Decision::One,
            Verdict::Halted { output, .. } => Decision::Nonbinary { output },
            Verdict::Diverges { certificate } => Decision::NoVerdict {
                reason: "diverges".into(),
                certificate: Some(certificate),
            },
            Verdict::Unknown { reason } => Decision::NoVerdict {
                reason,
                certificate: None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecisionEntry {
    pub oracle: String,
    pub input: u64,
    #[serde(flatten)]
    pub decision: Decision,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecisionReport {
    pub note: &'static str,
    pub budget: Budget,
    pub entries: Vec<DecisionEntry>,
}

/// Runs `program` on every oracle of the corpus and every input.
pub fn decide_on_corpus(
    program: &Program,
    corpus: &[OracleReal],
    inputs: Range<u64>,
    budget: &Budget,
    jobs: usize,
) -> DecisionReport {
    let cases: Vec<(&OracleReal, u64)> = corpus
        .iter()
        .flat_map(|x| inputs.clone().map(move |i| (x, i)))
        .collect();
    let entries = par::map(&cases, jobs, |(x, input)| DecisionEntry {
        oracle: x.to_string(),
        input: *input,
        decision: Decision::from_outcome(program, x, run(program, x, *input, budget)),
    });
    DecisionReport {
        note: CORPUS_NOTE,
        budget: *budget,
        entries,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecognitionEntry {
    pub oracle: String,
    /// Whether this corpus member is extensionally the target.
    pub is_target: bool,
    #[serde(flatten)]
    pub decision: Decision,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecognitionReport {
    pub note: &'static str,
    pub target: String,
    pub budget: Budget,
    /// Every run reached a verdict.
    pub complete: bool,
    /// The program output 1 exactly on the target and 0 elsewhere.
    pub consistent: bool,
    pub entries: Vec<RecognitionEntry>,
}

/// Runs `program` on input 0 with each corpus oracle and checks it accepts
/// exactly the members equal to `target`.
pub fn recognize_on_corpus(
    program: &Program,
    target: &OracleReal,
    corpus: &[OracleReal],
    budget: &Budget,
    jobs: usize,
) -> Result<RecognitionReport, AnalysisError> {
    if matches!(target, OracleReal::Predicate(_)) {
        return Err(AnalysisError::TargetNotRepresentable);
    }
    let entries = par::map(corpus, jobs, |x| RecognitionEntry {
        oracle: x.to_string(),
        is_target: target.extensionally_equal(x, EXTENSIONAL_BOUND),
        decision: Decision::from_outcome(program, x, run(program, x, 0, budget)),
    });
    let complete = entries
        .iter()
        .all(|e| !matches!(e.decision, Decision::NoVerdict { .. }));
    let consistent = entries.iter().all(|e| {
        e.decision
            == if e.is_target {
                Decision::One
            } else {
                Decision::Zero
            }
    });
    Ok(RecognitionReport {
        note: CORPUS_NOTE,
        target: target.to_string(),
        budget: *budget,
        complete,
        consistent,
        entries,
    })
}
