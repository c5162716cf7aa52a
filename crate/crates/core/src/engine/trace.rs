use std::collections::VecDeque;

use serde::Serialize;

use crate::ordinal::Ordinal;

use super::Configuration;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    Step,
    Limit,
    FastForward,
    Halt,
    Diverge,
    Budget,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub clock: Ordinal,
    pub pc: usize,
    pub registers: Vec<u64>,
    pub event: TraceEvent,
}

/// Recorded events of one run: every limit and fast-forward, plus the most
/// recent step records.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

pub(crate) struct TraceBuffer {
    capacity: usize,
    seq: u64,
    steps: VecDeque<(u64, TraceRecord)>,
    kept: Vec<(u64, TraceRecord)>,
}

impl TraceBuffer {
    pub fn new(capacity: usize) -> Self {
        TraceBuffer {
            capacity,
            seq: 0,
            steps: VecDeque::new(),
            kept: Vec::new(),
        }
    }

    pub fn push(&mut self, clock: Ordinal, config: &Configuration, event: TraceEvent) {
        let rec = TraceRecord {
            clock,
            pc: config.pc,
            registers: config.registers.clone(),
            event,
        };
        self.seq += 1;
        if event == TraceEvent::Step {
            if self.capacity == 0 {
                return;
            }
            if self.steps.len() == self.capacity {
                self.steps.pop_front();
            }
            self.steps.push_back((self.seq, rec));
        } else {
            self.kept.push((self.seq, rec));
        }
    }

    /// Marks the final configuration with the terminal event, reusing the
    /// last record when it already describes the same instant.
    pub fn finish(mut self, clock: Ordinal, config: &Configuration, event: TraceEvent) -> Trace {
        let last_step = self.steps.back().map(|(s, _)| *s);
        let last_kept = self.kept.last().map(|(s, _)| *s);
        let target = match (last_step, last_kept) {
            (Some(a), Some(b)) if a > b => self.steps.back_mut().map(|(_, r)| r),
            (Some(_), None) => self.steps.back_mut().map(|(_, r)| r),
            (_, Some(_)) => self.kept.last_mut().map(|(_, r)| r),
            (None, None) => None,
        };
        let mut replaced = false;
        if let Some(r) = target {
            if r.clock == clock {
                r.event = event;
                replaced = true;
            }
        }
        if !replaced {
            self.push(clock, config, event);
        }
        let mut all: Vec<(u64, TraceRecord)> = self.steps.into_iter().chain(self.kept).collect();
        all.sort_by_key(|(s, _)| *s);
        Trace {
            records: all.into_iter().map(|(_, r)| r).collect(),
        }
    }
}
