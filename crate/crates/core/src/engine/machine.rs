use std::collections::HashMap;
use std::sync::Arc;

use crate::isa::Program;
use crate::oracle::OracleReal;
use crate::ordinal::Ordinal;

use super::certificate::{Acceleration, DerivationStep, DivergenceCertificate};
use super::trace::{TraceBuffer, TraceEvent};
use super::witness::{
    accelerate_omega, build_witness, fast_forward, stability_check, step_sig, CycleWitness, LimitShape,
    Stability, StableCycle, UnitShape, UnitView, REPLAY_COUNT,
};
use super::{exec, Budget, BudgetReason, Configuration, Outcome, Overflow, RunStats};

/// Periods up to this length are tracked incrementally after every unit.
const SHORT_PERIOD: usize = 64;
/// Oracle periods up to this length are folded into candidate periods.
const ORACLE_PERIOD: u64 = 64;
/// Longest suffix searched for long periods.
const LONG_WINDOW: usize = 1 << 16;
const LIMIT_TAG: u64 = 1 << 63;
const JUMP_TAG: u64 = 1 << 62;

struct Unit {
    shape: UnitShape,
    sig: u64,
    start_pc: usize,
    pc_floor: usize,
    epoch: usize,
    finite: u64,
}

pub(crate) enum Stop {
    Done(Outcome),
    ReachedClock,
}

enum Act {
    Nothing,
    Progress,
    Stop(Stop),
}

pub(crate) struct Machine<'a> {
    program: &'a Program,
    oracle: &'a OracleReal,
    input: u64,
    budget: Budget,
    rc: usize,
    pc: usize,
    regs: Vec<u64>,
    /// Clock of each epoch start; the clock is `epochs[epoch] + finite`.
    epochs: Vec<Ordinal>,
    epoch: usize,
    finite: u64,
    units: Vec<Unit>,
    starts: Vec<u64>,
    floors: Vec<u64>,
    /// `matches[c]`: how many trailing units agree with the unit `c` earlier.
    matches: Vec<usize>,
    /// Unit count at which a candidate period last failed.
    failed: HashMap<usize, u64>,
    appended: u64,
    tail: u64,
    interned: HashMap<Arc<LimitShape>, u64>,
    jumps: u64,
    oracle_period: Option<usize>,
    level_counts: Vec<u64>,
    accelerations: u64,
    concrete_steps: u64,
    limits: u64,
    fast_forwards: u64,
    steps_since: u64,
    pub derivation: Vec<DerivationStep>,
    trace: Option<TraceBuffer>,
    pub stop_at: Option<Ordinal>,
}

impl<'a> Machine<'a> {
    pub fn new(
        program: &'a Program,
        oracle: &'a OracleReal,
        input: u64,
        budget: Budget,
        trace_steps: Option<usize>,
    ) -> Self {
        let init = Configuration::initial(program, input);
        let oracle_period = oracle
            .eventual_period()
            .map(|(_, p)| p)
            .filter(|&p| p > 1 && p <= ORACLE_PERIOD)
            .map(|p| p as usize);
        Machine {
            program,
            oracle,
            input,
            budget,
            rc: program.register_count(),
            pc: init.pc,
            regs: init.registers,
            epochs: vec![Ordinal::zero()],
            epoch: 0,
            finite: 0,
            units: Vec::new(),
            starts: Vec::new(),
            floors: Vec::new(),
            matches: vec![0; SHORT_PERIOD + 1],
            failed: HashMap::new(),
            appended: 0,
            tail: 0,
            interned: HashMap::new(),
            jumps: 0,
            oracle_period,
            level_counts: vec![0; budget.max_level as usize + 1],
            accelerations: 0,
            concrete_steps: 0,
            limits: 0,
            fast_forwards: 0,
            steps_since: 0,
            derivation: Vec::new(),
            trace: trace_steps.map(TraceBuffer::new),
            stop_at: None,
        }
    }

    pub fn config(&self) -> Configuration {
        Configuration {
            pc: self.pc,
            registers: self.regs.clone(),
        }
    }

    pub fn clock(&self) -> Ordinal {
        self.epochs[self.epoch].add_u64(self.finite)
    }

    fn unit_clock(&self, i: usize) -> Ordinal {
        let u = &self.units[i];
        self.epochs[u.epoch].add_u64(u.finite)
    }

    pub fn take_trace(&mut self) -> Option<TraceBuffer> {
        self.trace.take()
    }

    pub fn stats(&self) -> RunStats {
        RunStats {
            concrete_steps: self.concrete_steps,
            limits: self.limits,
            fast_forwards: self.fast_forwards,
            derivation: self.derivation.clone(),
        }
    }

    fn record(&mut self, event: TraceEvent) {
        if self.trace.is_some() {
            let clock = self.clock();
            let config = self.config();
            if let Some(t) = self.trace.as_mut() {
                t.push(clock, &config, event);
            }
        }
    }

    fn exhausted(&self, reason: BudgetReason) -> Stop {
        Stop::Done(Outcome::BudgetExhausted {
            config: self.config(),
            clock: self.clock(),
            reason,
        })
    }

    pub fn drive(&mut self) -> Stop {
        self.record(TraceEvent::Step);
        loop {
            if self.pc >= self.program.len() {
                return Stop::Done(Outcome::Halted {
                    output: self.regs[0],
                    clock: self.clock(),
                });
            }
            if let Some(level) = self
                .level_counts
                .iter()
                .position(|&n| n >= self.budget.max_steps_per_level)
            {
                return self.exhausted(BudgetReason::Steps { level: level as u32 });
            }
            let start_pc = self.pc;
            let before = self.regs.clone();
            let next = match exec(self.program, self.oracle, self.pc, &mut self.regs) {
                Ok(Some(next)) => next,
                Ok(None) => unreachable!("halting is checked before stepping"),
                Err(Overflow) => return self.exhausted(BudgetReason::Overflow),
            };
            let (epoch, finite) = (self.epoch, self.finite);
            self.push_unit(
                Unit {
                    shape: UnitShape::Step { pc: start_pc, next },
                    sig: step_sig(start_pc, next),
                    start_pc,
                    pc_floor: start_pc,
                    epoch,
                    finite,
                },
                &before,
                &before,
            );
            self.pc = next;
            self.finite += 1;
            self.concrete_steps += 1;
            self.steps_since += 1;
            self.level_counts[0] += 1;
            self.record(TraceEvent::Step);
            loop {
                match self.try_accelerate() {
                    Act::Nothing => break,
                    Act::Progress => {}
                    Act::Stop(s) => return s,
                }
            }
        }
    }

    fn push_unit(&mut self, unit: Unit, start: &[u64], floor: &[u64]) {
        self.units.push(unit);
        self.starts.extend_from_slice(start);
        self.floors.extend_from_slice(floor);
        self.appended += 1;
        self.tail += 1;
        let n = self.units.len();
        let last = self.units[n - 1].sig;
        for c in 1..=SHORT_PERIOD {
            if n > c && self.units[n - 1 - c].sig == last {
                self.matches[c] += 1;
            } else {
                self.matches[c] = 0;
            }
        }
    }

    fn truncate(&mut self, len: usize) {
        self.units.truncate(len);
        self.starts.truncate(len * self.rc);
        self.floors.truncate(len * self.rc);
    }

    fn recompute_matches(&mut self) {
        let n = self.units.len();
        for c in 1..=SHORT_PERIOD {
            let mut count = 0;
            while count < LONG_WINDOW && count + c < n && self.units[n - 1 - count].sig == self.units[n - 1 - count - c].sig
            {
                count += 1;
            }
            self.matches[c] = count;
        }
    }

    fn candidates(&self) -> Vec<usize> {
        let reps = REPLAY_COUNT as usize + 1;
        let n = self.units.len();
        let mut out = Vec::new();
        for c in 1..=SHORT_PERIOD.min(n / reps) {
            if self.matches[c] >= REPLAY_COUNT as usize * c {
                out.push(c);
            }
        }
        if let Some(p) = self.oracle_period {
            for c in 1..=SHORT_PERIOD {
                let cp = c * p;
                if reps * cp <= n && self.matches[c] >= reps * cp - c && !out.contains(&cp) {
                    out.push(cp);
                }
            }
        }
        if self.tail.is_power_of_two() && self.tail >= (reps * (SHORT_PERIOD + 1)) as u64 {
            out.extend(self.long_periods());
        }
        out
    }

    /// Periods longer than the incrementally tracked ones whose last four
    /// repetitions fill the end of the history.
    fn long_periods(&self) -> Vec<usize> {
        let reps = REPLAY_COUNT as usize + 1;
        let n = self.units.len();
        let len = n.min(LONG_WINDOW);
        let s: Vec<u64> = self.units[n - len..].iter().rev().map(|u| u.sig).collect();
        let mut pi = vec![0usize; len];
        for i in 1..len {
            let mut k = pi[i - 1];
            while k > 0 && s[i] != s[k] {
                k = pi[k - 1];
            }
            if s[i] == s[k] {
                k += 1;
            }
            pi[i] = k;
        }
        let mut out = Vec::new();
        for c in SHORT_PERIOD + 1..=len / reps {
            let l = reps * c;
            let p = l - pi[l - 1];
            if c % p == 0 {
                out.push(c);
                if out.len() == 4 {
                    break;
                }
            }
        }
        out
    }

    fn try_accelerate(&mut self) -> Act {
        let reps = REPLAY_COUNT as usize + 1;
        for c in self.candidates() {
            if self
                .failed
                .get(&c)
                .is_some_and(|&at| self.appended < at + c as u64)
            {
                continue;
            }
            let s = self.units.len() - reps * c;
            let witness = self.witness_at(s, c).filter(|w| w.level <= self.budget.max_level);
            let verdict = witness
                .as_ref()
                .map(|w| stability_check(w, self.program, self.oracle));
            match (witness, verdict) {
                (_, Some(Stability::Stable(st))) => return self.collapse(s, st),
                (Some(w), Some(Stability::Breakpoint(b))) if b > REPLAY_COUNT as u64 + 1 => {
                    return self.jump(s, &w, b)
                }
                _ => {
                    self.failed.insert(c, self.appended);
                }
            }
        }
        Act::Nothing
    }

    fn witness_at(&self, s: usize, c: usize) -> Option<CycleWitness> {
        let rc = self.rc;
        let views: Vec<UnitView<'_>> = self.units[s..]
            .iter()
            .enumerate()
            .map(|(j, u)| {
                let i = s + j;
                UnitView {
                    shape: &u.shape,
                    sig: u.sig,
                    start_pc: u.start_pc,
                    pc_floor: u.pc_floor,
                    start: &self.starts[i * rc..(i + 1) * rc],
                    floor: &self.floors[i * rc..(i + 1) * rc],
                }
            })
            .collect();
        build_witness(&views, c, self.unit_clock(s), self.program, self.oracle)
    }

    /// Least pc and registers over units `s..`.
    fn floor_from(&self, s: usize) -> (usize, Vec<u64>) {
        let rc = self.rc;
        let pc = self.units[s..].iter().map(|u| u.pc_floor).min().expect("nonempty");
        let mut regs = vec![u64::MAX; rc];
        for row in self.floors[s * rc..].chunks(rc) {
            for (m, &v) in regs.iter_mut().zip(row) {
                *m = (*m).min(v);
            }
        }
        (pc, regs)
    }

    /// Replaces units `s..` by a single unit and resets period tracking.
    fn replace_tail(&mut self, s: usize, shape: UnitShape, sig: u64) {
        let (pc_floor, floor) = self.floor_from(s);
        let start = self.starts[s * self.rc..(s + 1) * self.rc].to_vec();
        let (start_pc, epoch, finite) = (self.units[s].start_pc, self.units[s].epoch, self.units[s].finite);
        self.truncate(s);
        self.push_unit(
            Unit {
                shape,
                sig,
                start_pc,
                pc_floor,
                epoch,
                finite,
            },
            &start,
            &floor,
        );
        self.recompute_matches();
        self.failed.clear();
        self.tail = 0;
    }

    fn collapse(&mut self, s: usize, stable: StableCycle) -> Act {
        if self.accelerations >= self.budget.max_accelerations {
            return Act::Stop(self.exhausted(BudgetReason::Accelerations));
        }
        let (config, record) = accelerate_omega(&stable);
        let w = stable.witness();
        let shape = Arc::new(LimitShape {
            cycle: w.units.clone(),
            drift: w.drifts[0].clone(),
            level: w.level,
            rep_advance: w.rep_advance.clone(),
        });
        let next_id = self.interned.len() as u64;
        let id = *self.interned.entry(shape.clone()).or_insert(next_id);
        self.replace_tail(s, UnitShape::Limit(shape), LIMIT_TAG | id);

        let level = record.level as usize;
        self.level_counts[level] += 1;
        for l in &mut self.level_counts[..level] {
            *l = 0;
        }
        self.accelerations += 1;
        self.limits += 1;
        self.derivation.push(DerivationStep {
            clock: record.clock.clone(),
            steps: self.steps_since,
            acceleration: Acceleration::Limit { level: record.level },
        });
        self.steps_since = 0;
        self.pc = config.pc;
        self.regs = config.registers;
        self.epochs.push(record.clock.clone());
        self.epoch = self.epochs.len() - 1;
        self.finite = 0;
        self.record(TraceEvent::Limit);

        if self.pc >= self.program.len() {
            return Act::Stop(Stop::Done(Outcome::Halted {
                output: self.regs[0],
                clock: record.clock,
            }));
        }
        if self.stop_at.as_ref() == Some(&record.clock) {
            return Act::Stop(Stop::ReachedClock);
        }
        if let Some(i) = self.loop_start(None) {
            let certificate = DivergenceCertificate {
                input: self.input,
                clock_a: self.unit_clock(i),
                clock_b: record.clock,
                config: self.config(),
                derivation: self.derivation.clone(),
            };
            return Act::Stop(Stop::Done(Outcome::Diverges { certificate }));
        }
        Act::Progress
    }

    fn jump(&mut self, s: usize, w: &CycleWitness, reps: u64) -> Act {
        if self.accelerations >= self.budget.max_accelerations {
            return Act::Stop(self.exhausted(BudgetReason::Accelerations));
        }
        let (config, clock) = match fast_forward(w, reps) {
            Ok(r) => r,
            Err(Overflow) => return Act::Stop(self.exhausted(BudgetReason::Overflow)),
        };
        let advance = w.rep_advance.mul_u64(reps);
        let (start_epoch, start_finite) = (self.units[s].epoch, self.units[s].finite);
        let finite = match advance.as_finite() {
            Some(a) => {
                let a = u64::try_from(a).ok().and_then(|a| start_finite.checked_add(a));
                match a {
                    Some(f) => Some(f),
                    None => return Act::Stop(self.exhausted(BudgetReason::Overflow)),
                }
            }
            None => None,
        };
        let shape = UnitShape::Jump {
            id: self.jumps,
            start_pc: w.pc_trace[0],
            level: w.level - 1,
            advance,
        };
        let sig = JUMP_TAG | self.jumps;
        self.jumps += 1;
        self.replace_tail(s, shape, sig);

        self.accelerations += 1;
        self.fast_forwards += 1;
        self.derivation.push(DerivationStep {
            clock: clock.clone(),
            steps: self.steps_since,
            acceleration: Acceleration::FastForward { repetitions: reps },
        });
        self.steps_since = 0;
        self.pc = config.pc;
        self.regs = config.registers;
        match finite {
            Some(f) => {
                self.epoch = start_epoch;
                self.finite = f;
            }
            None => {
                self.epochs.push(clock);
                self.epoch = self.epochs.len() - 1;
                self.finite = 0;
            }
        }
        self.record(TraceEvent::FastForward);
        Act::Progress
    }

    /// Searches back from the newest unit for one that started in the
    /// current configuration while everything since stayed pointwise at or
    /// above it. With `at`, only the unit starting at that clock counts.
    fn loop_start(&self, at: Option<&Ordinal>) -> Option<usize> {
        let rc = self.rc;
        let mut pc_floor = usize::MAX;
        let mut floor = vec![u64::MAX; rc];
        for i in (0..self.units.len()).rev() {
            let u = &self.units[i];
            pc_floor = pc_floor.min(u.pc_floor);
            for (m, &v) in floor.iter_mut().zip(&self.floors[i * rc..(i + 1) * rc]) {
                *m = (*m).min(v);
            }
            if pc_floor < self.pc || floor.iter().zip(&self.regs).any(|(f, r)| f < r) {
                return None;
            }
            let clock_matches = match at {
                None => true,
                Some(c) => {
                    let here = self.unit_clock(i);
                    if here < *c {
                        return None;
                    }
                    here == *c
                }
            };
            if clock_matches && u.start_pc == self.pc && self.starts[i * rc..(i + 1) * rc] == self.regs[..] {
                return Some(i);
            }
        }
        None
    }

    pub fn loop_back_to(&self, clock: &Ordinal, config: &Configuration) -> bool {
        self.config() == *config && self.loop_start(Some(clock)).is_some()
    }
}
