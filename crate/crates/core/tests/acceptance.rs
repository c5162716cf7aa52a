//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion does.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use itrm_core::corpus;
use itrm_core::engine::{
    accelerate_omega, detect_affine_cycle, liminf_brute, run, run_with, stability_check, step, verify_divergence,
    Acceleration, Budget, Configuration, DerivationStep, Outcome, RunOptions, Stability,
};
use itrm_core::isa::{decode_program, encode_program, Instruction, Program};
use itrm_core::oracle::{cantor_pair, cantor_unpair, join, project_row, OracleReal};
use itrm_core::ordinal::Ordinal;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Straightforward interpreter, written independently of the engine.
fn reference_run(p: &Program, x: &OracleReal, input: u64, max_steps: u64) -> Option<(u64, u64)> {
    let mut regs = vec![0u64; p.register_count()];
    regs[0] = input;
    let mut pc = 0usize;
    let lines = p.lines();
    for steps in 0..=max_steps {
        if pc >= lines.len() {
            return Some((regs[0], steps));
        }
        if steps == max_steps {
            return None;
        }
        pc = match lines[pc] {
            Instruction::Zero(r) => {
                regs[r] = 0;
                pc + 1
            }
            Instruction::Inc(r) => {
                regs[r] += 1;
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
                regs[s] = u64::from(x.bit_at(regs[r]));
                pc + 1
            }
        };
    }
    None
}

fn all_instructions(n: usize, len: usize) -> Vec<Instruction> {
    let mut out = Vec::new();
    for r in 0..n {
        out.push(Instruction::Zero(r));
        out.push(Instruction::Inc(r));
        for s in 0..n {
            out.push(Instruction::Copy(r, s));
            out.push(Instruction::Qry(r, s));
            for t in 0..=len {
                out.push(Instruction::Jeq(r, s, t));
            }
        }
    }
    out
}

/// Every program with `n` registers and at most `max_len` lines.
fn all_programs(n: usize, max_len: usize) -> Vec<Program> {
    let mut out = Vec::new();
    for len in 0..=max_len {
        let pool = all_instructions(n, len);
        let total = pool.len().pow(len as u32);
        for mut idx in 0..total {
            let mut lines = Vec::with_capacity(len);
            for _ in 0..len {
                lines.push(pool[idx % pool.len()]);
                idx /= pool.len();
            }
            out.push(Program::new(n, lines).expect("generated programs are valid"));
        }
    }
    out
}

fn random_program(rng: &mut StdRng, max_len: usize, max_regs: usize) -> Program {
    let n = rng.gen_range(1..=max_regs);
    let len = rng.gen_range(1..=max_len);
    let lines = (0..len)
        .map(|_| {
            let r = rng.gen_range(0..n);
            let s = rng.gen_range(0..n);
            match rng.gen_range(0..10) {
                0 => Instruction::Zero(r),
                1..=3 => Instruction::Inc(r),
                4 => Instruction::Copy(r, s),
                5 => Instruction::Qry(r, s),
                _ => Instruction::Jeq(r, s, rng.gen_range(0..=len)),
            }
        })
        .collect();
    Program::new(n, lines).unwrap()
}

fn random_oracle(rng: &mut StdRng) -> OracleReal {
    match rng.gen_range(0..4) {
        0 => OracleReal::empty(),
        1 => OracleReal::evens(),
        2 => OracleReal::finite((0..rng.gen_range(1..4)).map(|_| rng.gen_range(0..12))),
        _ => {
            let pre = (0..rng.gen_range(0..3)).map(|_| rng.gen()).collect();
            let per = (0..rng.gen_range(1..4)).map(|_| rng.gen()).collect();
            OracleReal::periodic(pre, per).unwrap()
        }
    }
}

fn concrete_window(p: &Program, x: &OracleReal, n: usize) -> Vec<Configuration> {
    let mut c = Configuration::initial(p, 0);
    let mut out = vec![c.clone()];
    while out.len() <= n && !c.is_halted(p) {
        c = step(&c, p, x);
        out.push(c.clone());
    }
    out
}

fn criterion_1() -> Verdict {
    let started = Instant::now();
    let programs = all_programs(2, 3);
    let x = OracleReal::empty();
    let budget = Budget::default();
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get());
    let chunk = programs.len().div_ceil(threads);
    let results: Vec<Result<[u64; 5], String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = programs
            .chunks(chunk)
            .map(|part| {
                let (x, budget) = (&x, &budget);
                scope.spawn(move || {
                    // checked, resolved by naive, then engine-only: halted, diverges, unknown
                    let mut tally = [0u64; 5];
                    for p in part {
                        let code = encode_program(p);
                        let q = decode_program(&code, 2);
                        if q != *p {
                            return Err(format!("code {code} does not decode back to {p:?}"));
                        }
                        let out = run(&q, x, 0, budget);
                        tally[0] += 1;
                        match reference_run(&q, x, 0, 1000) {
                            Some((output, steps)) => {
                                tally[1] += 1;
                                let want = Outcome::Halted { output, clock: Ordinal::from_u64(steps) };
                                if out != want {
                                    return Err(format!("code {code}: engine {out}, naive {want}"));
                                }
                            }
                            None => match &out {
                                Outcome::Halted { clock, .. } if clock.is_finite() && *clock <= Ordinal::from_u64(1000) => {
                                    return Err(format!("code {code}: engine halted at {clock}, naive did not"));
                                }
                                Outcome::Diverges { certificate } if !verify_divergence(certificate, &q, x) => {
                                    return Err(format!("code {code}: certificate does not verify"));
                                }
                                Outcome::Halted { .. } => tally[2] += 1,
                                Outcome::Diverges { .. } => tally[3] += 1,
                                Outcome::BudgetExhausted { .. } => tally[4] += 1,
                            },
                        }
                    }
                    Ok(tally)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut tally = [0u64; 5];
    for r in results {
        for (t, v) in tally.iter_mut().zip(r?) {
            *t += v;
        }
    }
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} programs, {} resolved by naive stepping, 0 contradictions; beyond naive: {} halted, {} diverge, {} unknown; {:.1}s",
        tally[0],
        tally[1],
        tally[2],
        tally[3],
        tally[4],
        elapsed.as_secs_f64()
    ))
}

fn criterion_2() -> Verdict {
    let p = corpus::get("omega-plus-one").unwrap();
    let x = OracleReal::empty();
    let out = run(&p, &x, 0, &Budget::default());
    let Outcome::Halted { output, clock } = &out else {
        return Err(format!("got {out}"));
    };
    check(clock.to_string() == "w^{1}*1+1" && *output == 0, || format!("got {out}"))?;
    // hand liminf cross-checked by a 64-cycle replay
    let w = detect_affine_cycle(&Ordinal::zero(), &concrete_window(&p, &x, 40), &p, &x).ok_or("no witness")?;
    let Stability::Stable(s) = stability_check(&w, &p, &x) else {
        return Err("witness not stable".into());
    };
    let (limit, _) = accelerate_omega(&s);
    let brute = liminf_brute(&w, &p, &x, 64).map_err(|e| e.to_string())?;
    check(limit == brute && limit == Configuration { pc: 1, registers: vec![0; 4] }, || {
        format!("limit {limit}, replay {brute}")
    })?;
    Ok(format!("halted output=0 clock={clock}"))
}

fn criterion_3() -> Verdict {
    let p = corpus::get("reset-demo").unwrap();
    let x = OracleReal::empty();
    let out = run(&p, &x, 0, &Budget::default());
    let Outcome::Diverges { certificate: cert } = out else {
        return Err(format!("got {out}"));
    };
    check(cert.clock_a == Ordinal::zero() && cert.clock_b == Ordinal::omega(), || {
        format!("clocks ({}, {})", cert.clock_a, cert.clock_b)
    })?;
    check(verify_divergence(&cert, &p, &x), || "certificate rejected".into())?;

    let mut mutants = Vec::new();
    let mut m = cert.clone();
    m.input += 1;
    mutants.push(("input", m));
    for a in ["1", "2", "w^{1}*1+1"] {
        let mut m = cert.clone();
        m.clock_a = a.parse().unwrap();
        mutants.push(("clock_a", m));
    }
    for b in ["0", "1", "w^{1}*1+1", "w^{1}*2", "w^{2}*1"] {
        let mut m = cert.clone();
        m.clock_b = b.parse().unwrap();
        mutants.push(("clock_b", m));
    }
    let mut m = cert.clone();
    m.config.pc += 1;
    mutants.push(("pc", m));
    for r in 0..cert.config.registers.len() {
        let mut m = cert.clone();
        m.config.registers[r] += 1;
        mutants.push(("register", m));
    }
    let mut m = cert.clone();
    m.config.registers.push(0);
    mutants.push(("register count", m));
    let mut m = cert.clone();
    m.derivation.clear();
    mutants.push(("derivation", m));
    let mut m = cert.clone();
    m.derivation[0].steps += 1;
    mutants.push(("derivation steps", m));
    let mut m = cert.clone();
    m.derivation[0].clock = m.derivation[0].clock.add_u64(1);
    mutants.push(("derivation clock", m));
    let mut m = cert.clone();
    m.derivation[0].acceleration = Acceleration::Limit { level: 2 };
    mutants.push(("derivation level", m));
    let mut m = cert.clone();
    m.derivation.push(DerivationStep {
        clock: "w^{1}*2".parse().unwrap(),
        steps: 8,
        acceleration: Acceleration::Limit { level: 1 },
    });
    mutants.push(("derivation length", m));
    for (field, m) in &mutants {
        check(!verify_divergence(m, &p, &x), || format!("mutated {field} accepted"))?;
    }
    Ok(format!("cert=(0, w^{{1}}*1) verifies, {} mutants rejected", mutants.len()))
}

fn criterion_4() -> Verdict {
    let mut rng = StdRng::seed_from_u64(4);
    let mut stable = 0;
    let mut windows = 0;
    let mut unstable = 0;
    for _ in 0..500 {
        let p = random_program(&mut rng, 8, 3);
        let x = random_oracle(&mut rng);
        let configs = concrete_window(&p, &x, 300);
        // witnesses starting at several points of the run
        for skip in [0, 7, 40, 120] {
            if skip + 8 > configs.len() {
                break;
            }
            let clock = Ordinal::from_u64(skip as u64);
            let Some(w) = detect_affine_cycle(&clock, &configs[skip..], &p, &x) else {
                continue;
            };
            windows += 1;
            if let Stability::Stable(s) = stability_check(&w, &p, &x) {
                stable += 1;
                let (limit, _) = accelerate_omega(&s);
                let brute = liminf_brute(&w, &p, &x, 64)
                    .map_err(|e| format!("{p:?} on {x}: replay failed: {e}"))?;
                check(limit == brute, || format!("{p:?} on {x}: accelerated {limit}, replayed {brute}"))?;
            } else {
                unstable += 1;
            }
        }
    }
    check(stable >= 100, || format!("only {stable} stable cycles found"))?;
    Ok(format!("{windows} witnesses, {stable} stable, {unstable} not provably stable, 0 mismatches"))
}

/// `ω²·a + ω·b + c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Tri(u64, u64, u64);

impl Tri {
    fn add(self, o: Tri) -> Tri {
        if o.0 > 0 {
            Tri(self.0 + o.0, o.1, o.2)
        } else if o.1 > 0 {
            Tri(self.0, self.1 + o.1, o.2)
        } else {
            Tri(self.0, self.1, self.2 + o.2)
        }
    }

    fn degree(self) -> Option<u32> {
        if self.0 > 0 {
            Some(2)
        } else if self.1 > 0 {
            Some(1)
        } else if self.2 > 0 {
            Some(0)
        } else {
            None
        }
    }

    /// `self · ω^e`, if below ω³.
    fn times_omega_pow(self, e: u32) -> Option<Tri> {
        match self.degree() {
            None => Some(Tri(0, 0, 0)),
            Some(d) if d + e > 2 => None,
            Some(d) => {
                let mut t = [0u64; 3];
                t[(d + e) as usize] = 1;
                Some(Tri(t[2], t[1], t[0]))
            }
        }
    }

    /// `self · k` for finite `k`.
    fn times_nat(self, k: u64) -> Tri {
        match (self.degree(), k) {
            (None, _) | (_, 0) => Tri(0, 0, 0),
            (Some(2), _) => Tri(self.0 * k, self.1, self.2),
            (Some(1), _) => Tri(0, self.1 * k, self.2),
            _ => Tri(0, 0, self.2 * k),
        }
    }

    fn mul(self, o: Tri) -> Option<Tri> {
        // distribute over the terms of the right factor, highest first
        let mut acc = Tri(0, 0, 0);
        if o.0 > 0 {
            acc = acc.add(self.times_omega_pow(2)?.times_nat(o.0));
        }
        if o.1 > 0 {
            acc = acc.add(self.times_omega_pow(1)?.times_nat(o.1));
        }
        if o.2 > 0 {
            acc = acc.add(self.times_nat(o.2));
        }
        Some(acc)
    }

    fn to_ordinal(self) -> Ordinal {
        let mut terms = Vec::new();
        for (e, c) in [(2, self.0), (1, self.1), (0, self.2)] {
            if c > 0 {
                terms.push((Ordinal::from_u64(e), BigUint::from(c)));
            }
        }
        Ordinal::from_terms(terms).unwrap()
    }
}

fn random_tri(rng: &mut StdRng) -> Tri {
    let coef = |rng: &mut StdRng| if rng.gen_bool(0.35) { 0 } else { rng.gen_range(1..20) };
    Tri(coef(rng), coef(rng), coef(rng))
}

fn random_ordinal(rng: &mut StdRng, depth: u32) -> Ordinal {
    let n = rng.gen_range(0..4);
    let mut exps: Vec<Ordinal> = (0..n)
        .map(|_| {
            if depth == 0 || rng.gen_bool(0.5) {
                Ordinal::from_u64(rng.gen_range(0..5))
            } else {
                random_ordinal(rng, depth - 1)
            }
        })
        .collect();
    exps.sort();
    exps.dedup();
    exps.reverse();
    let terms = exps
        .into_iter()
        .map(|e| {
            let c = if rng.gen_bool(0.1) {
                BigUint::from(u64::MAX) * BigUint::from(rng.gen_range(2u32..1000))
            } else {
                BigUint::from(rng.gen_range(1u32..100))
            };
            (e, c)
        })
        .collect();
    Ordinal::from_terms(terms).unwrap()
}

fn criterion_5() -> Verdict {
    let mut rng = StdRng::seed_from_u64(5);
    let mut muls = 0;
    for _ in 0..10_000 {
        let (a, b) = (random_tri(&mut rng), random_tri(&mut rng));
        let (oa, ob) = (a.to_ordinal(), b.to_ordinal());
        check(oa.add(&ob) == a.add(b).to_ordinal(), || format!("{a:?} + {b:?}"))?;
        check(oa.cmp(&ob) == a.cmp(&b), || format!("{a:?} vs {b:?}"))?;
        if let Some(prod) = a.mul(b) {
            muls += 1;
            check(oa.mul(&ob) == prod.to_ordinal(), || format!("{a:?} * {b:?}"))?;
        }
    }
    for _ in 0..10_000 {
        let o = random_ordinal(&mut rng, 2);
        let text = o.to_string();
        let back: Ordinal = text.parse().map_err(|e| format!("{text}: {e}"))?;
        check(back == o, || format!("{text} round-trips to {back}"))?;
    }
    Ok(format!("10000 pairs ({muls} products representable), 10000 round trips"))
}

fn criterion_6() -> Verdict {
    for i in 0..100 {
        for j in 0..100 {
            let n = cantor_pair(i, j).ok_or("overflow")?;
            check(cantor_unpair(n) == (i, j), || format!("unpair(pair({i},{j}))"))?;
        }
    }
    let mut rng = StdRng::seed_from_u64(6);
    let set = |rng: &mut StdRng| -> BTreeSet<u64> { (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..40)).collect() };
    for _ in 0..100 {
        let (a, b) = (set(&mut rng), set(&mut rng));
        let i = *a.iter().nth(rng.gen_range(0..a.len())).unwrap();
        let joined = join(&OracleReal::Finite(a.clone()), &OracleReal::Finite(b.clone())).map_err(|e| e.to_string())?;
        let row = project_row(&joined, i);
        check(row.extensionally_equal(&OracleReal::Finite(b.clone()), 10_000), || {
            format!("row {i} of {a:?}+{b:?}")
        })?;
    }
    Ok("10000 pairs, 100 join recoveries".into())
}

fn criterion_7() -> Verdict {
    let p = corpus::get("breakpoint-seven").unwrap();
    let x = OracleReal::empty();
    let cycle = 3;
    let prefix = 8;
    let configs = concrete_window(&p, &x, 40);
    let w = detect_affine_cycle(&Ordinal::zero(), &configs, &p, &x).ok_or("no witness")?;
    let verdict = stability_check(&w, &p, &x);
    check(verdict == Stability::Breakpoint(7) && w.cycle_length == cycle, || format!("{verdict:?}"))?;
    let (naive, naive_steps) = reference_run(&p, &x, 0, 1000).ok_or("naive run did not halt")?;
    let r = run_with(&p, &x, 0, &Budget::default(), &RunOptions::default());
    check(r.outcome == Outcome::Halted { output: naive, clock: Ordinal::from_u64(naive_steps) }, || {
        format!("engine {}, naive output {naive} after {naive_steps}", r.outcome)
    })?;
    check(r.stats.fast_forwards == 1, || "no fast-forward".into())?;
    let loop_steps = r.stats.concrete_steps - prefix;
    check(loop_steps < 10 * cycle as u64, || format!("{loop_steps} concrete loop steps"))?;
    Ok(format!(
        "n*=7, output {naive}, {loop_steps} concrete loop steps vs {} naive",
        naive_steps - prefix
    ))
}

fn criterion_8() -> Verdict {
    for n in [1, 2] {
        for i in 0..10_000u32 {
            let p = decode_program(&BigUint::from(i), n);
            check(Program::new(n, p.lines().to_vec()).is_ok(), || format!("decode({i}, {n}) invalid"))?;
        }
    }
    for entry in corpus::PROGRAMS {
        let p = entry.program();
        let back = decode_program(&encode_program(&p), p.register_count());
        check(back == p, || format!("{} does not round-trip", entry.name))?;
    }
    Ok(format!("20000 codes valid, {} corpus programs round-trip", corpus::PROGRAMS.len()))
}

fn same_verdict(a: &Outcome, b: &Outcome) -> bool {
    match (a, b) {
        (Outcome::Halted { .. }, _) => a == b,
        (Outcome::Diverges { .. }, Outcome::Diverges { .. }) => true,
        (Outcome::Diverges { .. }, _) => false,
        (Outcome::BudgetExhausted { .. }, _) => true,
    }
}

fn criterion_9() -> Verdict {
    let mut rng = StdRng::seed_from_u64(9);
    let small = Budget {
        max_steps_per_level: 6,
        max_level: 1,
        max_accelerations: 1,
    };
    let mut settled = 0;
    let mut refined = 0;
    for _ in 0..200 {
        let p = random_program(&mut rng, 8, 3);
        let x = random_oracle(&mut rng);
        let mut budget = small;
        for _ in 0..4 {
            let lo = run(&p, &x, 0, &budget);
            let hi = run(&p, &x, 0, &budget.doubled());
            check(same_verdict(&lo, &hi), || format!("{p:?} on {x}: {lo} became {hi}"))?;
            if !matches!(lo, Outcome::BudgetExhausted { .. }) {
                settled += 1;
            } else if !matches!(hi, Outcome::BudgetExhausted { .. }) {
                refined += 1;
            }
            budget = budget.doubled();
        }
    }
    Ok(format!("800 budget doublings, {settled} settled verdicts kept, {refined} unknowns resolved"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("finite-equivalence sweep", criterion_1),
        ("omega-plus-one halts at w^{1}*1+1", criterion_2),
        ("reset-demo certificate", criterion_3),
        ("acceleration vs brute liminf", criterion_4),
        ("ordinal model equivalence", criterion_5),
        ("pairing and join", criterion_6),
        ("breakpoint fast-forward", criterion_7),
        ("enumeration totality and round trip", criterion_8),
        ("budget monotonicity", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
