//! Instruction set, assembly text, and the canonical program enumeration.
//!
//! The instruction set is the classical unlimited-register-machine base
//! (zero, successor, transfer, jump-if-equal) plus an oracle query. A program
//! halts when its program counter equals its length.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::oracle::{cantor_pair_big, cantor_unpair_big};

/// Number of opcodes; opcode numbers are the declaration order below.
const OPCODES: u32 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instruction {
    /// `r := 0`
    Zero(usize),
    /// `r := r + 1`
    Inc(usize),
    /// `s := r`
    Copy(usize, usize),
    /// jump to `target` if `r == s`
    Jeq(usize, usize, usize),
    /// `s := x(r)`, the oracle bit at the address held in `r`
    Qry(usize, usize),
}

impl Instruction {
    fn registers(&self) -> [Option<usize>; 2] {
        match *self {
            Instruction::Zero(r) | Instruction::Inc(r) => [Some(r), None],
            Instruction::Copy(r, s) | Instruction::Jeq(r, s, _) | Instruction::Qry(r, s) => {
                [Some(r), Some(s)]
            }
        }
    }

    fn opcode(&self) -> u32 {
        match self {
            Instruction::Zero(_) => 0,
            Instruction::Inc(_) => 1,
            Instruction::Copy(..) => 2,
            Instruction::Jeq(..) => 3,
            Instruction::Qry(..) => 4,
        }
    }

    fn args(&self) -> [usize; 3] {
        match *self {
            Instruction::Zero(r) | Instruction::Inc(r) => [r, 0, 0],
            Instruction::Copy(r, s) | Instruction::Qry(r, s) => [r, s, 0],
            Instruction::Jeq(r, s, t) => [r, s, t],
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Instruction::Zero(r) => write!(f, "zero {r}"),
            Instruction::Inc(r) => write!(f, "inc {r}"),
            Instruction::Copy(r, s) => write!(f, "copy {r} {s}"),
            Instruction::Jeq(r, s, t) => write!(f, "jeq {r} {s} {t}"),
            Instruction::Qry(r, s) => write!(f, "qry {r} {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("register count must be positive")]
    NoRegisters,
    #[error("line {line}: register {register} out of range (program has {count} registers)")]
    RegisterOutOfRange {
        line: usize,
        register: usize,
        count: usize,
    },
    #[error("line {line}: jump target {target} beyond program length {len}")]
    TargetOutOfRange { line: usize, target: usize, len: usize },
}

/// A validated register-machine program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    register_count: usize,
    lines: Vec<Instruction>,
}

impl Program {
    pub fn new(register_count: usize, lines: Vec<Instruction>) -> Result<Self, ValidationError> {
        if register_count == 0 {
            return Err(ValidationError::NoRegisters);
        }
        let len = lines.len();
        for (line, ins) in lines.iter().enumerate() {
            for register in ins.registers().into_iter().flatten() {
                if register >= register_count {
                    return Err(ValidationError::RegisterOutOfRange {
                        line,
                        register,
                        count: register_count,
                    });
                }
            }
            if let Instruction::Jeq(_, _, target) = *ins {
                if target > len {
                    return Err(ValidationError::TargetOutOfRange { line, target, len });
                }
            }
        }
        Ok(Program {
            register_count,
            lines,
        })
    }

    pub fn register_count(&self) -> usize {
        self.register_count
    }

    pub fn lines(&self) -> &[Instruction] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn get(&self, pc: usize) -> Option<&Instruction> {
        self.lines.get(pc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: undefined label `{label}`")]
    DanglingLabel {
        line: usize,
        column: usize,
        label: String,
    },
    #[error("{line}:{column}: duplicate label `{label}`")]
    DuplicateLabel {
        line: usize,
        column: usize,
        label: String,
    },
    #[error("{line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: ValidationError,
    },
}

enum Target {
    Line(usize),
    Label(String, usize, usize),
}

enum Pending {
    Ready(Instruction),
    Jeq(usize, usize, Target),
}

fn is_label(tok: &str) -> bool {
    let mut chars = tok.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits a line into `(column, token)` pairs, columns 1-based.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_ascii_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

/// Parses assembly text into a validated program.
pub fn parse_program(text: &str) -> Result<Program, AsmError> {
    let syntax = |line: usize, column: usize, message: &str| AsmError::Syntax {
        line,
        column,
        message: message.to_string(),
    };
    let mut register_count: Option<usize> = None;
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut pending: Vec<(usize, Pending)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let code = raw.split(';').next().unwrap_or("");
        let mut toks = tokens(code);
        if toks.is_empty() {
            continue;
        }
        if register_count.is_none() {
            let (col, head) = toks[0];
            if head != "registers" {
                return Err(syntax(lineno, col, "expected `registers <n>` header"));
            }
            if toks.len() != 2 {
                return Err(syntax(lineno, col, "header takes exactly one argument"));
            }
            let (ncol, n) = toks[1];
            let n: usize = n
                .parse()
                .map_err(|_| syntax(lineno, ncol, "register count must be a natural number"))?;
            if n == 0 {
                return Err(AsmError::Invalid {
                    line: lineno,
                    source: ValidationError::NoRegisters,
                });
            }
            register_count = Some(n);
            continue;
        }
        while let Some(&(col, tok)) = toks.first() {
            let Some(name) = tok.strip_suffix(':') else {
                break;
            };
            if !is_label(name) {
                return Err(syntax(lineno, col, "malformed label"));
            }
            if labels.insert(name.to_string(), pending.len()).is_some() {
                return Err(AsmError::DuplicateLabel {
                    line: lineno,
                    column: col,
                    label: name.to_string(),
                });
            }
            toks.remove(0);
        }
        if toks.is_empty() {
            continue;
        }
        let (col, mnemonic) = toks[0];
        let arity = match mnemonic {
            "zero" | "inc" => 1,
            "copy" | "qry" => 2,
            "jeq" => 3,
            _ => return Err(syntax(lineno, col, "unknown mnemonic")),
        };
        if toks.len() != arity + 1 {
            return Err(syntax(lineno, col, &format!("`{mnemonic}` takes {arity} operand(s)")));
        }
        let reg = |i: usize| -> Result<usize, AsmError> {
            let (c, t) = toks[i];
            t.parse().map_err(|_| syntax(lineno, c, "expected a register number"))
        };
        let ins = match mnemonic {
            "zero" => Pending::Ready(Instruction::Zero(reg(1)?)),
            "inc" => Pending::Ready(Instruction::Inc(reg(1)?)),
            "copy" => Pending::Ready(Instruction::Copy(reg(1)?, reg(2)?)),
            "qry" => Pending::Ready(Instruction::Qry(reg(1)?, reg(2)?)),
            _ => {
                let (c, t) = toks[3];
                let target = if let Ok(n) = t.parse::<usize>() {
                    Target::Line(n)
                } else if is_label(t) {
                    Target::Label(t.to_string(), lineno, c)
                } else {
                    return Err(syntax(lineno, c, "expected a line number or label"));
                };
                Pending::Jeq(reg(1)?, reg(2)?, target)
            }
        };
        pending.push((lineno, ins));
    }

    let Some(register_count) = register_count else {
        return Err(syntax(1, 1, "missing `registers <n>` header"));
    };
    let mut lines = Vec::with_capacity(pending.len());
    let mut source_lines = Vec::with_capacity(pending.len());
    for (lineno, p) in pending {
        let ins = match p {
            Pending::Ready(i) => i,
            Pending::Jeq(r, s, Target::Line(t)) => Instruction::Jeq(r, s, t),
            Pending::Jeq(r, s, Target::Label(name, line, column)) => match labels.get(&name) {
                Some(&t) => Instruction::Jeq(r, s, t),
                None => {
                    return Err(AsmError::DanglingLabel {
                        line,
                        column,
                        label: name,
                    })
                }
            },
        };
        lines.push(ins);
        source_lines.push(lineno);
    }
    Program::new(register_count, lines).map_err(|e| {
        let idx = match e {
            ValidationError::RegisterOutOfRange { line, .. }
            | ValidationError::TargetOutOfRange { line, .. } => line,
            ValidationError::NoRegisters => 0,
        };
        AsmError::Invalid {
            line: source_lines.get(idx).copied().unwrap_or(1),
            source: e,
        }
    })
}

/// Canonical text: header, then one instruction per line with numeric targets.
pub fn render_program(program: &Program) -> String {
    let mut out = format!("registers {}\n", program.register_count);
    for ins in &program.lines {
        out.push_str(&ins.to_string());
        out.push('\n');
    }
    out
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_program(self))
    }
}

fn encode_instruction(ins: &Instruction) -> BigUint {
    let [a1, a2, a3] = ins.args().map(BigUint::from);
    let args = cantor_pair_big(&a1, &cantor_pair_big(&a2, &a3));
    cantor_pair_big(&BigUint::from(ins.opcode()), &args)
}

fn reduce(n: &BigUint, modulus: usize) -> usize {
    (n % BigUint::from(modulus))
        .to_usize()
        .expect("residue below a usize modulus")
}

fn decode_instruction(code: &BigUint, n: usize, len: usize) -> Instruction {
    let (op, args) = cantor_unpair_big(code);
    let (a1, rest) = cantor_unpair_big(&args);
    let (a2, a3) = cantor_unpair_big(&rest);
    let r = reduce(&a1, n);
    let s = reduce(&a2, n);
    match reduce(&op, OPCODES as usize) {
        0 => Instruction::Zero(r),
        1 => Instruction::Inc(r),
        2 => Instruction::Copy(r, s),
        3 => Instruction::Jeq(r, s, reduce(&a3, len + 1)),
        _ => Instruction::Qry(r, s),
    }
}

/// Gödel number of a program: `p(len, p(c1, p(c2, ... p(c_{len-1}, c_len))))`,
/// with the empty program at 0.
pub fn encode_program(program: &Program) -> BigUint {
    let codes: Vec<BigUint> = program.lines.iter().map(encode_instruction).collect();
    let payload = match codes.split_last() {
        None => BigUint::zero(),
        Some((last, init)) => init
            .iter()
            .rev()
            .fold(last.clone(), |acc, c| cantor_pair_big(c, &acc)),
    };
    cantor_pair_big(&BigUint::from(program.lines.len()), &payload)
}

/// The `i`-th program over `n` registers. Total: out-of-range arguments are
/// reduced modulo their legal range, so every natural decodes to a valid program.
///
/// # Panics
/// If `n == 0`, or if the decoded length does not fit in memory.
pub fn decode_program(i: &BigUint, n: usize) -> Program {
    assert!(n >= 1, "register count must be positive");
    let (len, mut payload) = cantor_unpair_big(i);
    let len = len.to_usize().expect("program length fits in usize");
    let mut lines = Vec::with_capacity(len);
    for k in 0..len {
        let code = if k + 1 == len {
            std::mem::take(&mut payload)
        } else {
            let (c, rest) = cantor_unpair_big(&payload);
            payload = rest;
            c
        };
        lines.push(decode_instruction(&code, n, len));
    }
    Program::new(n, lines).expect("decode reduces arguments into range")
}

/// Whether a code is the canonical encoding of its own decoding.
pub fn is_canonical_code(i: &BigUint, n: usize) -> bool {
    &encode_program(&decode_program(i, n)) == i
}

/// Smallest code whose program has the given length, i.e. `p(len, 0)`.
pub fn first_code_of_length(len: usize) -> BigUint {
    cantor_pair_big(&BigUint::from(len), &BigUint::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let p = parse_program("registers 1\ninc 0").unwrap();
        assert_eq!(p, Program::new(1, vec![Instruction::Inc(0)]).unwrap());
        let p = parse_program("registers 2\nL: jeq 0 1 L").unwrap();
        assert_eq!(p.lines(), &[Instruction::Jeq(0, 1, 0)]);
        let e = parse_program("registers 1\ninc 5").unwrap_err();
        assert!(matches!(
            e,
            AsmError::Invalid {
                line: 2,
                source: ValidationError::RegisterOutOfRange { register: 5, .. }
            }
        ));
    }

    #[test]
    fn parse_labels_comments_and_halt_target() {
        let text = "; demo\nregisters 2 ; two\nstart:\n  inc 0\n  jeq 0 1 end ; never\nloop: jeq 1 1 start\nend:\n";
        let p = parse_program(text).unwrap();
        assert_eq!(
            p.lines(),
            &[
                Instruction::Inc(0),
                Instruction::Jeq(0, 1, 3),
                Instruction::Jeq(1, 1, 0)
            ]
        );
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_program("registers 1\n  frob 0").unwrap_err() {
            AsmError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 3)),
            e => panic!("{e}"),
        }
        match parse_program("registers 1\njeq 0 0 nowhere").unwrap_err() {
            AsmError::DanglingLabel { line, column, .. } => assert_eq!((line, column), (2, 9)),
            e => panic!("{e}"),
        }
        assert!(matches!(
            parse_program("registers 1\na: inc 0\na: inc 0").unwrap_err(),
            AsmError::DuplicateLabel { line: 3, .. }
        ));
        assert!(matches!(
            parse_program("inc 0").unwrap_err(),
            AsmError::Syntax { line: 1, column: 1, .. }
        ));
        assert!(parse_program("").is_err());
        assert!(parse_program("registers 0").is_err());
        assert!(matches!(
            parse_program("registers 1\njeq 0 0 5").unwrap_err(),
            AsmError::Invalid {
                source: ValidationError::TargetOutOfRange { target: 5, .. },
                ..
            }
        ));
        assert!(parse_program("registers 1\ninc x").is_err());
        assert!(parse_program("registers 1\ninc 0 0").is_err());
        assert!(parse_program("Registers 1").is_err());
    }

    #[test]
    fn render_examples() {
        let empty = Program::new(1, vec![]).unwrap();
        assert_eq!(render_program(&empty), "registers 1\n");
        let p = parse_program("registers 3\nzero 2\ncopy 0 1\nqry 1 2\nx: jeq 0 1 x\n").unwrap();
        assert_eq!(parse_program(&render_program(&p)).unwrap(), p);
    }

    #[test]
    fn decode_zero_is_empty() {
        assert!(decode_program(&BigUint::zero(), 1).is_empty());
        assert!(decode_program(&BigUint::zero(), 4).is_empty());
    }

    #[test]
    fn encode_decode_small_range() {
        for i in 0u32..2000 {
            let i = BigUint::from(i);
            for n in 1..=3 {
                let p = decode_program(&i, n);
                let code = encode_program(&p);
                assert_eq!(decode_program(&code, n), p);
            }
        }
    }

    #[test]
    fn first_code_of_length_has_that_length() {
        for len in 0..6 {
            assert_eq!(decode_program(&first_code_of_length(len), 2).len(), len);
        }
    }

    #[test]
    fn canonical_codes() {
        let p = parse_program("registers 2\ninc 0\njeq 1 1 0").unwrap();
        let code = encode_program(&p);
        assert!(is_canonical_code(&code, 2));
        assert_eq!(decode_program(&code, 2), p);
    }
}
