//! Small programs with known transfinite behavior.

use crate::isa::{parse_program, Program};

pub struct CorpusProgram {
    pub name: &'static str,
    pub source: &'static str,
}

impl CorpusProgram {
    pub fn program(&self) -> Program {
        parse_program(self.source).expect("corpus programs assemble")
    }
}

macro_rules! corpus {
    ($($name:literal),* $(,)?) => {
        &[$(CorpusProgram {
            name: $name,
            source: include_str!(concat!("../corpus/", $name, ".itrm")),
        }),*]
    };
}

pub const PROGRAMS: &[CorpusProgram] = corpus![
    "omega-plus-one",
    "reset-demo",
    "recognize-empty",
    "breakpoint-seven",
    "epoch-counter",
    "bit-zero",
    "constant-zero",
];

pub fn get(name: &str) -> Option<Program> {
    PROGRAMS.iter().find(|p| p.name == name).map(CorpusProgram::program)
}
