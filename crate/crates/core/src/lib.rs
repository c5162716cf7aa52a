//! Infinite-time register machines with an oracle.
//!
//! Programs run for transfinitely many steps. At limit times the program
//! counter and each register take the liminf of their earlier values, and a
//! register whose liminf is infinite is reset to zero. The [`engine`]
//! simulates such runs by detecting and accelerating affine cycles,
//! [`analysis`] runs it over ranges of programs and oracles.

pub mod analysis;
pub mod corpus;
pub mod engine;
pub mod isa;
pub mod oracle;
pub mod ordinal;
mod par;

pub use engine::{run, run_with, verify_divergence, Budget, Configuration, Outcome};
pub use isa::{decode_program, encode_program, parse_program, Instruction, Program};
pub use oracle::OracleReal;
pub use ordinal::Ordinal;
