use serde::{Deserialize, Serialize};

use crate::isa::Program;
use crate::oracle::OracleReal;
use crate::ordinal::Ordinal;

use super::machine::{Machine, Stop};
use super::{Budget, Configuration};

/// What the engine did at one accelerated instant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Acceleration {
    Limit { level: u32 },
    FastForward { repetitions: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivationStep {
    /// Clock after the acceleration.
    pub clock: Ordinal,
    /// Concrete steps executed since the previous acceleration.
    pub steps: u64,
    #[serde(flatten)]
    pub acceleration: Acceleration,
}

/// Claim that the run on `input` is in the same configuration at the limit
/// clock `clock_b` as at `clock_a`, and never dropped below it in between.
/// From then on the run repeats forever.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DivergenceCertificate {
    pub input: u64,
    pub clock_a: Ordinal,
    pub clock_b: Ordinal,
    pub config: Configuration,
    pub derivation: Vec<DerivationStep>,
}

/// Re-derives the certificate by replaying the engine under the budget the
/// derivation implies, and checks every claimed field.
pub fn verify_divergence(cert: &DivergenceCertificate, program: &Program, oracle: &OracleReal) -> bool {
    if cert.clock_a >= cert.clock_b || !cert.clock_b.is_limit() || cert.derivation.is_empty() {
        return false;
    }
    if cert.config.registers.len() != program.register_count() || cert.config.pc >= program.len() {
        return false;
    }
    let total_steps: u64 = cert.derivation.iter().map(|d| d.steps).sum();
    let max_level = cert
        .derivation
        .iter()
        .map(|d| match d.acceleration {
            Acceleration::Limit { level } => level,
            Acceleration::FastForward { .. } => 0,
        })
        .max()
        .unwrap_or(0)
        .max(1);
    let budget = Budget {
        max_steps_per_level: total_steps.max(cert.derivation.len() as u64).saturating_add(1),
        max_level,
        max_accelerations: cert.derivation.len() as u64,
    };
    let mut machine = Machine::new(program, oracle, cert.input, budget, None);
    machine.stop_at = Some(cert.clock_b.clone());
    match machine.drive() {
        Stop::ReachedClock => {}
        Stop::Done(_) => return false,
    }
    machine.derivation == cert.derivation
        && machine.config() == cert.config
        && machine.loop_back_to(&cert.clock_a, &cert.config)
}
