//! Concatenated C4/C6 code decoded by likelihood message passing.
//!
//! Level 1 is the `[[4,2,2]]` block over physical GKP qubits; every higher
//! level is a `[[6,2,2]]` block over three logical pairs of the level below.
//! Each block reports the likelihood of the four values of its logical pair
//! and the top block decides the first logical bit.

mod code;
mod message;
mod oracle;
mod round;

pub use code::{
    c4_spec, c6_spec, validate_css, CssCodeSpec, PairValue, Property, Violation, MAX_BLOCK_LEN,
    MAX_CLASS_SIZE,
};
pub use message::{
    block_message, decode_top, top_decision, BlockInput, MessageVector, TopDecision, TIE_TOLERANCE,
};
pub use oracle::{
    c4_oracle_failure_probability, MIN_GRID as ORACLE_MIN_GRID, MIN_SIGMA as ORACLE_MIN_SIGMA,
};
pub use round::{
    decode_register, simulate_round, BasisMode, CodeFamily, RoundOutcome, TeleportationRound,
    MAX_LEVEL,
};

use crate::error::Result;
use crate::montecarlo::{run_plan, DecoderChoice, Estimate, Experiment, TrialPlan};
use crate::Decoder;

/// Runs `trials` rounds at each level in `levels` and returns the
/// per-basis and combined estimates for every level, in level order.
pub fn run_level_sweep(
    levels: std::ops::RangeInclusive<u8>,
    sigma: f64,
    trials: u64,
    decoder: Decoder,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<Estimate>> {
    let plan = TrialPlan::new(
        Experiment::C4c6,
        DecoderChoice::from(decoder),
        vec![sigma],
        levels,
        Some(trials),
        master_seed,
    )?;
    run_plan(&plan, workers).into_iter().collect()
}
