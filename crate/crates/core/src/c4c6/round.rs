//! One teleportation round of the concatenated code.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::code::{c4_spec, c6_spec, CssCodeSpec};
use super::message::{
    child_block, leaf_block, top_decision, LeafLog, LeafModel, MessageVector, TopDecision,
};
use crate::error::{Error, Result};
use crate::gkp::{measure, sample_displacement, MeasurementOutcome, NoiseParams};
use crate::Decoder;

pub const MAX_LEVEL: u8 = 5;

/// Parameters of one round: concatenation level, channel, and decoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleportationRound {
    level: u8,
    params: NoiseParams,
    decoder: Decoder,
}

impl TeleportationRound {
    pub fn new(level: u8, sigma: f64, decoder: Decoder) -> Result<Self> {
        if !(1..=MAX_LEVEL).contains(&level) {
            return Err(Error::OutOfRange {
                name: "level",
                value: f64::from(level),
                lo: 1.0,
                hi: f64::from(MAX_LEVEL),
            });
        }
        Ok(Self {
            level,
            params: NoiseParams::new(sigma)?,
            decoder,
        })
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn params(&self) -> NoiseParams {
        self.params
    }

    pub fn decoder(&self) -> Decoder {
        self.decoder
    }
}

/// Block codes for the first level and for every level above it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeFamily {
    base: CssCodeSpec,
    upper: CssCodeSpec,
}

impl Default for CodeFamily {
    fn default() -> Self {
        Self {
            base: c4_spec(),
            upper: c6_spec(),
        }
    }
}

impl CodeFamily {
    pub fn new(base: CssCodeSpec, upper: CssCodeSpec) -> Self {
        Self { base, upper }
    }

    pub fn base(&self) -> &CssCodeSpec {
        &self.base
    }

    pub fn upper(&self) -> &CssCodeSpec {
        &self.upper
    }

    /// Physical qubits per quadrature register at `level`.
    pub fn leaves(&self, level: u8) -> usize {
        self.base.n() * self.upper.pairs().pow(u32::from(level.max(1)) - 1)
    }
}

/// Which failure event an estimate counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMode {
    /// The q-register decision alone.
    PerBasis,
    /// Either register decided wrongly.
    Combined,
}

impl BasisMode {
    pub const ALL: [BasisMode; 2] = [BasisMode::PerBasis, BasisMode::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            BasisMode::PerBasis => "per_basis",
            BasisMode::Combined => "combined",
        }
    }
}

impl fmt::Display for BasisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BasisMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_basis" => Ok(BasisMode::PerBasis),
            "combined" => Ok(BasisMode::Combined),
            other => Err(Error::InvalidParameter(format!(
                "unknown basis mode '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundOutcome {
    pub q_failed: bool,
    pub p_failed: bool,
}

impl RoundOutcome {
    pub fn failed(&self, mode: BasisMode) -> bool {
        match mode {
            BasisMode::PerBasis => self.q_failed,
            BasisMode::Combined => self.q_failed || self.p_failed,
        }
    }
}

fn decode_logs(family: &CodeFamily, leaves: &[LeafLog]) -> MessageVector {
    let mut messages: Vec<MessageVector> = leaves
        .chunks(family.base.n())
        .map(|block| leaf_block(&family.base, block))
        .collect();
    while messages.len() > 1 {
        messages = messages
            .chunks(family.upper.pairs())
            .map(|children| child_block(&family.upper, children))
            .collect();
    }
    messages[0]
}

/// Decodes one register bottom-up and returns the top-level message.
///
/// Leaves are ordered block by block: level-1 block `k` owns leaves
/// `4k..4k+4`, and consecutive runs of three blocks form a level-2 block.
pub fn decode_register(
    round: &TeleportationRound,
    family: &CodeFamily,
    outcomes: &[MeasurementOutcome],
) -> Result<MessageVector> {
    let expected = family.leaves(round.level);
    if outcomes.len() != expected {
        return Err(Error::Arity {
            expected,
            got: outcomes.len(),
        });
    }
    let model = LeafModel::new(round.decoder, round.params.sigma());
    let logs: Vec<LeafLog> = outcomes.iter().map(|&o| model.leaf(o)).collect();
    Ok(decode_logs(family, &logs))
}

/// Sends the all-zeros logical pair through both registers.
///
/// Draw order on `rng`: q-register deviations, p-register deviations, then
/// one fair coin per register whose top decision is an exact tie. Analog
/// and digital runs on the same stream therefore see the same noise.
pub fn simulate_round<R: Rng + ?Sized>(
    round: &TeleportationRound,
    family: &CodeFamily,
    rng: &mut R,
) -> RoundOutcome {
    let n = family.leaves(round.level);
    let model = LeafModel::new(round.decoder, round.params.sigma());
    let draw = |rng: &mut R| -> Vec<LeafLog> {
        (0..n)
            .map(|_| model.leaf(measure(sample_displacement(round.params, rng).value())))
            .collect()
    };
    let q = draw(rng);
    let p = draw(rng);
    let decisions = [&q, &p].map(|leaves| top_decision(&decode_logs(family, leaves)));
    let mut wrong = decisions.map(|d| d == TopDecision::One);
    for (w, d) in wrong.iter_mut().zip(decisions) {
        if d == TopDecision::Tie {
            *w = rng.random::<bool>();
        }
    }
    RoundOutcome {
        q_failed: wrong[0],
        p_failed: wrong[1],
    }
}
