//! Likelihood messages passed up the concatenation tree.

use super::code::{CssCodeSpec, PairValue, MAX_CLASS_SIZE};
use crate::error::{Error, Result};
use crate::gkp::{log_likelihood_f, p_corr, p_err, MeasurementOutcome, HALF_SQRT_PI, SQRT_PI};
use crate::Decoder;

/// Log-odds below which the two top-level hypotheses count as tied.
///
/// Exact ties in digital mode come out of different summation orders and
/// differ by a few ulps.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Normalized likelihoods of the four values of a logical qubit pair,
/// stored as logarithms so that deep trees do not underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageVector {
    log: [f64; 4],
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

impl MessageVector {
    /// Certain pair value, e.g. a noiseless child.
    pub fn certain(value: PairValue) -> Self {
        let mut log = [f64::NEG_INFINITY; 4];
        log[value.index()] = 0.0;
        Self { log }
    }

    pub fn from_log(log: [f64; 4]) -> Result<Self> {
        if log.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::InvalidParameter(format!(
                "bad log-likelihoods {log:?}"
            )));
        }
        let total = log_sum_exp(&log);
        if total == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(
                "message has zero total likelihood".into(),
            ));
        }
        Ok(Self {
            log: log.map(|x| x - total),
        })
    }

    pub fn from_probs(probs: [f64; 4]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bad likelihoods {probs:?}"
            )));
        }
        Self::from_log(probs.map(f64::ln))
    }

    #[inline]
    pub fn log(&self, value: PairValue) -> f64 {
        self.log[value.index()]
    }

    pub fn prob(&self, value: PairValue) -> f64 {
        self.log(value).exp()
    }

    pub fn probs(&self) -> [f64; 4] {
        self.log.map(f64::exp)
    }

    /// `ln((F₀₀ + F₀₁) / (F₁₀ + F₁₁))`.
    pub fn top_log_odds(&self) -> f64 {
        log_sum_exp(&self.log[..2]) - log_sum_exp(&self.log[2..])
    }
}

/// Outcome of comparing the two values of the first logical bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopDecision {
    Zero,
    One,
    Tie,
}

pub fn top_decision(message: &MessageVector) -> TopDecision {
    let odds = message.top_log_odds();
    if odds.abs() <= TIE_TOLERANCE {
        TopDecision::Tie
    } else if odds > 0.0 {
        TopDecision::Zero
    } else {
        TopDecision::One
    }
}

/// First logical bit of the pair; ties go to 0.
pub fn decode_top(message: &MessageVector) -> u8 {
    match top_decision(message) {
        TopDecision::One => 1,
        TopDecision::Zero | TopDecision::Tie => 0,
    }
}

/// What a block combines: physical readouts or lower-level messages.
#[derive(Debug, Clone, Copy)]
pub enum BlockInput<'a> {
    Leaves(&'a [MeasurementOutcome]),
    Children(&'a [MessageVector]),
}

/// Log-likelihoods of a leaf under "codeword bit matches the readout" and
/// "codeword bit is flipped".
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LeafLog {
    pub bit: u8,
    pub matched: f64,
    pub flipped: f64,
}

/// Precomputed per-round leaf model.
#[derive(Debug, Clone, Copy)]
pub(crate) enum LeafModel {
    Analog { sigma: f64 },
    Digital { ln_corr: f64, ln_err: f64 },
}

impl LeafModel {
    pub fn new(decoder: Decoder, sigma: f64) -> Self {
        match decoder {
            Decoder::Analog => LeafModel::Analog { sigma },
            Decoder::Digital => LeafModel::Digital {
                ln_corr: p_corr(sigma).ln(),
                ln_err: p_err(sigma).max(f64::MIN_POSITIVE).ln(),
            },
        }
    }

    #[inline]
    pub fn leaf(&self, outcome: MeasurementOutcome) -> LeafLog {
        let (matched, flipped) = match *self {
            LeafModel::Analog { sigma } => (
                log_likelihood_f(outcome.dev_m, sigma),
                log_likelihood_f(SQRT_PI - outcome.dev_m.abs(), sigma),
            ),
            LeafModel::Digital { ln_corr, ln_err } => (ln_corr, ln_err),
        };
        LeafLog {
            bit: outcome.bit,
            matched,
            flipped,
        }
    }
}

pub(crate) fn leaf_block(spec: &CssCodeSpec, leaves: &[LeafLog]) -> MessageVector {
    let mut log = [0.0; 4];
    let mut terms = [0.0; MAX_CLASS_SIZE];
    for v in PairValue::ALL {
        let class = spec.class(v);
        for (t, &word) in terms.iter_mut().zip(class) {
            *t = leaves
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    if (word >> i & 1) as u8 == l.bit {
                        l.matched
                    } else {
                        l.flipped
                    }
                })
                .sum();
        }
        log[v.index()] = log_sum_exp(&terms[..class.len()]);
    }
    MessageVector::from_log(log).expect("leaf likelihoods are finite")
}

pub(crate) fn child_block(spec: &CssCodeSpec, children: &[MessageVector]) -> MessageVector {
    let mut log = [0.0; 4];
    let mut terms = [0.0; MAX_CLASS_SIZE];
    for v in PairValue::ALL {
        let class = spec.class(v);
        for (t, &word) in terms.iter_mut().zip(class) {
            *t = spec
                .pair_layout()
                .iter()
                .zip(children)
                .map(|(&(a, b), child)| {
                    child.log(PairValue::new((word >> a & 1) as u8, (word >> b & 1) as u8))
                })
                .sum();
        }
        log[v.index()] = log_sum_exp(&terms[..class.len()]);
    }
    MessageVector::from_log(log).expect("at least one class has positive likelihood")
}

/// Likelihood of each logical pair value of one block, normalized to sum 1.
pub fn block_message(
    spec: &CssCodeSpec,
    input: BlockInput<'_>,
    decoder: Decoder,
    sigma: f64,
) -> Result<MessageVector> {
    crate::gkp::NoiseParams::new(sigma)?;
    match input {
        BlockInput::Leaves(leaves) => {
            if leaves.len() != spec.n() {
                return Err(Error::Arity {
                    expected: spec.n(),
                    got: leaves.len(),
                });
            }
            let model = LeafModel::new(decoder, sigma);
            let logs = leaves
                .iter()
                .map(|&o| {
                    if o.bit > 1 || !(-HALF_SQRT_PI..=HALF_SQRT_PI).contains(&o.dev_m) {
                        return Err(Error::InvalidParameter(format!("bad leaf outcome {o:?}")));
                    }
                    Ok(model.leaf(o))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(leaf_block(spec, &logs))
        }
        BlockInput::Children(children) => {
            if children.len() != spec.pairs() {
                return Err(Error::Arity {
                    expected: spec.pairs(),
                    got: children.len(),
                });
            }
            Ok(child_block(spec, children))
        }
    }
}
