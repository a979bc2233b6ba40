//! Three-qubit bit-flip code built from GKP qubits.
//!
//! Only q-quadrature deviations are tracked. Syndrome extraction copies
//! `Δ̄₁+Δ̄₂` and `Δ̄₂+Δ̄₃` onto two `|0⟩` ancillas and `Δ̄₃` onto a `|+⟩`
//! ancilla; the decoders then work from the folded ancilla residuals.

mod oracle;

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gkp::{fold, measure, sample_displacement, NoiseParams, HALF_SQRT_PI, SQRT_PI};
use crate::Decoder;

pub use oracle::{indicator_quadrature, oracle_failure_probability, MIN_GRID};

const TWO_SQRT_PI: f64 = 2.0 * SQRT_PI;

/// True q deviations of the three data qubits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockState {
    pub dev: [f64; 3],
}

impl BlockState {
    pub fn new(dev: [f64; 3]) -> Self {
        Self { dev }
    }

    pub fn sample<R: Rng + ?Sized>(params: NoiseParams, rng: &mut R) -> Self {
        let mut dev = [0.0; 3];
        for d in &mut dev {
            *d = sample_displacement(params, rng).value();
        }
        Self { dev }
    }
}

/// Folded ancilla readouts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Syndrome {
    /// `Δ_m,A1 ∈ [-√π, √π)`
    pub a1: f64,
    /// `Δ_m,A2 ∈ [-√π, √π)`
    pub a2: f64,
    /// `Δ_m,A3 ∈ [-√π/2, √π/2)`
    pub a3: f64,
    /// Bit value read from ancilla 3; random because of the `|+⟩` peak, and
    /// never used by the decoders.
    pub k3: u8,
}

/// Set of flipped physical qubits, stored as bits 0..3 for qubits 1..3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ErrorPattern(u8);

impl ErrorPattern {
    pub const NONE: Self = Self(0);
    pub const ALL: Self = Self(0b111);

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits <= 0b111 {
            Ok(Self(bits))
        } else {
            Err(Error::InvalidParameter(format!(
                "error pattern bits {bits:#b} exceed three qubits"
            )))
        }
    }

    /// Builds a pattern from 1-based qubit indices.
    pub fn from_qubits(qubits: &[usize]) -> Result<Self> {
        let mut bits = 0u8;
        for &q in qubits {
            if !(1..=3).contains(&q) {
                return Err(Error::InvalidParameter(format!(
                    "qubit index {q} not in 1..=3"
                )));
            }
            bits |= 1 << (q - 1);
        }
        Ok(Self(bits))
    }

    #[inline]
    pub fn bits(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn contains(self, qubit: usize) -> bool {
        (1..=3).contains(&qubit) && self.0 & (1 << (qubit - 1)) != 0
    }

    #[inline]
    pub fn complement(self) -> Self {
        Self(!self.0 & 0b111)
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    pub fn qubits(self) -> impl Iterator<Item = usize> {
        (1..=3).filter(move |&q| self.contains(q))
    }
}

impl fmt::Display for ErrorPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list: Vec<String> = self.qubits().map(|q| q.to_string()).collect();
        write!(f, "{{{}}}", list.join(","))
    }
}

/// How the analog decoder treats the case `|M₁|, |M₂| < √π/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoErrorBranch {
    /// Declare "no error" without a likelihood comparison.
    #[default]
    Unconditional,
    /// Compare the empty pattern against the all-flip pattern like any
    /// other candidate pair.
    Compare,
}

/// Syndrome produced by a perfect extraction round. `ancilla_bit` is the
/// random peak the `|+⟩` ancilla starts on.
pub fn extract_syndrome(state: &BlockState, ancilla_bit: u8) -> Syndrome {
    let [d1, d2, d3] = state.dev;
    let a1 = fold(d1 + d2, TWO_SQRT_PI);
    let a2 = fold(d2 + d3, TWO_SQRT_PI);
    let m3 = measure(d3 + f64::from(ancilla_bit & 1) * SQRT_PI);
    Syndrome {
        a1,
        a2,
        a3: m3.dev_m,
        k3: m3.bit,
    }
}

/// `(M₁, M₂)`: estimates of `Δ̄₁` and `Δ̄₂` under "qubit 3 not flipped",
/// folded into `[-√π, √π)`.
pub fn m_values(s: &Syndrome) -> (f64, f64) {
    let delta1 = s.a1 - s.a2 + s.a3;
    let delta2 = s.a2 - s.a3;
    (fold(delta1, TWO_SQRT_PI), fold(delta2, TWO_SQRT_PI))
}

/// The same deviation read as belonging to the neighbouring peak.
#[inline]
fn other_peak(x: f64) -> f64 {
    if x >= 0.0 {
        x - SQRT_PI
    } else {
        x + SQRT_PI
    }
}

/// Sums of squared presumed deviations `(s₁, s₂)` for the two candidate
/// patterns. `log F₁ - log F₂ = (s₂ - s₁) / 2σ²`.
pub fn candidate_square_sums(m1: f64, m2: f64, a3: f64) -> (f64, f64) {
    let s1 = m1 * m1 + m2 * m2 + a3 * a3;
    let (b1, b2, b3) = (other_peak(m1), other_peak(m2), other_peak(a3));
    let s2 = b1 * b1 + b2 * b2 + b3 * b3;
    (s1, s2)
}

/// The literal likelihoods `F₁ = f(M₁)f(M₂)f(Δ_m,A3)` and
/// `F₂ = f(M₁*)f(M₂*)f(Δ*_m,A3)`.
pub fn candidate_likelihoods(m1: f64, m2: f64, a3: f64, sigma: f64) -> (f64, f64) {
    use crate::gkp::likelihood_f as f;
    (
        f(m1, sigma) * f(m2, sigma) * f(a3, sigma),
        f(other_peak(m1), sigma) * f(other_peak(m2), sigma) * f(other_peak(a3), sigma),
    )
}

fn check_inputs(m1: f64, m2: f64, a3: f64, sigma: f64) -> Result<()> {
    for (name, v, lim) in [
        ("M1", m1, SQRT_PI),
        ("M2", m2, SQRT_PI),
        ("a3", a3, HALF_SQRT_PI),
    ] {
        if v.is_nan() || v.abs() > lim {
            return Err(Error::OutOfRange {
                name,
                value: v,
                lo: -lim,
                hi: lim,
            });
        }
    }
    NoiseParams::new(sigma).map(|_| ())
}

/// Analog maximum-likelihood decision between the single- and
/// double-error explanations of a syndrome.
pub fn decode_analog(m1: f64, m2: f64, a3: f64, sigma: f64) -> Result<ErrorPattern> {
    decode_analog_with(m1, m2, a3, sigma, NoErrorBranch::Unconditional)
}

pub fn decode_analog_with(
    m1: f64,
    m2: f64,
    a3: f64,
    sigma: f64,
    branch: NoErrorBranch,
) -> Result<ErrorPattern> {
    check_inputs(m1, m2, a3, sigma)?;
    Ok(decide_analog(m1, m2, a3, sigma, branch))
}

#[inline]
pub(crate) fn decide_analog(
    m1: f64,
    m2: f64,
    a3: f64,
    sigma: f64,
    branch: NoErrorBranch,
) -> ErrorPattern {
    let quiet = m1.abs() < HALF_SQRT_PI && m2.abs() < HALF_SQRT_PI;
    if quiet && branch == NoErrorBranch::Unconditional {
        return ErrorPattern::NONE;
    }
    let p1 = lighter_candidate(m1, m2);
    let (s1, s2) = candidate_square_sums(m1, m2, a3);
    let log_ratio = (s2 - s1) / (2.0 * sigma * sigma);
    // ties go to the lighter pattern
    if log_ratio >= 0.0 {
        p1
    } else {
        p1.complement()
    }
}

/// Single-error patterns assumed by [`decode_analog`]: the flip set that
/// leaves qubit 3 alone, read from the bit values of `M₁` and `M₂`.
fn lighter_candidate(m1: f64, m2: f64) -> ErrorPattern {
    let mut p1 = 0u8;
    if m1.abs() >= HALF_SQRT_PI {
        p1 |= 0b001;
    }
    if m2.abs() >= HALF_SQRT_PI {
        p1 |= 0b010;
    }
    ErrorPattern(p1)
}

/// Conventional decoder: only the bit values of `M₁` and `M₂` are used, and
/// of the two patterns consistent with them the one with fewer flips wins.
///
/// | `M₁` flipped | `M₂` flipped | decision |
/// |---|---|---|
/// | no  | no  | `{}`  |
/// | yes | no  | `{1}` |
/// | no  | yes | `{2}` |
/// | yes | yes | `{3}` |
pub fn decode_digital(s: &Syndrome) -> ErrorPattern {
    let (m1, m2) = m_values(s);
    let p1 = lighter_candidate(m1, m2);
    if p1.weight() <= 1 {
        p1
    } else {
        p1.complement()
    }
}

/// Qubits whose deviation carried them to an odd lattice index.
pub fn true_pattern(state: &BlockState) -> ErrorPattern {
    let mut bits = 0u8;
    for (i, &d) in state.dev.iter().enumerate() {
        bits |= measure(d).bit << i;
    }
    ErrorPattern(bits)
}

/// Pattern chosen by `decoder` for a block in `state`.
#[inline]
pub fn decode_state(
    state: &BlockState,
    ancilla_bit: u8,
    sigma: f64,
    decoder: Decoder,
) -> ErrorPattern {
    let s = extract_syndrome(state, ancilla_bit);
    match decoder {
        Decoder::Analog => {
            let (m1, m2) = m_values(&s);
            decide_analog(m1, m2, s.a3, sigma, NoErrorBranch::Unconditional)
        }
        Decoder::Digital => decode_digital(&s),
    }
}

#[inline]
pub(crate) fn fails(state: &BlockState, ancilla_bit: u8, sigma: f64, decoder: Decoder) -> bool {
    decode_state(state, ancilla_bit, sigma, decoder) != true_pattern(state)
}

/// One encode / channel / extract / decode round. Returns `true` on failure.
pub fn run_trial<R: Rng + ?Sized>(params: NoiseParams, rng: &mut R, decoder: Decoder) -> bool {
    let state = BlockState::sample(params, rng);
    let ancilla_bit = u8::from(rng.random::<bool>());
    fails(&state, ancilla_bit, params.sigma(), decoder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pat(q: &[usize]) -> ErrorPattern {
        ErrorPattern::from_qubits(q).unwrap()
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn pattern_basics() {
        assert_eq!(pat(&[1, 3]).bits(), 0b101);
        assert_eq!(pat(&[1]).complement(), pat(&[2, 3]));
        assert_eq!(pat(&[2, 3]).to_string(), "{2,3}");
        assert_eq!(ErrorPattern::NONE.to_string(), "{}");
        assert!(ErrorPattern::from_qubits(&[4]).is_err());
        assert!(ErrorPattern::from_bits(8).is_err());
        assert_eq!(ErrorPattern::ALL.weight(), 3);
    }

    #[test]
    fn syndrome_examples() {
        let s = extract_syndrome(&BlockState::new([0.0; 3]), 0);
        assert_eq!((s.a1, s.a2, s.a3), (0.0, 0.0, 0.0));

        let s = extract_syndrome(&BlockState::new([0.3, 0.2, -0.1]), 1);
        close(s.a1, 0.5);
        close(s.a2, 0.1);
        close(s.a3, -0.1);
        assert_eq!(s.k3, 1);

        let s = extract_syndrome(&BlockState::new([SQRT_PI, SQRT_PI, 0.0]), 0);
        close(s.a1, 0.0);
    }

    #[test]
    fn ancilla_bit_only_moves_k3() {
        let st = BlockState::new([0.4, -0.7, 0.55]);
        let (s0, s1) = (extract_syndrome(&st, 0), extract_syndrome(&st, 1));
        assert_eq!((s0.a1, s0.a2), (s1.a1, s1.a2));
        close(s0.a3, s1.a3);
        assert_ne!(s0.k3, s1.k3);
    }

    #[test]
    fn m_value_examples() {
        assert_eq!(m_values(&Syndrome::default()), (0.0, 0.0));
        let s = Syndrome {
            a1: 1.9 * SQRT_PI,
            ..Default::default()
        };
        close(m_values(&s).0, -0.1 * SQRT_PI);
        let s = extract_syndrome(&BlockState::new([0.3, 0.2, -0.1]), 0);
        let (m1, m2) = m_values(&s);
        close(m1, 0.3);
        close(m2, 0.2);
    }

    #[test]
    fn analog_examples() {
        assert_eq!(
            decode_analog(0.1, -0.2, 0.3, 0.4).unwrap(),
            ErrorPattern::NONE
        );
        for &s in &[0.1, 0.4, 2.0] {
            assert_eq!(decode_analog(1.5, 0.2, 0.1, s).unwrap(), pat(&[1]));
            assert_eq!(decode_analog(0.9, 0.88, 0.88, s).unwrap(), pat(&[2, 3]));
        }
        let (s1, s2) = candidate_square_sums(1.5, 0.2, 0.1);
        assert!((s1 - 2.30).abs() < 1e-12);
        assert!((s2 - 5.344).abs() < 1e-3);
        let (s1, s2) = candidate_square_sums(0.9, 0.88, 0.88);
        assert!((s1 - 2.3588).abs() < 1e-12);
        assert!((s2 - 2.3541).abs() < 1e-4);
        // the literal likelihood products agree with the squared sums
        let (f1, f2) = candidate_likelihoods(0.9, 0.88, 0.88, 0.4);
        assert!(f2 > f1);
    }

    #[test]
    fn analog_rejects_bad_inputs() {
        assert!(decode_analog(1.8, 0.0, 0.0, 0.4).is_err());
        assert!(decode_analog(0.0, 0.0, 0.9, 0.4).is_err());
        assert!(decode_analog(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(decode_analog(f64::NAN, 0.0, 0.0, 0.4).is_err());
    }

    #[test]
    fn compare_variant_agrees_with_unconditional_branch() {
        // inside the quiet region every presumed deviation is below √π/2, so
        // the all-flip reading can never be more likely
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let m1 = rng.random_range(-HALF_SQRT_PI..HALF_SQRT_PI);
            let m2 = rng.random_range(-HALF_SQRT_PI..HALF_SQRT_PI);
            let a3 = rng.random_range(-HALF_SQRT_PI..HALF_SQRT_PI);
            assert_eq!(
                decode_analog_with(m1, m2, a3, 0.4, NoErrorBranch::Compare).unwrap(),
                ErrorPattern::NONE
            );
        }
    }

    #[test]
    fn digital_examples() {
        assert_eq!(decode_digital(&Syndrome::default()), ErrorPattern::NONE);
        let s = Syndrome {
            a1: 0.9 * SQRT_PI,
            a2: 0.1,
            ..Default::default()
        };
        assert_eq!(decode_digital(&s), pat(&[1]));
        let s = Syndrome {
            a1: 0.9 * SQRT_PI,
            a2: 0.9 * SQRT_PI,
            ..Default::default()
        };
        assert_eq!(decode_digital(&s), pat(&[2]));
        // qubit 3 alone flipped: both M values land past √π/2
        let s = extract_syndrome(&BlockState::new([0.1, -0.2, 0.95 * SQRT_PI]), 0);
        assert_eq!(decode_digital(&s), pat(&[3]));
        // a double error is always read as the complementary single error
        let s = extract_syndrome(&BlockState::new([0.0, 0.9 * SQRT_PI, 0.9 * SQRT_PI]), 1);
        assert_eq!(decode_digital(&s), pat(&[1]));
    }

    #[test]
    fn true_pattern_examples() {
        assert_eq!(true_pattern(&BlockState::new([0.0; 3])), ErrorPattern::NONE);
        assert_eq!(
            true_pattern(&BlockState::new([0.95 * SQRT_PI, 0.0, 0.0])),
            pat(&[1])
        );
        assert_eq!(
            true_pattern(&BlockState::new([2.05 * SQRT_PI, 0.0, 0.0])),
            ErrorPattern::NONE
        );
    }

    #[test]
    fn trials_are_reproducible_and_quiet_at_small_sigma() {
        let p = NoiseParams::new(0.4).unwrap();
        for decoder in [Decoder::Analog, Decoder::Digital] {
            let run = |seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..2000)
                    .map(|_| run_trial(p, &mut rng, decoder))
                    .collect::<Vec<_>>()
            };
            assert_eq!(run(5), run(5));
        }
        let tiny = NoiseParams::new(0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            assert!(!run_trial(tiny, &mut rng, Decoder::Analog));
            assert!(!run_trial(tiny, &mut rng, Decoder::Digital));
        }
    }

    #[test]
    fn analog_decision_is_sigma_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100_000 {
            let m1 = rng.random_range(-SQRT_PI..SQRT_PI);
            let m2 = rng.random_range(-SQRT_PI..SQRT_PI);
            let a3 = rng.random_range(-HALF_SQRT_PI..HALF_SQRT_PI);
            let (s1, s2) = candidate_square_sums(m1, m2, a3);
            let outs: Vec<_> = [0.2, 0.5, 1.0]
                .iter()
                .map(|&s| decode_analog(m1, m2, a3, s).unwrap())
                .collect();
            assert!(outs.iter().all(|&o| o == outs[0]));
            if !(m1.abs() < HALF_SQRT_PI && m2.abs() < HALF_SQRT_PI) {
                assert_eq!(!outs[0].contains(3), s1 <= s2);
            }
        }
    }

    // Deviations inside the cell whose pairwise sums also stay inside it.
    fn quiet_state() -> impl Strategy<Value = BlockState> {
        let h = HALF_SQRT_PI / 2.0 - 1e-9;
        (-h..h, -h..h, -h..h).prop_map(|(a, b, c)| BlockState::new([a, b, c]))
    }

    // At most one deviation crosses √π/2 and none reaches √π - |others|,
    // so neither fold wraps.
    fn single_flip_state() -> impl Strategy<Value = BlockState> {
        let small = HALF_SQRT_PI / 4.0;
        let big = HALF_SQRT_PI + small + 1e-9..1.4;
        (0usize..3, -small..small, -small..small, big, any::<bool>()).prop_map(
            |(which, x, y, big, neg)| {
                let mut dev = [x, y, x];
                dev[which] = if neg { -big } else { big };
                BlockState::new(dev)
            },
        )
    }

    proptest! {
        #[test]
        fn complementarity(m1 in -SQRT_PI..SQRT_PI, m2 in -SQRT_PI..SQRT_PI, a3 in -HALF_SQRT_PI..HALF_SQRT_PI) {
            prop_assume!(!(m1.abs() < HALF_SQRT_PI && m2.abs() < HALF_SQRT_PI));
            let out = decode_analog(m1, m2, a3, 0.4).unwrap();
            let mut p1 = 0u8;
            if m1.abs() >= HALF_SQRT_PI { p1 |= 1; }
            if m2.abs() >= HALF_SQRT_PI { p1 |= 2; }
            let p1 = ErrorPattern::from_bits(p1).unwrap();
            prop_assert!(out == p1 || out == p1.complement());
        }

        #[test]
        fn quiet_blocks_decode_to_nothing(st in quiet_state(), bit in 0u8..2) {
            for d in [Decoder::Analog, Decoder::Digital] {
                prop_assert_eq!(decode_state(&st, bit, 0.3, d), ErrorPattern::NONE);
                prop_assert!(!fails(&st, bit, 0.3, d));
            }
        }

        #[test]
        fn digital_matches_classical_lookup(st in single_flip_state(), bit in 0u8..2) {
            let e = true_pattern(&st);
            let (e1, e2, e3) = (e.contains(1), e.contains(2), e.contains(3));
            let lookup = match (e1 ^ e2, e2 ^ e3) {
                (false, false) => ErrorPattern::NONE,
                (true, false) => pat(&[1]),
                (true, true) => pat(&[2]),
                (false, true) => pat(&[3]),
            };
            prop_assert_eq!(decode_digital(&extract_syndrome(&st, bit)), lookup);
            prop_assert_eq!(lookup, e);
        }
    }
}
