//! Codeword-class tables for `[[n, 2, 2]]` CSS blocks.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest block length supported by the bitmask word representation.
pub const MAX_BLOCK_LEN: usize = 16;

/// Largest number of codewords per class the decoder handles.
pub const MAX_CLASS_SIZE: usize = 16;

/// Value `(b₁, b₂)` of a qubit pair, indexed `2·b₁ + b₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairValue(u8);

impl PairValue {
    pub const ALL: [PairValue; 4] = [PairValue(0), PairValue(1), PairValue(2), PairValue(3)];

    pub fn new(b1: u8, b2: u8) -> Self {
        Self(((b1 & 1) << 1) | (b2 & 1))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn bits(self) -> (u8, u8) {
        (self.0 >> 1, self.0 & 1)
    }

    fn label(self) -> String {
        let (a, b) = self.bits();
        format!("{a}{b}")
    }
}

/// Codeword classes of one block, keyed by the pair value they encode.
///
/// Words are bitmasks with position `i` (1-based) stored in bit `i - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CssCodeSpec {
    n: usize,
    classes: [Vec<u32>; 4],
    /// 0-based positions feeding each child pair.
    pair_layout: Vec<(usize, usize)>,
}

impl CssCodeSpec {
    /// Builds a spec and runs [`validate_css`] on it.
    pub fn new(n: usize, classes: [Vec<u32>; 4], pair_layout: Vec<(usize, usize)>) -> Result<Self> {
        let spec = Self {
            n,
            classes,
            pair_layout,
        };
        validate_css(&spec).map_err(|v| Error::CodeSpec(v.to_string()))?;
        Ok(spec)
    }

    /// Skips validation; used to build deliberately broken specs in tests.
    pub fn new_unchecked(
        n: usize,
        classes: [Vec<u32>; 4],
        pair_layout: Vec<(usize, usize)>,
    ) -> Self {
        Self {
            n,
            classes,
            pair_layout,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn class(&self, value: PairValue) -> &[u32] {
        &self.classes[value.index()]
    }

    #[inline]
    pub fn pair_layout(&self) -> &[(usize, usize)] {
        &self.pair_layout
    }

    /// Number of child pairs when the block sits above another level.
    pub fn pairs(&self) -> usize {
        self.pair_layout.len()
    }

    pub fn word_to_string(&self, word: u32) -> String {
        word_string(word, self.n)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDocument =
            serde_json::from_str(text).map_err(|e| Error::CodeSpec(format!("bad JSON: {e}")))?;
        doc.try_into()
    }

    pub fn to_json(&self) -> String {
        let doc = SpecDocument {
            n: self.n,
            pair_layout: self
                .pair_layout
                .iter()
                .map(|&(a, b)| [a + 1, b + 1])
                .collect(),
            classes: PairValue::ALL
                .iter()
                .map(|&v| {
                    let words = self
                        .class(v)
                        .iter()
                        .map(|&w| word_string(w, self.n))
                        .collect();
                    (v.label(), words)
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("spec document serializes")
    }
}

fn word_string(word: u32, n: usize) -> String {
    (0..n)
        .map(|i| if word >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn parse_word(s: &str, n: usize) -> Result<u32> {
    if s.len() != n {
        return Err(Error::CodeSpec(format!(
            "word '{s}' does not have length {n}"
        )));
    }
    s.chars().enumerate().try_fold(0u32, |acc, (i, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << i),
        _ => Err(Error::CodeSpec(format!("word '{s}' is not a bit string"))),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecDocument {
    n: usize,
    pair_layout: Vec<[usize; 2]>,
    classes: BTreeMap<String, Vec<String>>,
}

impl TryFrom<SpecDocument> for CssCodeSpec {
    type Error = Error;

    fn try_from(doc: SpecDocument) -> Result<Self> {
        if doc.n == 0 || doc.n > MAX_BLOCK_LEN {
            return Err(Error::CodeSpec(format!(
                "n = {} not in 1..={MAX_BLOCK_LEN}",
                doc.n
            )));
        }
        let mut classes: [Vec<u32>; 4] = Default::default();
        for v in PairValue::ALL {
            let words = doc
                .classes
                .get(&v.label())
                .ok_or_else(|| Error::CodeSpec(format!("missing class \"{}\"", v.label())))?;
            classes[v.index()] = words
                .iter()
                .map(|w| parse_word(w, doc.n))
                .collect::<Result<_>>()?;
        }
        if let Some(extra) = doc
            .classes
            .keys()
            .find(|k| !["00", "01", "10", "11"].contains(&k.as_str()))
        {
            return Err(Error::CodeSpec(format!("unknown class key \"{extra}\"")));
        }
        let mut layout = Vec::with_capacity(doc.pair_layout.len());
        for [a, b] in doc.pair_layout {
            if a == 0 || b == 0 {
                return Err(Error::CodeSpec("pair_layout positions are 1-based".into()));
            }
            layout.push((a - 1, b - 1));
        }
        CssCodeSpec::new(doc.n, classes, layout)
    }
}

/// The `[[4,2,2]]` block used at the first level.
pub fn c4_spec() -> CssCodeSpec {
    let w = |s: &str| parse_word(s, 4).expect("literal word");
    CssCodeSpec::new(
        4,
        [
            vec![w("0000"), w("1111")],
            vec![w("0101"), w("1010")],
            vec![w("0011"), w("1100")],
            vec![w("0110"), w("1001")],
        ],
        vec![(0, 1), (2, 3)],
    )
    .expect("C4 tables are valid")
}

/// The `[[6,2,2]]` block used at every level above the first, with
/// stabilizers `XIIXXX, XXXIIX` (and the same Z patterns) and logical X
/// operators `IXXIII, XIXXII`. No nonzero word lies inside a single pair,
/// so one unreadable child still leaves both logical bits decidable.
pub fn c6_spec() -> CssCodeSpec {
    c6_from(["100111", "111001"], ["011000", "101100"])
}

fn c6_from(generators: [&str; 2], leaders: [&str; 2]) -> CssCodeSpec {
    let w = |s: &str| parse_word(s, 6).expect("literal word");
    let (g1, g2) = (w(generators[0]), w(generators[1]));
    let base = [0, g1, g2, g1 ^ g2];
    let (lead1, lead2) = (w(leaders[0]), w(leaders[1]));
    let mut classes: [Vec<u32>; 4] = Default::default();
    for v in PairValue::ALL {
        let (b1, b2) = v.bits();
        let shift = if b1 == 1 { lead1 } else { 0 } ^ if b2 == 1 { lead2 } else { 0 };
        classes[v.index()] = base.iter().map(|&c| c ^ shift).collect();
    }
    CssCodeSpec::new(6, classes, vec![(0, 1), (2, 3), (4, 5)]).expect("C6 tables are valid")
}

/// Which structural property a spec breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    Shape,
    Layout,
    ClassSize,
    ZeroClass,
    Linearity,
    Coset,
    Disjoint,
    Distance,
}

/// First violated property, with a word that exhibits it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub property: Property,
    pub witness: Option<String>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.property, self.detail)?;
        if let Some(w) = &self.witness {
            write!(f, " (witness {w})")?;
        }
        Ok(())
    }
}

/// Brute-force check of every structural requirement on a block spec.
pub fn validate_css(spec: &CssCodeSpec) -> std::result::Result<(), Violation> {
    let n = spec.n;
    let fail = |property, witness: Option<u32>, detail: String| Violation {
        property,
        witness: witness.map(|w| word_string(w, n)),
        detail,
    };

    if n == 0 || n > MAX_BLOCK_LEN || !n.is_multiple_of(2) {
        return Err(fail(
            Property::Shape,
            None,
            format!("block length {n} must be even and <= {MAX_BLOCK_LEN}"),
        ));
    }
    let limit = 1u32 << n;
    for v in PairValue::ALL {
        if let Some(&w) = spec.class(v).iter().find(|&&w| w >= limit) {
            return Err(fail(
                Property::Shape,
                Some(w),
                format!("word exceeds {n} bits"),
            ));
        }
    }

    let mut seen = vec![false; n];
    if spec.pair_layout.len() != n / 2 {
        return Err(fail(
            Property::Layout,
            None,
            format!("expected {} pairs", n / 2),
        ));
    }
    for &(a, b) in &spec.pair_layout {
        for p in [a, b] {
            if p >= n || seen[p] {
                return Err(fail(
                    Property::Layout,
                    None,
                    format!("position {} repeated or out of range", p + 1),
                ));
            }
            seen[p] = true;
        }
    }

    let size = spec.class(PairValue::ALL[0]).len();
    for v in PairValue::ALL {
        let class = spec.class(v);
        let distinct: HashSet<_> = class.iter().collect();
        if class.is_empty()
            || class.len() != size
            || class.len() > MAX_CLASS_SIZE
            || distinct.len() != class.len()
        {
            return Err(fail(
                Property::ClassSize,
                None,
                format!(
                    "class {} has {} words, expected {size} distinct",
                    v.label(),
                    class.len()
                ),
            ));
        }
    }

    let zero: HashSet<u32> = spec.class(PairValue::new(0, 0)).iter().copied().collect();
    if !zero.contains(&0) {
        return Err(fail(
            Property::ZeroClass,
            None,
            "class 00 lacks the all-zeros word".into(),
        ));
    }
    for &a in &zero {
        for &b in &zero {
            if !zero.contains(&(a ^ b)) {
                return Err(fail(
                    Property::Linearity,
                    Some(a ^ b),
                    "class 00 not closed under XOR".into(),
                ));
            }
        }
    }

    for v in PairValue::ALL {
        let class = spec.class(v);
        let leader = class[0];
        for &c in &zero {
            if !class.contains(&(leader ^ c)) {
                return Err(fail(
                    Property::Coset,
                    Some(leader ^ c),
                    format!("class {} is not a coset of class 00", v.label()),
                ));
            }
        }
    }

    let mut owner = BTreeMap::new();
    for v in PairValue::ALL {
        for &w in spec.class(v) {
            if let Some(prev) = owner.insert(w, v) {
                return Err(fail(
                    Property::Disjoint,
                    Some(w),
                    format!("word in classes {} and {}", prev.label(), v.label()),
                ));
            }
        }
    }

    if let Some((&w, _)) = owner.iter().find(|(&w, _)| w != 0 && w.count_ones() < 2) {
        return Err(fail(
            Property::Distance,
            Some(w),
            "nonzero word of weight < 2".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(spec: &CssCodeSpec, v: PairValue) -> Vec<String> {
        let mut out: Vec<String> = spec
            .class(v)
            .iter()
            .map(|&w| spec.word_to_string(w))
            .collect();
        out.sort();
        out
    }

    #[test]
    fn c4_tables() {
        let c4 = c4_spec();
        assert_eq!(words(&c4, PairValue::new(0, 0)), ["0000", "1111"]);
        assert_eq!(words(&c4, PairValue::new(0, 1)), ["0101", "1010"]);
        assert_eq!(words(&c4, PairValue::new(1, 0)), ["0011", "1100"]);
        assert_eq!(words(&c4, PairValue::new(1, 1)), ["0110", "1001"]);
        assert!(validate_css(&c4).is_ok());
    }

    #[test]
    fn c4_words_satisfy_z_checks() {
        // every codeword is even under ZZZZ, which is what distance 2 needs
        let c4 = c4_spec();
        for v in PairValue::ALL {
            for &w in c4.class(v) {
                assert_eq!(w.count_ones() % 2, 0);
            }
        }
    }

    #[test]
    fn c6_tables() {
        let c6 = c6_spec();
        assert_eq!(
            words(&c6, PairValue::new(0, 0)),
            ["000000", "011110", "100111", "111001"]
        );
        assert_eq!(
            words(&c6, PairValue::new(1, 0)),
            ["000110", "011000", "100001", "111111"]
        );
        let mut all = HashSet::new();
        for v in PairValue::ALL {
            assert_eq!(c6.class(v).len(), 4);
            all.extend(c6.class(v).iter().copied());
        }
        assert_eq!(all.len(), 16);
        let min = all
            .iter()
            .filter(|&&w| w != 0)
            .map(|w| w.count_ones())
            .min();
        assert_eq!(min, Some(2));
        assert!(validate_css(&c6).is_ok());
    }

    fn inside_one_pair(spec: &CssCodeSpec) -> Vec<String> {
        PairValue::ALL
            .iter()
            .flat_map(|&v| spec.class(v).iter().copied())
            .filter(|&w| {
                w != 0
                    && spec
                        .pair_layout()
                        .iter()
                        .any(|&(a, b)| w & !(1 << a | 1 << b) == 0)
            })
            .map(|w| spec.word_to_string(w))
            .collect()
    }

    #[test]
    fn c6_survives_losing_one_child() {
        assert!(inside_one_pair(&c6_spec()).is_empty());
        // the span{111100, 001111} variant is a valid spec but loses b1 whenever a pair is unreadable
        let aligned = c6_from(["111100", "001111"], ["110000", "011010"]);
        assert!(validate_css(&aligned).is_ok());
        let mut bad = inside_one_pair(&aligned);
        bad.sort();
        assert_eq!(bad, ["000011", "001100", "110000"]);
    }

    #[test]
    fn broken_zero_class_is_reported() {
        let c4 = c4_spec();
        let mut classes: [Vec<u32>; 4] = PairValue::ALL.map(|v| c4.class(v).to_vec());
        classes[0] = vec![0b0000, 0b0111]; // "1110" with position 1 leftmost
        let bad = CssCodeSpec::new_unchecked(4, classes, vec![(0, 1), (2, 3)]);
        let v = validate_css(&bad).unwrap_err();
        assert_eq!(v.property, Property::Coset);
        assert!(v.witness.is_some());
    }

    #[test]
    fn other_violations() {
        let c4 = c4_spec();
        let base: [Vec<u32>; 4] = PairValue::ALL.map(|v| c4.class(v).to_vec());

        let mut classes = base.clone();
        classes[1] = vec![0b0001, 0b1110];
        classes[2] = vec![0b0010, 0b1101];
        classes[3] = vec![0b0011, 0b1100];
        let v = validate_css(&CssCodeSpec::new_unchecked(
            4,
            classes,
            vec![(0, 1), (2, 3)],
        ))
        .unwrap_err();
        assert_eq!(v.property, Property::Distance);
        assert_eq!(v.witness.as_deref(), Some("1000"));

        let mut classes = base.clone();
        classes[3] = base[2].clone();
        let v = validate_css(&CssCodeSpec::new_unchecked(
            4,
            classes,
            vec![(0, 1), (2, 3)],
        ))
        .unwrap_err();
        assert_eq!(v.property, Property::Disjoint);

        let v = validate_css(&CssCodeSpec::new_unchecked(
            4,
            base.clone(),
            vec![(0, 1), (1, 3)],
        ))
        .unwrap_err();
        assert_eq!(v.property, Property::Layout);

        let mut classes = base.clone();
        classes[1].push(0b0000);
        let v = validate_css(&CssCodeSpec::new_unchecked(
            4,
            classes,
            vec![(0, 1), (2, 3)],
        ))
        .unwrap_err();
        assert_eq!(v.property, Property::ClassSize);
    }

    #[test]
    fn json_round_trip_and_errors() {
        for spec in [c4_spec(), c6_spec()] {
            let text = spec.to_json();
            assert_eq!(CssCodeSpec::from_json(&text).unwrap(), spec);
        }
        let doc = r#"{"n":6,"pair_layout":[[1,2],[3,4],[5,6]],
            "classes":{"00":["000000","100111","111001","011110"],
                       "01":["101100","001011","010101","110010"],
                       "10":["011000","111111","100001","000110"],
                       "11":["110100","010011","001101","101010"]}}"#;
        let parsed = CssCodeSpec::from_json(doc).unwrap();
        assert_eq!(parsed, c6_spec());

        assert!(CssCodeSpec::from_json("{").is_err());
        let bad = doc.replace("\"011110\"", "\"011111\"");
        assert!(CssCodeSpec::from_json(&bad).is_err());
        let bad = doc.replace("\"11\":", "\"12\":");
        assert!(CssCodeSpec::from_json(&bad).is_err());
        let bad = doc.replace("[5,6]", "[0,6]");
        assert!(CssCodeSpec::from_json(&bad).is_err());
    }
}
