//! Infinite binary strings and dense string properties.
//!
//! Strings are ultimately periodic (`prefix` then a repeated `period`), which
//! is enough to witness every construction used here while keeping equality
//! decidable. A [`DenseProperty`] is an intensional class of strings: a
//! builtin base property intersected with a positive segment filter and a
//! finite list of clopen conditions. Its two oracles, `ext` and `witness`,
//! drive everything else: truncation to finite string sets, the segment
//! condition behind Player II's strategy, and the endgame bookkeeping in
//! [`game`].

pub mod game;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Formula, SymbolicFamily, SymbolicTag};
use crate::measure::ComplexityMeasure;
use crate::ordinal::{OmegaFamily, Ordinal};

pub use game::{
    simulate_dense_game, simulate_with_player, Adversary, DenseClass, DenseMove, DensePosition,
    PlayerTwo, RandomClopenAdversary, ScriptedAdversary,
};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum StringsError {
    #[error("period must be nonempty")]
    EmptyPeriod,
    #[error("invalid bit character {0:?}")]
    BadBit(char),
    #[error("expected prefix|period")]
    BadStringSyntax,
    #[error("length {got} exceeds the cap {cap}")]
    LengthCapExceeded { got: u64, cap: u64 },
    #[error("unknown base property {0:?} (expected fin-ones, odd-ones or ult-periodic)")]
    UnknownProperty(String),
    #[error("support position {pos} exceeds the bound {bound}")]
    SupportBoundExceeded { pos: u64, bound: u64 },
    #[error("player II found no piece satisfying the extension condition within the bound")]
    NoExtensionPiece,
    #[error("player II found no nonempty piece with finite rank")]
    NoFiniteRankPiece,
    #[error("rank must be below w^2 (of the form w*k+m)")]
    RankTooLarge,
    #[error("move is outside the clopen fragment: {0}")]
    BadMove(String),
}

/// An ultimately periodic infinite binary string, normalized so that equal
/// strings have equal representations (minimal period, maximal prefix
/// absorption).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UPString {
    prefix: Vec<bool>,
    period: Vec<bool>,
}

impl UPString {
    pub fn new(mut prefix: Vec<bool>, mut period: Vec<bool>) -> Result<Self, StringsError> {
        if period.is_empty() {
            return Err(StringsError::EmptyPeriod);
        }
        // Minimal period: the shortest divisor-length block that repeats.
        for d in 1..period.len() {
            if period.len() % d == 0 && period.chunks(d).all(|c| c == &period[..d]) {
                period.truncate(d);
                break;
            }
        }
        // Absorb the prefix tail into the period by rotation.
        while let Some(&last) = prefix.last() {
            if last == *period.last().unwrap() {
                prefix.pop();
                period.rotate_right(1);
            } else {
                break;
            }
        }
        Ok(UPString { prefix, period })
    }

    /// The all-`bit` constant string.
    pub fn constant(bit: bool) -> Self {
        UPString {
            prefix: Vec::new(),
            period: vec![bit],
        }
    }

    pub fn prefix(&self) -> &[bool] {
        &self.prefix
    }

    pub fn period(&self) -> &[bool] {
        &self.period
    }

    /// The i-th bit.
    pub fn bit(&self, i: u64) -> bool {
        let n = self.prefix.len() as u64;
        if i < n {
            self.prefix[i as usize]
        } else {
            self.period[((i - n) % self.period.len() as u64) as usize]
        }
    }

    /// Whether the string extends the segment.
    pub fn extends(&self, seg: &Segment) -> bool {
        seg.bindings().all(|(i, b)| self.bit(i) == b)
    }
}

impl fmt::Display for UPString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.prefix {
            write!(f, "{}", u8::from(*b))?;
        }
        write!(f, "|")?;
        for b in &self.period {
            write!(f, "{}", u8::from(*b))?;
        }
        Ok(())
    }
}

impl fmt::Debug for UPString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for UPString {
    type Err = StringsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (prefix, period) = s.split_once('|').ok_or(StringsError::BadStringSyntax)?;
        Ok(UPString::new(parse_bits(prefix)?, parse_bits(period)?)?)
    }
}

pub(crate) fn parse_bits(s: &str) -> Result<Vec<bool>, StringsError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(StringsError::BadBit(other)),
        })
        .collect()
}

impl Serialize for UPString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UPString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Semantics of the propositional symbols on strings: `theta_t` holds of `h`
/// exactly when `h` agrees with `t` at every position, i.e. `h = t`.
/// Decidable on normalized representations by equality.
pub fn eval_theta(t: &UPString, h: &UPString) -> bool {
    t == h
}

/// A finite partial function from positions to bits.
///
/// Serialized as `{"<pos>": bit}` with string keys, which survives serde's
/// internal buffering inside tagged enums.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Segment {
    bits: BTreeMap<u64, bool>,
}

impl Serialize for Segment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_map(self.bits.iter().map(|(k, v)| (k.to_string(), *v)))
    }
}

impl<'de> Deserialize<'de> for Segment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, bool>::deserialize(deserializer)?;
        let mut bits = BTreeMap::new();
        for (k, v) in raw {
            let pos = k
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("bad position {k:?}")))?;
            bits.insert(pos, v);
        }
        Ok(Segment { bits })
    }
}

impl Segment {
    pub fn empty() -> Self {
        Segment::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, bool)>) -> Self {
        Segment {
            bits: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, pos: u64) -> Option<bool> {
        self.bits.get(&pos).copied()
    }

    pub fn set(&self, pos: u64, value: bool) -> Self {
        let mut bits = self.bits.clone();
        bits.insert(pos, value);
        Segment { bits }
    }

    pub fn bindings(&self) -> impl Iterator<Item = (u64, bool)> + '_ {
        self.bits.iter().map(|(k, v)| (*k, *v))
    }

    pub fn support(&self) -> BTreeSet<u64> {
        self.bits.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn max_position(&self) -> Option<u64> {
        self.bits.keys().next_back().copied()
    }

    /// Whether the two segments agree on their common support.
    pub fn consistent_with(&self, other: &Segment) -> bool {
        self.bindings()
            .all(|(i, b)| other.get(i).map_or(true, |c| c == b))
    }

    /// Whether every binding of `other` is also a binding of `self`.
    pub fn includes(&self, other: &Segment) -> bool {
        other.bindings().all(|(i, b)| self.get(i) == Some(b))
    }

    /// The union of consistent segments.
    pub fn union(&self, other: &Segment) -> Option<Segment> {
        if !self.consistent_with(other) {
            return None;
        }
        let mut bits = self.bits.clone();
        bits.extend(other.bindings());
        Some(Segment { bits })
    }
}

/// A clopen condition: a finite boolean combination of cylinder constraints.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Clopen {
    Bit { pos: u64, value: bool },
    AllOf { parts: Vec<Clopen> },
    AnyOf { parts: Vec<Clopen> },
    Not { part: Box<Clopen> },
    True,
    False,
}

impl Clopen {
    pub fn bit(pos: u64, value: bool) -> Self {
        Clopen::Bit { pos, value }
    }

    pub fn all_of(parts: Vec<Clopen>) -> Self {
        Clopen::AllOf { parts }
    }

    pub fn any_of(parts: Vec<Clopen>) -> Self {
        Clopen::AnyOf { parts }
    }

    pub fn negated(self) -> Self {
        Clopen::Not {
            part: Box::new(self),
        }
    }

    /// The segment `{pos -> bit}` as a cylinder condition.
    pub fn from_segment(seg: &Segment) -> Self {
        Clopen::AllOf {
            parts: seg.bindings().map(|(i, b)| Clopen::bit(i, b)).collect(),
        }
    }

    pub fn support(&self) -> BTreeSet<u64> {
        match self {
            Clopen::Bit { pos, .. } => [*pos].into(),
            Clopen::AllOf { parts } | Clopen::AnyOf { parts } => {
                parts.iter().flat_map(|p| p.support()).collect()
            }
            Clopen::Not { part } => part.support(),
            Clopen::True | Clopen::False => BTreeSet::new(),
        }
    }

    pub fn satisfied_by(&self, bits: &impl Fn(u64) -> bool) -> bool {
        match self {
            Clopen::Bit { pos, value } => bits(*pos) == *value,
            Clopen::AllOf { parts } => parts.iter().all(|p| p.satisfied_by(bits)),
            Clopen::AnyOf { parts } => parts.iter().any(|p| p.satisfied_by(bits)),
            Clopen::Not { part } => !part.satisfied_by(bits),
            Clopen::True => true,
            Clopen::False => false,
        }
    }
}

/// The builtin base properties; all three are dense in the Cantor space.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum BaseProperty {
    #[serde(rename = "fin-ones")]
    FinitelyManyOnes,
    #[serde(rename = "odd-ones")]
    OddManyOnes,
    #[serde(rename = "ult-periodic")]
    UltimatelyPeriodic,
}

impl FromStr for BaseProperty {
    type Err = StringsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fin-ones" => Ok(BaseProperty::FinitelyManyOnes),
            "odd-ones" => Ok(BaseProperty::OddManyOnes),
            "ult-periodic" => Ok(BaseProperty::UltimatelyPeriodic),
            other => Err(StringsError::UnknownProperty(other.to_string())),
        }
    }
}

/// An intensional class of infinite binary strings: a base property cut down
/// by a positive segment filter and finitely many clopen conditions.
///
/// Because every base property is dense, membership above a finite pattern
/// only depends on the filter and the clopen conditions, which makes the
/// `ext` and `witness` oracles total and exact.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct DenseProperty {
    pub base: BaseProperty,
    #[serde(default, skip_serializing_if = "Segment::is_empty")]
    pub filter: Segment,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clopen: Vec<Clopen>,
}

impl DenseProperty {
    pub fn new(base: BaseProperty) -> Self {
        DenseProperty {
            base,
            filter: Segment::empty(),
            clopen: Vec::new(),
        }
    }

    pub fn with_filter(mut self, filter: Segment) -> Self {
        self.filter = filter;
        self
    }

    pub fn with_clopen(mut self, condition: Clopen) -> Self {
        self.clopen.push(condition);
        self
    }

    /// All positions the class constraints mention.
    pub fn support(&self) -> BTreeSet<u64> {
        let mut s = self.filter.support();
        for c in &self.clopen {
            s.extend(c.support());
        }
        s
    }

    /// Does some member of the property extend the segment `g`?
    pub fn ext(&self, g: &Segment) -> bool {
        self.first_good_pattern(g).is_some()
    }

    /// A finite pattern over the relevant support that is consistent with
    /// `g` and the filter and satisfies every clopen condition.
    fn first_good_pattern(&self, g: &Segment) -> Option<Segment> {
        let fixed = g.union(&self.filter)?;
        let mut support = self.support();
        support.extend(g.support());
        let free: Vec<u64> = support
            .iter()
            .copied()
            .filter(|p| fixed.get(*p).is_none())
            .collect();
        let mut found = None;
        for_each_completion(&fixed, &free, &mut |pattern| {
            let ok = self
                .clopen
                .iter()
                .all(|c| c.satisfied_by(&|p| pattern.get(p).unwrap_or(false)));
            if ok && found.is_none() {
                found = Some(pattern.clone());
            }
            found.is_some()
        });
        found
    }

    /// A concrete member extending `g`, when one exists. The member is the
    /// first good pattern completed with a canonical tail realizing the base
    /// property (all zeros, plus one extra 1 when an odd count requires it).
    pub fn witness(&self, g: &Segment) -> Option<UPString> {
        let pattern = self.first_good_pattern(g)?;
        let len = pattern.max_position().map_or(0, |m| m + 1);
        let mut prefix: Vec<bool> = (0..len).map(|i| pattern.get(i).unwrap_or(false)).collect();
        if self.base == BaseProperty::OddManyOnes {
            let ones = prefix.iter().filter(|b| **b).count();
            if ones % 2 == 0 {
                prefix.push(true);
            }
        }
        Some(UPString::new(prefix, vec![false]).expect("nonempty period"))
    }

    /// The set `{ h restricted to L : h in the property }`, computed through
    /// the `ext` oracle on every length-L initial segment.
    pub fn truncate(&self, len: u64, cap: u64) -> Result<BTreeSet<Vec<bool>>, StringsError> {
        if len > cap {
            return Err(StringsError::LengthCapExceeded { got: len, cap });
        }
        let mut out = BTreeSet::new();
        for mask in 0u64..(1 << len) {
            let bits: Vec<bool> = (0..len).map(|i| mask >> i & 1 == 1).collect();
            let g = Segment::from_pairs(bits.iter().enumerate().map(|(i, b)| (i as u64, *b)));
            if self.ext(&g) {
                out.insert(bits);
            }
        }
        Ok(out)
    }
}

/// Runs `f` on every total completion of `fixed` over the `free` positions;
/// `f` returns true to stop early.
fn for_each_completion(fixed: &Segment, free: &[u64], f: &mut impl FnMut(&Segment) -> bool) {
    let mut pattern = fixed.clone();
    complete_rec(&mut pattern, free, 0, f);
}

fn complete_rec(
    pattern: &mut Segment,
    free: &[u64],
    i: usize,
    f: &mut impl FnMut(&Segment) -> bool,
) -> bool {
    if i == free.len() {
        return f(pattern);
    }
    for value in [false, true] {
        *pattern = pattern.set(free[i], value);
        if complete_rec(pattern, free, i + 1, f) {
            return true;
        }
    }
    false
}

/// Whether every partial bit pattern on at most `d` of the L coordinates is
/// realized by some string in the set (all strings must share one length L).
pub fn is_d_dense(strings: &BTreeSet<Vec<bool>>, d: usize) -> bool {
    let Some(len) = strings.iter().next().map(|s| s.len()) else {
        return false;
    };
    subsets_up_to(len, d).iter().all(|support| {
        (0u64..(1 << support.len())).all(|vals| {
            strings.iter().any(|s| {
                support
                    .iter()
                    .enumerate()
                    .all(|(k, pos)| s[*pos] == (vals >> k & 1 == 1))
            })
        })
    })
}

fn subsets_up_to(len: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |l| l + 1);
            for p in start..len {
                let mut t = s.clone();
                t.push(p);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Searches for a segment `f` over positions below `support_bound` such that
/// every member of both classes extends `f` (checked against the positive
/// filters) and every finite extension of `f` within the bound has members
/// in both classes. Segments are tried by increasing support size, then
/// position, then bit value; the first witness is returned.
pub fn check_condition_e9(
    left: &DenseProperty,
    right: &DenseProperty,
    support_bound: u64,
) -> Option<Segment> {
    for f in segments_below(support_bound) {
        if !left.filter.includes(&f) || !right.filter.includes(&f) {
            continue;
        }
        if extension_condition_holds(left, &f, support_bound)
            && extension_condition_holds(right, &f, support_bound)
        {
            return Some(f);
        }
    }
    None
}

/// The extension condition: every finite segment extending `f` within the
/// support bound has a member of the class extending it. Checking total
/// patterns on `[0, bound)` suffices, since a partial extension has members
/// exactly when one of its completions does.
pub(crate) fn extension_condition_holds(
    class: &DenseProperty,
    f: &Segment,
    support_bound: u64,
) -> bool {
    let free: Vec<u64> = (0..support_bound).filter(|p| f.get(*p).is_none()).collect();
    let mut all_ok = true;
    for_each_completion(f, &free, &mut |pattern| {
        if !class.ext(pattern) {
            all_ok = false;
        }
        !all_ok
    });
    all_ok
}

/// All partial assignments over positions `[0, bound)`, by increasing
/// support size, then support (lexicographic), then values (zeros first).
pub(crate) fn segments_below(bound: u64) -> Vec<Segment> {
    let mut out = Vec::new();
    for support in subsets_up_to(bound as usize, bound as usize) {
        for vals in 0u64..(1 << support.len()) {
            out.push(Segment::from_pairs(
                support
                    .iter()
                    .enumerate()
                    .map(|(k, pos)| (*pos as u64, vals >> k & 1 == 1)),
            ));
        }
    }
    out.sort_by_key(|s| s.len());
    out
}

// ---------------------------------------------------------------------------
// The standard defining formulas and their sizes.
// ---------------------------------------------------------------------------

/// The sentence pinning down one string: the countable conjunction with the
/// literal `p_i` where bit i is 1 and its negation where it is 0. Every
/// conjunct is a literal, so the member sizes are omega-many 1s.
pub fn theta_formula(t: &UPString) -> Formula {
    Formula::big_and_symbolic(SymbolicFamily {
        tag: SymbolicTag::StringBits { string: t.clone() },
        member_sizes: OmegaFamily::constant_many(Ordinal::one()),
        member_rank_sup: Ordinal::zero(),
    })
}

/// The size of a string-defining sentence under the `size` measure, computed
/// through the generic size pipeline.
pub fn theta_size() -> Ordinal {
    let size = ComplexityMeasure::builtin("size").expect("builtin");
    theta_formula(&UPString::constant(false))
        .size(&size)
        .expect("symbolic sentence is NNF")
}

/// The disjunction of string-defining sentences over a countably infinite
/// property: omega-many disjuncts, each of the size computed by
/// [`theta_size`].
pub fn phi_formula(property: &str) -> Formula {
    Formula::big_or_symbolic(SymbolicFamily {
        tag: SymbolicTag::PropertyMembers {
            property: property.to_string(),
        },
        member_sizes: OmegaFamily::constant_many(theta_size()),
        member_rank_sup: Ordinal::zero(),
    })
}

/// The size of the property-defining disjunction for a countably infinite
/// property, through the generic pipeline.
pub fn phi_size(property: &str) -> Ordinal {
    let size = ComplexityMeasure::builtin("size").expect("builtin");
    phi_formula(property)
        .size(&size)
        .expect("symbolic sentence is NNF")
}

/// The finite analogue of the property-defining disjunction: an explicit
/// disjunction, over the given length-L truncations, of the conjunction of
/// the L bit literals.
pub fn phi_truncated(members: &BTreeSet<Vec<bool>>) -> Formula {
    Formula::big_or(
        members
            .iter()
            .map(|bits| {
                Formula::big_and(
                    bits.iter()
                        .enumerate()
                        .map(|(i, b)| {
                            if *b {
                                Formula::prop(format!("p{i}"))
                            } else {
                                Formula::neg_prop(format!("p{i}"))
                            }
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}
