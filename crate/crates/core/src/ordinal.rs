//! Ordinal arithmetic in Cantor normal form below epsilon-0.
//!
//! An [`Ordinal`] is a finite sum of terms `w^e * k` with strictly decreasing
//! ordinal exponents and positive integer coefficients; the empty sum is 0.
//! The module provides the natural (Hessenberg) sum, which adds coefficients
//! exponent-wise, and the infinite natural sum of an omega-indexed family,
//! defined as the supremum of its finite partial natural sums.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum OrdinalError {
    #[error("a family must have at least one entry")]
    EmptyFamily,
    #[error("family is not omega-indexed: every multiplicity is finite")]
    NotOmegaIndexed,
    #[error("CNF coefficients must be positive")]
    ZeroCoefficient,
    #[error("finite multiplicities must be positive")]
    ZeroMultiplicity,
    #[error("exponents must be strictly decreasing in CNF")]
    ExponentsNotDecreasing,
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// An ordinal below epsilon-0 in Cantor normal form.
///
/// Stored as the list of `(exponent, coefficient)` pairs of its CNF, with
/// exponents strictly decreasing. The derived lexicographic order on that
/// list coincides with the ordinal order, so `Ord` is derived.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ordinal {
    terms: Vec<(Ordinal, u64)>,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Ordinal::nat(1)
    }

    /// The finite ordinal `n`.
    pub fn nat(n: u64) -> Self {
        if n == 0 {
            Ordinal::zero()
        } else {
            Ordinal {
                terms: vec![(Ordinal::zero(), n)],
            }
        }
    }

    pub fn omega() -> Self {
        Ordinal::omega_pow(Ordinal::one())
    }

    /// `w^exp` (so `omega_pow(0)` is 1).
    pub fn omega_pow(exp: Ordinal) -> Self {
        Ordinal {
            terms: vec![(exp, 1)],
        }
    }

    /// `w^exp * k`. Returns 0 when `k` is 0.
    pub fn omega_pow_times(exp: Ordinal, k: u64) -> Self {
        if k == 0 {
            Ordinal::zero()
        } else {
            Ordinal {
                terms: vec![(exp, k)],
            }
        }
    }

    /// Builds an ordinal from CNF terms, validating the CNF invariants.
    pub fn from_terms(terms: Vec<(Ordinal, u64)>) -> Result<Self, OrdinalError> {
        for ((e1, k), (e2, _)) in terms.iter().zip(terms.iter().skip(1)) {
            if *k == 0 {
                return Err(OrdinalError::ZeroCoefficient);
            }
            if e1 <= e2 {
                return Err(OrdinalError::ExponentsNotDecreasing);
            }
        }
        if let Some((_, k)) = terms.last() {
            if *k == 0 {
                return Err(OrdinalError::ZeroCoefficient);
            }
        }
        Ok(Ordinal { terms })
    }

    pub fn terms(&self) -> &[(Ordinal, u64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.as_nat().is_some()
    }

    /// The value as a natural number, if the ordinal is finite.
    pub fn as_nat(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [(e, k)] if e.is_zero() => Some(*k),
            _ => None,
        }
    }

    /// The exponent of the leading CNF term; `None` for 0.
    pub fn leading_exponent(&self) -> Option<&Ordinal> {
        self.terms.first().map(|(e, _)| e)
    }

    /// `self + 1`.
    pub fn successor(&self) -> Self {
        let mut terms = self.terms.clone();
        match terms.last_mut() {
            Some((e, k)) if e.is_zero() => *k += 1,
            _ => terms.push((Ordinal::zero(), 1)),
        }
        Ordinal { terms }
    }

    /// Total CNF comparison. Equivalent to the derived `Ord`.
    pub fn compare(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    /// The natural (Hessenberg) sum: coefficients are added exponent-wise.
    pub fn natural_sum(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() + other.terms.len());
        let mut a = self.terms.iter().peekable();
        let mut b = other.terms.iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => break,
                (Some(_), None) => terms.push(a.next().unwrap().clone()),
                (None, Some(_)) => terms.push(b.next().unwrap().clone()),
                (Some((ea, _)), Some((eb, _))) => match ea.cmp(eb) {
                    Ordering::Greater => terms.push(a.next().unwrap().clone()),
                    Ordering::Less => terms.push(b.next().unwrap().clone()),
                    Ordering::Equal => {
                        let (e, ka) = a.next().unwrap();
                        let (_, kb) = b.next().unwrap();
                        terms.push((e.clone(), ka + kb));
                    }
                },
            }
        }
        Ordinal { terms }
    }

    /// The k-fold natural sum of `self`, i.e. every coefficient scaled by `k`.
    pub fn scale_by_nat(&self, k: u64) -> Self {
        if k == 0 {
            return Ordinal::zero();
        }
        Ordinal {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * k)).collect(),
        }
    }

    /// Keeps only the CNF terms whose exponent is at least `min_exp`.
    fn restrict_exponents_at_least(&self, min_exp: &Ordinal) -> Self {
        Ordinal {
            terms: self
                .terms
                .iter()
                .take_while(|(e, _)| e >= min_exp)
                .cloned()
                .collect(),
        }
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (exp, k)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            if exp.is_zero() {
                write!(f, "{k}")?;
                continue;
            }
            if exp.as_nat() == Some(1) {
                write!(f, "w")?;
            } else if let Some(n) = exp.as_nat() {
                write!(f, "w^{n}")?;
            } else if exp == &Ordinal::omega() {
                write!(f, "w^w")?;
            } else {
                write!(f, "w^({exp})")?;
            }
            if *k > 1 {
                write!(f, "*{k}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

impl FromStr for Ordinal {
    type Err = OrdinalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser::new(s);
        let o = p.ordinal()?;
        p.expect_end()?;
        Ok(o)
    }
}

/// Parses an ordinal expression: CNF literals combined with the natural-sum
/// operator `#`, with parentheses allowed, e.g. `"(w^2+1) # w*3"`.
pub fn parse_ordinal_expr(s: &str) -> Result<Ordinal, OrdinalError> {
    let mut p = Parser::new(s);
    let o = p.expr()?;
    p.expect_end()?;
    Ok(o)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(s: &'a str) -> Self {
        Parser {
            bytes: s.as_bytes(),
            pos: 0,
        }
    }

    fn err<T>(&self, msg: &str) -> Result<T, OrdinalError> {
        Err(OrdinalError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_end(&mut self) -> Result<(), OrdinalError> {
        if self.peek().is_some() {
            self.err("trailing input")
        } else {
            Ok(())
        }
    }

    fn nat(&mut self) -> Result<u64, OrdinalError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a number");
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err("number too large"))
    }

    /// `expr := ordinal_atom ('#' ordinal_atom)*`
    fn expr(&mut self) -> Result<Ordinal, OrdinalError> {
        let mut acc = self.expr_atom()?;
        while self.eat(b'#') {
            let rhs = self.expr_atom()?;
            acc = acc.natural_sum(&rhs);
        }
        Ok(acc)
    }

    fn expr_atom(&mut self) -> Result<Ordinal, OrdinalError> {
        if self.eat(b'(') {
            let o = self.expr()?;
            if !self.eat(b')') {
                return self.err("expected ')'");
            }
            Ok(o)
        } else {
            self.ordinal()
        }
    }

    /// `ordinal := term ('+' term)*`, validated as CNF.
    fn ordinal(&mut self) -> Result<Ordinal, OrdinalError> {
        let mut terms = vec![self.term()?];
        while self.eat(b'+') {
            terms.push(self.term()?);
        }
        // A bare 0 is only the whole ordinal, never a summand.
        if terms.len() == 1 && terms[0].1 == 0 {
            return Ok(Ordinal::zero());
        }
        if terms.iter().any(|(_, k)| *k == 0) {
            return self.err("zero term in a sum");
        }
        Ordinal::from_terms(terms).or_else(|e| self.err(&e.to_string()))
    }

    /// `term := 'w' ('^' exponent)? ('*' nat)? | nat`
    fn term(&mut self) -> Result<(Ordinal, u64), OrdinalError> {
        if self.eat(b'w') {
            let exp = if self.eat(b'^') {
                self.exponent()?
            } else {
                Ordinal::one()
            };
            let coeff = if self.eat(b'*') { self.nat()? } else { 1 };
            if coeff == 0 {
                return self.err("coefficient must be positive");
            }
            Ok((exp, coeff))
        } else {
            let n = self.nat()?;
            Ok((Ordinal::zero(), n))
        }
    }

    /// `exponent := '(' ordinal ')' | 'w' ('^' exponent)? | nat`
    fn exponent(&mut self) -> Result<Ordinal, OrdinalError> {
        if self.eat(b'(') {
            let o = self.ordinal()?;
            if !self.eat(b')') {
                return self.err("expected ')'");
            }
            Ok(o)
        } else if self.eat(b'w') {
            let inner = if self.eat(b'^') {
                self.exponent()?
            } else {
                Ordinal::one()
            };
            Ok(Ordinal::omega_pow(inner))
        } else {
            Ok(Ordinal::nat(self.nat()?))
        }
    }
}

/// Multiplicity of an entry in an [`OmegaFamily`]: a positive count, or
/// `Many` for omega-many repetitions.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Multiplicity {
    Finite(u64),
    Many,
}

impl Serialize for Multiplicity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Multiplicity::Finite(k) => serializer.serialize_u64(*k),
            Multiplicity::Many => serializer.serialize_str("many"),
        }
    }
}

impl<'de> Deserialize<'de> for Multiplicity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Word(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(k) => Ok(Multiplicity::Finite(k)),
            Repr::Word(w) if w == "many" => Ok(Multiplicity::Many),
            Repr::Word(w) => Err(D::Error::custom(format!("unknown multiplicity {w:?}"))),
        }
    }
}

/// A multiset of ordinals describing an omega-indexed sequence up to
/// permutation: each entry is a value with a finite multiplicity or `Many`.
/// The represented sequence is indexed by all of omega exactly when some
/// entry is `Many`; zero-valued `Many` padding expresses eventually-zero
/// sequences.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<(Ordinal, Multiplicity)>", into = "Vec<(Ordinal, Multiplicity)>")]
pub struct OmegaFamily {
    entries: Vec<(Ordinal, Multiplicity)>,
}

impl From<OmegaFamily> for Vec<(Ordinal, Multiplicity)> {
    fn from(f: OmegaFamily) -> Self {
        f.entries
    }
}

impl TryFrom<Vec<(Ordinal, Multiplicity)>> for OmegaFamily {
    type Error = OrdinalError;

    fn try_from(entries: Vec<(Ordinal, Multiplicity)>) -> Result<Self, Self::Error> {
        OmegaFamily::new(entries)
    }
}

impl OmegaFamily {
    /// Builds a family from entries, normalizing to at most one entry per
    /// value (finite multiplicities merge; `Many` absorbs finite ones).
    pub fn new(entries: Vec<(Ordinal, Multiplicity)>) -> Result<Self, OrdinalError> {
        if entries.is_empty() {
            return Err(OrdinalError::EmptyFamily);
        }
        let mut sorted: Vec<(Ordinal, Multiplicity)> = Vec::new();
        for (v, m) in entries {
            if m == Multiplicity::Finite(0) {
                return Err(OrdinalError::ZeroMultiplicity);
            }
            match sorted.iter_mut().find(|(w, _)| *w == v) {
                Some((_, slot)) => {
                    *slot = match (*slot, m) {
                        (Multiplicity::Finite(a), Multiplicity::Finite(b)) => {
                            Multiplicity::Finite(a + b)
                        }
                        _ => Multiplicity::Many,
                    }
                }
                None => sorted.push((v, m)),
            }
        }
        sorted.sort_by(|(a, _), (b, _)| b.cmp(a));
        Ok(OmegaFamily { entries: sorted })
    }

    /// The family `{(value, Many)}`.
    pub fn constant_many(value: Ordinal) -> Self {
        OmegaFamily {
            entries: vec![(value, Multiplicity::Many)],
        }
    }

    /// A finite family with one occurrence per given value.
    pub fn from_values(values: impl IntoIterator<Item = Ordinal>) -> Result<Self, OrdinalError> {
        OmegaFamily::new(
            values
                .into_iter()
                .map(|v| (v, Multiplicity::Finite(1)))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(Ordinal, Multiplicity)] {
        &self.entries
    }

    pub fn values(&self) -> impl Iterator<Item = &Ordinal> {
        self.entries.iter().map(|(v, _)| v)
    }

    /// True iff the represented sequence is indexed by all of omega.
    pub fn is_infinite(&self) -> bool {
        self.entries.iter().any(|(_, m)| *m == Multiplicity::Many)
    }

    /// Pads a finite family with zero-valued `Many` entries so the result is
    /// omega-indexed; an already-infinite family is returned unchanged.
    pub fn pad_to_omega(&self) -> Self {
        if self.is_infinite() {
            self.clone()
        } else {
            let mut entries = self.entries.clone();
            entries.push((Ordinal::zero(), Multiplicity::Many));
            OmegaFamily { entries }
        }
    }

    /// The natural sum of the finite-multiplicity part of the family.
    fn finite_fold(&self) -> Ordinal {
        let mut acc = Ordinal::zero();
        for (v, m) in &self.entries {
            if let Multiplicity::Finite(k) = m {
                acc = acc.natural_sum(&v.scale_by_nat(*k));
            }
        }
        acc
    }

    /// The infinite natural sum: the supremum of the finite partial natural
    /// sums of the represented sequence.
    ///
    /// Computed in closed form: with `F` the natural sum of the finite part,
    /// the sup is `F` when every `Many` value is zero; otherwise, with `b`
    /// the largest leading exponent among nonzero `Many` values, the partial
    /// sums grow unboundedly in the `w^b` coefficient, so the sup is the
    /// part of `F` above `w^b` plus `w^(b+1)`.
    pub fn infinite_natural_sum(&self) -> Result<Ordinal, OrdinalError> {
        if !self.is_infinite() {
            return Err(OrdinalError::NotOmegaIndexed);
        }
        let finite_part = self.finite_fold();
        let max_leading = self
            .entries
            .iter()
            .filter(|(v, m)| *m == Multiplicity::Many && !v.is_zero())
            .filter_map(|(v, _)| v.leading_exponent())
            .max();
        match max_leading {
            None => Ok(finite_part),
            Some(b) => {
                let bump = b.successor();
                let head = finite_part.restrict_exponents_at_least(&bump);
                Ok(head.natural_sum(&Ordinal::omega_pow(bump)))
            }
        }
    }

    /// The n-th partial natural sum `S_n` of the canonical enumeration of the
    /// family: finite-multiplicity values first (in decreasing order), then
    /// the `Many` values cycled forever. Exhausted finite sequences are
    /// zero-padded.
    pub fn partial_sum(&self, n: usize) -> Ordinal {
        let mut acc = Ordinal::zero();
        let mut remaining = n;
        for (v, m) in &self.entries {
            if let Multiplicity::Finite(k) = m {
                let take = (*k as usize).min(remaining);
                acc = acc.natural_sum(&v.scale_by_nat(take as u64));
                remaining -= take;
                if remaining == 0 {
                    return acc;
                }
            }
        }
        let many: Vec<&Ordinal> = self
            .entries
            .iter()
            .filter(|(_, m)| *m == Multiplicity::Many)
            .map(|(v, _)| v)
            .collect();
        if many.is_empty() {
            return acc;
        }
        // Whole cycles at once, then the remainder one by one.
        let cycles = remaining / many.len();
        for v in &many {
            acc = acc.natural_sum(&v.scale_by_nat(cycles as u64));
        }
        for v in many.iter().take(remaining % many.len()) {
            acc = acc.natural_sum(v);
        }
        acc
    }
}

/// Draws a pseudo-random CNF ordinal with natural-number exponents below
/// `max_exp` and coefficients in `1..=max_coeff`. With `max_exp` 3 this
/// samples below `w^3`; larger values stay below `w^w`.
pub fn sample_ordinal<R: rand::Rng>(rng: &mut R, max_exp: u64, max_coeff: u64) -> Ordinal {
    let mut terms = Vec::new();
    for e in (0..max_exp).rev() {
        if rng.gen_bool(0.5) {
            terms.push((Ordinal::nat(e), rng.gen_range(1..=max_coeff)));
        }
    }
    Ordinal::from_terms(terms).expect("decreasing construction")
}
