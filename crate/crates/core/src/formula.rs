//! Negation-normal-form formula ASTs with countable connectives.
//!
//! Binary `And`/`Or` and countable `BigAnd`/`BigOr` are distinct node kinds
//! because their size rules differ (the binary rule `r` versus the family
//! rule `t` of a [`ComplexityMeasure`]). A countable connective carries
//! either an explicit finite list of members or a [`SymbolicFamily`]: a
//! description of an omega-indexed body by its member sizes, evaluable only
//! by specialized code in the `strings` module.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::ComplexityMeasure;
use crate::ordinal::{OmegaFamily, Ordinal};
use crate::strings::UPString;
use crate::structures::{ElemId, StructClass, Structure, StructureError, VarAssignment};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("formula is not in negation normal form")]
    NotNnf,
    #[error("variable x{0} is unbound")]
    UnboundVariable(usize),
    #[error("symbolic family cannot be evaluated here")]
    SymbolicNotEvaluable,
    #[error("no registered dual for symbolic family tag {0}")]
    NoSymbolicDual(String),
    #[error("countable connective with an empty body")]
    EmptyBody,
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// A purely relational vocabulary; arity 0 gives propositional symbols.
/// Equality is built in and never listed.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocabulary {
    relations: std::collections::BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary::default()
    }

    pub fn with(mut self, name: impl Into<String>, arity: usize) -> Self {
        self.relations.insert(name.into(), arity);
        self
    }

    /// The vocabulary `p0 .. p{n-1}` of 0-ary symbols.
    pub fn propositional(n: usize) -> Self {
        let mut v = Vocabulary::new();
        for i in 0..n {
            v.relations.insert(format!("p{i}"), 0);
        }
        v
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.relations.get(name).copied()
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, usize)> {
        self.relations.iter().map(|(n, a)| (n.as_str(), *a))
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

/// What an omega-indexed symbolic body means; only `strings` evaluates these.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SymbolicTag {
    /// One literal per position of an ultimately periodic string: `p_i` where
    /// the bit is 1 and its negation where the bit is 0.
    StringBits { string: UPString },
    /// One full string description per member of a countably infinite string
    /// property, named by the property id.
    PropertyMembers { property: String },
}

impl SymbolicTag {
    fn label(&self) -> String {
        match self {
            SymbolicTag::StringBits { string } => format!("string_bits {string}"),
            SymbolicTag::PropertyMembers { property } => format!("property_members {property}"),
        }
    }
}

/// An intensional omega-indexed connective body: a semantic tag plus the
/// data the generic operations need (member sizes as an [`OmegaFamily`] and
/// the supremum of member quantifier ranks).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct SymbolicFamily {
    pub tag: SymbolicTag,
    pub member_sizes: OmegaFamily,
    pub member_rank_sup: Ordinal,
}

/// The body of a countable connective.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Family {
    Explicit { members: Vec<Formula> },
    Symbolic { symbolic: SymbolicFamily },
}

/// A formula of first-order logic with countable conjunctions and
/// disjunctions, over a relational vocabulary with built-in equality.
/// `Not` is permitted only before conversion to negation normal form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Formula {
    Atom {
        rel: String,
        args: Vec<usize>,
    },
    NegAtom {
        rel: String,
        args: Vec<usize>,
    },
    Eq {
        left: usize,
        right: usize,
    },
    NegEq {
        left: usize,
        right: usize,
    },
    And {
        left: Box<Formula>,
        right: Box<Formula>,
    },
    Or {
        left: Box<Formula>,
        right: Box<Formula>,
    },
    BigAnd {
        #[serde(flatten)]
        body: Family,
    },
    BigOr {
        #[serde(flatten)]
        body: Family,
    },
    Exists {
        var: usize,
        body: Box<Formula>,
    },
    Forall {
        var: usize,
        body: Box<Formula>,
    },
    Not {
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn atom(rel: impl Into<String>, args: Vec<usize>) -> Self {
        Formula::Atom {
            rel: rel.into(),
            args,
        }
    }

    pub fn neg_atom(rel: impl Into<String>, args: Vec<usize>) -> Self {
        Formula::NegAtom {
            rel: rel.into(),
            args,
        }
    }

    /// A 0-ary atom.
    pub fn prop(name: impl Into<String>) -> Self {
        Formula::atom(name, Vec::new())
    }

    pub fn neg_prop(name: impl Into<String>) -> Self {
        Formula::neg_atom(name, Vec::new())
    }

    pub fn eq(left: usize, right: usize) -> Self {
        Formula::Eq { left, right }
    }

    pub fn neq(left: usize, right: usize) -> Self {
        Formula::NegEq { left, right }
    }

    pub fn and(left: Formula, right: Formula) -> Self {
        Formula::And {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn or(left: Formula, right: Formula) -> Self {
        Formula::Or {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn big_and(members: Vec<Formula>) -> Self {
        Formula::BigAnd {
            body: Family::Explicit { members },
        }
    }

    pub fn big_or(members: Vec<Formula>) -> Self {
        Formula::BigOr {
            body: Family::Explicit { members },
        }
    }

    pub fn big_and_symbolic(symbolic: SymbolicFamily) -> Self {
        Formula::BigAnd {
            body: Family::Symbolic { symbolic },
        }
    }

    pub fn big_or_symbolic(symbolic: SymbolicFamily) -> Self {
        Formula::BigOr {
            body: Family::Symbolic { symbolic },
        }
    }

    pub fn exists(var: usize, body: Formula) -> Self {
        Formula::Exists {
            var,
            body: Box::new(body),
        }
    }

    pub fn forall(var: usize, body: Formula) -> Self {
        Formula::Forall {
            var,
            body: Box::new(body),
        }
    }

    pub fn not(body: Formula) -> Self {
        Formula::Not {
            body: Box::new(body),
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(
            self,
            Formula::Atom { .. }
                | Formula::NegAtom { .. }
                | Formula::Eq { .. }
                | Formula::NegEq { .. }
        )
    }

    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::Not { .. } => false,
            f if f.is_literal() => true,
            Formula::And { left, right } | Formula::Or { left, right } => {
                left.is_nnf() && right.is_nnf()
            }
            Formula::BigAnd { body } | Formula::BigOr { body } => match body {
                Family::Explicit { members } => members.iter().all(|m| m.is_nnf()),
                Family::Symbolic { .. } => true,
            },
            Formula::Exists { body, .. } | Formula::Forall { body, .. } => body.is_nnf(),
            _ => unreachable!(),
        }
    }

    /// Conversion to negation normal form via double negation, De Morgan
    /// (finite and countable), and the quantifier dualities. Idempotent on
    /// NNF input. Fails on a symbolic family under a negation, since the
    /// built-in tags have no registered dual.
    pub fn to_nnf(&self) -> Result<Formula, FormulaError> {
        self.nnf_signed(false)
    }

    fn nnf_signed(&self, negate: bool) -> Result<Formula, FormulaError> {
        Ok(match self {
            Formula::Atom { rel, args } if negate => Formula::neg_atom(rel.clone(), args.clone()),
            Formula::NegAtom { rel, args } if negate => Formula::atom(rel.clone(), args.clone()),
            Formula::Eq { left, right } if negate => Formula::neq(*left, *right),
            Formula::NegEq { left, right } if negate => Formula::eq(*left, *right),
            f if f.is_literal() => f.clone(),
            Formula::And { left, right } => {
                let l = left.nnf_signed(negate)?;
                let r = right.nnf_signed(negate)?;
                if negate {
                    Formula::or(l, r)
                } else {
                    Formula::and(l, r)
                }
            }
            Formula::Or { left, right } => {
                let l = left.nnf_signed(negate)?;
                let r = right.nnf_signed(negate)?;
                if negate {
                    Formula::and(l, r)
                } else {
                    Formula::or(l, r)
                }
            }
            Formula::BigAnd { body } => Formula::nnf_family(body, negate, true)?,
            Formula::BigOr { body } => Formula::nnf_family(body, negate, false)?,
            Formula::Exists { var, body } => {
                let b = body.nnf_signed(negate)?;
                if negate {
                    Formula::forall(*var, b)
                } else {
                    Formula::exists(*var, b)
                }
            }
            Formula::Forall { var, body } => {
                let b = body.nnf_signed(negate)?;
                if negate {
                    Formula::exists(*var, b)
                } else {
                    Formula::forall(*var, b)
                }
            }
            Formula::Not { body } => body.nnf_signed(!negate)?,
            _ => unreachable!(),
        })
    }

    fn nnf_family(body: &Family, negate: bool, conj: bool) -> Result<Formula, FormulaError> {
        let make_and = conj != negate;
        match body {
            Family::Explicit { members } => {
                let members = members
                    .iter()
                    .map(|m| m.nnf_signed(negate))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(if make_and {
                    Formula::big_and(members)
                } else {
                    Formula::big_or(members)
                })
            }
            Family::Symbolic { symbolic } => {
                if negate {
                    Err(FormulaError::NoSymbolicDual(symbolic.tag.label()))
                } else if conj {
                    Ok(Formula::big_and_symbolic(symbolic.clone()))
                } else {
                    Ok(Formula::big_or_symbolic(symbolic.clone()))
                }
            }
        }
    }

    /// The set of free variable indices. Symbolic families are sentences.
    pub fn free_vars(&self) -> BTreeSet<usize> {
        match self {
            Formula::Atom { args, .. } | Formula::NegAtom { args, .. } => {
                args.iter().copied().collect()
            }
            Formula::Eq { left, right } | Formula::NegEq { left, right } => {
                [*left, *right].into_iter().collect()
            }
            Formula::And { left, right } | Formula::Or { left, right } => {
                let mut s = left.free_vars();
                s.extend(right.free_vars());
                s
            }
            Formula::BigAnd { body } | Formula::BigOr { body } => match body {
                Family::Explicit { members } => {
                    members.iter().flat_map(|m| m.free_vars()).collect()
                }
                Family::Symbolic { .. } => BTreeSet::new(),
            },
            Formula::Exists { var, body } | Formula::Forall { var, body } => {
                let mut s = body.free_vars();
                s.remove(var);
                s
            }
            Formula::Not { body } => body.free_vars(),
        }
    }

    /// Ordinal-valued quantifier rank: literals have rank 0, connectives take
    /// the supremum of their members' ranks, quantifiers add one. Symbolic
    /// families carry a declared rank supremum.
    pub fn quantifier_rank(&self) -> Ordinal {
        match self {
            f if f.is_literal() => Ordinal::zero(),
            Formula::And { left, right } | Formula::Or { left, right } => {
                left.quantifier_rank().max(right.quantifier_rank())
            }
            Formula::BigAnd { body } | Formula::BigOr { body } => match body {
                Family::Explicit { members } => members
                    .iter()
                    .map(|m| m.quantifier_rank())
                    .max()
                    .unwrap_or_else(Ordinal::zero),
                Family::Symbolic { symbolic } => symbolic.member_rank_sup.clone(),
            },
            Formula::Exists { body, .. } | Formula::Forall { body, .. } => {
                body.quantifier_rank().successor()
            }
            Formula::Not { body } => body.quantifier_rank(),
            _ => unreachable!(),
        }
    }

    /// Measure-parametric size: literals map to 1, `And`/`Or` apply the
    /// binary rule, quantifiers the quantifier rule, and countable
    /// connectives the family rule over the multiset of member values.
    /// Requires negation normal form.
    pub fn size(&self, measure: &ComplexityMeasure) -> Result<Ordinal, FormulaError> {
        match self {
            f if f.is_literal() => Ok(Ordinal::one()),
            Formula::And { left, right } | Formula::Or { left, right } => {
                Ok(measure.r(&left.size(measure)?, &right.size(measure)?))
            }
            Formula::BigAnd { body } | Formula::BigOr { body } => match body {
                Family::Explicit { members } => {
                    let sizes = members
                        .iter()
                        .map(|m| m.size(measure))
                        .collect::<Result<Vec<_>, _>>()?;
                    let family =
                        OmegaFamily::from_values(sizes).map_err(|_| FormulaError::EmptyBody)?;
                    Ok(measure.t(&family))
                }
                Family::Symbolic { symbolic } => Ok(measure.t(&symbolic.member_sizes)),
            },
            Formula::Exists { body, .. } | Formula::Forall { body, .. } => {
                Ok(measure.q(&body.size(measure)?))
            }
            Formula::Not { .. } => Err(FormulaError::NotNnf),
            _ => unreachable!(),
        }
    }

    /// Integer-valued size of a finite first-order formula: literals count 1,
    /// binary connectives add, quantifiers add one. `None` if the formula has
    /// countable connectives (this is the finitary recursion, kept separate
    /// from the ordinal pipeline on purpose).
    pub fn fo_size(&self) -> Option<u64> {
        match self {
            f if f.is_literal() => Some(1),
            Formula::And { left, right } | Formula::Or { left, right } => {
                Some(left.fo_size()? + right.fo_size()?)
            }
            Formula::Exists { body, .. } | Formula::Forall { body, .. } => Some(body.fo_size()? + 1),
            _ => None,
        }
    }

    /// Standard satisfaction on a finite structure. Explicit countable
    /// connectives evaluate as finite conjunction/disjunction of their listed
    /// members; symbolic families are rejected.
    pub fn evaluate(
        &self,
        structure: &Structure,
        assignment: &VarAssignment,
    ) -> Result<bool, FormulaError> {
        match self {
            Formula::Atom { rel, args } => {
                let elems = resolve(args, assignment)?;
                Ok(structure.holds(rel, &elems)?)
            }
            Formula::NegAtom { rel, args } => {
                let elems = resolve(args, assignment)?;
                Ok(!structure.holds(rel, &elems)?)
            }
            Formula::Eq { left, right } => {
                Ok(lookup(*left, assignment)? == lookup(*right, assignment)?)
            }
            Formula::NegEq { left, right } => {
                Ok(lookup(*left, assignment)? != lookup(*right, assignment)?)
            }
            Formula::And { left, right } => {
                Ok(left.evaluate(structure, assignment)? && right.evaluate(structure, assignment)?)
            }
            Formula::Or { left, right } => {
                Ok(left.evaluate(structure, assignment)? || right.evaluate(structure, assignment)?)
            }
            Formula::BigAnd { body } => match body {
                Family::Explicit { members } => {
                    for m in members {
                        if !m.evaluate(structure, assignment)? {
                            return Ok(false);
                        }
                    }
                    Ok(true)
                }
                Family::Symbolic { .. } => Err(FormulaError::SymbolicNotEvaluable),
            },
            Formula::BigOr { body } => match body {
                Family::Explicit { members } => {
                    for m in members {
                        if m.evaluate(structure, assignment)? {
                            return Ok(true);
                        }
                    }
                    Ok(false)
                }
                Family::Symbolic { .. } => Err(FormulaError::SymbolicNotEvaluable),
            },
            Formula::Exists { var, body } => {
                for e in structure.universe() {
                    if body.evaluate(structure, &assignment.bind(*var, *e))? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Forall { var, body } => {
                for e in structure.universe() {
                    if !body.evaluate(structure, &assignment.bind(*var, *e))? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Not { body } => Ok(!body.evaluate(structure, assignment)?),
        }
    }

    /// Whether the formula is true in every member of `a` and false in every
    /// member of `b`.
    pub fn separates(&self, a: &StructClass, b: &StructClass) -> Result<bool, FormulaError> {
        for m in a.members() {
            if !self.evaluate(&m.structure, &m.assignment)? {
                return Ok(false);
            }
        }
        for m in b.members() {
            if self.evaluate(&m.structure, &m.assignment)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn lookup(var: usize, assignment: &VarAssignment) -> Result<ElemId, FormulaError> {
    assignment
        .get(var)
        .ok_or(FormulaError::UnboundVariable(var))
}

fn resolve(args: &[usize], assignment: &VarAssignment) -> Result<Vec<ElemId>, FormulaError> {
    args.iter().map(|v| lookup(*v, assignment)).collect()
}

// ---------------------------------------------------------------------------
// Compact text syntax.
//
//   E x0. (P(x0) & Q(x0))      quantifiers bind to the end of the formula
//   ~P(x0), x0 = x1, x0 != x1  literals ('~' on a literal folds into it)
//   f & g, f | g               '&' binds tighter than '|'
//   &[f, g, h] / |[f, g, h]    explicit countable connectives
//
// Symbolic families have no text form; they print as `&[<...>]` and only
// round-trip through JSON.
// ---------------------------------------------------------------------------

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom { rel, args } => write_app(f, rel, args),
            Formula::NegAtom { rel, args } => {
                write!(f, "~")?;
                write_app(f, rel, args)
            }
            Formula::Eq { left, right } => write!(f, "x{left} = x{right}"),
            Formula::NegEq { left, right } => write!(f, "x{left} != x{right}"),
            Formula::And { left, right } => {
                write!(f, "(")?;
                write_operand(f, left)?;
                write!(f, " & ")?;
                write_operand(f, right)?;
                write!(f, ")")
            }
            Formula::Or { left, right } => {
                write!(f, "(")?;
                write_operand(f, left)?;
                write!(f, " | ")?;
                write_operand(f, right)?;
                write!(f, ")")
            }
            Formula::BigAnd { body } => write_family(f, body, '&'),
            Formula::BigOr { body } => write_family(f, body, '|'),
            Formula::Exists { var, body } => write!(f, "E x{var}. {body}"),
            Formula::Forall { var, body } => write!(f, "A x{var}. {body}"),
            Formula::Not { body } => write!(f, "~({body})"),
        }
    }
}

// Quantifiers bind to the end of the formula, so they are parenthesized
// when they appear as binary operands.
fn write_operand(f: &mut fmt::Formatter<'_>, operand: &Formula) -> fmt::Result {
    if matches!(operand, Formula::Exists { .. } | Formula::Forall { .. }) {
        write!(f, "({operand})")
    } else {
        write!(f, "{operand}")
    }
}

fn write_app(f: &mut fmt::Formatter<'_>, rel: &str, args: &[usize]) -> fmt::Result {
    write!(f, "{rel}")?;
    if !args.is_empty() {
        write!(f, "(")?;
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "x{a}")?;
        }
        write!(f, ")")?;
    }
    Ok(())
}

fn write_family(f: &mut fmt::Formatter<'_>, body: &Family, sym: char) -> fmt::Result {
    match body {
        Family::Explicit { members } => {
            write!(f, "{sym}[")?;
            for (i, m) in members.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{m}")?;
            }
            write!(f, "]")
        }
        Family::Symbolic { symbolic } => write!(f, "{sym}[<{}>]", symbolic.tag.label()),
    }
}

impl FromStr for Formula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = TextParser {
            bytes: s.as_bytes(),
            pos: 0,
        };
        let f = p.formula()?;
        p.skip_ws();
        if p.pos < p.bytes.len() {
            return p.err("trailing input");
        }
        Ok(f)
    }
}

struct TextParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> TextParser<'a> {
    fn err<T>(&self, msg: &str) -> Result<T, FormulaError> {
        Err(FormulaError::Parse {
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

    fn peek2(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos + 1).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, FormulaError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an identifier");
        }
        Ok(String::from_utf8(self.bytes[start..self.pos].to_vec()).unwrap())
    }

    fn var(&mut self) -> Result<usize, FormulaError> {
        let name = self.ident()?;
        match name.strip_prefix('x').and_then(|d| d.parse().ok()) {
            Some(v) => Ok(v),
            None => self.err("expected a variable like x0"),
        }
    }

    fn formula(&mut self) -> Result<Formula, FormulaError> {
        // Quantifiers bind to the end of the formula.
        if matches!(self.peek(), Some(b'E') | Some(b'A'))
            && self.peek2().is_some_and(|b| b.is_ascii_whitespace() || b == b'x')
        {
            let q = self.peek().unwrap();
            self.pos += 1;
            let var = self.var()?;
            if !self.eat(b'.') {
                return self.err("expected '.' after quantified variable");
            }
            let body = self.formula()?;
            return Ok(if q == b'E' {
                Formula::exists(var, body)
            } else {
                Formula::forall(var, body)
            });
        }
        self.disjunction()
    }

    fn disjunction(&mut self) -> Result<Formula, FormulaError> {
        let mut acc = self.conjunction()?;
        while self.peek() == Some(b'|') && self.peek2() != Some(b'[') {
            self.pos += 1;
            let rhs = self.conjunction()?;
            acc = Formula::or(acc, rhs);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<Formula, FormulaError> {
        let mut acc = self.unary()?;
        while self.peek() == Some(b'&') && self.peek2() != Some(b'[') {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = Formula::and(acc, rhs);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        if self.eat(b'~') {
            // `~(...)` stays a Not node; a bare negated literal folds into
            // its dual, so literal text round-trips in NNF.
            if self.peek() == Some(b'(') {
                return Ok(Formula::not(self.primary()?));
            }
            let inner = self.unary()?;
            return Ok(match inner {
                Formula::Atom { rel, args } => Formula::neg_atom(rel, args),
                Formula::NegAtom { rel, args } => Formula::atom(rel, args),
                Formula::Eq { left, right } => Formula::neq(left, right),
                Formula::NegEq { left, right } => Formula::eq(left, right),
                other => Formula::not(other),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula, FormulaError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let f = self.formula()?;
                if !self.eat(b')') {
                    return self.err("expected ')'");
                }
                Ok(f)
            }
            Some(b'&') | Some(b'|') => {
                let conj = self.peek() == Some(b'&');
                self.pos += 1;
                if !self.eat(b'[') {
                    return self.err("expected '[' after connective");
                }
                let mut members = Vec::new();
                if !self.eat(b']') {
                    loop {
                        members.push(self.formula()?);
                        if self.eat(b']') {
                            break;
                        }
                        if !self.eat(b',') {
                            return self.err("expected ',' or ']'");
                        }
                    }
                }
                Ok(if conj {
                    Formula::big_and(members)
                } else {
                    Formula::big_or(members)
                })
            }
            Some(b) if b.is_ascii_alphanumeric() || b == b'_' => self.atom_or_eq(),
            _ => self.err("expected a formula"),
        }
    }

    fn atom_or_eq(&mut self) -> Result<Formula, FormulaError> {
        let save = self.pos;
        let name = self.ident()?;
        if let Some(var) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if self.peek() == Some(b'=') {
                self.pos += 1;
                let rhs = self.var()?;
                return Ok(Formula::eq(var, rhs));
            }
            if self.peek() == Some(b'!') && self.peek2() == Some(b'=') {
                self.pos += 2;
                let rhs = self.var()?;
                return Ok(Formula::neq(var, rhs));
            }
            // Bare `xN` not followed by an equality is not a formula.
            self.pos = save;
            return self.err("a variable must appear in an equality");
        }
        if self.eat(b'(') {
            let mut args = Vec::new();
            if !self.eat(b')') {
                loop {
                    args.push(self.var()?);
                    if self.eat(b')') {
                        break;
                    }
                    if !self.eat(b',') {
                        return self.err("expected ',' or ')'");
                    }
                }
            }
            return Ok(Formula::atom(name, args));
        }
        Ok(Formula::prop(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn fml(s: &str) -> Formula {
        s.parse().unwrap()
    }

    #[test]
    fn nnf_de_morgan() {
        let f = Formula::not(Formula::and(
            Formula::atom("P", vec![0]),
            Formula::atom("Q", vec![0]),
        ));
        assert_eq!(
            f.to_nnf().unwrap(),
            Formula::or(Formula::neg_atom("P", vec![0]), Formula::neg_atom("Q", vec![0]))
        );
    }

    #[test]
    fn nnf_quantifier_dual() {
        let f = Formula::not(Formula::exists(0, Formula::atom("P", vec![0])));
        assert_eq!(
            f.to_nnf().unwrap(),
            Formula::forall(0, Formula::neg_atom("P", vec![0]))
        );
    }

    #[test]
    fn nnf_countable_de_morgan() {
        let f = Formula::not(Formula::big_and(vec![
            Formula::prop("p0"),
            Formula::prop("p1"),
            Formula::prop("p2"),
        ]));
        assert_eq!(
            f.to_nnf().unwrap(),
            Formula::big_or(vec![
                Formula::neg_prop("p0"),
                Formula::neg_prop("p1"),
                Formula::neg_prop("p2"),
            ])
        );
    }

    #[test]
    fn nnf_idempotent_and_rejects_symbolic_negation() {
        let f = fml("E x0. (P(x0) & ~Q(x0))");
        assert!(f.is_nnf());
        assert_eq!(f.to_nnf().unwrap(), f);

        let sym = SymbolicFamily {
            tag: SymbolicTag::PropertyMembers {
                property: "fin-ones".into(),
            },
            member_sizes: OmegaFamily::constant_many(Ordinal::omega()),
            member_rank_sup: Ordinal::zero(),
        };
        let neg = Formula::not(Formula::big_or_symbolic(sym));
        assert!(matches!(
            neg.to_nnf(),
            Err(FormulaError::NoSymbolicDual(_))
        ));
    }

    #[test]
    fn free_vars_examples() {
        assert_eq!(
            Formula::atom("P", vec![2]).free_vars(),
            [2].into_iter().collect()
        );
        assert!(Formula::exists(2, Formula::atom("P", vec![2]))
            .free_vars()
            .is_empty());
        let f = Formula::and(
            Formula::eq(0, 1),
            Formula::exists(1, Formula::atom("P", vec![1])),
        );
        assert_eq!(f.free_vars(), [0, 1].into_iter().collect());
    }

    #[test]
    fn quantifier_rank_examples() {
        assert_eq!(
            fml("p0 & ~p1").quantifier_rank(),
            Ordinal::zero()
        );
        assert_eq!(
            fml("E x0. A x1. x0 = x1").quantifier_rank(),
            Ordinal::nat(2)
        );
        let member = Formula::exists(0, Formula::atom("P", vec![0]));
        let rep = Formula::big_and(vec![member.clone(), member.clone(), member]);
        assert_eq!(rep.quantifier_rank(), Ordinal::one());
    }

    #[test]
    fn size_examples() {
        let size = ComplexityMeasure::builtin("size").unwrap();
        assert_eq!(
            Formula::atom("P", vec![0]).size(&size).unwrap(),
            Ordinal::one()
        );
        assert_eq!(
            fml("E x0. (P(x0) & Q(x0))").size(&size).unwrap(),
            Ordinal::nat(3)
        );
        let theta_like = Formula::big_and_symbolic(SymbolicFamily {
            tag: SymbolicTag::StringBits {
                string: "|0".parse().unwrap(),
            },
            member_sizes: OmegaFamily::constant_many(Ordinal::one()),
            member_rank_sup: Ordinal::zero(),
        });
        assert_eq!(theta_like.size(&size).unwrap(), Ordinal::omega());
        let c1 = ComplexityMeasure::builtin("c1").unwrap();
        assert_eq!(theta_like.size(&c1).unwrap(), Ordinal::nat(2));
    }

    #[test]
    fn evaluate_examples() {
        let s10 = Structure::from_bits(0, "10").unwrap();
        assert!(Formula::prop("p0")
            .evaluate(&s10, &VarAssignment::empty())
            .unwrap());

        let vocab = Vocabulary::new().with("P", 1);
        let no_p = Structure::new(
            0,
            vocab,
            [0, 1].into(),
            std::collections::BTreeMap::new(),
        )
        .unwrap();
        assert!(!Formula::exists(0, Formula::atom("P", vec![0]))
            .evaluate(&no_p, &VarAssignment::empty())
            .unwrap());

        let two = Structure::pure_set(0, 2);
        assert!(fml("E x0. E x1. x0 != x1")
            .evaluate(&two, &VarAssignment::empty())
            .unwrap());
    }

    #[test]
    fn evaluate_errors() {
        let s = Structure::pure_set(0, 2);
        assert_eq!(
            Formula::eq(0, 1).evaluate(&s, &VarAssignment::empty()),
            Err(FormulaError::UnboundVariable(0))
        );
    }

    #[test]
    fn separates_examples() {
        let a = StructClass::from_bit_strings(&["10"]).unwrap();
        let b = StructClass::from_bit_strings(&["01"]).unwrap();
        assert!(Formula::prop("p0").separates(&a, &b).unwrap());

        let mixed = StructClass::from_bit_strings(&["10", "01"]).unwrap();
        let zero = StructClass::from_bit_strings(&["00"]).unwrap();
        assert!(!Formula::prop("p0").separates(&mixed, &zero).unwrap());

        assert!(!Formula::prop("p0").separates(&a, &a).unwrap());
    }

    #[test]
    fn text_round_trip() {
        for s in [
            "p0",
            "~p0",
            "P(x0,x1)",
            "x0 = x1",
            "x0 != x2",
            "(p0 & ~p1)",
            "(p0 | (p1 & p2))",
            "E x0. (P(x0) & Q(x0))",
            "A x1. E x0. x0 != x1",
            "&[p0, ~p1, (p0 | p1)]",
            "|[p0, p1]",
        ] {
            let f = fml(s);
            assert_eq!(fml(&f.to_string()), f, "round trip for {s}");
        }
    }

    #[test]
    fn json_schema_shape() {
        let f = fml("E x0. (P(x0) & ~Q(x0))");
        let json = serde_json::to_value(&f).unwrap();
        assert_eq!(json["kind"], "exists");
        assert_eq!(json["body"]["kind"], "and");
        assert_eq!(json["body"]["right"]["kind"], "negatom");
        let back: Formula = serde_json::from_value(json).unwrap();
        assert_eq!(back, f);

        let big = Formula::big_and(vec![Formula::prop("p0")]);
        let json = serde_json::to_value(&big).unwrap();
        assert_eq!(json["kind"], "bigand");
        assert_eq!(json["members"][0]["kind"], "atom");
        let back: Formula = serde_json::from_value(json).unwrap();
        assert_eq!(back, big);

        let sym = Formula::big_or_symbolic(SymbolicFamily {
            tag: SymbolicTag::PropertyMembers {
                property: "odd-ones".into(),
            },
            member_sizes: OmegaFamily::constant_many(Ordinal::omega()),
            member_rank_sup: Ordinal::zero(),
        });
        let json = serde_json::to_value(&sym).unwrap();
        assert_eq!(json["kind"], "bigor");
        assert_eq!(json["symbolic"]["tag"]["family"], "property_members");
        let back: Formula = serde_json::from_value(json).unwrap();
        assert_eq!(back, sym);
    }

    #[test]
    fn nnf_preserves_evaluation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let vocab = Vocabulary::new().with("P", 1).with("E", 2);
        let structures: Vec<Arc<Structure>> = (0..6)
            .map(|i| Arc::new(random_structure(&mut rng, i, &vocab)))
            .collect();
        for _ in 0..300 {
            let f = random_formula(&mut rng, 3, 2);
            let nnf = f.to_nnf().unwrap();
            assert!(nnf.is_nnf());
            for s in &structures {
                let a = VarAssignment::from_pairs(
                    (0..2).map(|v| (v, rng.gen_range(0..s.universe().len()) as ElemId)),
                );
                assert_eq!(
                    f.evaluate(s, &a).unwrap(),
                    nnf.evaluate(s, &a).unwrap(),
                    "formula {f} vs nnf {nnf}"
                );
            }
        }
    }

    fn random_structure(
        rng: &mut impl rand::Rng,
        id: u32,
        vocab: &Vocabulary,
    ) -> Structure {
        let n = rng.gen_range(1..=3u32);
        let universe: std::collections::BTreeSet<ElemId> = (0..n).collect();
        let mut interp = std::collections::BTreeMap::new();
        for (rel, arity) in vocab.relations() {
            let mut tuples = std::collections::BTreeSet::new();
            let all = var_tuples_elems(&universe.iter().copied().collect::<Vec<_>>(), arity);
            for t in all {
                if rng.gen_bool(0.5) {
                    tuples.insert(t);
                }
            }
            interp.insert(rel.to_string(), tuples);
        }
        Structure::new(id, vocab.clone(), universe, interp).unwrap()
    }

    fn var_tuples_elems(elems: &[ElemId], arity: usize) -> Vec<Vec<ElemId>> {
        if arity == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for shorter in var_tuples_elems(elems, arity - 1) {
            for e in elems {
                let mut t = shorter.clone();
                t.push(*e);
                out.push(t);
            }
        }
        out
    }

    fn random_formula(rng: &mut impl rand::Rng, depth: usize, vars: usize) -> Formula {
        let leaf = depth == 0 || rng.gen_bool(0.3);
        if leaf {
            return match rng.gen_range(0..4) {
                0 => Formula::atom("P", vec![rng.gen_range(0..vars)]),
                1 => Formula::atom("E", vec![rng.gen_range(0..vars), rng.gen_range(0..vars)]),
                2 => Formula::eq(rng.gen_range(0..vars), rng.gen_range(0..vars)),
                _ => Formula::neq(rng.gen_range(0..vars), rng.gen_range(0..vars)),
            };
        }
        match rng.gen_range(0..6) {
            0 => Formula::and(
                random_formula(rng, depth - 1, vars),
                random_formula(rng, depth - 1, vars),
            ),
            1 => Formula::or(
                random_formula(rng, depth - 1, vars),
                random_formula(rng, depth - 1, vars),
            ),
            2 => Formula::not(random_formula(rng, depth - 1, vars)),
            3 => Formula::exists(rng.gen_range(0..vars), random_formula(rng, depth - 1, vars)),
            4 => Formula::forall(rng.gen_range(0..vars), random_formula(rng, depth - 1, vars)),
            _ => Formula::big_and(
                (0..rng.gen_range(1..4))
                    .map(|_| random_formula(rng, depth - 1, vars))
                    .collect(),
            ),
        }
    }
}
