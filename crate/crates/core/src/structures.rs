//! Finite relational structures, variable assignments, and tagged classes.
//!
//! A [`StructClass`] is a finite list of (structure, assignment) pairs over a
//! shared vocabulary and assignment domain. Classes are kept in a canonical
//! form (members sorted and deduplicated) so they can serve as memoization
//! keys in the game solver.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Formula, Vocabulary};

pub type ElemId = u32;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("relation {relation} has arity {expected}, got a tuple of length {got}")]
    ArityMismatch {
        relation: String,
        expected: usize,
        got: usize,
    },
    #[error("element {0} is not in the universe")]
    ElementOutsideUniverse(ElemId),
    #[error("class members must share one vocabulary")]
    MixedVocabularies,
    #[error("class members must share one assignment domain")]
    MixedDomains,
    #[error("structure id {0} is used for two different structures")]
    InconsistentStructureId(u32),
    #[error("choice function misses member {0}")]
    MissingChoice(usize),
    #[error("choice function refers to member {0} outside the class")]
    ChoiceOutsideClass(usize),
    #[error("structure {0} has an empty universe")]
    EmptyUniverse(u32),
    #[error("classes do not share vocabulary and domain")]
    ClassSignatureMismatch,
    #[error("bit strings in a class must have equal length")]
    RaggedBitStrings,
    #[error("invalid bit character {0:?}")]
    BadBit(char),
}

/// A finite relational structure with a stable id.
///
/// Ids make choice functions and traces serializable; two members of one
/// class with the same id must be the same structure.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Structure {
    id: u32,
    vocabulary: Vocabulary,
    universe: BTreeSet<ElemId>,
    interp: BTreeMap<String, BTreeSet<Vec<ElemId>>>,
}

impl Structure {
    pub fn new(
        id: u32,
        vocabulary: Vocabulary,
        universe: BTreeSet<ElemId>,
        interp: BTreeMap<String, BTreeSet<Vec<ElemId>>>,
    ) -> Result<Self, StructureError> {
        let mut full: BTreeMap<String, BTreeSet<Vec<ElemId>>> = vocabulary
            .relations()
            .map(|(name, _)| (name.to_string(), BTreeSet::new()))
            .collect();
        for (name, tuples) in interp {
            let arity = vocabulary
                .arity(&name)
                .ok_or_else(|| StructureError::UnknownRelation(name.clone()))?;
            for tuple in &tuples {
                if tuple.len() != arity {
                    return Err(StructureError::ArityMismatch {
                        relation: name.clone(),
                        expected: arity,
                        got: tuple.len(),
                    });
                }
                for e in tuple {
                    if !universe.contains(e) {
                        return Err(StructureError::ElementOutsideUniverse(*e));
                    }
                }
            }
            full.insert(name, tuples);
        }
        Ok(Structure {
            id,
            vocabulary,
            universe,
            interp: full,
        })
    }

    /// A structure with `n` elements and no relations.
    pub fn pure_set(id: u32, n: u32) -> Self {
        Structure {
            id,
            vocabulary: Vocabulary::new(),
            universe: (0..n).collect(),
            interp: BTreeMap::new(),
        }
    }

    /// Imports a binary string of length L as a propositional structure over
    /// 0-ary relations `p0 .. p{L-1}` (true exactly at the 1-bits). The
    /// universe is empty: propositional play has no supplementing moves.
    pub fn from_bits(id: u32, bits: &str) -> Result<Self, StructureError> {
        let vocabulary = Vocabulary::propositional(bits.chars().count());
        let mut interp = BTreeMap::new();
        for (i, c) in bits.chars().enumerate() {
            let truth: BTreeSet<Vec<ElemId>> = match c {
                '1' => [Vec::new()].into_iter().collect(),
                '0' => BTreeSet::new(),
                other => return Err(StructureError::BadBit(other)),
            };
            interp.insert(format!("p{i}"), truth);
        }
        Ok(Structure {
            id,
            vocabulary,
            universe: BTreeSet::new(),
            interp,
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn universe(&self) -> &BTreeSet<ElemId> {
        &self.universe
    }

    /// Whether the relation holds of the tuple.
    pub fn holds(&self, rel: &str, args: &[ElemId]) -> Result<bool, StructureError> {
        let arity = self
            .vocabulary
            .arity(rel)
            .ok_or_else(|| StructureError::UnknownRelation(rel.to_string()))?;
        if args.len() != arity {
            return Err(StructureError::ArityMismatch {
                relation: rel.to_string(),
                expected: arity,
                got: args.len(),
            });
        }
        Ok(self
            .interp
            .get(rel)
            .is_some_and(|tuples| tuples.contains(args)))
    }
}

/// A finite partial mapping from variable indices to elements.
///
/// Serialized as `{"<var>": elem}` with string keys, which survives serde's
/// internal buffering inside tagged enums (JSON map keys must be strings).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct VarAssignment(BTreeMap<usize, ElemId>);

impl Serialize for VarAssignment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_map(self.0.iter().map(|(k, v)| (k.to_string(), *v)))
    }
}

impl<'de> Deserialize<'de> for VarAssignment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, ElemId>::deserialize(deserializer)?;
        let mut map = BTreeMap::new();
        for (k, v) in raw {
            let var = k
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("bad variable index {k:?}")))?;
            map.insert(var, v);
        }
        Ok(VarAssignment(map))
    }
}

impl VarAssignment {
    pub fn empty() -> Self {
        VarAssignment::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, ElemId)>) -> Self {
        VarAssignment(pairs.into_iter().collect())
    }

    /// The assignment that maps `var` to `elem` and agrees with `self`
    /// otherwise.
    pub fn bind(&self, var: usize, elem: ElemId) -> Self {
        let mut map = self.0.clone();
        map.insert(var, elem);
        VarAssignment(map)
    }

    pub fn get(&self, var: usize) -> Option<ElemId> {
        self.0.get(&var).copied()
    }

    pub fn domain(&self) -> BTreeSet<usize> {
        self.0.keys().copied().collect()
    }

    pub fn bindings(&self) -> impl Iterator<Item = (usize, ElemId)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }
}

/// One tagged structure of a class.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct ClassMember {
    pub structure: Arc<Structure>,
    pub assignment: VarAssignment,
}

// Members order by (structure id, assignment) first: within a class, ids
// determine structures, so the content comparison almost never runs.
impl Ord for ClassMember {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.structure
            .id
            .cmp(&other.structure.id)
            .then_with(|| self.assignment.cmp(&other.assignment))
            .then_with(|| self.structure.cmp(&other.structure))
    }
}

impl PartialOrd for ClassMember {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A finite class of (structure, assignment) pairs sharing a vocabulary and
/// an assignment domain. Members are sorted and deduplicated, so equal
/// classes compare equal and hash alike.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct StructClass {
    vocabulary: Vocabulary,
    domain: BTreeSet<usize>,
    members: Vec<ClassMember>,
}

impl StructClass {
    pub fn new(
        vocabulary: Vocabulary,
        domain: BTreeSet<usize>,
        members: Vec<(Arc<Structure>, VarAssignment)>,
    ) -> Result<Self, StructureError> {
        let mut seen_ids: BTreeMap<u32, Arc<Structure>> = BTreeMap::new();
        for (s, a) in &members {
            if *s.vocabulary() != vocabulary {
                return Err(StructureError::MixedVocabularies);
            }
            if a.domain() != domain {
                return Err(StructureError::MixedDomains);
            }
            for (_, e) in a.bindings() {
                if !s.universe.contains(&e) {
                    return Err(StructureError::ElementOutsideUniverse(e));
                }
            }
            match seen_ids.get(&s.id) {
                Some(prev) if **prev != **s => {
                    return Err(StructureError::InconsistentStructureId(s.id))
                }
                _ => {
                    seen_ids.insert(s.id, s.clone());
                }
            }
        }
        let mut members: Vec<ClassMember> = members
            .into_iter()
            .map(|(structure, assignment)| ClassMember {
                structure,
                assignment,
            })
            .collect();
        members.sort();
        members.dedup();
        Ok(StructClass {
            vocabulary,
            domain,
            members,
        })
    }

    /// Infers vocabulary and domain from the first member.
    pub fn from_members(
        members: Vec<(Arc<Structure>, VarAssignment)>,
    ) -> Result<Self, StructureError> {
        let (vocabulary, domain) = match members.first() {
            Some((s, a)) => (s.vocabulary().clone(), a.domain()),
            None => (Vocabulary::new(), BTreeSet::new()),
        };
        StructClass::new(vocabulary, domain, members)
    }

    /// A class of propositional string structures with empty assignments.
    pub fn from_bit_strings<S: AsRef<str>>(strings: &[S]) -> Result<Self, StructureError> {
        let len = strings.first().map(|s| s.as_ref().chars().count());
        let mut members = Vec::new();
        for (i, s) in strings.iter().enumerate() {
            if Some(s.as_ref().chars().count()) != len {
                return Err(StructureError::RaggedBitStrings);
            }
            members.push((
                Arc::new(Structure::from_bits(i as u32, s.as_ref())?),
                VarAssignment::empty(),
            ));
        }
        let vocabulary = Vocabulary::propositional(len.unwrap_or(0));
        StructClass::new(vocabulary, BTreeSet::new(), members)
    }

    pub fn empty(vocabulary: Vocabulary, domain: BTreeSet<usize>) -> Self {
        StructClass {
            vocabulary,
            domain,
            members: Vec::new(),
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn domain(&self) -> &BTreeSet<usize> {
        &self.domain
    }

    pub fn members(&self) -> &[ClassMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn same_signature(&self, other: &StructClass) -> bool {
        self.vocabulary == other.vocabulary && self.domain == other.domain
    }

    /// The subclass of members at the selected indices. Canonical order is
    /// preserved, so no revalidation is needed.
    pub fn subclass(&self, keep: impl Fn(usize) -> bool) -> StructClass {
        StructClass {
            vocabulary: self.vocabulary.clone(),
            domain: self.domain.clone(),
            members: self
                .members
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, m)| m.clone())
                .collect(),
        }
    }

    pub fn is_subclass_of(&self, other: &StructClass) -> bool {
        self.same_signature(other)
            && self
                .members
                .iter()
                .all(|m| other.members.binary_search(m).is_ok())
    }

    /// Whether the parts cover this class: each part is a subclass and every
    /// member occurs in some part. Overlap is allowed.
    pub fn is_covered_by<'a>(&self, parts: impl IntoIterator<Item = &'a StructClass>) -> bool {
        let mut seen: BTreeSet<&ClassMember> = BTreeSet::new();
        for part in parts {
            if !part.is_subclass_of(self) {
                return false;
            }
            seen.extend(part.members.iter());
        }
        self.members.iter().all(|m| seen.contains(m))
    }

    /// The class `{(A, a(F(A,a)/j)) | (A, a) in self}` for a choice function
    /// `F` given as a map from member index (in canonical order) to element.
    pub fn extend_with_choice(
        &self,
        j: usize,
        choice: &BTreeMap<usize, ElemId>,
    ) -> Result<StructClass, StructureError> {
        for idx in choice.keys() {
            if *idx >= self.members.len() {
                return Err(StructureError::ChoiceOutsideClass(*idx));
            }
        }
        let mut members = Vec::with_capacity(self.members.len());
        for (idx, m) in self.members.iter().enumerate() {
            let elem = *choice.get(&idx).ok_or(StructureError::MissingChoice(idx))?;
            if !m.structure.universe.contains(&elem) {
                return Err(StructureError::ElementOutsideUniverse(elem));
            }
            members.push(ClassMember {
                structure: m.structure.clone(),
                assignment: m.assignment.bind(j, elem),
            });
        }
        Ok(self.rebound(j, members))
    }

    /// The class `{(A, a(a'/j)) | (A, a) in self, a' in A}`.
    pub fn extend_with_star(&self, j: usize) -> Result<StructClass, StructureError> {
        let mut members = Vec::new();
        for m in &self.members {
            if m.structure.universe.is_empty() {
                return Err(StructureError::EmptyUniverse(m.structure.id));
            }
            for e in &m.structure.universe {
                members.push(ClassMember {
                    structure: m.structure.clone(),
                    assignment: m.assignment.bind(j, *e),
                });
            }
        }
        Ok(self.rebound(j, members))
    }

    // Rebinding preserves every class invariant, so skip revalidation.
    fn rebound(&self, j: usize, mut members: Vec<ClassMember>) -> StructClass {
        members.sort();
        members.dedup();
        let mut domain = self.domain.clone();
        domain.insert(j);
        StructClass {
            vocabulary: self.vocabulary.clone(),
            domain,
            members,
        }
    }
}

/// Checks whether the given pairing is a partial isomorphism: a well-defined
/// injective map that preserves and reflects every relation (and equality)
/// on its domain.
pub fn partial_iso_check(a: &Structure, b: &Structure, pairs: &[(ElemId, ElemId)]) -> bool {
    let mut fwd: BTreeMap<ElemId, ElemId> = BTreeMap::new();
    let mut bwd: BTreeMap<ElemId, ElemId> = BTreeMap::new();
    for (x, y) in pairs {
        if !a.universe.contains(x) || !b.universe.contains(y) {
            return false;
        }
        if *fwd.entry(*x).or_insert(*y) != *y || *bwd.entry(*y).or_insert(*x) != *x {
            return false;
        }
    }
    let dom: Vec<ElemId> = fwd.keys().copied().collect();
    for (rel, arity) in a.vocabulary.relations() {
        let mut tuple = vec![0; arity];
        if !tuples_preserved(a, b, &fwd, &dom, rel, &mut tuple, 0) {
            return false;
        }
    }
    true
}

fn tuples_preserved(
    a: &Structure,
    b: &Structure,
    fwd: &BTreeMap<ElemId, ElemId>,
    dom: &[ElemId],
    rel: &str,
    tuple: &mut Vec<ElemId>,
    depth: usize,
) -> bool {
    if depth == tuple.len() {
        let image: Vec<ElemId> = tuple.iter().map(|e| fwd[e]).collect();
        let in_a = a.interp.get(rel).is_some_and(|t| t.contains(tuple));
        let in_b = b.interp.get(rel).is_some_and(|t| t.contains(&image));
        return in_a == in_b;
    }
    dom.iter().all(|e| {
        tuple[depth] = *e;
        tuples_preserved(a, b, fwd, dom, rel, tuple, depth + 1)
    })
}

/// All atomic and negated atomic formulas over the given domain variables,
/// in a fixed deterministic order: relation applications (sorted by relation
/// name, argument tuples lexicographic, positive before negative), then
/// equalities `i = j` with `i <= j`.
pub fn literals_over(vocabulary: &Vocabulary, domain: &BTreeSet<usize>) -> Vec<Formula> {
    let vars: Vec<usize> = domain.iter().copied().collect();
    let mut out = Vec::new();
    for (rel, arity) in vocabulary.relations() {
        for args in var_tuples(&vars, arity) {
            out.push(Formula::atom(rel, args.clone()));
            out.push(Formula::neg_atom(rel, args));
        }
    }
    for (pos, i) in vars.iter().enumerate() {
        for j in &vars[pos..] {
            out.push(Formula::eq(*i, *j));
            out.push(Formula::neq(*i, *j));
        }
    }
    out
}

fn var_tuples(vars: &[usize], arity: usize) -> Vec<Vec<usize>> {
    if arity == 0 {
        return vec![Vec::new()];
    }
    if vars.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for shorter in var_tuples(vars, arity - 1) {
        for v in vars {
            let mut t = shorter.clone();
            t.push(*v);
            out.push(t);
        }
    }
    out
}

/// Searches for an atomic or negated atomic formula over the shared
/// assignment domain that separates the classes; returns the first one in
/// the order of [`literals_over`].
pub fn atomic_separator(
    a: &StructClass,
    b: &StructClass,
) -> Result<Option<Formula>, StructureError> {
    if !a.same_signature(b) {
        return Err(StructureError::ClassSignatureMismatch);
    }
    for lit in literals_over(&a.vocabulary, &a.domain) {
        // Literals over bound variables always evaluate cleanly.
        if lit.separates(a, b).unwrap_or(false) {
            return Ok(Some(lit));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pure(id: u32, n: u32) -> Arc<Structure> {
        Arc::new(Structure::pure_set(id, n))
    }

    #[test]
    fn partial_iso_pure_sets() {
        let a = pure(0, 2);
        let b = pure(1, 2);
        assert!(partial_iso_check(&a, &b, &[(0, 0)]));
        assert!(partial_iso_check(&a, &b, &[(0, 1), (1, 0)]));
        // Not a function / not injective.
        assert!(!partial_iso_check(&a, &b, &[(0, 0), (0, 1)]));
        assert!(!partial_iso_check(&a, &b, &[(0, 0), (1, 0)]));
    }

    #[test]
    fn partial_iso_respects_relations() {
        let vocab = Vocabulary::new().with("E", 2);
        let a = Arc::new(
            Structure::new(
                0,
                vocab.clone(),
                [0, 1].into(),
                [("E".to_string(), [vec![0, 1]].into_iter().collect())].into(),
            )
            .unwrap(),
        );
        let b = Arc::new(Structure::new(1, vocab, [0, 1].into(), BTreeMap::new()).unwrap());
        assert!(!partial_iso_check(&a, &b, &[(0, 0), (1, 1)]));
        assert!(partial_iso_check(&a, &b, &[(0, 0)]));
    }

    #[test]
    fn star_extension_counts() {
        let c = StructClass::from_members(vec![(pure(0, 2), VarAssignment::empty())]).unwrap();
        assert_eq!(c.extend_with_star(3).unwrap().len(), 2);
        let c1 = StructClass::from_members(vec![(pure(0, 1), VarAssignment::empty())]).unwrap();
        assert_eq!(c1.extend_with_star(0).unwrap().len(), 1);
        let c23 = StructClass::from_members(vec![
            (pure(0, 2), VarAssignment::empty()),
            (pure(1, 3), VarAssignment::empty()),
        ])
        .unwrap();
        assert_eq!(c23.extend_with_star(0).unwrap().len(), 5);
    }

    #[test]
    fn star_rejects_empty_universe() {
        let c = StructClass::from_members(vec![(pure(0, 0), VarAssignment::empty())]).unwrap();
        assert_eq!(c.extend_with_star(0), Err(StructureError::EmptyUniverse(0)));
    }

    #[test]
    fn choice_extension() {
        let c = StructClass::from_members(vec![(pure(0, 2), VarAssignment::empty())]).unwrap();
        let ext = c
            .extend_with_choice(1, &[(0usize, 1u32)].into_iter().collect())
            .unwrap();
        assert_eq!(ext.len(), 1);
        assert_eq!(ext.members()[0].assignment.get(1), Some(1));
        assert_eq!(ext.domain().iter().copied().collect::<Vec<_>>(), vec![1]);

        let empty = StructClass::empty(Vocabulary::new(), BTreeSet::new());
        assert!(empty
            .extend_with_choice(0, &BTreeMap::new())
            .unwrap()
            .is_empty());

        let two = StructClass::from_members(vec![
            (pure(0, 2), VarAssignment::empty()),
            (pure(1, 2), VarAssignment::empty()),
        ])
        .unwrap();
        let ext2 = two
            .extend_with_choice(0, &[(0, 0), (1, 1)].into_iter().collect())
            .unwrap();
        let bound: Vec<ElemId> = ext2
            .members()
            .iter()
            .map(|m| m.assignment.get(0).unwrap())
            .collect();
        assert_eq!(bound, vec![0, 1]);
    }

    #[test]
    fn choice_errors() {
        let two = StructClass::from_members(vec![
            (pure(0, 2), VarAssignment::empty()),
            (pure(1, 2), VarAssignment::empty()),
        ])
        .unwrap();
        assert_eq!(
            two.extend_with_choice(0, &[(0, 0)].into_iter().collect()),
            Err(StructureError::MissingChoice(1))
        );
        assert_eq!(
            two.extend_with_choice(0, &[(0, 0), (1, 7)].into_iter().collect()),
            Err(StructureError::ElementOutsideUniverse(7))
        );
    }

    #[test]
    fn star_contains_every_choice_result() {
        let c = StructClass::from_members(vec![
            (pure(0, 2), VarAssignment::empty()),
            (pure(1, 3), VarAssignment::empty()),
        ])
        .unwrap();
        let star = c.extend_with_star(0).unwrap();
        for e0 in 0..2u32 {
            for e1 in 0..3u32 {
                let chosen = c
                    .extend_with_choice(0, &[(0, e0), (1, e1)].into_iter().collect())
                    .unwrap();
                assert!(chosen.is_subclass_of(&star));
            }
        }
    }

    #[test]
    fn atomic_separator_on_strings() {
        let a = StructClass::from_bit_strings(&["1"]).unwrap();
        let b = StructClass::from_bit_strings(&["0"]).unwrap();
        assert_eq!(atomic_separator(&a, &b).unwrap(), Some(Formula::prop("p0")));
        assert_eq!(atomic_separator(&a, &a).unwrap(), None);
    }

    #[test]
    fn atomic_separator_finds_equality() {
        let s = pure(0, 2);
        let a = StructClass::from_members(vec![(
            s.clone(),
            VarAssignment::from_pairs([(0, 0), (1, 0)]),
        )])
        .unwrap();
        let b =
            StructClass::from_members(vec![(s, VarAssignment::from_pairs([(0, 0), (1, 1)]))])
                .unwrap();
        assert_eq!(atomic_separator(&a, &b).unwrap(), Some(Formula::eq(0, 1)));
    }

    #[test]
    fn class_dedups_members() {
        let s = pure(0, 2);
        let c = StructClass::from_members(vec![
            (s.clone(), VarAssignment::empty()),
            (s, VarAssignment::empty()),
        ])
        .unwrap();
        assert_eq!(c.len(), 1);
    }
}
