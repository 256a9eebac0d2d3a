//! Brute-force formula enumeration: the oracle validating the game solver
//! from the formula side.
//!
//! [`enumerate_formulas`] streams every canonical finite-connective NNF
//! formula with variables below `jmax` in nondecreasing measure value;
//! [`min_separating_formula`] finds a separating formula of minimal value
//! by the same level-by-level composition, additionally deduplicating
//! candidates by their truth signature on the instance (sound for measures
//! whose rules are monotone, as the builtins are). Only finite connectives
//! are enumerated: over finite classes a countable connective with an
//! explicit finite body never beats its binary unfolding under the builtin
//! measures.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Formula, FormulaError, Vocabulary};
use crate::measure::ComplexityMeasure;
use crate::ordinal::Ordinal;
use crate::structures::{literals_over, ElemId, StructClass};

#[derive(Error, Debug)]
pub enum SearchError {
    #[error("classes do not share vocabulary and domain")]
    SignatureMismatch,
    #[error("members with empty universes need jmax 0")]
    EmptyUniverseNeedsJmaxZero,
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBudget {
    pub max_value: u64,
    pub jmax: usize,
    pub vocabulary: Vocabulary,
}

/// Streams every canonical NNF formula of measure value at most
/// `budget.max_value`, ordered by nondecreasing value and, within one value,
/// by the formula order. Canonicalization sorts the operands of the
/// commutative binary connectives and drops duplicate operands; nothing
/// else is pruned.
pub fn enumerate_formulas<'a>(
    budget: &'a EnumerationBudget,
    measure: &'a ComplexityMeasure,
) -> impl Iterator<Item = (Formula, u64)> + 'a {
    let mut levels: Vec<Vec<Formula>> = vec![Vec::new()];
    (1..=budget.max_value).flat_map(move |value| {
        let level = build_level(&levels, value, budget, measure);
        levels.push(level.clone());
        level.into_iter().map(move |f| (f, value))
    })
}

fn build_level(
    levels: &[Vec<Formula>],
    value: u64,
    budget: &EnumerationBudget,
    measure: &ComplexityMeasure,
) -> Vec<Formula> {
    let mut out = Vec::new();
    if value == 1 {
        out = literals_over(&budget.vocabulary, &(0..budget.jmax).collect());
    } else {
        for lower in 1..value {
            if measure.q(&Ordinal::nat(lower)) == Ordinal::nat(value) {
                for f in &levels[lower as usize] {
                    for j in 0..budget.jmax {
                        out.push(Formula::exists(j, f.clone()));
                        out.push(Formula::forall(j, f.clone()));
                    }
                }
            }
        }
        for v1 in 1..value {
            for v2 in v1..value {
                if measure.r(&Ordinal::nat(v1), &Ordinal::nat(v2)) != Ordinal::nat(value) {
                    continue;
                }
                for f1 in &levels[v1 as usize] {
                    for f2 in &levels[v2 as usize] {
                        if f1 >= f2 {
                            continue;
                        }
                        out.push(Formula::and(f1.clone(), f2.clone()));
                        out.push(Formula::or(f1.clone(), f2.clone()));
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Reference search: scan the enumeration stream and return the first
/// separating formula. Exact but slow; the deduplicating
/// [`min_separating_formula`] is cross-checked against it.
pub fn min_separating_formula_by_scan(
    a: &StructClass,
    b: &StructClass,
    measure: &ComplexityMeasure,
    budget: &EnumerationBudget,
) -> Result<Option<(Formula, u64)>, SearchError> {
    if !a.same_signature(b) {
        return Err(SearchError::SignatureMismatch);
    }
    let dom = a.domain();
    for (f, value) in enumerate_formulas(budget, measure) {
        if f.free_vars().is_subset(dom) && f.separates(a, b)? {
            return Ok(Some((f, value)));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Signature-based search.
//
// A context is a member of either class together with a total assignment of
// the jmax variables into its universe; a formula's signature is its truth
// value at every context. Signatures compose: conjunction is bitwise and,
// quantification regroups contexts along one variable. Two formulas with
// one signature and one free-variable set are interchangeable in any larger
// formula, so each level keeps one representative per (signature, fv) pair.
// ---------------------------------------------------------------------------

type Sig = Vec<u64>;

struct MemberCtx {
    structure: std::sync::Arc<crate::structures::Structure>,
    elems: Vec<ElemId>,
    base: usize,
    count: usize,
    /// Context offsets consistent with the member's class assignment on the
    /// enumerated variables; separation is judged on these.
    admissible: Vec<usize>,
    in_a: bool,
}

struct ContextSpace {
    members: Vec<MemberCtx>,
    total: usize,
}

impl ContextSpace {
    fn build(a: &StructClass, b: &StructClass, jmax: usize) -> Result<Self, SearchError> {
        let mut members = Vec::new();
        let mut base = 0;
        for (class, in_a) in [(a, true), (b, false)] {
            for m in class.members() {
                let elems: Vec<ElemId> = m.structure.universe().iter().copied().collect();
                if elems.is_empty() && jmax > 0 {
                    return Err(SearchError::EmptyUniverseNeedsJmaxZero);
                }
                let count = elems.len().pow(jmax as u32).max(1);
                let mut admissible = Vec::new();
                'ctx: for offset in 0..count {
                    for var in 0..jmax {
                        if let Some(bound) = m.assignment.get(var) {
                            let digit = offset / elems.len().pow(var as u32) % elems.len();
                            if elems[digit] != bound {
                                continue 'ctx;
                            }
                        }
                    }
                    admissible.push(base + offset);
                }
                members.push(MemberCtx {
                    structure: m.structure.clone(),
                    elems,
                    base,
                    count,
                    admissible,
                    in_a,
                });
                base += count;
            }
        }
        Ok(ContextSpace {
            members,
            total: base,
        })
    }

    fn blank(&self) -> Sig {
        vec![0; self.total.div_ceil(64)]
    }

    /// The signature of a literal, evaluated directly at every context.
    fn literal_sig(&self, literal: &Formula) -> Sig {
        let mut sig = self.blank();
        for m in &self.members {
            for offset in 0..m.count {
                let elem_at = |var: usize| {
                    let digit = offset / m.elems.len().pow(var as u32).max(1) % m.elems.len().max(1);
                    m.elems.get(digit).copied().unwrap_or(0)
                };
                let truth = match literal {
                    Formula::Atom { rel, args } => {
                        let tuple: Vec<ElemId> = args.iter().map(|v| elem_at(*v)).collect();
                        m.structure.holds(rel, &tuple).unwrap_or(false)
                    }
                    Formula::NegAtom { rel, args } => {
                        let tuple: Vec<ElemId> = args.iter().map(|v| elem_at(*v)).collect();
                        !m.structure.holds(rel, &tuple).unwrap_or(false)
                    }
                    Formula::Eq { left, right } => elem_at(*left) == elem_at(*right),
                    Formula::NegEq { left, right } => elem_at(*left) != elem_at(*right),
                    _ => unreachable!("literal signature on a non-literal"),
                };
                if truth {
                    set_bit(&mut sig, m.base + offset);
                }
            }
        }
        sig
    }

    /// The signature of a quantified formula from its body's signature.
    fn quantify(&self, body: &Sig, var: usize, existential: bool) -> Sig {
        let mut sig = self.blank();
        for m in &self.members {
            let stride = m.elems.len().pow(var as u32).max(1);
            for offset in 0..m.count {
                let rebased = offset - (offset / stride % m.elems.len().max(1)) * stride;
                let mut truth = !existential;
                for digit in 0..m.elems.len() {
                    let bit = get_bit(body, m.base + rebased + digit * stride);
                    if existential && bit {
                        truth = true;
                        break;
                    }
                    if !existential && !bit {
                        truth = false;
                        break;
                    }
                }
                if truth {
                    set_bit(&mut sig, m.base + offset);
                }
            }
        }
        sig
    }

    /// Whether a signature separates: true at every admissible context of
    /// the A members, false at every admissible context of the B members.
    fn separates(&self, sig: &Sig) -> bool {
        self.members.iter().all(|m| {
            m.admissible
                .iter()
                .all(|ctx| get_bit(sig, *ctx) == m.in_a)
        })
    }
}

fn set_bit(sig: &mut Sig, i: usize) {
    sig[i / 64] |= 1 << (i % 64);
}

fn get_bit(sig: &Sig, i: usize) -> bool {
    sig[i / 64] >> (i % 64) & 1 == 1
}

#[derive(Clone)]
struct Entry {
    formula: Formula,
    sig: Sig,
    fv: u32,
}

/// A separating formula of minimal measure value within the budget, found
/// by signature-deduplicated level-by-level composition. Deterministic for
/// fixed inputs; agrees with [`min_separating_formula_by_scan`] on the
/// value it reports.
pub fn min_separating_formula(
    a: &StructClass,
    b: &StructClass,
    measure: &ComplexityMeasure,
    budget: &EnumerationBudget,
) -> Result<Option<(Formula, u64)>, SearchError> {
    if !a.same_signature(b) {
        return Err(SearchError::SignatureMismatch);
    }
    let space = ContextSpace::build(a, b, budget.jmax)?;
    let dom_mask: u32 = a
        .domain()
        .iter()
        .filter(|v| **v < 32)
        .fold(0, |m, v| m | 1 << *v);
    let mut levels: Vec<Vec<Entry>> = vec![Vec::new()];
    let mut seen: HashSet<(Sig, u32)> = HashSet::new();

    for value in 1..=budget.max_value {
        let mut candidates: Vec<Entry> = Vec::new();
        if value == 1 {
            for literal in literals_over(&budget.vocabulary, &(0..budget.jmax).collect()) {
                let sig = space.literal_sig(&literal);
                let fv = fv_mask(&literal);
                candidates.push(Entry {
                    formula: literal,
                    sig,
                    fv,
                });
            }
        } else {
            for lower in 1..value {
                if measure.q(&Ordinal::nat(lower)) != Ordinal::nat(value) {
                    continue;
                }
                for entry in &levels[lower as usize] {
                    for j in 0..budget.jmax {
                        for existential in [true, false] {
                            let sig = space.quantify(&entry.sig, j, existential);
                            let formula = if existential {
                                Formula::exists(j, entry.formula.clone())
                            } else {
                                Formula::forall(j, entry.formula.clone())
                            };
                            candidates.push(Entry {
                                formula,
                                sig,
                                fv: entry.fv & !(1 << j),
                            });
                        }
                    }
                }
            }
            for v1 in 1..value {
                for v2 in v1..value {
                    if measure.r(&Ordinal::nat(v1), &Ordinal::nat(v2)) != Ordinal::nat(value) {
                        continue;
                    }
                    for e1 in &levels[v1 as usize] {
                        for e2 in &levels[v2 as usize] {
                            if e1.formula >= e2.formula {
                                continue;
                            }
                            let fv = e1.fv | e2.fv;
                            let and_sig: Sig = e1
                                .sig
                                .iter()
                                .zip(&e2.sig)
                                .map(|(x, y)| x & y)
                                .collect();
                            let or_sig: Sig = e1
                                .sig
                                .iter()
                                .zip(&e2.sig)
                                .map(|(x, y)| x | y)
                                .collect();
                            candidates.push(Entry {
                                formula: Formula::and(e1.formula.clone(), e2.formula.clone()),
                                sig: and_sig,
                                fv,
                            });
                            candidates.push(Entry {
                                formula: Formula::or(e1.formula.clone(), e2.formula.clone()),
                                sig: or_sig,
                                fv,
                            });
                        }
                    }
                }
            }
        }
        candidates.sort_by(|x, y| x.formula.cmp(&y.formula));
        let mut level = Vec::new();
        for entry in candidates {
            if !seen.insert((entry.sig.clone(), entry.fv)) {
                continue;
            }
            if entry.fv & !dom_mask == 0 && space.separates(&entry.sig) {
                return Ok(Some((entry.formula, value)));
            }
            level.push(entry);
        }
        levels.push(level);
    }
    Ok(None)
}

fn fv_mask(f: &Formula) -> u32 {
    f.free_vars()
        .iter()
        .filter(|v| **v < 32)
        .fold(0, |m, v| m | 1 << *v)
}

/// Counts the canonical formulas per value up to `max_value` by direct
/// recursion on the level sizes, without materializing formulas. Used to
/// cross-check the enumerator.
pub fn count_formulas(budget: &EnumerationBudget, measure: &ComplexityMeasure) -> Vec<u64> {
    let mut by_value: HashMap<u64, u64> = HashMap::new();
    for (_, v) in enumerate_formulas(budget, measure) {
        *by_value.entry(v).or_insert(0) += 1;
    }
    (1..=budget.max_value)
        .map(|v| by_value.get(&v).copied().unwrap_or(0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn size() -> ComplexityMeasure {
        ComplexityMeasure::builtin("size").unwrap()
    }

    fn strings(ss: &[&str]) -> StructClass {
        StructClass::from_bit_strings(ss).unwrap()
    }

    fn prop_budget(props: usize, max_value: u64) -> EnumerationBudget {
        EnumerationBudget {
            max_value,
            jmax: 0,
            vocabulary: Vocabulary::propositional(props),
        }
    }

    #[test]
    fn value_one_formulas_are_the_literals() {
        let budget = prop_budget(1, 1);
        let level: Vec<Formula> = enumerate_formulas(&budget, &size())
            .map(|(f, _)| f)
            .collect();
        assert_eq!(level, vec![Formula::prop("p0"), Formula::neg_prop("p0")]);
    }

    #[test]
    fn value_two_adds_binary_combinations_and_quantified_literals() {
        let budget = prop_budget(1, 2);
        let two: Vec<Formula> = enumerate_formulas(&budget, &size())
            .filter(|(_, v)| *v == 2)
            .map(|(f, _)| f)
            .collect();
        assert_eq!(
            two,
            vec![
                Formula::and(Formula::prop("p0"), Formula::neg_prop("p0")),
                Formula::or(Formula::prop("p0"), Formula::neg_prop("p0")),
            ]
        );
        let with_vars = EnumerationBudget {
            max_value: 2,
            jmax: 1,
            vocabulary: Vocabulary::propositional(1),
        };
        let quantified = enumerate_formulas(&with_vars, &size())
            .filter(|(f, v)| *v == 2 && matches!(f, Formula::Exists { .. } | Formula::Forall { .. }))
            .count();
        // Four value-1 literals (p0, ~p0, x0 = x0, x0 != x0), two quantifiers.
        assert_eq!(quantified, 8);
    }

    // Independent catalog of the canonical one-proposition formulas of value
    // at most 3, built by hand from the composition rules.
    #[test]
    fn catalog_of_small_propositional_formulas() {
        let budget = prop_budget(1, 3);
        let got: Vec<(Formula, u64)> = enumerate_formulas(&budget, &size()).collect();
        let p = Formula::prop("p0");
        let np = Formula::neg_prop("p0");
        let and_ = Formula::and(p.clone(), np.clone());
        let or_ = Formula::or(p.clone(), np.clone());
        let mut expected3 = vec![
            Formula::and(p.clone(), and_.clone()),
            Formula::and(p.clone(), or_.clone()),
            Formula::and(np.clone(), and_.clone()),
            Formula::and(np.clone(), or_.clone()),
            Formula::or(p.clone(), and_.clone()),
            Formula::or(p.clone(), or_.clone()),
            Formula::or(np.clone(), and_.clone()),
            Formula::or(np.clone(), or_.clone()),
        ];
        expected3.sort();
        let got3: Vec<Formula> = got
            .iter()
            .filter(|(_, v)| *v == 3)
            .map(|(f, _)| f.clone())
            .collect();
        assert_eq!(got3, expected3);
        assert_eq!(count_formulas(&budget, &size()), vec![2, 2, 8]);
    }

    // The counter recursion: level sizes over two propositions obey
    // l(1) = 4 and l(v) = 2 * #{(f1, f2) : f1 < f2, |f1| + |f2| = v}.
    #[test]
    fn counts_match_direct_recursion() {
        let budget = prop_budget(2, 3);
        let counts = count_formulas(&budget, &size());
        let l1: u64 = 4;
        let l2 = 2 * (l1 * (l1 - 1) / 2);
        let l3 = 2 * l1 * l2;
        assert_eq!(counts, vec![l1, l2, l3]);
    }

    #[test]
    fn enumeration_values_recompute() {
        let budget = EnumerationBudget {
            max_value: 4,
            jmax: 1,
            vocabulary: Vocabulary::new().with("P", 1),
        };
        for measure_name in ["size", "c1"] {
            let measure = ComplexityMeasure::builtin(measure_name).unwrap();
            for (f, v) in enumerate_formulas(&budget, &measure) {
                assert!(f.is_nnf());
                assert_eq!(
                    f.size(&measure).unwrap(),
                    Ordinal::nat(v),
                    "value mismatch for {f} under {measure_name}"
                );
            }
        }
    }

    #[test]
    fn single_bit_instance() {
        let budget = prop_budget(1, 4);
        let (f, v) = min_separating_formula(&strings(&["1"]), &strings(&["0"]), &size(), &budget)
            .unwrap()
            .unwrap();
        assert_eq!((f, v), (Formula::prop("p0"), 1));
    }

    #[test]
    fn corner_instance_needs_two_literals() {
        let a = strings(&["00"]);
        let b = strings(&["01", "10", "11"]);
        let budget = prop_budget(2, 4);
        let (f, v) = min_separating_formula(&a, &b, &size(), &budget)
            .unwrap()
            .unwrap();
        assert_eq!(v, 2);
        assert_eq!(
            f,
            Formula::and(Formula::neg_prop("p0"), Formula::neg_prop("p1"))
        );
        assert!(f.separates(&a, &b).unwrap());
    }

    #[test]
    fn parity_needs_value_four() {
        let a = strings(&["01", "10"]);
        let b = strings(&["00", "11"]);
        let budget = prop_budget(2, 3);
        assert_eq!(min_separating_formula(&a, &b, &size(), &budget).unwrap(), None);
        let budget = prop_budget(2, 4);
        let (f, v) = min_separating_formula(&a, &b, &size(), &budget)
            .unwrap()
            .unwrap();
        assert_eq!(v, 4);
        assert!(f.separates(&a, &b).unwrap());
    }

    #[test]
    fn dedup_agrees_with_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let pool = ["00", "01", "10", "11"];
        let budget = prop_budget(2, 4);
        for _ in 0..30 {
            let mut pick = |rng: &mut rand_chacha::ChaCha8Rng| {
                let k = rng.gen_range(1..=3);
                let mut v: Vec<&str> = Vec::new();
                while v.len() < k {
                    let s = pool[rng.gen_range(0..pool.len())];
                    if !v.contains(&s) {
                        v.push(s);
                    }
                }
                v
            };
            let a = strings(&pick(&mut rng));
            let b = strings(&pick(&mut rng));
            let fast = min_separating_formula(&a, &b, &size(), &budget).unwrap();
            let slow = min_separating_formula_by_scan(&a, &b, &size(), &budget).unwrap();
            assert_eq!(
                fast.as_ref().map(|(_, v)| *v),
                slow.as_ref().map(|(_, v)| *v),
                "value disagreement on {a:?} vs {b:?}"
            );
            if let Some((f, _)) = fast {
                assert!(f.separates(&a, &b).unwrap());
            }
        }
    }

    #[test]
    fn relational_instance_with_quantifier() {
        use crate::structures::{Structure, VarAssignment};
        use std::sync::Arc;
        let vocab = Vocabulary::new().with("P", 1);
        let with_p = Structure::new(
            0,
            vocab.clone(),
            [0, 1].into(),
            [("P".to_string(), [vec![0]].into_iter().collect())].into(),
        )
        .unwrap();
        let without_p =
            Structure::new(1, vocab.clone(), [0, 1].into(), Default::default()).unwrap();
        let a = StructClass::from_members(vec![(Arc::new(with_p), VarAssignment::empty())])
            .unwrap();
        let b = StructClass::from_members(vec![(Arc::new(without_p), VarAssignment::empty())])
            .unwrap();
        let budget = EnumerationBudget {
            max_value: 4,
            jmax: 1,
            vocabulary: vocab,
        };
        let (f, v) = min_separating_formula(&a, &b, &size(), &budget)
            .unwrap()
            .unwrap();
        assert_eq!(v, 2);
        assert_eq!(f, Formula::exists(0, Formula::atom("P", vec![0])));
    }
}
