//! Property tests for the algebraic laws and the round-trip invariants.

use proptest::prelude::*;

use efgames::formula::{Formula, Vocabulary};
use efgames::measure::ComplexityMeasure;
use efgames::ordinal::{Multiplicity, OmegaFamily, Ordinal};
use efgames::structures::{ElemId, Structure, VarAssignment};

fn ordinal() -> impl Strategy<Value = Ordinal> {
    proptest::collection::vec((0u64..5, 1u64..6), 0..4).prop_map(|mut terms| {
        terms.sort_by(|a, b| b.0.cmp(&a.0));
        terms.dedup_by_key(|t| t.0);
        Ordinal::from_terms(
            terms
                .into_iter()
                .map(|(e, k)| (Ordinal::nat(e), k))
                .collect(),
        )
        .unwrap()
    })
}

fn family() -> impl Strategy<Value = OmegaFamily> {
    proptest::collection::vec(
        (ordinal(), prop_oneof![(1u64..4).prop_map(Multiplicity::Finite), Just(Multiplicity::Many)]),
        1..5,
    )
    .prop_map(|entries| OmegaFamily::new(entries).unwrap())
}

fn formula() -> impl Strategy<Value = Formula> {
    let literal = prop_oneof![
        (0usize..3).prop_map(|v| Formula::atom("P", vec![v])),
        (0usize..3, 0usize..3).prop_map(|(v, w)| Formula::atom("E", vec![v, w])),
        (0usize..3, 0usize..3).prop_map(|(v, w)| Formula::eq(v, w)),
        (0usize..3, 0usize..3).prop_map(|(v, w)| Formula::neq(v, w)),
    ];
    literal.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::or(l, r)),
            inner.clone().prop_map(Formula::not),
            (0usize..3, inner.clone()).prop_map(|(v, f)| Formula::exists(v, f)),
            (0usize..3, inner.clone()).prop_map(|(v, f)| Formula::forall(v, f)),
            proptest::collection::vec(inner, 1..4).prop_map(Formula::big_and),
        ]
    })
}

fn battery() -> Vec<Structure> {
    let vocab = Vocabulary::new().with("P", 1).with("E", 2);
    let mut out = Vec::new();
    for (id, (universe, ps, es)) in [
        (vec![0u32], vec![0u32], vec![(0u32, 0u32)]),
        (vec![0, 1], vec![1], vec![(0, 1)]),
        (vec![0, 1, 2], vec![0, 2], vec![(0, 1), (1, 2), (2, 2)]),
    ]
    .into_iter()
    .enumerate()
    {
        out.push(
            Structure::new(
                id as u32,
                vocab.clone(),
                universe.into_iter().collect(),
                [
                    (
                        "P".to_string(),
                        ps.into_iter().map(|e| vec![e]).collect(),
                    ),
                    (
                        "E".to_string(),
                        es.into_iter().map(|(x, y)| vec![x, y]).collect(),
                    ),
                ]
                .into(),
            )
            .unwrap(),
        );
    }
    out
}

fn mirror(f: &Formula) -> Formula {
    match f {
        Formula::And { left, right } => Formula::and(mirror(right), mirror(left)),
        Formula::Or { left, right } => Formula::or(mirror(right), mirror(left)),
        Formula::Not { body } => Formula::not(mirror(body)),
        Formula::Exists { var, body } => Formula::exists(*var, mirror(body)),
        Formula::Forall { var, body } => Formula::forall(*var, mirror(body)),
        Formula::BigAnd { body } => match body {
            efgames::formula::Family::Explicit { members } => {
                Formula::big_and(members.iter().rev().map(mirror).collect())
            }
            _ => f.clone(),
        },
        other => other.clone(),
    }
}

proptest! {
    #[test]
    fn natural_sum_commutes(a in ordinal(), b in ordinal()) {
        prop_assert_eq!(a.natural_sum(&b), b.natural_sum(&a));
    }

    #[test]
    fn natural_sum_associates(a in ordinal(), b in ordinal(), c in ordinal()) {
        prop_assert_eq!(
            a.natural_sum(&b).natural_sum(&c),
            a.natural_sum(&b.natural_sum(&c))
        );
    }

    #[test]
    fn natural_sum_strictly_monotone(a in ordinal(), b in ordinal()) {
        prop_assume!(!b.is_zero());
        prop_assert!(a.natural_sum(&b) > a);
    }

    #[test]
    fn ordinal_text_round_trips(a in ordinal()) {
        prop_assert_eq!(a.to_string().parse::<Ordinal>().unwrap(), a);
    }

    #[test]
    fn infinite_sum_bounds_partial_sums(f in family()) {
        prop_assume!(f.is_infinite());
        let sup = f.infinite_natural_sum().unwrap();
        for n in 0..=50 {
            prop_assert!(f.partial_sum(n) <= sup);
        }
    }

    #[test]
    fn infinite_sum_ignores_entry_order(entries in proptest::collection::vec(
        (ordinal(), prop_oneof![(1u64..4).prop_map(Multiplicity::Finite), Just(Multiplicity::Many)]),
        2..5,
    )) {
        let forward = OmegaFamily::new(entries.clone()).unwrap();
        let mut reversed = entries;
        reversed.reverse();
        let backward = OmegaFamily::new(reversed).unwrap();
        prop_assert_eq!(
            forward.pad_to_omega().infinite_natural_sum().unwrap(),
            backward.pad_to_omega().infinite_natural_sum().unwrap()
        );
    }

    #[test]
    fn nnf_is_idempotent_and_preserves_truth(f in formula()) {
        let nnf = f.to_nnf().unwrap();
        prop_assert!(nnf.is_nnf());
        prop_assert_eq!(nnf.to_nnf().unwrap(), nnf.clone());
        for s in battery() {
            let elems: Vec<ElemId> = s.universe().iter().copied().collect();
            let assignment = VarAssignment::from_pairs(
                (0..3).map(|v| (v, elems[v % elems.len()])),
            );
            prop_assert_eq!(
                f.evaluate(&s, &assignment).unwrap(),
                nnf.evaluate(&s, &assignment).unwrap()
            );
        }
    }

    #[test]
    fn size_is_permutation_invariant_and_dominates_rank(f in formula()) {
        let size = ComplexityMeasure::builtin("size").unwrap();
        let nnf = f.to_nnf().unwrap();
        let value = nnf.size(&size).unwrap();
        prop_assert_eq!(mirror(&nnf).size(&size).unwrap(), value.clone());
        prop_assert!(value >= nnf.quantifier_rank());
    }

    #[test]
    fn formula_json_round_trips(f in formula()) {
        let json = serde_json::to_string(&f).unwrap();
        prop_assert_eq!(serde_json::from_str::<Formula>(&json).unwrap(), f);
    }

    #[test]
    fn finite_formula_text_round_trips(f in formula()) {
        let text = f.to_string();
        prop_assert_eq!(text.parse::<Formula>().unwrap(), f);
    }
}
