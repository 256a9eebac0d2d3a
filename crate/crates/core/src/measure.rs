//! Abstract formula-complexity measures.
//!
//! A measure is a bundle `(q, r, t)` of ordinal functions: `q` for
//! quantifiers, `r` for binary connectives, `t` for countable connectives.
//! A measure is *nice* when each function's output strictly dominates its
//! nonzero inputs; niceness is what makes the game adequacy induction work,
//! and is checked here by sampling plus a fixed corner-case battery.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ordinal::{sample_ordinal, Multiplicity, OmegaFamily, Ordinal};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum MeasureError {
    #[error("unknown measure {0:?} (expected size, c1 or qrank)")]
    UnknownMeasure(String),
}

type UnaryFn = Arc<dyn Fn(&Ordinal) -> Ordinal + Send + Sync>;
type BinaryFn = Arc<dyn Fn(&Ordinal, &Ordinal) -> Ordinal + Send + Sync>;
type FamilyFn = Arc<dyn Fn(&OmegaFamily) -> Ordinal + Send + Sync>;

/// An immutable bundle of the three rank rules of a complexity measure.
#[derive(Clone)]
pub struct ComplexityMeasure {
    name: String,
    q: UnaryFn,
    r: BinaryFn,
    t: FamilyFn,
}

impl std::fmt::Debug for ComplexityMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ComplexityMeasure({})", self.name)
    }
}

impl ComplexityMeasure {
    /// Registers an in-code measure.
    pub fn new(name: impl Into<String>, q: UnaryFn, r: BinaryFn, t: FamilyFn) -> Self {
        ComplexityMeasure {
            name: name.into(),
            q,
            r,
            t,
        }
    }

    /// The built-in measures:
    ///
    /// * `size`  — successor / natural sum / infinite natural sum;
    /// * `c1`    — successor / sup of successors / sup of member successors;
    /// * `qrank` — successor / sup / sup (quantifier rank; not nice).
    pub fn builtin(name: &str) -> Result<Self, MeasureError> {
        match name {
            "size" => Ok(ComplexityMeasure::new(
                "size",
                Arc::new(|g: &Ordinal| g.successor()),
                Arc::new(|a: &Ordinal, b: &Ordinal| a.natural_sum(b)),
                Arc::new(|f: &OmegaFamily| {
                    f.pad_to_omega()
                        .infinite_natural_sum()
                        .expect("padded family is omega-indexed")
                }),
            )),
            "c1" => Ok(ComplexityMeasure::new(
                "c1",
                Arc::new(|g: &Ordinal| g.successor()),
                Arc::new(|a: &Ordinal, b: &Ordinal| a.successor().max(b.successor())),
                Arc::new(|f: &OmegaFamily| {
                    f.values()
                        .map(|v| v.successor())
                        .max()
                        .expect("families are nonempty")
                }),
            )),
            "qrank" => Ok(ComplexityMeasure::new(
                "qrank",
                Arc::new(|g: &Ordinal| g.successor()),
                Arc::new(|a: &Ordinal, b: &Ordinal| a.clone().max(b.clone())),
                Arc::new(|f: &OmegaFamily| {
                    f.values().max().cloned().expect("families are nonempty")
                }),
            )),
            other => Err(MeasureError::UnknownMeasure(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn q(&self, g: &Ordinal) -> Ordinal {
        (self.q)(g)
    }

    pub fn r(&self, a: &Ordinal, b: &Ordinal) -> Ordinal {
        (self.r)(a, b)
    }

    pub fn t(&self, family: &OmegaFamily) -> Ordinal {
        (self.t)(family)
    }
}

/// A concrete violation of one of the three niceness conditions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum NicenessViolation {
    Quantifier {
        input: Ordinal,
        output: Ordinal,
    },
    Binary {
        left: Ordinal,
        right: Ordinal,
        output: Ordinal,
    },
    Family {
        family: OmegaFamily,
        member: Ordinal,
        output: Ordinal,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NicenessReport {
    pub measure: String,
    pub samples: u64,
    pub seed: u64,
    pub pass: bool,
    pub witnesses: Vec<NicenessViolation>,
}

/// Tests the three niceness conditions on a fixed corner-case battery plus
/// `samples` pseudo-random nonzero ordinals and families below `w^3`.
/// Deterministic for a fixed seed; a failing report carries concrete
/// violating instances (capped at 16).
pub fn check_nice(measure: &ComplexityMeasure, samples: u64, seed: u64) -> NicenessReport {
    let mut witnesses = Vec::new();
    // Omega first, so the classic sup counterexample r(w, w) = w is the
    // first witness a failing report carries.
    let corner: Vec<Ordinal> = vec![
        Ordinal::omega(),
        Ordinal::one(),
        Ordinal::nat(2),
        "w+1".parse().unwrap(),
        "w*2".parse().unwrap(),
        "w^2".parse().unwrap(),
        "w^2+w+1".parse().unwrap(),
    ];

    let check_all = |items: &[Ordinal], witnesses: &mut Vec<NicenessViolation>| {
        for g in items {
            let out = measure.q(g);
            if out <= *g {
                witnesses.push(NicenessViolation::Quantifier {
                    input: g.clone(),
                    output: out,
                });
            }
        }
        for a in items {
            for b in items {
                let out = measure.r(a, b);
                if out <= *a || out <= *b {
                    witnesses.push(NicenessViolation::Binary {
                        left: a.clone(),
                        right: b.clone(),
                        output: out,
                    });
                }
            }
        }
        for a in items {
            for b in items {
                let fams = [
                    OmegaFamily::constant_many(a.clone()),
                    OmegaFamily::new(vec![
                        (a.clone(), Multiplicity::Finite(2)),
                        (b.clone(), Multiplicity::Many),
                    ])
                    .unwrap(),
                ];
                for fam in fams {
                    let out = measure.t(&fam);
                    for v in fam.values() {
                        if out <= *v {
                            witnesses.push(NicenessViolation::Family {
                                family: fam.clone(),
                                member: v.clone(),
                                output: out.clone(),
                            });
                            break;
                        }
                    }
                }
            }
        }
    };

    check_all(&corner, &mut witnesses);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batch = Vec::new();
    for _ in 0..samples {
        let mut g = sample_ordinal(&mut rng, 3, 5);
        if g.is_zero() {
            g = Ordinal::one();
        }
        batch.push(g);
        if batch.len() == 4 {
            check_all(&batch, &mut witnesses);
            batch.clear();
        }
    }
    if !batch.is_empty() {
        check_all(&batch, &mut witnesses);
    }

    witnesses.truncate(16);
    NicenessReport {
        measure: measure.name().to_string(),
        samples,
        seed,
        pass: witnesses.is_empty(),
        witnesses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_rules() {
        let size = ComplexityMeasure::builtin("size").unwrap();
        assert_eq!(
            size.r(&Ordinal::omega(), &Ordinal::one()),
            "w+1".parse().unwrap()
        );
        let c1 = ComplexityMeasure::builtin("c1").unwrap();
        assert_eq!(
            c1.t(&OmegaFamily::constant_many(Ordinal::one())),
            Ordinal::nat(2)
        );
        let qrank = ComplexityMeasure::builtin("qrank").unwrap();
        assert_eq!(qrank.r(&Ordinal::omega(), &Ordinal::omega()), Ordinal::omega());
        assert!(ComplexityMeasure::builtin("nope").is_err());
    }

    #[test]
    fn size_and_c1_are_nice() {
        for name in ["size", "c1"] {
            let m = ComplexityMeasure::builtin(name).unwrap();
            let report = check_nice(&m, 1000, 7);
            assert!(report.pass, "{name} unexpectedly failed: {report:?}");
        }
    }

    #[test]
    fn qrank_fails_with_sup_witness() {
        let m = ComplexityMeasure::builtin("qrank").unwrap();
        let report = check_nice(&m, 1000, 7);
        assert!(!report.pass);
        let omega = Ordinal::omega();
        assert!(
            report.witnesses.iter().any(|w| matches!(
                w,
                NicenessViolation::Binary { left, right, output }
                    if *left == omega && *right == omega && *output == omega
            )),
            "expected the r(w, w) = w witness, got {:?}",
            report.witnesses
        );
    }

    #[test]
    fn check_nice_is_deterministic() {
        let m = ComplexityMeasure::builtin("qrank").unwrap();
        assert_eq!(check_nice(&m, 200, 3), check_nice(&m, 200, 3));
    }
}
