//! The measure-parametric splitting/supplementing game on class pairs.
//!
//! Player I either splits one class into parts (dividing the rank budget
//! through the measure's binary or family rule), supplements assignments
//! with a choice function on one side and all elements on the other
//! (spending the quantifier rule), or claims an atomic win. Player II picks
//! which part to continue with after a split. The game ends at rank 1,
//! where Player I wins exactly when an atomic or negated atomic formula
//! separates the classes. The propositional variant rejects supplements.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GameTrace, Outcome, OutcomeReason, Player, Side, TraceStep};
use crate::formula::Formula;
use crate::measure::ComplexityMeasure;
use crate::ordinal::{Multiplicity, OmegaFamily, Ordinal};
use crate::structures::{atomic_separator, ElemId, StructClass};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum MoveViolation {
    #[error("rank arithmetic overflows: needs {required}, position has {available}")]
    RankOverflow {
        required: Ordinal,
        available: Ordinal,
    },
    #[error("parts do not cover the split side")]
    NotACover,
    #[error("a finite split part is empty")]
    EmptyPart,
    #[error("a finite split needs exactly two parts")]
    NotTwoParts,
    #[error("split ranks must be nonzero")]
    ZeroRank,
    #[error("tail ranks of an infinite split must be omega-indexed")]
    TailNotOmegaIndexed,
    #[error("bad choice function: {0}")]
    BadChoiceFunction(String),
    #[error("supplement not applicable: {0}")]
    SupplementImpossible(String),
    #[error("claimed formula is not a literal over the shared domain")]
    ClaimNotLiteral,
    #[error("claimed literal does not separate the classes")]
    ClaimFails,
    #[error("only an atomic claim is possible at rank 1")]
    TerminalRank,
    #[error("supplement moves are forbidden in the propositional game")]
    SupplementForbidden,
    #[error("move classes do not match the position signature")]
    SignatureMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EfbPosition {
    pub left: StructClass,
    pub right: StructClass,
    pub rank: Ordinal,
}

impl EfbPosition {
    pub fn new(left: StructClass, right: StructClass, rank: Ordinal) -> Result<Self, MoveViolation> {
        if !left.same_signature(&right) {
            return Err(MoveViolation::SignatureMismatch);
        }
        Ok(EfbPosition { left, right, rank })
    }

    pub fn side(&self, side: Side) -> &StructClass {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// The move types of the game. A finite split has exactly two parts; an
/// infinite split lists finitely many parts explicitly (possibly empty
/// subclasses) and pads to an omega-indexed cover with empty pieces whose
/// nonzero ranks are drawn from `tail_ranks`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum EfbMove {
    FiniteSplit {
        side: Side,
        parts: Vec<(StructClass, Ordinal)>,
    },
    InfiniteSplit {
        side: Side,
        parts: Vec<(StructClass, Ordinal)>,
        tail_ranks: OmegaFamily,
    },
    Supplement {
        side: Side,
        var: usize,
        choice: BTreeMap<usize, ElemId>,
        new_rank: Ordinal,
    },
    Claim {
        literal: Formula,
    },
}

/// Validates a move against a position under the given measure; `Ok(())`
/// means legal, and the error is the structured reason otherwise.
pub fn efb_legal(
    pos: &EfbPosition,
    mv: &EfbMove,
    measure: &ComplexityMeasure,
    propositional: bool,
) -> Result<(), MoveViolation> {
    match mv {
        EfbMove::Claim { literal } => {
            if !literal.is_literal() || !literal.free_vars().is_subset(pos.left.domain()) {
                return Err(MoveViolation::ClaimNotLiteral);
            }
            if literal.separates(&pos.left, &pos.right).unwrap_or(false) {
                Ok(())
            } else {
                Err(MoveViolation::ClaimFails)
            }
        }
        _ if pos.rank <= Ordinal::one() => Err(MoveViolation::TerminalRank),
        EfbMove::FiniteSplit { side, parts } => {
            if parts.len() != 2 {
                return Err(MoveViolation::NotTwoParts);
            }
            if parts.iter().any(|(p, _)| p.is_empty()) {
                return Err(MoveViolation::EmptyPart);
            }
            if parts.iter().any(|(_, r)| r.is_zero()) {
                return Err(MoveViolation::ZeroRank);
            }
            if !pos.side(*side).is_covered_by(parts.iter().map(|(p, _)| p)) {
                return Err(MoveViolation::NotACover);
            }
            let required = measure.r(&parts[0].1, &parts[1].1);
            if required > pos.rank {
                return Err(MoveViolation::RankOverflow {
                    required,
                    available: pos.rank.clone(),
                });
            }
            Ok(())
        }
        EfbMove::InfiniteSplit {
            side,
            parts,
            tail_ranks,
        } => {
            if !tail_ranks.is_infinite() {
                return Err(MoveViolation::TailNotOmegaIndexed);
            }
            if parts.iter().any(|(_, r)| r.is_zero())
                || tail_ranks.values().any(|v| v.is_zero())
            {
                return Err(MoveViolation::ZeroRank);
            }
            if !pos.side(*side).is_covered_by(parts.iter().map(|(p, _)| p)) {
                return Err(MoveViolation::NotACover);
            }
            let mut entries: Vec<(Ordinal, Multiplicity)> = tail_ranks.entries().to_vec();
            entries.extend(parts.iter().map(|(_, r)| (r.clone(), Multiplicity::Finite(1))));
            let family = OmegaFamily::new(entries).expect("nonempty by construction");
            let required = measure.t(&family);
            if required > pos.rank {
                return Err(MoveViolation::RankOverflow {
                    required,
                    available: pos.rank.clone(),
                });
            }
            Ok(())
        }
        EfbMove::Supplement {
            side,
            var,
            choice,
            new_rank,
        } => {
            if propositional {
                return Err(MoveViolation::SupplementForbidden);
            }
            if new_rank.is_zero() {
                return Err(MoveViolation::ZeroRank);
            }
            let required = measure.q(new_rank);
            if required > pos.rank {
                return Err(MoveViolation::RankOverflow {
                    required,
                    available: pos.rank.clone(),
                });
            }
            pos.side(*side)
                .extend_with_choice(*var, choice)
                .map_err(|e| MoveViolation::BadChoiceFunction(e.to_string()))?;
            pos.side(side.flip())
                .extend_with_star(*var)
                .map_err(|e| MoveViolation::SupplementImpossible(e.to_string()))?;
            Ok(())
        }
    }
}

/// The successor positions a legal move offers. Splits offer one position
/// per explicit part plus, for infinite splits, one empty-piece position
/// per distinct tail rank; supplements offer their single successor; claims
/// offer none. Player II chooses by index when more than one is offered.
pub fn successor_options(
    pos: &EfbPosition,
    mv: &EfbMove,
) -> Result<Vec<EfbPosition>, MoveViolation> {
    let split_options = |side: Side, parts: &[(StructClass, Ordinal)], tails: Option<&OmegaFamily>| {
        let mut options = Vec::new();
        for (part, rank) in parts {
            let (left, right) = match side {
                Side::Left => (part.clone(), pos.right.clone()),
                Side::Right => (pos.left.clone(), part.clone()),
            };
            options.push(EfbPosition {
                left,
                right,
                rank: rank.clone(),
            });
        }
        if let Some(tails) = tails {
            let empty = StructClass::empty(
                pos.left.vocabulary().clone(),
                pos.left.domain().clone(),
            );
            for (value, _) in tails.entries() {
                let (left, right) = match side {
                    Side::Left => (empty.clone(), pos.right.clone()),
                    Side::Right => (pos.left.clone(), empty.clone()),
                };
                options.push(EfbPosition {
                    left,
                    right,
                    rank: value.clone(),
                });
            }
        }
        options
    };
    match mv {
        EfbMove::FiniteSplit { side, parts } => Ok(split_options(*side, parts, None)),
        EfbMove::InfiniteSplit {
            side,
            parts,
            tail_ranks,
        } => Ok(split_options(*side, parts, Some(tail_ranks))),
        EfbMove::Supplement {
            side,
            var,
            choice,
            new_rank,
        } => {
            let chosen = pos
                .side(*side)
                .extend_with_choice(*var, choice)
                .map_err(|e| MoveViolation::BadChoiceFunction(e.to_string()))?;
            let starred = pos
                .side(side.flip())
                .extend_with_star(*var)
                .map_err(|e| MoveViolation::SupplementImpossible(e.to_string()))?;
            let (left, right) = match side {
                Side::Left => (chosen, starred),
                Side::Right => (starred, chosen),
            };
            Ok(vec![EfbPosition {
                left,
                right,
                rank: new_rank.clone(),
            }])
        }
        EfbMove::Claim { .. } => Ok(Vec::new()),
    }
}

pub trait StrategyI {
    /// Player I's move at the position, or `None` to stall (forfeiting).
    fn choose_move(&mut self, pos: &EfbPosition) -> Option<EfbMove>;
}

pub trait StrategyII {
    /// Player II's choice among the offered successor positions.
    fn choose_option(&mut self, pos: &EfbPosition, mv: &EfbMove, options: &[EfbPosition]) -> usize;
}

/// A seeded uniform responder for playout testing.
pub struct RandomII {
    rng: ChaCha8Rng,
}

impl RandomII {
    pub fn seeded(seed: u64) -> Self {
        use rand::SeedableRng;
        RandomII {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl StrategyII for RandomII {
    fn choose_option(&mut self, _: &EfbPosition, _: &EfbMove, options: &[EfbPosition]) -> usize {
        self.rng.gen_range(0..options.len())
    }
}

/// Replays a fixed move list.
pub struct ScriptedI {
    moves: std::vec::IntoIter<EfbMove>,
}

impl ScriptedI {
    pub fn new(moves: Vec<EfbMove>) -> Self {
        ScriptedI {
            moves: moves.into_iter(),
        }
    }
}

impl StrategyI for ScriptedI {
    fn choose_move(&mut self, _: &EfbPosition) -> Option<EfbMove> {
        self.moves.next()
    }
}

/// Replays a fixed choice list (0 when exhausted).
pub struct ScriptedII {
    choices: std::vec::IntoIter<usize>,
}

impl ScriptedII {
    pub fn new(choices: Vec<usize>) -> Self {
        ScriptedII {
            choices: choices.into_iter(),
        }
    }
}

impl StrategyII for ScriptedII {
    fn choose_option(&mut self, _: &EfbPosition, _: &EfbMove, _: &[EfbPosition]) -> usize {
        self.choices.next().unwrap_or(0)
    }
}

/// Referees a full game between the two strategies.
///
/// Every move is validated with [`efb_legal`]; an illegal move forfeits for
/// the mover. The game ends when rank 1 is reached (Player II wins unless an
/// atomic separator exists) or when Player I claims an atomic win; exhausting
/// `round_cap` yields an inconclusive trace.
pub fn efb_referee(
    start: EfbPosition,
    measure: &ComplexityMeasure,
    strategy_i: &mut dyn StrategyI,
    strategy_ii: &mut dyn StrategyII,
    round_cap: usize,
    propositional: bool,
) -> GameTrace<EfbPosition, EfbMove> {
    let initial = start.clone();
    let mut pos = start;
    let mut steps = Vec::new();
    let finish = |winner, terminal: EfbPosition, reason, steps: Vec<_>| GameTrace {
        initial: initial.clone(),
        steps,
        outcome: Outcome {
            winner,
            terminal,
            reason,
        },
    };
    for _ in 0..round_cap {
        if pos.rank <= Ordinal::one() {
            let separated = atomic_separator(&pos.left, &pos.right)
                .map(|s| s.is_some())
                .unwrap_or(false);
            let (winner, reason) = if separated {
                (Player::I, OutcomeReason::AtomicSeparatorAtTerminal)
            } else {
                (Player::II, OutcomeReason::NoSeparatorAtTerminal)
            };
            return finish(Some(winner), pos, reason, steps);
        }
        let Some(mv) = strategy_i.choose_move(&pos) else {
            return finish(Some(Player::II), pos, OutcomeReason::Stalled, steps);
        };
        if let Err(violation) = efb_legal(&pos, &mv, measure, propositional) {
            steps.push(TraceStep {
                mover: Player::I,
                mv,
                choice: None,
                after: pos.clone(),
            });
            return finish(
                Some(Player::II),
                pos,
                OutcomeReason::IllegalMove {
                    by: Player::I,
                    violation: violation.to_string(),
                },
                steps,
            );
        }
        if matches!(mv, EfbMove::Claim { .. }) {
            steps.push(TraceStep {
                mover: Player::I,
                mv,
                choice: None,
                after: pos.clone(),
            });
            return finish(Some(Player::I), pos, OutcomeReason::ClaimedAtomicWin, steps);
        }
        let options = successor_options(&pos, &mv).expect("legality was checked");
        let (choice, next) = if options.len() == 1 {
            (None, options.into_iter().next().unwrap())
        } else {
            let idx = strategy_ii.choose_option(&pos, &mv, &options);
            match options.get(idx) {
                Some(next) => (Some(idx), next.clone()),
                None => {
                    return finish(
                        Some(Player::I),
                        pos,
                        OutcomeReason::IllegalMove {
                            by: Player::II,
                            violation: format!("choice {idx} out of range"),
                        },
                        steps,
                    )
                }
            }
        };
        pos = next;
        steps.push(TraceStep {
            mover: Player::I,
            mv,
            choice,
            after: pos.clone(),
        });
    }
    finish(None, pos, OutcomeReason::RoundCapExceeded, steps)
}

/// Re-referees a recorded trace with scripted strategies; the result should
/// reproduce the original outcome.
pub fn replay_trace(
    trace: &GameTrace<EfbPosition, EfbMove>,
    measure: &ComplexityMeasure,
    propositional: bool,
) -> GameTrace<EfbPosition, EfbMove> {
    let moves: Vec<EfbMove> = trace.steps.iter().map(|s| s.mv.clone()).collect();
    let choices: Vec<usize> = trace.steps.iter().filter_map(|s| s.choice).collect();
    let rounds = trace.steps.len() + 1;
    efb_referee(
        trace.initial.clone(),
        measure,
        &mut ScriptedI::new(moves),
        &mut ScriptedII::new(choices),
        rounds,
        propositional,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn size_measure() -> ComplexityMeasure {
        ComplexityMeasure::builtin("size").unwrap()
    }

    fn strings(ss: &[&str]) -> StructClass {
        StructClass::from_bit_strings(ss).unwrap()
    }

    fn pos(a: &[&str], b: &[&str], rank: u64) -> EfbPosition {
        EfbPosition::new(strings(a), strings(b), Ordinal::nat(rank)).unwrap()
    }

    /// The subclass of `class` at the given member indices; parts of a split
    /// must share the class's structures.
    fn part(class: &StructClass, keep: &[usize]) -> StructClass {
        class.subclass(|i| keep.contains(&i))
    }

    #[test]
    fn finite_split_legality() {
        let p = pos(&["01", "10"], &["00"], 2);
        let mv = EfbMove::FiniteSplit {
            side: Side::Left,
            parts: vec![
                (part(&p.left, &[0]), Ordinal::one()),
                (part(&p.left, &[1]), Ordinal::one()),
            ],
        };
        assert!(efb_legal(&p, &mv, &size_measure(), true).is_ok());

        let too_big = EfbMove::FiniteSplit {
            side: Side::Left,
            parts: vec![
                (part(&p.left, &[0]), Ordinal::one()),
                (part(&p.left, &[1]), Ordinal::nat(2)),
            ],
        };
        assert!(matches!(
            efb_legal(&p, &too_big, &size_measure(), true),
            Err(MoveViolation::RankOverflow { .. })
        ));

        let not_cover = EfbMove::FiniteSplit {
            side: Side::Left,
            parts: vec![
                (part(&p.left, &[0]), Ordinal::one()),
                (part(&p.left, &[0]), Ordinal::one()),
            ],
        };
        assert_eq!(
            efb_legal(&p, &not_cover, &size_measure(), true),
            Err(MoveViolation::NotACover)
        );
    }

    #[test]
    fn infinite_split_needs_infinite_rank() {
        let p = pos(&["01", "10"], &["00"], 5);
        let mv = EfbMove::InfiniteSplit {
            side: Side::Left,
            parts: vec![
                (part(&p.left, &[0]), Ordinal::one()),
                (part(&p.left, &[1]), Ordinal::one()),
            ],
            tail_ranks: OmegaFamily::constant_many(Ordinal::one()),
        };
        // Omega-many nonzero ranks sum to at least omega, above any finite rank.
        assert!(matches!(
            efb_legal(&p, &mv, &size_measure(), true),
            Err(MoveViolation::RankOverflow { .. })
        ));
        let q = EfbPosition::new(strings(&["01", "10"]), strings(&["00"]), Ordinal::omega())
            .unwrap();
        assert!(efb_legal(&q, &mv, &size_measure(), true).is_ok());
    }

    #[test]
    fn referee_terminal_rules() {
        let measure = size_measure();
        // Rank 1, no separator: II wins immediately.
        let p = pos(&["01", "10"], &["00", "11"], 1);
        let trace = efb_referee(
            p,
            &measure,
            &mut ScriptedI::new(vec![]),
            &mut ScriptedII::new(vec![]),
            10,
            true,
        );
        assert_eq!(trace.outcome.winner, Some(Player::II));
        assert_eq!(trace.outcome.reason, OutcomeReason::NoSeparatorAtTerminal);

        // Rank 1 with a separator: I wins.
        let p = pos(&["1"], &["0"], 1);
        let trace = efb_referee(
            p,
            &measure,
            &mut ScriptedI::new(vec![]),
            &mut ScriptedII::new(vec![]),
            10,
            true,
        );
        assert_eq!(trace.outcome.winner, Some(Player::I));
        assert_eq!(
            trace.outcome.reason,
            OutcomeReason::AtomicSeparatorAtTerminal
        );
    }

    #[test]
    fn referee_records_illegal_move_forfeit() {
        let measure = size_measure();
        let p = pos(&["01", "10"], &["00", "11"], 4);
        let bad = EfbMove::FiniteSplit {
            side: Side::Left,
            parts: vec![
                (part(&p.left, &[0]), Ordinal::nat(3)),
                (part(&p.left, &[1]), Ordinal::nat(2)),
            ],
        };
        let trace = efb_referee(
            p,
            &measure,
            &mut ScriptedI::new(vec![bad]),
            &mut ScriptedII::new(vec![0]),
            10,
            true,
        );
        assert_eq!(trace.outcome.winner, Some(Player::II));
        assert!(matches!(
            trace.outcome.reason,
            OutcomeReason::IllegalMove { by: Player::I, .. }
        ));
        let replayed = replay_trace(&trace, &measure, true);
        assert_eq!(replayed.outcome, trace.outcome);
    }

    #[test]
    fn scripted_parity_game() {
        // I splits the parity class and claims the matching literal per part.
        let measure = size_measure();
        let p = pos(&["01", "10"], &["00", "11"], 4);
        let split = EfbMove::FiniteSplit {
            side: Side::Right,
            parts: vec![
                (part(&p.right, &[0]), Ordinal::nat(2)),
                (part(&p.right, &[1]), Ordinal::nat(2)),
            ],
        };
        let second = EfbMove::FiniteSplit {
            side: Side::Left,
            parts: vec![
                (part(&p.left, &[0]), Ordinal::one()),
                (part(&p.left, &[1]), Ordinal::one()),
            ],
        };
        let trace = efb_referee(
            p,
            &measure,
            &mut ScriptedI::new(vec![split, second]),
            &mut ScriptedII::new(vec![0, 0]),
            10,
            true,
        );
        // After II picks B1 = {00} and then A1 = {01}, p1 separates at rank 1.
        assert_eq!(trace.outcome.winner, Some(Player::I));
        let replayed = replay_trace(&trace, &measure, true);
        assert_eq!(replayed.outcome, trace.outcome);
    }
}
