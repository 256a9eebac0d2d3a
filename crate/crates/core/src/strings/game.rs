//! The propositional splitting game on intensional string classes.
//!
//! Positions hold dense-property classes (or, after an endgame switch, a
//! single anchored string) and a rank below `w^2`; Player I's moves split a
//! side into clopen pieces with bounded supports. Player II is driven by the
//! segment-maintenance strategy: she keeps a witness segment `f` such that
//! both classes are dense above `f`, answers generalized finite splits by
//! the iterated-extension search and restriction to a refined `f'`, and on a
//! proper infinite split jumps to the endgame: she anchors a single string
//! on the split side and thereafter picks the piece that keeps arbitrarily
//! long agreements with the anchor alive on the other side.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    check_condition_e9, extension_condition_holds, segments_below, Clopen, DenseProperty, Segment,
    StringsError, UPString,
};
use crate::games::{GameTrace, Outcome, OutcomeReason, Player, Side, TraceStep};
use crate::ordinal::{Multiplicity, OmegaFamily, Ordinal};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum DenseViolation {
    #[error("rank arithmetic overflows: needs {required}, position has {available}")]
    RankOverflow {
        required: Ordinal,
        available: Ordinal,
    },
    #[error("pieces do not cover the split side")]
    NotACover,
    #[error("split ranks must be nonzero")]
    ZeroRank,
    #[error("a finite split needs at least two pieces")]
    TooFewParts,
    #[error("tail ranks of an infinite split must be omega-indexed")]
    TailNotOmegaIndexed,
    #[error("piece support {pos} is outside the bound {bound}")]
    SupportBound { pos: u64, bound: u64 },
    #[error("only an atomic claim is possible at rank 1")]
    TerminalRank,
    #[error("claimed literal does not separate the classes")]
    ClaimFails,
}

/// One side of a dense-game position: an intensional class, or the single
/// anchored string Player II keeps after an endgame switch.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DenseClass {
    Singleton(UPString),
    Property(DenseProperty),
}

impl DenseClass {
    pub fn ext(&self, g: &Segment) -> bool {
        match self {
            DenseClass::Property(p) => p.ext(g),
            DenseClass::Singleton(h) => h.extends(g),
        }
    }

    /// Does every member of the class have bit `value` at `pos`? (Vacuously
    /// true for an empty class.)
    fn all_have(&self, pos: u64, value: bool) -> bool {
        !self.ext(&Segment::from_pairs([(pos, !value)]))
    }

    fn support(&self) -> std::collections::BTreeSet<u64> {
        match self {
            DenseClass::Property(p) => p.support(),
            DenseClass::Singleton(_) => Default::default(),
        }
    }

    /// The class cut down to the piece and the segment.
    fn restricted(&self, piece: Option<&Clopen>, seg: &Segment) -> DenseClass {
        match self {
            DenseClass::Property(p) => {
                let mut p = p.clone();
                p.filter = p
                    .filter
                    .union(seg)
                    .expect("restriction segments are consistent with the filter");
                if let Some(c) = piece {
                    p.clopen.push(c.clone());
                }
                DenseClass::Property(p)
            }
            DenseClass::Singleton(h) => DenseClass::Singleton(h.clone()),
        }
    }

    fn satisfies_piece(&self, piece: &Clopen, probe: &Segment) -> bool {
        match self {
            DenseClass::Property(p) => {
                let mut cut = p.clone();
                cut.clopen.push(piece.clone());
                cut.ext(probe)
            }
            DenseClass::Singleton(h) => h.extends(probe) && piece.satisfied_by(&|i| h.bit(i)),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct DensePosition {
    pub left: DenseClass,
    pub right: DenseClass,
    pub rank: Ordinal,
}

impl DensePosition {
    pub fn side(&self, side: Side) -> &DenseClass {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn with_side(&self, side: Side, class: DenseClass, rank: Ordinal) -> DensePosition {
        let mut next = self.clone();
        next.rank = rank;
        match side {
            Side::Left => next.left = class,
            Side::Right => next.right = class,
        }
        next
    }
}

/// Player I's moves in the clopen fragment. A finite split lists `n >= 2`
/// pieces (the generalized finite splitting move); an infinite split lists
/// finitely many pieces and an omega-repeated tail piece whose copies carry
/// the ranks of `tail_ranks`. The split is proper exactly when the tail
/// piece meets the class.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum DenseMove {
    FiniteSplit {
        side: Side,
        parts: Vec<(Clopen, Ordinal)>,
    },
    InfiniteSplit {
        side: Side,
        parts: Vec<(Clopen, Ordinal)>,
        tail_piece: Clopen,
        tail_ranks: OmegaFamily,
    },
    Claim {
        pos: u64,
        value: bool,
    },
}

/// True iff the ordinal is of the form `w*k + m`.
pub fn below_omega_squared(rank: &Ordinal) -> bool {
    rank.terms()
        .iter()
        .all(|(e, _)| e.as_nat().is_some_and(|n| n <= 1))
}

fn check_supports(pieces: &[&Clopen], bound: u64) -> Result<(), DenseViolation> {
    for piece in pieces {
        if let Some(pos) = piece.support().iter().find(|p| **p >= bound) {
            return Err(DenseViolation::SupportBound { pos: *pos, bound });
        }
    }
    Ok(())
}

fn covers(class: &DenseClass, pieces: &[&Clopen]) -> bool {
    match class {
        DenseClass::Property(p) => {
            let mut cut = p.clone();
            for piece in pieces {
                cut.clopen.push((*piece).clone().negated());
            }
            !cut.ext(&Segment::empty())
        }
        DenseClass::Singleton(h) => pieces.iter().any(|c| c.satisfied_by(&|i| h.bit(i))),
    }
}

/// Validates a move against a position. The game is the propositional one
/// under the `size` measure: finite splits fold ranks with the natural sum,
/// infinite splits take the infinite natural sum of the full rank family.
pub fn dense_legal(
    pos: &DensePosition,
    mv: &DenseMove,
    support_bound: u64,
) -> Result<(), DenseViolation> {
    match mv {
        DenseMove::Claim { pos: bit, value } => {
            if pos.left.all_have(*bit, *value) && pos.right.all_have(*bit, !*value) {
                Ok(())
            } else {
                Err(DenseViolation::ClaimFails)
            }
        }
        _ if pos.rank <= Ordinal::one() => Err(DenseViolation::TerminalRank),
        DenseMove::FiniteSplit { side, parts } => {
            if parts.len() < 2 {
                return Err(DenseViolation::TooFewParts);
            }
            if parts.iter().any(|(_, r)| r.is_zero()) {
                return Err(DenseViolation::ZeroRank);
            }
            let pieces: Vec<&Clopen> = parts.iter().map(|(c, _)| c).collect();
            check_supports(&pieces, support_bound)?;
            if !covers(pos.side(*side), &pieces) {
                return Err(DenseViolation::NotACover);
            }
            let required = parts
                .iter()
                .fold(Ordinal::zero(), |acc, (_, r)| acc.natural_sum(r));
            if required > pos.rank {
                return Err(DenseViolation::RankOverflow {
                    required,
                    available: pos.rank.clone(),
                });
            }
            Ok(())
        }
        DenseMove::InfiniteSplit {
            side,
            parts,
            tail_piece,
            tail_ranks,
        } => {
            if !tail_ranks.is_infinite() {
                return Err(DenseViolation::TailNotOmegaIndexed);
            }
            if parts.iter().any(|(_, r)| r.is_zero()) || tail_ranks.values().any(|v| v.is_zero())
            {
                return Err(DenseViolation::ZeroRank);
            }
            let mut pieces: Vec<&Clopen> = parts.iter().map(|(c, _)| c).collect();
            pieces.push(tail_piece);
            check_supports(&pieces, support_bound)?;
            if !covers(pos.side(*side), &pieces) {
                return Err(DenseViolation::NotACover);
            }
            let mut entries: Vec<(Ordinal, Multiplicity)> = tail_ranks.entries().to_vec();
            entries.extend(parts.iter().map(|(_, r)| (r.clone(), Multiplicity::Finite(1))));
            let family = OmegaFamily::new(entries).expect("nonempty by construction");
            let required = family
                .infinite_natural_sum()
                .expect("tail makes the family omega-indexed");
            if required > pos.rank {
                return Err(DenseViolation::RankOverflow {
                    required,
                    available: pos.rank.clone(),
                });
            }
            Ok(())
        }
    }
}

/// An atomic separator between the two sides, as a bit literal, if any.
/// Only positions the constraints mention (plus everything below the
/// support bound) can carry one.
pub fn dense_atomic_separator(pos: &DensePosition, support_bound: u64) -> Option<(u64, bool)> {
    let mut candidates = pos.left.support();
    candidates.extend(pos.right.support());
    candidates.extend(0..support_bound);
    if let DenseClass::Property(p) = &pos.left {
        candidates.extend(p.filter.support());
    }
    if let DenseClass::Property(p) = &pos.right {
        candidates.extend(p.filter.support());
    }
    for i in candidates {
        for value in [false, true] {
            if pos.left.all_have(i, value) && pos.right.all_have(i, !value) {
                return Some((i, value));
            }
        }
    }
    None
}

enum Endgame {
    /// The anchored string and which side it sits on.
    Anchored { anchor: UPString, side: Side },
}

/// Player II's strategy state: the maintained witness segment, switching to
/// the anchored endgame after a proper infinite split.
pub struct PlayerTwo {
    support_bound: u64,
    witness: Segment,
    endgame: Option<Endgame>,
    endgame_entered: bool,
}

/// Player II's answer to one move: the index of the piece she picks (listed
/// pieces first, then one slot per tail rank entry) and the next position
/// after her strategy-internal restriction.
pub struct P2Response {
    pub choice: usize,
    pub next: DensePosition,
}

impl PlayerTwo {
    /// Sets up the strategy for a starting position, finding the initial
    /// witness segment; fails when the pair is not dense-compatible within
    /// the bound.
    pub fn for_position(pos: &DensePosition, support_bound: u64) -> Result<Self, StringsError> {
        let witness = match (&pos.left, &pos.right) {
            (DenseClass::Property(l), DenseClass::Property(r)) => {
                check_condition_e9(l, r, support_bound).ok_or(StringsError::NoExtensionPiece)?
            }
            _ => Segment::empty(),
        };
        Ok(PlayerTwo {
            support_bound,
            witness,
            endgame: None,
            endgame_entered: false,
        })
    }

    pub fn witness(&self) -> &Segment {
        &self.witness
    }

    /// Whether the proper-infinite-split endgame was ever entered.
    pub fn endgame_entered(&self) -> bool {
        self.endgame_entered
    }

    /// Answers a validated non-claim move.
    pub fn respond(
        &mut self,
        pos: &DensePosition,
        mv: &DenseMove,
    ) -> Result<P2Response, StringsError> {
        if let Some(Endgame::Anchored { anchor, side }) = &self.endgame {
            let (anchor, anchor_side) = (anchor.clone(), *side);
            return self.respond_endgame(pos, mv, &anchor, anchor_side);
        }
        match mv {
            DenseMove::FiniteSplit { side, parts } => self.answer_generalized(pos, *side, parts),
            DenseMove::InfiniteSplit {
                side,
                parts,
                tail_piece,
                tail_ranks,
            } => {
                let proper = pos.side(*side).satisfies_piece(tail_piece, &Segment::empty());
                if proper {
                    self.enter_endgame(pos, *side, parts, tail_piece, tail_ranks)
                } else {
                    // Degenerate infinite split: only the listed pieces can
                    // be nonempty, so answer it like a finite split.
                    self.answer_generalized(pos, *side, parts)
                }
            }
            DenseMove::Claim { .. } => Err(StringsError::BadMove(
                "claims are resolved by the referee".into(),
            )),
        }
    }

    /// Generalized finite split: find a piece and a refined segment
    /// satisfying the extension condition, pick that piece, and restrict
    /// both sides to the refined segment.
    fn answer_generalized(
        &mut self,
        pos: &DensePosition,
        side: Side,
        parts: &[(Clopen, Ordinal)],
    ) -> Result<P2Response, StringsError> {
        let split_class = match pos.side(side) {
            DenseClass::Property(p) => p,
            DenseClass::Singleton(_) => {
                return Err(StringsError::BadMove(
                    "generalized split against a singleton outside the endgame".into(),
                ))
            }
        };
        for (idx, (piece, rank)) in parts.iter().enumerate() {
            let mut piece_class = split_class.clone();
            piece_class.clopen.push(piece.clone());
            // Breadth-first over refinements of the witness segment.
            for candidate in segments_below(self.support_bound) {
                if !candidate.includes(&self.witness) {
                    continue;
                }
                if extension_condition_holds(&piece_class, &candidate, self.support_bound) {
                    let next_side = pos
                        .side(side)
                        .restricted(Some(piece), &candidate);
                    let other = pos.side(side.flip()).restricted(None, &candidate);
                    let next = match side {
                        Side::Left => DensePosition {
                            left: next_side,
                            right: other,
                            rank: rank.clone(),
                        },
                        Side::Right => DensePosition {
                            left: other,
                            right: next_side,
                            rank: rank.clone(),
                        },
                    };
                    self.witness = candidate;
                    return Ok(P2Response { choice: idx, next });
                }
            }
        }
        Err(StringsError::NoExtensionPiece)
    }

    /// Proper infinite split: pick a nonempty piece with a finite rank
    /// (one exists since the rank family sums below `w^2`), anchor a single
    /// witness string of that piece, and switch to the endgame.
    fn enter_endgame(
        &mut self,
        pos: &DensePosition,
        side: Side,
        parts: &[(Clopen, Ordinal)],
        tail_piece: &Clopen,
        tail_ranks: &OmegaFamily,
    ) -> Result<P2Response, StringsError> {
        let class = pos.side(side);
        let mut options: Vec<(usize, Clopen, Ordinal)> = parts
            .iter()
            .enumerate()
            .map(|(i, (c, r))| (i, c.clone(), r.clone()))
            .collect();
        for (offset, (value, _)) in tail_ranks.entries().iter().enumerate() {
            options.push((parts.len() + offset, tail_piece.clone(), value.clone()));
        }
        let (choice, piece, rank) = options
            .into_iter()
            .find(|(_, piece, rank)| {
                rank.is_finite() && class.satisfies_piece(piece, &Segment::empty())
            })
            .ok_or(StringsError::NoFiniteRankPiece)?;
        let anchor = match class {
            DenseClass::Property(p) => {
                let mut cut = p.clone();
                cut.clopen.push(piece);
                cut.witness(&self.witness)
                    .ok_or(StringsError::NoFiniteRankPiece)?
            }
            DenseClass::Singleton(h) => h.clone(),
        };
        let next = pos.with_side(side, DenseClass::Singleton(anchor.clone()), rank);
        self.endgame = Some(Endgame::Anchored { anchor, side });
        self.endgame_entered = true;
        Ok(P2Response { choice, next })
    }

    /// Endgame play: on the anchor's side pick any piece containing the
    /// anchor; on the other side pick a piece whose condition the anchor's
    /// bits satisfy and whose class still has members agreeing with the
    /// anchor below the bound (such members then agree at every bounded
    /// support, so no literal ever separates).
    fn respond_endgame(
        &mut self,
        pos: &DensePosition,
        mv: &DenseMove,
        anchor: &UPString,
        anchor_side: Side,
    ) -> Result<P2Response, StringsError> {
        let (side, parts) = match mv {
            DenseMove::FiniteSplit { side, parts } => (*side, parts.clone()),
            DenseMove::InfiniteSplit {
                side,
                parts,
                tail_piece,
                tail_ranks,
            } => {
                // Illegal at the finite ranks of the endgame, but answerable
                // anyway: treat the tail entries as extra pieces.
                let mut all = parts.clone();
                for (value, _) in tail_ranks.entries() {
                    all.push((tail_piece.clone(), value.clone()));
                }
                (*side, all)
            }
            DenseMove::Claim { .. } => {
                return Err(StringsError::BadMove(
                    "claims are resolved by the referee".into(),
                ))
            }
        };
        let anchor_bits = |i: u64| anchor.bit(i);
        let agreement = Segment::from_pairs((0..self.support_bound).map(|i| (i, anchor.bit(i))));
        let chosen = parts.iter().enumerate().find(|(_, (piece, _))| {
            if side == anchor_side {
                piece.satisfied_by(&anchor_bits)
            } else {
                piece.satisfied_by(&anchor_bits)
                    && pos.side(side).satisfies_piece(piece, &agreement)
            }
        });
        let (idx, (piece, rank)) = chosen.ok_or(StringsError::NoExtensionPiece)?;
        let next_class = if side == anchor_side {
            pos.side(side).clone()
        } else {
            pos.side(side).restricted(Some(piece), &Segment::empty())
        };
        Ok(P2Response {
            choice: idx,
            next: pos.with_side(side, next_class, rank.clone()),
        })
    }
}

pub trait Adversary {
    fn choose(&mut self, pos: &DensePosition) -> Option<DenseMove>;
}

pub struct ScriptedAdversary {
    moves: std::vec::IntoIter<DenseMove>,
}

impl ScriptedAdversary {
    pub fn new(moves: Vec<DenseMove>) -> Self {
        ScriptedAdversary {
            moves: moves.into_iter(),
        }
    }
}

impl Adversary for ScriptedAdversary {
    fn choose(&mut self, _: &DensePosition) -> Option<DenseMove> {
        self.moves.next()
    }
}

/// A seeded adversary playing random legal clopen splits: binary or ternary
/// finite splits of either side, and (at infinite rank) proper infinite
/// splits with an omega-repeated tail.
pub struct RandomClopenAdversary {
    rng: ChaCha8Rng,
    support_bound: u64,
}

impl RandomClopenAdversary {
    pub fn seeded(seed: u64, support_bound: u64) -> Self {
        use rand::SeedableRng;
        RandomClopenAdversary {
            rng: ChaCha8Rng::seed_from_u64(seed),
            support_bound,
        }
    }

    fn random_piece(&mut self) -> Clopen {
        let p = self.rng.gen_range(0..self.support_bound);
        let v = self.rng.gen_bool(0.5);
        if self.rng.gen_bool(0.3) {
            let q = self.rng.gen_range(0..self.support_bound);
            let w = self.rng.gen_bool(0.5);
            Clopen::all_of(vec![Clopen::bit(p, v), Clopen::bit(q, w)])
        } else {
            Clopen::bit(p, v)
        }
    }

    /// A pair of nonzero ordinals whose natural sum stays within `rank`.
    fn random_rank_pair(&mut self, rank: &Ordinal) -> Option<(Ordinal, Ordinal)> {
        let (k, m) = omega_coeffs(rank);
        for _ in 0..20 {
            let k1 = if k == 0 { 0 } else { self.rng.gen_range(0..=k) };
            let k2_max = k - k1;
            let k2 = if k2_max == 0 {
                0
            } else {
                self.rng.gen_range(0..=k2_max)
            };
            let m_budget = if k1 + k2 < k { 5 } else { m };
            let m1 = self.rng.gen_range(0..=m_budget);
            let m2 = self.rng.gen_range(0..=m_budget.saturating_sub(m1));
            let g1 = omega_times_plus(k1, m1);
            let g2 = omega_times_plus(k2, m2);
            if !g1.is_zero() && !g2.is_zero() && g1.natural_sum(&g2) <= *rank {
                return Some((g1, g2));
            }
        }
        // Deterministic fallbacks.
        if m >= 2 {
            Some((omega_times_plus(k, m - 1), Ordinal::one()))
        } else if k >= 1 && m == 1 {
            Some((omega_times_plus(k, 0), Ordinal::one()))
        } else if k >= 2 {
            Some((omega_times_plus(k - 1, 0), Ordinal::omega()))
        } else if k == 1 {
            Some((Ordinal::one(), Ordinal::one()))
        } else {
            None
        }
    }
}

fn omega_coeffs(rank: &Ordinal) -> (u64, u64) {
    let mut k = 0;
    let mut m = 0;
    for (e, c) in rank.terms() {
        match e.as_nat() {
            Some(0) => m = *c,
            Some(1) => k = *c,
            _ => {}
        }
    }
    (k, m)
}

fn omega_times_plus(k: u64, m: u64) -> Ordinal {
    Ordinal::omega()
        .scale_by_nat(k)
        .natural_sum(&Ordinal::nat(m))
}

impl Adversary for RandomClopenAdversary {
    fn choose(&mut self, pos: &DensePosition) -> Option<DenseMove> {
        let side = if self.rng.gen_bool(0.5) {
            Side::Left
        } else {
            Side::Right
        };
        let (k, _) = omega_coeffs(&pos.rank);
        if k >= 1 && self.rng.gen_bool(0.3) {
            // Proper infinite split: a few listed refinements plus the
            // full class repeated omega-often at finite ranks.
            let piece = self.random_piece();
            let listed_rank = Ordinal::nat(self.rng.gen_range(1..=4));
            let tail_rank = Ordinal::nat(self.rng.gen_range(1..=4));
            return Some(DenseMove::InfiniteSplit {
                side,
                parts: vec![(piece, listed_rank)],
                tail_piece: Clopen::True,
                tail_ranks: OmegaFamily::constant_many(tail_rank),
            });
        }
        let (g1, g2) = self.random_rank_pair(&pos.rank)?;
        let piece = self.random_piece();
        if self.rng.gen_bool(0.25) {
            // Ternary split refining the first piece.
            let refine = self.random_piece();
            let half = |r: &Ordinal| {
                let (k, m) = omega_coeffs(r);
                if m >= 2 {
                    (omega_times_plus(k, m - 1), Ordinal::one())
                } else if k >= 1 {
                    (omega_times_plus(k - 1, 3), Ordinal::one())
                } else {
                    (r.clone(), Ordinal::one())
                }
            };
            let (g1a, g1b) = half(&g1);
            if !g1a.is_zero()
                && g1a.natural_sum(&g1b).natural_sum(&g2) <= pos.rank
            {
                return Some(DenseMove::FiniteSplit {
                    side,
                    parts: vec![
                        (
                            Clopen::all_of(vec![piece.clone(), refine.clone()]),
                            g1a,
                        ),
                        (Clopen::all_of(vec![piece.clone(), refine.negated()]), g1b),
                        (piece.negated(), g2),
                    ],
                });
            }
        }
        Some(DenseMove::FiniteSplit {
            side,
            parts: vec![(piece.clone(), g1), (piece.negated(), g2)],
        })
    }
}

/// Referees a full playout of the propositional game on dense classes, with
/// Player II driven by [`PlayerTwo`] and Player I by the adversary.
///
/// Errors are reserved for Player II's own search failing (which the
/// adequacy argument rules out within the configured bounds); adversary
/// misplay is an in-game forfeit recorded in the trace.
pub fn simulate_dense_game(
    p1: &DenseProperty,
    p2: &DenseProperty,
    rank: &Ordinal,
    adversary: &mut dyn Adversary,
    round_cap: usize,
    support_bound: u64,
) -> Result<GameTrace<DensePosition, DenseMove>, StringsError> {
    let trace = simulate_with_player(p1, p2, rank, adversary, round_cap, support_bound)?.0;
    Ok(trace)
}

/// Like [`simulate_dense_game`], also returning Player II's final strategy
/// state (to inspect endgame entry).
pub fn simulate_with_player(
    p1: &DenseProperty,
    p2: &DenseProperty,
    rank: &Ordinal,
    adversary: &mut dyn Adversary,
    round_cap: usize,
    support_bound: u64,
) -> Result<(GameTrace<DensePosition, DenseMove>, PlayerTwo), StringsError> {
    if !below_omega_squared(rank) {
        return Err(StringsError::RankTooLarge);
    }
    let initial = DensePosition {
        left: DenseClass::Property(p1.clone()),
        right: DenseClass::Property(p2.clone()),
        rank: rank.clone(),
    };
    let mut player_two = PlayerTwo::for_position(&initial, support_bound)?;
    let mut pos = initial.clone();
    let mut steps = Vec::new();
    let finish = |winner, terminal: DensePosition, reason, steps: Vec<_>, p2: PlayerTwo| {
        Ok((
            GameTrace {
                initial: initial.clone(),
                steps,
                outcome: Outcome {
                    winner,
                    terminal,
                    reason,
                },
            },
            p2,
        ))
    };
    for _ in 0..round_cap {
        if pos.rank <= Ordinal::one() {
            let separated = dense_atomic_separator(&pos, support_bound).is_some();
            let (winner, reason) = if separated {
                (Player::I, OutcomeReason::AtomicSeparatorAtTerminal)
            } else {
                (Player::II, OutcomeReason::NoSeparatorAtTerminal)
            };
            return finish(Some(winner), pos, reason, steps, player_two);
        }
        let Some(mv) = adversary.choose(&pos) else {
            return finish(Some(Player::II), pos, OutcomeReason::Stalled, steps, player_two);
        };
        if let Err(violation) = dense_legal(&pos, &mv, support_bound) {
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
                player_two,
            );
        }
        if matches!(mv, DenseMove::Claim { .. }) {
            steps.push(TraceStep {
                mover: Player::I,
                mv,
                choice: None,
                after: pos.clone(),
            });
            return finish(
                Some(Player::I),
                pos,
                OutcomeReason::ClaimedAtomicWin,
                steps,
                player_two,
            );
        }
        let response = player_two.respond(&pos, &mv)?;
        pos = response.next;
        steps.push(TraceStep {
            mover: Player::I,
            mv,
            choice: Some(response.choice),
            after: pos.clone(),
        });
    }
    finish(None, pos, OutcomeReason::RoundCapExceeded, steps, player_two)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strings::BaseProperty;

    fn fin() -> DenseProperty {
        DenseProperty::new(BaseProperty::FinitelyManyOnes)
    }

    fn odd() -> DenseProperty {
        DenseProperty::new(BaseProperty::OddManyOnes)
    }

    #[test]
    fn rank_one_is_an_immediate_ii_win_on_dense_pairs() {
        let trace = simulate_dense_game(
            &fin(),
            &odd(),
            &Ordinal::one(),
            &mut ScriptedAdversary::new(vec![]),
            10,
            4,
        )
        .unwrap();
        assert_eq!(trace.outcome.winner, Some(Player::II));
        assert_eq!(trace.outcome.reason, OutcomeReason::NoSeparatorAtTerminal);
    }

    #[test]
    fn generalized_split_keeps_the_witness_condition() {
        let pos = DensePosition {
            left: DenseClass::Property(fin()),
            right: DenseClass::Property(odd()),
            rank: Ordinal::nat(4),
        };
        let mut p2 = PlayerTwo::for_position(&pos, 4).unwrap();
        let mv = DenseMove::FiniteSplit {
            side: Side::Left,
            parts: vec![
                (Clopen::bit(0, false), Ordinal::nat(2)),
                (Clopen::bit(0, true), Ordinal::nat(2)),
            ],
        };
        assert!(dense_legal(&pos, &mv, 4).is_ok());
        let resp = p2.respond(&pos, &mv).unwrap();
        let (DenseClass::Property(l), DenseClass::Property(r)) =
            (&resp.next.left, &resp.next.right)
        else {
            panic!("both sides stay intensional")
        };
        assert!(check_condition_e9(l, r, 4).is_some());
        assert!(!p2.endgame_entered());
    }

    #[test]
    fn degenerate_infinite_split_is_a_finite_split() {
        let pos = DensePosition {
            left: DenseClass::Property(fin()),
            right: DenseClass::Property(odd()),
            rank: Ordinal::omega(),
        };
        let mut p2 = PlayerTwo::for_position(&pos, 4).unwrap();
        let mv = DenseMove::InfiniteSplit {
            side: Side::Left,
            parts: vec![
                (Clopen::bit(1, false), Ordinal::nat(3)),
                (Clopen::bit(1, true), Ordinal::nat(3)),
            ],
            tail_piece: Clopen::False,
            tail_ranks: OmegaFamily::constant_many(Ordinal::one()),
        };
        assert!(dense_legal(&pos, &mv, 4).is_ok());
        let resp = p2.respond(&pos, &mv).unwrap();
        assert!(!p2.endgame_entered());
        assert!(resp.choice < 2);
        assert_eq!(resp.next.rank, Ordinal::nat(3));
    }

    #[test]
    fn proper_infinite_split_triggers_the_endgame() {
        let pos = DensePosition {
            left: DenseClass::Property(fin()),
            right: DenseClass::Property(odd()),
            rank: Ordinal::omega(),
        };
        let mut p2 = PlayerTwo::for_position(&pos, 4).unwrap();
        // First-one-at-i style split: a couple of refinements listed, the
        // rest repeated on the tail.
        let mv = DenseMove::InfiniteSplit {
            side: Side::Left,
            parts: vec![
                (Clopen::bit(0, true), Ordinal::one()),
                (
                    Clopen::all_of(vec![Clopen::bit(0, false), Clopen::bit(1, true)]),
                    Ordinal::one(),
                ),
            ],
            tail_piece: Clopen::all_of(vec![Clopen::bit(0, false), Clopen::bit(1, false)]),
            tail_ranks: OmegaFamily::constant_many(Ordinal::one()),
        };
        assert!(dense_legal(&pos, &mv, 4).is_ok());
        let resp = p2.respond(&pos, &mv).unwrap();
        assert!(p2.endgame_entered());
        assert!(matches!(
            (&resp.next.left, &resp.next.right),
            (DenseClass::Singleton(_), DenseClass::Property(_))
        ));
        assert!(resp.next.rank.is_finite());
    }

    #[test]
    fn scripted_endgame_ends_in_a_ii_win() {
        let split = DenseMove::InfiniteSplit {
            side: Side::Left,
            parts: vec![(Clopen::bit(0, true), Ordinal::nat(3))],
            tail_piece: Clopen::bit(0, false),
            tail_ranks: OmegaFamily::constant_many(Ordinal::nat(3)),
        };
        let chase = DenseMove::FiniteSplit {
            side: Side::Right,
            parts: vec![
                (Clopen::bit(1, false), Ordinal::one()),
                (Clopen::bit(1, true), Ordinal::one()),
            ],
        };
        let (trace, p2) = simulate_with_player(
            &fin(),
            &odd(),
            &Ordinal::omega(),
            &mut ScriptedAdversary::new(vec![split, chase]),
            20,
            4,
        )
        .unwrap();
        assert!(p2.endgame_entered());
        assert_eq!(trace.outcome.winner, Some(Player::II));
    }

    #[test]
    fn random_adversaries_never_beat_player_two() {
        for seed in 0..25 {
            let rank = omega_times_plus(1 + seed % 3, seed % 4);
            let mut adversary = RandomClopenAdversary::seeded(seed, 5);
            let trace =
                simulate_dense_game(&fin(), &odd(), &rank, &mut adversary, 30, 5).unwrap();
            assert_ne!(trace.outcome.winner, Some(Player::I), "seed {seed}");
        }
    }
}
