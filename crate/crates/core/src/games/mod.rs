//! Game referees and solvers.
//!
//! `efd` is the classic back-and-forth game on a pair of structures; `efb`
//! referees the measure-parametric splitting/supplementing game on pairs of
//! structure classes; `solver` computes the least rank at which Player I
//! wins the finite-rank game, together with an executable winning strategy.

pub mod efb;
pub mod efd;
pub mod solver;

pub use efb::{
    efb_legal, efb_referee, replay_trace, successor_options, EfbMove, EfbPosition, MoveViolation,
    RandomII, ScriptedI, ScriptedII, StrategyI, StrategyII,
};
pub use efd::{efd_referee_step, efd_winner, EfdError, EfdMove, EfdPosition};
pub use solver::{min_separating_value, CounterStrategyII, EfbSolver, MinSepResult, SolveCaps,
    SolveError, StrategyTable};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Player {
    I,
    II,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// A replayable record of one game: re-refereeing the recorded moves and
/// choices reproduces the outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameTrace<P, M> {
    pub initial: P,
    pub steps: Vec<TraceStep<P, M>>,
    pub outcome: Outcome<P>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep<P, M> {
    pub mover: Player,
    pub mv: M,
    /// Player II's choice among the offered successor positions, for moves
    /// that offer one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<usize>,
    pub after: P,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome<P> {
    /// `None` when the game was cut off inconclusively.
    pub winner: Option<Player>,
    pub terminal: P,
    pub reason: OutcomeReason,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum OutcomeReason {
    /// Rank 1 reached with an atomic separator: Player I wins.
    AtomicSeparatorAtTerminal,
    /// Rank 1 reached with no atomic separator: Player II wins.
    NoSeparatorAtTerminal,
    /// Player I claimed an atomic win mid-game and the claim checked out.
    ClaimedAtomicWin,
    /// The mover played an illegal move and forfeits.
    IllegalMove { by: Player, violation: String },
    /// Player I had no move to offer; Player II wins.
    Stalled,
    /// The round cap was exhausted; no winner is declared.
    RoundCapExceeded,
}
