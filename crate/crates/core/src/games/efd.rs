//! The ordinal-clocked back-and-forth game on a pair of structures.
//!
//! Positions are tuple pairs with a remaining rank; Player I picks an
//! element on either side together with a strictly smaller ordinal, Player
//! II replies on the other side, and at rank 0 Player II wins exactly when
//! the accumulated pairing is a partial isomorphism.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Player, Side};
use crate::ordinal::Ordinal;
use crate::structures::{partial_iso_check, ElemId, Structure};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum EfdError {
    #[error("the position is terminal (rank 0)")]
    TerminalPosition,
    #[error("the chosen ordinal does not decrease the rank")]
    RankNotDecreased,
    #[error("element {0} is outside the universe")]
    ElementOutsideUniverse(ElemId),
    #[error("rank {rank} exceeds the configured cap {cap}")]
    RankBudgetExceeded { rank: u32, cap: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfdPosition {
    pub a_tuple: Vec<ElemId>,
    pub b_tuple: Vec<ElemId>,
    pub rank: Ordinal,
}

impl EfdPosition {
    pub fn start(rank: Ordinal) -> Self {
        EfdPosition {
            a_tuple: Vec::new(),
            b_tuple: Vec::new(),
            rank,
        }
    }
}

/// Player I's move: an element on the given side and the next rank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfdMove {
    pub side: Side,
    pub element: ElemId,
    pub new_rank: Ordinal,
}

/// Applies one round: Player I's element-and-ordinal choice, then Player
/// II's reply on the opposite side. Both tuples grow and the rank drops to
/// the chosen ordinal.
pub fn efd_referee_step(
    a: &Structure,
    b: &Structure,
    pos: &EfdPosition,
    mv: &EfdMove,
    reply: ElemId,
) -> Result<EfdPosition, EfdError> {
    if pos.rank.is_zero() {
        return Err(EfdError::TerminalPosition);
    }
    if mv.new_rank >= pos.rank {
        return Err(EfdError::RankNotDecreased);
    }
    let (in_a, in_b) = match mv.side {
        Side::Left => (mv.element, reply),
        Side::Right => (reply, mv.element),
    };
    if !a.universe().contains(&in_a) {
        return Err(EfdError::ElementOutsideUniverse(in_a));
    }
    if !b.universe().contains(&in_b) {
        return Err(EfdError::ElementOutsideUniverse(in_b));
    }
    let mut next = pos.clone();
    next.a_tuple.push(in_a);
    next.b_tuple.push(in_b);
    next.rank = mv.new_rank.clone();
    Ok(next)
}

/// Solves the rank-`n` game exhaustively and returns the winner.
///
/// At finite rank, Player I's ordinal choice is fixed to `rank - 1`: a
/// winning strategy with fewer remaining moves embeds into the game with
/// more, so the maximal choice is optimal for I.
pub fn efd_winner(a: &Structure, b: &Structure, n: u32, cap: u32) -> Result<Player, EfdError> {
    if n > cap {
        return Err(EfdError::RankBudgetExceeded { rank: n, cap });
    }
    let mut memo = HashMap::new();
    let ii = ii_wins(a, b, &mut Vec::new(), &mut Vec::new(), n, &mut memo);
    Ok(if ii { Player::II } else { Player::I })
}

type Memo = HashMap<(Vec<ElemId>, Vec<ElemId>, u32), bool>;

fn ii_wins(
    a: &Structure,
    b: &Structure,
    a_tuple: &mut Vec<ElemId>,
    b_tuple: &mut Vec<ElemId>,
    n: u32,
    memo: &mut Memo,
) -> bool {
    if n == 0 {
        let pairs: Vec<(ElemId, ElemId)> = a_tuple
            .iter()
            .copied()
            .zip(b_tuple.iter().copied())
            .collect();
        return partial_iso_check(a, b, &pairs);
    }
    let key = (a_tuple.clone(), b_tuple.clone(), n);
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let mut result = true;
    // Player I picks in A, II replies in B.
    'left: for c in a.universe() {
        a_tuple.push(*c);
        let mut saved = false;
        for d in b.universe() {
            b_tuple.push(*d);
            let ok = ii_wins(a, b, a_tuple, b_tuple, n - 1, memo);
            b_tuple.pop();
            if ok {
                saved = true;
                break;
            }
        }
        a_tuple.pop();
        if !saved {
            result = false;
            break 'left;
        }
    }
    if result {
        // Player I picks in B, II replies in A.
        'right: for d in b.universe() {
            b_tuple.push(*d);
            let mut saved = false;
            for c in a.universe() {
                a_tuple.push(*c);
                let ok = ii_wins(a, b, a_tuple, b_tuple, n - 1, memo);
                a_tuple.pop();
                if ok {
                    saved = true;
                    break;
                }
            }
            b_tuple.pop();
            if !saved {
                result = false;
                break 'right;
            }
        }
    }
    memo.insert(key, result);
    result
}
