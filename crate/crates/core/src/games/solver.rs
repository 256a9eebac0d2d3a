//! Exhaustive finite-rank solver for the class-splitting game.
//!
//! `i_wins(A, B, n)` is decided by memoized recursion: Player I wins when an
//! atomic separator exists, or (above rank 1) when some two-part partition
//! of one class with a legal rank division wins both parts, or when some
//! supplement with a legal next rank wins its successor. Splits are searched
//! over partitions into nonempty parts only: shrinking a class can only help
//! Player I, so overlapping covers are dominated (confirmed by a randomized
//! cover-versus-partition test below). Termination is immediate because
//! every successor rank is strictly smaller under a nice measure.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::efb::{successor_options, EfbMove, EfbPosition, StrategyI, StrategyII};
use super::Side;
use crate::measure::{check_nice, ComplexityMeasure};
use crate::ordinal::Ordinal;
use crate::structures::{atomic_separator, ElemId, StructClass, StructureError};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("budget {budget} exceeds the cap {cap}")]
    BudgetCapExceeded { budget: u64, cap: u64 },
    #[error("jmax {jmax} exceeds the cap {cap}")]
    JmaxCapExceeded { jmax: usize, cap: usize },
    #[error("measure {0} fails the niceness corner battery")]
    MeasureNotNice(String),
    #[error("classes do not share vocabulary and domain")]
    SignatureMismatch,
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Hard limits on solver inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveCaps {
    pub budget_cap: u64,
    pub jmax_cap: usize,
}

impl Default for SolveCaps {
    fn default() -> Self {
        SolveCaps {
            budget_cap: 8,
            jmax_cap: 4,
        }
    }
}

/// A winning strategy for Player I as a decision table keyed by canonical
/// positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyTable {
    pub measure: String,
    pub entries: Vec<StrategyEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyEntry {
    pub left: StructClass,
    pub right: StructClass,
    pub rank: u64,
    pub mv: EfbMove,
}

impl StrategyTable {
    pub fn lookup(&self, pos: &EfbPosition) -> Option<&EfbMove> {
        let rank = pos.rank.as_nat()?;
        self.entries
            .iter()
            .find(|e| e.rank == rank && e.left == pos.left && e.right == pos.right)
            .map(|e| &e.mv)
    }
}

impl StrategyI for StrategyTable {
    fn choose_move(&mut self, pos: &EfbPosition) -> Option<EfbMove> {
        self.lookup(pos).cloned()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinSepResult {
    pub value: u64,
    pub strategy: StrategyTable,
}

/// The memoizing solver. Reusable across queries with one measure, budget
/// and variable bound.
pub struct EfbSolver {
    measure: ComplexityMeasure,
    budget: u64,
    jmax: usize,
    classes: Vec<StructClass>,
    index: HashMap<ClassKey, u32>,
    memo: HashMap<(u32, u32, u64), Option<EfbMove>>,
}

/// Interner key: members as (structure identity, assignment) plus the
/// domain. Structures are shared by pointer throughout one solve, so
/// pointer-equal means content-equal; a content-equal class behind a
/// different allocation merely misses the cache. This keeps interning from
/// rehashing whole structures on every subclass probe.
type ClassKey = (
    Vec<(usize, crate::structures::VarAssignment)>,
    std::collections::BTreeSet<usize>,
);

fn class_key(class: &StructClass) -> ClassKey {
    (
        class
            .members()
            .iter()
            .map(|m| {
                (
                    std::sync::Arc::as_ptr(&m.structure) as usize,
                    m.assignment.clone(),
                )
            })
            .collect(),
        class.domain().clone(),
    )
}

impl EfbSolver {
    pub fn new(
        measure: &ComplexityMeasure,
        budget: u64,
        jmax: usize,
        caps: &SolveCaps,
    ) -> Result<Self, SolveError> {
        if budget > caps.budget_cap {
            return Err(SolveError::BudgetCapExceeded {
                budget,
                cap: caps.budget_cap,
            });
        }
        if jmax > caps.jmax_cap {
            return Err(SolveError::JmaxCapExceeded {
                jmax,
                cap: caps.jmax_cap,
            });
        }
        if !check_nice(measure, 0, 0).pass {
            return Err(SolveError::MeasureNotNice(measure.name().to_string()));
        }
        Ok(EfbSolver {
            measure: measure.clone(),
            budget,
            jmax,
            classes: Vec::new(),
            index: HashMap::new(),
            memo: HashMap::new(),
        })
    }

    fn intern(&mut self, class: StructClass) -> u32 {
        if let Some(id) = self.index.get(&class) {
            return *id;
        }
        let id = self.classes.len() as u32;
        self.classes.push(class.clone());
        self.index.insert(class, id);
        id
    }

    fn class(&self, id: u32) -> &StructClass {
        &self.classes[id as usize]
    }

    /// The rank pairs legal for a finite split at rank `n`, restricted to
    /// the componentwise-maximal ones. Player I's legal moves only grow
    /// with rank, so winning at `(n1, n2)` implies winning at any
    /// componentwise-larger legal pair; only the maximal pairs need trying.
    fn rank_pairs(&self, n: u64) -> Vec<(u64, u64)> {
        let avail = Ordinal::nat(n);
        let mut legal = Vec::new();
        for n1 in 1..n {
            for n2 in 1..n {
                if self.measure.r(&Ordinal::nat(n1), &Ordinal::nat(n2)) <= avail {
                    legal.push((n1, n2));
                }
            }
        }
        legal
            .iter()
            .filter(|(a1, a2)| {
                !legal
                    .iter()
                    .any(|(b1, b2)| (b1, b2) != (a1, a2) && b1 >= a1 && b2 >= a2)
            })
            .copied()
            .collect()
    }

    /// The largest next rank legal for a supplement at rank `n`; smaller
    /// legal ranks are dominated for the same reason as in [`rank_pairs`].
    fn supplement_rank(&self, n: u64) -> Option<u64> {
        let avail = Ordinal::nat(n);
        (1..n)
            .rev()
            .find(|m| self.measure.q(&Ordinal::nat(*m)) <= avail)
    }

    /// Whether Player I has a winning strategy in the rank-`n` game.
    pub fn i_wins(&mut self, a: &StructClass, b: &StructClass, n: u64) -> Result<bool, SolveError> {
        let a = self.intern(a.clone());
        let b = self.intern(b.clone());
        Ok(self.winning_move(a, b, n)?.is_some())
    }

    /// A winning first move at the position, if Player I has one.
    pub fn best_move(
        &mut self,
        a: &StructClass,
        b: &StructClass,
        n: u64,
    ) -> Result<Option<EfbMove>, SolveError> {
        let a = self.intern(a.clone());
        let b = self.intern(b.clone());
        self.winning_move(a, b, n)
    }

    fn winning_move(&mut self, a: u32, b: u32, n: u64) -> Result<Option<EfbMove>, SolveError> {
        if let Some(cached) = self.memo.get(&(a, b, n)) {
            return Ok(cached.clone());
        }
        let result = self.compute(a, b, n)?;
        self.memo.insert((a, b, n), result.clone());
        Ok(result)
    }

    fn compute(&mut self, a: u32, b: u32, n: u64) -> Result<Option<EfbMove>, SolveError> {
        if let Some(literal) = atomic_separator(self.class(a), self.class(b))? {
            return Ok(Some(EfbMove::Claim { literal }));
        }
        if n < 2 {
            return Ok(None);
        }
        for side in [Side::Left, Side::Right] {
            if let Some(mv) = self.try_splits(a, b, n, side)? {
                return Ok(Some(mv));
            }
        }
        for side in [Side::Left, Side::Right] {
            if let Some(mv) = self.try_supplements(a, b, n, side)? {
                return Ok(Some(mv));
            }
        }
        Ok(None)
    }

    fn try_splits(
        &mut self,
        a: u32,
        b: u32,
        n: u64,
        side: Side,
    ) -> Result<Option<EfbMove>, SolveError> {
        let class_id = match side {
            Side::Left => a,
            Side::Right => b,
        };
        let k = self.class(class_id).len();
        if k < 2 {
            return Ok(None);
        }
        let pairs = self.rank_pairs(n);
        for mask in 1..((1u64 << k) - 1) {
            let class = self.class(class_id);
            let part1 = class.subclass(|i| mask >> i & 1 == 1);
            let part2 = class.subclass(|i| mask >> i & 1 == 0);
            let p1 = self.intern(part1);
            let p2 = self.intern(part2);
            for (n1, n2) in &pairs {
                let first_wins = match side {
                    Side::Left => self.winning_move(p1, b, *n1)?.is_some(),
                    Side::Right => self.winning_move(a, p1, *n1)?.is_some(),
                };
                if !first_wins {
                    continue;
                }
                let second_wins = match side {
                    Side::Left => self.winning_move(p2, b, *n2)?.is_some(),
                    Side::Right => self.winning_move(a, p2, *n2)?.is_some(),
                };
                if second_wins {
                    return Ok(Some(EfbMove::FiniteSplit {
                        side,
                        parts: vec![
                            (self.class(p1).clone(), Ordinal::nat(*n1)),
                            (self.class(p2).clone(), Ordinal::nat(*n2)),
                        ],
                    }));
                }
            }
        }
        Ok(None)
    }

    fn try_supplements(
        &mut self,
        a: u32,
        b: u32,
        n: u64,
        side: Side,
    ) -> Result<Option<EfbMove>, SolveError> {
        let (chooser_id, starred_id) = match side {
            Side::Left => (a, b),
            Side::Right => (b, a),
        };
        let chooser = self.class(chooser_id);
        let starred = self.class(starred_id);
        // The move is unavailable when some structure in play has no
        // elements; propositional classes fall out here naturally.
        if starred
            .members()
            .iter()
            .chain(chooser.members())
            .any(|m| m.structure.universe().is_empty())
        {
            return Ok(None);
        }
        let Some(next_rank) = self.supplement_rank(n) else {
            return Ok(None);
        };
        for j in 0..self.jmax {
            let chooser = self.class(chooser_id).clone();
            let star = self.class(starred_id).extend_with_star(j)?;
            let star_id = self.intern(star);
            for choice in all_choices(&chooser) {
                let chosen = chooser.extend_with_choice(j, &choice)?;
                let chosen_id = self.intern(chosen);
                let wins = match side {
                    Side::Left => self.winning_move(chosen_id, star_id, next_rank)?.is_some(),
                    Side::Right => self.winning_move(star_id, chosen_id, next_rank)?.is_some(),
                };
                if wins {
                    return Ok(Some(EfbMove::Supplement {
                        side,
                        var: j,
                        choice,
                        new_rank: Ordinal::nat(next_rank),
                    }));
                }
            }
        }
        Ok(None)
    }

    /// The least value `n <= budget` at which Player I wins, if any.
    pub fn min_value(
        &mut self,
        a: &StructClass,
        b: &StructClass,
    ) -> Result<Option<u64>, SolveError> {
        if !a.same_signature(b) {
            return Err(SolveError::SignatureMismatch);
        }
        for n in 1..=self.budget {
            if self.i_wins(a, b, n)? {
                return Ok(Some(n));
            }
        }
        Ok(None)
    }

    /// Extracts the decision table of the winning strategy rooted at the
    /// given position, covering every position Player II can steer to.
    pub fn strategy_table(
        &mut self,
        a: &StructClass,
        b: &StructClass,
        n: u64,
    ) -> Result<StrategyTable, SolveError> {
        let mut entries = Vec::new();
        let root = (self.intern(a.clone()), self.intern(b.clone()), n);
        let mut stack = vec![root];
        let mut seen: std::collections::HashSet<(u32, u32, u64)> = Default::default();
        while let Some((left_id, right_id, rank)) = stack.pop() {
            if !seen.insert((left_id, right_id, rank)) {
                continue;
            }
            let mv = self
                .winning_move(left_id, right_id, rank)?
                .expect("strategy extraction only visits winning positions");
            let pos = EfbPosition {
                left: self.class(left_id).clone(),
                right: self.class(right_id).clone(),
                rank: Ordinal::nat(rank),
            };
            for opt in successor_options(&pos, &mv).expect("solver moves are applicable") {
                let rank = opt.rank.as_nat().expect("solver ranks are finite");
                stack.push((self.intern(opt.left), self.intern(opt.right), rank));
            }
            entries.push(StrategyEntry {
                left: pos.left,
                right: pos.right,
                rank,
                mv,
            });
        }
        Ok(StrategyTable {
            measure: self.measure.name().to_string(),
            entries,
        })
    }
}

/// Every choice function on the class: one element per member.
fn all_choices(class: &StructClass) -> Vec<BTreeMap<usize, ElemId>> {
    let mut out = vec![BTreeMap::new()];
    for (idx, m) in class.members().iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * m.structure.universe().len());
        for partial in &out {
            for e in m.structure.universe() {
                let mut c = partial.clone();
                c.insert(idx, *e);
                next.push(c);
            }
        }
        out = next;
    }
    out
}

/// The least rank at which Player I wins the game on `(a, b)` within the
/// budget, together with an executable winning strategy realizing it.
pub fn min_separating_value(
    a: &StructClass,
    b: &StructClass,
    measure: &ComplexityMeasure,
    budget: u64,
    jmax: usize,
    caps: &SolveCaps,
) -> Result<Option<MinSepResult>, SolveError> {
    let mut solver = EfbSolver::new(measure, budget, jmax, caps)?;
    match solver.min_value(a, b)? {
        None => Ok(None),
        Some(value) => {
            let strategy = solver.strategy_table(a, b, value)?;
            Ok(Some(MinSepResult { value, strategy }))
        }
    }
}

/// Player II guided by the solver: at a split she picks a part the solver
/// scores as not won by Player I. From a position the solver scores lost
/// for I, this responder never loses.
pub struct CounterStrategyII<'a> {
    pub solver: &'a mut EfbSolver,
}

impl StrategyII for CounterStrategyII<'_> {
    fn choose_option(&mut self, _: &EfbPosition, _: &EfbMove, options: &[EfbPosition]) -> usize {
        for (idx, opt) in options.iter().enumerate() {
            if let Some(rank) = opt.rank.as_nat() {
                if let Ok(false) = self.solver.i_wins(&opt.left, &opt.right, rank) {
                    return idx;
                }
            }
        }
        0
    }
}
