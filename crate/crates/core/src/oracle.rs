//! Exact best responses against fixed opponents, seat-averaged ceilings and
//! the BR-fraction normalisation.

use crate::engine::{Betting, GameId};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::solver::tree::{NodeKind, PublicTree, Row};
use crate::solver::{rows_to_table, PolicyTable};

/// Ceilings at or below this are treated as noise and get no BR fraction.
pub const BR_FRACTION_THRESHOLD: f64 = 0.01;

/// Margin within which two action values count as tied.
const TIE_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct BestResponse {
    /// Pure strategy for the hero's information sets.
    pub table: PolicyTable,
    /// Expected chips per hand for the hero.
    pub value: f64,
    pub position: usize,
}

/// Best response for the hero at `position` (0 opens every round) against a
/// stationary opponent.
pub fn best_response(game: GameId, opponent: &dyn Policy, position: usize) -> Result<BestResponse> {
    best_response_at(game, opponent, position, 0)
}

/// Best response against the opponent as it plays at `hand_index`.
pub fn best_response_at(
    game: GameId,
    opponent: &dyn Policy,
    position: usize,
    hand_index: usize,
) -> Result<BestResponse> {
    if position > 1 {
        return Err(Error::Config(format!("position {position} is not 0 or 1")));
    }
    let tree = PublicTree::new(game);
    let strategy = tree.tabulate(opponent, Some(1 - position), hand_index)?;
    let mut choice = vec![[0.0; 3]; tree.rows()];
    for &id in tree.decisions() {
        let NodeKind::Decision { slot, legal, .. } = &tree.node(id).kind else { unreachable!() };
        for r in 0..3 {
            choice[slot * 3 + r][legal[0]] = 1.0;
        }
    }
    let mut search = Search {
        tree: &tree,
        hero: position,
        opponent: &strategy,
        choice,
    };
    let value = search.visit(tree.root(), [1.0; 3]).iter().sum();
    let mut table = PolicyTable::new(game, format!("br_vs_{}_pos{position}", opponent.name()));
    for (key, dist) in rows_to_table(&tree, &search.choice, String::new())?.iter() {
        let to_act = Betting::replay(game, &key.history).ok().and_then(|b| b.to_act());
        if to_act == Some(position) {
            table.insert(key.clone(), dist.clone())?;
        }
    }
    Ok(BestResponse { table, value, position })
}

struct Search<'a> {
    tree: &'a PublicTree,
    hero: usize,
    opponent: &'a [Row],
    choice: Vec<Row>,
}

impl Search<'_> {
    /// Hero counterfactual values per hero rank, given opponent reach per rank.
    fn visit(&mut self, id: usize, opp: [f64; 3]) -> [f64; 3] {
        let node = self.tree.node(id);
        match &node.kind {
            NodeKind::Terminal { weighted } => {
                let mut v = [0.0; 3];
                for h0 in 0..3 {
                    for h1 in 0..3 {
                        let w = weighted[h0][h1];
                        if self.hero == 0 {
                            v[h0] += w * opp[h1];
                        } else {
                            v[h1] -= w * opp[h0];
                        }
                    }
                }
                v
            }
            NodeKind::Chance => {
                let mut v = [0.0; 3];
                for &c in &node.children {
                    let cv = self.visit(c, opp);
                    for r in 0..3 {
                        v[r] += cv[r];
                    }
                }
                v
            }
            NodeKind::Decision { position, slot, legal } if *position == self.hero => {
                let mut best = [f64::NEG_INFINITY; 3];
                let mut arg = [legal[0]; 3];
                for (&a, &c) in legal.iter().zip(&node.children) {
                    let cv = self.visit(c, opp);
                    for r in 0..3 {
                        if cv[r] > best[r] + TIE_EPS {
                            best[r] = cv[r];
                            arg[r] = a;
                        }
                    }
                }
                for r in 0..3 {
                    let mut row = [0.0; 3];
                    row[arg[r]] = 1.0;
                    self.choice[slot * 3 + r] = row;
                }
                best
            }
            NodeKind::Decision { slot, legal, .. } => {
                let mut v = [0.0; 3];
                for (&a, &c) in legal.iter().zip(&node.children) {
                    let mut child = [0.0; 3];
                    for r in 0..3 {
                        child[r] = opp[r] * self.opponent[slot * 3 + r][a];
                    }
                    if child.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let cv = self.visit(c, child);
                    for r in 0..3 {
                        v[r] += cv[r];
                    }
                }
                v
            }
        }
    }
}

/// Seat-averaged best-response value against a stationary opponent.
pub fn br_ceiling(game: GameId, opponent: &dyn Policy) -> Result<f64> {
    if !opponent.is_stationary() {
        return Err(Error::NonStationary(opponent.name()));
    }
    let a = best_response(game, opponent, 0)?.value;
    let b = best_response(game, opponent, 1)?.value;
    Ok(0.5 * (a + b))
}

/// Reward divided by the ceiling; errors when the ceiling is too small for
/// the ratio to mean anything.
pub fn br_fraction(reward: f64, ceiling: f64) -> Result<f64> {
    if ceiling <= BR_FRACTION_THRESHOLD {
        return Err(Error::CeilingTooSmall(ceiling));
    }
    Ok(reward / ceiling)
}
