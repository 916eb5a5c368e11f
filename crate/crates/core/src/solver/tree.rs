//! Public betting tree with rank-level chance weights.
//!
//! Each decision node owns one information set per private rank of the acting
//! position, so strategies over the tree are flat arrays indexed by
//! `slot * 3 + rank`. Terminal nodes carry the opener's payoff already
//! multiplied by the joint chance weight of both private ranks and the
//! community rank, which lets traversals work with per-rank reach vectors.

use crate::engine::{Action, Betting, GameId, Outcome, Rank, Status};
use crate::error::{Error, Result};
use crate::policy::{Decision, Policy};

/// Per-rank action weights in head order, padded to three actions.
pub type Row = [f64; 3];

#[derive(Clone, Debug)]
pub enum NodeKind {
    Decision {
        position: usize,
        slot: usize,
        /// Head indices of the legal actions, matching `children`.
        legal: Vec<usize>,
    },
    /// Children are indexed by community rank.
    Chance,
    Terminal {
        /// `weighted[h0][h1]`: chance weight times the opener's payoff.
        weighted: [[f64; 3]; 3],
    },
}

#[derive(Clone, Debug)]
pub struct Node {
    pub betting: Betting,
    pub community: Option<Rank>,
    pub kind: NodeKind,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct PublicTree {
    game: GameId,
    nodes: Vec<Node>,
    decisions: Vec<usize>,
}

impl PublicTree {
    pub fn new(game: GameId) -> PublicTree {
        let mut tree = PublicTree {
            game,
            nodes: Vec::new(),
            decisions: Vec::new(),
        };
        tree.expand(Betting::new(game), None);
        tree
    }

    pub fn game(&self) -> GameId {
        self.game
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids of decision nodes, in slot order.
    pub fn decisions(&self) -> &[usize] {
        &self.decisions
    }

    /// Number of information-set rows (decision slots times ranks).
    pub fn rows(&self) -> usize {
        self.decisions.len() * 3
    }

    fn expand(&mut self, betting: Betting, community: Option<Rank>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            betting: betting.clone(),
            community,
            kind: NodeKind::Chance,
            children: Vec::new(),
        });
        let (kind, children) = match betting.status() {
            Status::Terminal(outcome) => (
                NodeKind::Terminal {
                    weighted: weighted_payoffs(&betting, outcome, community),
                },
                Vec::new(),
            ),
            Status::AwaitingCommunity => {
                let next = betting.start_next_round().expect("round transition pending");
                let children = Rank::ALL
                    .iter()
                    .map(|&c| self.expand(next.clone(), Some(c)))
                    .collect();
                (NodeKind::Chance, children)
            }
            Status::ToAct(position) => {
                let slot = self.decisions.len();
                self.decisions.push(id);
                let spec = betting.spec();
                let actions = betting.legal_actions().expect("decision node has legal actions");
                let legal = actions
                    .iter()
                    .map(|&a| spec.action_index(a).expect("action belongs to game"))
                    .collect();
                let children = actions
                    .iter()
                    .map(|&a| self.expand(betting.apply(a).expect("legal action"), community))
                    .collect();
                (NodeKind::Decision { position, slot, legal }, children)
            }
        };
        self.nodes[id].kind = kind;
        self.nodes[id].children = children;
        id
    }

    /// Evaluates `policy` at every information set of the given position
    /// (both positions when `None`). Rows of skipped positions stay zero.
    pub fn tabulate(&self, policy: &dyn Policy, position: Option<usize>, hand_index: usize) -> Result<Vec<Row>> {
        if policy.game() != self.game {
            return Err(Error::GameMismatch {
                expected: self.game,
                found: policy.game(),
            });
        }
        let mut rows = vec![[0.0; 3]; self.rows()];
        for &id in &self.decisions {
            let node = &self.nodes[id];
            let NodeKind::Decision { position: p, slot, .. } = node.kind else {
                unreachable!("decision list holds decision nodes")
            };
            if position.is_some_and(|q| q != p) {
                continue;
            }
            for own in Rank::ALL {
                let decision = Decision {
                    game: self.game,
                    position: p,
                    own,
                    community: node.community,
                    betting: &node.betting,
                    hand_index,
                };
                let dist = policy.distribution(&decision)?;
                let row = &mut rows[slot * 3 + own.index()];
                row[..dist.len()].copy_from_slice(&dist);
            }
        }
        Ok(rows)
    }

    /// Expected chips of the opener when position `p` plays `strategies[p]`.
    pub fn profile_value(&self, strategies: [&[Row]; 2]) -> f64 {
        let values = self.values(self.root(), [[1.0; 3]; 2], strategies);
        values[0].iter().sum()
    }

    /// Counterfactual values per position and rank under fixed strategies.
    fn values(&self, id: usize, reach: [[f64; 3]; 2], strategies: [&[Row]; 2]) -> [[f64; 3]; 2] {
        let node = &self.nodes[id];
        match &node.kind {
            NodeKind::Terminal { weighted } => terminal_values(weighted, &reach),
            NodeKind::Chance => {
                let mut out = [[0.0; 3]; 2];
                for &c in &node.children {
                    let v = self.values(c, reach, strategies);
                    add_into(&mut out, &v);
                }
                out
            }
            NodeKind::Decision { position, slot, legal } => {
                let p = *position;
                let mut out = [[0.0; 3]; 2];
                for (&a, &c) in legal.iter().zip(&node.children) {
                    let mut child = reach;
                    for r in 0..3 {
                        child[p][r] *= strategies[p][slot * 3 + r][a];
                    }
                    if child[p].iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let v = self.values(c, child, strategies);
                    for r in 0..3 {
                        out[p][r] += strategies[p][slot * 3 + r][a] * v[p][r];
                        out[1 - p][r] += v[1 - p][r];
                    }
                }
                out
            }
        }
    }
}

pub(crate) fn add_into(out: &mut [[f64; 3]; 2], v: &[[f64; 3]; 2]) {
    for p in 0..2 {
        for r in 0..3 {
            out[p][r] += v[p][r];
        }
    }
}

/// Counterfactual values of both positions at a terminal node.
pub(crate) fn terminal_values(weighted: &[[f64; 3]; 3], reach: &[[f64; 3]; 2]) -> [[f64; 3]; 2] {
    let mut out = [[0.0; 3]; 2];
    for h0 in 0..3 {
        for h1 in 0..3 {
            let w = weighted[h0][h1];
            out[0][h0] += w * reach[1][h1];
            out[1][h1] -= w * reach[0][h0];
        }
    }
    out
}

fn weighted_payoffs(betting: &Betting, outcome: Outcome, community: Option<Rank>) -> [[f64; 3]; 3] {
    let spec = betting.spec();
    let contrib = betting.contributions();
    let mut out = [[0.0; 3]; 3];
    for h0 in Rank::ALL {
        for h1 in Rank::ALL {
            let mut w = spec.private_weight(h0, h1);
            if let Some(c) = community {
                w *= spec.community_weight(h0, h1, c);
            }
            if w == 0.0 {
                continue;
            }
            let payoff = match outcome {
                Outcome::Fold { folder: 0 } => -contrib[0],
                Outcome::Fold { .. } => contrib[1],
                Outcome::Showdown => {
                    let s0 = (community == Some(h0), h0);
                    let s1 = (community == Some(h1), h1);
                    match s0.cmp(&s1) {
                        std::cmp::Ordering::Greater => contrib[1],
                        std::cmp::Ordering::Less => -contrib[0],
                        std::cmp::Ordering::Equal => 0,
                    }
                }
            };
            out[h0.index()][h1.index()] = w * f64::from(payoff);
        }
    }
    out
}

/// Regret matching over the legal head indices; uniform when no regret is positive.
pub(crate) fn regret_matching(regrets: &Row, legal: &[usize]) -> Row {
    let mut out = [0.0; 3];
    let total: f64 = legal.iter().map(|&a| regrets[a].max(0.0)).sum();
    if total > 0.0 {
        for &a in legal {
            out[a] = regrets[a].max(0.0) / total;
        }
    } else {
        let u = 1.0 / legal.len() as f64;
        for &a in legal {
            out[a] = u;
        }
    }
    out
}

/// Head-ordered actions of a decision node.
pub fn node_actions(game: GameId, legal: &[usize]) -> Vec<Action> {
    let actions = game.spec().actions();
    legal.iter().map(|&a| actions[a]).collect()
}
