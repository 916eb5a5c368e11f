use super::tree::{regret_matching, terminal_values, NodeKind, PublicTree, Row};
use super::PolicyTable;
use crate::engine::{InfoSetKey, GameId, Rank};
use crate::error::Result;

/// Vanilla CFR with simultaneous updates on the public tree.
#[derive(Clone, Debug)]
pub struct CfrState {
    tree: PublicTree,
    regrets: Vec<Row>,
    strategy_sum: Vec<Row>,
    iterations: u64,
}

impl CfrState {
    pub fn new(game: GameId) -> CfrState {
        let tree = PublicTree::new(game);
        let rows = tree.rows();
        CfrState {
            tree,
            regrets: vec![[0.0; 3]; rows],
            strategy_sum: vec![[0.0; 3]; rows],
            iterations: 0,
        }
    }

    pub fn tree(&self) -> &PublicTree {
        &self.tree
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn regrets(&self) -> &[Row] {
        &self.regrets
    }

    pub fn run(&mut self, iterations: u64) {
        for _ in 0..iterations {
            let mut walk = Walk {
                tree: &self.tree,
                regrets: &mut self.regrets,
                sums: &mut self.strategy_sum,
            };
            walk.visit(self.tree.root(), [[1.0; 3]; 2]);
            self.iterations += 1;
        }
    }

    /// Normalised cumulative strategy; rows never reached are uniform over legal.
    pub fn average_rows(&self) -> Vec<Row> {
        let mut rows = vec![[0.0; 3]; self.tree.rows()];
        for &id in self.tree.decisions() {
            let NodeKind::Decision { slot, legal, .. } = &self.tree.node(id).kind else {
                unreachable!()
            };
            for r in 0..3 {
                let i = slot * 3 + r;
                rows[i] = regret_matching(&self.strategy_sum[i], legal);
            }
        }
        rows
    }

    pub fn average_table(&self) -> Result<PolicyTable> {
        rows_to_table(&self.tree, &self.average_rows(), format!("{}_cfr_{}", self.tree.game(), self.iterations))
    }
}

/// Converts flat tree rows to a table keyed by information set.
pub fn rows_to_table(tree: &PublicTree, rows: &[Row], name: String) -> Result<PolicyTable> {
    let game = tree.game();
    let arity = game.spec().arity;
    let mut table = PolicyTable::new(game, name);
    for &id in tree.decisions() {
        let node = tree.node(id);
        let NodeKind::Decision { slot, .. } = node.kind else { unreachable!() };
        for own in Rank::ALL {
            let key = InfoSetKey::new(game, own, node.community, node.betting.history());
            table.insert(key, rows[slot * 3 + own.index()][..arity].to_vec())?;
        }
    }
    Ok(table)
}

struct Walk<'a> {
    tree: &'a PublicTree,
    regrets: &'a mut [Row],
    sums: &'a mut [Row],
}

impl Walk<'_> {
    fn visit(&mut self, id: usize, reach: [[f64; 3]; 2]) -> [[f64; 3]; 2] {
        let node = self.tree.node(id);
        match &node.kind {
            NodeKind::Terminal { weighted } => terminal_values(weighted, &reach),
            NodeKind::Chance => {
                let mut out = [[0.0; 3]; 2];
                for &c in &node.children {
                    let v = self.visit(c, reach);
                    super::tree::add_into(&mut out, &v);
                }
                out
            }
            NodeKind::Decision { position, slot, legal } => {
                let p = *position;
                let base = slot * 3;
                let sigma: [[f64; 3]; 3] = std::array::from_fn(|r| regret_matching(&self.regrets[base + r], legal));
                let mut action_values = [[0.0; 3]; 3];
                let mut out = [[0.0; 3]; 2];
                for (&a, &c) in legal.iter().zip(&node.children) {
                    let mut child = reach;
                    for r in 0..3 {
                        child[p][r] *= sigma[r][a];
                    }
                    let v = self.visit(c, child);
                    for r in 0..3 {
                        action_values[a][r] = v[p][r];
                        out[p][r] += sigma[r][a] * v[p][r];
                        out[1 - p][r] += v[1 - p][r];
                    }
                }
                for r in 0..3 {
                    let regret = &mut self.regrets[base + r];
                    let sum = &mut self.sums[base + r];
                    for &a in legal {
                        regret[a] += action_values[a][r] - out[p][r];
                        sum[a] += reach[p][r] * sigma[r][a];
                    }
                }
                out
            }
        }
    }
}

/// Runs `iterations` of CFR from scratch and returns the average strategy.
pub fn cfr_solve(game: GameId, iterations: u64) -> Result<(PolicyTable, CfrState)> {
    let mut state = CfrState::new(game);
    state.run(iterations.max(1));
    Ok((state.average_table()?, state))
}
