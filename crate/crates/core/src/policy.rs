//! Policy interfaces shared by toys, tabulated strategies and learned agents.

use crate::engine::{Action, Betting, CompletedHand, GameId, HandState, InfoSetKey, Rank};
use crate::error::{Error, Result};

/// Everything a player may condition on at one decision point.
#[derive(Clone, Copy, Debug)]
pub struct Decision<'a> {
    pub game: GameId,
    /// 0 for the player who opens the betting rounds.
    pub position: usize,
    pub own: Rank,
    pub community: Option<Rank>,
    pub betting: &'a Betting,
    /// Index of the current hand within its session.
    pub hand_index: usize,
}

impl<'a> Decision<'a> {
    pub fn from_state(state: &'a HandState, hand_index: usize) -> Result<Decision<'a>> {
        let seat = state.to_act().ok_or(if state.is_terminal() {
            Error::Terminal
        } else {
            Error::ChancePending
        })?;
        Ok(Decision {
            game: state.game(),
            position: state.position_of(seat),
            own: state.private_rank(seat),
            community: state.community(),
            betting: state.betting(),
            hand_index,
        })
    }

    pub fn key(&self) -> InfoSetKey {
        InfoSetKey::new(self.game, self.own, self.community, self.betting.history())
    }

    pub fn legal(&self) -> Vec<Action> {
        self.betting.legal_actions().unwrap_or_default()
    }

    /// Legal-action flags in policy-head order.
    pub fn legal_mask(&self) -> Vec<bool> {
        let legal = self.legal();
        self.game
            .spec()
            .actions()
            .iter()
            .map(|a| legal.contains(a))
            .collect()
    }
}

/// A stationary or hand-index-scheduled policy over information sets.
///
/// Returned distributions are indexed by the game's action order and put zero
/// mass on illegal actions.
pub trait Policy: Send + Sync {
    fn distribution(&self, decision: &Decision<'_>) -> Result<Vec<f64>>;

    fn game(&self) -> GameId;

    /// False when the policy depends on `hand_index`.
    fn is_stationary(&self) -> bool {
        true
    }

    fn name(&self) -> String;
}

/// A session-aware player: sees completed hands from its own seat.
pub trait Actor {
    fn begin_session(&mut self) {}

    fn end_hand(&mut self, _hand: &CompletedHand, _seat: usize) -> Result<()> {
        Ok(())
    }

    fn distribution(&mut self, decision: &Decision<'_>) -> Result<Vec<f64>>;

    fn name(&self) -> String;
}

/// Adapts a [`Policy`] to the [`Actor`] interface.
pub struct PolicyActor<'a> {
    policy: &'a dyn Policy,
}

impl<'a> PolicyActor<'a> {
    pub fn new(policy: &'a dyn Policy) -> Self {
        PolicyActor { policy }
    }
}

impl Actor for PolicyActor<'_> {
    fn distribution(&mut self, decision: &Decision<'_>) -> Result<Vec<f64>> {
        self.policy.distribution(decision)
    }

    fn name(&self) -> String {
        self.policy.name()
    }
}

/// Index into the game's action order.
pub fn action_index(game: GameId, action: Action) -> usize {
    game.spec()
        .action_index(action)
        .expect("action belongs to the game")
}

/// Draws an action index from a distribution with a uniform variate `u` in [0, 1).
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_skips_zero_mass() {
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.999), 1);
        assert_eq!(sample_index(&[0.5, 0.5], 0.25), 0);
        assert_eq!(sample_index(&[0.5, 0.5], 0.75), 1);
        assert_eq!(sample_index(&[0.3, 0.7, 0.0], 1.0), 1);
    }
}
