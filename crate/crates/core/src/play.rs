//! Dealing and playing individual hands between two choosers.

use rand::Rng;

use crate::engine::{new_hand, CompletedHand, Deal, GameSpec};
use crate::error::{Error, Result};
use crate::net::{NetAgent, Params};
use crate::policy::{Actor, Decision, Policy, PolicyActor};

/// Something that can sit at the table: a fixed policy or a network.
#[derive(Clone, Copy)]
pub enum Player<'a> {
    Policy(&'a dyn Policy),
    Net {
        params: &'a Params,
        name: &'a str,
        mask_history: bool,
    },
}

impl<'a> Player<'a> {
    pub fn name(&self) -> String {
        match self {
            Player::Policy(p) => p.name(),
            Player::Net { name, .. } => name.to_string(),
        }
    }

    /// A fresh actor with an empty session history.
    pub fn actor(&self) -> Box<dyn Actor + 'a> {
        match *self {
            Player::Policy(p) => Box::new(PolicyActor::new(p)),
            Player::Net {
                params,
                name,
                mask_history,
            } => Box::new(NetAgent::new(params, name, mask_history)),
        }
    }

    pub fn game(&self) -> crate::engine::GameId {
        match self {
            Player::Policy(p) => p.game(),
            Player::Net { params, .. } => params.config().game,
        }
    }
}

/// A uniformly random deal, community card included for Leduc.
pub fn random_deal<R: Rng + ?Sized>(spec: &GameSpec, rng: &mut R) -> Deal {
    let n = spec.deck.len();
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    let community = (spec.rounds > 1).then(|| {
        let mut c = rng.random_range(0..n - 2);
        for taken in [a.min(b), a.max(b)] {
            if c >= taken {
                c += 1;
            }
        }
        c
    });
    Deal {
        private: [a, b],
        community,
    }
}

/// Plays one hand to its end. `choose(seat, decision)` returns a head index.
pub fn play_hand(
    spec: &GameSpec,
    deal: Deal,
    dealer_seat: usize,
    hand_index: usize,
    mut choose: impl FnMut(usize, &Decision<'_>) -> Result<usize>,
) -> Result<CompletedHand> {
    let mut state = new_hand(spec, deal, dealer_seat)?;
    while !state.is_terminal() {
        let seat = state.to_act().ok_or(Error::ChancePending)?;
        let decision = Decision::from_state(&state, hand_index)?;
        let a = choose(seat, &decision)?;
        let action = *spec
            .actions()
            .get(a)
            .ok_or_else(|| Error::Shape(format!("action index {a} out of range")))?;
        state = state.apply_action(action)?;
    }
    state.completed()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{enumerate_deals, GameId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn random_deals_are_uniform() {
        for game in [GameId::Kuhn, GameId::Leduc] {
            let spec = game.spec();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut counts: HashMap<Deal, usize> = HashMap::new();
            let n = 120_000;
            for _ in 0..n {
                *counts.entry(random_deal(spec, &mut rng)).or_default() += 1;
            }
            let k = enumerate_deals(spec).len();
            assert_eq!(counts.len(), k);
            let expect = n as f64 / k as f64;
            for c in counts.values() {
                assert!((*c as f64 - expect).abs() < 5.0 * expect.sqrt(), "{game}: {c} vs {expect}");
            }
        }
    }
}
