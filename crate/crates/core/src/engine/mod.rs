//! Exact game engines for Kuhn poker and Leduc Hold'em.
//!
//! The public betting state ([`Betting`]) is kept separate from the card-carrying
//! [`HandState`] so that solvers can walk the public tree once and carry
//! per-rank weight vectors instead of enumerating deals.

mod betting;
mod hand;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use betting::{Betting, Outcome, Status};
pub use hand::{
    enumerate_deals, new_hand, ActionRecord, CompletedHand, Deal, HandState, InfoSetKey,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameId {
    Kuhn,
    Leduc,
}

impl GameId {
    pub fn spec(self) -> &'static GameSpec {
        match self {
            GameId::Kuhn => &KUHN,
            GameId::Leduc => &LEDUC,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GameId::Kuhn => "kuhn",
            GameId::Leduc => "leduc",
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GameId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kuhn" => Ok(GameId::Kuhn),
            "leduc" => Ok(GameId::Leduc),
            other => Err(Error::Parse(format!("unknown game `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rank {
    J,
    Q,
    K,
}

impl Rank {
    pub const ALL: [Rank; 3] = [Rank::J, Rank::Q, Rank::K];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Rank> {
        Rank::ALL.get(i).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Rank::J => 'J',
            Rank::Q => 'Q',
            Rank::K => 'K',
        }
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl FromStr for Rank {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "J" => Ok(Rank::J),
            "Q" => Ok(Rank::Q),
            "K" => Ok(Rank::K),
            other => Err(Error::Parse(format!("unknown rank `{other}`"))),
        }
    }
}

/// Player actions. Kuhn uses `Pass`/`Bet` (pass facing a bet folds, bet facing a
/// bet calls); Leduc uses `Call`/`Raise`/`Fold` where call doubles as check and
/// raise as the opening bet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Pass,
    Bet,
    Call,
    Raise,
    Fold,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Pass => "PASS",
            Action::Bet => "BET",
            Action::Call => "CALL",
            Action::Raise => "RAISE",
            Action::Fold => "FOLD",
        };
        f.write_str(s)
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PASS" => Ok(Action::Pass),
            "BET" => Ok(Action::Bet),
            "CALL" => Ok(Action::Call),
            "RAISE" => Ok(Action::Raise),
            "FOLD" => Ok(Action::Fold),
            other => Err(Error::Parse(format!("unknown action `{other}`"))),
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct GameSpec {
    pub game: GameId,
    pub deck: &'static [Rank],
    pub ante: i32,
    pub rounds: usize,
    pub bet_sizes: &'static [i32],
    /// Maximum number of bets plus raises in one round.
    pub raise_cap: usize,
    pub arity: usize,
    actions: &'static [Action],
}

pub static KUHN: GameSpec = GameSpec {
    game: GameId::Kuhn,
    deck: &[Rank::J, Rank::Q, Rank::K],
    ante: 1,
    rounds: 1,
    bet_sizes: &[1],
    raise_cap: 1,
    arity: 2,
    actions: &[Action::Pass, Action::Bet],
};

pub static LEDUC: GameSpec = GameSpec {
    game: GameId::Leduc,
    deck: &[Rank::J, Rank::J, Rank::Q, Rank::Q, Rank::K, Rank::K],
    ante: 1,
    rounds: 2,
    bet_sizes: &[2, 4],
    raise_cap: 2,
    arity: 3,
    actions: &[Action::Call, Action::Raise, Action::Fold],
};

impl GameSpec {
    /// Actions in policy-head order.
    pub fn actions(&self) -> &'static [Action] {
        self.actions
    }

    pub fn action_index(&self, action: Action) -> Option<usize> {
        self.actions.iter().position(|&a| a == action)
    }

    /// Longest possible action sequence within one betting round.
    pub fn max_actions_per_round(&self) -> usize {
        self.raise_cap + 2
    }

    pub fn copies(&self, rank: Rank) -> usize {
        self.deck.iter().filter(|&&r| r == rank).count()
    }

    /// Probability that the round-1 opener holds `opener` and the other player `other`.
    pub fn private_weight(&self, opener: Rank, other: Rank) -> f64 {
        let n = self.deck.len() as f64;
        let first = self.copies(opener) as f64 / n;
        let remaining = self.copies(other) - usize::from(opener == other);
        first * remaining as f64 / (n - 1.0)
    }

    /// Probability of the community rank given both private ranks (Leduc only).
    pub fn community_weight(&self, opener: Rank, other: Rank, community: Rank) -> f64 {
        let left = self.copies(community) as i64
            - i64::from(opener == community)
            - i64::from(other == community);
        left.max(0) as f64 / (self.deck.len() - 2) as f64
    }
}
