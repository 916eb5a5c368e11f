use std::fmt;

use super::{Action, Betting, GameId, GameSpec, Outcome, Rank, Status};
use crate::error::{Error, Result};

/// Card assignment as deck positions, indexed by seat.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Deal {
    pub private: [usize; 2],
    pub community: Option<usize>,
}

impl Deal {
    /// Picks the lowest free deck position for each requested rank.
    pub fn from_ranks(spec: &GameSpec, private: [Rank; 2], community: Option<Rank>) -> Result<Deal> {
        let mut used = vec![false; spec.deck.len()];
        let mut take = |rank: Rank| -> Result<usize> {
            let pos = spec
                .deck
                .iter()
                .enumerate()
                .position(|(i, &r)| r == rank && !used[i])
                .ok_or_else(|| Error::InvalidDeal(format!("no {rank} left in the {} deck", spec.game)))?;
            used[pos] = true;
            Ok(pos)
        };
        let private = [take(private[0])?, take(private[1])?];
        let community = community.map(&mut take).transpose()?;
        Ok(Deal { private, community })
    }

    fn validate(&self, spec: &GameSpec) -> Result<()> {
        let mut positions = vec![self.private[0], self.private[1]];
        if let Some(c) = self.community {
            if spec.rounds < 2 {
                return Err(Error::InvalidDeal("kuhn has no community card".into()));
            }
            positions.push(c);
        }
        for (i, &p) in positions.iter().enumerate() {
            if p >= spec.deck.len() {
                return Err(Error::InvalidDeal(format!("deck position {p} out of range")));
            }
            if positions[..i].contains(&p) {
                return Err(Error::InvalidDeal(format!("deck position {p} dealt twice")));
            }
        }
        Ok(())
    }
}

/// Immutable state of one hand. Seats are physical; `dealer` is the seat that
/// opens every betting round.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HandState {
    game: GameId,
    deal: Deal,
    dealer: usize,
    betting: Betting,
    community: Option<Rank>,
}

pub fn new_hand(spec: &GameSpec, deal: Deal, dealer_seat: usize) -> Result<HandState> {
    if dealer_seat > 1 {
        return Err(Error::InvalidDeal(format!("dealer seat {dealer_seat} not in {{0,1}}")));
    }
    deal.validate(spec)?;
    Ok(HandState {
        game: spec.game,
        deal,
        dealer: dealer_seat,
        betting: Betting::new(spec.game),
        community: None,
    })
}

impl HandState {
    pub fn game(&self) -> GameId {
        self.game
    }

    pub fn spec(&self) -> &'static GameSpec {
        self.game.spec()
    }

    pub fn deal(&self) -> Deal {
        self.deal
    }

    pub fn dealer(&self) -> usize {
        self.dealer
    }

    pub fn betting(&self) -> &Betting {
        &self.betting
    }

    pub fn position_of(&self, seat: usize) -> usize {
        (seat + 2 - self.dealer) % 2
    }

    pub fn seat_of(&self, position: usize) -> usize {
        (self.dealer + position) % 2
    }

    pub fn private_rank(&self, seat: usize) -> Rank {
        self.spec().deck[self.deal.private[seat]]
    }

    pub fn community(&self) -> Option<Rank> {
        self.community
    }

    pub fn round_index(&self) -> usize {
        self.betting.round()
    }

    pub fn to_act(&self) -> Option<usize> {
        self.betting.to_act().map(|p| self.seat_of(p))
    }

    pub fn is_terminal(&self) -> bool {
        self.betting.is_terminal()
    }

    pub fn needs_community(&self) -> bool {
        self.betting.awaiting_community()
    }

    /// Chips committed by each seat.
    pub fn pot_contributions(&self) -> [i32; 2] {
        let c = self.betting.contributions();
        [c[self.position_of(0)], c[self.position_of(1)]]
    }

    pub fn legal_actions(&self) -> Result<Vec<Action>> {
        self.betting.legal_actions()
    }

    pub fn apply_action(&self, action: Action) -> Result<HandState> {
        let mut next = self.clone();
        next.betting = self.betting.apply(action)?;
        if next.betting.awaiting_community() {
            if let Some(pos) = self.deal.community {
                next = next.reveal(pos)?;
            }
        }
        Ok(next)
    }

    /// Deals the community card for a hand created without one.
    pub fn deal_community(&self, position: usize) -> Result<HandState> {
        if self.deal.community.is_some() {
            return Err(Error::InvalidDeal("community card already assigned".into()));
        }
        let deal = Deal {
            community: Some(position),
            ..self.deal
        };
        deal.validate(self.spec())?;
        let mut next = self.clone();
        next.deal = deal;
        next.reveal(position)
    }

    fn reveal(mut self, position: usize) -> Result<HandState> {
        self.community = Some(self.spec().deck[position]);
        self.betting = self.betting.start_next_round()?;
        Ok(self)
    }

    pub fn info_set_key(&self, seat: usize) -> InfoSetKey {
        InfoSetKey {
            game: self.game,
            own: self.private_rank(seat),
            community: self.community,
            history: self.betting.history(),
        }
    }

    /// Net chips per seat. Pairing the community card beats any unpaired hand,
    /// otherwise the higher rank wins; equal ranks split.
    pub fn terminal_payoff(&self) -> Result<[i32; 2]> {
        let Status::Terminal(outcome) = self.betting.status() else {
            return Err(Error::NotTerminal);
        };
        let contrib = self.pot_contributions();
        let winner = match outcome {
            Outcome::Fold { folder } => Some(1 - self.seat_of(folder)),
            Outcome::Showdown => {
                let s0 = self.strength(0);
                let s1 = self.strength(1);
                match s0.cmp(&s1) {
                    std::cmp::Ordering::Greater => Some(0),
                    std::cmp::Ordering::Less => Some(1),
                    std::cmp::Ordering::Equal => None,
                }
            }
        };
        Ok(match winner {
            Some(w) => {
                let won = contrib[1 - w];
                let mut p = [0; 2];
                p[w] = won;
                p[1 - w] = -won;
                p
            }
            None => [0, 0],
        })
    }

    fn strength(&self, seat: usize) -> (bool, Rank) {
        let own = self.private_rank(seat);
        (self.community == Some(own), own)
    }

    pub fn completed(&self) -> Result<CompletedHand> {
        let payoffs = self.terminal_payoff()?;
        let mut actions = Vec::new();
        for (round, acts) in self.betting.rounds().iter().enumerate() {
            for (i, &action) in acts.iter().enumerate() {
                actions.push(ActionRecord {
                    round,
                    seat: self.seat_of(i % 2),
                    action,
                });
            }
        }
        Ok(CompletedHand {
            game: self.game,
            dealer_seat: self.dealer,
            private: [self.private_rank(0), self.private_rank(1)],
            community: self.community,
            actions,
            showdown: self.betting.status() == Status::Terminal(Outcome::Showdown),
            payoffs,
        })
    }

    /// One-line record `game;dealer;cards;community;actions;payoffs`.
    pub fn serialize(&self) -> String {
        let payoffs = match self.terminal_payoff() {
            Ok(p) => format!("{:+},{:+}", p[0], p[1]),
            Err(_) => "-".to_string(),
        };
        format!(
            "{};{};{},{};{};{};{}",
            self.game,
            self.dealer,
            self.private_rank(0),
            self.private_rank(1),
            self.community.map_or("-".to_string(), |r| r.to_string()),
            self.betting.history(),
            payoffs
        )
    }
}

/// Every ordered deal with its probability. Leduc deals include the community
/// position, so each of the 30 private deals has 4 continuations.
pub fn enumerate_deals(spec: &GameSpec) -> Vec<(Deal, f64)> {
    let n = spec.deck.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in (0..n).filter(|&b| b != a) {
            if spec.rounds < 2 {
                out.push((Deal { private: [a, b], community: None }, 1.0));
            } else {
                for c in (0..n).filter(|&c| c != a && c != b) {
                    out.push((
                        Deal {
                            private: [a, b],
                            community: Some(c),
                        },
                        1.0,
                    ));
                }
            }
        }
    }
    let p = 1.0 / out.len() as f64;
    for d in &mut out {
        d.1 = p;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ActionRecord {
    pub round: usize,
    pub seat: usize,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CompletedHand {
    pub game: GameId,
    pub dealer_seat: usize,
    pub private: [Rank; 2],
    pub community: Option<Rank>,
    pub actions: Vec<ActionRecord>,
    pub showdown: bool,
    pub payoffs: [i32; 2],
}

/// Key of an information set: own card, public card and public history.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InfoSetKey {
    pub game: GameId,
    pub own: Rank,
    pub community: Option<Rank>,
    pub history: String,
}

impl InfoSetKey {
    pub fn new(game: GameId, own: Rank, community: Option<Rank>, history: impl Into<String>) -> Self {
        InfoSetKey {
            game,
            own,
            community,
            history: history.into(),
        }
    }

    /// Parses the `Display` form, e.g. `Q:b`, `K:(start)`, `JQ:xx/b`.
    pub fn parse(game: GameId, s: &str) -> Result<InfoSetKey> {
        let (cards, history) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("bad infoset key `{s}`")))?;
        let mut chars = cards.chars();
        let own = chars
            .next()
            .ok_or_else(|| Error::Parse(format!("bad infoset key `{s}`")))?
            .to_string()
            .parse()?;
        let community = chars.next().map(|c| c.to_string().parse()).transpose()?;
        let history = if history == "(start)" { "" } else { history };
        Ok(InfoSetKey::new(game, own, community, history))
    }
}

impl fmt::Display for InfoSetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.own)?;
        if let Some(c) = self.community {
            write!(f, "{c}")?;
        }
        if self.history.is_empty() {
            write!(f, ":(start)")
        } else {
            write!(f, ":{}", self.history)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{KUHN, LEDUC};
    use Rank::*;

    fn kuhn(p0: Rank, p1: Rank, dealer: usize) -> HandState {
        new_hand(&KUHN, Deal::from_ranks(&KUHN, [p0, p1], None).unwrap(), dealer).unwrap()
    }

    fn play(mut s: HandState, actions: &[Action]) -> HandState {
        for &a in actions {
            s = s.apply_action(a).unwrap();
        }
        s
    }

    #[test]
    fn new_kuhn_hand() {
        let s = kuhn(K, J, 0);
        assert_eq!(s.pot_contributions(), [1, 1]);
        assert_eq!(s.to_act(), Some(0));
        assert_eq!(s.info_set_key(0).to_string(), "K:(start)");
    }

    #[test]
    fn duplicate_ranks() {
        let d = Deal::from_ranks(&LEDUC, [Q, Q], None).unwrap();
        assert_ne!(d.private[0], d.private[1]);
        assert!(new_hand(&LEDUC, d, 1).is_ok());
        assert!(Deal::from_ranks(&KUHN, [K, K], None).is_err());
        let bad = Deal {
            private: [2, 2],
            community: None,
        };
        assert!(new_hand(&KUHN, bad, 0).is_err());
        assert!(new_hand(&KUHN, Deal { private: [0, 1], community: None }, 2).is_err());
    }

    #[test]
    fn kuhn_legal_actions() {
        let s = play(kuhn(K, J, 0), &[Action::Bet]);
        assert_eq!(s.legal_actions().unwrap(), vec![Action::Pass, Action::Bet]);
    }

    #[test]
    fn kuhn_payoffs() {
        let s = play(kuhn(K, J, 0), &[Action::Pass, Action::Pass]);
        assert!(s.is_terminal());
        assert_eq!(s.pot_contributions(), [1, 1]);
        assert_eq!(s.terminal_payoff().unwrap(), [1, -1]);

        let s = play(kuhn(J, Q, 0), &[Action::Bet, Action::Pass]);
        assert_eq!(s.terminal_payoff().unwrap(), [1, -1]);
        assert!(!s.completed().unwrap().showdown);

        let s = play(kuhn(Q, K, 0), &[Action::Bet, Action::Bet]);
        assert_eq!(s.terminal_payoff().unwrap(), [-2, 2]);
        assert!(play(kuhn(Q, K, 0), &[Action::Bet]).terminal_payoff().is_err());
    }

    #[test]
    fn leduc_round_two_and_pair() {
        let deal = Deal::from_ranks(&LEDUC, [Q, K], Some(Q)).unwrap();
        let s = new_hand(&LEDUC, deal, 1).unwrap();
        assert_eq!(s.to_act(), Some(1));
        let s = play(s, &[Action::Raise, Action::Call]);
        assert_eq!(s.round_index(), 1);
        assert_eq!(s.community(), Some(Q));
        assert_eq!(s.to_act(), Some(1));
        let s = play(s, &[Action::Call, Action::Call]);
        assert_eq!(s.terminal_payoff().unwrap(), [3, -3]);
        assert_eq!(s.serialize(), "leduc;1;Q,K;Q;bc/xx;+3,-3");
    }

    #[test]
    fn leduc_pending_community() {
        let deal = Deal::from_ranks(&LEDUC, [J, K], None).unwrap();
        let s = play(new_hand(&LEDUC, deal, 0).unwrap(), &[Action::Call, Action::Call]);
        assert!(s.needs_community());
        assert_eq!(s.round_index(), 0);
        assert!(matches!(s.legal_actions(), Err(Error::ChancePending)));
        assert!(s.deal_community(0).is_err());
        let s = s.deal_community(1).unwrap();
        assert_eq!(s.round_index(), 1);
        assert_eq!(s.community(), Some(J));
        assert!(s.deal_community(2).is_err());
    }

    #[test]
    fn info_set_hides_opponent() {
        let a = new_hand(&LEDUC, Deal::from_ranks(&LEDUC, [J, Q], None).unwrap(), 0).unwrap();
        let b = new_hand(&LEDUC, Deal::from_ranks(&LEDUC, [J, K], None).unwrap(), 0).unwrap();
        let a = play(a, &[Action::Call]);
        let b = play(b, &[Action::Call]);
        assert_eq!(a.info_set_key(0), b.info_set_key(0));
        assert_eq!(a.info_set_key(0).to_string(), "J:x");
        let k = InfoSetKey::parse(GameId::Leduc, "JQ:xx/b").unwrap();
        assert_eq!(k.community, Some(Q));
        assert_eq!(k.to_string(), "JQ:xx/b");
    }

    #[test]
    fn deal_enumeration() {
        let k = enumerate_deals(&KUHN);
        assert_eq!(k.len(), 6);
        assert!(k.iter().all(|(_, p)| (p - 1.0 / 6.0).abs() < 1e-15));
        let l = enumerate_deals(&LEDUC);
        assert_eq!(l.len(), 120);
        let total: f64 = l.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let private: std::collections::HashSet<_> = l.iter().map(|(d, _)| d.private).collect();
        assert_eq!(private.len(), 30);
    }

    #[test]
    fn rank_weights_normalised() {
        for spec in [&KUHN, &LEDUC] {
            let mut total = 0.0;
            for a in Rank::ALL {
                for b in Rank::ALL {
                    let w = spec.private_weight(a, b);
                    if spec.rounds > 1 {
                        let c: f64 = Rank::ALL.iter().map(|&c| spec.community_weight(a, b, c)).sum();
                        if w > 0.0 {
                            assert!((c - 1.0).abs() < 1e-12);
                        }
                    }
                    total += w;
                }
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
