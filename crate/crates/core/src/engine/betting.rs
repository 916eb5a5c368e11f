use super::{Action, GameId, GameSpec};
use crate::error::{Error, Result};

/// Betting positions: 0 opens every round, 1 acts second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    ToAct(usize),
    AwaitingCommunity,
    Terminal(Outcome),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Fold { folder: usize },
    Showdown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Check,
    Bet,
    Call,
    Fold,
}

/// Public betting state of one hand, indexed by position rather than seat.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Betting {
    game: GameId,
    rounds: Vec<Vec<Action>>,
    contrib: [i32; 2],
    bets: usize,
    status: Status,
}

impl Betting {
    pub fn new(game: GameId) -> Self {
        let ante = game.spec().ante;
        Betting {
            game,
            rounds: vec![Vec::new()],
            contrib: [ante, ante],
            bets: 0,
            status: Status::ToAct(0),
        }
    }

    pub fn game(&self) -> GameId {
        self.game
    }

    pub fn spec(&self) -> &'static GameSpec {
        self.game.spec()
    }

    pub fn status(&self) -> Status {
        self.status
    }

    /// Zero-based index of the current betting round.
    pub fn round(&self) -> usize {
        self.rounds.len() - 1
    }

    pub fn rounds(&self) -> &[Vec<Action>] {
        &self.rounds
    }

    pub fn to_act(&self) -> Option<usize> {
        match self.status {
            Status::ToAct(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.status, Status::Terminal(_))
    }

    pub fn awaiting_community(&self) -> bool {
        self.status == Status::AwaitingCommunity
    }

    pub fn contributions(&self) -> [i32; 2] {
        self.contrib
    }

    pub fn bet_pending(&self) -> bool {
        self.contrib[0] != self.contrib[1]
    }

    pub fn bets_this_round(&self) -> usize {
        self.bets
    }

    pub fn legal_actions(&self) -> Result<Vec<Action>> {
        match self.status {
            Status::Terminal(_) => Err(Error::Terminal),
            Status::AwaitingCommunity => Err(Error::ChancePending),
            Status::ToAct(_) => Ok(match self.game {
                GameId::Kuhn => vec![Action::Pass, Action::Bet],
                GameId::Leduc => {
                    let mut legal = vec![Action::Call];
                    if self.bets < self.spec().raise_cap {
                        legal.push(Action::Raise);
                    }
                    if self.bet_pending() {
                        legal.push(Action::Fold);
                    }
                    legal
                }
            }),
        }
    }

    pub fn is_legal(&self, action: Action) -> bool {
        self.legal_actions()
            .map(|l| l.contains(&action))
            .unwrap_or(false)
    }

    fn kind(&self, action: Action) -> Kind {
        let pending = self.bet_pending();
        match action {
            Action::Pass | Action::Call if !pending => Kind::Check,
            Action::Pass => Kind::Fold,
            Action::Call => Kind::Call,
            Action::Bet if pending => Kind::Call,
            Action::Bet | Action::Raise => Kind::Bet,
            Action::Fold => Kind::Fold,
        }
    }

    pub fn apply(&self, action: Action) -> Result<Betting> {
        let actor = match self.status {
            Status::ToAct(p) => p,
            Status::Terminal(_) => return Err(Error::Terminal),
            Status::AwaitingCommunity => return Err(Error::ChancePending),
        };
        if !self.is_legal(action) {
            return Err(Error::IllegalAction {
                action,
                history: self.history(),
            });
        }
        let mut next = self.clone();
        let other = 1 - actor;
        let kind = self.kind(action);
        next.rounds.last_mut().expect("at least one round").push(action);
        match kind {
            Kind::Fold => next.status = Status::Terminal(Outcome::Fold { folder: actor }),
            Kind::Check => {
                if self.rounds[self.round()].is_empty() {
                    next.status = Status::ToAct(other);
                } else {
                    next.close_round();
                }
            }
            Kind::Bet => {
                next.contrib[actor] = self.contrib[other] + self.spec().bet_sizes[self.round()];
                next.bets += 1;
                next.status = Status::ToAct(other);
            }
            Kind::Call => {
                next.contrib[actor] = self.contrib[other];
                next.close_round();
            }
        }
        Ok(next)
    }

    fn close_round(&mut self) {
        self.status = if self.round() + 1 < self.spec().rounds {
            Status::AwaitingCommunity
        } else {
            Status::Terminal(Outcome::Showdown)
        };
    }

    /// Opens the next round once the community card is on the table.
    pub fn start_next_round(&self) -> Result<Betting> {
        if !self.awaiting_community() {
            return Err(Error::Parse("no round transition pending".into()));
        }
        let mut next = self.clone();
        next.rounds.push(Vec::new());
        next.bets = 0;
        next.status = Status::ToAct(0);
        Ok(next)
    }

    /// Letter codes of one round: Kuhn `p`/`b`; Leduc `x` check, `b` bet,
    /// `r` raise, `c` call, `f` fold.
    pub fn round_history(&self, round: usize) -> String {
        let Some(actions) = self.rounds.get(round) else {
            return String::new();
        };
        let mut pending = false;
        let mut out = String::with_capacity(actions.len());
        for &a in actions {
            let c = match (self.game, a) {
                (GameId::Kuhn, Action::Pass) => 'p',
                (GameId::Kuhn, _) => 'b',
                (_, Action::Call) if pending => 'c',
                (_, Action::Call) => 'x',
                (_, Action::Raise) if pending => 'r',
                (_, Action::Raise) => 'b',
                (_, _) => 'f',
            };
            pending = matches!(c, 'b' | 'r');
            out.push(c);
        }
        out
    }

    /// Full public history, rounds separated by `/`.
    pub fn history(&self) -> String {
        (0..self.rounds.len())
            .map(|r| self.round_history(r))
            .collect::<Vec<_>>()
            .join("/")
    }

    /// Replays a history string such as `xbrc/b` (round transitions are implied).
    pub fn replay(game: GameId, history: &str) -> Result<Betting> {
        let mut b = Betting::new(game);
        for (r, round) in history.split('/').enumerate() {
            if r > 0 {
                b = b.start_next_round()?;
            }
            for c in round.chars() {
                let action = match (game, c) {
                    (GameId::Kuhn, 'p') => Action::Pass,
                    (GameId::Kuhn, 'b') => Action::Bet,
                    (GameId::Leduc, 'x' | 'c') => Action::Call,
                    (GameId::Leduc, 'b' | 'r') => Action::Raise,
                    (GameId::Leduc, 'f') => Action::Fold,
                    _ => return Err(Error::Parse(format!("bad history symbol `{c}`"))),
                };
                b = b.apply(action)?;
            }
        }
        if b.history() != history {
            return Err(Error::Parse(format!("non-canonical history `{history}`")));
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kuhn_check_down_closes() {
        let b = Betting::new(GameId::Kuhn)
            .apply(Action::Pass)
            .unwrap()
            .apply(Action::Pass)
            .unwrap();
        assert_eq!(b.status(), Status::Terminal(Outcome::Showdown));
        assert_eq!(b.contributions(), [1, 1]);
    }

    #[test]
    fn kuhn_pass_facing_bet_folds() {
        let b = Betting::new(GameId::Kuhn)
            .apply(Action::Bet)
            .unwrap()
            .apply(Action::Pass)
            .unwrap();
        assert_eq!(b.status(), Status::Terminal(Outcome::Fold { folder: 1 }));
        assert_eq!(b.history(), "bp");
    }

    #[test]
    fn leduc_cap_two_bets() {
        let b = Betting::replay(GameId::Leduc, "br").unwrap();
        assert_eq!(b.legal_actions().unwrap(), vec![Action::Call, Action::Fold]);
        let b = Betting::replay(GameId::Leduc, "x").unwrap();
        assert_eq!(b.legal_actions().unwrap(), vec![Action::Call, Action::Raise]);
    }

    #[test]
    fn leduc_round_transition() {
        let b = Betting::replay(GameId::Leduc, "bc").unwrap();
        assert!(b.awaiting_community());
        assert_eq!(b.contributions(), [3, 3]);
        let b = b.start_next_round().unwrap().apply(Action::Raise).unwrap();
        assert_eq!(b.contributions(), [7, 3]);
        assert_eq!(b.history(), "bc/b");
        assert_eq!(b.to_act(), Some(1));
    }

    #[test]
    fn replay_rejects_noncanonical() {
        assert!(Betting::replay(GameId::Leduc, "xr").is_err());
        assert!(Betting::replay(GameId::Leduc, "bcc").is_err());
    }
}
