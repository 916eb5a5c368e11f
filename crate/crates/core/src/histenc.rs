//! Tokenised hand records and the session context they feed.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{CompletedHand, GameId};
use crate::error::{Error, Result};
use crate::net::{self, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenTag {
    AgentAction,
    OppAction,
    PrivateCard,
    CommunityCard,
    OppCard,
}

impl TokenTag {
    pub const ALL: [TokenTag; 5] = [
        TokenTag::AgentAction,
        TokenTag::OppAction,
        TokenTag::PrivateCard,
        TokenTag::CommunityCard,
        TokenTag::OppCard,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn vocabulary(self, game: GameId) -> usize {
        match self {
            TokenTag::AgentAction | TokenTag::OppAction => game.spec().arity,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TokenTag::AgentAction => "AGENT_ACTION",
            TokenTag::OppAction => "OPP_ACTION",
            TokenTag::PrivateCard => "PRIVATE_CARD",
            TokenTag::CommunityCard => "COMMUNITY_CARD",
            TokenTag::OppCard => "OPP_CARD",
        }
    }
}

impl FromStr for TokenTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TokenTag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown token tag `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub tag: TokenTag,
    pub symbol: usize,
    /// Position within the hand.
    pub pos: usize,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}@{}", self.tag.name(), self.symbol, self.pos)
    }
}

/// Tokens of one completed hand seen from the hero's seat.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    pub game: GameId,
    pub tokens: Vec<Token>,
}

/// Longest possible token sequence of one hand.
pub fn token_cap(game: GameId) -> usize {
    let spec = game.spec();
    // private card, every action slot, community card, opponent card
    1 + spec.rounds * spec.max_actions_per_round() + (spec.rounds - 1) + 1
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks symbols against their vocabularies and positions against the cap.
    pub fn validate(&self) -> Result<()> {
        let cap = token_cap(self.game);
        if self.tokens.len() > cap {
            return Err(Error::Vocabulary(format!("{} tokens exceed the cap {cap}", self.tokens.len())));
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.symbol >= t.tag.vocabulary(self.game) {
                return Err(Error::Vocabulary(format!("{t} outside the {} vocabulary", t.tag.name())));
            }
            if t.pos != i {
                return Err(Error::Vocabulary(format!("{t} at index {i}")));
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        self.tokens.iter().map(Token::to_string).collect::<Vec<_>>().join("\n")
    }
}

/// One token per line as `tag:symbol@pos`, hands separated by a `|` line.
pub fn dump_tokens(hands: &[TokenSequence]) -> String {
    hands.iter().map(TokenSequence::dump).collect::<Vec<_>>().join("\n|\n")
}

pub fn parse_token_dump(game: GameId, text: &str) -> Result<Vec<TokenSequence>> {
    let mut out = Vec::new();
    for chunk in text.split("\n|\n") {
        let mut tokens = Vec::new();
        for line in chunk.lines().filter(|l| !l.trim().is_empty()) {
            let bad = || Error::Parse(format!("bad token `{line}`"));
            let (tag, rest) = line.trim().split_once(':').ok_or_else(bad)?;
            let (symbol, pos) = rest.split_once('@').ok_or_else(bad)?;
            tokens.push(Token {
                tag: tag.parse()?,
                symbol: symbol.parse().map_err(|_| bad())?,
                pos: pos.parse().map_err(|_| bad())?,
            });
        }
        let seq = TokenSequence { game, tokens };
        seq.validate()?;
        out.push(seq);
    }
    Ok(out)
}

/// Hero private card, actions in play order tagged by actor, the community
/// card where it was dealt, and the opponent's card after a showdown.
pub fn tokenize_hand(hand: &CompletedHand, hero_seat: usize) -> Result<TokenSequence> {
    if hero_seat > 1 {
        return Err(Error::Config(format!("seat {hero_seat} is not 0 or 1")));
    }
    let spec = hand.game.spec();
    let mut tokens = Vec::new();
    let mut push = |tag, symbol| {
        let pos = tokens.len();
        tokens.push(Token { tag, symbol, pos });
    };
    push(TokenTag::PrivateCard, hand.private[hero_seat].index());
    let mut round = 0;
    for rec in &hand.actions {
        if rec.round != round {
            round = rec.round;
            let c = hand
                .community
                .ok_or_else(|| Error::InvalidDeal("round two reached without a community card".into()))?;
            push(TokenTag::CommunityCard, c.index());
        }
        let tag = if rec.seat == hero_seat {
            TokenTag::AgentAction
        } else {
            TokenTag::OppAction
        };
        let symbol = spec
            .action_index(rec.action)
            .ok_or_else(|| Error::Vocabulary(format!("{} is not a {} action", rec.action, hand.game)))?;
        push(tag, symbol);
    }
    if hand.showdown {
        push(TokenTag::OppCard, hand.private[1 - hero_seat].index());
    }
    let seq = TokenSequence { game: hand.game, tokens };
    seq.validate()?;
    Ok(seq)
}

/// Session context of a hero decision.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryContext {
    pub z: Vec<f64>,
    pub hand_count: usize,
}

/// Encodes completed hands into the context vector `z`. Masked mode and an
/// empty history both give the zero vector without reading any token.
pub fn encode_history<R: Rng + ?Sized>(
    hands: &[TokenSequence],
    params: &Params,
    mask: bool,
    train: bool,
    rng: &mut R,
) -> Result<HistoryContext> {
    let z = net::encode_context(params, hands, mask, train, rng)?;
    Ok(HistoryContext {
        z: z.to_vec(),
        hand_count: if mask { 0 } else { hands.len() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{new_hand, Action, Deal, Rank};
    use crate::net::NetConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn play(game: GameId, ranks: [Rank; 2], community: Option<Rank>, actions: &[Action]) -> CompletedHand {
        let spec = game.spec();
        let mut s = new_hand(spec, Deal::from_ranks(spec, ranks, community).unwrap(), 0).unwrap();
        for &a in actions {
            s = s.apply_action(a).unwrap();
        }
        s.completed().unwrap()
    }

    #[test]
    fn kuhn_showdown_tokens() {
        let h = play(GameId::Kuhn, [Rank::J, Rank::K], None, &[Action::Bet, Action::Bet]);
        let hero = tokenize_hand(&h, 0).unwrap();
        assert_eq!(hero.dump(), "PRIVATE_CARD:0@0\nAGENT_ACTION:1@1\nOPP_ACTION:1@2\nOPP_CARD:2@3");
        let villain = tokenize_hand(&h, 1).unwrap();
        assert_eq!(villain.tokens[0].symbol, 2);
        assert_eq!(villain.tokens[1].tag, TokenTag::OppAction);
        assert_eq!(villain.tokens[3].symbol, 0);
    }

    #[test]
    fn fold_hides_opponent_card() {
        let h = play(GameId::Kuhn, [Rank::Q, Rank::K], None, &[Action::Bet, Action::Pass]);
        let t = tokenize_hand(&h, 0).unwrap();
        assert!(t.tokens.iter().all(|t| t.tag != TokenTag::OppCard));
    }

    #[test]
    fn leduc_community_between_rounds() {
        use Action::*;
        let h = play(
            GameId::Leduc,
            [Rank::J, Rank::Q],
            Some(Rank::K),
            &[Call, Call, Raise, Raise, Call],
        );
        let t = tokenize_hand(&h, 1).unwrap();
        let tags: Vec<_> = t.tokens.iter().map(|t| t.tag).collect();
        assert_eq!(tags[3], TokenTag::CommunityCard);
        assert_eq!(t.tokens[3].symbol, 2);
        assert_eq!(*tags.last().unwrap(), TokenTag::OppCard);
        assert!(t.len() <= token_cap(GameId::Leduc));
    }

    #[test]
    fn dump_round_trip() {
        let a = tokenize_hand(&play(GameId::Kuhn, [Rank::J, Rank::K], None, &[Action::Pass, Action::Pass]), 0).unwrap();
        let b = tokenize_hand(&play(GameId::Kuhn, [Rank::K, Rank::Q], None, &[Action::Bet, Action::Pass]), 1).unwrap();
        let text = dump_tokens(&[a.clone(), b.clone()]);
        assert_eq!(parse_token_dump(GameId::Kuhn, &text).unwrap(), vec![a, b]);
        assert!(parse_token_dump(GameId::Kuhn, "PRIVATE_CARD:5@0").is_err());
        assert!(parse_token_dump(GameId::Kuhn, "PRIVATE_CARD:1@3").is_err());
    }

    #[test]
    fn masked_and_empty_contexts_are_zero() {
        let params = Params::init(&NetConfig::for_game(GameId::Kuhn), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = tokenize_hand(&play(GameId::Kuhn, [Rank::J, Rank::K], None, &[Action::Bet, Action::Bet]), 0).unwrap();
        let masked = encode_history(std::slice::from_ref(&h), &params, true, false, &mut rng).unwrap();
        assert!(masked.z.iter().all(|&v| v == 0.0));
        assert_eq!(masked.hand_count, 0);
        let empty = encode_history(&[], &params, false, false, &mut rng).unwrap();
        assert!(empty.z.iter().all(|&v| v == 0.0));
        let live = encode_history(&[h], &params, false, false, &mut rng).unwrap();
        assert!(live.z.iter().any(|&v| v != 0.0));
    }
}
