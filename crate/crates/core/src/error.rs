use thiserror::Error;

use crate::engine::{Action, GameId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid deal: {0}")]
    InvalidDeal(String),
    #[error("illegal action {action:?} at history {history:?}")]
    IllegalAction { action: Action, history: String },
    #[error("hand is terminal")]
    Terminal,
    #[error("hand is not terminal")]
    NotTerminal,
    #[error("community card has not been dealt")]
    ChancePending,
    #[error("unknown toy `{0}`")]
    UnknownToy(String),
    #[error("observation for {found:?} passed to a {expected:?} policy")]
    GameMismatch { expected: GameId, found: GameId },
    #[error("empty legal action set")]
    EmptyLegalSet,
    #[error("alpha {0} outside [0, 1/3]")]
    AlphaOutOfRange(f64),
    #[error("policy has no entry for information set `{0}`")]
    MissingInfoSet(String),
    #[error("best response is undefined for non-stationary opponent `{0}`")]
    NonStationary(String),
    #[error("BR ceiling {0} below the applicability threshold")]
    CeilingTooSmall(f64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("token vocabulary violation: {0}")]
    Vocabulary(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
