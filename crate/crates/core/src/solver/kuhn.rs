use super::PolicyTable;
use crate::engine::{GameId, InfoSetKey, Rank};
use crate::error::{Error, Result};

/// Largest admissible equilibrium parameter.
pub const KUHN_ALPHA_MAX: f64 = 1.0 / 3.0;

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=KUHN_ALPHA_MAX + 1e-12).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(())
}

/// Closed-form Kuhn equilibrium for one position (0 opens, 1 responds).
///
/// The opener bets J with probability `alpha`, K with `3 alpha`, and calls a
/// bet after checking with Q at `1/3 + alpha`. The responder bets J after a
/// check with 1/3 and calls with Q at 1/3. Rows are `[P(PASS), P(BET)]`.
pub fn kuhn_ne_strategy(alpha: f64, position: usize) -> Result<PolicyTable> {
    validate_alpha(alpha)?;
    let third = 1.0 / 3.0;
    let rows: [(Rank, &str, f64); 6] = match position {
        0 => [
            (Rank::J, "", alpha),
            (Rank::Q, "", 0.0),
            (Rank::K, "", 3.0 * alpha),
            (Rank::J, "pb", 0.0),
            (Rank::Q, "pb", third + alpha),
            (Rank::K, "pb", 1.0),
        ],
        1 => [
            (Rank::J, "p", third),
            (Rank::Q, "p", 0.0),
            (Rank::K, "p", 1.0),
            (Rank::J, "b", 0.0),
            (Rank::Q, "b", third),
            (Rank::K, "b", 1.0),
        ],
        p => return Err(Error::Config(format!("position {p} is not 0 or 1"))),
    };
    let mut table = PolicyTable::new(GameId::Kuhn, format!("kuhn_ne_{alpha}"));
    for (rank, history, bet) in rows {
        let bet = bet.min(1.0);
        table.insert(InfoSetKey::new(GameId::Kuhn, rank, None, history), vec![1.0 - bet, bet])?;
    }
    Ok(table)
}

/// Both positions of the equilibrium in one table.
pub fn kuhn_ne_profile(alpha: f64) -> Result<PolicyTable> {
    let mut table = kuhn_ne_strategy(alpha, 0)?;
    table.merge(&kuhn_ne_strategy(alpha, 1)?)?;
    table.set_name(format!("kuhn_ne_{alpha}"));
    Ok(table)
}
