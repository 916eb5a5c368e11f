use crate::engine::{enumerate_deals, new_hand, GameId, HandState};
use crate::error::{Error, Result};
use crate::oracle::best_response;
use crate::policy::{Decision, Policy};

/// Exact expected chips for seat 0 at hand index 0, enumerating every deal and
/// every action branch through the engine.
pub fn exact_ev(game: GameId, seat0: &dyn Policy, seat1: &dyn Policy, dealer_seat: usize) -> Result<f64> {
    exact_ev_at(game, seat0, seat1, dealer_seat, 0)
}

/// As [`exact_ev`], with scheduled policies evaluated at `hand_index`.
pub fn exact_ev_at(
    game: GameId,
    seat0: &dyn Policy,
    seat1: &dyn Policy,
    dealer_seat: usize,
    hand_index: usize,
) -> Result<f64> {
    for p in [seat0, seat1] {
        if p.game() != game {
            return Err(Error::GameMismatch {
                expected: game,
                found: p.game(),
            });
        }
    }
    let spec = game.spec();
    let mut total = 0.0;
    for (deal, prob) in enumerate_deals(spec) {
        let state = new_hand(spec, deal, dealer_seat)?;
        total += prob * branch_value(&state, [seat0, seat1], hand_index)?;
    }
    Ok(total)
}

/// Mean of [`exact_ev_at`] over hand indices `0..session_len` with a fixed
/// dealer; equals [`exact_ev`] for stationary policies.
pub fn exact_session_ev(
    game: GameId,
    seat0: &dyn Policy,
    seat1: &dyn Policy,
    dealer_seat: usize,
    session_len: usize,
) -> Result<f64> {
    if seat0.is_stationary() && seat1.is_stationary() {
        return exact_ev(game, seat0, seat1, dealer_seat);
    }
    let n = session_len.max(1);
    let mut total = 0.0;
    for h in 0..n {
        total += exact_ev_at(game, seat0, seat1, dealer_seat, h)?;
    }
    Ok(total / n as f64)
}

fn branch_value(state: &HandState, policies: [&dyn Policy; 2], hand_index: usize) -> Result<f64> {
    if state.is_terminal() {
        return Ok(f64::from(state.terminal_payoff()?[0]));
    }
    let seat = state.to_act().ok_or(Error::ChancePending)?;
    let decision = Decision::from_state(state, hand_index)?;
    let dist = policies[seat].distribution(&decision)?;
    let actions = state.spec().actions();
    let mut v = 0.0;
    for (&a, &p) in actions.iter().zip(&dist) {
        if p > 0.0 {
            v += p * branch_value(&state.apply_action(a)?, policies, hand_index)?;
        }
    }
    Ok(v)
}

/// Seat-averaged best-response gain against a profile that covers both
/// positions: half the sum of the two best-response values. Zero exactly at
/// an equilibrium because the two positions' game values cancel.
pub fn exploitability(game: GameId, profile: &dyn Policy) -> Result<f64> {
    let as_opener = best_response(game, profile, 0)?.value;
    let as_responder = best_response(game, profile, 1)?.value;
    Ok(0.5 * (as_opener + as_responder))
}
