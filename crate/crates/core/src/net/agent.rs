use ndarray::Array1;

use super::model::{context_from_summaries, hand_summary, policy_value, Observation};
use super::params::Params;
use crate::engine::CompletedHand;
use crate::error::{Error, Result};
use crate::histenc::{tokenize_hand, TokenSequence};
use crate::policy::{Actor, Decision};

/// Network output at one decision, with the inputs needed to replay it.
#[derive(Clone, Debug)]
pub struct AgentStep {
    pub probs: Vec<f64>,
    pub value: f64,
    pub observation: Observation,
    /// Number of past hands in the context.
    pub history_len: usize,
}

/// Evaluation-mode network player. Hand summaries are cached as hands finish
/// and the context vector is recomputed once per hand.
pub struct NetAgent<'a> {
    params: &'a Params,
    name: String,
    mask_history: bool,
    hands: Vec<TokenSequence>,
    summaries: Vec<Array1<f64>>,
    z: Option<Array1<f64>>,
}

impl<'a> NetAgent<'a> {
    pub fn new(params: &'a Params, name: impl Into<String>, mask_history: bool) -> Self {
        NetAgent {
            params,
            name: name.into(),
            mask_history,
            hands: Vec::new(),
            summaries: Vec::new(),
            z: None,
        }
    }

    pub fn params(&self) -> &Params {
        self.params
    }

    pub fn mask_history(&self) -> bool {
        self.mask_history
    }

    /// Completed hands of the session so far, newest last, from this seat.
    pub fn history(&self) -> &[TokenSequence] {
        &self.hands
    }

    pub fn context(&mut self) -> Result<Array1<f64>> {
        if let Some(z) = &self.z {
            return Ok(z.clone());
        }
        let z = if self.mask_history {
            Array1::zeros(self.params.config().d_model)
        } else {
            context_from_summaries(self.params, &self.summaries)?
        };
        self.z = Some(z.clone());
        Ok(z)
    }

    pub fn step(&mut self, decision: &Decision<'_>) -> Result<AgentStep> {
        if decision.game != self.params.config().game {
            return Err(Error::GameMismatch {
                expected: self.params.config().game,
                found: decision.game,
            });
        }
        let observation = Observation::from_decision(decision);
        let z = self.context()?;
        let (probs, value) = policy_value(self.params, &observation, &z)?;
        if probs.iter().any(|p| !p.is_finite()) || !value.is_finite() {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok(AgentStep {
            probs,
            value,
            observation,
            history_len: if self.mask_history { 0 } else { self.hands.len() },
        })
    }
}

impl Actor for NetAgent<'_> {
    fn begin_session(&mut self) {
        self.hands.clear();
        self.summaries.clear();
        self.z = None;
    }

    fn end_hand(&mut self, hand: &CompletedHand, seat: usize) -> Result<()> {
        self.z = None;
        if self.mask_history {
            return Ok(());
        }
        let seq = tokenize_hand(hand, seat)?;
        self.summaries.push(hand_summary(self.params, &seq)?);
        self.hands.push(seq);
        let max = self.params.config().max_hands;
        if self.hands.len() > max {
            let extra = self.hands.len() - max;
            self.hands.drain(..extra);
            self.summaries.drain(..extra);
        }
        Ok(())
    }

    fn distribution(&mut self, decision: &Decision<'_>) -> Result<Vec<f64>> {
        Ok(self.step(decision)?.probs)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}
