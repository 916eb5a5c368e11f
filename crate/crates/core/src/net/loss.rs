use ndarray::Array2;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::model::{forward, NetInput, Observation};
use super::params::Params;
use super::tape::Tape;
use crate::engine::{enumerate_deals, new_hand, GameId};
use crate::error::{Error, Result};
use crate::histenc::{tokenize_hand, TokenSequence};
use crate::policy::{sample_index, Decision};

/// Weights of the composite PPO objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub clip: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
}

/// PPO training examples over a shared set of past hands.
#[derive(Clone, Debug)]
pub struct Minibatch<'a> {
    pub input: NetInput<'a>,
    /// Chosen head index per decision.
    pub actions: Vec<usize>,
    pub old_logp: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch<'_> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Mean of `(r - 1) - ln r` over the batch.
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
}

/// Loss, statistics and (optionally) parameter gradients.
fn evaluate(
    params: &Params,
    mb: &Minibatch<'_>,
    spec: &LossSpec,
    mask_history: bool,
    train: bool,
    rng: &mut dyn RngCore,
    with_grads: bool,
) -> Result<(Option<Vec<Array2<f64>>>, LossStats)> {
    let n = mb.len();
    if n == 0 {
        return Err(Error::Shape("empty minibatch".into()));
    }
    for (name, len) in [
        ("old_logp", mb.old_logp.len()),
        ("advantages", mb.advantages.len()),
        ("returns", mb.returns.len()),
    ] {
        if len != n {
            return Err(Error::Shape(format!("{name} has {len} entries for {n} actions")));
        }
    }
    let mut tape = Tape::new();
    let f = forward(&mut tape, params, &mb.input, mask_history, train, rng)?;
    let chosen = tape.pick(f.logp, mb.actions.clone());
    let policy = tape.ppo_clip(chosen, &mb.old_logp, &mb.advantages, spec.clip);
    let value = tape.mse(f.value, &mb.returns);
    let entropy = tape.entropy(f.logp);
    let loss = tape.combine(&[(policy, 1.0), (value, spec.vf_coef), (entropy, -spec.ent_coef)]);

    let mut stats = LossStats {
        loss: tape.scalar(loss),
        policy_loss: tape.scalar(policy),
        value_loss: tape.scalar(value),
        entropy: tape.scalar(entropy),
        ..LossStats::default()
    };
    if !stats.loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {}", stats.loss)));
    }
    let lp = tape.value(chosen);
    for i in 0..n {
        let log_r = lp[[i, 0]] - mb.old_logp[i];
        let r = log_r.exp();
        stats.approx_kl += (r - 1.0) - log_r;
        stats.mean_ratio += r;
        if (r - 1.0).abs() > spec.clip {
            stats.clip_fraction += 1.0;
        }
    }
    stats.approx_kl /= n as f64;
    stats.mean_ratio /= n as f64;
    stats.clip_fraction /= n as f64;

    let grads = with_grads.then(|| {
        let mut all = tape.backward(loss);
        f.params
            .iter()
            .zip(params.tensors())
            .map(|(v, t)| all[v.index()].take().unwrap_or_else(|| Array2::zeros(t.raw_dim())))
            .collect()
    });
    Ok((grads, stats))
}

/// Exact reverse-mode gradients of the composite PPO loss.
pub fn gradients(
    params: &Params,
    mb: &Minibatch<'_>,
    spec: &LossSpec,
    mask_history: bool,
    train: bool,
    rng: &mut dyn RngCore,
) -> Result<(Vec<Array2<f64>>, LossStats)> {
    let (g, stats) = evaluate(params, mb, spec, mask_history, train, rng, true)?;
    Ok((g.expect("gradients requested"), stats))
}

pub fn loss_stats(
    params: &Params,
    mb: &Minibatch<'_>,
    spec: &LossSpec,
    mask_history: bool,
    train: bool,
    rng: &mut dyn RngCore,
) -> Result<LossStats> {
    Ok(evaluate(params, mb, spec, mask_history, train, rng, false)?.1)
}

/// Largest relative error between analytic gradients and central differences
/// over `sample_count` random coordinates. Dropout stays on with the same
/// masks in every evaluation so the loss is a fixed smooth function.
pub fn grad_check(
    params: &Params,
    mb: &Minibatch<'_>,
    spec: &LossSpec,
    epsilon: f64,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon {epsilon} outside [1e-6, 1e-3]")));
    }
    let loss_at = |p: &Params| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(loss_stats(p, mb, spec, false, true, &mut rng)?.loss)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (analytic, _) = gradients(params, mb, spec, false, true, &mut rng)?;
    let mut pick = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let total = params.count();
    let mut work = params.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..sample_count {
        let mut flat = pick.random_range(0..total);
        let mut t = 0;
        while flat >= params.tensors()[t].len() {
            flat -= params.tensors()[t].len();
            t += 1;
        }
        let cols = params.tensors()[t].ncols();
        let idx = (flat / cols, flat % cols);
        let orig = params.tensors()[t][idx];
        work.tensors_mut()[t][idx] = orig + epsilon;
        let up = loss_at(&work)?;
        work.tensors_mut()[t][idx] = orig - epsilon;
        let down = loss_at(&work)?;
        work.tensors_mut()[t][idx] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic[t][idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Owned decisions and past hands for gradient checks and tests.
#[derive(Clone, Debug)]
pub struct SyntheticBatch {
    pub observations: Vec<Observation>,
    pub hands: Vec<TokenSequence>,
    pub prefixes: Vec<Vec<usize>>,
    pub actions: Vec<usize>,
    pub old_logp: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl SyntheticBatch {
    /// Plays one session of uniformly random hands and records seat 0's
    /// decisions. Old log-probabilities come from `params` in evaluation mode
    /// so ratios start near one.
    pub fn generate(params: &Params, hands: usize, seed: u64) -> Result<SyntheticBatch> {
        let game = params.config().game;
        let spec = game.spec();
        let deals = enumerate_deals(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = SyntheticBatch {
            observations: Vec::new(),
            hands: Vec::new(),
            prefixes: Vec::new(),
            actions: Vec::new(),
            old_logp: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
        };
        for h in 0..hands.min(params.config().max_hands + 1) {
            let deal = deals[rng.random_range(0..deals.len())].0;
            let mut state = new_hand(spec, deal, h % 2)?;
            while !state.is_terminal() {
                let seat = state.to_act().ok_or(Error::ChancePending)?;
                let decision = Decision::from_state(&state, h)?;
                let legal = decision.legal_mask();
                let k = legal.iter().filter(|&&l| l).count() as f64;
                let probs: Vec<f64> = legal.iter().map(|&l| if l { 1.0 / k } else { 0.0 }).collect();
                let a = sample_index(&probs, rng.random());
                if seat == 0 {
                    out.observations.push(Observation::from_decision(&decision));
                    out.prefixes.push((0..out.hands.len()).collect());
                    out.actions.push(a);
                    out.advantages.push(rng.sample(StandardNormal));
                    out.returns.push(rng.sample::<f64, _>(StandardNormal) * 2.0);
                }
                state = state.apply_action(spec.actions()[a])?;
            }
            out.hands.push(tokenize_hand(&state.completed()?, 0)?);
        }
        if out.actions.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let mb = out.minibatch();
        let mut tape = Tape::new();
        let mut dummy = ChaCha8Rng::seed_from_u64(0);
        let f = forward(&mut tape, params, &mb.input, false, false, &mut dummy)?;
        let lp = tape.value(f.logp).clone();
        out.old_logp = out.actions.iter().enumerate().map(|(i, &a)| lp[[i, a]]).collect();
        Ok(out)
    }

    pub fn minibatch(&self) -> Minibatch<'_> {
        Minibatch {
            input: NetInput {
                observations: self.observations.iter().collect(),
                hands: self.hands.iter().collect(),
                prefixes: self.prefixes.clone(),
            },
            actions: self.actions.clone(),
            old_logp: if self.old_logp.is_empty() {
                vec![0.0; self.actions.len()]
            } else {
                self.old_logp.clone()
            },
            advantages: self.advantages.clone(),
            returns: self.returns.clone(),
        }
    }
}

/// Default loss weights of a game.
pub fn default_loss_spec(game: GameId) -> LossSpec {
    LossSpec {
        clip: 0.1,
        vf_coef: 0.01,
        ent_coef: match game {
            GameId::Kuhn => 0.025,
            GameId::Leduc => 0.0075,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetConfig;

    fn check(game: GameId) -> f64 {
        let params = Params::init(&NetConfig::for_game(game), 11).unwrap();
        let batch = SyntheticBatch::generate(&params, 6, 5).unwrap();
        grad_check(&params, &batch.minibatch(), &default_loss_spec(game), 1e-5, 200, 3).unwrap()
    }

    #[test]
    fn kuhn_gradients_match_differences() {
        let err = check(GameId::Kuhn);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn leduc_gradients_match_differences() {
        let err = check(GameId::Leduc);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn fresh_batch_has_unit_ratio_in_eval_mode() {
        let params = Params::init(&NetConfig::for_game(GameId::Kuhn), 2).unwrap();
        let batch = SyntheticBatch::generate(&params, 8, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = loss_stats(&params, &batch.minibatch(), &default_loss_spec(GameId::Kuhn), false, false, &mut rng).unwrap();
        assert!((s.mean_ratio - 1.0).abs() < 1e-12);
        assert!(s.approx_kl.abs() < 1e-12);
        assert_eq!(s.clip_fraction, 0.0);
    }

    #[test]
    fn bad_epsilon_rejected() {
        let params = Params::init(&NetConfig::for_game(GameId::Kuhn), 2).unwrap();
        let batch = SyntheticBatch::generate(&params, 3, 1).unwrap();
        let spec = default_loss_spec(GameId::Kuhn);
        assert!(grad_check(&params, &batch.minibatch(), &spec, 1e-2, 1, 0).is_err());
    }
}
