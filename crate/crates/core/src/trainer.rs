//! PPO training against three opponent pools: an ELO-ranked league of past
//! checkpoints, the in-distribution toy curriculum and a FIFO snapshot buffer.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::GameId;
use crate::error::{Error, Result};
use crate::histenc::{tokenize_hand, TokenSequence};
use crate::net::{
    clip_global_norm, gradients, loss_stats, AdamW, LossSpec, LossStats, Minibatch, NetAgent, NetConfig, NetInput,
    Observation, Params,
};
use crate::evalharness::play_match;
use crate::play::{play_hand, random_deal, Player};
use crate::policy::{sample_index, Actor, Policy};
use crate::toys::{pool, PoolTag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    League,
    Toys,
    Buffer,
}

impl PoolKind {
    pub fn name(self) -> &'static str {
        match self {
            PoolKind::League => "league",
            PoolKind::Toys => "toys",
            PoolKind::Buffer => "buffer",
        }
    }
}

/// Training hyperparameters. Defaults per game come from [`TrainConfig::for_game`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub game: GameId,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub clip_epsilon: f64,
    pub grad_clip_norm: f64,
    pub train_steps: usize,
    pub batch_size: usize,
    pub minibatches: usize,
    pub envs_per_opponent: usize,
    /// Hands per session.
    pub episode_length: usize,
    pub checkpoint_every: usize,
    pub league_size: usize,
    pub buffer_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub kl_stop: f64,
    pub weight_decay: f64,
    pub elo_k: f64,
    pub elo_margin_cap: f64,
    /// Hands the candidate plays against each league member.
    pub league_match_hands: usize,
    /// In-distribution toy ids sampled for the toy pool.
    pub curriculum: Vec<String>,
    pub pools: Vec<PoolKind>,
    /// Hands per curriculum toy in the checkpoint evaluation.
    pub eval_hands: usize,
    pub workers: usize,
}

impl TrainConfig {
    pub fn for_game(game: GameId) -> TrainConfig {
        let ids = pool(game, PoolTag::Id).iter().map(|t| t.id.clone()).collect();
        let all = vec![PoolKind::League, PoolKind::Toys, PoolKind::Buffer];
        match game {
            GameId::Kuhn => TrainConfig {
                game,
                seed: 0,
                epochs: 200,
                learning_rate: 1e-4,
                entropy_coef: 0.025,
                value_coef: 0.01,
                clip_epsilon: 0.1,
                grad_clip_norm: 1.0,
                train_steps: 5,
                batch_size: 64,
                minibatches: 5,
                envs_per_opponent: 4,
                episode_length: 100,
                checkpoint_every: 100,
                league_size: 8,
                buffer_size: 25,
                gamma: 1.0,
                gae_lambda: 0.95,
                kl_stop: 0.02,
                weight_decay: 1e-4,
                elo_k: 32.0,
                elo_margin_cap: 1.0,
                league_match_hands: 400,
                curriculum: ids,
                pools: all,
                eval_hands: 2000,
                workers: 1,
            },
            GameId::Leduc => TrainConfig {
                game,
                seed: 0,
                epochs: 200,
                learning_rate: 1e-4,
                entropy_coef: 0.0075,
                value_coef: 0.01,
                clip_epsilon: 0.1,
                grad_clip_norm: 1.0,
                train_steps: 10,
                batch_size: 8,
                minibatches: 4,
                envs_per_opponent: 8,
                episode_length: 100,
                checkpoint_every: 20,
                league_size: 5,
                buffer_size: 25,
                gamma: 1.0,
                gae_lambda: 0.95,
                kl_stop: 0.02,
                weight_decay: 1e-4,
                elo_k: 32.0,
                elo_margin_cap: 2.0,
                league_match_hands: 400,
                curriculum: ids,
                pools: all,
                eval_hands: 2000,
                workers: 1,
            },
        }
    }

    /// Parses a TOML file. `game` is required; every other key overrides the
    /// game's defaults.
    pub fn from_toml(text: &str) -> Result<TrainConfig> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let game: GameId = user
            .get("game")
            .and_then(|g| g.as_str())
            .ok_or_else(|| Error::Config("missing `game`".into()))?
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))?;
        let defaults = toml::Table::try_from(TrainConfig::for_game(game)).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = defaults.clone();
        for (k, v) in user {
            if !defaults.contains_key(&k) {
                return Err(Error::Config(format!("unknown key `{k}`")));
            }
            merged.insert(k, v);
        }
        let config: TrainConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainConfig> {
        TrainConfig::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("epochs", self.epochs),
            ("train_steps", self.train_steps),
            ("batch_size", self.batch_size),
            ("minibatches", self.minibatches),
            ("envs_per_opponent", self.envs_per_opponent),
            ("episode_length", self.episode_length),
            ("checkpoint_every", self.checkpoint_every),
            ("league_size", self.league_size),
            ("buffer_size", self.buffer_size),
            ("league_match_hands", self.league_match_hands),
            ("workers", self.workers),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        let rates = [
            ("learning_rate", self.learning_rate),
            ("clip_epsilon", self.clip_epsilon),
            ("grad_clip_norm", self.grad_clip_norm),
            ("kl_stop", self.kl_stop),
            ("elo_k", self.elo_k),
            ("elo_margin_cap", self.elo_margin_cap),
        ];
        if let Some((name, v)) = rates.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        for (name, v) in [
            ("entropy_coef", self.entropy_coef),
            ("value_coef", self.value_coef),
            ("weight_decay", self.weight_decay),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} {v} outside [0, 1]")));
            }
        }
        if self.pools.is_empty() {
            return Err(Error::Config("no opponent pools".into()));
        }
        if self.pools.contains(&PoolKind::Toys) {
            if self.curriculum.is_empty() {
                return Err(Error::Config("empty toy curriculum".into()));
            }
            let ids = pool(self.game, PoolTag::Id);
            for id in &self.curriculum {
                if !ids.iter().any(|t| &t.id == id) {
                    return Err(Error::Config(format!(
                        "`{id}` is not an in-distribution {} toy",
                        self.game
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec {
            clip: self.clip_epsilon,
            vf_coef: self.value_coef,
            ent_coef: self.entropy_coef,
        }
    }
}

/// One agent decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub action: usize,
    /// Behaviour-policy log-probability of `action`.
    pub logp: f64,
    pub value: f64,
    /// Chips won, nonzero only on the last decision of a hand.
    pub reward: f64,
    pub session: usize,
    pub hand_in_session: usize,
    /// True on the agent's last decision of its hand.
    pub last: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionInfo {
    pub opponent: String,
    pub pool: Option<PoolKind>,
    /// Index of the session's first hand in [`TrajectoryBatch::hands`].
    pub first_hand: usize,
    pub hands: usize,
}

/// Agent decisions of one or more sessions with the hands they produced.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBatch {
    pub game: GameId,
    pub steps: Vec<Step>,
    /// Completed hands tokenised from the agent's seat, session by session.
    pub hands: Vec<TokenSequence>,
    /// Agent chips per hand, aligned with `hands`.
    pub hand_rewards: Vec<f64>,
    pub sessions: Vec<SessionInfo>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl TrajectoryBatch {
    pub fn new(game: GameId) -> TrajectoryBatch {
        TrajectoryBatch {
            game,
            steps: Vec::new(),
            hands: Vec::new(),
            hand_rewards: Vec::new(),
            sessions: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn hand_count(&self) -> usize {
        self.hands.len()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.hand_rewards.is_empty() {
            return 0.0;
        }
        self.hand_rewards.iter().sum::<f64>() / self.hand_rewards.len() as f64
    }

    /// Appends another batch, renumbering its sessions and hands.
    pub fn extend(&mut self, other: TrajectoryBatch) -> Result<()> {
        if other.game != self.game {
            return Err(Error::GameMismatch {
                expected: self.game,
                found: other.game,
            });
        }
        let s0 = self.sessions.len();
        let h0 = self.hands.len();
        self.steps.extend(other.steps.into_iter().map(|mut s| {
            s.session += s0;
            s
        }));
        self.sessions.extend(other.sessions.into_iter().map(|mut s| {
            s.first_hand += h0;
            s
        }));
        self.hands.extend(other.hands);
        self.hand_rewards.extend(other.hand_rewards);
        self.advantages.extend(other.advantages);
        self.returns.extend(other.returns);
        Ok(())
    }

    /// Indices into `hands` visible to a step's context, oldest first.
    pub fn prefix(&self, step: &Step, max_hands: usize) -> Vec<usize> {
        let first = self.sessions[step.session].first_hand;
        let start = step.hand_in_session.saturating_sub(max_hands);
        (start..step.hand_in_session).map(|h| first + h).collect()
    }

    /// Structural checks: finite log-probabilities, rewards only at hand ends,
    /// sessions and hands nested in order.
    pub fn validate(&self) -> Result<()> {
        let mut expect_first = 0;
        for s in &self.sessions {
            if s.first_hand != expect_first {
                return Err(Error::Shape("sessions are not contiguous".into()));
            }
            expect_first += s.hands;
        }
        if expect_first != self.hands.len() || self.hands.len() != self.hand_rewards.len() {
            return Err(Error::Shape("hand count differs from session totals".into()));
        }
        let mut prev = (0, 0);
        for (i, s) in self.steps.iter().enumerate() {
            if !s.logp.is_finite() || s.logp > 0.0 {
                return Err(Error::NonFinite(format!("log-probability {}", s.logp)));
            }
            if !s.last && s.reward != 0.0 {
                return Err(Error::Shape(format!("reward on non-terminal step {i}")));
            }
            if s.session >= self.sessions.len() || s.hand_in_session >= self.sessions[s.session].hands {
                return Err(Error::Shape(format!("step {i} outside its session")));
            }
            let here = (s.session, s.hand_in_session);
            if here < prev {
                return Err(Error::Shape(format!("step {i} out of order")));
            }
            prev = here;
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Plays one session per env against `opponent`, recording the agent's
/// decisions. The agent sits in seat 0 and the dealer alternates each hand.
pub fn rollout(
    params: &Params,
    opponent: &Player<'_>,
    n_envs: usize,
    episode_len: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    if episode_len == 0 {
        return Err(Error::Config("episode length must be at least 1".into()));
    }
    let game = params.config().game;
    if opponent.game() != game {
        return Err(Error::GameMismatch {
            expected: game,
            found: opponent.game(),
        });
    }
    let parts: Vec<TrajectoryBatch> = (0..n_envs)
        .into_par_iter()
        .map(|env| rollout_session(params, opponent, episode_len, stream_rng(seed, env as u64), env % 2))
        .collect::<Result<_>>()?;
    let mut out = TrajectoryBatch::new(game);
    for p in parts {
        out.extend(p)?;
    }
    Ok(out)
}

fn rollout_session(
    params: &Params,
    opponent: &Player<'_>,
    episode_len: usize,
    mut rng: ChaCha8Rng,
    first_dealer: usize,
) -> Result<TrajectoryBatch> {
    let game = params.config().game;
    let spec = game.spec();
    let mut hero = NetAgent::new(params, "agent", false);
    let mut villain = opponent.actor();
    hero.begin_session();
    villain.begin_session();
    let mut out = TrajectoryBatch::new(game);
    out.sessions.push(SessionInfo {
        opponent: opponent.name(),
        pool: None,
        first_hand: 0,
        hands: episode_len,
    });
    for h in 0..episode_len {
        let deal = random_deal(spec, &mut rng);
        let start = out.steps.len();
        let hand = play_hand(spec, deal, (first_dealer + h) % 2, h, |seat, d| {
            if seat == 0 {
                let st = hero.step(d)?;
                let a = sample_index(&st.probs, rng.random());
                out.steps.push(Step {
                    observation: st.observation,
                    action: a,
                    logp: st.probs[a].ln(),
                    value: st.value,
                    reward: 0.0,
                    session: 0,
                    hand_in_session: h,
                    last: false,
                });
                Ok(a)
            } else {
                let probs = villain.distribution(d)?;
                Ok(sample_index(&probs, rng.random()))
            }
        })?;
        let reward = f64::from(hand.payoffs[0]);
        if out.steps.len() > start {
            let last = out.steps.last_mut().expect("nonempty");
            last.reward = reward;
            last.last = true;
        }
        out.hands.push(tokenize_hand(&hand, 0)?);
        out.hand_rewards.push(reward);
        hero.end_hand(&hand, 0)?;
        villain.end_hand(&hand, 1)?;
    }
    Ok(out)
}

/// Generalised advantage estimation within each hand. Fills `advantages`
/// and `returns` without normalising.
pub fn compute_advantages(batch: &mut TrajectoryBatch, gamma: f64, lambda: f64) {
    let n = batch.steps.len();
    batch.advantages = vec![0.0; n];
    batch.returns = vec![0.0; n];
    let (mut next_value, mut gae) = (0.0, 0.0);
    for i in (0..n).rev() {
        let s = &batch.steps[i];
        if s.last {
            next_value = 0.0;
            gae = 0.0;
        }
        let delta = s.reward + gamma * next_value - s.value;
        gae = delta + gamma * lambda * gae;
        batch.advantages[i] = gae;
        batch.returns[i] = gae + s.value;
        next_value = s.value;
    }
}

/// Rescales to zero mean and unit variance (population); a constant input
/// is only centred.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a -= mean;
        if std > 1e-12 {
            *a /= std;
        }
    }
}

/// Assembles the chosen steps into a minibatch, sharing each past hand once.
pub fn build_minibatch<'a>(
    batch: &'a TrajectoryBatch,
    idx: &[usize],
    advantages: &[f64],
    max_hands: usize,
) -> Minibatch<'a> {
    let mut local: HashMap<usize, usize> = HashMap::new();
    let mut hands = Vec::new();
    let mut prefixes = Vec::with_capacity(idx.len());
    for &i in idx {
        let prefix = batch
            .prefix(&batch.steps[i], max_hands)
            .into_iter()
            .map(|g| {
                *local.entry(g).or_insert_with(|| {
                    hands.push(&batch.hands[g]);
                    hands.len() - 1
                })
            })
            .collect();
        prefixes.push(prefix);
    }
    Minibatch {
        input: NetInput {
            observations: idx.iter().map(|&i| &batch.steps[i].observation).collect(),
            hands,
            prefixes,
        },
        actions: idx.iter().map(|&i| batch.steps[i].action).collect(),
        old_logp: idx.iter().map(|&i| batch.steps[i].logp).collect(),
        advantages: idx.iter().map(|&i| advantages[i]).collect(),
        returns: idx.iter().map(|&i| batch.returns[i]).collect(),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    /// Loss statistics of every minibatch evaluated, in order.
    pub minibatches: Vec<LossStats>,
    /// Updates actually applied.
    pub applied: usize,
    pub early_stopped: bool,
    /// Evaluation-mode probability ratio of the first minibatch before any
    /// update; one for on-policy data.
    pub first_ratio: f64,
    pub grad_norms: Vec<f64>,
}

impl UpdateStats {
    pub fn mean(&self) -> LossStats {
        let n = self.minibatches.len().max(1) as f64;
        let mut m = LossStats::default();
        for s in &self.minibatches {
            m.loss += s.loss / n;
            m.policy_loss += s.policy_loss / n;
            m.value_loss += s.value_loss / n;
            m.entropy += s.entropy / n;
            m.approx_kl += s.approx_kl / n;
            m.clip_fraction += s.clip_fraction / n;
            m.mean_ratio += s.mean_ratio / n;
        }
        m
    }
}

/// Clipped-surrogate PPO over minibatches drawn uniformly from `batch`.
/// A minibatch whose approximate KL exceeds `kl_stop` is not applied and
/// ends the update. On error the parameters are left as they were.
pub fn ppo_update(
    params: &mut Params,
    opt: &mut AdamW,
    batch: &TrajectoryBatch,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    if batch.advantages.len() != batch.len() || batch.returns.len() != batch.len() {
        return Err(Error::Shape("batch has no advantages".into()));
    }
    if batch.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut adv = batch.advantages.clone();
    normalize_advantages(&mut adv);
    let backup = params.clone();
    let spec = config.loss_spec();
    let mut stats = UpdateStats::default();
    let result = (|| -> Result<()> {
        'outer: for _ in 0..config.train_steps {
            for _ in 0..config.minibatches {
                let idx = sample(rng, batch.len(), config.batch_size.min(batch.len())).into_vec();
                let mb = build_minibatch(batch, &idx, &adv, params.config().max_hands);
                if stats.minibatches.is_empty() {
                    let mut eval_rng = ChaCha8Rng::seed_from_u64(0);
                    stats.first_ratio = loss_stats(params, &mb, &spec, false, false, &mut eval_rng)?.mean_ratio;
                }
                let (mut grads, s) = gradients(params, &mb, &spec, false, true, rng)?;
                stats.minibatches.push(s);
                if s.approx_kl > config.kl_stop {
                    stats.early_stopped = true;
                    break 'outer;
                }
                stats.grad_norms.push(clip_global_norm(&mut grads, config.grad_clip_norm));
                opt.step(params, &grads)?;
                stats.applied += 1;
            }
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters after update".into()));
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(stats),
        Err(e) => {
            *params = backup;
            Err(e)
        }
    }
}

/// Margin-weighted ELO: the realised score moves linearly with the margin
/// and saturates at `margin_cap`. The rating sum is conserved.
pub fn elo_update(rating_a: f64, rating_b: f64, margin: f64, k: f64, margin_cap: f64) -> (f64, f64) {
    let expected = 1.0 / (1.0 + 10f64.powf((rating_b - rating_a) / 400.0));
    let score = 0.5 + 0.5 * (margin / margin_cap).clamp(-1.0, 1.0);
    let delta = k * (score - expected);
    (rating_a + delta, rating_b - delta)
}

pub const INITIAL_ELO: f64 = 1200.0;

#[derive(Clone, Debug)]
pub struct LeagueMember {
    pub id: String,
    pub params: Params,
    pub rating: f64,
}

/// Fixed-capacity pool of past checkpoints ranked by ELO.
#[derive(Clone, Debug)]
pub struct LeagueState {
    capacity: usize,
    members: Vec<LeagueMember>,
}

impl LeagueState {
    pub fn new(capacity: usize) -> LeagueState {
        LeagueState {
            capacity,
            members: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn members(&self) -> &[LeagueMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Adds a member while there is room.
    pub fn push(&mut self, member: LeagueMember) -> Result<()> {
        if self.members.len() >= self.capacity {
            return Err(Error::Config(format!("league is full at {}", self.capacity)));
        }
        self.members.push(member);
        Ok(())
    }

    fn min_index(&self) -> Option<usize> {
        (0..self.members.len()).min_by(|&a, &b| self.members[a].rating.total_cmp(&self.members[b].rating))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeagueOutcome {
    pub candidate_rating: f64,
    /// Candidate's mean chips per hand against each member, in member order.
    pub margins: Vec<f64>,
    pub accepted: bool,
    pub replaced: Option<String>,
}

/// Mean chips per hand for `a` over `hands` hands against `b`, in sessions of
/// `session_len` with alternating dealer.
pub fn head_to_head(a: &Player<'_>, b: &Player<'_>, hands: usize, session_len: usize, seed: u64) -> Result<f64> {
    Ok(play_match(a, b, hands, session_len, seed)?.mean)
}

/// The candidate plays every member; ratings move through [`elo_update`].
/// While the league has room the candidate joins; once full it replaces the
/// lowest-rated member only if it ends rated above it.
#[allow(clippy::too_many_arguments)]
pub fn league_step(
    mut league: LeagueState,
    candidate_id: &str,
    candidate: Params,
    match_budget: usize,
    session_len: usize,
    k: f64,
    margin_cap: f64,
    seed: u64,
) -> Result<(LeagueState, LeagueOutcome)> {
    if league.is_empty() {
        return Err(Error::Config("league_step needs a nonempty league".into()));
    }
    let mut rating = INITIAL_ELO;
    let mut margins = Vec::with_capacity(league.len());
    for (i, m) in league.members.iter_mut().enumerate() {
        let hero = Player::Net {
            params: &candidate,
            name: candidate_id,
            mask_history: false,
        };
        let villain = Player::Net {
            params: &m.params,
            name: &m.id,
            mask_history: false,
        };
        let margin = head_to_head(&hero, &villain, match_budget, session_len, seed.wrapping_add(i as u64))?;
        let (a, b) = elo_update(rating, m.rating, margin, k, margin_cap);
        rating = a;
        m.rating = b;
        margins.push(margin);
    }
    let mut outcome = LeagueOutcome {
        candidate_rating: rating,
        margins,
        accepted: false,
        replaced: None,
    };
    let member = LeagueMember {
        id: candidate_id.to_string(),
        params: candidate,
        rating,
    };
    if league.len() < league.capacity {
        league.members.push(member);
        outcome.accepted = true;
    } else if let Some(j) = league.min_index() {
        if rating > league.members[j].rating {
            outcome.replaced = Some(std::mem::replace(&mut league.members[j], member).id);
            outcome.accepted = true;
        }
    }
    Ok((league, outcome))
}

/// FIFO ring of past agent snapshots.
#[derive(Clone, Debug)]
pub struct SnapshotBuffer {
    capacity: usize,
    items: VecDeque<(String, Params)>,
}

impl SnapshotBuffer {
    pub fn new(capacity: usize) -> SnapshotBuffer {
        SnapshotBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    /// Appends a snapshot, returning the id of the one evicted, if any.
    pub fn push(&mut self, id: impl Into<String>, params: Params) -> Option<String> {
        let evicted = if self.items.len() >= self.capacity {
            self.items.pop_front().map(|(id, _)| id)
        } else {
            None
        };
        self.items.push_back((id.into(), params));
        evicted
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.items.iter().map(|(id, _)| id.as_str()).collect()
    }

    pub fn get(&self, i: usize) -> Option<(&str, &Params)> {
        self.items.get(i).map(|(id, p)| (id.as_str(), p))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean agent chips per hand against each active pool.
    pub pool_rewards: Vec<(PoolKind, f64)>,
    pub loss: LossStats,
    pub first_ratio: f64,
    pub applied: usize,
    pub early_stopped: bool,
    pub elos: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub metrics: Vec<EpochMetrics>,
    pub checkpoints: Vec<PathBuf>,
    /// Mean chips per hand against each curriculum toy at the last checkpoint.
    pub final_eval: Vec<(String, f64)>,
    pub params: Params,
    /// Opponent names of every training session, in order.
    pub opponents_seen: Vec<String>,
}

fn metrics_header() -> String {
    "epoch,reward_league,reward_toys,reward_buffer,loss,policy_loss,value_loss,entropy,approx_kl,clip_fraction,first_ratio,applied,early_stop,league_elos\n".into()
}

fn metrics_row(m: &EpochMetrics) -> String {
    let reward = |k: PoolKind| {
        m.pool_rewards
            .iter()
            .find(|(p, _)| *p == k)
            .map_or(String::new(), |(_, r)| format!("{r:.6}"))
    };
    let elos = m.elos.iter().map(|e| format!("{e:.2}")).collect::<Vec<_>>().join(";");
    format!(
        "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}\n",
        m.epoch,
        reward(PoolKind::League),
        reward(PoolKind::Toys),
        reward(PoolKind::Buffer),
        m.loss.loss,
        m.loss.policy_loss,
        m.loss.value_loss,
        m.loss.entropy,
        m.loss.approx_kl,
        m.loss.clip_fraction,
        m.first_ratio,
        m.applied,
        u8::from(m.early_stopped),
        elos
    )
}

/// Runs the full loop, writing `metrics.csv`, `checkpoints.csv`, the
/// resolved `config.toml` and checkpoint files under `out_dir`.
pub fn train(config: &TrainConfig, out_dir: &Path) -> Result<TrainSummary> {
    config.validate()?;
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    threads.install(|| train_inner(config, out_dir))
}

fn train_inner(config: &TrainConfig, out_dir: &Path) -> Result<TrainSummary> {
    let game = config.game;
    fs::create_dir_all(out_dir.join("checkpoints"))?;
    fs::write(out_dir.join("config.toml"), config.to_toml()?)?;
    let mut params = Params::init(&NetConfig::for_game(game), config.seed)?;
    let mut opt = AdamW::new(&params, config.learning_rate, config.weight_decay);
    let mut league = LeagueState::new(config.league_size);
    league.push(LeagueMember {
        id: "epoch0".into(),
        params: params.clone(),
        rating: INITIAL_ELO,
    })?;
    let mut buffer = SnapshotBuffer::new(config.buffer_size);
    buffer.push("epoch0", params.clone());
    let toys: Vec<_> = config
        .curriculum
        .iter()
        .map(|id| crate::toys::toy(game, id))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut metrics_csv = metrics_header();
    let mut checkpoint_csv = String::from("epoch,path,league_size,accepted,candidate_elo,eval_mean\n");
    let mut summary = TrainSummary {
        metrics: Vec::new(),
        checkpoints: Vec::new(),
        final_eval: Vec::new(),
        params: params.clone(),
        opponents_seen: Vec::new(),
    };
    for epoch in 1..=config.epochs {
        // Opponent draws happen on the coordinator so the run is independent
        // of the worker count.
        let mut jobs: Vec<(PoolKind, Player<'_>, u64)> = Vec::new();
        for (pi, &kind) in config.pools.iter().enumerate() {
            for env in 0..config.envs_per_opponent {
                let player = match kind {
                    PoolKind::League => {
                        let m = &league.members()[rng.random_range(0..league.len())];
                        Player::Net {
                            params: &m.params,
                            name: &m.id,
                            mask_history: false,
                        }
                    }
                    PoolKind::Toys => Player::Policy(toys[rng.random_range(0..toys.len())] as &dyn Policy),
                    PoolKind::Buffer => {
                        let (id, p) = buffer.get(rng.random_range(0..buffer.len())).expect("buffer is nonempty");
                        Player::Net {
                            params: p,
                            name: id,
                            mask_history: false,
                        }
                    }
                };
                let stream = ((epoch as u64) << 32) | ((pi as u64) << 16) | env as u64;
                jobs.push((kind, player, stream));
            }
        }
        let parts: Vec<(PoolKind, TrajectoryBatch)> = jobs
            .par_iter()
            .map(|(kind, player, stream)| {
                let mut b = rollout_session(&params, player, config.episode_length, stream_rng(config.seed, *stream), (*stream % 2) as usize)?;
                b.sessions[0].pool = Some(*kind);
                Ok((*kind, b))
            })
            .collect::<Result<_>>()?;
        let mut batch = TrajectoryBatch::new(game);
        let mut pool_rewards: Vec<(PoolKind, f64, usize)> = Vec::new();
        for (kind, b) in parts {
            let (sum, n) = (b.hand_rewards.iter().sum::<f64>(), b.hand_rewards.len());
            match pool_rewards.iter_mut().find(|(k, _, _)| *k == kind) {
                Some(e) => {
                    e.1 += sum;
                    e.2 += n;
                }
                None => pool_rewards.push((kind, sum, n)),
            }
            summary.opponents_seen.push(b.sessions[0].opponent.clone());
            batch.extend(b)?;
        }
        compute_advantages(&mut batch, config.gamma, config.gae_lambda);
        let stats = ppo_update(&mut params, &mut opt, &batch, config, &mut rng)?;
        let m = EpochMetrics {
            epoch,
            pool_rewards: pool_rewards.iter().map(|(k, s, n)| (*k, s / (*n).max(1) as f64)).collect(),
            loss: stats.mean(),
            first_ratio: stats.first_ratio,
            applied: stats.applied,
            early_stopped: stats.early_stopped,
            elos: league.members().iter().map(|m| m.rating).collect(),
        };
        metrics_csv.push_str(&metrics_row(&m));
        fs::write(out_dir.join("metrics.csv"), &metrics_csv)?;
        summary.metrics.push(m);

        if epoch % config.checkpoint_every == 0 {
            let id = format!("epoch{epoch}");
            let path = out_dir.join("checkpoints").join(format!("epoch_{epoch:06}.json"));
            params.save(&path)?;
            summary.checkpoints.push(path.clone());
            buffer.push(id.clone(), params.clone());
            let (next, outcome) = league_step(
                league,
                &id,
                params.clone(),
                config.league_match_hands,
                config.episode_length,
                config.elo_k,
                config.elo_margin_cap,
                config.seed ^ ((epoch as u64) << 20),
            )?;
            league = next;
            summary.final_eval = evaluate_curriculum(&params, &toys, config, epoch)?;
            let eval_mean =
                summary.final_eval.iter().map(|(_, r)| r).sum::<f64>() / summary.final_eval.len().max(1) as f64;
            let _ = writeln!(
                checkpoint_csv,
                "{epoch},{},{},{},{:.2},{eval_mean:.6}",
                path.display(),
                league.len(),
                u8::from(outcome.accepted),
                outcome.candidate_rating
            );
            fs::write(out_dir.join("checkpoints.csv"), &checkpoint_csv)?;
        }
    }
    let final_path = out_dir.join("final.json");
    params.save(&final_path)?;
    summary.checkpoints.push(final_path);
    summary.params = params;
    Ok(summary)
}

fn evaluate_curriculum(
    params: &Params,
    toys: &[&crate::toys::ToySpec],
    config: &TrainConfig,
    epoch: usize,
) -> Result<Vec<(String, f64)>> {
    let hero = Player::Net {
        params,
        name: "agent",
        mask_history: false,
    };
    let mut out = Vec::new();
    for (i, t) in toys.iter().enumerate() {
        let villain = Player::Policy(*t as &dyn Policy);
        let seed = config.seed ^ ((epoch as u64) << 24) ^ i as u64;
        let r = head_to_head(&hero, &villain, config.eval_hands.max(1), config.episode_length, seed)?;
        out.push((t.id.clone(), r));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elo_examples() {
        assert_eq!(elo_update(1200.0, 1200.0, 0.0, 32.0, 1.0), (1200.0, 1200.0));
        let (a, b) = elo_update(1200.0, 1200.0, 5.0, 32.0, 1.0);
        assert_eq!(a, 1216.0);
        assert_eq!(b, 1184.0);
        let (a, b) = elo_update(1350.0, 1111.0, -0.3, 32.0, 2.0);
        assert!((a + b - 2461.0).abs() < 1e-9);
    }

    #[test]
    fn one_step_advantage() {
        let mut batch = TrajectoryBatch::new(GameId::Kuhn);
        batch.sessions.push(SessionInfo {
            opponent: "x".into(),
            pool: None,
            first_hand: 0,
            hands: 2,
        });
        let obs = Observation {
            cards: vec![1.0, 0.0, 0.0],
            actions: vec![0.0; 9],
            legal: vec![true, true],
        };
        let step = |reward: f64, value: f64, h: usize, last: bool| Step {
            observation: obs.clone(),
            action: 0,
            logp: -0.5,
            value,
            reward,
            session: 0,
            hand_in_session: h,
            last,
        };
        batch.steps = vec![step(1.5, 0.0, 0, true), step(0.0, 2.0, 1, false), step(2.0, 2.0, 1, true)];
        compute_advantages(&mut batch, 1.0, 1.0);
        assert_eq!(batch.advantages, vec![1.5, 0.0, 0.0]);
        assert_eq!(batch.returns, vec![1.5, 2.0, 2.0]);
        let mut adv = vec![1.0, 2.0, 3.0, 10.0];
        normalize_advantages(&mut adv);
        let mean = adv.iter().sum::<f64>() / 4.0;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!(mean.abs() < 1e-6 && (std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn buffer_is_fifo() {
        let p = Params::init(&NetConfig::for_game(GameId::Kuhn), 0).unwrap();
        let mut b = SnapshotBuffer::new(2);
        assert_eq!(b.push("a", p.clone()), None);
        assert_eq!(b.push("b", p.clone()), None);
        assert_eq!(b.push("c", p.clone()), Some("a".into()));
        assert_eq!(b.ids(), vec!["b", "c"]);
    }

    #[test]
    fn config_round_trip_and_overrides() {
        let c = TrainConfig::from_toml("game = \"kuhn\"\nepochs = 3\ncurriculum = [\"f\"]\n").unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.batch_size, 64);
        assert_eq!(c.curriculum, vec!["f".to_string()]);
        assert_eq!(TrainConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        assert!(TrainConfig::from_toml("game = \"kuhn\"\nbogus = 1\n").is_err());
        assert!(TrainConfig::from_toml("epochs = 3\n").is_err());
        let ood = pool(GameId::Kuhn, PoolTag::Ood)[0].id.clone();
        assert!(TrainConfig::from_toml(&format!("game = \"kuhn\"\ncurriculum = [\"{ood}\"]\n")).is_err());
        let l = TrainConfig::for_game(GameId::Leduc);
        assert_eq!((l.envs_per_opponent, l.league_size, l.train_steps, l.batch_size), (8, 5, 10, 8));
    }
}
