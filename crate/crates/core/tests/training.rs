use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pokerlab_core::engine::GameId;
use pokerlab_core::histenc::TokenSequence;
use pokerlab_core::net::{encode_context, AdamW, NetConfig, Params};
use pokerlab_core::play::Player;
use pokerlab_core::toys::{pool, toy, PoolTag};
use pokerlab_core::trainer::{
    compute_advantages, elo_update, league_step, normalize_advantages, ppo_update, rollout, train,
    LeagueMember, LeagueState, TrainConfig,
};
use pokerlab_core::Error;

fn kuhn_params(seed: u64) -> Params {
    Params::init(&NetConfig::for_game(GameId::Kuhn), seed).unwrap()
}

#[test]
fn params_are_seed_deterministic() {
    let a = kuhn_params(3);
    let b = kuhn_params(3);
    let c = kuhn_params(4);
    assert_eq!(a.tensors(), b.tensors());
    assert_ne!(a.tensors(), c.tensors());
    assert_eq!(NetConfig::for_game(GameId::Kuhn).arity(), 2);
    assert_eq!(NetConfig::for_game(GameId::Leduc).arity(), 3);
}

#[test]
fn checkpoint_round_trip_and_shape_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let p = Params::init(&NetConfig::for_game(GameId::Leduc), 1).unwrap();
    p.save(&path).unwrap();
    let q = Params::load(&path).unwrap();
    assert_eq!(p.tensors(), q.tensors());
    assert_eq!(p.names(), q.names());

    let mut json: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
    json["tensors"][0]["shape"][0] = serde_json::json!(999);
    let err = Params::from_json(&json.to_string()).unwrap_err();
    assert!(matches!(err, Error::Shape(_)), "{err}");
}

#[test]
fn rollout_against_folder() {
    let params = kuhn_params(0);
    let f = toy(GameId::Kuhn, "f").unwrap();
    let opp = Player::Policy(f);
    let a = rollout(&params, &opp, 4, 100, 9).unwrap();
    let b = rollout(&params, &opp, 4, 100, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.hand_count(), 400);
    assert_eq!(a.sessions.len(), 4);
    // The folder never bets or calls, so the agent never loses more than an ante.
    assert!(a.hand_rewards.iter().all(|&r| r >= -1.0));
    let c = rollout(&params, &opp, 4, 100, 10).unwrap();
    assert_ne!(a.hand_rewards, c.hand_rewards);
}

#[test]
fn perfect_critic_has_zero_advantage() {
    let params = kuhn_params(0);
    let opp = Player::Policy(toy(GameId::Kuhn, "cs").unwrap());
    let mut batch = rollout(&params, &opp, 2, 20, 1).unwrap();
    // Value of every step set to its hand's realised return.
    let mut ret = 0.0;
    for s in batch.steps.iter_mut().rev() {
        if s.last {
            ret = s.reward;
        }
        s.value = ret;
        if !s.last {
            s.reward = 0.0;
        }
    }
    compute_advantages(&mut batch, 1.0, 0.95);
    assert!(batch.advantages.iter().all(|a| a.abs() < 1e-12));

    let mut adv: Vec<f64> = (0..50).map(|i| (i as f64).sin() * 3.0 + 1.0).collect();
    normalize_advantages(&mut adv);
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-6);
    assert!((std - 1.0).abs() < 1e-6);
}

#[test]
fn ppo_respects_kl_stop() {
    let mut config = TrainConfig::for_game(GameId::Kuhn);
    config.learning_rate = 5e-2;
    config.train_steps = 6;
    config.minibatches = 5;
    let mut params = kuhn_params(5);
    let opp = Player::Policy(toy(GameId::Kuhn, "abq").unwrap());
    let mut batch = rollout(&params, &opp, 4, 50, 2).unwrap();
    compute_advantages(&mut batch, config.gamma, config.gae_lambda);
    let mut opt = AdamW::new(&params, config.learning_rate, config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let stats = ppo_update(&mut params, &mut opt, &batch, &config, &mut rng).unwrap();

    assert!((stats.first_ratio - 1.0).abs() < 1e-6, "{}", stats.first_ratio);
    assert_eq!(opt.steps(), stats.applied as u64);
    for s in &stats.minibatches[..stats.applied] {
        assert!(s.approx_kl <= config.kl_stop);
    }
    if stats.early_stopped {
        assert_eq!(stats.minibatches.len(), stats.applied + 1);
        assert!(stats.minibatches.last().unwrap().approx_kl > config.kl_stop);
    } else {
        assert_eq!(stats.applied, config.train_steps * config.minibatches);
    }
    assert!(stats.grad_norms.iter().all(|g| g.is_finite()));
}

#[test]
fn elo_conserves_rating_sum() {
    for (a, b, m) in [(1200.0, 1200.0, 0.0), (1500.0, 1100.0, 0.7), (900.0, 1300.0, -3.0)] {
        let (x, y) = elo_update(a, b, m, 32.0, 1.0);
        assert!((x + y - a - b).abs() < 1e-9);
    }
    let (x, _) = elo_update(1200.0, 1200.0, 5.0, 32.0, 2.0);
    assert!((x - 1216.0).abs() < 1e-12);
}

fn member(id: &str, seed: u64, rating: f64) -> LeagueMember {
    LeagueMember {
        id: id.into(),
        params: kuhn_params(seed),
        rating,
    }
}

#[test]
fn league_grows_then_replaces_weakest() {
    let mut league = LeagueState::new(2);
    league.push(member("a", 1, 400.0)).unwrap();
    let (league, out) = league_step(league, "b", kuhn_params(2), 200, 50, 32.0, 1.0, 0).unwrap();
    assert!(out.accepted && out.replaced.is_none());
    assert_eq!(league.len(), 2);

    // Full league with a very weak member: the candidate displaces it.
    let mut full = LeagueState::new(2);
    full.push(member("weak", 1, 300.0)).unwrap();
    full.push(member("mid", 2, 1000.0)).unwrap();
    let (full, out) = league_step(full, "cand", kuhn_params(3), 200, 50, 32.0, 1.0, 0).unwrap();
    assert!(out.accepted);
    assert_eq!(out.replaced.as_deref(), Some("weak"));
    assert_eq!(full.len(), full.capacity());
    let cand = full.members().iter().find(|m| m.id == "cand").unwrap();
    assert_eq!(cand.rating, out.candidate_rating);
}

#[test]
fn league_rejects_weak_candidate() {
    let mut league = LeagueState::new(2);
    league.push(member("x", 1, 2400.0)).unwrap();
    league.push(member("y", 2, 2500.0)).unwrap();
    let (after, out) = league_step(league, "cand", kuhn_params(3), 200, 50, 32.0, 1.0, 0).unwrap();
    assert!(!out.accepted);
    let ids: Vec<&str> = after.members().iter().map(|m| m.id.as_str()).collect();
    assert_eq!(ids, ["x", "y"]);
    assert!(out.candidate_rating < 2400.0);
    assert!(league_step(LeagueState::new(3), "c", kuhn_params(0), 10, 5, 32.0, 1.0, 0).is_err());
}

#[test]
fn context_is_order_aware() {
    let params = kuhn_params(0);
    let opp = Player::Policy(toy(GameId::Kuhn, "m").unwrap());
    let batch = rollout(&params, &opp, 1, 6, 3).unwrap();
    let hands: Vec<TokenSequence> = batch.hands.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let forward = encode_context(&params, &hands, false, false, &mut rng).unwrap();
    let mut reversed = hands.clone();
    reversed.reverse();
    assert_ne!(hands, reversed);
    let backward = encode_context(&params, &reversed, false, false, &mut rng).unwrap();
    assert!(forward.iter().zip(&backward).any(|(a, b)| (a - b).abs() > 1e-9));
    let again = encode_context(&params, &hands, false, false, &mut rng).unwrap();
    assert_eq!(forward, again);
}

fn tiny_config() -> TrainConfig {
    let mut c = TrainConfig::for_game(GameId::Kuhn);
    c.epochs = 2;
    c.checkpoint_every = 1;
    c.envs_per_opponent = 1;
    c.episode_length = 10;
    c.train_steps = 1;
    c.minibatches = 2;
    c.batch_size = 16;
    c.league_match_hands = 20;
    c.eval_hands = 20;
    c
}

#[test]
fn training_is_reproducible_and_never_sees_ood() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config();
    let a = train(&config, &dir.path().join("a")).unwrap();
    let b = train(&config, &dir.path().join("b")).unwrap();
    let ma = std::fs::read(dir.path().join("a/metrics.csv")).unwrap();
    let mb = std::fs::read(dir.path().join("b/metrics.csv")).unwrap();
    assert_eq!(ma, mb);
    // Two periodic checkpoints plus final.json.
    assert_eq!(a.checkpoints.len(), 3);
    assert!(a.checkpoints[2].ends_with("final.json"));
    assert_eq!(a.params.tensors(), b.params.tensors());
    let ood: Vec<String> = pool(GameId::Kuhn, PoolTag::Ood).iter().map(|t| t.id.clone()).collect();
    assert!(!a.opponents_seen.is_empty());
    assert!(a.opponents_seen.iter().all(|o| !ood.contains(o)));
    for m in &a.metrics {
        assert!((m.first_ratio - 1.0).abs() < 1e-6);
    }
    Params::load(&a.checkpoints[1]).unwrap();
}

#[test]
fn bad_curriculum_is_a_config_error() {
    let mut config = tiny_config();
    config.curriculum = vec!["ood_p".into()];
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(train(&config, dir.path()), Err(Error::Config(_))));
}
