use pokerlab_core::engine::{enumerate_deals, GameId, InfoSetKey, Rank};
use pokerlab_core::oracle::{best_response, br_ceiling, br_fraction};
use pokerlab_core::policy::Policy;
use pokerlab_core::solver::{
    cfr_solve, exact_ev, exploitability, kuhn_ne_profile, kuhn_ne_strategy, CfrState, PolicyTable,
};
use pokerlab_core::toys::{pool, toy, PoolTag};

const V1: f64 = -1.0 / 18.0;

fn p_bet(table: &PolicyTable, key: &str) -> f64 {
    let k = InfoSetKey::parse(GameId::Kuhn, key).unwrap();
    table.get(&k).unwrap()[1]
}

#[test]
fn kuhn_equilibria_interchange() {
    let alphas = [0.0, 0.05, 0.1, 0.2, 1.0 / 3.0];
    for &a in &alphas {
        for &b in &alphas {
            let first = kuhn_ne_strategy(a, 0).unwrap();
            let second = kuhn_ne_strategy(b, 1).unwrap();
            let mut profile = first.clone();
            profile.merge(&second).unwrap();
            let v = exact_ev(GameId::Kuhn, &profile, &profile, 0).unwrap();
            assert!((v - V1).abs() < 1e-12, "alpha {a}/{b}: {v}");
        }
        let ne = kuhn_ne_profile(a).unwrap();
        assert!(exploitability(GameId::Kuhn, &ne).unwrap().abs() < 1e-9);
    }
}

#[test]
fn kuhn_closed_form_entries() {
    let ne = kuhn_ne_profile(1.0 / 3.0).unwrap();
    assert!((p_bet(&ne, "K:(start)") - 1.0).abs() < 1e-12);
    assert!((p_bet(&ne, "Q:b") - 1.0 / 3.0).abs() < 1e-12);
    let zero = kuhn_ne_profile(0.0).unwrap();
    assert_eq!(p_bet(&zero, "J:(start)"), 0.0);
    assert!(kuhn_ne_profile(0.3334).is_err());
    assert!(kuhn_ne_profile(-0.01).is_err());
}

#[test]
fn kuhn_ne_against_ab_is_one_ninth() {
    let ne = kuhn_ne_profile(0.1).unwrap();
    let ab = toy(GameId::Kuhn, "ab").unwrap();
    let v = exact_ev(GameId::Kuhn, &ne, ab, 0).unwrap();
    assert!((v - 1.0 / 9.0).abs() < 1e-9, "{v}");
}

#[test]
fn folder_mirror_nets_zero() {
    let f = toy(GameId::Kuhn, "f").unwrap();
    let a = exact_ev(GameId::Kuhn, f, f, 0).unwrap();
    let b = exact_ev(GameId::Kuhn, f, f, 1).unwrap();
    assert!((a + b).abs() < 1e-12);
    assert!(a.abs() < 1e-12);
}

#[test]
fn deal_probabilities_sum_to_one() {
    for game in [GameId::Kuhn, GameId::Leduc] {
        let total: f64 = enumerate_deals(game.spec()).iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12, "{game}");
    }
    assert_eq!(enumerate_deals(GameId::Kuhn.spec()).len(), 6);
}

#[test]
fn kuhn_cfr_converges_to_game_value() {
    let (avg, state) = cfr_solve(GameId::Kuhn, 100_000).unwrap();
    assert_eq!(state.iterations(), 100_000);
    let v = exact_ev(GameId::Kuhn, &avg, &avg, 0).unwrap();
    assert!((v - V1).abs() < 1e-3, "{v}");
    assert!(exploitability(GameId::Kuhn, &avg).unwrap() < 1e-3);
}

#[test]
fn one_cfr_iteration_is_uniform() {
    for game in [GameId::Kuhn, GameId::Leduc] {
        let mut cfr = CfrState::new(game);
        cfr.run(1);
        let table = cfr.average_table().unwrap();
        for (key, dist) in table.iter() {
            let support: Vec<f64> = dist.iter().copied().filter(|&p| p > 0.0).collect();
            let u = 1.0 / support.len() as f64;
            assert!(support.iter().all(|p| (p - u).abs() < 1e-12), "{key:?}: {dist:?}");
        }
    }
}

#[test]
fn policy_csv_round_trip() {
    let ne = kuhn_ne_profile(0.2).unwrap();
    let back = PolicyTable::from_csv(GameId::Kuhn, "back", &ne.to_csv()).unwrap();
    assert_eq!(back.len(), ne.len());
    for (key, dist) in ne.iter() {
        assert_eq!(back.get(key).unwrap(), dist.as_slice());
    }
}

#[test]
fn best_response_to_equilibrium_earns_game_value() {
    let ne = kuhn_ne_profile(1.0 / 3.0).unwrap();
    let first = best_response(GameId::Kuhn, &ne, 0).unwrap().value;
    let second = best_response(GameId::Kuhn, &ne, 1).unwrap().value;
    assert!((first - V1).abs() < 1e-9, "{first}");
    assert!((second + V1).abs() < 1e-9, "{second}");
}

#[test]
fn kuhn_ceilings_spot_values() {
    let n = br_ceiling(GameId::Kuhn, toy(GameId::Kuhn, "n").unwrap()).unwrap();
    assert!((n - 0.25).abs() < 5e-4);
    let f = br_ceiling(GameId::Kuhn, toy(GameId::Kuhn, "f").unwrap()).unwrap();
    assert!((f - 1.0).abs() < 1e-12);
    let p2 = br_ceiling(GameId::Kuhn, toy(GameId::Kuhn, "ood_p2").unwrap()).unwrap();
    assert!(p2 > 0.0 && p2 < 0.002, "{p2}");
    assert!(br_ceiling(GameId::Kuhn, toy(GameId::Kuhn, "ood_switch_mf").unwrap()).is_err());
}

#[test]
fn leduc_ceiling_spot_values() {
    let random = br_ceiling(GameId::Leduc, toy(GameId::Leduc, "random").unwrap()).unwrap();
    let rock = br_ceiling(GameId::Leduc, toy(GameId::Leduc, "rock").unwrap()).unwrap();
    assert!((random - 2.375).abs() < 1e-2, "{random}");
    assert!((rock - 0.520).abs() < 1e-2, "{rock}");
}

#[test]
fn br_fraction_edges() {
    assert_eq!(br_fraction(1.0, 1.0).unwrap(), 1.0);
    assert_eq!(br_fraction(0.0, 2.375).unwrap(), 0.0);
    assert!(br_fraction(0.1, 0.0006).is_err());
}

/// Nothing stationary earns more against a toy than its best response.
#[test]
fn best_response_dominates() {
    let mut heroes: Vec<Box<dyn Policy>> = vec![Box::new(kuhn_ne_profile(0.1).unwrap())];
    for tag in [PoolTag::Id, PoolTag::Ood] {
        for t in pool(GameId::Kuhn, tag) {
            if t.is_stationary() {
                heroes.push(Box::new(t.clone()));
            }
        }
    }
    for tag in [PoolTag::Id, PoolTag::Ood] {
        for villain in pool(GameId::Kuhn, tag).into_iter().filter(|t| t.is_stationary()) {
            let ceiling = br_ceiling(GameId::Kuhn, villain).unwrap();
            for hero in &heroes {
                let a = exact_ev(GameId::Kuhn, hero.as_ref(), villain, 0).unwrap();
                let b = -exact_ev(GameId::Kuhn, villain, hero.as_ref(), 0).unwrap();
                assert!(0.5 * (a + b) <= ceiling + 1e-9, "{} vs {}", hero.name(), villain.id);
            }
        }
    }
}

#[test]
fn info_set_keys_parse_both_games() {
    let k = InfoSetKey::parse(GameId::Kuhn, "Q:b").unwrap();
    assert_eq!(k.own, Rank::Q);
    assert!(InfoSetKey::parse(GameId::Leduc, "K:(start)").is_ok());
}
