use pokerlab_core::engine::GameId;
use pokerlab_core::evalharness::{ci95, evaluate_pool, play_match, EvalMode, CSV_HEADER};
use pokerlab_core::net::{NetConfig, Params};
use pokerlab_core::play::Player;
use pokerlab_core::policy::Policy;
use pokerlab_core::solver::{exact_ev, kuhn_ne_profile};
use pokerlab_core::toys::{pool, toy, PoolTag};

#[test]
fn ci95_of_plus_minus_one() {
    let n = 500;
    let samples: Vec<f64> = (0..2 * n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let (mean, half) = ci95(&samples).unwrap();
    assert!(mean.abs() < 1e-12);
    // Sample std over 2n values of +-1 is sqrt(2n / (2n - 1)).
    let s = (2.0 * n as f64 / (2.0 * n as f64 - 1.0)).sqrt();
    assert!((half - 1.96 * s / (2.0 * n as f64).sqrt()).abs() < 1e-12);
    assert_eq!(ci95(&[3.0; 7]).unwrap(), (3.0, 0.0));
    assert!(ci95(&[1.0]).is_err());
}

#[test]
fn sampled_matches_track_exact_values() {
    let ne = kuhn_ne_profile(0.1).unwrap();
    let hero = Player::Policy(&ne);
    for tag in [PoolTag::Id, PoolTag::Ood] {
        for t in pool(GameId::Kuhn, tag).into_iter().filter(|t| t.is_stationary()) {
            let exact = 0.5
                * (exact_ev(GameId::Kuhn, &ne, t, 0).unwrap() - exact_ev(GameId::Kuhn, t, &ne, 0).unwrap());
            let r = play_match(&hero, &Player::Policy(t), 100_000, 100, 3).unwrap();
            assert!(
                (r.mean - exact).abs() <= 4.0 * r.stderr.max(1e-12),
                "{}: sampled {} exact {} stderr {}",
                t.id,
                r.mean,
                exact,
                r.stderr
            );
            let weighted = (r.seat0_mean * r.seat0_hands as f64 + r.seat1_mean * r.seat1_hands as f64) / r.hands as f64;
            assert!((weighted - r.mean).abs() < 1e-12);
        }
    }
}

#[test]
fn equilibrium_self_play_is_near_zero() {
    let ne = kuhn_ne_profile(1.0 / 3.0).unwrap();
    let r = play_match(&Player::Policy(&ne), &Player::Policy(&ne), 100_000, 100, 1).unwrap();
    assert!(r.mean.abs() <= 4.0 * r.stderr, "{} +/- {}", r.mean, r.stderr);
    assert_eq!(r.seat0_hands + r.seat1_hands, r.hands);
}

#[test]
fn matches_are_reproducible() {
    let params = Params::init(&NetConfig::for_game(GameId::Kuhn), 2).unwrap();
    let cs = toy(GameId::Kuhn, "cs").unwrap();
    let hero = Player::Net {
        params: &params,
        name: "agent",
        mask_history: false,
    };
    let a = play_match(&hero, &Player::Policy(cs), 400, 50, 8).unwrap();
    let b = play_match(&hero, &Player::Policy(cs), 400, 50, 8).unwrap();
    assert_eq!(a.csv_row(), b.csv_row());
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
}

#[test]
fn leduc_ood_pool_report() {
    let params = Params::init(&NetConfig::for_game(GameId::Leduc), 0).unwrap();
    let report = evaluate_pool(&params, PoolTag::Ood, EvalMode::Masked, 100, &[0, 1], 50).unwrap();
    assert_eq!(report.reports.len(), 12);
    let mean: f64 = report.reports.iter().map(|r| r.mean).sum::<f64>() / 12.0;
    assert!((mean - report.aggregate).abs() < 1e-12);
    assert!(report.reports.iter().all(|r| r.seed_means.len() == 2 && r.seed_ci95.is_some()));
    let csv = report.to_csv();
    assert!(csv.starts_with(CSV_HEADER));
    assert_eq!(csv.lines().count(), 14);
    assert!(report.to_json().unwrap().contains("\"aggregate\""));
}

#[test]
fn kuhn_near_nash_toy_has_no_fraction() {
    let params = Params::init(&NetConfig::for_game(GameId::Kuhn), 0).unwrap();
    let report = evaluate_pool(&params, PoolTag::Ood, EvalMode::Exploiter, 200, &[0], 50).unwrap();
    let p2 = report.reports.iter().find(|r| r.opponent == "ood_p2").unwrap();
    assert!(p2.br_fraction.is_none());
    let switch = report.reports.iter().find(|r| r.opponent == "ood_switch_mf").unwrap();
    assert!(switch.br_ceiling.is_none());
    let trap = report.reports.iter().find(|r| r.opponent == "ood_trap").unwrap();
    assert!(trap.br_fraction.is_some());
}

#[test]
fn pool_reports_are_reproducible() {
    let params = Params::init(&NetConfig::for_game(GameId::Kuhn), 4).unwrap();
    let a = evaluate_pool(&params, PoolTag::Id, EvalMode::Masked, 300, &[5], 100).unwrap();
    let b = evaluate_pool(&params, PoolTag::Id, EvalMode::Masked, 300, &[5], 100).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let exploit = evaluate_pool(&params, PoolTag::Id, EvalMode::Exploiter, 300, &[5], 100).unwrap();
    assert_eq!(exploit.reports.len(), a.reports.len());
}
