//! Python bindings for the poker lab.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pokerlab_core::engine::{Betting, GameId, InfoSetKey};
use pokerlab_core::evalharness::{self, NeVsToysOptions};
use pokerlab_core::net::{default_loss_spec, grad_check as net_grad_check, NetConfig, Params, SyntheticBatch};
use pokerlab_core::oracle;
use pokerlab_core::policy::{Decision, Policy};
use pokerlab_core::solver::{cfr_solve, exact_ev, exploitability, kuhn_ne_profile, PolicyTable, KUHN_ALPHA_MAX};
use pokerlab_core::toys::{self, PoolTag};
use pokerlab_core::trainer;
use pokerlab_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::AlphaOutOfRange(_)
        | Error::Parse(_)
        | Error::UnknownToy(_)
        | Error::TooFewSamples { .. }
        | Error::NonStationary(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn game(name: &str) -> PyResult<GameId> {
    name.parse().map_err(py_err)
}

fn pool_tag(name: &str) -> PyResult<PoolTag> {
    name.parse().map_err(py_err)
}

fn equilibrium(g: GameId, alpha: Option<f64>, cfr_iters: Option<u64>) -> PyResult<PolicyTable> {
    match (g, cfr_iters) {
        (_, Some(n)) => Ok(cfr_solve(g, n).map_err(py_err)?.0),
        (GameId::Kuhn, None) => kuhn_ne_profile(alpha.unwrap_or(KUHN_ALPHA_MAX)).map_err(py_err),
        (GameId::Leduc, None) => Ok(cfr_solve(g, 1_000_000).map_err(py_err)?.0),
    }
}

/// Equilibrium strategy as `(csv, first_actor_value, exploitability)`.
#[pyfunction]
#[pyo3(signature = (game_name, alpha=None, cfr_iters=None))]
fn solve(game_name: &str, alpha: Option<f64>, cfr_iters: Option<u64>) -> PyResult<(String, f64, f64)> {
    let g = game(game_name)?;
    let table = equilibrium(g, alpha, cfr_iters)?;
    let value = exact_ev(g, &table, &table, 0).map_err(py_err)?;
    let expl = exploitability(g, &table).map_err(py_err)?;
    Ok((table.to_csv(), value, expl))
}

#[pyfunction]
fn toy_ids(game_name: &str, pool: &str) -> PyResult<Vec<String>> {
    Ok(toys::pool(game(game_name)?, pool_tag(pool)?)
        .iter()
        .map(|t| t.id.clone())
        .collect())
}

/// Toy action probabilities at an information set such as `K:(start)` or `JQ:cr/`.
#[pyfunction]
#[pyo3(signature = (game_name, toy_id, infoset, hand_index=0))]
fn toy_distribution(game_name: &str, toy_id: &str, infoset: &str, hand_index: usize) -> PyResult<Vec<f64>> {
    let g = game(game_name)?;
    let toy = toys::toy(g, toy_id).map_err(py_err)?;
    let key = InfoSetKey::parse(g, infoset).map_err(py_err)?;
    let betting = Betting::replay(g, &key.history).map_err(py_err)?;
    let position = betting
        .to_act()
        .ok_or_else(|| PyValueError::new_err(format!("nobody acts at `{infoset}`")))?;
    let decision = Decision {
        game: g,
        position,
        own: key.own,
        community: key.community,
        betting: &betting,
        hand_index,
    };
    toy.distribution(&decision).map_err(py_err)
}

#[pyfunction]
fn br_ceiling(game_name: &str, toy_id: &str) -> PyResult<f64> {
    let g = game(game_name)?;
    let toy = toys::toy(g, toy_id).map_err(py_err)?;
    oracle::br_ceiling(g, toy).map_err(py_err)
}

/// `(toy, pool, ne_first, ne_second, mean)`.
type NeRowTuple = (String, String, f64, f64, f64);

/// One tuple per toy.
#[pyfunction]
#[pyo3(signature = (game_name, seed=0, hands=20_000, alpha=0.1, cfr_iters=1_000_000))]
fn ne_vs_toys(
    game_name: &str,
    seed: u64,
    hands: usize,
    alpha: f64,
    cfr_iters: u64,
) -> PyResult<Vec<NeRowTuple>> {
    let g = game(game_name)?;
    let opts = NeVsToysOptions {
        alpha,
        cfr_iterations: cfr_iters,
        hands,
        seed,
        ..NeVsToysOptions::default()
    };
    let ne = evalharness::reference_ne(g, &opts).map_err(py_err)?;
    let table = evalharness::ne_vs_toys_report(g, &ne, &opts).map_err(py_err)?;
    Ok(table
        .rows
        .into_iter()
        .map(|r| (r.toy, r.pool.name().to_string(), r.ne_first, r.ne_second, r.mean))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (game_name, seed=0, samples=200, epsilon=1e-5))]
fn grad_check(game_name: &str, seed: u64, samples: usize, epsilon: f64) -> PyResult<f64> {
    let g = game(game_name)?;
    let params = Params::init(&NetConfig::for_game(g), seed).map_err(py_err)?;
    let batch = SyntheticBatch::generate(&params, 6, seed).map_err(py_err)?;
    net_grad_check(&params, &batch.minibatch(), &default_loss_spec(g), epsilon, samples, seed).map_err(py_err)
}

#[pyfunction]
fn ci95(samples: Vec<f64>) -> PyResult<(f64, f64)> {
    evalharness::ci95(&samples).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (rating_a, rating_b, margin, k=32.0, margin_cap=1.0))]
fn elo_update(rating_a: f64, rating_b: f64, margin: f64, k: f64, margin_cap: f64) -> (f64, f64) {
    trainer::elo_update(rating_a, rating_b, margin, k, margin_cap)
}

#[pymodule]
fn pokerlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(toy_ids, m)?)?;
    m.add_function(wrap_pyfunction!(toy_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(br_ceiling, m)?)?;
    m.add_function(wrap_pyfunction!(ne_vs_toys, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(ci95, m)?)?;
    m.add_function(wrap_pyfunction!(elo_update, m)?)?;
    Ok(())
}
