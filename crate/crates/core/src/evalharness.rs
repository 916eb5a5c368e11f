//! Match play, per-toy pool reports, NE-vs-toy tables and confidence intervals.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::GameId;
use crate::error::{Error, Result};
use crate::net::Params;
use crate::oracle::{br_ceiling, br_fraction};
use crate::play::{play_hand, random_deal, Player};
use crate::policy::{sample_index, Policy};
use crate::solver::{cfr_solve, exact_session_ev, kuhn_ne_profile, PolicyTable};
use crate::toys::{pool, PoolTag, ToySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CSV_HEADER: &str = "toy_id,pool,mode,hands,mean,seat0_mean,seat1_mean,stderr,ci95,br_ceiling,br_fraction";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Full session history visible to the agent.
    Exploiter,
    /// History zeroed at evaluation.
    Masked,
    /// Enumerated expectation, no sampling.
    Exact,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Exploiter => "exploiter",
            EvalMode::Masked => "masked",
            EvalMode::Exact => "exact",
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exploiter" => Ok(EvalMode::Exploiter),
            "masked" => Ok(EvalMode::Masked),
            "exact" => Ok(EvalMode::Exact),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

/// Outcome of one matchup from the hero's side. Seat 0 means the hero opened
/// the betting; seat 1 means it acted second.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchReport {
    pub opponent: String,
    pub pool: String,
    pub mode: EvalMode,
    pub hands: usize,
    pub mean: f64,
    pub seat0_hands: usize,
    pub seat0_mean: f64,
    pub seat1_hands: usize,
    pub seat1_mean: f64,
    /// Standard error over hands.
    pub stderr: f64,
    /// 95% half-width over hands.
    pub ci95: f64,
    /// Per-seed means when several seeds were pooled.
    pub seed_means: Vec<f64>,
    /// 95% half-width across seed means, with at least two seeds.
    pub seed_ci95: Option<f64>,
    pub br_ceiling: Option<f64>,
    pub br_fraction: Option<f64>,
}

impl MatchReport {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            self.opponent,
            self.pool,
            self.mode.name(),
            self.hands,
            self.mean,
            self.seat0_mean,
            self.seat1_mean,
            self.stderr,
            self.ci95,
            opt(self.br_ceiling),
            opt(self.br_fraction)
        )
    }

    /// Attaches the opponent's BR ceiling and, above the threshold, the
    /// BR fraction of the mean.
    pub fn with_ceiling(mut self, ceiling: Option<f64>) -> MatchReport {
        self.br_ceiling = ceiling;
        self.br_fraction = ceiling.and_then(|c| br_fraction(self.mean, c).ok());
        self
    }
}

/// Mean and 95% half-width `1.96 * s / sqrt(n)` with the sample deviation.
pub fn ci95(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let (mean, se) = mean_stderr(samples);
    Ok((mean, 1.96 * se))
}

fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.iter().all(|&x| x == samples[0]) {
        return (samples[0], 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-hand hero rewards with a flag for hands the hero opened.
fn match_samples(
    hero: &Player<'_>,
    villain: &Player<'_>,
    n_hands: usize,
    session_len: usize,
    seed: u64,
) -> Result<Vec<(f64, bool)>> {
    let game = hero.game();
    if villain.game() != game {
        return Err(Error::GameMismatch {
            expected: game,
            found: villain.game(),
        });
    }
    let spec = game.spec();
    let session_len = session_len.max(1);
    let sessions = n_hands.div_ceil(session_len);
    let parts: Vec<Vec<(f64, bool)>> = (0..sessions)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let first = s * session_len;
            let n = session_len.min(n_hands - first);
            let mut actors = [hero.actor(), villain.actor()];
            for a in actors.iter_mut() {
                a.begin_session();
            }
            let mut out = Vec::with_capacity(n);
            for h in 0..n {
                let dealer = (first + h) % 2;
                let deal = random_deal(spec, &mut rng);
                let hand = play_hand(spec, deal, dealer, h, |seat, d| {
                    let probs = actors[seat].distribution(d)?;
                    Ok(sample_index(&probs, rng.random()))
                })?;
                for (seat, a) in actors.iter_mut().enumerate() {
                    a.end_hand(&hand, seat)?;
                }
                out.push((f64::from(hand.payoffs[0]), dealer == 0));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn report_from(opponent: String, pool: String, mode: EvalMode, samples: &[(f64, bool)]) -> MatchReport {
    let all: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let seat = |first: bool| -> (usize, f64) {
        let v: Vec<f64> = samples.iter().filter(|s| s.1 == first).map(|s| s.0).collect();
        let m = if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        (v.len(), m)
    };
    let (mean, stderr) = mean_stderr(&all);
    let (n0, m0) = seat(true);
    let (n1, m1) = seat(false);
    MatchReport {
        opponent,
        pool,
        mode,
        hands: all.len(),
        mean,
        seat0_hands: n0,
        seat0_mean: m0,
        seat1_hands: n1,
        seat1_mean: m1,
        stderr,
        ci95: 1.96 * stderr,
        seed_means: Vec::new(),
        seed_ci95: None,
        br_ceiling: None,
        br_fraction: None,
    }
}

/// Monte-Carlo match with the hero in seat 0 and the dealer alternating
/// every hand, so the two seat assignments split the hands evenly. Hands are
/// grouped into sessions of `session_len` for history accumulation.
pub fn play_match(
    hero: &Player<'_>,
    villain: &Player<'_>,
    n_hands: usize,
    session_len: usize,
    seed: u64,
) -> Result<MatchReport> {
    if n_hands == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let samples = match_samples(hero, villain, n_hands, session_len, seed)?;
    let mode = match hero {
        Player::Net { mask_history: true, .. } => EvalMode::Masked,
        _ => EvalMode::Exploiter,
    };
    Ok(report_from(villain.name(), String::new(), mode, &samples))
}

/// Per-toy reports of a pool plus the unweighted toy mean.
#[derive(Clone, Debug, Serialize)]
pub struct PoolReport {
    pub game: GameId,
    pub pool: PoolTag,
    pub mode: EvalMode,
    pub reports: Vec<MatchReport>,
    pub aggregate: f64,
    /// Mean BR fraction over toys that have one.
    pub aggregate_br_fraction: Option<f64>,
}

impl PoolReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.reports {
            let _ = writeln!(s, "{}", r.csv_row());
        }
        let _ = writeln!(
            s,
            "aggregate,{},{},{},{:.6},,,,,,{}",
            self.pool.name(),
            self.mode.name(),
            self.reports.iter().map(|r| r.hands).sum::<usize>(),
            self.aggregate,
            self.aggregate_br_fraction.map_or(String::new(), |f| format!("{f:.6}"))
        );
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Ceiling of a stationary toy, `None` for scheduled ones.
pub fn toy_ceiling(toy: &ToySpec) -> Result<Option<f64>> {
    if !toy.is_stationary() {
        return Ok(None);
    }
    br_ceiling(toy.game, toy).map(Some)
}

/// Evaluates a checkpoint against every toy of a pool, pooling hands over
/// `seeds`. Masked mode zeroes the history channel.
pub fn evaluate_pool(
    params: &Params,
    tag: PoolTag,
    mode: EvalMode,
    hands_per_toy: usize,
    seeds: &[u64],
    session_len: usize,
) -> Result<PoolReport> {
    let game = params.config().game;
    let mask_history = match mode {
        EvalMode::Exploiter => false,
        EvalMode::Masked => true,
        EvalMode::Exact => return Err(Error::Config("a network cannot be evaluated exactly".into())),
    };
    if seeds.is_empty() {
        return Err(Error::Config("no evaluation seeds".into()));
    }
    let toys = pool(game, tag);
    if toys.is_empty() {
        return Err(Error::Config(format!("empty {} pool", tag.name())));
    }
    let hero = Player::Net {
        params,
        name: "agent",
        mask_history,
    };
    let mut reports = Vec::with_capacity(toys.len());
    for toy in toys {
        let villain = Player::Policy(toy);
        let mut samples = Vec::new();
        let mut seed_means = Vec::new();
        for &seed in seeds {
            let s = match_samples(&hero, &villain, hands_per_toy, session_len, seed)?;
            seed_means.push(s.iter().map(|x| x.0).sum::<f64>() / s.len().max(1) as f64);
            samples.extend(s);
        }
        let mut r = report_from(toy.id.clone(), tag.name().to_string(), mode, &samples);
        r.seed_ci95 = ci95(&seed_means).ok().map(|c| c.1);
        r.seed_means = seed_means;
        reports.push(r.with_ceiling(toy_ceiling(toy)?));
    }
    let aggregate = reports.iter().map(|r| r.mean).sum::<f64>() / reports.len() as f64;
    let fractions: Vec<f64> = reports.iter().filter_map(|r| r.br_fraction).collect();
    Ok(PoolReport {
        game,
        pool: tag,
        mode,
        reports,
        aggregate,
        aggregate_br_fraction: (!fractions.is_empty()).then(|| fractions.iter().sum::<f64>() / fractions.len() as f64),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeRow {
    pub toy: String,
    pub pool: PoolTag,
    /// NE reward when it opens the betting.
    pub ne_first: f64,
    pub ne_second: f64,
    pub mean: f64,
    /// Exact seat-averaged value, when the cross-check ran.
    pub exact_mean: Option<f64>,
    pub ci95: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeTable {
    pub game: GameId,
    pub method: EvalMode,
    pub rows: Vec<NeRow>,
    pub id_aggregate: f64,
    pub ood_aggregate: f64,
}

impl NeTable {
    pub fn row(&self, toy: &str) -> Option<&NeRow> {
        self.rows.iter().find(|r| r.toy == toy)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("toy_id,pool,ne_first,ne_second,mean,exact_mean,ci95\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), signed);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.toy,
                r.pool.name(),
                signed(r.ne_first),
                signed(r.ne_second),
                signed(r.mean),
                opt(r.exact_mean),
                r.ci95.map_or(String::new(), |x| format!("{x:.6}"))
            );
        }
        let _ = writeln!(s, "aggregate,id,,,{},,", signed(self.id_aggregate));
        let _ = writeln!(s, "aggregate,ood,,,{},,", signed(self.ood_aggregate));
        s
    }
}

/// Six decimals with an explicit sign; values that round to zero print as `+0.000000`.
fn signed(x: f64) -> String {
    let s = format!("{x:+.6}");
    if s == "-0.000000" {
        "+0.000000".into()
    } else {
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeVsToysOptions {
    /// Kuhn equilibrium parameter.
    pub alpha: f64,
    pub cfr_iterations: u64,
    /// Leduc Monte-Carlo hands per matchup, split evenly over seats.
    pub hands: usize,
    pub session_len: usize,
    pub seed: u64,
    /// Also compute the exact Leduc expectation per toy.
    pub exact_cross_check: bool,
}

impl Default for NeVsToysOptions {
    fn default() -> Self {
        NeVsToysOptions {
            alpha: 0.1,
            cfr_iterations: 1_000_000,
            hands: 20_000,
            session_len: 100,
            seed: 0,
            exact_cross_check: false,
        }
    }
}

/// The equilibrium the NE-vs-toys table uses: closed form for Kuhn, CFR for Leduc.
pub fn reference_ne(game: GameId, opts: &NeVsToysOptions) -> Result<PolicyTable> {
    match game {
        GameId::Kuhn => kuhn_ne_profile(opts.alpha),
        GameId::Leduc => Ok(cfr_solve(game, opts.cfr_iterations)?.0),
    }
}

/// NE reward against every toy by seat. Kuhn rows are exact; Leduc rows are
/// Monte-Carlo. Rows are sorted by descending mean within each pool.
pub fn ne_vs_toys_report(game: GameId, ne: &PolicyTable, opts: &NeVsToysOptions) -> Result<NeTable> {
    let mut rows = Vec::new();
    let mut aggregates = [0.0; 2];
    for (slot, tag) in [PoolTag::Id, PoolTag::Ood].into_iter().enumerate() {
        let toys = pool(game, tag);
        let mut part: Vec<NeRow> = toys
            .par_iter()
            .enumerate()
            .map(|(i, toy)| ne_row(game, ne, toy, tag, opts, (slot * 1000 + i) as u64))
            .collect::<Result<_>>()?;
        // Means within 1e-9 count as tied and keep registry order.
        part.sort_by(|a, b| {
            let (x, y) = ((a.mean * 1e9).round() + 0.0, (b.mean * 1e9).round() + 0.0);
            y.total_cmp(&x)
        });
        aggregates[slot] = part.iter().map(|r| r.mean).sum::<f64>() / part.len().max(1) as f64;
        rows.extend(part);
    }
    Ok(NeTable {
        game,
        method: if game == GameId::Kuhn {
            EvalMode::Exact
        } else {
            EvalMode::Exploiter
        },
        rows,
        id_aggregate: aggregates[0],
        ood_aggregate: aggregates[1],
    })
}

fn ne_row(game: GameId, ne: &PolicyTable, toy: &ToySpec, tag: PoolTag, opts: &NeVsToysOptions, stream: u64) -> Result<NeRow> {
    let exact = |dealer: usize| exact_session_ev(game, ne, toy, dealer, opts.session_len);
    if game == GameId::Kuhn {
        let (first, second) = (exact(0)?, exact(1)?);
        return Ok(NeRow {
            toy: toy.id.clone(),
            pool: tag,
            ne_first: first,
            ne_second: second,
            mean: 0.5 * (first + second),
            exact_mean: Some(0.5 * (first + second)),
            ci95: None,
        });
    }
    let seed = opts.seed.wrapping_mul(0x9e37_79b9).wrapping_add(stream);
    let r = play_match(&Player::Policy(ne), &Player::Policy(toy as &dyn Policy), opts.hands, opts.session_len, seed)?;
    let exact_mean = if opts.exact_cross_check {
        Some(0.5 * (exact(0)? + exact(1)?))
    } else {
        None
    };
    Ok(NeRow {
        toy: toy.id.clone(),
        pool: tag,
        ne_first: r.seat0_mean,
        ne_second: r.seat1_mean,
        mean: r.mean,
        exact_mean,
        ci95: Some(r.ci95),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_closed_forms() {
        let (m, h) = ci95(&[0.7; 10]).unwrap();
        assert!((m - 0.7).abs() < 1e-15);
        assert_eq!(h, 0.0);
        let n = 500;
        let v: Vec<f64> = (0..2 * n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (m, h) = ci95(&v).unwrap();
        assert_eq!(m, 0.0);
        // sample deviation uses n - 1
        let s = (2.0 * n as f64 / (2.0 * n as f64 - 1.0)).sqrt();
        assert!((h - 1.96 * s / (2.0 * n as f64).sqrt()).abs() < 1e-12);
        assert!(ci95(&[1.0]).is_err());
    }

    #[test]
    fn folder_mirror_is_zero_sum() {
        let f = crate::toys::toy(GameId::Kuhn, "f").unwrap();
        let r = play_match(&Player::Policy(f), &Player::Policy(f), 1000, 100, 3).unwrap();
        assert!(r.mean.abs() < 4.0 * r.stderr + 1e-12);
        assert_eq!(r.seat0_hands, 500);
        let blended = (r.seat0_mean * r.seat0_hands as f64 + r.seat1_mean * r.seat1_hands as f64) / r.hands as f64;
        assert!((blended - r.mean).abs() < 1e-12);
    }
}
