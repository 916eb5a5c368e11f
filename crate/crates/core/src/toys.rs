//! Tabulated toy opponents for both games.
//!
//! Tables live in `data/*.csv` and are embedded at compile time. The loader
//! checks pool sizes, probability ranges, row sums and that every observation
//! is covered by exactly one Leduc row.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::engine::{GameId, Rank};
use crate::error::{Error, Result};
use crate::policy::{Decision, Policy};

const KUHN_TABLE: &str = include_str!("../data/kuhn_toys.csv");
const LEDUC_TABLE: &str = include_str!("../data/leduc_toys.csv");

/// Expected (game, pool, count) sizes of the toy ensembles.
const POOL_SIZES: [(GameId, PoolTag, usize); 4] = [
    (GameId::Kuhn, PoolTag::Id, 7),
    (GameId::Kuhn, PoolTag::Ood, 7),
    (GameId::Leduc, PoolTag::Id, 8),
    (GameId::Leduc, PoolTag::Ood, 12),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolTag {
    Id,
    Ood,
}

impl PoolTag {
    pub fn name(self) -> &'static str {
        match self {
            PoolTag::Id => "id",
            PoolTag::Ood => "ood",
        }
    }
}

impl fmt::Display for PoolTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoolTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "id" => Ok(PoolTag::Id),
            "ood" => Ok(PoolTag::Ood),
            other => Err(Error::Parse(format!("unknown pool `{other}`"))),
        }
    }
}

/// Kuhn history column of a toy table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KuhnColumn {
    Start,
    AfterPass,
    AfterBet,
    AfterPassBet,
}

impl KuhnColumn {
    fn from_history(history: &str) -> Result<KuhnColumn> {
        match history {
            "" => Ok(KuhnColumn::Start),
            "p" => Ok(KuhnColumn::AfterPass),
            "b" => Ok(KuhnColumn::AfterBet),
            "pb" => Ok(KuhnColumn::AfterPassBet),
            other => Err(Error::Parse(format!("kuhn history `{other}` is not a decision node"))),
        }
    }
}

/// What a toy conditions on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToyObservation {
    Kuhn {
        card: Rank,
        column: KuhnColumn,
        hand_index: usize,
    },
    Leduc {
        own: Rank,
        community: Option<Rank>,
        round: usize,
        bet_pending: bool,
        hand_index: usize,
    },
}

impl ToyObservation {
    pub fn from_decision(d: &Decision<'_>) -> Result<ToyObservation> {
        Ok(match d.game {
            GameId::Kuhn => ToyObservation::Kuhn {
                card: d.own,
                column: KuhnColumn::from_history(&d.betting.history())?,
                hand_index: d.hand_index,
            },
            GameId::Leduc => ToyObservation::Leduc {
                own: d.own,
                community: d.community,
                round: d.betting.round(),
                bet_pending: d.betting.bet_pending(),
                hand_index: d.hand_index,
            },
        })
    }

    pub fn game(&self) -> GameId {
        match self {
            ToyObservation::Kuhn { .. } => GameId::Kuhn,
            ToyObservation::Leduc { .. } => GameId::Leduc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RoundSel {
    Pre,
    Post,
    Any,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PairSel {
    Pair,
    NoPair,
    Any,
}

#[derive(Clone, Debug, PartialEq)]
struct LeducRow {
    round: RoundSel,
    own: Vec<Rank>,
    pair: PairSel,
    weights: [f64; 3],
}

impl LeducRow {
    fn matches(&self, own: Rank, community: Option<Rank>) -> bool {
        let post = community.is_some();
        let paired = community == Some(own);
        let round_ok = match self.round {
            RoundSel::Pre => !post,
            RoundSel::Post => post,
            RoundSel::Any => true,
        };
        let pair_ok = match self.pair {
            PairSel::Pair => paired,
            PairSel::NoPair => !paired,
            PairSel::Any => true,
        };
        round_ok && pair_ok && self.own.contains(&own)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum ToyRule {
    /// P(BET) per phase, card and history column.
    Kuhn {
        phases: Vec<[[f64; 4]; 3]>,
        period: Option<usize>,
    },
    LeducTable(Vec<LeducRow>),
    LeducUniform,
    /// Per-decision commitment to pure call, raise or fold.
    LeducChaos([f64; 3]),
}

/// One toy opponent.
#[derive(Clone, Debug, PartialEq)]
pub struct ToySpec {
    pub id: String,
    pub label: String,
    pub game: GameId,
    pub pool: PoolTag,
    rule: ToyRule,
}

impl ToySpec {
    pub fn switch_period(&self) -> Option<usize> {
        match &self.rule {
            ToyRule::Kuhn { period, .. } => *period,
            _ => None,
        }
    }

    /// Raw per-action weights before legality renormalisation (head order).
    fn raw_weights(&self, obs: &ToyObservation) -> Result<Vec<f64>> {
        match (&self.rule, obs) {
            (ToyRule::Kuhn { phases, period }, ToyObservation::Kuhn { card, column, hand_index }) => {
                let phase = period.map_or(0, |p| (hand_index / p) % phases.len());
                let p_bet = phases[phase][card.index()][*column as usize];
                Ok(vec![1.0 - p_bet, p_bet])
            }
            (ToyRule::LeducTable(rows), ToyObservation::Leduc { own, community, .. }) => rows
                .iter()
                .find(|r| r.matches(*own, *community))
                .map(|r| r.weights.to_vec())
                .ok_or_else(|| Error::Parse(format!("toy `{}` has no row for {own}/{community:?}", self.id))),
            (ToyRule::LeducUniform, ToyObservation::Leduc { .. }) => Ok(vec![1.0; 3]),
            (ToyRule::LeducChaos(w), ToyObservation::Leduc { .. }) => Ok(w.to_vec()),
            _ => Err(Error::GameMismatch {
                expected: self.game,
                found: obs.game(),
            }),
        }
    }
}

/// Action distribution of a toy at an observation, restricted to `legal`
/// (flags in head order).
pub fn toy_distribution(toy: &ToySpec, obs: &ToyObservation, legal: &[bool]) -> Result<Vec<f64>> {
    if obs.game() != toy.game {
        return Err(Error::GameMismatch {
            expected: toy.game,
            found: obs.game(),
        });
    }
    let raw = toy.raw_weights(obs)?;
    match toy.rule {
        ToyRule::LeducChaos(modes) => {
            let mut out = vec![0.0; legal.len()];
            for (m, &w) in modes.iter().enumerate() {
                let mut pure = vec![0.0; legal.len()];
                pure[m] = 1.0;
                for (o, p) in out.iter_mut().zip(renormalize_over_legal(&pure, legal)?) {
                    *o += w * p;
                }
            }
            Ok(out)
        }
        _ => renormalize_over_legal(&raw, legal),
    }
}

/// Rescales raw weights over the legal actions. When every legal weight is
/// zero all mass goes to the first legal action in head order, which is
/// check/call in Leduc.
pub fn renormalize_over_legal(raw: &[f64], legal: &[bool]) -> Result<Vec<f64>> {
    let first = legal.iter().position(|&l| l).ok_or(Error::EmptyLegalSet)?;
    let total: f64 = raw.iter().zip(legal).filter(|(_, &l)| l).map(|(w, _)| w).sum();
    let mut out = vec![0.0; legal.len()];
    if total > 0.0 {
        for (i, (&w, &l)) in raw.iter().zip(legal).enumerate() {
            if l {
                out[i] = w / total;
            }
        }
    } else {
        out[first] = 1.0;
    }
    Ok(out)
}

impl Policy for ToySpec {
    fn distribution(&self, decision: &Decision<'_>) -> Result<Vec<f64>> {
        let obs = ToyObservation::from_decision(decision)?;
        toy_distribution(self, &obs, &decision.legal_mask())
    }

    fn game(&self) -> GameId {
        self.game
    }

    fn is_stationary(&self) -> bool {
        self.switch_period().is_none()
    }

    fn name(&self) -> String {
        self.id.clone()
    }
}

/// All toys of both games, in table order.
#[derive(Debug)]
pub struct ToyRegistry {
    toys: Vec<ToySpec>,
}

impl ToyRegistry {
    pub fn parse(kuhn: &str, leduc: &str) -> Result<ToyRegistry> {
        let mut toys = parse_kuhn(kuhn)?;
        toys.extend(parse_leduc(leduc)?);
        let registry = ToyRegistry { toys };
        for (game, pool, n) in POOL_SIZES {
            let found = registry.pool(game, pool).len();
            if found != n {
                return Err(Error::Config(format!("{game} {pool} pool has {found} toys, expected {n}")));
            }
        }
        Ok(registry)
    }

    pub fn pool(&self, game: GameId, pool: PoolTag) -> Vec<&ToySpec> {
        self.toys
            .iter()
            .filter(|t| t.game == game && t.pool == pool)
            .collect()
    }

    pub fn get(&self, game: GameId, id: &str) -> Result<&ToySpec> {
        self.toys
            .iter()
            .find(|t| t.game == game && t.id == id)
            .ok_or_else(|| Error::UnknownToy(id.to_string()))
    }

    pub fn all(&self) -> &[ToySpec] {
        &self.toys
    }
}

/// The embedded toy tables, validated on first use.
pub fn registry() -> &'static ToyRegistry {
    static REGISTRY: OnceLock<ToyRegistry> = OnceLock::new();
    REGISTRY.get_or_init(|| ToyRegistry::parse(KUHN_TABLE, LEDUC_TABLE).expect("embedded toy tables are valid"))
}

/// Ordered toy list of one pool.
pub fn pool(game: GameId, tag: PoolTag) -> Vec<&'static ToySpec> {
    registry().pool(game, tag)
}

pub fn toy(game: GameId, id: &str) -> Result<&'static ToySpec> {
    registry().get(game, id)
}

fn parse_prob(s: &str) -> Result<f64> {
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| Error::Parse(format!("bad probability `{s}`")))?;
            let d: f64 = d.trim().parse().map_err(|_| Error::Parse(format!("bad probability `{s}`")))?;
            n / d
        }
        None => s.trim().parse().map_err(|_| Error::Parse(format!("bad probability `{s}`")))?,
    };
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("probability {v} outside [0, 1]")));
    }
    Ok(v)
}

fn records(text: &str) -> impl Iterator<Item = Vec<&str>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::trim).collect())
}

/// Appends a toy on first sight, otherwise returns the existing entry.
fn entry<'a>(toys: &'a mut Vec<ToySpec>, id: &str, make: impl FnOnce() -> ToySpec) -> &'a mut ToySpec {
    match toys.iter().position(|t| t.id == id) {
        Some(i) => &mut toys[i],
        None => {
            toys.push(make());
            toys.last_mut().expect("just pushed")
        }
    }
}

fn parse_kuhn(text: &str) -> Result<Vec<ToySpec>> {
    let mut toys: Vec<ToySpec> = Vec::new();
    let mut seen: Vec<(String, usize, Rank)> = Vec::new();
    for rec in records(text) {
        let [id, pool, label, schedule, phase, card, start, p, b, pb] = rec[..] else {
            return Err(Error::Parse(format!("kuhn toy record has {} fields", rec.len())));
        };
        let period = match schedule {
            "" => None,
            s => Some(
                s.strip_prefix("switch:")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::Parse(format!("bad schedule `{s}`")))?,
            ),
        };
        let phase: usize = phase.parse().map_err(|_| Error::Parse(format!("bad phase `{phase}`")))?;
        let card: Rank = card.parse()?;
        let row = [parse_prob(start)?, parse_prob(p)?, parse_prob(b)?, parse_prob(pb)?];
        if seen.iter().any(|(i, ph, c)| i == id && *ph == phase && *c == card) {
            return Err(Error::Config(format!("duplicate kuhn row {id}/{phase}/{card}")));
        }
        seen.push((id.to_string(), phase, card));
        let pool: PoolTag = pool.parse()?;
        let toy = entry(&mut toys, id, || ToySpec {
            id: id.to_string(),
            label: label.to_string(),
            game: GameId::Kuhn,
            pool,
            rule: ToyRule::Kuhn {
                phases: Vec::new(),
                period,
            },
        });
        let ToyRule::Kuhn { phases, .. } = &mut toy.rule else {
            unreachable!("kuhn toys carry kuhn rules")
        };
        while phases.len() <= phase {
            phases.push([[f64::NAN; 4]; 3]);
        }
        phases[phase][card.index()] = row;
    }
    for toy in &toys {
        let ToyRule::Kuhn { phases, period } = &toy.rule else { unreachable!() };
        if phases.iter().flatten().flatten().any(|v| v.is_nan()) {
            return Err(Error::Config(format!("kuhn toy `{}` is missing rows", toy.id)));
        }
        if period.is_none() != (phases.len() == 1) {
            return Err(Error::Config(format!("kuhn toy `{}` phase/schedule mismatch", toy.id)));
        }
    }
    Ok(toys)
}

fn parse_leduc(text: &str) -> Result<Vec<ToySpec>> {
    let mut toys: Vec<ToySpec> = Vec::new();
    for rec in records(text) {
        let [id, pool, label, kind, round, own, pair, call, raise, fold] = rec[..] else {
            return Err(Error::Parse(format!("leduc toy record has {} fields", rec.len())));
        };
        let weights = [parse_prob(call)?, parse_prob(raise)?, parse_prob(fold)?];
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("leduc toy `{id}` row sums to {sum}")));
        }
        let round = match round {
            "pre" => RoundSel::Pre,
            "post" => RoundSel::Post,
            "any" => RoundSel::Any,
            o => return Err(Error::Parse(format!("bad round selector `{o}`"))),
        };
        let pair = match pair {
            "pair" => PairSel::Pair,
            "nopair" => PairSel::NoPair,
            "any" => PairSel::Any,
            o => return Err(Error::Parse(format!("bad pair selector `{o}`"))),
        };
        let own = own
            .chars()
            .map(|c| c.to_string().parse())
            .collect::<Result<Vec<Rank>>>()?;
        let pool: PoolTag = pool.parse()?;
        let rule = match kind {
            "table" => ToyRule::LeducTable(Vec::new()),
            "uniform" => ToyRule::LeducUniform,
            "chaos" => ToyRule::LeducChaos(weights),
            o => return Err(Error::Parse(format!("bad toy kind `{o}`"))),
        };
        let toy = entry(&mut toys, id, || ToySpec {
            id: id.to_string(),
            label: label.to_string(),
            game: GameId::Leduc,
            pool,
            rule,
        });
        if let ToyRule::LeducTable(rows) = &mut toy.rule {
            rows.push(LeducRow {
                round,
                own,
                pair,
                weights,
            });
        }
    }
    for toy in &toys {
        let ToyRule::LeducTable(rows) = &toy.rule else { continue };
        for own in Rank::ALL {
            for community in [None, Some(Rank::J), Some(Rank::Q), Some(Rank::K)] {
                let n = rows.iter().filter(|r| r.matches(own, community)).count();
                if n != 1 {
                    return Err(Error::Config(format!(
                        "leduc toy `{}` has {n} rows for {own}/{community:?}",
                        toy.id
                    )));
                }
            }
        }
    }
    Ok(toys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Betting;

    fn kuhn_obs(card: Rank, column: KuhnColumn, hand_index: usize) -> ToyObservation {
        ToyObservation::Kuhn {
            card,
            column,
            hand_index,
        }
    }

    fn leduc_obs(own: Rank, community: Option<Rank>, bet_pending: bool) -> ToyObservation {
        ToyObservation::Leduc {
            own,
            community,
            round: usize::from(community.is_some()),
            bet_pending,
            hand_index: 0,
        }
    }

    #[test]
    fn pool_sizes_and_order() {
        let id = pool(GameId::Kuhn, PoolTag::Id);
        assert_eq!(id.len(), 7);
        assert_eq!(id[0].id, "f");
        assert_eq!(pool(GameId::Kuhn, PoolTag::Ood).len(), 7);
        assert!(pool(GameId::Kuhn, PoolTag::Ood).iter().any(|t| t.id == "ood_p2"));
        assert_eq!(pool(GameId::Leduc, PoolTag::Id).len(), 8);
        assert_eq!(pool(GameId::Leduc, PoolTag::Ood).len(), 12);
        assert_eq!(pool(GameId::Leduc, PoolTag::Id)[0].id, "maniac");
    }

    #[test]
    fn kuhn_folder_and_maniac() {
        let f = toy(GameId::Kuhn, "f").unwrap();
        for card in Rank::ALL {
            let d = toy_distribution(f, &kuhn_obs(card, KuhnColumn::AfterBet, 0), &[true, true]).unwrap();
            assert_eq!(d, vec![1.0, 0.0]);
        }
        let m = toy(GameId::Kuhn, "m").unwrap();
        let d = toy_distribution(m, &kuhn_obs(Rank::Q, KuhnColumn::AfterBet, 0), &[true, true]).unwrap();
        assert_eq!(d, vec![0.0, 1.0]);
    }

    #[test]
    fn leduc_maniac_renormalised() {
        let m = toy(GameId::Leduc, "maniac").unwrap();
        let d = toy_distribution(m, &leduc_obs(Rank::J, None, true), &[true, true, true]).unwrap();
        assert_eq!(d, vec![0.05, 0.95, 0.0]);
        let d = toy_distribution(m, &leduc_obs(Rank::J, None, false), &[true, true, false]).unwrap();
        assert!((d[0] - 0.05).abs() < 1e-15 && (d[1] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn renormalisation() {
        assert_eq!(
            renormalize_over_legal(&[1.0, 0.0, 0.0], &[true, true, true]).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert_eq!(
            renormalize_over_legal(&[0.05, 0.0, 0.95], &[true, true, false]).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert_eq!(
            renormalize_over_legal(&[0.0, 0.0, 1.0], &[true, true, false]).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert!(matches!(
            renormalize_over_legal(&[1.0, 1.0], &[false, false]),
            Err(Error::EmptyLegalSet)
        ));
    }

    #[test]
    fn random_is_uniform_over_legal() {
        let r = toy(GameId::Leduc, "random").unwrap();
        let d = toy_distribution(r, &leduc_obs(Rank::K, Some(Rank::Q), false), &[true, true, false]).unwrap();
        assert_eq!(d, vec![0.5, 0.5, 0.0]);
        let d = toy_distribution(r, &leduc_obs(Rank::K, None, true), &[true, false, true]).unwrap();
        assert_eq!(d, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn chaos_modes_fall_back_to_call() {
        let c = toy(GameId::Leduc, "ood_chaos").unwrap();
        let d = toy_distribution(c, &leduc_obs(Rank::K, None, false), &[true, true, false]).unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-15 && (d[1] - 1.0 / 3.0).abs() < 1e-15);
        let d = toy_distribution(c, &leduc_obs(Rank::K, None, true), &[true, false, true]).unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-15 && (d[2] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn switch_phase_boundary() {
        let s = toy(GameId::Kuhn, "ood_switch_mf").unwrap();
        let m = toy(GameId::Kuhn, "m").unwrap();
        let f = toy(GameId::Kuhn, "f").unwrap();
        let legal = [true, true];
        for card in Rank::ALL {
            let at = |t: &ToySpec, h| toy_distribution(t, &kuhn_obs(card, KuhnColumn::Start, h), &legal).unwrap();
            assert_eq!(at(s, 49), at(m, 0));
            assert_eq!(at(s, 50), at(f, 0));
            assert_eq!(at(s, 100), at(m, 0));
        }
        assert!(!s.is_stationary());
    }

    #[test]
    fn game_mismatch() {
        let f = toy(GameId::Kuhn, "f").unwrap();
        assert!(matches!(
            toy_distribution(f, &leduc_obs(Rank::J, None, false), &[true, true, false]),
            Err(Error::GameMismatch { .. })
        ));
        assert!(matches!(toy(GameId::Kuhn, "nobody"), Err(Error::UnknownToy(_))));
    }

    #[test]
    fn loader_rejects_bad_tables() {
        let bad_sum = LEDUC_TABLE.replace("maniac,id,Maniac,table,any,JQK,any,0.05,0.95,0", "maniac,id,Maniac,table,any,JQK,any,0.05,0.9,0");
        assert!(ToyRegistry::parse(KUHN_TABLE, &bad_sum).is_err());
        let gap = LEDUC_TABLE.replace("rock,id,Rock,table,post,JQ,nopair,0.1,0,0.9\n", "");
        assert!(ToyRegistry::parse(KUHN_TABLE, &gap).is_err());
        let short = KUHN_TABLE.replace("f,id,Folder,,0,K,0,0,0,0\n", "");
        assert!(ToyRegistry::parse(&short, LEDUC_TABLE).is_err());
    }

    #[test]
    fn policy_from_decision() {
        let b = Betting::replay(GameId::Kuhn, "b").unwrap();
        let d = Decision {
            game: GameId::Kuhn,
            position: 1,
            own: Rank::J,
            community: None,
            betting: &b,
            hand_index: 0,
        };
        let cs = toy(GameId::Kuhn, "cs").unwrap();
        assert_eq!(cs.distribution(&d).unwrap(), vec![0.5, 0.5]);
    }
}
