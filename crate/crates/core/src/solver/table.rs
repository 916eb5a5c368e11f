use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::engine::{Betting, GameId, InfoSetKey};
use crate::error::{Error, Result};
use crate::policy::{Decision, Policy};

/// Behavioural strategy stored as one distribution per information set.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTable {
    game: GameId,
    name: String,
    rows: BTreeMap<InfoSetKey, Vec<f64>>,
}

impl PolicyTable {
    pub fn new(game: GameId, name: impl Into<String>) -> Self {
        PolicyTable {
            game,
            name: name.into(),
            rows: BTreeMap::new(),
        }
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    /// Inserts a head-ordered distribution after checking width, sign and sum.
    pub fn insert(&mut self, key: InfoSetKey, dist: Vec<f64>) -> Result<()> {
        if key.game != self.game {
            return Err(Error::GameMismatch {
                expected: self.game,
                found: key.game,
            });
        }
        let arity = self.game.spec().arity;
        if dist.len() != arity {
            return Err(Error::Shape(format!("row for `{key}` has {} entries, expected {arity}", dist.len())));
        }
        if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NonFinite(format!("row for `{key}`: {dist:?}")));
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("row for `{key}` sums to {sum}")));
        }
        self.rows.insert(key, dist);
        Ok(())
    }

    pub fn get(&self, key: &InfoSetKey) -> Option<&[f64]> {
        self.rows.get(key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InfoSetKey, &Vec<f64>)> {
        self.rows.iter()
    }

    /// Adds every row of `other`, overwriting shared keys.
    pub fn merge(&mut self, other: &PolicyTable) -> Result<()> {
        for (k, v) in &other.rows {
            self.insert(k.clone(), v.clone())?;
        }
        Ok(())
    }

    /// CSV with columns `infoset_key,action,probability`, one row per legal
    /// action, probabilities at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("infoset_key,action,probability\n");
        let actions = self.game.spec().actions();
        for (key, dist) in &self.rows {
            let legal = Betting::replay(self.game, &key.history)
                .and_then(|b| b.legal_actions())
                .unwrap_or_else(|_| actions.to_vec());
            for (a, p) in actions.iter().zip(dist) {
                if legal.contains(a) {
                    out.push_str(&format!("{key},{a},{p:.16e}\n"));
                }
            }
        }
        out
    }

    pub fn from_csv(game: GameId, name: impl Into<String>, text: &str) -> Result<PolicyTable> {
        let spec = game.spec();
        let mut rows: BTreeMap<InfoSetKey, Vec<f64>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let [key, action, prob] = fields[..] else {
                return Err(Error::Parse(format!("line {}: expected 3 fields", i + 1)));
            };
            let key = InfoSetKey::parse(game, key)?;
            let idx = spec
                .action_index(action.parse()?)
                .ok_or_else(|| Error::Parse(format!("line {}: action {action} not in {game}", i + 1)))?;
            let p: f64 = prob
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad probability `{prob}`", i + 1)))?;
            rows.entry(key).or_insert_with(|| vec![0.0; spec.arity])[idx] = p;
        }
        let mut table = PolicyTable::new(game, name);
        for (k, v) in rows {
            table.insert(k, v)?;
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(game: GameId, path: impl AsRef<Path>) -> Result<PolicyTable> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map_or_else(|| "table".to_string(), |s| s.to_string_lossy().into_owned());
        PolicyTable::from_csv(game, name, &fs::read_to_string(path)?)
    }
}

impl Policy for PolicyTable {
    fn distribution(&self, decision: &Decision<'_>) -> Result<Vec<f64>> {
        if decision.game != self.game {
            return Err(Error::GameMismatch {
                expected: self.game,
                found: decision.game,
            });
        }
        let key = decision.key();
        self.rows
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::MissingInfoSet(key.to_string()))
    }

    fn game(&self) -> GameId {
        self.game
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}
