use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::GameId;
use crate::error::{Error, Result};
use crate::histenc::{token_cap, TokenTag};

/// Architecture widths of the policy/value network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub game: GameId,
    /// Token embedding width, shared by both history encoders and `z`.
    pub d_model: usize,
    pub heads: usize,
    pub ffn: usize,
    pub dropout: f64,
    pub cards_out: usize,
    pub actions_out: usize,
    pub hidden: usize,
    pub hidden_layers: usize,
    /// Most past hands the session encoder can index.
    pub max_hands: usize,
}

impl NetConfig {
    pub fn for_game(game: GameId) -> NetConfig {
        match game {
            GameId::Kuhn => NetConfig {
                game,
                d_model: 8,
                heads: 4,
                ffn: 64,
                dropout: 0.1,
                cards_out: 8,
                actions_out: 8,
                hidden: 128,
                hidden_layers: 2,
                max_hands: 99,
            },
            GameId::Leduc => NetConfig {
                game,
                d_model: 16,
                heads: 2,
                ffn: 1024,
                dropout: 0.1,
                cards_out: 64,
                actions_out: 128,
                hidden: 128,
                hidden_layers: 2,
                max_hands: 99,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_model", self.d_model),
            ("heads", self.heads),
            ("ffn", self.ffn),
            ("cards_out", self.cards_out),
            ("actions_out", self.actions_out),
            ("hidden", self.hidden),
            ("hidden_layers", self.hidden_layers),
            ("max_hands", self.max_hands),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.game.spec().arity
    }

    /// Own rank one-hot, plus community one-hot and a no-community flag in Leduc.
    pub fn card_width(&self) -> usize {
        if self.game.spec().rounds > 1 {
            7
        } else {
            3
        }
    }

    /// Rounds x steps per round x (no action + each action).
    pub fn action_width(&self) -> usize {
        let spec = self.game.spec();
        spec.rounds * spec.max_actions_per_round() * (spec.arity + 1)
    }

    pub fn token_cap(&self) -> usize {
        token_cap(self.game)
    }

    fn trunk_in(&self) -> usize {
        self.cards_out + self.actions_out + self.d_model
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    /// N(0, 1/sqrt(fan_in)) with fan_in = rows.
    Weight,
    /// Policy-head weights, scaled down so the initial policy is near uniform.
    SmallWeight,
    Embedding,
    Zeros,
    Ones,
}

fn layout(c: &NetConfig) -> Vec<(String, usize, usize, Init)> {
    let d = c.d_model;
    let mut l: Vec<(String, usize, usize, Init)> = Vec::new();
    for tag in TokenTag::ALL {
        l.push((format!("emb.{}", tag.name().to_lowercase()), tag.vocabulary(c.game), d, Init::Embedding));
    }
    l.push(("emb.position".into(), c.token_cap(), d, Init::Embedding));
    l.push(("session.position".into(), c.max_hands, d, Init::Embedding));
    for block in ["hand", "session"] {
        let p = |n: &str| format!("{block}.{n}");
        l.push((p("ln1.g"), 1, d, Init::Ones));
        l.push((p("ln1.b"), 1, d, Init::Zeros));
        for w in ["wq", "wk", "wv", "wo"] {
            l.push((p(w), d, d, Init::Weight));
        }
        l.push((p("bo"), 1, d, Init::Zeros));
        l.push((p("ln2.g"), 1, d, Init::Ones));
        l.push((p("ln2.b"), 1, d, Init::Zeros));
        l.push((p("ff1.w"), d, c.ffn, Init::Weight));
        l.push((p("ff1.b"), 1, c.ffn, Init::Zeros));
        l.push((p("ff2.w"), c.ffn, d, Init::Weight));
        l.push((p("ff2.b"), 1, d, Init::Zeros));
    }
    l.push(("card.w".into(), c.card_width(), c.cards_out, Init::Weight));
    l.push(("card.b".into(), 1, c.cards_out, Init::Zeros));
    l.push(("action.w".into(), c.action_width(), c.actions_out, Init::Weight));
    l.push(("action.b".into(), 1, c.actions_out, Init::Zeros));
    l.push(("trunk.ln.g".into(), 1, c.trunk_in(), Init::Ones));
    l.push(("trunk.ln.b".into(), 1, c.trunk_in(), Init::Zeros));
    let mut width = c.trunk_in();
    for i in 0..c.hidden_layers {
        l.push((format!("trunk.w{i}"), width, c.hidden, Init::Weight));
        l.push((format!("trunk.b{i}"), 1, c.hidden, Init::Zeros));
        width = c.hidden;
    }
    l.push(("policy.w".into(), width, c.arity(), Init::SmallWeight));
    l.push(("policy.b".into(), 1, c.arity(), Init::Zeros));
    l.push(("value.w".into(), width, 1, Init::Weight));
    l.push(("value.b".into(), 1, 1, Init::Zeros));
    l
}

/// All learnable tensors, in a fixed layout determined by the config.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    config: NetConfig,
    names: Vec<String>,
    tensors: Vec<Array2<f64>>,
}

impl Params {
    pub fn init(config: &NetConfig, seed: u64) -> Result<Params> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, rows, cols, init) in layout(config) {
            let sample = |std: f64, rng: &mut ChaCha8Rng| {
                let n = Normal::new(0.0, std).expect("positive std");
                Array2::from_shape_simple_fn((rows, cols), || n.sample(rng))
            };
            let t = match init {
                Init::Weight => sample(1.0 / (rows as f64).sqrt(), &mut rng),
                Init::SmallWeight => sample(0.01 / (rows as f64).sqrt(), &mut rng),
                Init::Embedding => sample(0.1, &mut rng),
                Init::Zeros => Array2::zeros((rows, cols)),
                Init::Ones => Array2::ones((rows, cols)),
            };
            names.push(name);
            tensors.push(t);
        }
        Ok(Params {
            config: config.clone(),
            names,
            tensors,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Array2<f64>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.tensors
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        &self.tensors[self.index_of(name).unwrap_or_else(|| panic!("no parameter `{name}`"))]
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Array2::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            tensors: self
                .names
                .iter()
                .zip(&self.tensors)
                .map(|(name, t)| TensorRecord {
                    name: name.clone(),
                    shape: [t.nrows(), t.ncols()],
                    data: t.iter().copied().collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Parses a checkpoint, rejecting any tensor whose name or shape differs
    /// from the layout implied by the stored config.
    pub fn from_json(text: &str) -> Result<Params> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint {} v{}",
                file.format, file.version
            )));
        }
        file.config.validate()?;
        let expected = layout(&file.config);
        if expected.len() != file.tensors.len() {
            return Err(Error::Shape(format!(
                "checkpoint has {} tensors, layout needs {}",
                file.tensors.len(),
                expected.len()
            )));
        }
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for ((name, rows, cols, _), rec) in expected.into_iter().zip(file.tensors) {
            if rec.name != name || rec.shape != [rows, cols] || rec.data.len() != rows * cols {
                return Err(Error::Shape(format!(
                    "tensor `{}` {:?} does not match `{name}` [{rows}, {cols}]",
                    rec.name, rec.shape
                )));
            }
            tensors.push(Array2::from_shape_vec((rows, cols), rec.data).map_err(|e| Error::Shape(e.to_string()))?);
            names.push(name);
        }
        Ok(Params {
            config: file.config,
            names,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Params> {
        Params::from_json(&fs::read_to_string(path)?)
    }
}

const CHECKPOINT_FORMAT: &str = "pokerlab-params";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: NetConfig,
    tensors: Vec<TensorRecord>,
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}
