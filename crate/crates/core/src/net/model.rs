use ndarray::{Array1, Array2};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{NetConfig, Params};
use super::tape::{Segments, Tape, Var};
use crate::engine::{Betting, GameId, Rank};
use crate::error::{Error, Result};
use crate::histenc::{TokenSequence, TokenTag};
use crate::policy::Decision;

/// Current-hand inputs of one decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub cards: Vec<f64>,
    pub actions: Vec<f64>,
    /// Legal-action flags in head order.
    pub legal: Vec<bool>,
}

impl Observation {
    pub fn from_decision(d: &Decision<'_>) -> Observation {
        Observation {
            cards: card_input(d.game, d.own, d.community),
            actions: action_input(d.betting),
            legal: d.legal_mask(),
        }
    }
}

pub fn card_input(game: GameId, own: Rank, community: Option<Rank>) -> Vec<f64> {
    let mut v = vec![0.0; NetConfig::for_game(game).card_width()];
    v[own.index()] = 1.0;
    if game.spec().rounds > 1 {
        match community {
            Some(c) => v[3 + c.index()] = 1.0,
            None => v[6] = 1.0,
        }
    }
    v
}

/// Per round and step, a one-hot over (no action, each head action).
pub fn action_input(betting: &Betting) -> Vec<f64> {
    let spec = betting.spec();
    let slots = spec.max_actions_per_round();
    let width = spec.arity + 1;
    let mut v = vec![0.0; spec.rounds * slots * width];
    for r in 0..spec.rounds {
        let acts = betting.rounds().get(r).map_or(&[][..], Vec::as_slice);
        for s in 0..slots {
            let code = acts
                .get(s)
                .map_or(0, |&a| 1 + spec.action_index(a).expect("action belongs to the game"));
            v[(r * slots + s) * width + code] = 1.0;
        }
    }
    v
}

/// A batch of decisions together with the past hands their contexts read.
#[derive(Clone, Debug)]
pub struct NetInput<'a> {
    pub observations: Vec<&'a Observation>,
    /// Distinct past hands referenced by the batch.
    pub hands: Vec<&'a TokenSequence>,
    /// Per decision, indices into `hands` in session order.
    pub prefixes: Vec<Vec<usize>>,
}

/// Tape handles of one forward pass.
pub struct Forward {
    pub logp: Var,
    pub value: Var,
    pub z: Var,
    /// Parameter leaves, aligned with `Params::tensors`.
    pub params: Vec<Var>,
}

struct Ctx<'r> {
    train: bool,
    p: f64,
    rng: Option<&'r mut dyn RngCore>,
}

impl Ctx<'_> {
    fn eval() -> Self {
        Ctx {
            train: false,
            p: 0.0,
            rng: None,
        }
    }

    fn drop(&mut self, t: &mut Tape<'_>, x: Var) -> Var {
        let p = self.p;
        let Some(rng) = self.rng.as_mut().filter(|_| self.train && p > 0.0) else {
            return x;
        };
        let shape = t.value(x).raw_dim();
        let keep = Array2::from_shape_simple_fn(shape, || rng.random::<f64>() >= p);
        t.dropout(x, &keep, p)
    }
}

struct Net<'p> {
    params: &'p Params,
    vars: Vec<Var>,
}

impl<'p> Net<'p> {
    fn new(t: &mut Tape<'p>, params: &'p Params) -> Net<'p> {
        let vars = params.tensors().iter().map(|a| t.borrowed(a)).collect();
        Net { params, vars }
    }

    fn v(&self, name: &str) -> Var {
        self.vars[self
            .params
            .index_of(name)
            .unwrap_or_else(|| panic!("no parameter `{name}`"))]
    }

    fn config(&self) -> &NetConfig {
        self.params.config()
    }

    /// Pre-norm transformer layer over independent segments.
    fn block(&self, t: &mut Tape<'p>, prefix: &str, x: Var, segments: Segments, ctx: &mut Ctx<'_>) -> Var {
        let n = |s: &str| format!("{prefix}.{s}");
        let a = t.layer_norm(x, self.v(&n("ln1.g")), self.v(&n("ln1.b")));
        let q = t.matmul(a, self.v(&n("wq")));
        let k = t.matmul(a, self.v(&n("wk")));
        let v = t.matmul(a, self.v(&n("wv")));
        let att = t.attention(q, k, v, segments, self.config().heads);
        let o = t.linear(att, self.v(&n("wo")), self.v(&n("bo")));
        let o = ctx.drop(t, o);
        let x = t.add(x, o);
        let b = t.layer_norm(x, self.v(&n("ln2.g")), self.v(&n("ln2.b")));
        let f = t.linear(b, self.v(&n("ff1.w")), self.v(&n("ff1.b")));
        let f = t.relu(f);
        let f = t.linear(f, self.v(&n("ff2.w")), self.v(&n("ff2.b")));
        let f = ctx.drop(t, f);
        t.add(x, f)
    }

    /// One summary row per hand.
    fn hand_summaries(&self, t: &mut Tape<'p>, hands: &[&TokenSequence], ctx: &mut Ctx<'_>) -> Result<Var> {
        let game = self.config().game;
        let mut per_tag: Vec<Vec<Option<usize>>> = vec![Vec::new(); TokenTag::ALL.len()];
        let mut positions = Vec::new();
        let mut segments = Vec::with_capacity(hands.len());
        for h in hands {
            if h.game != game {
                return Err(Error::GameMismatch {
                    expected: game,
                    found: h.game,
                });
            }
            h.validate()?;
            if h.is_empty() {
                return Err(Error::Vocabulary("hand without tokens".into()));
            }
            segments.push((positions.len(), h.len()));
            for tok in &h.tokens {
                for (i, col) in per_tag.iter_mut().enumerate() {
                    col.push((i == tok.tag.index()).then_some(tok.symbol));
                }
                positions.push(Some(tok.pos));
            }
        }
        let mut x = t.gather(self.v("emb.position"), positions);
        for (tag, idx) in TokenTag::ALL.iter().zip(per_tag) {
            let e = t.gather(self.v(&format!("emb.{}", tag.name().to_lowercase())), idx);
            x = t.add(x, e);
        }
        let y = self.block(t, "hand", x, segments.clone(), ctx);
        Ok(t.segment_mean(y, segments))
    }

    /// Context rows, one per prefix, from summary rows `h`.
    fn contexts(&self, t: &mut Tape<'p>, h: Var, prefixes: &[Vec<usize>], ctx: &mut Ctx<'_>) -> Result<Var> {
        let max = self.config().max_hands;
        let mut rows = Vec::new();
        let mut positions = Vec::new();
        let mut segments = Vec::with_capacity(prefixes.len());
        for p in prefixes {
            if p.len() > max {
                return Err(Error::Shape(format!("{} past hands exceed the limit {max}", p.len())));
            }
            segments.push((rows.len(), p.len()));
            for (i, &j) in p.iter().enumerate() {
                rows.push(Some(j));
                positions.push(Some(i));
            }
        }
        let x = t.gather(h, rows);
        let pos = t.gather(self.v("session.position"), positions);
        let x = t.add(x, pos);
        let y = self.block(t, "session", x, segments.clone(), ctx);
        Ok(t.segment_mean(y, segments))
    }

    fn heads(&self, t: &mut Tape<'p>, obs: &[&Observation], z: Var) -> Result<(Var, Var)> {
        let c = self.config();
        let n = obs.len();
        let mut cards = Array2::zeros((n, c.card_width()));
        let mut actions = Array2::zeros((n, c.action_width()));
        let mut legal = Vec::with_capacity(n);
        for (i, o) in obs.iter().enumerate() {
            if o.cards.len() != c.card_width() || o.actions.len() != c.action_width() || o.legal.len() != c.arity() {
                return Err(Error::Shape("observation width does not match the network".into()));
            }
            if !o.legal.iter().any(|&l| l) {
                return Err(Error::EmptyLegalSet);
            }
            cards.row_mut(i).assign(&Array1::from(o.cards.clone()));
            actions.row_mut(i).assign(&Array1::from(o.actions.clone()));
            legal.push(o.legal.clone());
        }
        let cards = t.constant(cards);
        let actions = t.constant(actions);
        let ce = t.linear(cards, self.v("card.w"), self.v("card.b"));
        let ce = t.relu(ce);
        let ae = t.linear(actions, self.v("action.w"), self.v("action.b"));
        let ae = t.relu(ae);
        let x = t.concat(&[ce, ae, z]);
        let mut x = t.layer_norm(x, self.v("trunk.ln.g"), self.v("trunk.ln.b"));
        for i in 0..c.hidden_layers {
            let h = t.linear(x, self.v(&format!("trunk.w{i}")), self.v(&format!("trunk.b{i}")));
            x = t.relu(h);
        }
        let logits = t.linear(x, self.v("policy.w"), self.v("policy.b"));
        let logp = t.log_softmax(logits, legal);
        let value = t.linear(x, self.v("value.w"), self.v("value.b"));
        Ok((logp, value))
    }
}

/// Builds the full network on `tape`. Masked mode feeds a zero context and
/// never reads the history.
pub fn forward<'p>(
    tape: &mut Tape<'p>,
    params: &'p Params,
    input: &NetInput<'_>,
    mask_history: bool,
    train: bool,
    rng: &mut dyn RngCore,
) -> Result<Forward> {
    let n = input.observations.len();
    if n == 0 || input.prefixes.len() != n {
        return Err(Error::Shape(format!(
            "{} observations with {} prefixes",
            n,
            input.prefixes.len()
        )));
    }
    let net = Net::new(tape, params);
    let d = params.config().d_model;
    let mut ctx = Ctx {
        train,
        p: params.config().dropout,
        rng: Some(rng),
    };
    let any_history = input.prefixes.iter().any(|p| !p.is_empty());
    let z = if mask_history || !any_history {
        tape.constant(Array2::zeros((n, d)))
    } else {
        let h = net.hand_summaries(tape, &input.hands, &mut ctx)?;
        net.contexts(tape, h, &input.prefixes, &mut ctx)?
    };
    let (logp, value) = net.heads(tape, &input.observations, z)?;
    Ok(Forward {
        logp,
        value,
        z,
        params: net.vars,
    })
}

/// Summary vector of one completed hand (evaluation mode).
pub fn hand_summary(params: &Params, hand: &TokenSequence) -> Result<Array1<f64>> {
    let mut tape = Tape::new();
    let net = Net::new(&mut tape, params);
    let mut ctx = Ctx::eval();
    let h = net.hand_summaries(&mut tape, &[hand], &mut ctx)?;
    Ok(tape.value(h).row(0).to_owned())
}

/// Context vector from cached hand summaries (evaluation mode).
pub fn context_from_summaries(params: &Params, summaries: &[Array1<f64>]) -> Result<Array1<f64>> {
    let d = params.config().d_model;
    if summaries.is_empty() {
        return Ok(Array1::zeros(d));
    }
    let mut h = Array2::zeros((summaries.len(), d));
    for (mut row, s) in h.rows_mut().into_iter().zip(summaries) {
        row.assign(s);
    }
    let mut tape = Tape::new();
    let net = Net::new(&mut tape, params);
    let mut ctx = Ctx::eval();
    let hv = tape.constant(h);
    let prefix: Vec<usize> = (0..summaries.len()).collect();
    let z = net.contexts(&mut tape, hv, &[prefix], &mut ctx)?;
    Ok(tape.value(z).row(0).to_owned())
}

/// Context vector of a list of completed hands.
pub fn encode_context<R: Rng + ?Sized>(
    params: &Params,
    hands: &[TokenSequence],
    mask: bool,
    train: bool,
    rng: &mut R,
) -> Result<Array1<f64>> {
    let d = params.config().d_model;
    if mask || hands.is_empty() {
        return Ok(Array1::zeros(d));
    }
    let mut tape = Tape::new();
    let net = Net::new(&mut tape, params);
    let mut local = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let mut ctx = Ctx {
        train,
        p: params.config().dropout,
        rng: Some(&mut local),
    };
    let refs: Vec<&TokenSequence> = hands.iter().collect();
    let h = net.hand_summaries(&mut tape, &refs, &mut ctx)?;
    let prefix: Vec<usize> = (0..hands.len()).collect();
    let z = net.contexts(&mut tape, h, &[prefix], &mut ctx)?;
    Ok(tape.value(z).row(0).to_owned())
}

/// Action distribution and value of one decision given its context vector.
pub fn policy_value(params: &Params, obs: &Observation, z: &Array1<f64>) -> Result<(Vec<f64>, f64)> {
    let mut tape = Tape::new();
    let net = Net::new(&mut tape, params);
    let zv = tape.constant(z.clone().insert_axis(ndarray::Axis(0)));
    let (logp, value) = net.heads(&mut tape, &[obs], zv)?;
    let probs = tape.probs_of(logp).expect("log-softmax node").row(0).to_vec();
    Ok((probs, tape.value(value)[[0, 0]]))
}
