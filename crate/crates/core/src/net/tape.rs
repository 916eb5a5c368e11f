//! Minimal reverse-mode tape over 2-D `f64` arrays.
//!
//! Every op appends a node holding its forward value plus whatever it needs
//! for the backward pass. Parameters enter as borrowed leaves so building a
//! graph never copies the weights.

use std::borrow::Cow;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Row ranges `(start, len)` of independent sequences packed into one matrix.
pub type Segments = Vec<(usize, usize)>;

const LN_EPS: f64 = 1e-5;

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Relu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Array2<f64>,
        inv_std: Array1<f64>,
    },
    Gather {
        table: Var,
        index: Vec<Option<usize>>,
    },
    Concat(Vec<Var>),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        segments: Segments,
        heads: usize,
        /// Softmax weights per segment and head.
        probs: Vec<Array2<f64>>,
    },
    SegmentMean {
        x: Var,
        segments: Segments,
    },
    Dropout {
        x: Var,
        scale: Array2<f64>,
    },
    LogSoftmax {
        x: Var,
        legal: Vec<Vec<bool>>,
        probs: Array2<f64>,
    },
    Pick {
        x: Var,
        cols: Vec<usize>,
    },
    /// Scalar op with a precomputed gradient with respect to its input.
    Reduce {
        x: Var,
        dx: Array2<f64>,
    },
    Combine(Vec<(Var, f64)>),
}

struct Node<'a> {
    value: Cow<'a, Array2<f64>>,
    op: Op,
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Array2<f64>>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Leaf that borrows an existing array (parameters).
    pub fn borrowed(&mut self, a: &'a Array2<f64>) -> Var {
        self.push(Cow::Borrowed(a), Op::Leaf)
    }

    pub fn constant(&mut self, a: Array2<f64>) -> Var {
        self.push(Cow::Owned(a), Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(Cow::Owned(v), Op::MatMul(a, b))
    }

    /// Adds a `1 x d` row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let v = self.value(x) + self.value(b);
        self.push(Cow::Owned(v), Op::AddBias(x, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(Cow::Owned(v), Op::Add(a, b))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let h = self.matmul(x, w);
        self.add_bias(h, b)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|z| z.max(0.0));
        self.push(Cow::Owned(v), Op::Relu(x))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut xhat = xv.to_owned();
        let mut inv_std = Array1::zeros(xv.nrows());
        for (mut row, s) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.sum() / d;
            row.mapv_inplace(|z| z - mean);
            let var = row.mapv(|z| z * z).sum() / d;
            *s = 1.0 / (var + LN_EPS).sqrt();
            let k = *s;
            row.mapv_inplace(|z| z * k);
        }
        let v = &xhat * self.value(gamma) + self.value(beta);
        self.push(
            Cow::Owned(v),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Row lookup; `None` yields a zero row.
    pub fn gather(&mut self, table: Var, index: Vec<Option<usize>>) -> Var {
        let t = self.value(table);
        let mut v = Array2::zeros((index.len(), t.ncols()));
        for (mut row, i) in v.rows_mut().into_iter().zip(&index) {
            if let Some(i) = *i {
                row.assign(&t.row(i));
            }
        }
        self.push(Cow::Owned(v), Op::Gather { table, index })
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat rows agree");
        self.push(Cow::Owned(v), Op::Concat(parts.to_vec()))
    }

    /// Multi-head scaled dot-product self-attention within each segment.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, segments: Segments, heads: usize) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let d = qv.ncols();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = Array2::zeros(qv.raw_dim());
        let mut probs = Vec::with_capacity(segments.len() * heads);
        for &(start, len) in &segments {
            for h in 0..heads {
                let cols = s![start..start + len, h * dh..(h + 1) * dh];
                let mut sc = qv.slice(cols).dot(&kv.slice(cols).t()) * scale;
                for mut row in sc.rows_mut() {
                    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|z| (z - m).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|z| z / sum);
                }
                out.slice_mut(cols).assign(&sc.dot(&vv.slice(cols)));
                probs.push(sc);
            }
        }
        self.push(
            Cow::Owned(out),
            Op::Attention {
                q,
                k,
                v,
                segments,
                heads,
                probs,
            },
        )
    }

    /// One row per segment holding the mean of its rows; empty segments give zeros.
    pub fn segment_mean(&mut self, x: Var, segments: Segments) -> Var {
        let xv = self.value(x);
        let mut out = Array2::zeros((segments.len(), xv.ncols()));
        for (mut row, &(start, len)) in out.rows_mut().into_iter().zip(&segments) {
            if len > 0 {
                let m = xv.slice(s![start..start + len, ..]).sum_axis(Axis(0)) / len as f64;
                row.assign(&m);
            }
        }
        self.push(Cow::Owned(out), Op::SegmentMean { x, segments })
    }

    /// Inverted dropout with a caller-drawn keep mask (`true` keeps).
    pub fn dropout(&mut self, x: Var, keep: &Array2<bool>, p: f64) -> Var {
        let k = 1.0 / (1.0 - p);
        let scale = keep.mapv(|b| if b { k } else { 0.0 });
        let v = self.value(x) * &scale;
        self.push(Cow::Owned(v), Op::Dropout { x, scale })
    }

    /// Row-wise log-softmax over legal columns. Illegal entries hold 0 and
    /// carry zero probability.
    pub fn log_softmax(&mut self, x: Var, legal: Vec<Vec<bool>>) -> Var {
        let xv = self.value(x);
        let mut out = Array2::zeros(xv.raw_dim());
        let mut probs = Array2::zeros(xv.raw_dim());
        for (i, mask) in legal.iter().enumerate() {
            let row = xv.row(i);
            let m = row
                .iter()
                .zip(mask)
                .filter(|(_, &l)| l)
                .fold(f64::NEG_INFINITY, |a, (&z, _)| a.max(z));
            let lse = m + row
                .iter()
                .zip(mask)
                .filter(|(_, &l)| l)
                .map(|(&z, _)| (z - m).exp())
                .sum::<f64>()
                .ln();
            for (j, &l) in mask.iter().enumerate() {
                if l {
                    out[[i, j]] = row[j] - lse;
                    probs[[i, j]] = out[[i, j]].exp();
                }
            }
        }
        self.push(Cow::Owned(out), Op::LogSoftmax { x, legal, probs })
    }

    pub fn probs_of(&self, log_softmax: Var) -> Option<&Array2<f64>> {
        match &self.nodes[log_softmax.0].op {
            Op::LogSoftmax { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// `n x 1` column holding `x[i, cols[i]]`.
    pub fn pick(&mut self, x: Var, cols: Vec<usize>) -> Var {
        let xv = self.value(x);
        let v = Array2::from_shape_fn((cols.len(), 1), |(i, _)| xv[[i, cols[i]]]);
        self.push(Cow::Owned(v), Op::Pick { x, cols })
    }

    fn reduce(&mut self, x: Var, value: f64, dx: Array2<f64>) -> Var {
        self.push(Cow::Owned(Array2::from_elem((1, 1), value)), Op::Reduce { x, dx })
    }

    /// Clipped surrogate `-mean(min(r A, clip(r) A))` with `r = exp(logp - old)`.
    pub fn ppo_clip(&mut self, logp: Var, old: &[f64], adv: &[f64], eps: f64) -> Var {
        let lv = self.value(logp);
        let n = old.len() as f64;
        let mut total = 0.0;
        let mut dx = Array2::zeros(lv.raw_dim());
        for i in 0..old.len() {
            let r = (lv[[i, 0]] - old[i]).exp();
            let unclipped = r * adv[i];
            let clipped = r.clamp(1.0 - eps, 1.0 + eps) * adv[i];
            if unclipped <= clipped {
                total += unclipped;
                dx[[i, 0]] = -unclipped / n;
            } else {
                total += clipped;
            }
        }
        self.reduce(logp, -total / n, dx)
    }

    /// Mean entropy of the rows of a log-softmax output.
    pub fn entropy(&mut self, logp: Var) -> Var {
        let probs = self.probs_of(logp).expect("entropy takes a log-softmax").clone();
        let lv = self.value(logp);
        let n = lv.nrows() as f64;
        let mut total = 0.0;
        let mut dx = Array2::zeros(lv.raw_dim());
        for ((d, &l), &p) in dx.iter_mut().zip(lv.iter()).zip(probs.iter()) {
            if p > 0.0 {
                total -= p * l;
                *d = -p * (l + 1.0) / n;
            }
        }
        self.reduce(logp, total / n, dx)
    }

    /// Mean squared error of an `n x 1` column against targets.
    pub fn mse(&mut self, x: Var, target: &[f64]) -> Var {
        let xv = self.value(x);
        let n = target.len() as f64;
        let mut total = 0.0;
        let mut dx = Array2::zeros(xv.raw_dim());
        for (i, &t) in target.iter().enumerate() {
            let e = xv[[i, 0]] - t;
            total += e * e;
            dx[[i, 0]] = 2.0 * e / n;
        }
        self.reduce(x, total / n, dx)
    }

    /// Weighted sum of `1 x 1` scalars.
    pub fn combine(&mut self, terms: &[(Var, f64)]) -> Var {
        let v: f64 = terms.iter().map(|&(t, c)| c * self.value(t)[[0, 0]]).sum();
        self.push(Cow::Owned(Array2::from_elem((1, 1), v)), Op::Combine(terms.to_vec()))
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    /// Gradients of the `1 x 1` node `loss` with respect to every node; `None`
    /// where the loss does not depend on the node.
    pub fn backward(&self, loss: Var) -> Vec<Option<Array2<f64>>> {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddBias(x, b) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Relu(x) => {
                    let mut gx = g;
                    gx.zip_mut_with(self.value(*x), |d, &z| {
                        if z <= 0.0 {
                            *d = 0.0;
                        }
                    });
                    accumulate(&mut grads, *x, gx);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gbeta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let ggamma = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dxhat = &g * self.value(*gamma);
                    let d = xhat.ncols() as f64;
                    let mut gx = Array2::zeros(xhat.raw_dim());
                    for r in 0..xhat.nrows() {
                        let dh = dxhat.row(r);
                        let xh = xhat.row(r);
                        let sum_d = dh.sum();
                        let sum_dx = (&dh * &xh).sum();
                        let k = inv_std[r] / d;
                        for c in 0..xhat.ncols() {
                            gx[[r, c]] = k * (d * dh[c] - sum_d - xh[c] * sum_dx);
                        }
                    }
                    accumulate(&mut grads, *beta, gbeta);
                    accumulate(&mut grads, *gamma, ggamma);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Gather { table, index } => {
                    let mut gt = Array2::zeros(self.value(*table).raw_dim());
                    for (row, i) in g.rows().into_iter().zip(index) {
                        if let Some(i) = *i {
                            let mut t = gt.row_mut(i);
                            t += &row;
                        }
                    }
                    accumulate(&mut grads, *table, gt);
                }
                Op::Concat(parts) => {
                    let mut col = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        accumulate(&mut grads, p, g.slice(s![.., col..col + w]).to_owned());
                        col += w;
                    }
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    segments,
                    heads,
                    probs,
                } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let dh = qv.ncols() / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut gq = Array2::zeros(qv.raw_dim());
                    let mut gk = Array2::zeros(kv.raw_dim());
                    let mut gv = Array2::zeros(vv.raw_dim());
                    let mut p_iter = probs.iter();
                    for &(start, len) in segments {
                        for h in 0..*heads {
                            let p = p_iter.next().expect("one weight matrix per head");
                            let cols = s![start..start + len, h * dh..(h + 1) * dh];
                            let go = g.slice(cols);
                            gv.slice_mut(cols).assign(&p.t().dot(&go));
                            let dp = go.dot(&vv.slice(cols).t());
                            let mut ds = &dp * p;
                            for (mut row, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                                let dot: f64 = row.sum();
                                row.zip_mut_with(&prow, |d, &pp| *d -= pp * dot);
                            }
                            ds *= scale;
                            gq.slice_mut(cols).assign(&ds.dot(&kv.slice(cols)));
                            gk.slice_mut(cols).assign(&ds.t().dot(&qv.slice(cols)));
                        }
                    }
                    accumulate(&mut grads, *q, gq);
                    accumulate(&mut grads, *k, gk);
                    accumulate(&mut grads, *v, gv);
                }
                Op::SegmentMean { x, segments } => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    for (row, &(start, len)) in g.rows().into_iter().zip(segments) {
                        if len > 0 {
                            let share = &row / len as f64;
                            for r in start..start + len {
                                gx.row_mut(r).assign(&share);
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Dropout { x, scale } => {
                    accumulate(&mut grads, *x, g * scale);
                }
                Op::LogSoftmax { x, legal, probs } => {
                    let mut gx = Array2::zeros(g.raw_dim());
                    for (i, mask) in legal.iter().enumerate() {
                        let total: f64 = mask
                            .iter()
                            .enumerate()
                            .filter(|(_, &l)| l)
                            .map(|(j, _)| g[[i, j]])
                            .sum();
                        for (j, &l) in mask.iter().enumerate() {
                            if l {
                                gx[[i, j]] = g[[i, j]] - probs[[i, j]] * total;
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Pick { x, cols } => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    for (i, &c) in cols.iter().enumerate() {
                        gx[[i, c]] = g[[i, 0]];
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Reduce { x, dx } => {
                    accumulate(&mut grads, *x, dx * g[[0, 0]]);
                }
                Op::Combine(terms) => {
                    for &(t, c) in terms {
                        accumulate(&mut grads, t, Array2::from_elem((1, 1), c * g[[0, 0]]));
                    }
                }
            }
        }
        grads
    }
}

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot => *slot = Some(g),
    }
}
