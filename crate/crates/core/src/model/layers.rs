//! Trainable layers with explicit forward caches and backward passes.
//!
//! Every `backward` accumulates parameter gradients into [`Grads`] and
//! returns the gradient with respect to its input.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{dot, Matrix};
use crate::math;

#[derive(Debug, Clone)]
pub(crate) struct Linear {
    w: ParamId,
    b: Option<ParamId>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, output: usize, bias: bool, rng: &mut R) -> Self {
        let w = store.normal(format!("{name}.w"), input, output, 1.0 / math::sqrt(input as f64), rng);
        let b = bias.then(|| store.constant(format!("{name}.b"), output, 0.0));
        Self { w, b }
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix) -> Matrix {
        let mut y = x.matmul(store.get(self.w));
        if let Some(b) = self.b {
            y.add_row_vector(&store.get(b).data);
        }
        y
    }

    pub fn backward(&self, store: &ParamStore, x: &Matrix, dy: &Matrix, grads: &mut Grads) -> Matrix {
        x.t_matmul_into(dy, grads.get_mut(self.w));
        if let Some(b) = self.b {
            dy.sum_rows_into(&mut grads.get_mut(b).data);
        }
        dy.matmul_t(store.get(self.w))
    }
}

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub(crate) struct LayerNorm {
    gamma: ParamId,
    beta: ParamId,
}

pub(crate) struct LayerNormCache {
    xhat: Matrix,
    inv_std: Vec<f64>,
}

impl LayerNormCache {
    pub fn rows(&self) -> usize {
        self.inv_std.len()
    }
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        Self {
            gamma: store.constant(format!("{name}.gamma"), width, 1.0),
            beta: store.constant(format!("{name}.beta"), width, 0.0),
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix) -> (Matrix, LayerNormCache) {
        let gamma = &store.get(self.gamma).data;
        let beta = &store.get(self.beta).data;
        let n = x.cols as f64;
        let mut xhat = Matrix::zeros(x.rows, x.cols);
        let mut y = Matrix::zeros(x.rows, x.cols);
        let mut inv_std = Vec::with_capacity(x.rows);
        for r in 0..x.rows {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / math::sqrt(var + LN_EPS);
            inv_std.push(is);
            let xh = xhat.row_mut(r);
            for (h, v) in xh.iter_mut().zip(row) {
                *h = (v - mean) * is;
            }
            let out = y.row_mut(r);
            for c in 0..x.cols {
                out[c] = gamma[c] * xhat.get(r, c) + beta[c];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, store: &ParamStore, cache: &LayerNormCache, dy: &Matrix, grads: &mut Grads) -> Matrix {
        let gamma = &store.get(self.gamma).data;
        let cols = dy.cols;
        {
            let dg = grads.get_mut(self.gamma);
            for r in 0..dy.rows {
                for c in 0..cols {
                    dg.data[c] += dy.get(r, c) * cache.xhat.get(r, c);
                }
            }
        }
        dy.sum_rows_into(&mut grads.get_mut(self.beta).data);
        let n = cols as f64;
        let mut dx = Matrix::zeros(dy.rows, cols);
        let mut dxhat = vec![0.0; cols];
        for r in 0..dy.rows {
            let xh = cache.xhat.row(r);
            for c in 0..cols {
                dxhat[c] = dy.get(r, c) * gamma[c];
            }
            let mean_d = dxhat.iter().sum::<f64>() / n;
            let mean_dx = dot(&dxhat, xh) / n;
            let is = cache.inv_std[r];
            let out = dx.row_mut(r);
            for c in 0..cols {
                out[c] = is * (dxhat[c] - mean_d - xh[c] * mean_dx);
            }
        }
        dx
    }
}

/// Multi-head scaled dot-product attention. Query/key/value projections are
/// bias-free; the output projection has a bias.
#[derive(Debug, Clone)]
pub(crate) struct Attention {
    heads: usize,
    wq: Linear,
    wk: Linear,
    wv: Linear,
    wo: Linear,
}

pub(crate) struct AttentionCache {
    xq: Matrix,
    xkv: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// One `[queries × keys]` probability matrix per head.
    probs: Vec<Matrix>,
    ctx: Matrix,
}

impl Attention {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, width: usize, heads: usize, rng: &mut R) -> Self {
        Self {
            heads,
            wq: Linear::new(store, &format!("{name}.wq"), width, width, false, rng),
            wk: Linear::new(store, &format!("{name}.wk"), width, width, false, rng),
            wv: Linear::new(store, &format!("{name}.wv"), width, width, false, rng),
            wo: Linear::new(store, &format!("{name}.wo"), width, width, true, rng),
        }
    }

    /// `key_valid[j]` admits key `j`; `causal` further restricts query `i` to
    /// keys `j ≤ i`.
    pub fn forward(
        &self,
        store: &ParamStore,
        xq: &Matrix,
        xkv: &Matrix,
        key_valid: &[bool],
        causal: bool,
    ) -> (Matrix, AttentionCache) {
        assert_eq!(key_valid.len(), xkv.rows);
        let q = self.wq.forward(store, xq);
        let k = self.wk.forward(store, xkv);
        let v = self.wv.forward(store, xkv);
        let width = q.cols;
        let dh = width / self.heads;
        let scale = 1.0 / math::sqrt(dh as f64);
        let mut ctx = Matrix::zeros(q.rows, width);
        let mut probs = Vec::with_capacity(self.heads);
        let mut scores = vec![0.0; k.rows];
        for h in 0..self.heads {
            let cols = h * dh..(h + 1) * dh;
            let mut p = Matrix::zeros(q.rows, k.rows);
            for i in 0..q.rows {
                let qi = &q.row(i)[cols.clone()];
                let limit = if causal { (i + 1).min(k.rows) } else { k.rows };
                let mut max = f64::NEG_INFINITY;
                for j in 0..limit {
                    if key_valid[j] {
                        scores[j] = dot(qi, &k.row(j)[cols.clone()]) * scale;
                        max = max.max(scores[j]);
                    }
                }
                if max == f64::NEG_INFINITY {
                    continue; // no admissible key: zero context
                }
                let pr = p.row_mut(i);
                let mut sum = 0.0;
                for j in 0..limit {
                    if key_valid[j] {
                        let e = math::exp(scores[j] - max);
                        pr[j] = e;
                        sum += e;
                    }
                }
                for x in &mut pr[..limit] {
                    *x /= sum;
                }
                let ci = &mut ctx.row_mut(i)[cols.clone()];
                for j in 0..limit {
                    let pij = p.get(i, j);
                    if pij != 0.0 {
                        for (c, vv) in ci.iter_mut().zip(&v.row(j)[cols.clone()]) {
                            *c += pij * vv;
                        }
                    }
                }
            }
            probs.push(p);
        }
        let out = self.wo.forward(store, &ctx);
        (out, AttentionCache { xq: xq.clone(), xkv: xkv.clone(), q, k, v, probs, ctx })
    }

    /// Returns `(d xq, d xkv)`. For self-attention the caller sums both.
    pub fn backward(&self, store: &ParamStore, cache: &AttentionCache, dout: &Matrix, grads: &mut Grads) -> (Matrix, Matrix) {
        let dctx = self.wo.backward(store, &cache.ctx, dout, grads);
        let (nq, nk) = (cache.q.rows, cache.k.rows);
        let width = cache.q.cols;
        let dh = width / self.heads;
        let scale = 1.0 / math::sqrt(dh as f64);
        let mut dq = Matrix::zeros(nq, width);
        let mut dk = Matrix::zeros(nk, width);
        let mut dv = Matrix::zeros(nk, width);
        let mut dp = vec![0.0; nk];
        for (h, p) in cache.probs.iter().enumerate() {
            let cols = h * dh..(h + 1) * dh;
            for i in 0..nq {
                let dci = &dctx.row(i)[cols.clone()];
                let pi = p.row(i);
                let mut weighted = 0.0;
                for j in 0..nk {
                    if pi[j] != 0.0 {
                        dp[j] = dot(dci, &cache.v.row(j)[cols.clone()]);
                        weighted += pi[j] * dp[j];
                        for (d, g) in dv.row_mut(j)[cols.clone()].iter_mut().zip(dci) {
                            *d += pi[j] * g;
                        }
                    }
                }
                for j in 0..nk {
                    if pi[j] == 0.0 {
                        continue;
                    }
                    let ds = pi[j] * (dp[j] - weighted) * scale;
                    let kj = &cache.k.row(j)[cols.clone()];
                    for (d, kk) in dq.row_mut(i)[cols.clone()].iter_mut().zip(kj) {
                        *d += ds * kk;
                    }
                    let qi = &cache.q.row(i)[cols.clone()];
                    for (d, qq) in dk.row_mut(j)[cols.clone()].iter_mut().zip(qi) {
                        *d += ds * qq;
                    }
                }
            }
        }
        let dxq = self.wq.backward(store, &cache.xq, &dq, grads);
        let mut dxkv = self.wk.backward(store, &cache.xkv, &dk, grads);
        dxkv.add_assign(&self.wv.backward(store, &cache.xkv, &dv, grads));
        (dxq, dxkv)
    }
}

// tanh approximation of GELU
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + math::tanh(GELU_C * (x + GELU_A * x * x * x)))
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = math::tanh(u);
    let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

#[derive(Debug, Clone)]
pub(crate) struct FeedForward {
    fc1: Linear,
    fc2: Linear,
}

pub(crate) struct FeedForwardCache {
    x: Matrix,
    pre: Matrix,
    act: Matrix,
}

impl FeedForward {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, width: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            fc1: Linear::new(store, &format!("{name}.fc1"), width, hidden, true, rng),
            fc2: Linear::new(store, &format!("{name}.fc2"), hidden, width, true, rng),
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix) -> (Matrix, FeedForwardCache) {
        let pre = self.fc1.forward(store, x);
        let act = Matrix::from_vec(pre.rows, pre.cols, pre.data.iter().map(|&v| gelu(v)).collect());
        let y = self.fc2.forward(store, &act);
        (y, FeedForwardCache { x: x.clone(), pre, act })
    }

    pub fn backward(&self, store: &ParamStore, cache: &FeedForwardCache, dy: &Matrix, grads: &mut Grads) -> Matrix {
        let mut dact = self.fc2.backward(store, &cache.act, dy, grads);
        for (d, &p) in dact.data.iter_mut().zip(&cache.pre.data) {
            *d *= gelu_grad(p);
        }
        self.fc1.backward(store, &cache.x, &dact, grads)
    }
}
