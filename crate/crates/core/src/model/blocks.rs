//! Pre-norm encoder and decoder blocks.

use alloc::format;

use rand::Rng;

use super::layers::{Attention, AttentionCache, FeedForward, FeedForwardCache, LayerNorm, LayerNormCache};
use super::params::{Grads, ParamStore};
use super::tensor::Matrix;

#[derive(Debug, Clone)]
pub(crate) struct EncoderBlock {
    ln1: LayerNorm,
    attn: Attention,
    ln2: LayerNorm,
    ff: FeedForward,
}

pub(crate) struct EncoderCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    ff: FeedForwardCache,
}

impl EncoderBlock {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, width: usize, heads: usize, ff: usize, rng: &mut R) -> Self {
        Self {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), width),
            attn: Attention::new(store, &format!("{name}.attn"), width, heads, rng),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), width),
            ff: FeedForward::new(store, &format!("{name}.ff"), width, ff, rng),
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix, valid: &[bool]) -> (Matrix, EncoderCache) {
        let (a, ln1) = self.ln1.forward(store, x);
        let (att, attn) = self.attn.forward(store, &a, &a, valid, false);
        let mut x1 = x.clone();
        x1.add_assign(&att);
        let (b, ln2) = self.ln2.forward(store, &x1);
        let (f, ff) = self.ff.forward(store, &b);
        x1.add_assign(&f);
        (x1, EncoderCache { ln1, attn, ln2, ff })
    }

    pub fn backward(&self, store: &ParamStore, cache: &EncoderCache, dy: &Matrix, grads: &mut Grads) -> Matrix {
        let db = self.ff.backward(store, &cache.ff, dy, grads);
        let mut dx1 = dy.clone();
        dx1.add_assign(&self.ln2.backward(store, &cache.ln2, &db, grads));
        let (mut da, dkv) = self.attn.backward(store, &cache.attn, &dx1, grads);
        da.add_assign(&dkv);
        let mut dx = dx1;
        dx.add_assign(&self.ln1.backward(store, &cache.ln1, &da, grads));
        dx
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DecoderBlock {
    ln1: LayerNorm,
    self_attn: Attention,
    ln2: LayerNorm,
    cross_attn: Attention,
    ln3: LayerNorm,
    ff: FeedForward,
}

pub(crate) struct DecoderCache {
    ln1: LayerNormCache,
    self_attn: AttentionCache,
    ln2: LayerNormCache,
    cross_attn: AttentionCache,
    ln3: LayerNormCache,
    ff: FeedForwardCache,
}

impl DecoderBlock {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, width: usize, heads: usize, ff: usize, rng: &mut R) -> Self {
        Self {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), width),
            self_attn: Attention::new(store, &format!("{name}.self_attn"), width, heads, rng),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), width),
            cross_attn: Attention::new(store, &format!("{name}.cross_attn"), width, heads, rng),
            ln3: LayerNorm::new(store, &format!("{name}.ln3"), width),
            ff: FeedForward::new(store, &format!("{name}.ff"), width, ff, rng),
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix, memory: &Matrix, memory_valid: &[bool]) -> (Matrix, DecoderCache) {
        let all = alloc::vec![true; x.rows];
        let (a, ln1) = self.ln1.forward(store, x);
        let (sa, self_attn) = self.self_attn.forward(store, &a, &a, &all, true);
        let mut h = x.clone();
        h.add_assign(&sa);
        let (b, ln2) = self.ln2.forward(store, &h);
        let (ca, cross_attn) = self.cross_attn.forward(store, &b, memory, memory_valid, false);
        h.add_assign(&ca);
        let (c, ln3) = self.ln3.forward(store, &h);
        let (f, ff) = self.ff.forward(store, &c);
        h.add_assign(&f);
        (h, DecoderCache { ln1, self_attn, ln2, cross_attn, ln3, ff })
    }

    /// Returns `(d x, d memory)`.
    pub fn backward(&self, store: &ParamStore, cache: &DecoderCache, dy: &Matrix, grads: &mut Grads) -> (Matrix, Matrix) {
        let dc = self.ff.backward(store, &cache.ff, dy, grads);
        let mut dh = dy.clone();
        dh.add_assign(&self.ln3.backward(store, &cache.ln3, &dc, grads));
        let (db, dmem) = self.cross_attn.backward(store, &cache.cross_attn, &dh, grads);
        dh.add_assign(&self.ln2.backward(store, &cache.ln2, &db, grads));
        let (mut da, dkv) = self.self_attn.backward(store, &cache.self_attn, &dh, grads);
        da.add_assign(&dkv);
        dh.add_assign(&self.ln1.backward(store, &cache.ln1, &da, grads));
        (dh, dmem)
    }
}
