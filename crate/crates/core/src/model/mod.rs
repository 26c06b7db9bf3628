//! A small pre-norm transformer encoder–decoder in `f64` with hand-written
//! backpropagation.
//!
//! The encoder exposes a tap after any block (`encode_to_layer`) and a way to
//! continue from it (`resume_encode`), which is where mixed hidden states
//! re-enter. Source padding is masked out of every attention over encoder
//! states, so padded and trimmed sources produce identical results on the
//! real positions.

mod blocks;
mod layers;
mod optim;
pub mod params;
pub mod tensor;
mod train;

#[cfg(test)]
mod tests;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::math;
use crate::mixgen::MixError;
use crate::rng;
use crate::tokenizer::{TokenSeq, Vocab, BOS, EOS, PAD, RESERVED};

use blocks::{DecoderBlock, DecoderCache, EncoderBlock, EncoderCache};
use layers::{LayerNorm, LayerNormCache, Linear};
pub use optim::{Adam, OptimConfig};
use params::{ParamId, ParamStore};
use tensor::Matrix;
pub use train::{Instance, StepStats};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    BadConfig(&'static str),
    #[error("encoder layer {k} out of range 0..={depth}")]
    LayerOutOfRange { k: usize, depth: usize },
    #[error("expected hidden states of width {width} with {rows} rows, got {got:?}")]
    ShapeMismatch { rows: usize, width: usize, got: (usize, usize) },
    #[error("sequence of length {len} exceeds limit {max}")]
    TooLong { len: usize, max: usize },
    #[error("empty sequence")]
    Empty,
    #[error("token id {id} outside vocabulary of size {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("non-finite loss {loss} at step {step} (gradient norm {grad_norm})")]
    NonFiniteLoss { step: u64, loss: f64, grad_norm: f64 },
    #[error("checkpoint does not match model layout: {0}")]
    CheckpointMismatch(String),
    #[error(transparent)]
    Mix(#[from] MixError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub width: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub attention_heads: usize,
    pub feedforward_width: usize,
    pub max_src_len: usize,
    pub max_tgt_len: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Default architecture for a given vocabulary size.
    pub fn with_vocab(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            width: 64,
            encoder_layers: 2,
            decoder_layers: 2,
            attention_heads: 2,
            feedforward_width: 128,
            max_src_len: 256,
            max_tgt_len: 48,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size < RESERVED {
            return Err(ModelError::BadConfig("vocabulary smaller than the reserved tokens"));
        }
        if self.width == 0 || self.attention_heads == 0 || self.feedforward_width == 0 {
            return Err(ModelError::BadConfig("width, heads and feed-forward width must be positive"));
        }
        if !self.width.is_multiple_of(self.attention_heads) {
            return Err(ModelError::BadConfig("width must be divisible by attention_heads"));
        }
        if self.max_src_len == 0 || self.max_tgt_len == 0 {
            return Err(ModelError::BadConfig("sequence lengths must be at least 1"));
        }
        Ok(())
    }
}

/// A named parameter array as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParam {
    pub name: String,
    pub value: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub step: u64,
    /// Mean validation ROUGE f1 when the snapshot was taken.
    pub val_rouge: Option<f64>,
    pub params: Vec<NamedParam>,
}

fn sinusoidal(rows: usize, width: usize) -> Matrix {
    let mut pe = Matrix::zeros(rows, width);
    for pos in 0..rows {
        for (i, x) in pe.row_mut(pos).iter_mut().enumerate() {
            let freq = math::pow(10_000.0, (2 * (i / 2)) as f64 / width as f64);
            let angle = pos as f64 / freq;
            *x = if i % 2 == 0 { math::sin(angle) } else { math::cos(angle) };
        }
    }
    pe
}

#[derive(Debug, Clone)]
pub struct Seq2Seq {
    config: ModelConfig,
    params: ParamStore,
    embed: ParamId,
    positions: Matrix,
    encoder: Vec<EncoderBlock>,
    memory_norm: LayerNorm,
    decoder: Vec<DecoderBlock>,
    final_norm: LayerNorm,
    out: Linear,
}

pub(crate) struct EncoderTape {
    pub caches: Vec<EncoderCache>,
}

pub(crate) struct DecoderTape {
    pub memory_norm: LayerNormCache,
    pub blocks: Vec<DecoderCache>,
    pub final_norm: LayerNormCache,
    pub normed: Matrix,
}

impl Seq2Seq {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, "model-init", 0);
        Ok(Self::layout(config, &mut rng))
    }

    fn layout<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Self {
        let d = config.width;
        let mut params = ParamStore::default();
        let embed = params.normal("embed".to_string(), config.vocab_size, d, 1.0 / math::sqrt(d as f64), rng);
        let encoder = (0..config.encoder_layers)
            .map(|l| {
                let name = alloc::format!("enc.{l}");
                EncoderBlock::new(&mut params, &name, d, config.attention_heads, config.feedforward_width, rng)
            })
            .collect();
        let memory_norm = LayerNorm::new(&mut params, "memory_norm", d);
        let decoder = (0..config.decoder_layers)
            .map(|l| {
                let name = alloc::format!("dec.{l}");
                DecoderBlock::new(&mut params, &name, d, config.attention_heads, config.feedforward_width, rng)
            })
            .collect();
        let final_norm = LayerNorm::new(&mut params, "final_norm", d);
        let out = Linear::new(&mut params, "out", d, config.vocab_size, true, rng);
        let positions = sinusoidal(config.max_src_len.max(config.max_tgt_len), d);
        Self { config, params, embed, positions, encoder, memory_norm, decoder, final_norm, out }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn to_checkpoint(&self, step: u64, val_rouge: Option<f64>) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            step,
            val_rouge,
            params: self.params.iter().map(|(n, m)| NamedParam { name: n.to_string(), value: m.clone() }).collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, ModelError> {
        let mut model = Self::new(ckpt.config.clone())?;
        if ckpt.params.len() != model.params.len() {
            return Err(ModelError::CheckpointMismatch(alloc::format!(
                "expected {} parameters, found {}",
                model.params.len(),
                ckpt.params.len()
            )));
        }
        let names: Vec<String> = model.params.names().to_vec();
        for ((slot, name), p) in model.params.values_mut().iter_mut().zip(&names).zip(&ckpt.params) {
            if &p.name != name || p.value.shape() != slot.shape() || p.value.data.len() != slot.data.len() {
                return Err(ModelError::CheckpointMismatch(alloc::format!(
                    "parameter {} {:?} does not fit slot {} {:?}",
                    p.name,
                    p.value.shape(),
                    name,
                    slot.shape()
                )));
            }
            *slot = p.value.clone();
        }
        Ok(model)
    }

    fn check_tokens(&self, ids: &[u32]) -> Result<(), ModelError> {
        match ids.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            Some(&id) => Err(ModelError::TokenOutOfRange { id, vocab: self.config.vocab_size }),
            None => Ok(()),
        }
    }

    /// `sqrt(width) · E[token] + PE[position]` for each token.
    pub(crate) fn embed(&self, tokens: &[u32]) -> Matrix {
        let d = self.config.width;
        let scale = math::sqrt(d as f64);
        let table = self.params.get(self.embed);
        let mut x = Matrix::zeros(tokens.len(), d);
        for (i, &t) in tokens.iter().enumerate() {
            let e = table.row(t as usize);
            let pe = self.positions.row(i);
            for ((o, a), b) in x.row_mut(i).iter_mut().zip(e).zip(pe) {
                *o = scale * a + b;
            }
        }
        x
    }

    pub(crate) fn embed_backward(&self, tokens: &[u32], dx: &Matrix, grads: &mut params::Grads) {
        let scale = math::sqrt(self.config.width as f64);
        let g = grads.get_mut(self.embed);
        for (i, &t) in tokens.iter().enumerate() {
            for (o, d) in g.row_mut(t as usize).iter_mut().zip(dx.row(i)) {
                *o += scale * d;
            }
        }
    }

    pub(crate) fn encoder_blocks(&self, x: Matrix, valid: &[bool], range: Range<usize>) -> (Matrix, EncoderTape) {
        let mut h = x;
        let mut caches = Vec::with_capacity(range.len());
        for block in &self.encoder[range] {
            let (y, c) = block.forward(&self.params, &h, valid);
            caches.push(c);
            h = y;
        }
        (h, EncoderTape { caches })
    }

    pub(crate) fn encoder_blocks_backward(
        &self,
        tape: &EncoderTape,
        range: Range<usize>,
        dy: Matrix,
        grads: &mut params::Grads,
    ) -> Matrix {
        let mut d = dy;
        for (block, cache) in self.encoder[range].iter().zip(&tape.caches).rev() {
            d = block.backward(&self.params, cache, &d, grads);
        }
        d
    }

    pub(crate) fn decoder_forward(&self, encoded: &Matrix, valid: &[bool], input: &[u32]) -> (Matrix, DecoderTape) {
        let (memory, memory_norm) = self.memory_norm.forward(&self.params, encoded);
        let mut h = self.embed(input);
        let mut blocks = Vec::with_capacity(self.decoder.len());
        for block in &self.decoder {
            let (y, c) = block.forward(&self.params, &h, &memory, valid);
            blocks.push(c);
            h = y;
        }
        let (normed, final_norm) = self.final_norm.forward(&self.params, &h);
        let logits = self.out.forward(&self.params, &normed);
        (logits, DecoderTape { memory_norm, blocks, final_norm, normed })
    }

    /// Backward through the decoder; accumulates decoder-side gradients and
    /// returns the gradient with respect to the (un-normalized) encoder output.
    pub(crate) fn decoder_backward(&self, tape: &DecoderTape, input: &[u32], dlogits: &Matrix, grads: &mut params::Grads) -> Matrix {
        let dnormed = self.out.backward(&self.params, &tape.normed, dlogits, grads);
        let mut dh = self.final_norm.backward(&self.params, &tape.final_norm, &dnormed, grads);
        let mut dmemory: Option<Matrix> = None;
        for (block, cache) in self.decoder.iter().zip(&tape.blocks).rev() {
            let (dx, dm) = block.backward(&self.params, cache, &dh, grads);
            dh = dx;
            match &mut dmemory {
                Some(acc) => acc.add_assign(&dm),
                None => dmemory = Some(dm),
            }
        }
        self.embed_backward(input, &dh, grads);
        match dmemory {
            Some(dm) => self.memory_norm.backward(&self.params, &tape.memory_norm, &dm, grads),
            // no decoder blocks: the memory is never read
            None => Matrix::zeros(tape.memory_norm_rows(), self.config.width),
        }
    }

    /// Source ids truncated and padded to `max_src_len`.
    pub fn pad_source(&self, src: &[u32]) -> TokenSeq {
        let mut ids: TokenSeq = src.iter().copied().take(self.config.max_src_len).collect();
        ids.resize(self.config.max_src_len, PAD);
        ids
    }

    /// Attention mask over a padded source: `true` for real tokens.
    pub fn source_mask(&self, src: &[u32]) -> Vec<bool> {
        self.pad_source(src).iter().map(|&t| t != PAD).collect()
    }

    fn check_layer(&self, k: usize) -> Result<(), ModelError> {
        if k > self.config.encoder_layers {
            return Err(ModelError::LayerOutOfRange { k, depth: self.config.encoder_layers });
        }
        Ok(())
    }

    /// Hidden states `[max_src_len × width]` after the first `k` encoder
    /// blocks; `k = 0` is embeddings plus positions.
    pub fn encode_to_layer(&self, src: &[u32], k: usize) -> Result<Matrix, ModelError> {
        self.check_layer(k)?;
        self.check_tokens(src)?;
        let ids = self.pad_source(src);
        let valid: Vec<bool> = ids.iter().map(|&t| t != PAD).collect();
        Ok(self.encoder_blocks(self.embed(&ids), &valid, 0..k).0)
    }

    /// Runs encoder blocks `k+1..=encoder_layers` on layer-`k` states.
    pub fn resume_encode(&self, hidden: &Matrix, valid: &[bool], k: usize) -> Result<Matrix, ModelError> {
        self.check_layer(k)?;
        if hidden.cols != self.config.width || hidden.rows != valid.len() || hidden.rows > self.config.max_src_len {
            return Err(ModelError::ShapeMismatch { rows: valid.len(), width: self.config.width, got: hidden.shape() });
        }
        Ok(self.encoder_blocks(hidden.clone(), valid, k..self.config.encoder_layers).0)
    }

    /// Full encoder output and the source mask.
    pub fn encode(&self, src: &[u32]) -> Result<(Matrix, Vec<bool>), ModelError> {
        let h = self.encode_to_layer(src, self.config.encoder_layers)?;
        Ok((h, self.source_mask(src)))
    }

    /// Next-token logits `[teacher.len() × vocab]` under a causal mask.
    /// `teacher` is BOS-prefixed.
    pub fn decode_teacher_forced(&self, encoded: &Matrix, valid: &[bool], teacher: &[u32]) -> Result<Matrix, ModelError> {
        if teacher.is_empty() {
            return Err(ModelError::Empty);
        }
        if teacher.len() > self.config.max_tgt_len {
            return Err(ModelError::TooLong { len: teacher.len(), max: self.config.max_tgt_len });
        }
        if encoded.cols != self.config.width || encoded.rows != valid.len() {
            return Err(ModelError::ShapeMismatch { rows: valid.len(), width: self.config.width, got: encoded.shape() });
        }
        self.check_tokens(teacher)?;
        Ok(self.decoder_forward(encoded, valid, teacher).0)
    }

    /// Greedy decoding from BOS; stops at EOS or after `max_len` tokens
    /// (capped by `max_tgt_len`). PAD and BOS are never emitted.
    pub fn greedy_decode_ids(&self, src: &[u32], max_len: usize) -> Result<TokenSeq, ModelError> {
        self.check_tokens(src)?;
        // Trailing padding is masked everywhere, so the trimmed source is exact.
        let ids: TokenSeq = src.iter().copied().take(self.config.max_src_len).collect();
        let valid: Vec<bool> = ids.iter().map(|&t| t != PAD).collect();
        let (encoded, _) = self.encoder_blocks(self.embed(&ids), &valid, 0..self.config.encoder_layers);
        let limit = max_len.min(self.config.max_tgt_len);
        let mut input = vec![BOS];
        let mut emitted = TokenSeq::new();
        while emitted.len() < limit {
            let (logits, _) = self.decoder_forward(&encoded, &valid, &input);
            let last = logits.row(logits.rows - 1);
            let mut best = (EOS, f64::NEG_INFINITY);
            for (id, &z) in last.iter().enumerate() {
                let id = id as u32;
                if id == PAD || id == BOS {
                    continue;
                }
                if z > best.1 {
                    best = (id, z);
                }
            }
            if best.0 == EOS {
                break;
            }
            emitted.push(best.0);
            input.push(best.0);
        }
        Ok(emitted)
    }

    /// Greedy summary of a document, detokenized by whitespace join.
    pub fn greedy_decode(&self, document: &Document, vocab: &Vocab, max_len: usize) -> String {
        let src = source_ids(document, vocab);
        match self.greedy_decode_ids(&src, max_len) {
            Ok(ids) => vocab.decode(&ids),
            // `source_ids` only yields in-vocabulary ids
            Err(_) => String::new(),
        }
    }
}

impl DecoderTape {
    fn memory_norm_rows(&self) -> usize {
        self.memory_norm.rows()
    }
}

/// Model input for a document: its units joined by spaces, without BOS/EOS.
pub fn source_ids(document: &Document, vocab: &Vocab) -> TokenSeq {
    vocab.encode(&document.joined(" "), false)
}

/// Target ids for a summary: truncated so that the trailing EOS fits in
/// `max_tgt_len`.
pub fn target_ids(summary: &[u32], max_tgt_len: usize) -> TokenSeq {
    let keep = summary.len().min(max_tgt_len.saturating_sub(1));
    let mut t: TokenSeq = summary[..keep].to_vec();
    t.push(EOS);
    t
}
