//! Training instances, per-instance loss with gradients, and the update step.

use alloc::vec::Vec;

use rand::Rng;

use super::params::Grads;
use super::{target_ids, Adam, ModelConfig, ModelError, Seq2Seq};
use crate::mixgen::{self, ExpectedTargets};
use crate::tokenizer::{TokenSeq, BOS, PAD};

/// One training example as the model consumes it.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    /// Ordinary teacher-forced pair; `target` ends with EOS.
    Plain { source: TokenSeq, target: TokenSeq },
    /// Two sources mixed after encoder block `layer`, trained against
    /// two-spike expected targets with sampled teacher tokens.
    Mixed {
        first: TokenSeq,
        second: TokenSeq,
        lambda: f64,
        layer: usize,
        targets: ExpectedTargets,
        teacher: TokenSeq,
    },
}

impl Instance {
    pub fn plain(config: &ModelConfig, source: &[u32], summary: &[u32]) -> Self {
        Instance::Plain {
            source: source.iter().copied().take(config.max_src_len).collect(),
            target: target_ids(summary, config.max_tgt_len),
        }
    }

    /// Mixed instance for two `(source, summary)` pairs; teacher tokens are
    /// drawn from `rng`.
    pub fn mixed<R: Rng + ?Sized>(
        config: &ModelConfig,
        first: (&[u32], &[u32]),
        second: (&[u32], &[u32]),
        lambda: f64,
        layer: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        if layer > config.encoder_layers {
            return Err(ModelError::LayerOutOfRange { k: layer, depth: config.encoder_layers });
        }
        let t1 = target_ids(first.1, config.max_tgt_len);
        let t2 = target_ids(second.1, config.max_tgt_len);
        let targets = mixgen::expected_targets(&t1, &t2, lambda, config.vocab_size)?;
        let teacher = mixgen::sample_teacher_tokens(&t1, &t2, lambda, rng)?;
        Ok(Instance::Mixed {
            first: first.0.iter().copied().take(config.max_src_len).collect(),
            second: second.0.iter().copied().take(config.max_src_len).collect(),
            lambda,
            layer,
            targets,
            teacher,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Mean instance loss before the update.
    pub loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub lr: f64,
}

fn decoder_input(teacher: &[u32]) -> TokenSeq {
    let mut input = Vec::with_capacity(teacher.len());
    input.push(BOS);
    input.extend_from_slice(&teacher[..teacher.len() - 1]);
    input
}

fn padded(ids: &[u32], rows: usize) -> TokenSeq {
    let mut v = ids.to_vec();
    v.resize(rows, PAD);
    v
}

impl Seq2Seq {
    /// Loss of one instance. With `grads`, also accumulates
    /// `weight · ∂loss/∂θ`.
    pub fn instance_loss(&self, inst: &Instance, grads: Option<&mut Grads>, weight: f64) -> Result<f64, ModelError> {
        let v = self.config.vocab_size;
        match inst {
            Instance::Plain { source, target } => {
                self.check_tokens(source)?;
                self.check_tokens(target)?;
                if target.is_empty() {
                    return Err(ModelError::Empty);
                }
                let valid: Vec<bool> = source.iter().map(|&t| t != PAD).collect();
                let (encoded, enc) = self.encoder_blocks(self.embed(source), &valid, 0..self.config.encoder_layers);
                let input = decoder_input(target);
                let (logits, dec) = self.decoder_forward(&encoded, &valid, &input);
                let (loss, mut dlogits) = mixgen::kl_loss(&logits, &ExpectedTargets::one_hot(target, v))?;
                if let Some(grads) = grads {
                    dlogits.scale(weight);
                    let dmem = self.decoder_backward(&dec, &input, &dlogits, grads);
                    let dx = self.encoder_blocks_backward(&enc, 0..self.config.encoder_layers, dmem, grads);
                    self.embed_backward(source, &dx, grads);
                }
                Ok(loss)
            }
            Instance::Mixed { first, second, lambda, layer, targets, teacher } => {
                let (k, depth) = (*layer, self.config.encoder_layers);
                if k > depth {
                    return Err(ModelError::LayerOutOfRange { k, depth });
                }
                self.check_tokens(first)?;
                self.check_tokens(second)?;
                self.check_tokens(teacher)?;
                if teacher.is_empty() {
                    return Err(ModelError::Empty);
                }
                let rows = first.len().max(second.len());
                let (p1, p2) = (padded(first, rows), padded(second, rows));
                let v1: Vec<bool> = p1.iter().map(|&t| t != PAD).collect();
                let v2: Vec<bool> = p2.iter().map(|&t| t != PAD).collect();
                let union: Vec<bool> = v1.iter().zip(&v2).map(|(a, b)| *a || *b).collect();
                let (h1, t1) = self.encoder_blocks(self.embed(&p1), &v1, 0..k);
                let (h2, t2) = self.encoder_blocks(self.embed(&p2), &v2, 0..k);
                let mixed = mixgen::mix_hidden(&h1, &h2, *lambda)?;
                let (encoded, t3) = self.encoder_blocks(mixed, &union, k..depth);
                let input = decoder_input(teacher);
                let (logits, dec) = self.decoder_forward(&encoded, &union, &input);
                let (loss, mut dlogits) = mixgen::kl_loss(&logits, targets)?;
                if let Some(grads) = grads {
                    dlogits.scale(weight);
                    let dmem = self.decoder_backward(&dec, &input, &dlogits, grads);
                    let dmixed = self.encoder_blocks_backward(&t3, k..depth, dmem, grads);
                    let mut d1 = dmixed.clone();
                    d1.scale(*lambda);
                    let d1 = self.encoder_blocks_backward(&t1, 0..k, d1, grads);
                    self.embed_backward(&p1, &d1, grads);
                    let mut d2 = dmixed;
                    d2.scale(1.0 - *lambda);
                    let d2 = self.encoder_blocks_backward(&t2, 0..k, d2, grads);
                    self.embed_backward(&p2, &d2, grads);
                }
                Ok(loss)
            }
        }
    }

    /// Mean loss over `batch` without touching gradients.
    pub fn batch_loss(&self, batch: &[Instance]) -> Result<f64, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut total = 0.0;
        for inst in batch {
            total += self.instance_loss(inst, None, 1.0)?;
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean loss over `batch` and its full gradient.
    pub fn batch_gradient(&self, batch: &[Instance]) -> Result<(f64, Grads), ModelError> {
        if batch.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut grads = Grads::zeros_like(&self.params);
        let w = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for inst in batch {
            total += self.instance_loss(inst, Some(&mut grads), w)?;
        }
        Ok((total * w, grads))
    }

    /// One optimizer update on the mean batch loss. A non-finite loss or
    /// gradient leaves the parameters untouched and reports diagnostics.
    pub fn train_step(&mut self, batch: &[Instance], opt: &mut Adam) -> Result<StepStats, ModelError> {
        let (loss, grads) = self.batch_gradient(batch)?;
        let grad_norm = grads.norm();
        if !loss.is_finite() || !grad_norm.is_finite() {
            return Err(ModelError::NonFiniteLoss { step: opt.steps(), loss, grad_norm });
        }
        let lr = opt.update(self.params_mut(), &grads);
        Ok(StepStats { loss, grad_norm, lr })
    }
}
