//! Sample mixing for generation: λ sampling, two-spike expected target
//! distributions, teacher-token sampling, hidden-state interpolation, and the
//! KL training loss against the expected targets.
//!
//! Positions are 0-based here. For a pair of target sequences `s1`, `s2`,
//! position `i < min(L1, L2)` expects mass `λ` on `s1[i]` and `1 − λ` on
//! `s2[i]`; beyond that the longer sequence's token gets all the mass.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use thiserror::Error;

use crate::math;
use crate::model::tensor::Matrix;
use crate::tokenizer::TokenSeq;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixError {
    #[error("alpha must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("partner count must be at least 1")]
    NoPartners,
    #[error("mix layer {layer} exceeds encoder depth {depth}")]
    LayerOutOfRange { layer: usize, depth: usize },
    #[error("lambda {0} outside [0, 1]")]
    BadLambda(f64),
    #[error("position {index} out of range for target length {len}")]
    PositionOutOfRange { index: usize, len: usize },
    #[error("cannot mix an empty sequence")]
    EmptySequence,
    #[error("token id {id} outside vocabulary of size {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("hidden state shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("logits have {logits} rows but targets have {targets} positions")]
    LengthMismatch { logits: usize, targets: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixConfig {
    /// Beta(α, α) shape for λ.
    pub alpha: f64,
    /// Encoder layer after which hidden states are mixed (0 = embeddings).
    pub mix_layer: usize,
    /// Partners per sample.
    pub partners: usize,
    pub seed: u64,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self { alpha: 0.75, mix_layer: 1, partners: 3, seed: 0 }
    }
}

impl MixConfig {
    pub fn validate(&self, encoder_layers: usize) -> Result<(), MixError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(MixError::BadAlpha(self.alpha));
        }
        if self.partners == 0 {
            return Err(MixError::NoPartners);
        }
        if self.mix_layer > encoder_layers {
            return Err(MixError::LayerOutOfRange { layer: self.mix_layer, depth: encoder_layers });
        }
        Ok(())
    }
}

/// Draws `x ~ Beta(α, α)` and returns `max(x, 1 − x)`, which lies in `[0.5, 1]`.
pub fn draw_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64, MixError> {
    let beta = Beta::new(alpha, alpha).map_err(|_| MixError::BadAlpha(alpha))?;
    let x: f64 = beta.sample(rng);
    Ok(x.max(1.0 - x))
}

/// Any weight in `[0, 1]` defines valid targets; drawn weights are ≥ 0.5, and
/// the mirrored pair `(s2, s1, 1 − λ)` is accepted too.
fn check_lambda(lambda: f64) -> Result<(), MixError> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(MixError::BadLambda(lambda))
    }
}

/// A probability distribution over the vocabulary with at most two non-zero
/// entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseDist {
    entries: [(u32, f64); 2],
    len: u8,
}

impl SparseDist {
    pub fn one_hot(id: u32) -> Self {
        Self { entries: [(id, 1.0), (0, 0.0)], len: 1 }
    }

    /// `λ` on `a`, `1 − λ` on `b`, merged when they coincide or when one side
    /// carries no mass.
    pub fn pair(a: u32, b: u32, lambda: f64) -> Self {
        if a == b || lambda >= 1.0 {
            Self::one_hot(a)
        } else if lambda <= 0.0 {
            Self::one_hot(b)
        } else {
            Self { entries: [(a, lambda), (b, 1.0 - lambda)], len: 2 }
        }
    }

    pub fn support(&self) -> &[(u32, f64)] {
        &self.entries[..self.len as usize]
    }

    pub fn prob(&self, id: u32) -> f64 {
        self.support().iter().filter(|(t, _)| *t == id).map(|(_, p)| p).sum()
    }

    pub fn total(&self) -> f64 {
        self.support().iter().map(|(_, p)| p).sum()
    }

    /// Most probable token (the first on ties).
    pub fn argmax(&self) -> u32 {
        self.support()
            .iter()
            .fold((0, f64::NEG_INFINITY), |best, &(t, p)| if p > best.1 { (t, p) } else { best })
            .0
    }
}

/// Per-position expected distributions for a mixed pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedTargets {
    pub seq: Vec<SparseDist>,
    pub lambda: f64,
    pub vocab: usize,
}

impl ExpectedTargets {
    /// One-hot targets for an unmixed sequence.
    pub fn one_hot(seq: &[u32], vocab: usize) -> Self {
        Self { seq: seq.iter().map(|&t| SparseDist::one_hot(t)).collect(), lambda: 1.0, vocab }
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }
}

fn check_tokens(seq: &[u32], vocab: usize) -> Result<(), MixError> {
    match seq.iter().find(|&&t| t as usize >= vocab) {
        Some(&id) => Err(MixError::TokenOutOfRange { id, vocab }),
        None => Ok(()),
    }
}

/// Expected distribution at 0-based position `i`.
pub fn expected_distribution(
    s1: &[u32],
    s2: &[u32],
    i: usize,
    lambda: f64,
    vocab: usize,
) -> Result<SparseDist, MixError> {
    check_lambda(lambda)?;
    let len = s1.len().max(s2.len());
    if i >= len {
        return Err(MixError::PositionOutOfRange { index: i, len });
    }
    let dist = match (s1.get(i), s2.get(i)) {
        (Some(&a), Some(&b)) => SparseDist::pair(a, b, lambda),
        (Some(&a), None) => SparseDist::one_hot(a),
        (None, Some(&b)) => SparseDist::one_hot(b),
        (None, None) => unreachable!("i < max length"),
    };
    for &(t, _) in dist.support() {
        if t as usize >= vocab {
            return Err(MixError::TokenOutOfRange { id: t, vocab });
        }
    }
    Ok(dist)
}

/// Expected distributions for every position `0..max(L1, L2)`.
pub fn expected_targets(s1: &[u32], s2: &[u32], lambda: f64, vocab: usize) -> Result<ExpectedTargets, MixError> {
    if s1.is_empty() || s2.is_empty() {
        return Err(MixError::EmptySequence);
    }
    check_lambda(lambda)?;
    check_tokens(s1, vocab)?;
    check_tokens(s2, vocab)?;
    let len = s1.len().max(s2.len());
    let seq = (0..len)
        .map(|i| expected_distribution(s1, s2, i, lambda, vocab))
        .collect::<Result<_, _>>()?;
    Ok(ExpectedTargets { seq, lambda, vocab })
}

/// Teacher tokens: for `i < L_min` draw `p ~ U(0, 1)` and take `s1[i]` when
/// `p ≤ λ`, else `s2[i]`; past `L_min` copy the longer sequence.
pub fn sample_teacher_tokens<R: Rng + ?Sized>(
    s1: &[u32],
    s2: &[u32],
    lambda: f64,
    rng: &mut R,
) -> Result<TokenSeq, MixError> {
    if s1.is_empty() || s2.is_empty() {
        return Err(MixError::EmptySequence);
    }
    check_lambda(lambda)?;
    let min = s1.len().min(s2.len());
    let longer = if s1.len() >= s2.len() { s1 } else { s2 };
    let mut out = Vec::with_capacity(longer.len());
    for i in 0..min {
        let p: f64 = rng.random();
        out.push(if p <= lambda { s1[i] } else { s2[i] });
    }
    out.extend_from_slice(&longer[min..]);
    Ok(out)
}

/// Elementwise `λ·h1 + (1 − λ)·h2`.
pub fn mix_hidden(h1: &Matrix, h2: &Matrix, lambda: f64) -> Result<Matrix, MixError> {
    if h1.shape() != h2.shape() {
        return Err(MixError::ShapeMismatch(h1.shape(), h2.shape()));
    }
    let data = h1.data.iter().zip(&h2.data).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
    Ok(Matrix::from_vec(h1.rows, h1.cols, data))
}

/// Row-wise log-softmax, stabilized by the row maximum.
pub fn log_softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|x| math::exp(x - max)).sum();
        let lse = max + math::ln(sum);
        for x in row.iter_mut() {
            *x -= lse;
        }
    }
    out
}

/// Mean over positions of `KL(target ‖ softmax(logits))`, and its gradient
/// with respect to the logits.
pub fn kl_loss(logits: &Matrix, targets: &ExpectedTargets) -> Result<(f64, Matrix), MixError> {
    if logits.rows != targets.len() {
        return Err(MixError::LengthMismatch { logits: logits.rows, targets: targets.len() });
    }
    if logits.cols != targets.vocab {
        return Err(MixError::TokenOutOfRange { id: logits.cols as u32, vocab: targets.vocab });
    }
    let positions = logits.rows.max(1) as f64;
    let log_p = log_softmax_rows(logits);
    let mut grad = Matrix::zeros(logits.rows, logits.cols);
    let mut loss = 0.0;
    for (r, dist) in targets.seq.iter().enumerate() {
        let lp = log_p.row(r);
        for &(t, p) in dist.support() {
            loss += p * (math::ln(p) - lp[t as usize]);
        }
        // d/dz of Σ p·(log p − log softmax(z)) = softmax(z) − p
        let g = grad.row_mut(r);
        for (gj, &lpj) in g.iter_mut().zip(lp) {
            *gj = math::exp(lpj) / positions;
        }
        for &(t, p) in dist.support() {
            g[t as usize] -= p / positions;
        }
    }
    Ok((loss / positions, grad))
}

/// `n` distinct partner indices for `index`, drawn uniformly without
/// replacement from `0..pool` excluding `index` (fewer when the pool is small).
pub fn select_partners<R: Rng + ?Sized>(index: usize, pool: usize, n: usize, rng: &mut R) -> Vec<usize> {
    if pool <= 1 {
        return Vec::new();
    }
    let k = n.min(pool - 1);
    index::sample(rng, pool - 1, k)
        .into_iter()
        .map(|j| if j >= index { j + 1 } else { j })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use alloc::vec;

    #[test]
    fn lambda_is_in_upper_half() {
        let mut rng = stream(1, "lambda", 0);
        for _ in 0..10_000 {
            let l = draw_lambda(0.75, &mut rng).unwrap();
            assert!((0.5..=1.0).contains(&l));
        }
        assert!(draw_lambda(0.0, &mut rng).is_err());
    }

    #[test]
    fn large_alpha_concentrates_lambda_near_half() {
        let mut rng = stream(2, "lambda", 0);
        let mean = (0..2000).map(|_| draw_lambda(1e4, &mut rng).unwrap()).sum::<f64>() / 2000.0;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn two_spike_distribution() {
        let d = expected_distribution(&[5], &[9], 0, 0.75, 12).unwrap();
        assert_eq!(d.support(), [(5, 0.75), (9, 0.25)]);
        let d = expected_distribution(&[7], &[7], 0, 0.6, 12).unwrap();
        assert_eq!(d.support(), [(7, 1.0)]);
        // L1 = 3, L2 = 5, fourth position follows the longer sequence
        let d = expected_distribution(&[1, 2, 3], &[5, 6, 7, 8, 9], 3, 0.8, 12).unwrap();
        assert_eq!(d.support(), [(8, 1.0)]);
    }

    #[test]
    fn distribution_errors() {
        assert!(matches!(expected_distribution(&[1], &[2], 1, 0.7, 5), Err(MixError::PositionOutOfRange { .. })));
        assert!(matches!(expected_distribution(&[1], &[2], 0, 1.3, 5), Err(MixError::BadLambda(_))));
        assert_eq!(expected_distribution(&[1], &[2], 0, 0.0, 5).unwrap().support(), [(2, 1.0)]);
        assert!(matches!(expected_distribution(&[1], &[7], 0, 0.7, 5), Err(MixError::TokenOutOfRange { .. })));
        assert_eq!(expected_targets(&[], &[1], 0.7, 5), Err(MixError::EmptySequence));
    }

    #[test]
    fn targets_follow_the_piecewise_rule() {
        let t = expected_targets(&[5, 6], &[7, 8, 9, 10], 0.7, 11).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.seq[0].support().len(), 2);
        assert_eq!(t.seq[1].support().len(), 2);
        assert_eq!(t.seq[2].support(), [(9, 1.0)]);
        assert_eq!(t.seq[3].support(), [(10, 1.0)]);

        let t = expected_targets(&[5, 6, 7], &[8, 9], 1.0, 11).unwrap();
        assert!(t.seq.iter().zip([5, 6, 7]).all(|(d, id)| d.support() == [(id, 1.0)]));

        let t = expected_targets(&[5, 6], &[5, 6], 0.6, 11).unwrap();
        assert!(t.seq.iter().all(|d| d.support().len() == 1));
    }

    #[test]
    fn teacher_tokens() {
        let mut rng = stream(3, "teacher", 0);
        let s1 = [1, 2, 3, 4];
        let s2 = [5, 6];
        let t = sample_teacher_tokens(&s1, &s2, 1.0, &mut rng).unwrap();
        assert_eq!(t, s1);
        let t = sample_teacher_tokens(&s2, &s1, 0.5, &mut rng).unwrap();
        assert_eq!(&t[2..], &[3, 4]);
        let t = sample_teacher_tokens(&s1, &s1, 0.6, &mut rng).unwrap();
        assert_eq!(t, s1);
    }

    #[test]
    fn teacher_frequency_matches_lambda() {
        let mut rng = stream(4, "teacher", 0);
        let s1 = vec![1u32; 10_000];
        let s2 = vec![2u32; 10_000];
        let t = sample_teacher_tokens(&s1, &s2, 0.75, &mut rng).unwrap();
        let frac = t.iter().filter(|&&x| x == 1).count() as f64 / 10_000.0;
        assert!((frac - 0.75).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn mixing_hidden_states() {
        let h1 = Matrix::from_vec(2, 2, vec![1.0, -2.0, 3.5, 0.25]);
        let neg = Matrix::from_vec(2, 2, h1.data.iter().map(|x| -x).collect());
        assert_eq!(mix_hidden(&h1, &neg, 1.0).unwrap(), h1);
        assert!(mix_hidden(&h1, &neg, 0.5).unwrap().data.iter().all(|&x| x == 0.0));
        let m = mix_hidden(&h1, &neg, 0.75).unwrap();
        for (i, x) in m.data.iter().enumerate() {
            assert!((x - (0.75 * h1.data[i] + 0.25 * neg.data[i])).abs() < 1e-12);
        }
        assert!(mix_hidden(&h1, &Matrix::zeros(3, 2), 0.7).is_err());
    }

    #[test]
    fn kl_is_zero_at_target_and_cross_entropy_for_one_hot() {
        // logits whose softmax is exactly (0.75, 0.25, 0)
        let logits = Matrix::from_vec(1, 3, vec![0.75f64.ln(), 0.25f64.ln(), -1e300]);
        let t = expected_targets(&[0], &[1], 0.75, 3).unwrap();
        let (loss, _) = kl_loss(&logits, &t).unwrap();
        assert!(loss.abs() < 1e-12);

        let logits = Matrix::from_vec(2, 3, vec![0.1, 0.2, 0.3, -1.0, 0.5, 2.0]);
        let t = ExpectedTargets::one_hot(&[2, 0], 3);
        let (loss, _) = kl_loss(&logits, &t).unwrap();
        let lp = log_softmax_rows(&logits);
        let ce = -(lp.get(0, 2) + lp.get(1, 0)) / 2.0;
        assert!((loss - ce).abs() < 1e-12);
    }

    #[test]
    fn kl_rejects_mismatched_shapes() {
        let t = ExpectedTargets::one_hot(&[1, 2], 4);
        assert!(matches!(kl_loss(&Matrix::zeros(3, 4), &t), Err(MixError::LengthMismatch { .. })));
    }

    #[test]
    fn partners_are_distinct_and_exclude_self() {
        let mut rng = stream(5, "partners", 0);
        for index in 0..10 {
            let p = select_partners(index, 10, 3, &mut rng);
            assert_eq!(p.len(), 3);
            assert!(!p.contains(&index));
            let mut q = p.clone();
            q.sort_unstable();
            q.dedup();
            assert_eq!(q.len(), 3);
        }
        assert_eq!(select_partners(0, 1, 3, &mut rng), Vec::<usize>::new());
        assert_eq!(select_partners(1, 3, 5, &mut rng).len(), 2);
    }

    proptest::proptest! {
        #[test]
        fn lambda_symmetry(s1 in proptest::collection::vec(0u32..6, 1..8), s2 in proptest::collection::vec(0u32..6, 1..8), lambda in 0.5f64..=1.0) {
            let a = expected_targets(&s1, &s2, lambda, 6).unwrap();
            let b = expected_targets(&s2, &s1, 1.0 - lambda, 6).unwrap();
            for i in 0..s1.len().min(s2.len()) {
                for id in 0..6 {
                    proptest::prop_assert!((a.seq[i].prob(id) - b.seq[i].prob(id)).abs() < 1e-12);
                }
            }
        }
    }
}
