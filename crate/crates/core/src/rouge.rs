//! ROUGE-1, ROUGE-2 and ROUGE-L (clipped n-gram overlap and LCS), without
//! stemming or stopword removal.

use alloc::collections::BTreeMap;
use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::tokenizer::tokenize;

/// Precision, recall and their harmonic mean, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub const ZERO: Self = Self { precision: 0.0, recall: 0.0, f1: 0.0 };

    /// Score from an overlap count and the two sides' totals. A zero total on
    /// either side yields all zeros.
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        if candidate_total == 0 || reference_total == 0 {
            return Self::ZERO;
        }
        let precision = overlap as f64 / candidate_total as f64;
        let recall = overlap as f64 / reference_total as f64;
        Self::from_pr(precision, recall)
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeSuite {
    pub r1: RougeScore,
    pub r2: RougeScore,
    pub rl: RougeScore,
}

impl RougeSuite {
    /// Arithmetic mean of the three f1 values.
    pub fn avg_f1(&self) -> f64 {
        avg_rouge(self)
    }
}

fn ngram_counts<T: Ord>(tokens: &[T], n: usize) -> BTreeMap<&[T], usize> {
    let mut counts = BTreeMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped (multiset intersection) n-gram counts.
///
/// `n` must be at least 1; `n = 0` yields zeros.
pub fn rouge_n<T: Ord>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    if n == 0 {
        return RougeScore::ZERO;
    }
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    let total = |len: usize| len.saturating_sub(n - 1);
    RougeScore::from_counts(overlap, total(candidate.len()), total(reference.len()))
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L from the longest common subsequence.
pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

/// Scores two token sequences with ROUGE-1, ROUGE-2 and ROUGE-L.
pub fn rouge_suite_tokens<T: Ord>(candidate: &[T], reference: &[T]) -> RougeSuite {
    RougeSuite {
        r1: rouge_n(candidate, reference, 1),
        r2: rouge_n(candidate, reference, 2),
        rl: rouge_l(candidate, reference),
    }
}

/// Tokenizes both texts (no vocabulary involved) and scores them.
pub fn rouge_suite(candidate: &str, reference: &str) -> RougeSuite {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    rouge_suite_tokens(&c, &r)
}

pub fn avg_rouge(suite: &RougeSuite) -> f64 {
    (suite.r1.f1 + suite.r2.f1 + suite.rl.f1) / 3.0
}
