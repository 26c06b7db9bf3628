//! Text specificity on a continuous 1–4 scale and its document-level mean.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

use thiserror::Error;

use crate::corpus::{Corpus, Document};
use crate::math;
use crate::tokenizer::tokenize;

pub const MIN_SCORE: f64 = 1.0;
pub const MAX_SCORE: f64 = 4.0;

/// A specificity value in `[1, 4]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SpecificityScore(f64);

impl SpecificityScore {
    pub fn new(value: f64) -> Option<Self> {
        (MIN_SCORE..=MAX_SCORE).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScorerError {
    #[error("cannot fit a scorer on an empty train split")]
    EmptyTrain,
    #[error("score {0} outside [1, 4]")]
    OutOfRange(f64),
    #[error("scorer failure: {0}")]
    Failed(String),
}

/// Anything that rates a single unit of text.
pub trait SpecificityScorer {
    fn score(&self, text: &str) -> Result<SpecificityScore, ScorerError>;
}

impl<S: SpecificityScorer + ?Sized> SpecificityScorer for &S {
    fn score(&self, text: &str) -> Result<SpecificityScore, ScorerError> {
        (**self).score(text)
    }
}

/// Length-and-rarity heuristic:
/// `S(r) = 1 + 3·(0.5·min(|r|, 20)/20 + 0.5·mean_t idf(t)/max_idf)`,
/// with idf computed over train-split units and unseen tokens at `max_idf`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicScorer {
    idf: BTreeMap<String, f64>,
    max_idf: f64,
}

const LENGTH_CAP: usize = 20;

impl HeuristicScorer {
    /// Fits idf over train-split units, treating each unit as a document.
    pub fn fit(corpus: &Corpus) -> Result<Self, ScorerError> {
        Self::fit_units(corpus.train.iter().flat_map(|s| s.document.units.iter().map(|u| u.text())))
    }

    pub fn fit_units<'a>(units: impl IntoIterator<Item = &'a str>) -> Result<Self, ScorerError> {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n_units = 0usize;
        for text in units {
            n_units += 1;
            let distinct: BTreeSet<String> = tokenize(text).into_iter().collect();
            for t in distinct {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        if n_units == 0 {
            return Err(ScorerError::EmptyTrain);
        }
        let idf: BTreeMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t, math::ln(n_units as f64 / d as f64)))
            .collect();
        let max_idf = idf.values().copied().fold(0.0, f64::max);
        Ok(Self { idf, max_idf })
    }

    pub fn idf(&self, token: &str) -> f64 {
        self.idf.get(token).copied().unwrap_or(self.max_idf)
    }

    pub fn max_idf(&self) -> f64 {
        self.max_idf
    }

    pub fn score_text(&self, text: &str) -> SpecificityScore {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return SpecificityScore(MIN_SCORE);
        }
        let len = tokens.len().min(LENGTH_CAP) as f64 / LENGTH_CAP as f64;
        let rarity = if self.max_idf > 0.0 {
            tokens.iter().map(|t| self.idf(t) / self.max_idf).sum::<f64>() / tokens.len() as f64
        } else {
            0.0
        };
        let s = 1.0 + 3.0 * (0.5 * len + 0.5 * rarity);
        SpecificityScore(s.clamp(MIN_SCORE, MAX_SCORE))
    }
}

impl SpecificityScorer for HeuristicScorer {
    fn score(&self, text: &str) -> Result<SpecificityScore, ScorerError> {
        Ok(self.score_text(text))
    }
}

/// Mean unit specificity of a document.
pub fn score_document<S: SpecificityScorer + ?Sized>(doc: &Document, scorer: &S) -> Result<f64, ScorerError> {
    let mut sum = 0.0;
    for u in &doc.units {
        sum += scorer.score(u.text())?.value();
    }
    Ok(sum / doc.units.len() as f64)
}
