//! Multi-review summarization corpora: documents made of independent source
//! units (reflections or reviews), their reference summaries, and the
//! train/val/test partition.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("document `{0}` has no units")]
    EmptyUnits(String),
    #[error("document `{id}` has a blank unit at position {index}")]
    BlankUnit { id: String, index: usize },
    #[error("sample `{0}` has an empty summary")]
    EmptySummary(String),
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("sample `{0}` is synthetic but was supplied as original data")]
    SyntheticInOriginal(String),
    #[error("split ratios must be non-negative and sum to 1, got ({0}, {1}, {2})")]
    BadRatios(f64, f64, f64),
}

/// One reflection or review. Never blank.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceUnit(String);

impl SourceUnit {
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            None
        } else {
            Some(Self(text))
        }
    }

    pub fn text(&self) -> &str {
        &self.0
    }

    /// Builds a unit without the blank check. Callers guarantee non-blank text.
    pub(crate) fn from_trusted(text: String) -> Self {
        debug_assert!(!text.trim().is_empty());
        Self(text)
    }
}

impl fmt::Display for SourceUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    /// Course (reflection data) or product/business (review data).
    pub group: String,
    pub units: Vec<SourceUnit>,
}

impl Document {
    /// Validates and builds a document from raw unit strings.
    pub fn new(
        id: impl Into<String>,
        group: impl Into<String>,
        units: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let mut out = Vec::new();
        for (index, text) in units.into_iter().enumerate() {
            match SourceUnit::new(text) {
                Some(u) => out.push(u),
                None => return Err(CorpusError::BlankUnit { id, index }),
            }
        }
        if out.is_empty() {
            return Err(CorpusError::EmptyUnits(id));
        }
        Ok(Self { id, group: group.into(), units: out })
    }

    /// Unit texts joined by `sep`.
    pub fn joined(&self, sep: &str) -> String {
        let mut s = String::new();
        for (i, u) in self.units.iter().enumerate() {
            if i > 0 {
                s.push_str(sep);
            }
            s.push_str(u.text());
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    Shuffle,
    ShuffleMask,
    Paraphrase,
}

impl Origin {
    pub fn is_synthetic(self) -> bool {
        self != Origin::Original
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::Shuffle => "shuffle",
            Origin::ShuffleMask => "shuffle_mask",
            Origin::Paraphrase => "paraphrase",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One training unit: a document and its reference summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub document: Document,
    pub summary: String,
    pub origin: Origin,
    /// Id of the original sample a synthetic sample was derived from.
    pub parent: Option<String>,
}

impl Sample {
    pub fn new(document: Document, summary: impl Into<String>) -> Result<Self, CorpusError> {
        let summary = summary.into();
        if summary.trim().is_empty() {
            return Err(CorpusError::EmptySummary(document.id));
        }
        Ok(Self { document, summary, origin: Origin::Original, parent: None })
    }

    pub fn id(&self) -> &str {
        &self.document.id
    }

    /// The original sample this one traces back to (itself when original).
    pub fn root_id(&self) -> &str {
        self.parent.as_deref().unwrap_or(&self.document.id)
    }
}

/// A validated train/val/test partition, disjoint by document id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Corpus {
    pub fn new(train: Vec<Sample>, val: Vec<Sample>, test: Vec<Sample>) -> Result<Self, CorpusError> {
        let corpus = Self { train, val, test };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Split, &Sample)> {
        Split::ALL
            .into_iter()
            .flat_map(move |s| self.split(s).iter().map(move |x| (s, x)))
    }

    /// Checks every corpus invariant: non-empty units and summaries,
    /// original origin, and unique ids across all splits.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = BTreeSet::new();
        for (_, s) in self.iter() {
            validate_sample(s)?;
            if s.origin.is_synthetic() {
                return Err(CorpusError::SyntheticInOriginal(s.id().into()));
            }
            if !seen.insert(s.id()) {
                return Err(CorpusError::DuplicateId(s.id().into()));
            }
        }
        Ok(())
    }

    /// Mean number of units per document over all splits.
    pub fn mean_units(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let total: usize = self.iter().map(|(_, s)| s.document.units.len()).sum();
        total as f64 / self.len() as f64
    }
}

fn validate_sample(s: &Sample) -> Result<(), CorpusError> {
    if s.document.units.is_empty() {
        return Err(CorpusError::EmptyUnits(s.id().into()));
    }
    if let Some(index) = s.document.units.iter().position(|u| u.text().trim().is_empty()) {
        return Err(CorpusError::BlankUnit { id: s.id().into(), index });
    }
    if s.summary.trim().is_empty() {
        return Err(CorpusError::EmptySummary(s.id().into()));
    }
    Ok(())
}

/// Fractions of each group assigned to train, val and test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const fn new(train: f64, val: f64, test: f64) -> Self {
        Self { train, val, test }
    }

    fn as_array(self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    pub fn validate(self) -> Result<(), CorpusError> {
        let r = self.as_array();
        let sum: f64 = r.iter().sum();
        if r.iter().any(|x| !x.is_finite() || *x < 0.0) || crate::math::abs(sum - 1.0) > 1e-9 {
            return Err(CorpusError::BadRatios(self.train, self.val, self.test));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::new(0.8, 0.1, 0.1)
    }
}

/// A group too small to be spread across every non-empty split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitWarning {
    pub group: String,
    pub size: usize,
    pub assigned_to: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedSplit {
    pub corpus: Corpus,
    pub warnings: Vec<SplitWarning>,
}

/// Splits samples per group with a seeded shuffle and largest-remainder
/// rounding, so every group contributes to each split in proportion.
pub fn split_corpus(
    samples: Vec<Sample>,
    ratios: SplitRatios,
    seed: u64,
) -> Result<StratifiedSplit, CorpusError> {
    ratios.validate()?;
    let mut groups: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.document.group.clone()).or_default().push(s);
    }

    let r = ratios.as_array();
    let nonzero = r.iter().filter(|x| **x > 0.0).count();
    // first index wins ties, i.e. train before val before test
    let largest = (0..3).fold(0, |best, i| if r[i] > r[best] { i } else { best });

    let mut parts: [Vec<Sample>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut warnings = Vec::new();
    for (group, mut members) in groups {
        members.sort_by(|a, b| a.id().cmp(b.id()));
        members.shuffle(&mut rng::stream(seed, &group, 0));
        let n = members.len();
        let counts = if n < nonzero {
            warnings.push(SplitWarning { group, size: n, assigned_to: Split::ALL[largest] });
            let mut c = [0; 3];
            c[largest] = n;
            c
        } else {
            largest_remainder(n, r)
        };
        let mut it = members.into_iter();
        for (part, count) in parts.iter_mut().zip(counts) {
            part.extend(it.by_ref().take(count));
        }
    }
    let [train, val, test] = parts;
    Ok(StratifiedSplit { corpus: Corpus::new(train, val, test)?, warnings })
}

/// Integer apportionment of `n` items by `ratios` (summing to 1).
fn largest_remainder(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let quotas = ratios.map(|x| x * n as f64);
    let mut counts = quotas.map(|q| crate::math::floor(q) as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    // stable sort keeps split order on equal remainders
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal)
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn sample(id: &str, group: &str) -> Sample {
        Sample::new(Document::new(id, group, ["some text"]).unwrap(), "summary").unwrap()
    }

    fn grouped(groups: usize, per_group: usize) -> Vec<Sample> {
        (0..groups)
            .flat_map(|g| (0..per_group).map(move |i| sample(&format!("g{g}-{i}"), &format!("course{g}"))))
            .collect()
    }

    #[test]
    fn blank_units_and_summaries_are_rejected() {
        assert!(matches!(Document::new("d", "g", ["ok", "  "]), Err(CorpusError::BlankUnit { index: 1, .. })));
        assert!(matches!(Document::new("d", "g", Vec::<String>::new()), Err(CorpusError::EmptyUnits(_))));
        let doc = Document::new("d7", "g", ["x"]).unwrap();
        assert_eq!(Sample::new(doc, " "), Err(CorpusError::EmptySummary("d7".into())));
    }

    #[test]
    fn duplicate_ids_across_splits_are_rejected() {
        let err = Corpus::new(vec![sample("a", "g")], vec![sample("a", "g")], vec![]).unwrap_err();
        assert_eq!(err, CorpusError::DuplicateId("a".into()));
    }

    #[test]
    fn four_groups_of_ten_split_eight_one_one() {
        let out = split_corpus(grouped(4, 10), SplitRatios::new(0.8, 0.1, 0.1), 3).unwrap();
        assert!(out.warnings.is_empty());
        for g in 0..4 {
            let key = format!("course{g}");
            let count = |v: &[Sample]| v.iter().filter(|s| s.document.group == key).count();
            assert_eq!(count(&out.corpus.train), 8);
            assert_eq!(count(&out.corpus.val), 1);
            assert_eq!(count(&out.corpus.test), 1);
        }
    }

    #[test]
    fn degenerate_ratios_put_everything_in_train() {
        let out = split_corpus(grouped(3, 5), SplitRatios::new(1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(out.corpus.train.len(), 15);
        assert!(out.corpus.val.is_empty() && out.corpus.test.is_empty());
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let ids = |seed| {
            let c = split_corpus(grouped(2, 20), SplitRatios::default(), seed).unwrap().corpus;
            c.iter().map(|(s, x)| (s, String::from(x.id()))).collect::<Vec<_>>()
        };
        assert_eq!(ids(9), ids(9));
        assert_ne!(ids(9), ids(10));
    }

    #[test]
    fn tiny_group_goes_to_largest_split_with_warning() {
        let mut samples = grouped(1, 10);
        samples.push(sample("lonely", "tiny"));
        samples.push(sample("lonely2", "tiny"));
        let out = split_corpus(samples, SplitRatios::default(), 0).unwrap();
        assert_eq!(out.warnings, vec![SplitWarning { group: "tiny".into(), size: 2, assigned_to: Split::Train }]);
        assert!(out.corpus.train.iter().any(|s| s.id() == "lonely"));
    }

    #[test]
    fn bad_ratios_are_rejected() {
        assert!(split_corpus(vec![], SplitRatios::new(0.5, 0.5, 0.5), 0).is_err());
        assert!(split_corpus(vec![], SplitRatios::new(1.2, -0.1, -0.1), 0).is_err());
    }

    #[test]
    fn largest_remainder_sums_to_n() {
        for n in 0..50 {
            let c = largest_remainder(n, [0.7, 0.2, 0.1]);
            assert_eq!(c.iter().sum::<usize>(), n);
        }
    }

    proptest::proptest! {
        #[test]
        fn stratification_within_one_item(sizes in proptest::collection::vec(3usize..40, 1..6), seed in 0u64..1000) {
            let samples: Vec<Sample> = sizes.iter().enumerate()
                .flat_map(|(g, &n)| (0..n).map(move |i| sample(&format!("{g}-{i}"), &format!("g{g}"))))
                .collect();
            let ratios = SplitRatios::new(0.8, 0.1, 0.1);
            let c = split_corpus(samples, ratios, seed).unwrap().corpus;
            for (g, &n) in sizes.iter().enumerate() {
                let key = format!("g{g}");
                let t = c.train.iter().filter(|s| s.document.group == key).count();
                let frac = t as f64 / n as f64;
                proptest::prop_assert!((frac - 0.8).abs() <= 1.0 / n as f64 + 1e-12);
            }
        }
    }
}
