//! Curriculum construction: per-sample difficulty, normalization into `N`
//! buckets, and a cumulative easy-to-hard training schedule.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sample;
use crate::math;
use crate::rng::{self, StreamRng};
use crate::rouge::{avg_rouge, rouge_suite};
use crate::specificity::{score_document, ScorerError, SpecificityScorer};

/// Joins units when the document is scored as one ROUGE candidate.
pub const UNIT_SEPARATOR: &str = " <sep> ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Specificity,
    Rouge,
}

impl Metric {
    pub fn short(self) -> &'static str {
        match self {
            Metric::Specificity => "S",
            Metric::Rouge => "R",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyScore {
    pub sample_id: String,
    pub metric: Metric,
    /// Higher is harder.
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurriculumError {
    #[error("bucket count must be at least 1")]
    NoBuckets,
    #[error("no difficulty scores to bucketize")]
    NoScores,
    #[error("difficulty scores mix metrics")]
    MixedMetrics,
    #[error("difficulty for `{0}` is not finite")]
    NonFinite(String),
    #[error("total steps {steps} is smaller than the bucket count {buckets}")]
    TooFewSteps { steps: usize, buckets: usize },
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

/// Document specificity: more specific documents are harder.
pub fn difficulty_specificity<S: SpecificityScorer + ?Sized>(
    sample: &Sample,
    scorer: &S,
) -> Result<DifficultyScore, CurriculumError> {
    Ok(DifficultyScore {
        sample_id: sample.id().into(),
        metric: Metric::Specificity,
        raw: score_document(&sample.document, scorer)?,
    })
}

/// `1 − avg(R1, R2, RL)` between the document (units in stored order) and its
/// summary: the less the summary overlaps its input, the harder the sample.
pub fn difficulty_rouge(sample: &Sample) -> DifficultyScore {
    let document = sample.document.joined(UNIT_SEPARATOR);
    let suite = rouge_suite(&document, &sample.summary);
    DifficultyScore { sample_id: sample.id().into(), metric: Metric::Rouge, raw: 1.0 - avg_rouge(&suite) }
}

pub fn difficulties<S: SpecificityScorer + ?Sized>(
    samples: &[Sample],
    metric: Metric,
    scorer: &S,
) -> Result<Vec<DifficultyScore>, CurriculumError> {
    samples
        .iter()
        .map(|s| match metric {
            Metric::Specificity => difficulty_specificity(s, scorer),
            Metric::Rouge => Ok(difficulty_rouge(s)),
        })
        .collect()
}

/// Bucket (1-based) of every sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketAssignment {
    pub buckets: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl BucketAssignment {
    /// Sample ids per bucket, ascending.
    pub fn members(&self) -> BTreeMap<usize, Vec<String>> {
        let mut m: BTreeMap<usize, Vec<String>> = (1..=self.buckets).map(|b| (b, Vec::new())).collect();
        for (id, &b) in &self.assignment {
            m.entry(b).or_default().push(id.clone());
        }
        m
    }

    pub fn bucket_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }
}

/// Min–max normalizes raw difficulties and maps them onto `1..=n`:
/// `bucket = clamp(1 + ⌊norm·n⌋, 1, n)`.
// Values a rounding error away from a bucket boundary belong on the boundary:
// (0.5 - 0.2) / (0.8 - 0.2) evaluates to 0.49999999999999994.
fn snap(x: f64) -> f64 {
    let r = math::round(x);
    if math::abs(x - r) <= BOUNDARY_TOLERANCE * r.max(1.0) {
        r
    } else {
        x
    }
}

const BOUNDARY_TOLERANCE: f64 = 1e-9;

pub fn bucketize(scores: &[DifficultyScore], n: usize) -> Result<BucketAssignment, CurriculumError> {
    if n == 0 {
        return Err(CurriculumError::NoBuckets);
    }
    let first = scores.first().ok_or(CurriculumError::NoScores)?;
    if let Some(bad) = scores.iter().find(|s| !s.raw.is_finite()) {
        return Err(CurriculumError::NonFinite(bad.sample_id.clone()));
    }
    if scores.iter().any(|s| s.metric != first.metric) {
        return Err(CurriculumError::MixedMetrics);
    }
    let min = scores.iter().map(|s| s.raw).fold(f64::INFINITY, f64::min);
    let max = scores.iter().map(|s| s.raw).fold(f64::NEG_INFINITY, f64::max);
    let assignment = scores
        .iter()
        .map(|s| {
            let norm = if max > min { (s.raw - min) / (max - min) } else { 0.0 };
            let bucket = 1 + math::floor(snap(norm * n as f64)) as usize;
            (s.sample_id.clone(), bucket.clamp(1, n))
        })
        .collect();
    Ok(BucketAssignment { buckets: n, assignment })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    /// 1-based stage index `k`.
    pub index: usize,
    /// Buckets `1..=k`.
    pub buckets: Vec<usize>,
    pub steps: usize,
}

/// Incremental schedule: stage `k` trains on buckets `1..=k` for its budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub seed: u64,
    pub stages: Vec<Stage>,
    /// Sample ids per bucket.
    pub members: BTreeMap<usize, Vec<String>>,
}

/// Splits `total_steps` evenly over `N` stages, remainder to the last.
pub fn build_schedule(
    assignment: &BucketAssignment,
    total_steps: usize,
    seed: u64,
) -> Result<Schedule, CurriculumError> {
    let n = assignment.buckets;
    if n == 0 {
        return Err(CurriculumError::NoBuckets);
    }
    if total_steps < n {
        return Err(CurriculumError::TooFewSteps { steps: total_steps, buckets: n });
    }
    let per = total_steps / n;
    let stages = (1..=n)
        .map(|k| Stage {
            index: k,
            buckets: (1..=k).collect(),
            steps: if k == n { per + total_steps % n } else { per },
        })
        .collect();
    Ok(Schedule { seed, stages, members: assignment.members() })
}

impl Schedule {
    pub fn total_steps(&self) -> usize {
        self.stages.iter().map(|s| s.steps).sum()
    }

    /// Ids eligible at stage `k` (1-based), in bucket order.
    pub fn eligible(&self, k: usize) -> Vec<(usize, &str)> {
        self.stages
            .get(k.wrapping_sub(1))
            .map(|stage| {
                stage
                    .buckets
                    .iter()
                    .flat_map(|b| self.members.get(b).into_iter().flatten().map(move |id| (*b, id.as_str())))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn eligible_set(&self, k: usize) -> BTreeSet<&str> {
        self.eligible(k).into_iter().map(|(_, id)| id).collect()
    }

    /// Stage (1-based) owning global step `step` (0-based).
    pub fn stage_at(&self, step: usize) -> Option<usize> {
        let mut end = 0;
        for s in &self.stages {
            end += s.steps;
            if step < end {
                return Some(s.index);
            }
        }
        None
    }

    /// Seeded stream for drawing the minibatch at `step`.
    pub fn batch_rng(&self, step: usize) -> StreamRng {
        rng::stream(self.seed, "curriculum-batch", step as u64)
    }

    /// Draws `size` `(bucket, id)` pairs uniformly, with replacement, from
    /// the ids eligible at `step`. Empty when the step is past the schedule.
    pub fn draw_batch(&self, step: usize, size: usize) -> Vec<(usize, String)> {
        let Some(stage) = self.stage_at(step) else { return Vec::new() };
        let pool = self.eligible(stage);
        if pool.is_empty() {
            return Vec::new();
        }
        let mut rng = self.batch_rng(step);
        (0..size)
            .map(|_| {
                let (b, id) = pool[rng.random_range(0..pool.len())];
                (b, String::from(id))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::specificity::SpecificityScore;
    use alloc::format;
    use alloc::vec;

    fn scores(raws: &[f64]) -> Vec<DifficultyScore> {
        raws.iter()
            .enumerate()
            .map(|(i, &raw)| DifficultyScore { sample_id: format!("s{i}"), metric: Metric::Rouge, raw })
            .collect()
    }

    fn buckets_of(a: &BucketAssignment, n: usize) -> Vec<usize> {
        (0..n).map(|i| a.assignment[&format!("s{i}")]).collect()
    }

    fn sample(units: &[&str], summary: &str) -> Sample {
        Sample::new(Document::new("x", "g", units.iter().copied()).unwrap(), summary).unwrap()
    }

    struct Constant(f64);
    impl SpecificityScorer for Constant {
        fn score(&self, _: &str) -> Result<SpecificityScore, ScorerError> {
            Ok(SpecificityScore::new(self.0).unwrap())
        }
    }

    #[test]
    fn specificity_extremes() {
        let s = sample(&["a", "b"], "c");
        assert_eq!(difficulty_specificity(&s, &Constant(1.0)).unwrap().raw, 1.0);
        assert_eq!(difficulty_specificity(&s, &Constant(4.0)).unwrap().raw, 4.0);
    }

    #[test]
    fn rouge_difficulty_extremes() {
        assert_eq!(difficulty_rouge(&sample(&["the cat sat"], "the cat sat")).raw, 0.0);
        assert_eq!(difficulty_rouge(&sample(&["the cat sat"], "dogs bark")).raw, 1.0);
    }

    #[test]
    fn rouge_difficulty_worked_example() {
        // R1 f1 0.8, R2 f1 2/3, RL f1 0.8, computed by hand
        let expected = 1.0 - (0.8 + 2.0 / 3.0 + 0.8) / 3.0;
        let got = difficulty_rouge(&sample(&["the cat sat"], "the cat")).raw;
        assert!((got - expected).abs() < 1e-12, "{got}");
    }

    #[test]
    fn separator_blocks_cross_unit_bigrams() {
        let split = difficulty_rouge(&sample(&["the", "cat"], "the cat")).raw;
        let joined = difficulty_rouge(&sample(&["the cat"], "the cat")).raw;
        assert!(split > joined);
    }

    #[test]
    fn worked_bucket_example() {
        let a = bucketize(&scores(&[0.2, 0.5, 0.8]), 10).unwrap();
        assert_eq!(buckets_of(&a, 3), [1, 6, 10]);
    }

    #[test]
    fn degenerate_bucketing() {
        let a = bucketize(&scores(&[0.3, 0.3, 0.3]), 10).unwrap();
        assert_eq!(buckets_of(&a, 3), [1, 1, 1]);
        let a = bucketize(&scores(&[0.1, 0.9, 0.5]), 1).unwrap();
        assert_eq!(buckets_of(&a, 3), [1, 1, 1]);
        assert_eq!(bucketize(&scores(&[0.1]), 0), Err(CurriculumError::NoBuckets));
        assert_eq!(bucketize(&[], 3), Err(CurriculumError::NoScores));
        let mut mixed = scores(&[0.1, 0.2]);
        mixed[1].metric = Metric::Specificity;
        assert_eq!(bucketize(&mixed, 3), Err(CurriculumError::MixedMetrics));
        assert!(matches!(bucketize(&scores(&[f64::NAN]), 3), Err(CurriculumError::NonFinite(_))));
    }

    #[test]
    fn schedule_budgets() {
        let a = bucketize(&scores(&(0..30).map(|i| i as f64).collect::<Vec<_>>()), 10).unwrap();
        let s = build_schedule(&a, 1000, 1).unwrap();
        assert_eq!(s.stages.len(), 10);
        assert!(s.stages.iter().all(|st| st.steps == 100));
        assert_eq!(s.stages[2].buckets, [1, 2, 3]);
        let stage3: BTreeSet<usize> = s.eligible(3).iter().map(|(b, _)| *b).collect();
        assert!(stage3.iter().all(|b| *b <= 3));

        let s = build_schedule(&a, 1005, 1).unwrap();
        assert_eq!(s.stages[9].steps, 105);
        assert!(s.stages[..9].iter().all(|st| st.steps == 100));
        assert_eq!(s.total_steps(), 1005);

        assert!(matches!(build_schedule(&a, 9, 1), Err(CurriculumError::TooFewSteps { .. })));
    }

    #[test]
    fn single_bucket_is_plain_training() {
        let a = bucketize(&scores(&[0.1, 0.4, 0.9]), 1).unwrap();
        let s = build_schedule(&a, 50, 0).unwrap();
        assert_eq!(s.stages, vec![Stage { index: 1, buckets: vec![1], steps: 50 }]);
        assert_eq!(s.eligible_set(1).len(), 3);
    }

    #[test]
    fn batches_respect_stage_and_are_reproducible() {
        let a = bucketize(&scores(&(0..40).map(|i| i as f64).collect::<Vec<_>>()), 4).unwrap();
        let s = build_schedule(&a, 40, 9).unwrap();
        for step in 0..40 {
            let stage = s.stage_at(step).unwrap();
            let batch = s.draw_batch(step, 8);
            assert_eq!(batch.len(), 8);
            assert!(batch.iter().all(|(b, id)| *b <= stage && a.bucket_of(id) == Some(*b)));
            assert_eq!(batch, s.draw_batch(step, 8));
        }
        assert!(s.draw_batch(40, 8).is_empty());
    }

    proptest::proptest! {
        #[test]
        fn endpoints_and_shift_invariance(raws in proptest::collection::vec(-5.0f64..5.0, 2..40), shift in -3.0f64..3.0, n in 1usize..12) {
            let a = bucketize(&scores(&raws), n).unwrap();
            let lo = raws.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = raws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (i, &r) in raws.iter().enumerate() {
                let b = a.assignment[&format!("s{i}")];
                proptest::prop_assert!((1..=n).contains(&b));
                if r == lo { proptest::prop_assert_eq!(b, 1); }
                if r == hi && hi > lo { proptest::prop_assert_eq!(b, n); }
            }
            // ordering is preserved
            for i in 0..raws.len() {
                for j in 0..raws.len() {
                    if raws[i] <= raws[j] {
                        let (bi, bj) = (a.assignment[&format!("s{i}")], a.assignment[&format!("s{j}")]);
                        proptest::prop_assert!(bi <= bj);
                    }
                }
            }
            // dyadic raws and integer shifts keep the arithmetic exact
            let dyadic: Vec<f64> = raws.iter().map(|r| (r * 8.0).round() / 8.0).collect();
            let a = bucketize(&scores(&dyadic), n).unwrap();
            let shifted: Vec<f64> = dyadic.iter().map(|r| r + shift.round()).collect();
            let b = bucketize(&scores(&shifted), n).unwrap();
            proptest::prop_assert_eq!(a, b);
        }

        #[test]
        fn stages_only_grow(raws in proptest::collection::vec(0.0f64..1.0, 1..60), n in 1usize..12, seed in 0u64..100) {
            let a = bucketize(&scores(&raws), n).unwrap();
            let s = build_schedule(&a, n * 3, seed).unwrap();
            for k in 2..=n {
                proptest::prop_assert!(s.eligible_set(k).is_superset(&s.eligible_set(k - 1)));
            }
            proptest::prop_assert_eq!(s.eligible_set(n).len(), raws.len());
        }
    }
}
