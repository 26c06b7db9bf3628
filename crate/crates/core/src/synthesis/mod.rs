//! Synthetic training samples: the shuffle and shuffle+mask baselines, and
//! paraphrase-based synthesis through a pluggable [`ParaphraseProvider`].
//!
//! Every generated sample `k` of an original sample draws from its own stream
//! keyed by `(seed, sample id, k)`, so output never depends on processing order.

mod paraphrase;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use thiserror::Error;

use crate::corpus::{Origin, Sample, SourceUnit};
use crate::math;
use crate::rng::{self, StreamRng};
use crate::tokenizer::MASK_TOKEN;

pub use paraphrase::{rule_paraphrase, RuleParaphraser};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider returned {got} paraphrases for `{id}`, expected {expected}")]
    WrongCount { id: String, expected: usize, got: usize },
    #[error("provider returned an empty paraphrase for `{id}`")]
    EmptyParaphrase { id: String },
    #[error("provider failure: {0}")]
    Failed(String),
}

/// Source of summary paraphrases.
pub trait ParaphraseProvider {
    /// Returns `n` paraphrases of `text`; `id` tags the request.
    fn paraphrase(&self, id: &str, text: &str, n: usize) -> Result<Vec<String>, ProviderError>;
}

impl<P: ParaphraseProvider + ?Sized> ParaphraseProvider for &P {
    fn paraphrase(&self, id: &str, text: &str, n: usize) -> Result<Vec<String>, ProviderError> {
        (**self).paraphrase(id, text, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Synthetic samples generated per original sample.
    pub count_per_sample: usize,
    /// Probability that a generated sample gets masked at all.
    pub mask_sample_prob: f64,
    /// Fraction of unit positions masked when masking triggers.
    pub mask_unit_frac: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { count_per_sample: 10, mask_sample_prob: 0.5, mask_unit_frac: 0.5, seed: 0 }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        if self.count_per_sample == 0 {
            return Err(SynthError::ZeroCount);
        }
        if !prob(self.mask_sample_prob) || !prob(self.mask_unit_frac) {
            return Err(SynthError::BadProbability);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("count_per_sample must be at least 1")]
    ZeroCount,
    #[error("masking probabilities must lie in [0, 1]")]
    BadProbability,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Stream shared by all methods for the `k`-th copy, so that unit order is
/// identical across shuffle, shuffle+mask and paraphrase output.
fn copy_rng(config: &SynthConfig, sample: &Sample, k: usize) -> StreamRng {
    rng::stream(config.seed, sample.id(), k as u64)
}

fn derived(sample: &Sample, k: usize, tag: &str, origin: Origin, units: Vec<SourceUnit>, summary: String) -> Sample {
    let mut document = sample.document.clone();
    document.id = format!("{}#{tag}{}", sample.id(), k + 1);
    document.units = units;
    Sample { document, summary, origin, parent: Some(sample.root_id().to_string()) }
}

fn shuffled_units(sample: &Sample, rng: &mut StreamRng) -> Vec<SourceUnit> {
    let mut units = sample.document.units.clone();
    units.shuffle(rng);
    units
}

/// `count_per_sample` copies with uniformly permuted units and the original
/// summary. Ids are `{id}#shuf{k}` with `k` starting at 1.
pub fn synth_shuffle(sample: &Sample, config: &SynthConfig) -> Result<Vec<Sample>, SynthError> {
    config.validate()?;
    Ok((0..config.count_per_sample)
        .map(|k| {
            let units = shuffled_units(sample, &mut copy_rng(config, sample, k));
            derived(sample, k, "shuf", Origin::Shuffle, units, sample.summary.clone())
        })
        .collect())
}

/// Shuffled copies where, with probability `mask_sample_prob`, ⌈frac·|units|⌉
/// unit positions are replaced by the mask token. Shuffling happens first.
pub fn synth_shuffle_mask(sample: &Sample, config: &SynthConfig) -> Result<Vec<Sample>, SynthError> {
    config.validate()?;
    Ok((0..config.count_per_sample)
        .map(|k| {
            let mut rng = copy_rng(config, sample, k);
            let mut units = shuffled_units(sample, &mut rng);
            if rng.random::<f64>() < config.mask_sample_prob {
                let count = (math::ceil(config.mask_unit_frac * units.len() as f64) as usize).min(units.len());
                for pos in index::sample(&mut rng, units.len(), count) {
                    units[pos] = SourceUnit::from_trusted(MASK_TOKEN.to_string());
                }
            }
            derived(sample, k, "mask", Origin::ShuffleMask, units, sample.summary.clone())
        })
        .collect())
}

/// One copy per provider paraphrase of the summary, each with shuffled units.
/// Any provider failure or short answer aborts with no output.
pub fn synth_paraphrase<P: ParaphraseProvider + ?Sized>(
    sample: &Sample,
    config: &SynthConfig,
    provider: &P,
) -> Result<Vec<Sample>, SynthError> {
    config.validate()?;
    let n = config.count_per_sample;
    let paraphrases = provider.paraphrase(sample.id(), &sample.summary, n)?;
    if paraphrases.len() != n {
        return Err(ProviderError::WrongCount { id: sample.id().into(), expected: n, got: paraphrases.len() }.into());
    }
    if paraphrases.iter().any(|p| p.trim().is_empty()) {
        return Err(ProviderError::EmptyParaphrase { id: sample.id().into() }.into());
    }
    Ok(paraphrases
        .into_iter()
        .enumerate()
        .map(|(k, summary)| {
            let units = shuffled_units(sample, &mut copy_rng(config, sample, k));
            derived(sample, k, "para", Origin::Paraphrase, units, summary)
        })
        .collect())
}

/// Synthesis method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Shuffle,
    ShuffleMask,
    Paraphrase,
}

/// Applies `method` to every sample, concatenating outputs in input order.
pub fn synthesize_all<P: ParaphraseProvider + ?Sized>(
    samples: &[Sample],
    method: Method,
    config: &SynthConfig,
    provider: &P,
) -> Result<Vec<Sample>, SynthError> {
    let mut out = Vec::with_capacity(samples.len() * config.count_per_sample);
    for s in samples {
        out.extend(match method {
            Method::Shuffle => synth_shuffle(s, config)?,
            Method::ShuffleMask => synth_shuffle_mask(s, config)?,
            Method::Paraphrase => synth_paraphrase(s, config, provider)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn doc_sample(id: &str, units: &[&str]) -> Sample {
        Sample::new(Document::new(id, "g", units.iter().copied()).unwrap(), "the summary").unwrap()
    }

    fn multiset(units: &[SourceUnit]) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for u in units {
            *m.entry(u.text()).or_insert(0) += 1;
        }
        m
    }

    struct Fixed(Vec<String>);

    impl ParaphraseProvider for Fixed {
        fn paraphrase(&self, _: &str, _: &str, _: usize) -> Result<Vec<String>, ProviderError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn shuffle_makes_permutations_with_same_summary() {
        let s = doc_sample("d1", &["a", "b", "c", "d"]);
        let out = synth_shuffle(&s, &SynthConfig::default()).unwrap();
        assert_eq!(out.len(), 10);
        for (k, x) in out.iter().enumerate() {
            assert_eq!(multiset(&x.document.units), multiset(&s.document.units));
            assert_eq!(x.summary, s.summary);
            assert_eq!(x.origin, Origin::Shuffle);
            assert_eq!(x.id(), format!("d1#shuf{}", k + 1));
            assert_eq!(x.parent.as_deref(), Some("d1"));
        }
        assert!(out.iter().any(|x| x.document.units != s.document.units));
    }

    #[test]
    fn single_unit_shuffle_is_a_copy() {
        let s = doc_sample("d", &["only"]);
        for x in synth_shuffle(&s, &SynthConfig::default()).unwrap() {
            assert_eq!(x.document.units, s.document.units);
            assert_eq!(x.document.group, s.document.group);
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let s = doc_sample("d", &["a", "b", "c", "d", "e"]);
        let cfg = SynthConfig { seed: 42, ..Default::default() };
        assert_eq!(synth_shuffle(&s, &cfg).unwrap(), synth_shuffle(&s, &cfg).unwrap());
        assert_eq!(synth_shuffle_mask(&s, &cfg).unwrap(), synth_shuffle_mask(&s, &cfg).unwrap());
    }

    #[test]
    fn zero_mask_probability_matches_plain_shuffle() {
        let s = doc_sample("d", &["a", "b", "c", "d", "e", "f"]);
        let cfg = SynthConfig { mask_sample_prob: 0.0, seed: 5, ..Default::default() };
        let plain = synth_shuffle(&s, &cfg).unwrap();
        let masked = synth_shuffle_mask(&s, &cfg).unwrap();
        for (a, b) in plain.iter().zip(&masked) {
            assert_eq!(a.document.units, b.document.units);
            assert_eq!(a.summary, b.summary);
        }
    }

    #[test]
    fn saturated_masking_masks_everything() {
        let s = doc_sample("d", &["a", "b", "c"]);
        let cfg = SynthConfig { mask_sample_prob: 1.0, mask_unit_frac: 1.0, ..Default::default() };
        for x in synth_shuffle_mask(&s, &cfg).unwrap() {
            assert!(x.document.units.iter().all(|u| u.text() == MASK_TOKEN));
        }
    }

    #[test]
    fn masking_is_whole_unit_and_preserves_count() {
        let s = doc_sample("d", &["alpha beta", "gamma", "delta epsilon", "zeta"]);
        let cfg = SynthConfig { count_per_sample: 50, mask_sample_prob: 1.0, mask_unit_frac: 0.3, seed: 1 };
        for x in synth_shuffle_mask(&s, &cfg).unwrap() {
            assert_eq!(x.document.units.len(), 4);
            let masked = x.document.units.iter().filter(|u| u.text() == MASK_TOKEN).count();
            assert_eq!(masked, 2); // ceil(0.3 * 4)
            for u in &x.document.units {
                assert!(u.text() == MASK_TOKEN || s.document.units.contains(u));
            }
        }
    }

    #[test]
    fn paraphrase_uses_each_provider_output() {
        let s = doc_sample("d", &["a", "b", "c"]);
        let provider = Fixed(vec!["one".into(), "two".into()]);
        let cfg = SynthConfig { count_per_sample: 2, ..Default::default() };
        let out = synth_paraphrase(&s, &cfg, &provider).unwrap();
        assert_eq!(out.iter().map(|x| x.summary.as_str()).collect::<Vec<_>>(), ["one", "two"]);
        assert!(out.iter().all(|x| x.origin == Origin::Paraphrase));
        assert!(out.iter().all(|x| multiset(&x.document.units) == multiset(&s.document.units)));
    }

    #[test]
    fn short_or_empty_provider_answers_abort() {
        let s = doc_sample("d", &["a"]);
        let cfg = SynthConfig { count_per_sample: 5, ..Default::default() };
        let short = Fixed(vec!["a".into(), "b".into(), "c".into()]);
        assert!(matches!(
            synth_paraphrase(&s, &cfg, &short),
            Err(SynthError::Provider(ProviderError::WrongCount { expected: 5, got: 3, .. }))
        ));
        let blank = Fixed(vec!["a".into(), " ".into(), "c".into(), "d".into(), "e".into()]);
        assert!(matches!(
            synth_paraphrase(&s, &cfg, &blank),
            Err(SynthError::Provider(ProviderError::EmptyParaphrase { .. }))
        ));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let s = doc_sample("d", &["a"]);
        let zero = SynthConfig { count_per_sample: 0, ..Default::default() };
        assert_eq!(synth_shuffle(&s, &zero), Err(SynthError::ZeroCount));
        let bad = SynthConfig { mask_unit_frac: 1.5, ..Default::default() };
        assert_eq!(synth_shuffle_mask(&s, &bad), Err(SynthError::BadProbability));
    }

    #[test]
    fn synthesize_all_concatenates() {
        let samples = vec![doc_sample("a", &["x", "y"]), doc_sample("b", &["z"])];
        let cfg = SynthConfig { count_per_sample: 5, ..Default::default() };
        let out = synthesize_all(&samples, Method::Paraphrase, &cfg, &RuleParaphraser::new(3)).unwrap();
        assert_eq!(out.len(), 10);
        assert!(out[..5].iter().all(|x| x.parent.as_deref() == Some("a")));
    }
}
