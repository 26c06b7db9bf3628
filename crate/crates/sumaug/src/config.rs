//! Run configuration: a flat `key = value` text format with dotted keys.
//!
//! `#` starts a comment; blank lines are ignored. Later assignments win, so
//! command-line overrides are applied by appending them. Every key is listed
//! in [`KEYS`] with its default.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sumaug_core::corpus::SplitRatios;
use sumaug_core::curriculum::Metric;
use sumaug_core::mixgen::MixConfig;
use sumaug_core::model::{ModelConfig, OptimConfig};
use sumaug_core::synthesis::SynthConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: expected {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// The seven training regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Original,
    SynthShuffle,
    SynthShuffleMask,
    PretrainParaphraseThenFinetune,
    Curriculum,
    Mixgen,
    SynthThenCurriculumFinetune,
}

impl Regime {
    pub const ALL: [Regime; 7] = [
        Regime::Original,
        Regime::SynthShuffle,
        Regime::SynthShuffleMask,
        Regime::PretrainParaphraseThenFinetune,
        Regime::Curriculum,
        Regime::Mixgen,
        Regime::SynthThenCurriculumFinetune,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Original => "original",
            Regime::SynthShuffle => "synth_shuffle",
            Regime::SynthShuffleMask => "synth_shuffle_mask",
            Regime::PretrainParaphraseThenFinetune => "pretrain_paraphrase_then_finetune",
            Regime::Curriculum => "curriculum",
            Regime::Mixgen => "mixgen",
            Regime::SynthThenCurriculumFinetune => "synth_then_curriculum_finetune",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown regime `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Builtin,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Heuristic,
    External,
}

/// `(key, default, description)` for every recognised key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("regime", "original", "training regime (see `Regime`)"),
    ("seed", "0", "seed for model init, batching, synthesis, curriculum and mixing"),
    ("split.train", "0.8", "train fraction when the corpus is not pre-split"),
    ("split.val", "0.1", "validation fraction"),
    ("split.test", "0.1", "test fraction"),
    ("vocab.min_freq", "1", "minimum token count for the vocabulary"),
    ("model.width", "64", "embedding and hidden width"),
    ("model.encoder_layers", "2", "encoder blocks"),
    ("model.decoder_layers", "2", "decoder blocks"),
    ("model.heads", "2", "attention heads (must divide width)"),
    ("model.ff_width", "128", "feed-forward hidden width"),
    ("model.max_src_len", "256", "source tokens kept per document"),
    ("model.max_tgt_len", "48", "target tokens including EOS"),
    ("optim.lr", "3e-4", "peak learning rate"),
    ("optim.warmup_frac", "0.05", "fraction of each phase's steps spent in linear warmup"),
    ("optim.clip_norm", "1.0", "global gradient-norm clip; 0 disables"),
    ("train.batch_size", "8", "instances per step"),
    ("train.eval_every", "200", "steps between validation evaluations"),
    ("train.pretrain_steps", "2000", "steps in the pretraining phase"),
    ("train.finetune_steps", "2000", "steps in the finetuning (or only) phase"),
    ("eval.val_limit", "0", "validation samples scored per evaluation; 0 means all"),
    ("eval.threads", "0", "decoding threads; 0 means available parallelism"),
    ("synth.n", "10", "synthetic samples per original"),
    ("synth.mask_prob", "0.5", "probability a shuffle+mask sample is masked"),
    ("synth.mask_frac", "0.5", "fraction of units masked when masking triggers"),
    ("synth.provider", "builtin", "paraphrase provider: builtin | external"),
    ("synth.two_phase", "false", "shuffle baselines pretrain on synthetic data instead of training on the union"),
    ("curriculum.metric", "specificity", "difficulty metric: specificity | rouge"),
    ("curriculum.buckets", "10", "difficulty buckets N"),
    ("curriculum.scorer", "heuristic", "specificity scorer: heuristic | external"),
    ("curriculum.pretrain", "false", "apply the curriculum to the pretraining phase"),
    ("curriculum.finetune", "false", "apply the curriculum to the finetuning phase (implied by curriculum regimes)"),
    ("mix.enabled", "false", "mix samples in the finetuning phase (implied by regime mixgen)"),
    ("mix.alpha", "0.75", "Beta(alpha, alpha) shape for lambda"),
    ("mix.partners", "3", "partners per sample per epoch"),
    ("mix.layer", "1", "encoder layer after which hidden states are mixed"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    pub regime: Regime,
    pub seed: u64,
    pub split: [f64; 3],
    pub min_freq: usize,
    pub width: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub ff_width: usize,
    pub max_src_len: usize,
    pub max_tgt_len: usize,
    pub lr: f64,
    pub warmup_frac: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub eval_every: usize,
    pub pretrain_steps: usize,
    pub finetune_steps: usize,
    pub val_limit: usize,
    pub threads: usize,
    pub synth_n: usize,
    pub mask_prob: f64,
    pub mask_frac: f64,
    pub provider: ProviderKind,
    pub two_phase: bool,
    pub metric: Metric,
    pub buckets: usize,
    pub scorer: ScorerKind,
    pub curriculum_pretrain: bool,
    pub curriculum_finetune: bool,
    pub mix_enabled: bool,
    pub mix_alpha: f64,
    pub mix_partners: usize,
    pub mix_layer: usize,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        let mut c = Self {
            regime: Regime::Original,
            seed: 0,
            split: [0.8, 0.1, 0.1],
            min_freq: 1,
            width: 0,
            encoder_layers: 0,
            decoder_layers: 0,
            heads: 0,
            ff_width: 0,
            max_src_len: 0,
            max_tgt_len: 0,
            lr: 0.0,
            warmup_frac: 0.0,
            clip_norm: 0.0,
            batch_size: 0,
            eval_every: 0,
            pretrain_steps: 0,
            finetune_steps: 0,
            val_limit: 0,
            threads: 0,
            synth_n: 0,
            mask_prob: 0.0,
            mask_frac: 0.0,
            provider: ProviderKind::Builtin,
            two_phase: false,
            metric: Metric::Specificity,
            buckets: 0,
            scorer: ScorerKind::Heuristic,
            curriculum_pretrain: false,
            curriculum_finetune: false,
            mix_enabled: false,
            mix_alpha: 0.0,
            mix_partners: 0,
            mix_layer: 0,
        };
        for (key, value, _) in KEYS {
            c.set(key, value).expect("defaults parse");
        }
        c
    }
}

fn parse<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into(), expected })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), value: value.into(), expected: "true or false" }),
    }
}

/// `key = value` pairs with their line numbers.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.into() });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.into() });
        }
        out.push((i + 1, k.to_owned(), v.to_owned()));
    }
    Ok(out)
}

impl RegimeConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value;
        match key {
            "regime" => {
                self.regime = v.parse().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: v.into(),
                    expected: "a regime name",
                })?
            }
            "seed" => self.seed = parse(key, v, "an unsigned integer")?,
            "split.train" => self.split[0] = parse(key, v, "a fraction")?,
            "split.val" => self.split[1] = parse(key, v, "a fraction")?,
            "split.test" => self.split[2] = parse(key, v, "a fraction")?,
            "vocab.min_freq" => self.min_freq = parse(key, v, "a positive integer")?,
            "model.width" => self.width = parse(key, v, "a positive integer")?,
            "model.encoder_layers" => self.encoder_layers = parse(key, v, "an integer")?,
            "model.decoder_layers" => self.decoder_layers = parse(key, v, "an integer")?,
            "model.heads" => self.heads = parse(key, v, "a positive integer")?,
            "model.ff_width" => self.ff_width = parse(key, v, "a positive integer")?,
            "model.max_src_len" => self.max_src_len = parse(key, v, "a positive integer")?,
            "model.max_tgt_len" => self.max_tgt_len = parse(key, v, "a positive integer")?,
            "optim.lr" => self.lr = parse(key, v, "a number")?,
            "optim.warmup_frac" => self.warmup_frac = parse(key, v, "a fraction")?,
            "optim.clip_norm" => self.clip_norm = parse(key, v, "a number")?,
            "train.batch_size" => self.batch_size = parse(key, v, "a positive integer")?,
            "train.eval_every" => self.eval_every = parse(key, v, "a positive integer")?,
            "train.pretrain_steps" => self.pretrain_steps = parse(key, v, "an integer")?,
            "train.finetune_steps" => self.finetune_steps = parse(key, v, "an integer")?,
            "eval.val_limit" => self.val_limit = parse(key, v, "an integer")?,
            "eval.threads" => self.threads = parse(key, v, "an integer")?,
            "synth.n" => self.synth_n = parse(key, v, "a positive integer")?,
            "synth.mask_prob" => self.mask_prob = parse(key, v, "a probability")?,
            "synth.mask_frac" => self.mask_frac = parse(key, v, "a fraction")?,
            "synth.provider" => {
                self.provider = match v {
                    "builtin" => ProviderKind::Builtin,
                    "external" => ProviderKind::External,
                    _ => return Err(ConfigError::BadValue { key: key.into(), value: v.into(), expected: "builtin or external" }),
                }
            }
            "synth.two_phase" => self.two_phase = parse_bool(key, v)?,
            "curriculum.metric" => {
                self.metric = match v {
                    "specificity" => Metric::Specificity,
                    "rouge" => Metric::Rouge,
                    _ => return Err(ConfigError::BadValue { key: key.into(), value: v.into(), expected: "specificity or rouge" }),
                }
            }
            "curriculum.buckets" => self.buckets = parse(key, v, "a positive integer")?,
            "curriculum.scorer" => {
                self.scorer = match v {
                    "heuristic" => ScorerKind::Heuristic,
                    "external" => ScorerKind::External,
                    _ => return Err(ConfigError::BadValue { key: key.into(), value: v.into(), expected: "heuristic or external" }),
                }
            }
            "curriculum.pretrain" => self.curriculum_pretrain = parse_bool(key, v)?,
            "curriculum.finetune" => self.curriculum_finetune = parse_bool(key, v)?,
            "mix.enabled" => self.mix_enabled = parse_bool(key, v)?,
            "mix.alpha" => self.mix_alpha = parse(key, v, "a positive number")?,
            "mix.partners" => self.mix_partners = parse(key, v, "a positive integer")?,
            "mix.layer" => self.mix_layer = parse(key, v, "an integer")?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Defaults, then `text`, then each `key=value` override in order.
    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (_, k, v) in parse_pairs(text)? {
            c.set(&k, &v)?;
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Syntax { line: 0, text: o.clone() })?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?,
            None => String::new(),
        };
        Self::from_text(&text, overrides)
    }

    pub fn ratios(&self) -> SplitRatios {
        SplitRatios { train: self.split[0], val: self.split[1], test: self.split[2] }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            width: self.width,
            encoder_layers: self.encoder_layers,
            decoder_layers: self.decoder_layers,
            attention_heads: self.heads,
            feedforward_width: self.ff_width,
            max_src_len: self.max_src_len,
            max_tgt_len: self.max_tgt_len,
            seed: self.seed,
        }
    }

    /// Optimizer settings for a phase of `steps` updates.
    pub fn optim_config(&self, steps: usize) -> OptimConfig {
        OptimConfig {
            lr: self.lr,
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
            ..OptimConfig::default()
        }
        .with_warmup_fraction(steps as u64, self.warmup_frac)
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            count_per_sample: self.synth_n,
            mask_sample_prob: self.mask_prob,
            mask_unit_frac: self.mask_frac,
            seed: self.seed,
        }
    }

    pub fn mix_config(&self) -> MixConfig {
        MixConfig { alpha: self.mix_alpha, mix_layer: self.mix_layer, partners: self.mix_partners, seed: self.seed }
    }

    /// Whether the finetuning phase follows a curriculum.
    pub fn finetune_curriculum(&self) -> bool {
        self.curriculum_finetune
            || matches!(self.regime, Regime::Curriculum | Regime::SynthThenCurriculumFinetune)
    }

    pub fn finetune_mixing(&self) -> bool {
        self.mix_enabled || self.regime == Regime::Mixgen
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.ratios().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.model_config(sumaug_core::tokenizer::RESERVED)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.synth_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.mix_config()
            .validate(self.encoder_layers)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("optim.lr must be a non-negative number, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.warmup_frac) {
            return bad("optim.warmup_frac must lie in [0, 1]".into());
        }
        if self.min_freq == 0 || self.batch_size == 0 || self.eval_every == 0 || self.buckets == 0 {
            return bad("vocab.min_freq, train.batch_size, train.eval_every and curriculum.buckets must be positive".into());
        }
        if self.finetune_steps == 0 {
            return bad("train.finetune_steps must be positive".into());
        }
        if self.finetune_curriculum() && self.finetune_mixing() {
            return bad("a phase cannot both follow a curriculum and mix samples".into());
        }
        let curriculum_steps = |steps: usize, name: &str| {
            if steps < self.buckets {
                Err(ConfigError::Invalid(format!(
                    "{name} ({steps}) must be at least curriculum.buckets ({}) for a curriculum phase",
                    self.buckets
                )))
            } else {
                Ok(())
            }
        };
        if self.finetune_curriculum() {
            curriculum_steps(self.finetune_steps, "train.finetune_steps")?;
        }
        if self.has_pretraining() {
            if self.pretrain_steps == 0 {
                return bad("train.pretrain_steps must be positive for a pretraining regime".into());
            }
            if self.curriculum_pretrain {
                curriculum_steps(self.pretrain_steps, "train.pretrain_steps")?;
            }
        }
        Ok(())
    }

    pub fn has_pretraining(&self) -> bool {
        match self.regime {
            Regime::PretrainParaphraseThenFinetune | Regime::SynthThenCurriculumFinetune => true,
            Regime::SynthShuffle | Regime::SynthShuffleMask => self.two_phase,
            Regime::Original | Regime::Curriculum | Regime::Mixgen => false,
        }
    }

    /// Every key with its effective value, in [`KEYS`] order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let b = |x: bool| x.to_string();
        KEYS.iter()
            .map(|(k, _, _)| {
                let v = match *k {
                    "regime" => self.regime.to_string(),
                    "seed" => self.seed.to_string(),
                    "split.train" => self.split[0].to_string(),
                    "split.val" => self.split[1].to_string(),
                    "split.test" => self.split[2].to_string(),
                    "vocab.min_freq" => self.min_freq.to_string(),
                    "model.width" => self.width.to_string(),
                    "model.encoder_layers" => self.encoder_layers.to_string(),
                    "model.decoder_layers" => self.decoder_layers.to_string(),
                    "model.heads" => self.heads.to_string(),
                    "model.ff_width" => self.ff_width.to_string(),
                    "model.max_src_len" => self.max_src_len.to_string(),
                    "model.max_tgt_len" => self.max_tgt_len.to_string(),
                    "optim.lr" => self.lr.to_string(),
                    "optim.warmup_frac" => self.warmup_frac.to_string(),
                    "optim.clip_norm" => self.clip_norm.to_string(),
                    "train.batch_size" => self.batch_size.to_string(),
                    "train.eval_every" => self.eval_every.to_string(),
                    "train.pretrain_steps" => self.pretrain_steps.to_string(),
                    "train.finetune_steps" => self.finetune_steps.to_string(),
                    "eval.val_limit" => self.val_limit.to_string(),
                    "eval.threads" => self.threads.to_string(),
                    "synth.n" => self.synth_n.to_string(),
                    "synth.mask_prob" => self.mask_prob.to_string(),
                    "synth.mask_frac" => self.mask_frac.to_string(),
                    "synth.provider" => match self.provider {
                        ProviderKind::Builtin => "builtin".into(),
                        ProviderKind::External => "external".into(),
                    },
                    "synth.two_phase" => b(self.two_phase),
                    "curriculum.metric" => match self.metric {
                        Metric::Specificity => "specificity".into(),
                        Metric::Rouge => "rouge".into(),
                    },
                    "curriculum.buckets" => self.buckets.to_string(),
                    "curriculum.scorer" => match self.scorer {
                        ScorerKind::Heuristic => "heuristic".into(),
                        ScorerKind::External => "external".into(),
                    },
                    "curriculum.pretrain" => b(self.curriculum_pretrain),
                    "curriculum.finetune" => b(self.curriculum_finetune),
                    "mix.enabled" => b(self.mix_enabled),
                    "mix.alpha" => self.mix_alpha.to_string(),
                    "mix.partners" => self.mix_partners.to_string(),
                    "mix.layer" => self.mix_layer.to_string(),
                    other => unreachable!("key {other} has no accessor"),
                };
                (k.to_string(), v)
            })
            .collect()
    }
}
