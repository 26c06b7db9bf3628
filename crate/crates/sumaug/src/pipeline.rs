//! Training regimes: phase planning, batching, periodic validation,
//! checkpoint selection and evaluation.

use std::collections::{BTreeSet, HashMap};
use std::thread;

use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sumaug_core::curriculum::{bucketize, build_schedule, difficulties, CurriculumError, Schedule};
use sumaug_core::mixgen::{draw_lambda, select_partners, MixError};
use sumaug_core::model::{source_ids, Adam, Checkpoint, Instance, ModelError, Seq2Seq};
use sumaug_core::rng::{derive_seed, stream};
use sumaug_core::rouge::{rouge_suite, RougeSuite};
use sumaug_core::specificity::{HeuristicScorer, ScorerError, SpecificityScorer};
use sumaug_core::synthesis::{synthesize_all, Method, ParaphraseProvider, SynthError};
use sumaug_core::tokenizer::{build_vocab_from, TokenSeq, Vocab};
use sumaug_core::{Corpus, Document, Origin, Sample, Split};
use thiserror::Error;

use crate::config::{Regime, RegimeConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{phase}: synthesis failed: {source}")]
    Synth { phase: String, source: SynthError },
    #[error("{phase}: curriculum failed: {source}")]
    Curriculum { phase: String, source: CurriculumError },
    #[error("{phase}: specificity scorer failed: {source}")]
    Scorer { phase: String, source: ScorerError },
    #[error("{phase}: {source}")]
    Model { phase: String, source: ModelError },
    #[error("{phase}: {source}")]
    Mix { phase: String, source: MixError },
    #[error("the {0:?} split is empty")]
    EmptySplit(Split),
}

/// One training phase of a regime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    /// `pretrain`, `finetune`, or `train` for a single phase over original
    /// plus synthetic data.
    pub name: String,
    pub synthetic: Option<SynthMethod>,
    pub original: bool,
    pub curriculum: bool,
    pub mixing: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMethod {
    Shuffle,
    ShuffleMask,
    Paraphrase,
}

impl SynthMethod {
    fn method(self) -> Method {
        match self {
            SynthMethod::Shuffle => Method::Shuffle,
            SynthMethod::ShuffleMask => Method::ShuffleMask,
            SynthMethod::Paraphrase => Method::Paraphrase,
        }
    }
}

pub fn plan(cfg: &RegimeConfig) -> Vec<PhasePlan> {
    let phase = |name: &str, synthetic, original, curriculum, mixing, steps| PhasePlan {
        name: name.into(),
        synthetic,
        original,
        curriculum,
        mixing,
        steps,
    };
    let finetune = phase(
        "finetune",
        None,
        true,
        cfg.finetune_curriculum(),
        cfg.finetune_mixing(),
        cfg.finetune_steps,
    );
    let baseline = match cfg.regime {
        Regime::SynthShuffle => Some(SynthMethod::Shuffle),
        Regime::SynthShuffleMask => Some(SynthMethod::ShuffleMask),
        _ => None,
    };
    let pretrain = |m| phase("pretrain", Some(m), false, cfg.curriculum_pretrain, false, cfg.pretrain_steps);
    match (cfg.regime, baseline) {
        (_, Some(m)) if cfg.two_phase => vec![pretrain(m), finetune],
        (_, Some(m)) => vec![PhasePlan { name: "train".into(), synthetic: Some(m), ..finetune }],
        (Regime::PretrainParaphraseThenFinetune | Regime::SynthThenCurriculumFinetune, _) => {
            vec![pretrain(SynthMethod::Paraphrase), finetune]
        }
        _ => vec![finetune],
    }
}

fn synth_label(m: SynthMethod, n: usize) -> String {
    match m {
        SynthMethod::Shuffle => "shuff.".into(),
        SynthMethod::ShuffleMask => "shuff.+mask".into(),
        SynthMethod::Paraphrase => format!("Synth.(n={n})"),
    }
}

pub const SECTION_PLAIN: &str = "No Pretraining";
pub const SECTION_PRETRAINED: &str = "With synthetic data pretraining";

/// `(pretraining, finetuning)` row labels in the results table.
pub fn row_labels(cfg: &RegimeConfig) -> (String, String) {
    let phases = plan(cfg);
    let cur = format!("Cur.({})", cfg.metric.short());
    let pre = phases.iter().find(|p| p.name == "pretrain").map(|p| {
        let base = synth_label(p.synthetic.expect("pretraining is synthetic"), cfg.synth_n);
        if p.curriculum { format!("{base}+{cur}") } else { base }
    });
    let last = phases.last().expect("at least one phase");
    let fine = if last.curriculum {
        cur
    } else if last.mixing {
        format!("Mix(n={})", cfg.mix_partners)
    } else if let Some(m) = last.synthetic {
        synth_label(m, cfg.synth_n)
    } else {
        "Original".into()
    };
    (pre.unwrap_or_else(|| "None".into()), fine)
}

/// Mean ROUGE f1 values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Means {
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
}

impl Means {
    /// `mean(R1, R2, RL)`, the checkpoint selection criterion.
    pub fn avg(&self) -> f64 {
        (self.r1 + self.r2 + self.rl) / 3.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub count: usize,
    pub means: Means,
    pub samples: Vec<SampleScore>,
}

impl SplitReport {
    fn from_scores(samples: Vec<SampleScore>) -> Self {
        let n = samples.len();
        let mut means = Means::default();
        if n > 0 {
            for s in &samples {
                means.r1 += s.r1;
                means.r2 += s.r2;
                means.rl += s.rl;
            }
            means.r1 /= n as f64;
            means.r2 /= n as f64;
            means.rl /= n as f64;
        }
        Self { count: n, means, samples }
    }
}

/// Produces a summary for a document.
pub trait Summarizer: Sync {
    fn summarize(&self, document: &Document) -> String;
}

pub struct ModelSummarizer<'a> {
    pub model: &'a Seq2Seq,
    pub vocab: &'a Vocab,
}

impl Summarizer for ModelSummarizer<'_> {
    fn summarize(&self, document: &Document) -> String {
        self.model.greedy_decode(document, self.vocab, self.model.config().max_tgt_len)
    }
}

fn threads(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

/// Summarizes every sample and scores it against its reference. Decoding is
/// spread over `threads` workers (0 = available parallelism); results keep
/// sample order.
pub fn evaluate<S: Summarizer + ?Sized>(summarizer: &S, samples: &[Sample], threads_requested: usize) -> SplitReport {
    let score = |s: &Sample| {
        let RougeSuite { r1, r2, rl } = rouge_suite(&summarizer.summarize(&s.document), &s.summary);
        SampleScore { id: s.id().to_owned(), r1: r1.f1, r2: r2.f1, rl: rl.f1 }
    };
    let workers = threads(threads_requested).min(samples.len()).max(1);
    let scores = if workers == 1 {
        samples.iter().map(score).collect()
    } else {
        let chunk = samples.len().div_ceil(workers);
        thread::scope(|scope| {
            let handles: Vec<_> =
                samples.chunks(chunk).map(|c| scope.spawn(move || c.iter().map(score).collect::<Vec<_>>())).collect();
            handles.into_iter().flat_map(|h| h.join().expect("evaluation worker panicked")).collect()
        })
    };
    SplitReport::from_scores(scores)
}

pub fn evaluate_checkpoint(
    ckpt: &Checkpoint,
    vocab: &Vocab,
    samples: &[Sample],
    threads: usize,
) -> Result<SplitReport, ModelError> {
    let model = Seq2Seq::from_checkpoint(ckpt)?;
    Ok(evaluate(&ModelSummarizer { model: &model, vocab }, samples, threads))
}

/// A validation result with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub phase: String,
    pub step: usize,
    pub val: Means,
    pub checkpoint: Checkpoint,
}

/// The candidate with the highest `mean(R1, R2, RL)`; ties go to the
/// earliest step.
pub fn select_checkpoint(history: &[Candidate]) -> Option<&Candidate> {
    history.iter().fold(None, |best: Option<&Candidate>, c| match best {
        Some(b) if c.val.avg() < b.val.avg() || (c.val.avg() == b.val.avg() && c.step >= b.step) => Some(b),
        _ => Some(c),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Plain,
    MixFirst,
    MixSecond,
}

/// One consumed sample in one training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub phase: String,
    pub step: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stage: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bucket: Option<usize>,
    pub origin: Origin,
    pub sample_id: String,
    pub root_id: String,
    pub role: Role,
}

/// Checks the provenance log against the corpus: no validation or test
/// sample (or anything derived from one) is ever trained on, finetuning sees
/// only original samples and pretraining only synthetic ones.
pub fn check_isolation(log: &[BatchRecord], corpus: &Corpus) -> Result<(), String> {
    let held_out: BTreeSet<&str> = corpus.val.iter().chain(&corpus.test).map(Sample::id).collect();
    let train: BTreeSet<&str> = corpus.train.iter().map(Sample::id).collect();
    for r in log {
        let at = || format!("{} step {} sample {}", r.phase, r.step, r.sample_id);
        if held_out.contains(r.sample_id.as_str()) || held_out.contains(r.root_id.as_str()) {
            return Err(format!("held-out data trained on at {}", at()));
        }
        if !train.contains(r.root_id.as_str()) {
            return Err(format!("{} does not derive from the train split", at()));
        }
        match r.phase.as_str() {
            "finetune" if r.origin.is_synthetic() => return Err(format!("synthetic sample in finetuning at {}", at())),
            "pretrain" if !r.origin.is_synthetic() => return Err(format!("original sample in pretraining at {}", at())),
            _ => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub name: String,
    pub steps: usize,
    pub pool: usize,
    pub synthetic: usize,
    pub curriculum: bool,
    pub mixing: bool,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub phase: String,
    pub step: usize,
    pub val: Means,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub phase: String,
    pub step: usize,
    pub val_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub regime: Regime,
    pub section: String,
    pub pretraining: String,
    pub finetuning: String,
    pub selected: Selected,
    pub val: SplitReport,
    pub test: SplitReport,
    pub phases: Vec<PhaseSummary>,
    pub history: Vec<HistoryPoint>,
    pub config: Vec<(String, String)>,
}

/// Where synthetic data and specificity scores come from.
pub struct Providers<'a> {
    pub paraphraser: &'a dyn ParaphraseProvider,
    /// `None` fits the heuristic scorer on the train split.
    pub scorer: Option<&'a dyn SpecificityScorer>,
}

pub struct RunOutput {
    pub checkpoint: Checkpoint,
    pub vocab: Vocab,
    pub report: EvalReport,
    pub provenance: Vec<BatchRecord>,
    pub schedules: Vec<(String, Schedule)>,
}

struct Encoded {
    source: TokenSeq,
    summary: TokenSeq,
}

/// A phase's training pool with its token ids.
struct Pool {
    samples: Vec<Sample>,
    encoded: Vec<Encoded>,
    index: HashMap<String, usize>,
}

impl Pool {
    fn new(samples: Vec<Sample>, vocab: &Vocab) -> Self {
        let encoded = samples
            .iter()
            .map(|s| Encoded { source: source_ids(&s.document, vocab), summary: vocab.encode(&s.summary, false) })
            .collect();
        let index = samples.iter().enumerate().map(|(i, s)| (s.id().to_owned(), i)).collect();
        Self { samples, encoded, index }
    }
}

/// A training instance with the pool indices it was built from.
type Tagged = (Instance, Vec<(usize, Role)>);

enum Batcher {
    Epochs { order: Vec<usize>, pos: usize, epoch: u64 },
    Curriculum(Schedule),
    Mixing { queue: Vec<Tagged>, pos: usize, epoch: u64 },
}

struct Step {
    instances: Vec<Instance>,
    records: Vec<(usize, Role, Option<usize>, Option<usize>)>,
    stage: Option<usize>,
}

struct PhaseRunner<'a> {
    cfg: &'a RegimeConfig,
    phase: &'a PhasePlan,
    pool: &'a Pool,
    model_cfg: sumaug_core::model::ModelConfig,
}

impl PhaseRunner<'_> {
    fn seed(&self, label: &str) -> u64 {
        derive_seed(self.cfg.seed, &format!("{}-{label}", self.phase.name), 0)
    }

    fn epoch_order(&self, epoch: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.pool.samples.len()).collect();
        order.shuffle(&mut stream(self.seed("epoch"), "order", epoch));
        order
    }

    fn plain(&self, i: usize) -> Instance {
        let e = &self.pool.encoded[i];
        Instance::plain(&self.model_cfg, &e.source, &e.summary)
    }

    /// Every sample once plainly plus once mixed with each of its partners,
    /// in shuffled order.
    fn mixing_epoch(&self, epoch: u64) -> Result<Vec<Tagged>, MixError> {
        let n = self.pool.samples.len();
        let mix = self.cfg.mix_config();
        let mut out = Vec::with_capacity(n * (1 + mix.partners));
        for i in 0..n {
            out.push((self.plain(i), vec![(i, Role::Plain)]));
            let mut rng = stream(self.seed("mix"), "pair", epoch * n as u64 + i as u64);
            for j in select_partners(i, n, mix.partners, &mut rng) {
                let lambda = draw_lambda(mix.alpha, &mut rng)?;
                let (a, b) = (&self.pool.encoded[i], &self.pool.encoded[j]);
                let inst = Instance::mixed(
                    &self.model_cfg,
                    (&a.source, &a.summary),
                    (&b.source, &b.summary),
                    lambda,
                    mix.mix_layer,
                    &mut rng,
                )
                .map_err(|e| match e {
                    ModelError::Mix(m) => m,
                    other => unreachable!("mix layer validated: {other}"),
                })?;
                out.push((inst, vec![(i, Role::MixFirst), (j, Role::MixSecond)]));
            }
        }
        out.shuffle(&mut stream(self.seed("mix"), "order", epoch));
        Ok(out)
    }

    fn next(&self, batcher: &mut Batcher, step: usize) -> Result<Step, MixError> {
        let size = self.cfg.batch_size;
        let mut out = Step { instances: Vec::with_capacity(size), records: Vec::new(), stage: None };
        match batcher {
            Batcher::Epochs { order, pos, epoch } => {
                for _ in 0..size {
                    if *pos == order.len() {
                        *epoch += 1;
                        *order = self.epoch_order(*epoch);
                        *pos = 0;
                    }
                    let i = order[*pos];
                    *pos += 1;
                    out.instances.push(self.plain(i));
                    out.records.push((i, Role::Plain, None, None));
                }
            }
            Batcher::Curriculum(schedule) => {
                out.stage = schedule.stage_at(step);
                for (bucket, id) in schedule.draw_batch(step, size) {
                    let i = self.pool.index[&id];
                    out.instances.push(self.plain(i));
                    out.records.push((i, Role::Plain, out.stage, Some(bucket)));
                }
            }
            Batcher::Mixing { queue, pos, epoch } => {
                for _ in 0..size {
                    if *pos == queue.len() {
                        *epoch += 1;
                        *queue = self.mixing_epoch(*epoch)?;
                        *pos = 0;
                    }
                    let (inst, members) = &queue[*pos];
                    *pos += 1;
                    out.instances.push(inst.clone());
                    out.records.extend(members.iter().map(|&(i, role)| (i, role, None, None)));
                }
            }
        }
        Ok(out)
    }
}

/// Runs one regime end to end on `corpus`.
pub fn run_regime(corpus: &Corpus, cfg: &RegimeConfig, providers: &Providers<'_>) -> Result<RunOutput, PipelineError> {
    for split in [Split::Train, Split::Val] {
        if corpus.split(split).is_empty() {
            return Err(PipelineError::EmptySplit(split));
        }
    }
    let phases = plan(cfg);
    let synth_cfg = cfg.synth_config();

    // Synthetic data derives from the train split only.
    let mut pools_raw: Vec<(Vec<Sample>, usize)> = Vec::new();
    for p in &phases {
        let mut samples = if p.original { corpus.train.clone() } else { Vec::new() };
        let mut synthetic = 0;
        if let Some(m) = p.synthetic {
            let synth = synthesize_all(&corpus.train, m.method(), &synth_cfg, providers.paraphraser)
                .map_err(|source| PipelineError::Synth { phase: p.name.clone(), source })?;
            synthetic = synth.len();
            samples.extend(synth);
        }
        info!("{}: {} samples ({} synthetic)", p.name, samples.len(), synthetic);
        pools_raw.push((samples, synthetic));
    }
    let vocab = build_vocab_from(pools_raw.iter().flat_map(|(s, _)| s), cfg.min_freq);
    let model_cfg = cfg.model_config(vocab.len());
    let mut model = Seq2Seq::new(model_cfg.clone())
        .map_err(|source| PipelineError::Model { phase: "init".into(), source })?;
    info!("vocabulary {} tokens, model {} parameters", vocab.len(), model.params().numel());

    let heuristic;
    let scorer: &dyn SpecificityScorer = match providers.scorer {
        Some(s) => s,
        None => {
            heuristic = HeuristicScorer::fit(corpus)
                .map_err(|source| PipelineError::Scorer { phase: "init".into(), source })?;
            &heuristic
        }
    };

    let val_eval: &[Sample] = match cfg.val_limit {
        0 => &corpus.val,
        n => &corpus.val[..n.min(corpus.val.len())],
    };

    let mut provenance = Vec::new();
    let mut schedules = Vec::new();
    let mut history = Vec::new();
    let mut candidates = Vec::new();
    let mut summaries = Vec::new();
    let last_phase = phases.len() - 1;

    for (pi, (phase, (samples, synthetic))) in phases.iter().zip(pools_raw).enumerate() {
        let pool = Pool::new(samples, &vocab);
        let runner = PhaseRunner { cfg, phase, pool: &pool, model_cfg: model_cfg.clone() };
        let err_mix = |source| PipelineError::Mix { phase: phase.name.clone(), source };
        let mut batcher = if phase.curriculum {
            let scores = difficulties(&pool.samples, cfg.metric, scorer)
                .map_err(|source| PipelineError::Curriculum { phase: phase.name.clone(), source })?;
            let cur = |source| PipelineError::Curriculum { phase: phase.name.clone(), source };
            let assignment = bucketize(&scores, cfg.buckets).map_err(cur)?;
            let schedule = build_schedule(&assignment, phase.steps, runner.seed("curriculum")).map_err(cur)?;
            schedules.push((phase.name.clone(), schedule.clone()));
            Batcher::Curriculum(schedule)
        } else if phase.mixing {
            Batcher::Mixing { queue: runner.mixing_epoch(0).map_err(err_mix)?, pos: 0, epoch: 0 }
        } else {
            Batcher::Epochs { order: runner.epoch_order(0), pos: 0, epoch: 0 }
        };

        let mut opt = Adam::new(model.params(), cfg.optim_config(phase.steps));
        let mut loss = f64::NAN;
        for step in 0..phase.steps {
            let batch = runner.next(&mut batcher, step).map_err(err_mix)?;
            for &(i, role, stage, bucket) in &batch.records {
                let s = &pool.samples[i];
                provenance.push(BatchRecord {
                    phase: phase.name.clone(),
                    step,
                    stage,
                    bucket,
                    origin: s.origin,
                    sample_id: s.id().to_owned(),
                    root_id: s.root_id().to_owned(),
                    role,
                });
            }
            let stats = model
                .train_step(&batch.instances, &mut opt)
                .map_err(|source| PipelineError::Model { phase: phase.name.clone(), source })?;
            loss = stats.loss;
            debug!("{} step {} loss {:.4} lr {:.2e}", phase.name, step, stats.loss, stats.lr);
            let done = step + 1;
            if done % cfg.eval_every == 0 || done == phase.steps {
                let report = evaluate(&ModelSummarizer { model: &model, vocab: &vocab }, val_eval, cfg.threads);
                info!(
                    "{} step {done}: loss {loss:.4}, val R1 {:.4} R2 {:.4} RL {:.4}",
                    phase.name, report.means.r1, report.means.r2, report.means.rl
                );
                history.push(HistoryPoint { phase: phase.name.clone(), step: done, val: report.means });
                if pi == last_phase {
                    candidates.push(Candidate {
                        phase: phase.name.clone(),
                        step: done,
                        val: report.means,
                        checkpoint: model.to_checkpoint(done as u64, Some(report.means.avg())),
                    });
                }
            }
        }
        summaries.push(PhaseSummary {
            name: phase.name.clone(),
            steps: phase.steps,
            pool: pool.samples.len(),
            synthetic,
            curriculum: phase.curriculum,
            mixing: phase.mixing,
            final_loss: loss,
        });
    }

    let best = select_checkpoint(&candidates).expect("the final phase evaluates at least once").clone();
    let model_err = |source| PipelineError::Model { phase: "evaluate".into(), source };
    let val = evaluate_checkpoint(&best.checkpoint, &vocab, &corpus.val, cfg.threads).map_err(model_err)?;
    let test = evaluate_checkpoint(&best.checkpoint, &vocab, &corpus.test, cfg.threads).map_err(model_err)?;
    let (pretraining, finetuning) = row_labels(cfg);
    let section = if pretraining == "None" { SECTION_PLAIN } else { SECTION_PRETRAINED };
    let report = EvalReport {
        regime: cfg.regime,
        section: section.into(),
        pretraining,
        finetuning,
        selected: Selected { phase: best.phase.clone(), step: best.step, val_mean: best.val.avg() },
        val,
        test,
        phases: summaries,
        history,
        config: cfg.to_pairs(),
    };
    Ok(RunOutput { checkpoint: best.checkpoint, vocab, report, provenance, schedules })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sumaug_core::model::ModelConfig;

    fn cfg(regime: Regime) -> RegimeConfig {
        RegimeConfig { regime, ..RegimeConfig::default() }
    }

    #[test]
    fn phase_plans() {
        let names = |c: &RegimeConfig| plan(c).iter().map(|p| p.name.clone()).collect::<Vec<_>>();
        assert_eq!(names(&cfg(Regime::Original)), ["finetune"]);
        assert_eq!(names(&cfg(Regime::SynthShuffle)), ["train"]);
        assert_eq!(names(&RegimeConfig { two_phase: true, ..cfg(Regime::SynthShuffleMask) }), ["pretrain", "finetune"]);
        assert_eq!(names(&cfg(Regime::PretrainParaphraseThenFinetune)), ["pretrain", "finetune"]);
        let p = plan(&cfg(Regime::SynthThenCurriculumFinetune));
        assert!(!p[0].curriculum && p[1].curriculum && p[0].synthetic == Some(SynthMethod::Paraphrase));
        assert!(plan(&cfg(Regime::Mixgen))[0].mixing);
    }

    #[test]
    fn table_labels() {
        let l = |c: RegimeConfig| row_labels(&c);
        assert_eq!(l(cfg(Regime::Original)), ("None".into(), "Original".into()));
        assert_eq!(l(cfg(Regime::SynthShuffle)), ("None".into(), "shuff.".into()));
        assert_eq!(l(cfg(Regime::SynthShuffleMask)), ("None".into(), "shuff.+mask".into()));
        assert_eq!(l(cfg(Regime::Curriculum)), ("None".into(), "Cur.(S)".into()));
        assert_eq!(l(cfg(Regime::Mixgen)), ("None".into(), "Mix(n=3)".into()));
        assert_eq!(l(cfg(Regime::PretrainParaphraseThenFinetune)), ("Synth.(n=10)".into(), "Original".into()));
        let rouge = RegimeConfig { metric: sumaug_core::curriculum::Metric::Rouge, ..cfg(Regime::SynthThenCurriculumFinetune) };
        assert_eq!(l(rouge), ("Synth.(n=10)".into(), "Cur.(R)".into()));
        assert_eq!(l(RegimeConfig { two_phase: true, ..cfg(Regime::SynthShuffle) }), ("shuff.".into(), "Original".into()));
    }

    fn candidate(step: usize, mean: f64, ckpt: &Checkpoint) -> Candidate {
        Candidate { phase: "finetune".into(), step, val: Means { r1: mean, r2: mean, rl: mean }, checkpoint: ckpt.clone() }
    }

    #[test]
    fn selection_takes_best_then_earliest() {
        let model = Seq2Seq::new(ModelConfig { max_src_len: 4, max_tgt_len: 4, width: 4, ..ModelConfig::with_vocab(6) }).unwrap();
        let ck = model.to_checkpoint(0, None);
        let h = [candidate(100, 0.2, &ck), candidate(200, 0.5, &ck), candidate(300, 0.3, &ck)];
        assert_eq!(select_checkpoint(&h).unwrap().step, 200);
        let tie = [candidate(200, 0.4, &ck), candidate(100, 0.4, &ck)];
        assert_eq!(select_checkpoint(&tie).unwrap().step, 100);
        assert_eq!(select_checkpoint(&h[..1]).unwrap().step, 100);
        assert!(select_checkpoint(&[]).is_none());
    }

    struct Echo<'a>(&'a [Sample]);

    impl Summarizer for Echo<'_> {
        fn summarize(&self, d: &Document) -> String {
            self.0.iter().find(|s| s.id() == d.id).map(|s| s.summary.clone()).unwrap_or_default()
        }
    }

    struct Silent;

    impl Summarizer for Silent {
        fn summarize(&self, _: &Document) -> String {
            String::new()
        }
    }

    #[test]
    fn evaluation_bounds_and_aggregation() {
        let samples = crate::fixtures::toy16();
        let top = evaluate(&Echo(&samples), &samples, 3);
        assert_eq!(top.means, Means { r1: 1.0, r2: 1.0, rl: 1.0 });
        let bottom = evaluate(&Silent, &samples, 1);
        assert_eq!(bottom.means, Means::default());
        assert_eq!(top.samples.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), samples.iter().map(Sample::id).collect::<Vec<_>>());
    }
}
