use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use sumaug::checkpoint::{read_checkpoint, write_checkpoint, CheckpointError};
use sumaug::config::{ConfigError, ProviderKind, Regime, RegimeConfig, ScorerKind, KEYS};
use sumaug::io::{load_corpus, read_vocab, write_corpus, write_samples, write_vocab, DataError, LoadedCorpus};
use sumaug::pipeline::{evaluate_checkpoint, run_regime, PipelineError, Providers};
use sumaug::provider::ExternalProvider;
use sumaug::report::{read_report, render_table, write_report, ReportError};
use sumaug::{fixtures, pipeline};
use sumaug_core::curriculum::{bucketize, build_schedule, difficulties, CurriculumError, Metric};
use sumaug_core::rng::derive_seed;
use sumaug_core::rouge::rouge_suite;
use sumaug_core::specificity::{HeuristicScorer, ScorerError, SpecificityScorer};
use sumaug_core::synthesis::{synthesize_all, Method, ParaphraseProvider, ProviderError, RuleParaphraser, SynthError};
use sumaug_core::Split;

#[derive(Parser)]
#[command(name = "sumaug", version, about = "Data augmentation and curricula for small abstractive summarization corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Shuffle,
    ShuffleMask,
    Paraphrase,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    /// 368 reflection documents in four courses.
    Cm,
    /// 160 pre-split review products.
    Ay,
    /// 48 short reflection documents.
    Small,
    /// 16 hand-written samples.
    Toy,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Builtin,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Specificity,
    Rouge,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated corpus as one split-tagged JSONL file.
    Fixture {
        #[arg(value_enum)]
        shape: Shape,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Synthesize samples from the train split.
    Synth {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: SynthKind,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        provider: Option<ProviderArg>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score, bucket and schedule the train split.
    Curriculum {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        #[arg(long)]
        buckets: Option<usize>,
        /// Steps the schedule spans (defaults to train.finetune_steps).
        #[arg(long)]
        steps: Option<usize>,
        /// Schedule file.
        #[arg(long)]
        out: PathBuf,
        /// Also write per-sample difficulty scores as JSONL.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run a training regime and evaluate the selected checkpoint.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        regime: Option<Regime>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score a checkpoint on one split.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// ROUGE-1/2/L precision, recall and f1 between two text files.
    Rouge {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Merge report.json files into one results table.
    Report { reports: Vec<PathBuf> },
    /// List configuration keys with their defaults.
    Keys,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{0}")]
    Other(String),
}

fn provider_failure(e: &SynthError) -> bool {
    matches!(e, SynthError::Provider(_))
}

fn scorer_failure(e: &ScorerError) -> bool {
    matches!(e, ScorerError::Failed(_) | ScorerError::OutOfRange(_))
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Checkpoint(_) | CliError::Report(_) => 3,
            CliError::Provider(_) => 4,
            CliError::Pipeline(e) => match e {
                PipelineError::EmptySplit(_) => 3,
                PipelineError::Synth { source, .. } if provider_failure(source) => 4,
                PipelineError::Scorer { source, .. } if scorer_failure(source) => 4,
                PipelineError::Curriculum { source: CurriculumError::Scorer(s), .. } if scorer_failure(s) => 4,
                PipelineError::Curriculum { source: CurriculumError::TooFewSteps { .. }, .. } => 2,
                _ => 1,
            },
            CliError::Other(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn config(args: &ConfigArgs, flags: &[(&str, Option<String>)]) -> Result<RegimeConfig> {
    let mut overrides = args.overrides.clone();
    overrides.extend(flags.iter().filter_map(|(k, v)| v.as_ref().map(|v| format!("{k}={v}"))));
    let cfg = RegimeConfig::from_file(args.config.as_deref(), &overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn load(data: &Path, cfg: &RegimeConfig) -> Result<LoadedCorpus> {
    let loaded = load_corpus(data, cfg.ratios(), cfg.seed)?;
    for w in &loaded.warnings {
        warn!("{w:?}");
    }
    info!(
        "loaded {} samples ({}/{}/{}){}",
        loaded.corpus.len(),
        loaded.corpus.train.len(),
        loaded.corpus.val.len(),
        loaded.corpus.test.len(),
        if loaded.presplit { ", pre-split" } else { "" }
    );
    Ok(loaded)
}

fn paraphraser(cfg: &RegimeConfig) -> Result<Box<dyn ParaphraseProvider>> {
    Ok(match cfg.provider {
        ProviderKind::Builtin => Box::new(RuleParaphraser::new(derive_seed(cfg.seed, "paraphrase", 0))),
        ProviderKind::External => Box::new(ExternalProvider::from_env()?),
    })
}

fn external_scorer(cfg: &RegimeConfig) -> Result<Option<ExternalProvider>> {
    Ok(match cfg.scorer {
        ScorerKind::Heuristic => None,
        ScorerKind::External => Some(ExternalProvider::from_env()?),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.to_owned(), source })?;
    }
    fs::write(path, text).map_err(|source| DataError::Io { path: path.to_owned(), source }.into())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).map_err(|e| CliError::Other(e.to_string()))?);
        text.push('\n');
    }
    write_text(path, &text)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| DataError::Io { path: path.into(), source }.into())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fixture { shape, out, seed } => {
            let cfg = RegimeConfig::default();
            let corpus = match shape {
                Shape::Ay => fixtures::ay_shape(seed),
                other => {
                    let samples = match other {
                        Shape::Cm => fixtures::cm_shape(seed),
                        Shape::Small => fixtures::small(seed),
                        _ => fixtures::toy16(),
                    };
                    let split = sumaug_core::corpus::split_corpus(samples, cfg.ratios(), seed)
                        .map_err(|e| CliError::Other(e.to_string()))?;
                    split.corpus
                }
            };
            write_corpus(&out, &corpus)?;
            println!("{} samples written to {}", corpus.len(), out.display());
        }
        Command::Synth { input, method, n, seed, provider, out, cfg } => {
            let provider = provider.map(|p| match p {
                ProviderArg::Builtin => "builtin".to_owned(),
                ProviderArg::External => "external".to_owned(),
            });
            let cfg = config(
                &cfg,
                &[("synth.n", n.map(|n| n.to_string())), ("seed", seed.map(|s| s.to_string())), ("synth.provider", provider)],
            )?;
            let corpus = load(&input, &cfg)?.corpus;
            let provider = paraphraser(&cfg)?;
            let method = match method {
                SynthKind::Shuffle => Method::Shuffle,
                SynthKind::ShuffleMask => Method::ShuffleMask,
                SynthKind::Paraphrase => Method::Paraphrase,
            };
            let samples = synthesize_all(&corpus.train, method, &cfg.synth_config(), provider.as_ref())
                .map_err(|source| PipelineError::Synth { phase: "synth".into(), source })?;
            write_samples(&out, &samples, None)?;
            println!("{} synthetic samples written to {}", samples.len(), out.display());
        }
        Command::Curriculum { input, metric, buckets, steps, out, scores: scores_out, cfg } => {
            let metric = metric.map(|m| match m {
                MetricArg::Specificity => "specificity".to_owned(),
                MetricArg::Rouge => "rouge".to_owned(),
            });
            let cfg = config(&cfg, &[("curriculum.metric", metric), ("curriculum.buckets", buckets.map(|b| b.to_string()))])?;
            let corpus = load(&input, &cfg)?.corpus;
            let external = external_scorer(&cfg)?;
            let heuristic;
            let scorer: &dyn SpecificityScorer = match &external {
                Some(p) => p,
                None => {
                    heuristic = HeuristicScorer::fit(&corpus)
                        .map_err(|source| PipelineError::Scorer { phase: "curriculum".into(), source })?;
                    &heuristic
                }
            };
            let cur = |source| PipelineError::Curriculum { phase: "curriculum".into(), source };
            let scores = difficulties(&corpus.train, cfg.metric, scorer).map_err(cur)?;
            let assignment = bucketize(&scores, cfg.buckets).map_err(cur)?;
            let schedule = build_schedule(
                &assignment,
                steps.unwrap_or(cfg.finetune_steps),
                derive_seed(cfg.seed, "finetune-curriculum", 0),
            )
            .map_err(cur)?;
            if let Some(path) = scores_out {
                write_jsonl(&path, &scores)?;
            }
            write_json(&out, &schedule)?;
            println!(
                "{} samples in {} buckets ({}), written to {}",
                scores.len(),
                assignment.buckets,
                match cfg.metric {
                    Metric::Specificity => "specificity",
                    Metric::Rouge => "rouge",
                },
                out.display()
            );
        }
        Command::Train { input, regime, out, cfg } => {
            let cfg = config(&cfg, &[("regime", regime.map(|r| r.to_string()))])?;
            let corpus = load(&input, &cfg)?.corpus;
            let provider = paraphraser(&cfg)?;
            let external = external_scorer(&cfg)?;
            let providers = Providers {
                paraphraser: provider.as_ref(),
                scorer: external.as_ref().map(|p| p as &dyn SpecificityScorer),
            };
            let run = run_regime(&corpus, &cfg, &providers)?;
            pipeline::check_isolation(&run.provenance, &corpus).map_err(CliError::Other)?;
            write_checkpoint(&out.join("checkpoint.bin"), &run.checkpoint)?;
            write_vocab(&out.join("vocab.txt"), &run.vocab)?;
            write_report(&out.join("report.json"), &run.report)?;
            write_text(&out.join("report.md"), &render_table(std::slice::from_ref(&run.report)))?;
            write_jsonl(&out.join("provenance.jsonl"), &run.provenance)?;
            for (phase, schedule) in &run.schedules {
                write_json(&out.join(format!("schedule-{phase}.json")), schedule)?;
            }
            let pairs: String = run.report.config.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
            write_text(&out.join("config.txt"), &pairs)?;
            print!("{}", render_table(std::slice::from_ref(&run.report)));
        }
        Command::Eval { input, checkpoint, vocab, split, threads, cfg } => {
            let cfg = config(&cfg, &[])?;
            let corpus = load(&input, &cfg)?.corpus;
            let ckpt = read_checkpoint(&checkpoint)?;
            let vocab = read_vocab(&vocab)?;
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Val => Split::Val,
                SplitArg::Test => Split::Test,
            };
            let report = evaluate_checkpoint(&ckpt, &vocab, corpus.split(split), threads)
                .map_err(|source| PipelineError::Model { phase: "evaluate".into(), source })?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Other(e.to_string()))?);
        }
        Command::Rouge { candidate, reference } => {
            let s = rouge_suite(&read_text(&candidate)?, &read_text(&reference)?);
            for (name, r) in [("R1", s.r1), ("R2", s.r2), ("RL", s.rl)] {
                println!("{name}\t{:.4}\t{:.4}\t{:.4}", r.precision, r.recall, r.f1);
            }
        }
        Command::Report { reports } => {
            let loaded = reports.iter().map(|p| read_report(p)).collect::<std::result::Result<Vec<_>, _>>()?;
            print!("{}", render_table(&loaded));
        }
        Command::Keys => {
            for (key, default, doc) in KEYS {
                println!("{key:<24} {default:<12} {doc}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
