use sumaug::config::{Regime, RegimeConfig};
use sumaug::fixtures;
use sumaug::pipeline::{run_regime, PipelineError, Providers, Role, RunOutput};
use sumaug::report::to_json;
use sumaug_core::corpus::{split_corpus, SplitRatios};
use sumaug_core::synthesis::RuleParaphraser;
use sumaug_core::{Corpus, Split};

fn corpus() -> Corpus {
    split_corpus(fixtures::small(4), SplitRatios::default(), 4).unwrap().corpus
}

fn config(regime: Regime, extra: &[&str]) -> RegimeConfig {
    let mut pairs = vec![
        "model.width=16",
        "model.ff_width=32",
        "model.max_src_len=96",
        "model.max_tgt_len=16",
        "train.batch_size=4",
        "train.eval_every=8",
        "train.pretrain_steps=16",
        "train.finetune_steps=16",
        "synth.n=3",
        "curriculum.buckets=4",
    ];
    pairs.extend_from_slice(extra);
    let overrides: Vec<String> = pairs.into_iter().map(String::from).collect();
    let mut cfg = RegimeConfig::from_text("", &overrides).unwrap();
    cfg.regime = regime;
    cfg.validate().unwrap();
    cfg
}

fn run(corpus: &Corpus, cfg: &RegimeConfig) -> RunOutput {
    let para = RuleParaphraser::new(1);
    run_regime(corpus, cfg, &Providers { paraphraser: &para, scorer: None }).unwrap()
}

#[test]
fn reruns_are_identical() {
    let c = corpus();
    let cfg = config(Regime::SynthThenCurriculumFinetune, &["eval.threads=3"]);
    let (a, b) = (run(&c, &cfg), run(&c, &cfg));
    assert_eq!(to_json(&a.report), to_json(&b.report));
    assert_eq!(a.provenance, b.provenance);
    assert_eq!(a.checkpoint, b.checkpoint);
    let other = run(&c, &config(Regime::SynthThenCurriculumFinetune, &["seed=9"]));
    assert_ne!(a.checkpoint, other.checkpoint);
}

#[test]
fn curriculum_batches_stay_in_their_stage() {
    let c = corpus();
    let out = run(&c, &config(Regime::Curriculum, &["curriculum.metric=rouge"]));
    assert_eq!(out.schedules.len(), 1);
    let mut seen_stage = 0;
    for r in &out.provenance {
        let (stage, bucket) = (r.stage.unwrap(), r.bucket.unwrap());
        assert!(bucket <= stage, "bucket {bucket} drawn in stage {stage}");
        assert!(stage >= seen_stage);
        seen_stage = stage;
    }
    assert_eq!(seen_stage, 4);
    assert_eq!(out.report.finetuning, "Cur.(R)");
}

#[test]
fn mixing_pairs_distinct_samples() {
    let c = corpus();
    let out = run(&c, &config(Regime::Mixgen, &[]));
    let log = &out.provenance;
    let mut pairs = 0;
    for (i, r) in log.iter().enumerate() {
        if r.role == Role::MixFirst {
            let partner = &log[i + 1];
            assert_eq!(partner.role, Role::MixSecond);
            assert_ne!(partner.sample_id, r.sample_id);
            pairs += 1;
        }
    }
    assert!(pairs > 0);
    assert!(log.iter().any(|r| r.role == Role::Plain));
}

#[test]
fn two_phase_shuffle_separates_data() {
    let c = corpus();
    let out = run(&c, &config(Regime::SynthShuffleMask, &["synth.two_phase=true"]));
    assert_eq!((out.report.pretraining.as_str(), out.report.finetuning.as_str()), ("shuff.+mask", "Original"));
    assert!(out.provenance.iter().filter(|r| r.phase == "pretrain").all(|r| r.origin.is_synthetic()));
    assert!(out.provenance.iter().filter(|r| r.phase == "finetune").all(|r| !r.origin.is_synthetic()));
    assert_eq!(out.report.selected.phase, "finetune");

    let single = run(&c, &config(Regime::SynthShuffle, &[]));
    let phases: Vec<&str> = single.report.phases.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(phases, ["train"]);
    assert_eq!(single.report.phases[0].pool, 4 * c.train.len());
}

#[test]
fn empty_validation_split_is_rejected() {
    let mut c = corpus();
    c.val.clear();
    let para = RuleParaphraser::new(1);
    let err = run_regime(&c, &config(Regime::Original, &[]), &Providers { paraphraser: &para, scorer: None });
    assert!(matches!(err, Err(PipelineError::EmptySplit(Split::Val))));
}
