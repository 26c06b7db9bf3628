use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::*;
use crate::rng::stream;
use crate::tokenizer::MASK;

fn tiny(layers: usize) -> ModelConfig {
    ModelConfig {
        vocab_size: 12,
        width: 16,
        encoder_layers: layers,
        decoder_layers: layers,
        attention_heads: 2,
        feedforward_width: 24,
        max_src_len: 8,
        max_tgt_len: 6,
        seed: 7,
    }
}

fn jitter(model: &mut Seq2Seq, seed: u64) {
    let mut rng = stream(seed, "jitter", 0);
    for m in model.params_mut().values_mut() {
        for x in &mut m.data {
            *x += rng.random_range(-0.2..0.2);
        }
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na + nb == 0.0 { 0.0 } else { diff / (na + nb) }
}

fn check_gradients(model: &mut Seq2Seq, batch: &[Instance]) {
    let (_, grads) = model.batch_gradient(batch).unwrap();
    let h = 1e-5;
    for p in 0..model.params().len() {
        let n = model.params().values()[p].data.len();
        let mut numeric = Vec::with_capacity(n);
        for i in 0..n {
            let orig = model.params().values()[p].data[i];
            model.params_mut().values_mut()[p].data[i] = orig + h;
            let up = model.batch_loss(batch).unwrap();
            model.params_mut().values_mut()[p].data[i] = orig - h;
            let down = model.batch_loss(batch).unwrap();
            model.params_mut().values_mut()[p].data[i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
        let err = rel_err(&grads.values()[p].data, &numeric);
        let name = &model.params().names()[p];
        assert!(err < 1e-4, "{name}: relative error {err:e}");
    }
}

#[test]
fn gradients_match_finite_differences() {
    let cfg = tiny(1);
    let mut model = Seq2Seq::new(cfg.clone()).unwrap();
    jitter(&mut model, 1);
    let mut rng = stream(3, "teacher", 0);
    let batch = vec![
        Instance::plain(&cfg, &[5, 6, 7, 8], &[9, 10]),
        Instance::mixed(&cfg, (&[5, 9, 11], &[6, 7, 8]), (&[10, 6, 7, 8, 5], &[11]), 0.7, 1, &mut rng).unwrap(),
        Instance::mixed(&cfg, (&[7, 7], &[5]), (&[8, 9, 10], &[9, 6]), 0.6, 0, &mut rng).unwrap(),
    ];
    check_gradients(&mut model, &batch);
}

#[test]
fn encoder_composes_at_every_layer() {
    let cfg = ModelConfig { encoder_layers: 3, max_src_len: 10, ..tiny(3) };
    let model = Seq2Seq::new(cfg.clone()).unwrap();
    let mut rng = stream(11, "src", 0);
    for trial in 0..5 {
        let len = 1 + trial * 2;
        let src: Vec<u32> = (0..len).map(|_| rng.random_range(5..12)).collect();
        let (full, mask) = model.encode(&src).unwrap();
        for k in 0..=cfg.encoder_layers {
            let h = model.encode_to_layer(&src, k).unwrap();
            let out = model.resume_encode(&h, &mask, k).unwrap();
            for (a, b) in out.data.iter().zip(&full.data) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn layer_zero_is_embedding_plus_position() {
    let cfg = tiny(2);
    let model = Seq2Seq::new(cfg.clone()).unwrap();
    let h = model.encode_to_layer(&[5, 6], 0).unwrap();
    assert_eq!(h.shape(), (cfg.max_src_len, cfg.width));
    let e = model.params().get(model.embed);
    let s = (cfg.width as f64).sqrt();
    assert_eq!(h.get(1, 3), s * e.get(6, 3) + model.positions.get(1, 3));
    assert_eq!(h.get(4, 0), s * e.get(PAD as usize, 0) + model.positions.get(4, 0));
}

#[test]
fn layer_and_shape_errors() {
    let model = Seq2Seq::new(tiny(2)).unwrap();
    assert!(matches!(model.encode_to_layer(&[5], 3), Err(ModelError::LayerOutOfRange { .. })));
    let bad = Matrix::zeros(8, 15);
    assert!(matches!(model.resume_encode(&bad, &[true; 8], 1), Err(ModelError::ShapeMismatch { .. })));
    let (enc, mask) = model.encode(&[5, 6]).unwrap();
    let long = vec![BOS; 7];
    assert!(matches!(model.decode_teacher_forced(&enc, &mask, &long), Err(ModelError::TooLong { .. })));
    assert!(matches!(model.encode_to_layer(&[99], 0), Err(ModelError::TokenOutOfRange { .. })));
}

#[test]
fn resume_at_top_is_identity() {
    let cfg = tiny(2);
    let model = Seq2Seq::new(cfg.clone()).unwrap();
    let h = model.encode_to_layer(&[5, 6, 7], 1).unwrap();
    let mask = model.source_mask(&[5, 6, 7]);
    assert_eq!(model.resume_encode(&h, &mask, cfg.encoder_layers).unwrap(), h);
}

#[test]
fn mixed_states_stay_finite() {
    let model = Seq2Seq::new(tiny(2)).unwrap();
    let mut rng = stream(5, "fuzz", 0);
    for _ in 0..50 {
        let a: Vec<u32> = (0..rng.random_range(1..9)).map(|_| rng.random_range(0..12)).collect();
        let b: Vec<u32> = (0..rng.random_range(1..9)).map(|_| rng.random_range(0..12)).collect();
        let lambda = rng.random_range(0.0..=1.0);
        let h = crate::mixgen::mix_hidden(&model.encode_to_layer(&a, 1).unwrap(), &model.encode_to_layer(&b, 1).unwrap(), lambda)
            .unwrap();
        let mask: Vec<bool> = model.source_mask(&a).iter().zip(model.source_mask(&b)).map(|(x, y)| *x || y).collect();
        assert!(model.resume_encode(&h, &mask, 1).unwrap().is_finite());
    }
}

#[test]
fn decoder_is_causal() {
    let model = Seq2Seq::new(tiny(2)).unwrap();
    let (enc, mask) = model.encode(&[5, 6, 7]).unwrap();
    let base = [BOS, 5, 6, 7, 8, 9];
    let logits = model.decode_teacher_forced(&enc, &mask, &base).unwrap();
    for j in 1..base.len() {
        let mut changed = base;
        changed[j] = 11;
        let other = model.decode_teacher_forced(&enc, &mask, &changed).unwrap();
        for i in 0..j {
            for (a, b) in logits.row(i).iter().zip(other.row(i)) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
    let one = model.decode_teacher_forced(&enc, &mask, &[BOS]).unwrap();
    assert_eq!(one.shape(), (1, 12));
}

#[test]
fn softmax_rows_sum_to_one() {
    let model = Seq2Seq::new(tiny(1)).unwrap();
    let (enc, mask) = model.encode(&[5, 6]).unwrap();
    let logits = model.decode_teacher_forced(&enc, &mask, &[BOS, 7, 8]).unwrap();
    let lp = crate::mixgen::log_softmax_rows(&logits);
    for r in 0..lp.rows {
        let s: f64 = lp.row(r).iter().map(|x| x.exp()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn padded_and_trimmed_sources_agree() {
    let cfg = tiny(2);
    let model = Seq2Seq::new(cfg.clone()).unwrap();
    let src = [5, 6, 7];
    let (full, mask) = model.encode(&src).unwrap();
    let (trim, _) = model.encoder_blocks(model.embed(&src), &[true; 3], 0..cfg.encoder_layers);
    assert_eq!(&full.data[..3 * cfg.width], &trim.data[..]);
    let a = model.decode_teacher_forced(&full, &mask, &[BOS, 8]).unwrap();
    let b = model.decode_teacher_forced(&trim, &[true; 3], &[BOS, 8]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn forward_is_deterministic_and_survives_checkpoints() {
    let cfg = tiny(2);
    let a = Seq2Seq::new(cfg.clone()).unwrap();
    let b = Seq2Seq::new(cfg).unwrap();
    assert_eq!(a.encode(&[5, 6]).unwrap(), b.encode(&[5, 6]).unwrap());
    let restored = Seq2Seq::from_checkpoint(&a.to_checkpoint(3, Some(0.4))).unwrap();
    let (ea, ma) = a.encode(&[5, 9, 10]).unwrap();
    let (eb, mb) = restored.encode(&[5, 9, 10]).unwrap();
    assert_eq!(ea, eb);
    assert_eq!(
        a.decode_teacher_forced(&ea, &ma, &[BOS, 5]).unwrap(),
        restored.decode_teacher_forced(&eb, &mb, &[BOS, 5]).unwrap()
    );
    assert_eq!(a.greedy_decode_ids(&[5, 6], 6).unwrap(), a.greedy_decode_ids(&[5, 6], 6).unwrap());
}

#[test]
fn checkpoint_layout_is_checked() {
    let a = Seq2Seq::new(tiny(2)).unwrap();
    let mut ck = a.to_checkpoint(0, None);
    ck.params.swap(0, 1);
    assert!(matches!(Seq2Seq::from_checkpoint(&ck), Err(ModelError::CheckpointMismatch(_))));
    let mut ck = a.to_checkpoint(0, None);
    ck.params.pop();
    assert!(Seq2Seq::from_checkpoint(&ck).is_err());
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let cfg = tiny(1);
    let mut model = Seq2Seq::new(cfg.clone()).unwrap();
    let before = model.params().clone();
    let mut opt = Adam::new(model.params(), OptimConfig { lr: 0.0, ..OptimConfig::default() });
    let batch = [Instance::plain(&cfg, &[5, 6], &[7])];
    let stats = model.train_step(&batch, &mut opt).unwrap();
    assert!(stats.loss.is_finite());
    assert_eq!(model.params(), &before);
}

#[test]
fn warmup_ramps_linearly() {
    let model = Seq2Seq::new(tiny(1)).unwrap();
    let opt = Adam::new(model.params(), OptimConfig { lr: 1.0, ..OptimConfig::default() }.with_warmup_fraction(100, 0.05));
    assert_eq!(opt.config().warmup_steps, 5);
    assert_eq!(opt.lr_at(0), 0.2);
    assert_eq!(opt.lr_at(4), 1.0);
    assert_eq!(opt.lr_at(50), 1.0);
}

#[test]
fn greedy_respects_length_limit() {
    let model = Seq2Seq::new(tiny(1)).unwrap();
    assert!(model.greedy_decode_ids(&[5, 6], 1).unwrap().len() <= 1);
    let out = model.greedy_decode_ids(&[5, 6], 100).unwrap();
    assert!(out.len() <= 6);
    assert!(!out.contains(&PAD) && !out.contains(&BOS));
}

#[test]
fn memorizes_a_single_pair() {
    let cfg = ModelConfig { width: 32, feedforward_width: 64, ..tiny(1) };
    let mut model = Seq2Seq::new(cfg.clone()).unwrap();
    let mut opt = Adam::new(model.params(), OptimConfig { lr: 3e-3, ..OptimConfig::default() });
    let batch = [Instance::plain(&cfg, &[5, 6, 7, 8], &[9, 10, 11])];
    let first = model.train_step(&batch, &mut opt).unwrap().loss;
    let mut last = first;
    for _ in 0..150 {
        last = model.train_step(&batch, &mut opt).unwrap().loss;
    }
    assert!(last < first * 0.1);
    assert_eq!(model.greedy_decode_ids(&[5, 6, 7, 8], 6).unwrap(), vec![9, 10, 11]);
}

#[test]
fn mixed_instance_with_masks_trains() {
    let cfg = tiny(1);
    let mut model = Seq2Seq::new(cfg.clone()).unwrap();
    let mut opt = Adam::new(model.params(), OptimConfig::default());
    let mut rng = stream(0, "t", 0);
    let inst = Instance::mixed(&cfg, (&[5, MASK, 7], &[8]), (&[9], &[10, 11]), 0.8, 1, &mut rng).unwrap();
    assert!(model.train_step(&[inst], &mut opt).unwrap().loss.is_finite());
    assert!(Instance::mixed(&cfg, (&[5], &[8]), (&[9], &[10]), 0.8, 2, &mut rng).is_err());
}
