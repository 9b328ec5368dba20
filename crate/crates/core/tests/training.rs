use std::time::Instant;

use ccvec_core::corpus::label_width;
use ccvec_core::synth::{overfit_corpus, tiny_train_config, toy_model_config};
use ccvec_core::train::{gradient_check, jitter_parameters, prepare_examples, train_model, TrainConfig};
use ccvec_core::Model;

#[test]
fn toy_model_gradients_match_finite_differences() {
    let (patches, vc, vm) = overfit_corpus();
    let cfg = toy_model_config();
    let mut model = Model::init(cfg, vc.len(), label_width(&vm), 3).unwrap();
    jitter_parameters(&mut model.params, 0.1, 17);
    let examples = prepare_examples(&patches[..3], cfg.shape, &vc, &vm);
    let batch: Vec<_> = examples.into_iter().map(|e| (e.tensor, e.labels)).collect();
    let start = Instant::now();
    let report = gradient_check(&model, &batch, 1e-3, 1e-3);
    for g in &report.groups {
        println!("{:40} {:6} rel {:.3e} abs {:.3e}", g.name, g.entries, g.max_rel_error, g.max_abs_error);
    }
    println!("{:?}", start.elapsed());
    assert!(report.passed());
}

#[test]
fn eight_patch_corpus_overfits() {
    let (patches, vc, vm) = overfit_corpus();
    let cfg = TrainConfig {
        epochs: 500,
        batch_size: 8,
        clip_norm: None,
        ..tiny_train_config()
    };
    let start = Instant::now();
    let out = train_model(&patches, &vc, &vm, &cfg).unwrap();
    println!("{:?} {:?}", start.elapsed(), out.history.iter().step_by(25).collect::<Vec<_>>());
    assert!(*out.history.last().unwrap() < 0.05);
}
