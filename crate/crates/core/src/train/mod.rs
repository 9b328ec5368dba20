//! Mini-batch training of the full model.

mod adam;
mod checkpoint;
mod gradcheck;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION, MAGIC};
pub use gradcheck::{
    check_gradients, gradient_check, jitter_parameters, relative_error, GradCheckReport, GroupReport, FD_STEP, REL_ERROR_FLOOR,
};

use crate::corpus::{message_labels, LabelVector, PatchChange, Vocabulary};
use crate::error::{Error, Result};
use crate::head::DropoutMasks;
use crate::model::{add_l2_gradient, Model, ModelConfig, ModelParams};
use crate::tensor::Parameters;
use crate::tensorize::{encode_change, ChangeTensor, ShapeConfig};

/// Patches whose gradients are accumulated into one buffer before the
/// buffers are summed in order. Fixed so results do not depend on the
/// number of worker threads.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// L2 coefficient λ; the objective carries `(λ/2)‖θ‖²`.
    pub lambda: f64,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    #[serde(flatten)]
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            lambda: 1e-5,
            dropout_rate: 0.5,
            batch_size: 32,
            epochs: 25,
            seed: 0,
            clip_norm: Some(5.0),
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be in [0, 1), got {v}")))
            }
        };
        unit("adam_beta1", self.adam_beta1)?;
        unit("adam_beta2", self.adam_beta2)?;
        unit("dropout_rate", self.dropout_rate)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::config(format!("adam_eps must be > 0, got {}", self.adam_eps)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::config(format!("clip_norm must be > 0, got {c}")));
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// One tensorized training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub tensor: ChangeTensor,
    pub labels: LabelVector,
}

/// Tensorize and label `patches` in parallel, preserving order.
pub fn prepare_examples(
    patches: &[PatchChange],
    shape: ShapeConfig,
    code_vocab: &Vocabulary,
    message_vocab: &Vocabulary,
) -> Vec<Example> {
    patches
        .par_iter()
        .map(|p| Example {
            id: p.id.clone(),
            tensor: encode_change(p, shape, code_vocab),
            labels: message_labels(p, message_vocab),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean training loss per epoch (data term per patch plus `(λ/2)‖θ‖²`).
    pub history: Vec<f64>,
    /// Examples excluded because no message word is in the vocabulary.
    pub skipped: usize,
}

/// Build vocabulary-aware examples and train from a fresh initialization.
pub fn train_model(
    patches: &[PatchChange],
    code_vocab: &Vocabulary,
    message_vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let examples = prepare_examples(patches, config.model.shape, code_vocab, message_vocab);
    let model = Model::init(config.model, code_vocab.len(), crate::corpus::label_width(message_vocab), config.seed)?;
    train(model, &examples, config, |_, _| {})
}

/// Train `model` on `examples`. `on_epoch(epoch, mean_loss)` runs after
/// every epoch.
pub fn train(
    mut model: Model,
    examples: &[Example],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    if model.config != config.model {
        return Err(Error::config("model configuration differs from training configuration"));
    }
    let trainable: Vec<&Example> = examples.iter().filter(|e| !e.labels.is_all_zero()).collect();
    let skipped = examples.len() - trainable.len();
    if trainable.is_empty() {
        return Err(Error::Corpus(
            "no trainable patch: every message lacks in-vocabulary words".to_string(),
        ));
    }
    if let Some(bad) = trainable.iter().find(|e| e.labels.len() != model.words()) {
        return Err(Error::shape(format!(
            "label vector of {} has width {}, model predicts {} words",
            bad.id,
            bad.labels.len(),
            model.words()
        )));
    }
    if skipped > 0 {
        log::info!("skipping {skipped} patches with no in-vocabulary message word");
    }

    let mut adam = Adam::new(config.adam(), &model.params);
    let mut order: Vec<usize> = (0..trainable.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(u64::MAX);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let (data, mut grads) = batch_gradient(&model, &trainable, batch, config, epoch);
            let reg = 0.5 * config.lambda * model.params.sq_norm();
            let loss = data + reg;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss });
            }
            add_l2_gradient(&mut grads, &model.params, config.lambda);
            if let Some(max) = config.clip_norm {
                clip_global_norm(&mut grads, max);
            }
            adam.step(&mut model.params, &grads);
            total += loss * batch.len() as f64;
        }
        let mean = total / trainable.len() as f64;
        log::info!("epoch {} loss {:.6}", epoch + 1, mean);
        history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(TrainOutcome {
        model,
        history,
        skipped,
    })
}

/// Mean data loss over the batch and its gradient (without the L2 term).
fn batch_gradient(
    model: &Model,
    examples: &[&Example],
    batch: &[usize],
    config: &TrainConfig,
    epoch: usize,
) -> (f64, ModelParams) {
    let weight = 1.0 / batch.len() as f64;
    let rate = config.dropout_rate;
    let e_p = model.config.patch_dim();
    let hidden = model.config.dims.hidden_dim;
    let parts: Vec<(f64, ModelParams)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = model.params.zeros_like();
            let mut loss = 0.0;
            for &i in chunk {
                let masks = (rate > 0.0).then(|| {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(((epoch as u64) << 32) | i as u64);
                    DropoutMasks::sample(rate, e_p, hidden, &mut rng)
                });
                let ex = examples[i];
                loss += model.accumulate_gradient(&ex.tensor, &ex.labels, masks, weight, &mut grads);
            }
            (loss, grads)
        })
        .collect();
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        grads.add_assign(&g);
    }
    (loss * weight, grads)
}

/// Rescale `grads` so its global L2 norm is at most `max`.
pub fn clip_global_norm<P: Parameters>(grads: &mut P, max: f64) -> f64 {
    let norm = grads.sq_norm().sqrt();
    if norm > max {
        grads.scale(max / norm);
    }
    norm
}
