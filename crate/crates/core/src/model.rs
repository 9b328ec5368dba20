//! The complete code-change model: two hierarchical encoders (or one shared),
//! the comparison layer per file, fusion into `e_p` and the word-prediction head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compare::{file_embedding_backward, file_embedding_forward, CompareCache, ComparisonMask, ComparisonParams};
use crate::corpus::LabelVector;
use crate::encoder::{AttentionTrace, EncoderParams, SideCache};
use crate::error::{Error, Result};
use crate::head::{data_loss, head_backward, head_forward, DropoutMasks, HeadParams, PatchEmbedding};
use crate::tensor::{join, Parameters, Tensor};
use crate::tensorize::{ChangeTensor, ShapeConfig, Side};

/// Layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Dims {
    /// Word embedding width `d`.
    pub embed_dim: usize,
    /// GRU hidden width `g`; side embeddings have width `2g`.
    pub gru_hidden: usize,
    /// Number of neural-tensor-network slices `z`.
    pub ntn_slices: usize,
    pub hidden_dim: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            embed_dim: 64,
            gru_hidden: 32,
            ntn_slices: 64,
            hidden_dim: 256,
        }
    }
}

impl Dims {
    pub fn side_width(&self) -> usize {
        2 * self.gru_hidden
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub shape: ShapeConfig,
    pub dims: Dims,
    pub mask: ComparisonMask,
    /// Separate encoder weights for removed and added code.
    pub unshare_sides: bool,
    /// Exclude PAD positions from attention.
    pub mask_padding: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            shape: ShapeConfig::default(),
            dims: Dims::default(),
            mask: ComparisonMask::all(),
            unshare_sides: false,
            mask_padding: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        self.mask.validate()?;
        let d = &self.dims;
        if d.embed_dim == 0 || d.gru_hidden == 0 || d.ntn_slices == 0 || d.hidden_dim == 0 {
            return Err(Error::config(format!("all layer widths must be >= 1, got {d:?}")));
        }
        Ok(())
    }

    pub fn file_dim(&self) -> usize {
        self.mask.file_dim(self.dims.side_width(), self.dims.ntn_slices)
    }

    /// Width of `e_p`: `F * dim(e_f)`.
    pub fn patch_dim(&self) -> usize {
        self.shape.files * self.file_dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Encoder for removed code, and for added code unless `added` is set.
    pub encoder: EncoderParams,
    pub added_encoder: Option<EncoderParams>,
    pub compare: ComparisonParams,
    pub head: HeadParams,
}

impl ModelParams {
    pub fn encoder_for(&self, side: Side) -> &EncoderParams {
        match (side, &self.added_encoder) {
            (Side::Added, Some(e)) => e,
            _ => &self.encoder,
        }
    }

    fn encoder_for_mut(&mut self, side: Side) -> &mut EncoderParams {
        match (side, &mut self.added_encoder) {
            (Side::Added, Some(e)) => e,
            _ => &mut self.encoder,
        }
    }

    /// Overwrite every tensor named in `tensors`; all names must match and
    /// every model tensor must be provided.
    pub fn load_named(&mut self, mut tensors: std::collections::HashMap<String, Tensor>) -> Result<()> {
        let mut err = None;
        self.visit_mut("", &mut |name, t| {
            if err.is_some() {
                return;
            }
            match tensors.remove(&name) {
                Some(src) if src.shape() == t.shape() => *t = src,
                Some(src) => {
                    err = Some(Error::Checkpoint(format!(
                        "tensor {name} has shape {:?}, model expects {:?}",
                        src.shape(),
                        t.shape()
                    )))
                }
                None => err = Some(Error::Checkpoint(format!("missing tensor {name}"))),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if let Some(extra) = tensors.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
        }
        Ok(())
    }
}

impl Parameters for ModelParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.encoder.visit(&join(prefix, "encoder"), f);
        if let Some(e) = &self.added_encoder {
            e.visit(&join(prefix, "added_encoder"), f);
        }
        self.compare.visit(&join(prefix, "compare"), f);
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        self.encoder.visit_mut(&join(prefix, "encoder"), f);
        if let Some(e) = &mut self.added_encoder {
            e.visit_mut(&join(prefix, "added_encoder"), f);
        }
        self.compare.visit_mut(&join(prefix, "compare"), f);
        self.head.visit_mut(&join(prefix, "head"), f);
    }
}

struct FileCache {
    removed: SideCache,
    added: SideCache,
    compare: CompareCache,
}

struct ForwardCache {
    files: Vec<FileCache>,
    head: crate::head::HeadCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    /// Fresh parameters for a code vocabulary of `code_vocab` ids and
    /// `words` predicted message words.
    pub fn init(config: ModelConfig, code_vocab: usize, words: usize, seed: u64) -> Result<Model> {
        config.validate()?;
        if words == 0 {
            return Err(Error::config("message vocabulary has no predictable words"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.dims;
        let n = d.side_width();
        let encoder = EncoderParams::init(code_vocab, d.embed_dim, d.gru_hidden, &mut rng);
        let added_encoder = config
            .unshare_sides
            .then(|| EncoderParams::init(code_vocab, d.embed_dim, d.gru_hidden, &mut rng));
        let compare = ComparisonParams::init(n, d.ntn_slices, &config.mask, &mut rng);
        let head = HeadParams::init(config.patch_dim(), d.hidden_dim, words, &mut rng);
        Ok(Model {
            config,
            params: ModelParams {
                encoder,
                added_encoder,
                compare,
                head,
            },
        })
    }

    pub fn words(&self) -> usize {
        self.params.head.words()
    }

    fn check_input(&self, x: &ChangeTensor) -> Result<()> {
        if x.shape() != self.config.shape {
            return Err(Error::shape(format!(
                "change tensor shape {:?} does not match model shape {:?}",
                x.shape(),
                self.config.shape
            )));
        }
        let vocab = self.params.encoder.vocab_size();
        if let Some(&bad) = x.ids().iter().find(|&&id| id as usize >= vocab) {
            return Err(Error::shape(format!("token id {bad} out of range for vocabulary of size {vocab}")));
        }
        Ok(())
    }

    fn forward_files(&self, x: &ChangeTensor) -> (Vec<Vec<f64>>, Vec<FileCache>) {
        let shape = self.config.shape;
        let mp = self.config.mask_padding;
        let mut embs = Vec::with_capacity(shape.files);
        let mut caches = Vec::with_capacity(shape.files);
        for f in 0..shape.files {
            let (e_r, removed) = self
                .params
                .encoder_for(Side::Removed)
                .forward_side(x.side(f, Side::Removed), shape, mp);
            let (e_a, added) = self
                .params
                .encoder_for(Side::Added)
                .forward_side(x.side(f, Side::Added), shape, mp);
            let (e_f, compare) = file_embedding_forward(&e_r, &e_a, &self.params.compare, &self.config.mask);
            embs.push(e_f);
            caches.push(FileCache {
                removed,
                added,
                compare,
            });
        }
        (embs, caches)
    }

    fn forward(&self, x: &ChangeTensor, masks: Option<DropoutMasks>) -> ForwardCache {
        let (embs, files) = self.forward_files(x);
        let e_p = embs.concat();
        let head = head_forward(&e_p, &self.params.head, masks);
        ForwardCache { files, head }
    }

    /// The code-change vector `e_p` with per-file vectors. No dropout.
    pub fn embed(&self, x: &ChangeTensor) -> Result<PatchEmbedding> {
        self.check_input(x)?;
        let (embs, _) = self.forward_files(x);
        crate::head::fuse_files(&embs, self.config.shape.files)
    }

    pub fn predict(&self, x: &ChangeTensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward(x, None).head.probs().collect())
    }

    /// Attention weights for both sides of every file slot.
    pub fn attention(&self, x: &ChangeTensor) -> Result<Vec<[AttentionTrace; 2]>> {
        self.check_input(x)?;
        let (_, files) = self.forward_files(x);
        Ok(files
            .iter()
            .map(|c| [c.removed.trace(), c.added.trace()])
            .collect())
    }

    /// Summed word cross-entropy of one patch (no regularization).
    pub fn patch_loss(&self, x: &ChangeTensor, labels: &LabelVector, masks: Option<DropoutMasks>) -> f64 {
        data_loss(&self.forward(x, masks).head, labels.as_slice())
    }

    /// Accumulate `weight * ∂(patch loss)/∂θ` into `grads`; returns the
    /// unweighted patch loss.
    pub fn accumulate_gradient(
        &self,
        x: &ChangeTensor,
        labels: &LabelVector,
        masks: Option<DropoutMasks>,
        weight: f64,
        grads: &mut ModelParams,
    ) -> f64 {
        let cache = self.forward(x, masks);
        let loss = data_loss(&cache.head, labels.as_slice());
        let de_p = head_backward(&cache.head, labels.as_slice(), weight, &self.params.head, &mut grads.head);
        let dim_f = self.config.file_dim();
        for (f, fc) in cache.files.iter().enumerate() {
            let de_f = &de_p[f * dim_f..(f + 1) * dim_f];
            let (de_r, de_a) = file_embedding_backward(
                &fc.compare,
                de_f,
                &self.params.compare,
                &self.config.mask,
                &mut grads.compare,
            );
            self.params
                .encoder_for(Side::Removed)
                .backward_side(&fc.removed, &de_r, grads.encoder_for_mut(Side::Removed));
            self.params
                .encoder_for(Side::Added)
                .backward_side(&fc.added, &de_a, grads.encoder_for_mut(Side::Added));
        }
        loss
    }

    /// Mean patch loss over `batch` plus `(λ/2)‖θ‖²`, without dropout.
    pub fn objective(&self, batch: &[(ChangeTensor, LabelVector)], lambda: f64) -> f64 {
        let n = batch.len().max(1) as f64;
        let data: f64 = batch.iter().map(|(x, y)| self.patch_loss(x, y, None)).sum();
        data / n + 0.5 * lambda * self.params.sq_norm()
    }

    /// Gradient of [`Model::objective`].
    pub fn objective_gradient(&self, batch: &[(ChangeTensor, LabelVector)], lambda: f64) -> (f64, ModelParams) {
        let mut grads = self.params.zeros_like();
        let n = batch.len().max(1) as f64;
        let mut data = 0.0;
        for (x, y) in batch {
            data += self.accumulate_gradient(x, y, None, 1.0 / n, &mut grads);
        }
        add_l2_gradient(&mut grads, &self.params, lambda);
        (data / n + 0.5 * lambda * self.params.sq_norm(), grads)
    }
}

/// `grads += λ θ`.
pub(crate) fn add_l2_gradient(grads: &mut ModelParams, params: &ModelParams, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for (g, p) in grads.tensors_mut().into_iter().zip(params.tensors()) {
        for (gv, pv) in g.data_mut().iter_mut().zip(p.data()) {
            *gv += lambda * pv;
        }
    }
}
