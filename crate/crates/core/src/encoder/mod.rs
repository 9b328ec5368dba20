//! Hierarchical attention network over one side (removed or added code) of
//! one file.
//!
//! words --embedding--> word bi-GRU --attention--> line vectors
//!       --> line bi-GRU --attention--> hunk vectors
//!       --> hunk bi-GRU --attention--> side embedding `e` (width `2g`)

mod attention;
mod gru;

use rand::Rng;

pub use attention::{attention_pool, AttentionParams};
pub use gru::{encode_sequence, BiGruParams, GruParams};

use attention::{attention_backprop, attention_forward, AttentionCache};
use gru::{bigru_backprop, bigru_run, BiGruTrace};

use crate::corpus::PAD_ID;
use crate::error::{Error, Result};
use crate::tensor::{join, Parameters, Tensor};
use crate::tensorize::ShapeConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `|V^C| x d`
    pub embedding: Tensor,
    pub word_gru: BiGruParams,
    pub word_attention: AttentionParams,
    pub line_gru: BiGruParams,
    pub line_attention: AttentionParams,
    pub hunk_gru: BiGruParams,
    pub hunk_attention: AttentionParams,
}

impl EncoderParams {
    /// Weights and context vectors uniform in `[-0.1, 0.1)`, biases zero.
    pub fn init(vocab_size: usize, embed_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let n = 2 * hidden;
        EncoderParams {
            embedding: Tensor::uniform(&[vocab_size, embed_dim], 0.1, rng),
            word_gru: BiGruParams::init(embed_dim, hidden, rng),
            word_attention: AttentionParams::init(n, rng),
            line_gru: BiGruParams::init(n, hidden, rng),
            line_attention: AttentionParams::init(n, rng),
            hunk_gru: BiGruParams::init(n, hidden, rng),
            hunk_attention: AttentionParams::init(n, rng),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.shape()[0]
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.shape()[1]
    }

    /// Width of the side embedding, `2g`.
    pub fn output_width(&self) -> usize {
        self.hunk_gru.output_width()
    }

    /// Encode an `H x L x W` id block. Dropout is not applied here.
    pub fn encode_side(
        &self,
        block: &[u32],
        shape: ShapeConfig,
        mask_padding: bool,
    ) -> Result<(Vec<f64>, AttentionTrace)> {
        if block.len() != shape.side_len() {
            return Err(Error::shape(format!(
                "id block has {} entries, expected {}",
                block.len(),
                shape.side_len()
            )));
        }
        if let Some(&bad) = block.iter().find(|&&id| id as usize >= self.vocab_size()) {
            return Err(Error::shape(format!(
                "token id {bad} out of range for vocabulary of size {}",
                self.vocab_size()
            )));
        }
        let (e, cache) = self.forward_side(block, shape, mask_padding);
        Ok((e, cache.trace()))
    }

    pub(crate) fn forward_side(
        &self,
        block: &[u32],
        shape: ShapeConfig,
        mask_padding: bool,
    ) -> (Vec<f64>, SideCache) {
        let (h_n, l_n, w_n) = (shape.hunks, shape.lines, shape.words);
        let pad_of = |ids: &[u32]| ids.iter().all(|&id| id == PAD_ID);

        let mut word_levels = Vec::with_capacity(h_n * l_n);
        let mut hunk_inputs = Vec::with_capacity(h_n);
        let mut line_levels = Vec::with_capacity(h_n);
        let mut hunk_mask = Vec::with_capacity(h_n);
        for h in 0..h_n {
            let mut line_vectors = Vec::with_capacity(l_n);
            let mut line_mask = Vec::with_capacity(l_n);
            for l in 0..l_n {
                let ids = &block[(h * l_n + l) * w_n..(h * l_n + l + 1) * w_n];
                let inputs: Vec<Vec<f64>> = ids
                    .iter()
                    .map(|&id| self.embedding.row(id as usize).to_vec())
                    .collect();
                let mask = mask_padding
                    .then(|| ids.iter().map(|&id| id != PAD_ID).collect::<Vec<_>>());
                let (v, level) =
                    Level::forward(&self.word_gru, &self.word_attention, inputs, mask);
                line_vectors.push(v);
                line_mask.push(!pad_of(ids));
                word_levels.push(level);
            }
            let hunk_ids = &block[h * l_n * w_n..(h + 1) * l_n * w_n];
            hunk_mask.push(!pad_of(hunk_ids));
            let (t, level) = Level::forward(
                &self.line_gru,
                &self.line_attention,
                line_vectors,
                mask_padding.then_some(line_mask),
            );
            hunk_inputs.push(t);
            line_levels.push(level);
        }
        let (e, hunk_level) = Level::forward(
            &self.hunk_gru,
            &self.hunk_attention,
            hunk_inputs,
            mask_padding.then_some(hunk_mask),
        );
        (
            e,
            SideCache {
                ids: block.to_vec(),
                words: word_levels,
                lines: line_levels,
                hunks: hunk_level,
            },
        )
    }

    pub(crate) fn backward_side(&self, cache: &SideCache, de: &[f64], grads: &mut EncoderParams) {
        let d_hunk_inputs =
            cache
                .hunks
                .backward(&self.hunk_gru, &self.hunk_attention, de, &mut grads.hunk_gru, &mut grads.hunk_attention);
        let l_n = cache.lines.first().map_or(0, |l| l.inputs.len());
        for (h, (line_level, dt)) in cache.lines.iter().zip(&d_hunk_inputs).enumerate() {
            let d_lines = line_level.backward(
                &self.line_gru,
                &self.line_attention,
                dt,
                &mut grads.line_gru,
                &mut grads.line_attention,
            );
            for (l, ds) in d_lines.iter().enumerate() {
                let word_level = &cache.words[h * l_n + l];
                let d_words = word_level.backward(
                    &self.word_gru,
                    &self.word_attention,
                    ds,
                    &mut grads.word_gru,
                    &mut grads.word_attention,
                );
                let w_n = d_words.len();
                for (w, dx) in d_words.iter().enumerate() {
                    let id = cache.ids[(h * l_n + l) * w_n + w] as usize;
                    crate::tensor::add_into(grads.embedding.row_mut(id), dx);
                }
            }
        }
    }
}

impl Parameters for EncoderParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "embedding"), &self.embedding);
        self.word_gru.visit(&join(prefix, "word_gru"), f);
        self.word_attention.visit(&join(prefix, "word_attention"), f);
        self.line_gru.visit(&join(prefix, "line_gru"), f);
        self.line_attention.visit(&join(prefix, "line_attention"), f);
        self.hunk_gru.visit(&join(prefix, "hunk_gru"), f);
        self.hunk_attention.visit(&join(prefix, "hunk_attention"), f);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        f(join(prefix, "embedding"), &mut self.embedding);
        self.word_gru.visit_mut(&join(prefix, "word_gru"), f);
        self.word_attention.visit_mut(&join(prefix, "word_attention"), f);
        self.line_gru.visit_mut(&join(prefix, "line_gru"), f);
        self.line_attention.visit_mut(&join(prefix, "line_attention"), f);
        self.hunk_gru.visit_mut(&join(prefix, "hunk_gru"), f);
        self.hunk_attention.visit_mut(&join(prefix, "hunk_attention"), f);
    }
}

/// Normalized attention weights at every level of one side.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    /// One vector of length `W` per line, `H x L` in total.
    pub words: Vec<Vec<f64>>,
    /// One vector of length `L` per hunk.
    pub lines: Vec<Vec<f64>>,
    /// Length `H`.
    pub hunks: Vec<f64>,
}

impl AttentionTrace {
    pub fn all(&self) -> impl Iterator<Item = &[f64]> {
        self.words
            .iter()
            .chain(self.lines.iter())
            .map(Vec::as_slice)
            .chain(std::iter::once(self.hunks.as_slice()))
    }
}

/// One bi-GRU + attention stage.
#[derive(Debug, Clone)]
pub(crate) struct Level {
    inputs: Vec<Vec<f64>>,
    gru: BiGruTrace,
    annotations: Vec<Vec<f64>>,
    attention: AttentionCache,
}

impl Level {
    fn forward(
        gru: &BiGruParams,
        attn: &AttentionParams,
        inputs: Vec<Vec<f64>>,
        mask: Option<Vec<bool>>,
    ) -> (Vec<f64>, Level) {
        let (annotations, gru_trace) = bigru_run(gru, &inputs);
        // a fully padded level falls back to unmasked attention
        let mask = mask.filter(|m| m.iter().any(|&b| b));
        let (pooled, attention) = attention_forward(attn, &annotations, mask.as_deref());
        (
            pooled,
            Level {
                inputs,
                gru: gru_trace,
                annotations,
                attention,
            },
        )
    }

    fn backward(
        &self,
        gru: &BiGruParams,
        attn: &AttentionParams,
        dpooled: &[f64],
        ggru: &mut BiGruParams,
        gattn: &mut AttentionParams,
    ) -> Vec<Vec<f64>> {
        let dann = attention_backprop(attn, &self.annotations, &self.attention, dpooled, gattn);
        bigru_backprop(gru, &self.inputs, &self.gru, &dann, ggru)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SideCache {
    ids: Vec<u32>,
    words: Vec<Level>,
    lines: Vec<Level>,
    hunks: Level,
}

impl SideCache {
    pub(crate) fn trace(&self) -> AttentionTrace {
        AttentionTrace {
            words: self.words.iter().map(|l| l.attention.weights.clone()).collect(),
            lines: self.lines.iter().map(|l| l.attention.weights.clone()).collect(),
            hunks: self.hunks.attention.weights.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn enc(vocab: usize, d: usize, g: usize, seed: u64) -> EncoderParams {
        EncoderParams::init(vocab, d, g, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn output_width_is_two_g() {
        let p = enc(10, 3, 4, 1);
        let shape = ShapeConfig::new(1, 2, 2, 3);
        let block = vec![2, 3, 4, 5, 6, 7, 8, 9, 0, 0, 0, 1];
        let (e, trace) = p.encode_side(&block, shape, false).unwrap();
        assert_eq!(e.len(), 8);
        assert_eq!(trace.words.len(), 4);
        assert_eq!(trace.lines.len(), 2);
        assert_eq!(trace.hunks.len(), 2);
    }

    #[test]
    fn all_pad_inputs_are_indistinguishable() {
        let mut p = enc(6, 4, 3, 2);
        p.embedding.row_mut(PAD_ID as usize).fill(0.0);
        let shape = ShapeConfig::new(1, 2, 3, 4);
        let block = vec![PAD_ID; shape.side_len()];
        let (a, _) = p.encode_side(&block, shape, false).unwrap();
        let (b, _) = p.encode_side(&block, shape, false).unwrap();
        assert_eq!(a, b);
        // zero embedding + zero biases + zero initial state => exactly zero
        assert!(a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_blocks() {
        let p = enc(4, 2, 2, 3);
        let shape = ShapeConfig::new(1, 1, 1, 2);
        assert!(p.encode_side(&[0], shape, false).is_err());
        assert!(p.encode_side(&[0, 9], shape, false).is_err());
    }

    #[test]
    fn padding_mask_zeroes_pad_weights() {
        let p = enc(6, 3, 2, 4);
        let shape = ShapeConfig::new(1, 2, 2, 3);
        let mut block = vec![PAD_ID; shape.side_len()];
        block[0] = 2;
        block[1] = 3;
        let (_, trace) = p.encode_side(&block, shape, true).unwrap();
        assert_eq!(trace.words[0][2], 0.0);
        assert_eq!(trace.lines[0][1], 0.0);
        assert_eq!(trace.hunks[1], 0.0);
        // fully padded levels still produce a distribution
        for w in trace.all() {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    /// Straight-line scalar evaluation of the whole chain for d = 2, g = 2,
    /// H = L = W = 1, with every matrix written out explicitly.
    #[test]
    fn tiny_model_matches_hand_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let p = enc(3, 2, 2, 7);
        let mut p = p;
        // non-zero biases so that every term participates
        p.visit_mut("", &mut |name, t| {
            if name.ends_with(".b") || name.ends_with(".bias") {
                for v in t.data_mut() {
                    *v = rng.gen_range(-0.1..0.1);
                }
            }
        });
        let shape = ShapeConfig::new(1, 1, 1, 1);
        let (e, _) = p.encode_side(&[2], shape, false).unwrap();

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        // One step of a GRU from the zero state: h = z * n, reset irrelevant.
        let gru0 = |gp: &GruParams, x: &[f64]| -> [f64; 2] {
            let w = gp.w.data();
            let b = gp.b.data();
            let m = x.len();
            let row = |r: usize| -> f64 { (0..m).map(|c| w[r * m + c] * x[c]).sum::<f64>() + b[r] };
            let z = [sig(row(0)), sig(row(1))];
            let n = [row(4).tanh(), row(5).tanh()];
            [z[0] * n[0], z[1] * n[1]]
        };
        let bi = |bp: &BiGruParams, x: &[f64]| -> Vec<f64> {
            let f = gru0(&bp.forward, x);
            let b = gru0(&bp.backward, x);
            vec![f[0], f[1], b[0], b[1]]
        };
        // Single item: softmax weight 1, pooled = annotation.
        let x = p.embedding.row(2).to_vec();
        let s = bi(&p.word_gru, &x);
        let t = bi(&p.line_gru, &s);
        let expected = bi(&p.hunk_gru, &t);
        for (a, b) in e.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14, "{e:?} vs {expected:?}");
        }
    }
}
