//! Feature fusion and multi-label word prediction.

use rand::Rng;

use crate::corpus::LabelVector;
use crate::error::{Error, Result};
use crate::tensor::{add_into, add_matvec_t, add_outer, affine, dot, join, relu, sigmoid, Parameters, Tensor};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    /// `hidden_dim x dim(e_p)`
    pub hidden: Tensor,
    pub hidden_bias: Tensor,
    /// `|V^M| x hidden_dim`
    pub output: Tensor,
}

impl HeadParams {
    pub fn init(input: usize, hidden: usize, words: usize, rng: &mut impl Rng) -> Self {
        HeadParams {
            hidden: Tensor::uniform(&[hidden, input], 0.1, rng),
            hidden_bias: Tensor::zeros(&[hidden]),
            output: Tensor::uniform(&[words, hidden], 0.1, rng),
        }
    }

    pub fn input_width(&self) -> usize {
        self.hidden.shape()[1]
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden.shape()[0]
    }

    pub fn words(&self) -> usize {
        self.output.shape()[0]
    }
}

impl Parameters for HeadParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "hidden"), &self.hidden);
        f(join(prefix, "hidden_bias"), &self.hidden_bias);
        f(join(prefix, "output"), &self.output);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        f(join(prefix, "hidden"), &mut self.hidden);
        f(join(prefix, "hidden_bias"), &mut self.hidden_bias);
        f(join(prefix, "output"), &mut self.output);
    }
}

/// The code-change vector `e_p` and, optionally, the per-file vectors it was
/// built from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchEmbedding {
    pub vector: Vec<f64>,
    pub files: Option<Vec<Vec<f64>>>,
}

/// Concatenate exactly `files` file embeddings (padding slots included).
pub fn fuse_files(file_embs: &[Vec<f64>], files: usize) -> Result<PatchEmbedding> {
    if file_embs.len() != files {
        return Err(Error::shape(format!(
            "expected {files} file embeddings, got {}",
            file_embs.len()
        )));
    }
    if let Some(first) = file_embs.first() {
        if file_embs.iter().any(|f| f.len() != first.len()) {
            return Err(Error::shape("file embeddings have different widths"));
        }
    }
    Ok(PatchEmbedding {
        vector: file_embs.concat(),
        files: Some(file_embs.to_vec()),
    })
}

/// `p_i = σ(w_o[i] · ReLU(w_h e_p + b_h))`, one independent sigmoid per word.
pub fn predict_word_probs(e_p: &[f64], params: &HeadParams) -> Result<Vec<f64>> {
    if e_p.len() != params.input_width() {
        return Err(Error::shape(format!(
            "e_p has width {}, head expects {}",
            e_p.len(),
            params.input_width()
        )));
    }
    Ok(head_forward(e_p, params, None).probs().collect())
}

fn bce_term(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Summed binary cross-entropy over words plus `(λ/2) ‖θ‖²`.
pub fn loss(probs: &[f64], labels: &LabelVector, param_sq_norm: f64, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::config(format!("L2 coefficient must be >= 0, got {lambda}")));
    }
    if probs.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} probabilities for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let data: f64 = probs
        .iter()
        .zip(labels.as_slice())
        .map(|(&p, &y)| bce_term(p, y))
        .sum();
    Ok(data + 0.5 * lambda * param_sq_norm)
}

/// Inverted-dropout multipliers (0 or `1/(1-rate)`) for `e_p` and `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub e_p: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl DropoutMasks {
    pub fn sample(rate: f64, e_p: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let keep = 1.0 - rate;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect()
        };
        DropoutMasks {
            e_p: draw(e_p),
            hidden: draw(hidden),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct HeadCache {
    input: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    pub(crate) logits: Vec<f64>,
    masks: Option<DropoutMasks>,
}

impl HeadCache {
    pub(crate) fn probs(&self) -> impl Iterator<Item = f64> + '_ {
        self.logits.iter().map(|&x| sigmoid(x))
    }
}

pub(crate) fn head_forward(e_p: &[f64], params: &HeadParams, masks: Option<DropoutMasks>) -> HeadCache {
    let input: Vec<f64> = match &masks {
        Some(m) => e_p.iter().zip(&m.e_p).map(|(a, b)| a * b).collect(),
        None => e_p.to_vec(),
    };
    let hd = params.hidden_width();
    let hidden_pre = affine(params.hidden.data(), Some(params.hidden_bias.data()), &input, hd);
    let mut hidden: Vec<f64> = hidden_pre.iter().map(|&v| relu(v)).collect();
    if let Some(m) = &masks {
        for (h, k) in hidden.iter_mut().zip(&m.hidden) {
            *h *= k;
        }
    }
    let logits = (0..params.words())
        .map(|i| dot(params.output.row(i), &hidden))
        .collect();
    HeadCache {
        input,
        hidden_pre,
        hidden,
        logits,
        masks,
    }
}

/// Summed clamped BCE of one patch.
pub(crate) fn data_loss(cache: &HeadCache, labels: &[f64]) -> f64 {
    cache.probs().zip(labels).map(|(p, &y)| bce_term(p, y)).sum()
}

/// Gradient of [`data_loss`] scaled by `weight`; returns `d e_p`.
pub(crate) fn head_backward(
    cache: &HeadCache,
    labels: &[f64],
    weight: f64,
    params: &HeadParams,
    grads: &mut HeadParams,
) -> Vec<f64> {
    // inside the clamp, d/dx BCE(σ(x), y) = σ(x) - y; outside it is flat
    let dlogits: Vec<f64> = cache
        .probs()
        .zip(labels)
        .map(|(p, &y)| {
            if p > PROB_EPS && p < 1.0 - PROB_EPS {
                weight * (p - y)
            } else {
                0.0
            }
        })
        .collect();
    add_outer(grads.output.data_mut(), &dlogits, &cache.hidden);
    let mut dh = vec![0.0; params.hidden_width()];
    add_matvec_t(params.output.data(), &dlogits, &mut dh);
    if let Some(m) = &cache.masks {
        for (d, k) in dh.iter_mut().zip(&m.hidden) {
            *d *= k;
        }
    }
    let dpre: Vec<f64> = dh
        .iter()
        .zip(&cache.hidden_pre)
        .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
        .collect();
    add_outer(grads.hidden.data_mut(), &dpre, &cache.input);
    add_into(grads.hidden_bias.data_mut(), &dpre);
    let mut dinput = vec![0.0; params.input_width()];
    add_matvec_t(params.hidden.data(), &dpre, &mut dinput);
    if let Some(m) = &cache.masks {
        for (d, k) in dinput.iter_mut().zip(&m.e_p) {
            *d *= k;
        }
    }
    dinput
}
