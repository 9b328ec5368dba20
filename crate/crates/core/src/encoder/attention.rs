//! Context-vector attention pooling.
//!
//! `u_k = ReLU(W h_k + b)`, `α = softmax_k(u_k · c)`, output `Σ α_k h_k`.

use rand::Rng;

use crate::tensor::{add_into, add_matvec_t, add_outer, affine, dot, join, relu, Parameters, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `a x a` projection, `a` = annotation width.
    pub proj: Tensor,
    pub bias: Tensor,
    pub context: Tensor,
}

impl AttentionParams {
    pub fn init(width: usize, rng: &mut impl Rng) -> Self {
        AttentionParams {
            proj: Tensor::uniform(&[width, width], 0.1, rng),
            bias: Tensor::zeros(&[width]),
            context: Tensor::uniform(&[width], 0.1, rng),
        }
    }

    pub fn width(&self) -> usize {
        self.context.len()
    }
}

impl Parameters for AttentionParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "proj"), &self.proj);
        f(join(prefix, "bias"), &self.bias);
        f(join(prefix, "context"), &self.context);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        f(join(prefix, "proj"), &mut self.proj);
        f(join(prefix, "bias"), &mut self.bias);
        f(join(prefix, "context"), &mut self.context);
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    pre: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
    pub(crate) weights: Vec<f64>,
}

/// Softmax over `scores`, restricted to positions where `mask` is true.
/// Masked-out positions get weight 0.
pub(crate) fn masked_softmax(scores: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let keep = |k: usize| mask.is_none_or(|m| m[k]);
    let max = scores
        .iter()
        .enumerate()
        .filter(|(k, _)| keep(*k))
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores
        .iter()
        .enumerate()
        .map(|(k, &s)| if keep(k) { (s - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub(crate) fn attention_forward(
    p: &AttentionParams,
    annotations: &[Vec<f64>],
    mask: Option<&[bool]>,
) -> (Vec<f64>, AttentionCache) {
    let a = p.width();
    let mut pre = Vec::with_capacity(annotations.len());
    let mut hidden = Vec::with_capacity(annotations.len());
    let mut scores = Vec::with_capacity(annotations.len());
    for h in annotations {
        let z = affine(p.proj.data(), Some(p.bias.data()), h, a);
        let u: Vec<f64> = z.iter().map(|&v| relu(v)).collect();
        scores.push(dot(&u, p.context.data()));
        pre.push(z);
        hidden.push(u);
    }
    let weights = masked_softmax(&scores, mask);
    let mut out = vec![0.0; a];
    for (h, &w) in annotations.iter().zip(&weights) {
        for (o, &v) in out.iter_mut().zip(h) {
            *o += w * v;
        }
    }
    (
        out,
        AttentionCache {
            pre,
            hidden,
            weights,
        },
    )
}

pub(crate) fn attention_backprop(
    p: &AttentionParams,
    annotations: &[Vec<f64>],
    cache: &AttentionCache,
    dout: &[f64],
    grads: &mut AttentionParams,
) -> Vec<Vec<f64>> {
    let alpha = &cache.weights;
    let dalpha: Vec<f64> = annotations.iter().map(|h| dot(dout, h)).collect();
    let mean: f64 = alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
    let mut dhs = Vec::with_capacity(annotations.len());
    for (k, h) in annotations.iter().enumerate() {
        let mut dh: Vec<f64> = dout.iter().map(|d| d * alpha[k]).collect();
        let ds = alpha[k] * (dalpha[k] - mean);
        if ds != 0.0 {
            add_into(
                grads.context.data_mut(),
                &cache.hidden[k].iter().map(|u| u * ds).collect::<Vec<_>>(),
            );
            let dpre: Vec<f64> = cache.pre[k]
                .iter()
                .zip(p.context.data())
                .map(|(&z, &c)| if z > 0.0 { ds * c } else { 0.0 })
                .collect();
            add_outer(grads.proj.data_mut(), &dpre, h);
            add_into(grads.bias.data_mut(), &dpre);
            add_matvec_t(p.proj.data(), &dpre, &mut dh);
        }
        dhs.push(dh);
    }
    dhs
}

/// Pool `annotations` into one vector; also returns the attention weights.
pub fn attention_pool(annotations: &[Vec<f64>], block: &AttentionParams) -> (Vec<f64>, Vec<f64>) {
    let (out, cache) = attention_forward(block, annotations, None);
    (out, cache.weights)
}
