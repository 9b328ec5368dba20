//! Comparison functions contrasting the removed-code embedding `e_r` with the
//! added-code embedding `e_a`, and their concatenation into a file embedding.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{add_into, add_matvec_t, add_outer, affine, dot, join, l2_norm, relu, Parameters, Tensor};

/// Which comparison functions contribute to the file embedding.
///
/// `concat_only` is the "all removed" ablation: no comparison at all, the file
/// embedding is `e_r ⊕ e_a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonMask {
    pub nt: bool,
    pub nn: bool,
    pub sim: bool,
    pub sub: bool,
    pub mul: bool,
    #[serde(default)]
    pub concat_only: bool,
}

impl Default for ComparisonMask {
    fn default() -> Self {
        ComparisonMask::all()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonFn {
    Nt,
    Nn,
    Sim,
    Sub,
    Mul,
}

impl ComparisonFn {
    pub const ALL: [ComparisonFn; 5] = [
        ComparisonFn::Nt,
        ComparisonFn::Nn,
        ComparisonFn::Sim,
        ComparisonFn::Sub,
        ComparisonFn::Mul,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ComparisonFn::Nt => "nt",
            ComparisonFn::Nn => "nn",
            ComparisonFn::Sim => "sim",
            ComparisonFn::Sub => "sub",
            ComparisonFn::Mul => "mul",
        }
    }
}

impl fmt::Display for ComparisonFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ComparisonFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ComparisonFn::ALL
            .into_iter()
            .find(|c| c.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown comparison function {s:?} (expected nt, nn, sim, sub, mul)")))
    }
}

impl ComparisonMask {
    pub fn all() -> Self {
        ComparisonMask {
            nt: true,
            nn: true,
            sim: true,
            sub: true,
            mul: true,
            concat_only: false,
        }
    }

    pub fn concat_only() -> Self {
        ComparisonMask {
            nt: false,
            nn: false,
            sim: false,
            sub: false,
            mul: false,
            concat_only: true,
        }
    }

    /// Mask from the low five bits of `bits` in `nt, nn, sim, sub, mul` order.
    pub fn from_bits(bits: u8) -> Self {
        ComparisonMask {
            nt: bits & 1 != 0,
            nn: bits & 2 != 0,
            sim: bits & 4 != 0,
            sub: bits & 8 != 0,
            mul: bits & 16 != 0,
            concat_only: false,
        }
    }

    /// All functions except `disabled`.
    pub fn without(disabled: &[ComparisonFn]) -> Self {
        let mut m = ComparisonMask::all();
        for f in disabled {
            m.set(*f, false);
        }
        m
    }

    pub fn enabled(&self, f: ComparisonFn) -> bool {
        match f {
            ComparisonFn::Nt => self.nt,
            ComparisonFn::Nn => self.nn,
            ComparisonFn::Sim => self.sim,
            ComparisonFn::Sub => self.sub,
            ComparisonFn::Mul => self.mul,
        }
    }

    pub fn set(&mut self, f: ComparisonFn, on: bool) {
        match f {
            ComparisonFn::Nt => self.nt = on,
            ComparisonFn::Nn => self.nn = on,
            ComparisonFn::Sim => self.sim = on,
            ComparisonFn::Sub => self.sub = on,
            ComparisonFn::Mul => self.mul = on,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.concat_only && !ComparisonFn::ALL.iter().any(|&f| self.enabled(f)) {
            return Err(Error::config(
                "all comparison functions are disabled; use the concat-only ablation instead",
            ));
        }
        Ok(())
    }

    /// Width of the file embedding for side width `n` and `z` tensor slices.
    pub fn file_dim(&self, n: usize, z: usize) -> usize {
        if self.concat_only {
            return 2 * n;
        }
        let mut d = 0;
        if self.nt {
            d += z;
        }
        if self.nn {
            d += n;
        }
        if self.sim {
            d += 2;
        }
        if self.sub {
            d += n;
        }
        if self.mul {
            d += n;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtnParams {
    /// `z x n x n`
    pub tensor: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnnParams {
    /// `n x 2n`, applied to `e_a ⊕ e_r`.
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Learnable comparison parameters; absent when the function is masked off.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonParams {
    pub ntn: Option<NtnParams>,
    pub ffnn: Option<FfnnParams>,
}

impl ComparisonParams {
    pub fn init(n: usize, z: usize, mask: &ComparisonMask, rng: &mut impl Rng) -> Self {
        let ntn = (mask.nt && !mask.concat_only).then(|| NtnParams {
            tensor: Tensor::uniform(&[z, n, n], 0.1, rng),
            bias: Tensor::zeros(&[z]),
        });
        let ffnn = (mask.nn && !mask.concat_only).then(|| FfnnParams {
            weight: Tensor::uniform(&[n, 2 * n], 0.1, rng),
            bias: Tensor::zeros(&[n]),
        });
        ComparisonParams { ntn, ffnn }
    }
}

impl Parameters for ComparisonParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        if let Some(p) = &self.ntn {
            f(join(prefix, "ntn.tensor"), &p.tensor);
            f(join(prefix, "ntn.bias"), &p.bias);
        }
        if let Some(p) = &self.ffnn {
            f(join(prefix, "ffnn.weight"), &p.weight);
            f(join(prefix, "ffnn.bias"), &p.bias);
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        if let Some(p) = &mut self.ntn {
            f(join(prefix, "ntn.tensor"), &mut p.tensor);
            f(join(prefix, "ntn.bias"), &mut p.bias);
        }
        if let Some(p) = &mut self.ffnn {
            f(join(prefix, "ffnn.weight"), &mut p.weight);
            f(join(prefix, "ffnn.bias"), &mut p.bias);
        }
    }
}

fn check_widths(e_r: &[f64], e_a: &[f64]) -> Result<()> {
    if e_r.len() != e_a.len() {
        return Err(Error::shape(format!(
            "e_r has width {}, e_a has width {}",
            e_r.len(),
            e_a.len()
        )));
    }
    Ok(())
}

fn bilinear(slice: &[f64], e_r: &[f64], e_a: &[f64]) -> f64 {
    let n = e_r.len();
    (0..n)
        .map(|i| e_r[i] * dot(&slice[i * n..(i + 1) * n], e_a))
        .sum()
}

/// Neural tensor network: slice `i` is `ReLU(e_rᵀ T_i e_a + b_i)`.
pub fn compare_ntn(e_r: &[f64], e_a: &[f64], params: &NtnParams) -> Result<Vec<f64>> {
    check_widths(e_r, e_a)?;
    let n = e_r.len();
    let shape = params.tensor.shape();
    if shape[1] != n || shape[2] != n {
        return Err(Error::shape(format!("tensor slices are {}x{}, inputs have width {n}", shape[1], shape[2])));
    }
    Ok(ntn_pre(e_r, e_a, params).into_iter().map(relu).collect())
}

fn ntn_pre(e_r: &[f64], e_a: &[f64], params: &NtnParams) -> Vec<f64> {
    let n = e_r.len();
    let z = params.tensor.shape()[0];
    (0..z)
        .map(|i| {
            bilinear(&params.tensor.data()[i * n * n..(i + 1) * n * n], e_r, e_a)
                + params.bias.data()[i]
        })
        .collect()
}

/// Feed-forward layer over `e_a ⊕ e_r`.
pub fn compare_ffnn(e_r: &[f64], e_a: &[f64], params: &FfnnParams) -> Result<Vec<f64>> {
    check_widths(e_r, e_a)?;
    if params.weight.shape()[1] != 2 * e_r.len() {
        return Err(Error::shape(format!(
            "feed-forward weight expects input width {}, got {}",
            params.weight.shape()[1],
            2 * e_r.len()
        )));
    }
    Ok(ffnn_pre(e_r, e_a, params).into_iter().map(relu).collect())
}

fn ffnn_pre(e_r: &[f64], e_a: &[f64], params: &FfnnParams) -> Vec<f64> {
    let x: Vec<f64> = e_a.iter().chain(e_r).copied().collect();
    affine(params.weight.data(), Some(params.bias.data()), &x, params.weight.shape()[0])
}

/// `[‖e_r − e_a‖₂, cos(e_r, e_a)]` with cosine 0 when either vector is zero.
pub fn compare_similarity(e_r: &[f64], e_a: &[f64]) -> Result<[f64; 2]> {
    check_widths(e_r, e_a)?;
    let diff: Vec<f64> = e_r.iter().zip(e_a).map(|(a, b)| a - b).collect();
    Ok([l2_norm(&diff), crate::tensor::cosine(e_r, e_a)])
}

pub fn compare_subtract(e_r: &[f64], e_a: &[f64]) -> Result<Vec<f64>> {
    check_widths(e_r, e_a)?;
    Ok(e_r.iter().zip(e_a).map(|(a, b)| a - b).collect())
}

pub fn compare_multiply(e_r: &[f64], e_a: &[f64]) -> Result<Vec<f64>> {
    check_widths(e_r, e_a)?;
    Ok(e_r.iter().zip(e_a).map(|(a, b)| a * b).collect())
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct CompareCache {
    e_r: Vec<f64>,
    e_a: Vec<f64>,
    ntn_pre: Option<Vec<f64>>,
    ffnn_pre: Option<Vec<f64>>,
}

/// `e_NT ⊕ e_NN ⊕ e_sim ⊕ e_sub ⊕ e_mul` over the enabled functions, in that
/// order, or `e_r ⊕ e_a` in concat-only mode.
pub fn file_embedding(
    e_r: &[f64],
    e_a: &[f64],
    params: &ComparisonParams,
    mask: &ComparisonMask,
) -> Result<Vec<f64>> {
    check_widths(e_r, e_a)?;
    mask.validate()?;
    if mask.nt && !mask.concat_only && params.ntn.is_none()
        || mask.nn && !mask.concat_only && params.ffnn.is_none()
    {
        return Err(Error::config("comparison mask enables a function with no parameters"));
    }
    Ok(file_embedding_forward(e_r, e_a, params, mask).0)
}

pub(crate) fn file_embedding_forward(
    e_r: &[f64],
    e_a: &[f64],
    params: &ComparisonParams,
    mask: &ComparisonMask,
) -> (Vec<f64>, CompareCache) {
    let mut out = Vec::new();
    let mut cache = CompareCache {
        e_r: e_r.to_vec(),
        e_a: e_a.to_vec(),
        ntn_pre: None,
        ffnn_pre: None,
    };
    if mask.concat_only {
        out.extend_from_slice(e_r);
        out.extend_from_slice(e_a);
        return (out, cache);
    }
    if mask.nt {
        let pre = ntn_pre(e_r, e_a, params.ntn.as_ref().expect("validated"));
        out.extend(pre.iter().map(|&v| relu(v)));
        cache.ntn_pre = Some(pre);
    }
    if mask.nn {
        let pre = ffnn_pre(e_r, e_a, params.ffnn.as_ref().expect("validated"));
        out.extend(pre.iter().map(|&v| relu(v)));
        cache.ffnn_pre = Some(pre);
    }
    if mask.sim {
        out.extend(compare_similarity(e_r, e_a).expect("widths checked"));
    }
    if mask.sub {
        out.extend(e_r.iter().zip(e_a).map(|(a, b)| a - b));
    }
    if mask.mul {
        out.extend(e_r.iter().zip(e_a).map(|(a, b)| a * b));
    }
    (out, cache)
}

/// Returns `(d e_r, d e_a)` and accumulates parameter gradients.
pub(crate) fn file_embedding_backward(
    cache: &CompareCache,
    dout: &[f64],
    params: &ComparisonParams,
    mask: &ComparisonMask,
    grads: &mut ComparisonParams,
) -> (Vec<f64>, Vec<f64>) {
    let (e_r, e_a) = (&cache.e_r, &cache.e_a);
    let n = e_r.len();
    let mut dr = vec![0.0; n];
    let mut da = vec![0.0; n];
    if mask.concat_only {
        dr.copy_from_slice(&dout[..n]);
        da.copy_from_slice(&dout[n..2 * n]);
        return (dr, da);
    }
    let mut off = 0;
    if mask.nt {
        let p = params.ntn.as_ref().expect("validated");
        let g = grads.ntn.as_mut().expect("same structure");
        let pre = cache.ntn_pre.as_ref().expect("cached");
        let z = pre.len();
        for i in 0..z {
            if pre[i] <= 0.0 {
                continue;
            }
            let d = dout[off + i];
            let t = &p.tensor.data()[i * n * n..(i + 1) * n * n];
            let gt = &mut g.tensor.data_mut()[i * n * n..(i + 1) * n * n];
            // d/dT_i = d * e_r e_aᵀ; d/de_r = d * T_i e_a; d/de_a = d * T_iᵀ e_r
            let scaled_r: Vec<f64> = e_r.iter().map(|v| v * d).collect();
            add_outer(gt, &scaled_r, e_a);
            for (r, dr_r) in dr.iter_mut().enumerate() {
                *dr_r += d * dot(&t[r * n..(r + 1) * n], e_a);
            }
            add_matvec_t(t, &scaled_r, &mut da);
            g.bias.data_mut()[i] += d;
        }
        off += z;
    }
    if mask.nn {
        let p = params.ffnn.as_ref().expect("validated");
        let g = grads.ffnn.as_mut().expect("same structure");
        let pre = cache.ffnn_pre.as_ref().expect("cached");
        let dpre: Vec<f64> = pre
            .iter()
            .zip(&dout[off..off + n])
            .map(|(&z, &d)| if z > 0.0 { d } else { 0.0 })
            .collect();
        let x: Vec<f64> = e_a.iter().chain(e_r.iter()).copied().collect();
        add_outer(g.weight.data_mut(), &dpre, &x);
        add_into(g.bias.data_mut(), &dpre);
        let mut dx = vec![0.0; 2 * n];
        add_matvec_t(p.weight.data(), &dpre, &mut dx);
        add_into(&mut da, &dx[..n]);
        add_into(&mut dr, &dx[n..]);
        off += n;
    }
    if mask.sim {
        let (d_euc, d_cos) = (dout[off], dout[off + 1]);
        let diff: Vec<f64> = e_r.iter().zip(e_a).map(|(a, b)| a - b).collect();
        let euc = l2_norm(&diff);
        if euc > 0.0 {
            for k in 0..n {
                dr[k] += d_euc * diff[k] / euc;
                da[k] -= d_euc * diff[k] / euc;
            }
        }
        let (nr, na) = (l2_norm(e_r), l2_norm(e_a));
        if nr > 0.0 && na > 0.0 {
            let cos = dot(e_r, e_a) / (nr * na);
            for k in 0..n {
                dr[k] += d_cos * (e_a[k] / (nr * na) - cos * e_r[k] / (nr * nr));
                da[k] += d_cos * (e_r[k] / (nr * na) - cos * e_a[k] / (na * na));
            }
        }
        off += 2;
    }
    if mask.sub {
        for k in 0..n {
            dr[k] += dout[off + k];
            da[k] -= dout[off + k];
        }
        off += n;
    }
    if mask.mul {
        for k in 0..n {
            dr[k] += dout[off + k] * e_a[k];
            da[k] += dout[off + k] * e_r[k];
        }
    }
    (dr, da)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ntn(z: usize, n: usize, t: Vec<f64>, b: Vec<f64>) -> NtnParams {
        NtnParams {
            tensor: Tensor::from_vec(&[z, n, n], t),
            bias: Tensor::from_vec(&[z], b),
        }
    }

    #[test]
    fn ntn_examples() {
        let p = ntn(3, 2, vec![0.0; 12], vec![0.0; 3]);
        assert_eq!(compare_ntn(&[1.0, 2.0], &[3.0, 4.0], &p).unwrap(), vec![0.0; 3]);
        let p = ntn(1, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0]);
        assert_eq!(compare_ntn(&[1.0, 0.0], &[1.0, 0.0], &p).unwrap(), vec![1.0]);
        assert!(compare_ntn(&[1.0], &[1.0, 0.0], &p).is_err());
    }

    #[test]
    fn ffnn_examples() {
        let p = FfnnParams {
            weight: Tensor::from_vec(&[1, 2], vec![1.0, 1.0]),
            bias: Tensor::zeros(&[1]),
        };
        assert_eq!(compare_ffnn(&[3.0], &[2.0], &p).unwrap(), vec![5.0]);
        let p = FfnnParams {
            weight: Tensor::zeros(&[1, 2]),
            bias: Tensor::from_vec(&[1], vec![-10.0]),
        };
        assert_eq!(compare_ffnn(&[0.1], &[0.2], &p).unwrap(), vec![0.0]);
        // order is e_a then e_r
        let p = FfnnParams {
            weight: Tensor::from_vec(&[1, 2], vec![1.0, 0.0]),
            bias: Tensor::zeros(&[1]),
        };
        assert_eq!(compare_ffnn(&[7.0], &[2.0], &p).unwrap(), vec![2.0]);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(compare_similarity(&[0.5, 0.5], &[0.5, 0.5]).unwrap()[0], 0.0);
        assert!((compare_similarity(&[0.5, 0.5], &[0.5, 0.5]).unwrap()[1] - 1.0).abs() < 1e-15);
        let s = compare_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((s[0] - 2f64.sqrt()).abs() < 1e-15 && s[1] == 0.0);
        assert_eq!(compare_similarity(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), [5.0, 0.0]);
    }

    #[test]
    fn elementwise_examples() {
        assert_eq!(compare_subtract(&[1.0, 2.0], &[0.5, 1.0]).unwrap(), vec![0.5, 1.0]);
        assert_eq!(compare_subtract(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(compare_multiply(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![3.0, 8.0]);
        assert_eq!(compare_multiply(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(compare_multiply(&[1.0, 2.0], &[1.0, 1.0]).unwrap(), vec![1.0, 2.0]);
        assert!(compare_multiply(&[1.0], &[]).is_err());
    }

    #[test]
    fn file_embedding_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (n, z) = (4, 4);
        let e = [0.1, 0.2, -0.3, 0.4];
        for bits in 0u8..32 {
            let mask = ComparisonMask::from_bits(bits);
            let params = ComparisonParams::init(n, z, &mask, &mut rng);
            match file_embedding(&e, &e, &params, &mask) {
                Ok(v) => {
                    let expected = z * mask.nt as usize
                        + n * mask.nn as usize
                        + 2 * mask.sim as usize
                        + n * mask.sub as usize
                        + n * mask.mul as usize;
                    assert_eq!(v.len(), expected, "mask {bits:05b}");
                    assert_eq!(mask.file_dim(n, z), expected);
                }
                Err(Error::Config(_)) => assert_eq!(bits, 0),
                Err(e) => panic!("{e}"),
            }
        }
        let all = ComparisonMask::all();
        let p = ComparisonParams::init(n, z, &all, &mut rng);
        assert_eq!(file_embedding(&e, &e, &p, &all).unwrap().len(), 18);
        let no_sim = ComparisonMask::without(&[ComparisonFn::Sim]);
        assert_eq!(file_embedding(&e, &e, &p, &no_sim).unwrap().len(), 16);
        let cat = ComparisonMask::concat_only();
        let p = ComparisonParams::init(n, z, &cat, &mut rng);
        assert_eq!(file_embedding(&e, &[0.0; 4], &p, &cat).unwrap(), vec![0.1, 0.2, -0.3, 0.4, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn parse_function_names() {
        assert_eq!("NT".parse::<ComparisonFn>().unwrap(), ComparisonFn::Nt);
        assert!("foo".parse::<ComparisonFn>().is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, z) = (3, 2);
        let mask = ComparisonMask::all();
        let mut params = ComparisonParams::init(n, z, &mask, &mut rng);
        params.visit_mut("", &mut |_, t| {
            for v in t.data_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        });
        let e_r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e_a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dim = mask.file_dim(n, z);
        let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |r: &[f64], a: &[f64], p: &ComparisonParams| dot(&file_embedding_forward(r, a, p, &mask).0, &w);
        let (_, cache) = file_embedding_forward(&e_r, &e_a, &params, &mask);
        let mut g = params.zeros_like();
        let (dr, da) = file_embedding_backward(&cache, &w, &params, &mask, &mut g);
        let h = 1e-6;
        for k in 0..n {
            let mut rp = e_r.clone();
            rp[k] += h;
            let mut rm = e_r.clone();
            rm[k] -= h;
            let fd = (loss(&rp, &e_a, &params) - loss(&rm, &e_a, &params)) / (2.0 * h);
            assert!((fd - dr[k]).abs() < 1e-6, "dr[{k}] {fd} vs {}", dr[k]);
            let mut ap = e_a.clone();
            ap[k] += h;
            let mut am = e_a.clone();
            am[k] -= h;
            let fd = (loss(&e_r, &ap, &params) - loss(&e_r, &am, &params)) / (2.0 * h);
            assert!((fd - da[k]).abs() < 1e-6, "da[{k}] {fd} vs {}", da[k]);
        }
        let ffnn_w = &g.ffnn.as_ref().unwrap().weight;
        for j in 0..ffnn_w.len() {
            let mut pp = params.clone();
            pp.ffnn.as_mut().unwrap().weight.data_mut()[j] += h;
            let lp = loss(&e_r, &e_a, &pp);
            pp.ffnn.as_mut().unwrap().weight.data_mut()[j] -= 2.0 * h;
            let lm = loss(&e_r, &e_a, &pp);
            assert!(((lp - lm) / (2.0 * h) - ffnn_w.data()[j]).abs() < 1e-6);
        }
        let t = &g.ntn.as_ref().unwrap().tensor;
        for j in 0..t.len() {
            let mut pp = params.clone();
            pp.ntn.as_mut().unwrap().tensor.data_mut()[j] += h;
            let lp = loss(&e_r, &e_a, &pp);
            pp.ntn.as_mut().unwrap().tensor.data_mut()[j] -= 2.0 * h;
            let lm = loss(&e_r, &e_a, &pp);
            assert!(((lp - lm) / (2.0 * h) - t.data()[j]).abs() < 1e-6);
        }
    }

    fn vec_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..8).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn subtract_is_antisymmetric((a, b) in vec_strategy()) {
            let ab = compare_subtract(&a, &b).unwrap();
            let ba = compare_subtract(&b, &a).unwrap();
            prop_assert!(ab.iter().zip(&ba).all(|(x, y)| *x == -*y));
            prop_assert!(compare_subtract(&a, &a).unwrap().iter().all(|&x| x == 0.0));
        }

        #[test]
        fn multiply_is_symmetric((a, b) in vec_strategy()) {
            prop_assert_eq!(compare_multiply(&a, &b).unwrap(), compare_multiply(&b, &a).unwrap());
        }

        #[test]
        fn self_similarity((a, _) in vec_strategy()) {
            prop_assume!(a.iter().any(|&x| x != 0.0));
            let s = compare_similarity(&a, &a).unwrap();
            prop_assert_eq!(s[0], 0.0);
            prop_assert!((s[1] - 1.0).abs() < 1e-12);
        }
    }
}
