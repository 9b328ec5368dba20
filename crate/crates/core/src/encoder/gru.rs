//! Gated recurrent unit, applied in both directions.
//!
//! Per step, with gates stacked `[update; reset; candidate]` in `w`, `u`, `b`:
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! n  = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 - z) ⊙ h + z ⊙ n
//! ```
//!
//! The reset gate is applied to the previous state before the candidate
//! projection. The initial state is zero.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{add_into, add_matvec_t, add_outer, affine, join, sigmoid, Parameters, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    /// `3g x m`
    pub w: Tensor,
    /// `3g x g`
    pub u: Tensor,
    /// `3g`
    pub b: Tensor,
}

impl GruParams {
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        GruParams {
            w: Tensor::uniform(&[3 * hidden, input], 0.1, rng),
            u: Tensor::uniform(&[3 * hidden, hidden], 0.1, rng),
            b: Tensor::zeros(&[3 * hidden]),
        }
    }

    pub fn input_width(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.u.shape()[1]
    }

    /// Rows `gate*g .. (gate+1)*g` of `u`.
    fn u_block(&self, gate: usize) -> &[f64] {
        let g = self.hidden();
        &self.u.data()[gate * g * g..(gate + 1) * g * g]
    }
}

impl Parameters for GruParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "w"), &self.w);
        f(join(prefix, "u"), &self.u);
        f(join(prefix, "b"), &self.b);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        f(join(prefix, "w"), &mut self.w);
        f(join(prefix, "u"), &mut self.u);
        f(join(prefix, "b"), &mut self.b);
    }
}

#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
}

/// Steps in processing order.
#[derive(Debug, Clone, Default)]
pub(crate) struct GruTrace {
    steps: Vec<StepCache>,
}

pub(crate) fn gru_step(p: &GruParams, x: &[f64], h: &[f64]) -> (Vec<f64>, StepCache) {
    let g = p.hidden();
    let gx = affine(p.w.data(), Some(p.b.data()), x, 3 * g);
    let uz = affine(p.u_block(0), None, h, g);
    let ur = affine(p.u_block(1), None, h, g);
    let z: Vec<f64> = (0..g).map(|k| sigmoid(gx[k] + uz[k])).collect();
    let r: Vec<f64> = (0..g).map(|k| sigmoid(gx[g + k] + ur[k])).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let un = affine(p.u_block(2), None, &rh, g);
    let n: Vec<f64> = (0..g).map(|k| (gx[2 * g + k] + un[k]).tanh()).collect();
    let h_new = (0..g).map(|k| (1.0 - z[k]) * h[k] + z[k] * n[k]).collect();
    (
        h_new,
        StepCache {
            h_prev: h.to_vec(),
            z,
            r,
            n,
        },
    )
}

/// Run over `xs`, returning hidden states aligned with the input order.
pub(crate) fn gru_run(p: &GruParams, xs: &[Vec<f64>], reverse: bool) -> (Vec<Vec<f64>>, GruTrace) {
    let g = p.hidden();
    let mut hs = vec![Vec::new(); xs.len()];
    let mut trace = GruTrace {
        steps: Vec::with_capacity(xs.len()),
    };
    let mut h = vec![0.0; g];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..xs.len()).rev())
    } else {
        Box::new(0..xs.len())
    };
    for t in order {
        let (h_new, cache) = gru_step(p, &xs[t], &h);
        trace.steps.push(cache);
        hs[t] = h_new.clone();
        h = h_new;
    }
    (hs, trace)
}

/// Backpropagate `dhs` (aligned with input order) through a run, accumulating
/// parameter gradients and returning input gradients in input order.
pub(crate) fn gru_backprop(
    p: &GruParams,
    xs: &[Vec<f64>],
    trace: &GruTrace,
    reverse: bool,
    dhs: &[Vec<f64>],
    grads: &mut GruParams,
) -> Vec<Vec<f64>> {
    let g = p.hidden();
    let m = p.input_width();
    let mut dxs = vec![vec![0.0; m]; xs.len()];
    let mut dh_carry = vec![0.0; g];
    let n_steps = xs.len();
    // processing step s handled input index t
    for s in (0..n_steps).rev() {
        let t = if reverse { n_steps - 1 - s } else { s };
        let c = &trace.steps[s];
        let x = &xs[t];
        let dh: Vec<f64> = dhs[t].iter().zip(&dh_carry).map(|(a, b)| a + b).collect();

        let mut dh_prev: Vec<f64> = (0..g).map(|k| dh[k] * (1.0 - c.z[k])).collect();
        let dn_pre: Vec<f64> = (0..g)
            .map(|k| dh[k] * c.z[k] * (1.0 - c.n[k] * c.n[k]))
            .collect();
        let dz_pre: Vec<f64> = (0..g)
            .map(|k| dh[k] * (c.n[k] - c.h_prev[k]) * c.z[k] * (1.0 - c.z[k]))
            .collect();
        let rh: Vec<f64> = c.r.iter().zip(&c.h_prev).map(|(a, b)| a * b).collect();
        let mut d_rh = vec![0.0; g];
        add_matvec_t(p.u_block(2), &dn_pre, &mut d_rh);
        let dr_pre: Vec<f64> = (0..g)
            .map(|k| d_rh[k] * c.h_prev[k] * c.r[k] * (1.0 - c.r[k]))
            .collect();
        for k in 0..g {
            dh_prev[k] += d_rh[k] * c.r[k];
        }
        add_matvec_t(p.u_block(0), &dz_pre, &mut dh_prev);
        add_matvec_t(p.u_block(1), &dr_pre, &mut dh_prev);

        let mut dgx = Vec::with_capacity(3 * g);
        dgx.extend_from_slice(&dz_pre);
        dgx.extend_from_slice(&dr_pre);
        dgx.extend_from_slice(&dn_pre);
        add_outer(grads.w.data_mut(), &dgx, x);
        add_into(grads.b.data_mut(), &dgx);
        add_matvec_t(p.w.data(), &dgx, &mut dxs[t]);
        {
            let du = grads.u.data_mut();
            add_outer(&mut du[0..g * g], &dz_pre, &c.h_prev);
            add_outer(&mut du[g * g..2 * g * g], &dr_pre, &c.h_prev);
            add_outer(&mut du[2 * g * g..3 * g * g], &dn_pre, &rh);
        }
        dh_carry = dh_prev;
    }
    dxs
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiGruParams {
    pub forward: GruParams,
    pub backward: GruParams,
}

impl BiGruParams {
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        BiGruParams {
            forward: GruParams::init(input, hidden, rng),
            backward: GruParams::init(input, hidden, rng),
        }
    }

    pub fn input_width(&self) -> usize {
        self.forward.input_width()
    }

    /// Width of one annotation (`2g`).
    pub fn output_width(&self) -> usize {
        2 * self.forward.hidden()
    }
}

impl Parameters for BiGruParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.forward.visit(&join(prefix, "fwd"), f);
        self.backward.visit(&join(prefix, "bwd"), f);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut Tensor)) {
        self.forward.visit_mut(&join(prefix, "fwd"), f);
        self.backward.visit_mut(&join(prefix, "bwd"), f);
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BiGruTrace {
    fwd: GruTrace,
    bwd: GruTrace,
}

pub(crate) fn bigru_run(p: &BiGruParams, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, BiGruTrace) {
    let (hf, tf) = gru_run(&p.forward, xs, false);
    let (hb, tb) = gru_run(&p.backward, xs, true);
    let out = hf
        .into_iter()
        .zip(hb)
        .map(|(mut f, b)| {
            f.extend(b);
            f
        })
        .collect();
    (out, BiGruTrace { fwd: tf, bwd: tb })
}

pub(crate) fn bigru_backprop(
    p: &BiGruParams,
    xs: &[Vec<f64>],
    trace: &BiGruTrace,
    douts: &[Vec<f64>],
    grads: &mut BiGruParams,
) -> Vec<Vec<f64>> {
    let g = p.forward.hidden();
    let dfwd: Vec<Vec<f64>> = douts.iter().map(|d| d[..g].to_vec()).collect();
    let dbwd: Vec<Vec<f64>> = douts.iter().map(|d| d[g..].to_vec()).collect();
    let mut dx = gru_backprop(&p.forward, xs, &trace.fwd, false, &dfwd, &mut grads.forward);
    let dxb = gru_backprop(&p.backward, xs, &trace.bwd, true, &dbwd, &mut grads.backward);
    for (a, b) in dx.iter_mut().zip(&dxb) {
        add_into(a, b);
    }
    dx
}

/// Bidirectional encoding: output `k` is the forward state at `k`
/// concatenated with the backward state at `k`.
pub fn encode_sequence(inputs: &[Vec<f64>], gru: &BiGruParams) -> Result<Vec<Vec<f64>>> {
    if inputs.is_empty() {
        return Err(Error::shape("encode_sequence needs at least one input"));
    }
    let m = gru.input_width();
    if let Some(bad) = inputs.iter().find(|x| x.len() != m) {
        return Err(Error::shape(format!(
            "input width {} does not match GRU input width {m}",
            bad.len()
        )));
    }
    Ok(bigru_run(gru, inputs).0)
}
