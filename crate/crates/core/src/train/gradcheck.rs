//! Analytic gradients versus central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::LabelVector;
use crate::model::Model;
use crate::tensor::Parameters;
use crate::tensorize::ChangeTensor;

pub const FD_STEP: f64 = 1e-4;

/// Denominator floor for the relative error. Gradients smaller than this are
/// compared in absolute terms; the finite-difference truncation error at
/// step 1e-4 is of order 1e-8, which would otherwise dominate tiny entries.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub groups: Vec<GroupReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GroupReport> {
        self.groups.iter().filter(|g| !g.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }
}

/// Compare `analytic` against central differences of `loss` around `params`,
/// one report per named tensor.
pub fn check_gradients<P: Parameters>(
    params: &P,
    loss: impl Fn(&P) -> f64,
    analytic: &P,
    tolerance: f64,
) -> GradCheckReport {
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    let grads = analytic.tensors();
    let mut work = params.clone();
    let mut groups = Vec::with_capacity(names.len());
    for (gi, name) in names.into_iter().enumerate() {
        let len = grads[gi].len();
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        let mut worst = 0;
        for k in 0..len {
            let orig = work.tensors()[gi].data()[k];
            work.tensors_mut()[gi].data_mut()[k] = orig + FD_STEP;
            let lp = loss(&work);
            work.tensors_mut()[gi].data_mut()[k] = orig - FD_STEP;
            let lm = loss(&work);
            work.tensors_mut()[gi].data_mut()[k] = orig;
            let numeric = (lp - lm) / (2.0 * FD_STEP);
            let a = grads[gi].data()[k];
            let rel = relative_error(a, numeric);
            // NaN must count as a failure
            if !(rel <= max_rel) {
                max_rel = rel;
                worst = k;
            }
            max_abs = max_abs.max((a - numeric).abs());
        }
        groups.push(GroupReport {
            name,
            entries: len,
            max_rel_error: max_rel,
            max_abs_error: max_abs,
            worst_index: worst,
            passed: max_rel <= tolerance,
        });
    }
    GradCheckReport { tolerance, groups }
}

/// Add seeded uniform noise in `[-scale, scale)` to every parameter.
///
/// Zero-initialized biases put many ReLU pre-activations within one
/// finite-difference step of the kink, where central differences are
/// meaningless; checking at a jittered point avoids that.
pub fn jitter_parameters<P: Parameters>(params: &mut P, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v += rng.gen_range(-scale..scale);
        }
    }
}

/// Check the full model gradient of the dropout-free objective on `batch`.
pub fn gradient_check(
    model: &Model,
    batch: &[(ChangeTensor, LabelVector)],
    lambda: f64,
    tolerance: f64,
) -> GradCheckReport {
    let (_, grads) = model.objective_gradient(batch, lambda);
    let config = model.config;
    check_gradients(
        &model.params,
        |p| {
            let m = Model {
                config,
                params: p.clone(),
            };
            m.objective(batch, lambda)
        },
        &grads,
        tolerance,
    )
}
