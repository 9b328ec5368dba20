//! Logistic-regression probe over exported features, for smoke tests of the
//! classification pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: 500,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Per-feature mean and scale applied before the linear map.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LinearProbe {
    /// Full-batch gradient descent on standardized features.
    pub fn fit(features: &[Vec<f64>], labels: &[bool], config: ProbeConfig) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows for {} labels",
                features.len(),
                labels.len()
            )));
        }
        let dim = features[0].len();
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::shape("feature rows differ in width"));
        }
        let n = features.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|j| features.iter().map(|f| f[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..dim)
            .map(|j| {
                let var = features.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    1.0 / var.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let xs: Vec<Vec<f64>> = features
            .iter()
            .map(|f| (0..dim).map(|j| (f[j] - mean[j]) * scale[j]).collect())
            .collect();
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        for _ in 0..config.epochs {
            let mut gw = vec![0.0; dim];
            let mut gb = 0.0;
            for (x, &y) in xs.iter().zip(labels) {
                let err = sigmoid(dot(&w, x) + b) - if y { 1.0 } else { 0.0 };
                for (g, v) in gw.iter_mut().zip(x) {
                    *g += err * v;
                }
                gb += err;
            }
            for (wj, g) in w.iter_mut().zip(&gw) {
                *wj -= config.learning_rate * (g / n + config.l2 * *wj);
            }
            b -= config.learning_rate * gb / n;
        }
        Ok(LinearProbe {
            weights: w,
            bias: b,
            mean,
            scale,
        })
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let z: f64 = features
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .zip(&self.weights)
            .map(|(((x, m), s), w)| (x - m) * s * w)
            .sum();
        sigmoid(z + self.bias)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_linear_data() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let ys: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let p = LinearProbe::fit(&xs, &ys, ProbeConfig::default()).unwrap();
        let correct = xs.iter().zip(&ys).filter(|(x, &y)| (p.predict(x) >= 0.5) == y).count();
        assert_eq!(correct, 40);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(LinearProbe::fit(&[], &[], ProbeConfig::default()).is_err());
        assert!(LinearProbe::fit(&[vec![1.0], vec![1.0, 2.0]], &[true, false], ProbeConfig::default()).is_err());
    }
}
