use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{encoded_bit, single_chip, FeatureEncoding};
use crate::adc::ENCODED_WIDTH;
use crate::array::Challenge;
use crate::crp::CrpDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrHyper {
    pub learning_rate: f64,
    /// Coefficient of `0.5 * ||w||^2` (bias excluded).
    pub l2: f64,
    pub epochs: usize,
    /// Seeds the small Gaussian initial weights.
    pub seed: u64,
}

impl Default for LrHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            l2: 1e-4,
            epochs: 2000,
            seed: 0,
        }
    }
}

const INIT_STD: f64 = 0.01;

/// One logistic predictor for a single encoded bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitPredictor {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Regularized training loss before each epoch, plus the final loss.
    pub loss_history: Vec<f64>,
}

impl BitPredictor {
    fn zeros(width: usize) -> Self {
        Self {
            weights: vec![0.0; width],
            bias: 0.0,
            loss_history: Vec::new(),
        }
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }
}

/// Per-bit logistic regression over challenge features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub encoding: FeatureEncoding,
    pub predictors: Vec<BitPredictor>,
    pub hyper: LrHyper,
}

impl LrModel {
    /// Untrained model: all weights and biases zero.
    pub fn zeros(encoding: FeatureEncoding) -> Self {
        Self {
            encoding,
            predictors: (0..ENCODED_WIDTH).map(|_| BitPredictor::zeros(encoding.width())).collect(),
            hyper: LrHyper::default(),
        }
    }

    /// Predicted 11-bit word; a bit is 1 when its probability exceeds 0.5.
    pub fn predict_features(&self, x: &[f64]) -> Result<u16> {
        if x.len() != self.encoding.width() {
            return Err(Error::EncodingMismatch {
                expected: self.encoding.width(),
                found: x.len(),
            });
        }
        Ok(self.predictors.iter().fold(0u16, |word, p| {
            (word << 1) | u16::from(p.probability(x) > 0.5)
        }))
    }

    pub fn predict(&self, ch: Challenge) -> u16 {
        self.predict_features(&self.encoding.encode(ch))
            .expect("encoding produces its own width")
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean binary cross-entropy plus `0.5 * l2 * ||w||^2`, with its gradient
/// with respect to the weights and the bias.
pub fn bce_loss_and_gradient(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; w.len()];
    let mut grad_b = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z = dot(w, xi) + b;
        // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
        loss += softplus(z) - yi * z;
        let err = sigmoid(z) - yi;
        for (g, xij) in grad_w.iter_mut().zip(xi) {
            *g += err * xij;
        }
        grad_b += err;
    }
    loss /= n;
    grad_b /= n;
    let mut reg = 0.0;
    for (g, wi) in grad_w.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
        reg += wi * wi;
    }
    (loss + 0.5 * l2 * reg, grad_w, grad_b)
}

fn fit_bit(x: &[Vec<f64>], y: &[f64], hyper: &LrHyper, bit: usize) -> BitPredictor {
    let width = x.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(bit as u64);
    let init = Normal::new(0.0, INIT_STD).expect("valid init std");
    let mut w: Vec<f64> = (0..width).map(|_| init.sample(&mut rng)).collect();
    let mut b = 0.0;
    let mut loss_history = Vec::with_capacity(hyper.epochs + 1);
    for _ in 0..hyper.epochs {
        let (loss, gw, gb) = bce_loss_and_gradient(x, y, &w, b, hyper.l2);
        loss_history.push(loss);
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= hyper.learning_rate * gi;
        }
        b -= hyper.learning_rate * gb;
    }
    loss_history.push(bce_loss_and_gradient(x, y, &w, b, hyper.l2).0);
    BitPredictor {
        weights: w,
        bias: b,
        loss_history,
    }
}

/// Trains 11 independent full-batch gradient-descent predictors, one per
/// encoded bit, on a single chip's CRPs.
pub fn lr_train(train: &CrpDataset, encoding: FeatureEncoding, hyper: &LrHyper) -> Result<LrModel> {
    single_chip(train)?;
    if !(hyper.learning_rate > 0.0) || !(hyper.l2 >= 0.0) {
        return Err(Error::InvalidArgument(
            "learning rate must be positive and L2 strength non-negative".into(),
        ));
    }
    let x: Vec<Vec<f64>> = train.records.iter().map(|r| encoding.encode(r.challenge)).collect();
    let words: Vec<u16> = train.records.iter().map(|r| r.response.encoded()).collect();
    let predictors = (0..ENCODED_WIDTH)
        .into_par_iter()
        .map(|bit| {
            let y: Vec<f64> = words.iter().map(|&w| f64::from(encoded_bit(w, bit))).collect();
            fit_bit(&x, &y, hyper, bit)
        })
        .collect();
    Ok(LrModel {
        encoding,
        predictors,
        hyper: *hyper,
    })
}
