//! One-vs-rest linear SVM trained by Pegasos-style subgradient descent on
//! the hinge loss.
//!
//! With `n` samples the regularization strength is `lambda = 1 / (C n)` and
//! the step at update `t` is `1 / (lambda t)`. The bias is an extra input
//! fixed at 1. Weights are kept as `scale * v` so the shrink step costs O(1).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::argmax;
use crate::features::{Dataset, SparseVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, epochs: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// One weight vector per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

struct ScaledWeights {
    v: Vec<f64>,
    bias: f64,
    scale: f64,
}

impl ScaledWeights {
    fn decision(&self, x: &SparseVector) -> f64 {
        let dot: f64 = x.entries().iter().map(|&(c, val)| self.v[c as usize] * val).sum();
        self.scale * (dot + self.bias)
    }

    fn shrink(&mut self, factor: f64) {
        if factor <= 0.0 {
            self.v.iter_mut().for_each(|w| *w = 0.0);
            self.bias = 0.0;
            self.scale = 1.0;
            return;
        }
        self.scale *= factor;
        if self.scale < 1e-9 {
            self.v.iter_mut().for_each(|w| *w *= self.scale);
            self.bias *= self.scale;
            self.scale = 1.0;
        }
    }

    fn add(&mut self, x: &SparseVector, coef: f64) {
        let step = coef / self.scale;
        for &(c, val) in x.entries() {
            self.v[c as usize] += step * val;
        }
        self.bias += step;
    }

    fn into_parts(self) -> (Vec<f64>, f64) {
        let scale = self.scale;
        (self.v.into_iter().map(|w| w * scale).collect(), self.bias * scale)
    }
}

impl LinearSvm {
    pub(crate) fn fit(
        data: &Dataset,
        targets: &[usize],
        n_classes: usize,
        params: &SvmParams,
        seed: u64,
    ) -> LinearSvm {
        let n = data.len();
        let lambda = 1.0 / (params.c * n as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let orders: Vec<Vec<usize>> = (0..params.epochs)
            .map(|_| {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                order
            })
            .collect();

        let heads: Vec<(Vec<f64>, f64)> = (0..n_classes)
            .into_par_iter()
            .map(|class| {
                let mut w = ScaledWeights { v: vec![0.0; data.dimension()], bias: 0.0, scale: 1.0 };
                let mut t = 0usize;
                for order in &orders {
                    for &i in order {
                        t += 1;
                        let eta = 1.0 / (lambda * t as f64);
                        let y = if targets[i] == class { 1.0 } else { -1.0 };
                        let x = &data.vectors[i];
                        let margin = y * w.decision(x);
                        w.shrink(1.0 - eta * lambda);
                        if margin < 1.0 {
                            w.add(x, eta * y);
                        }
                    }
                }
                w.into_parts()
            })
            .collect();

        let (weights, biases) = heads.into_iter().unzip();
        LinearSvm { weights, biases }
    }

    pub fn decision_values(&self, x: &SparseVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| x.entries().iter().map(|&(c, v)| w[c as usize] * v).sum::<f64>() + b)
            .collect()
    }

    pub(crate) fn predict_index(&self, x: &SparseVector) -> usize {
        argmax(&self.decision_values(x))
    }
}
