//! Multinomial-deviance gradient boosting.
//!
//! Raw scores start at the log class priors. Each stage fits one
//! depth-limited least-squares tree per class to the softmax residuals
//! `y_k - p_k`; leaves take the one-step Newton value
//! `(K - 1) / K * sum(r) / sum(p (1 - p))`, shrunk by the learning rate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::argmax;
use super::tree::{DenseMatrix, GrowthLimits, LeastSquares, Tree, TreeBuilder};
use crate::features::{Dataset, SparseVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        BoostingParams { stages: 100, learning_rate: 0.1, max_depth: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub initial_scores: Vec<f64>,
    pub learning_rate: f64,
    /// `stages[s][k]` is the class-`k` tree of stage `s`; leaves hold unshrunk values.
    pub stages: Vec<Vec<Tree<f64>>>,
    /// Mean training deviance before the first stage and after each stage.
    pub train_deviance: Vec<f64>,
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Mean of `-ln softmax(scores)[target]`.
pub(crate) fn multinomial_deviance(scores: &[Vec<f64>], targets: &[usize]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(targets)
        .map(|(s, &t)| {
            let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = s.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            log_sum - s[t]
        })
        .sum();
    total / targets.len() as f64
}

impl GradientBoosting {
    pub(crate) fn fit(
        data: &Dataset,
        targets: &[usize],
        n_classes: usize,
        params: &BoostingParams,
    ) -> GradientBoosting {
        let n = data.len();
        let x = DenseMatrix::from_sparse(&data.vectors, data.dimension());
        let mut counts = vec![0.0; n_classes];
        for &t in targets {
            counts[t] += 1.0;
        }
        let initial_scores: Vec<f64> = counts.iter().map(|c| (c / n as f64).ln()).collect();
        let mut scores: Vec<Vec<f64>> = vec![initial_scores.clone(); n];
        let mut train_deviance = vec![multinomial_deviance(&scores, targets)];
        let leaf_scale = (n_classes as f64 - 1.0) / n_classes as f64;
        let rows: Vec<(usize, f64)> = (0..n).map(|r| (r, 1.0)).collect();

        let mut stages = Vec::with_capacity(params.stages);
        for _ in 0..params.stages {
            let probabilities: Vec<Vec<f64>> = scores.iter().map(|s| softmax(s)).collect();
            let trees: Vec<Tree<f64>> = (0..n_classes)
                .into_par_iter()
                .map(|k| {
                    let residuals: Vec<f64> = (0..n)
                        .map(|i| (targets[i] == k) as u8 as f64 - probabilities[i][k])
                        .collect();
                    let hessians: Vec<f64> =
                        (0..n).map(|i| probabilities[i][k] * (1.0 - probabilities[i][k])).collect();
                    TreeBuilder {
                        x: &x,
                        criterion: LeastSquares { residuals: &residuals, hessians: &hessians, leaf_scale },
                        limits: GrowthLimits {
                            max_depth: Some(params.max_depth),
                            min_samples_split: 2.0,
                            features_per_node: None,
                        },
                        rng: ChaCha8Rng::seed_from_u64(k as u64),
                    }
                    .build(rows.clone())
                })
                .collect();
            for (i, row_scores) in scores.iter_mut().enumerate() {
                for (k, tree) in trees.iter().enumerate() {
                    row_scores[k] += params.learning_rate * tree.leaf_dense(x.row(i));
                }
            }
            train_deviance.push(multinomial_deviance(&scores, targets));
            stages.push(trees);
        }
        GradientBoosting { initial_scores, learning_rate: params.learning_rate, stages, train_deviance }
    }

    pub fn raw_scores(&self, x: &SparseVector) -> Vec<f64> {
        let mut scores = self.initial_scores.clone();
        for stage in &self.stages {
            for (k, tree) in stage.iter().enumerate() {
                scores[k] += self.learning_rate * tree.leaf(x);
            }
        }
        scores
    }

    pub(crate) fn predict_index(&self, x: &SparseVector) -> usize {
        argmax(&self.raw_scores(x))
    }
}
