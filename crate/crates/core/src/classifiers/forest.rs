//! Random forest of fully grown Gini trees with hard plurality voting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::argmax;
use super::tree::{DenseMatrix, Gini, GrowthLimits, Tree, TreeBuilder};
use crate::features::{Dataset, SparseVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// Draw a bootstrap sample per tree. Disabling it is meant for tests.
    pub bootstrap: bool,
    /// Candidate features per node; `None` means `ceil(sqrt(dimension))`.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { trees: 1000, bootstrap: true, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_classes: usize,
    pub trees: Vec<Tree<usize>>,
}

impl RandomForest {
    pub(crate) fn fit(
        data: &Dataset,
        targets: &[usize],
        n_classes: usize,
        params: &ForestParams,
        seed: u64,
    ) -> RandomForest {
        let n = data.len();
        let dim = data.dimension();
        let x = DenseMatrix::from_sparse(&data.vectors, dim);
        let mtry = params
            .max_features
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
            .clamp(1, dim.max(1));

        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ t as u64);
                let rows: Vec<(usize, f64)> = if params.bootstrap {
                    let mut counts = vec![0u32; n];
                    for _ in 0..n {
                        counts[rng.gen_range(0..n)] += 1;
                    }
                    counts
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c > 0)
                        .map(|(r, &c)| (r, c as f64))
                        .collect()
                } else {
                    (0..n).map(|r| (r, 1.0)).collect()
                };
                TreeBuilder {
                    x: &x,
                    criterion: Gini { targets, n_classes },
                    limits: GrowthLimits {
                        max_depth: None,
                        min_samples_split: 2.0,
                        features_per_node: Some(mtry),
                    },
                    rng,
                }
                .build(rows)
            })
            .collect();
        RandomForest { n_classes, trees }
    }

    pub fn votes(&self, x: &SparseVector) -> Vec<f64> {
        let dense = x.to_dense();
        let mut votes = vec![0.0; self.n_classes];
        for tree in &self.trees {
            votes[*tree.leaf_dense(&dense)] += 1.0;
        }
        votes
    }

    pub(crate) fn predict_index(&self, x: &SparseVector) -> usize {
        argmax(&self.votes(x))
    }
}
