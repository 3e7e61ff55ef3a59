//! k-nearest neighbours with exact Euclidean distance on sparse vectors.
//!
//! Neighbours are ordered by (distance, training index). The vote goes to
//! the class with most neighbours; among tied classes, the one owning the
//! nearest neighbour wins.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};
use crate::features::{Dataset, SparseVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub n_classes: usize,
    pub vectors: Vec<SparseVector>,
    pub targets: Vec<usize>,
}

impl Knn {
    pub(crate) fn fit(data: &Dataset, targets: &[usize], params: &KnnParams) -> Result<Knn> {
        if params.k > data.len() {
            return Err(TriageError::InvalidParameter(format!(
                "k={} exceeds the {} training instances",
                params.k,
                data.len()
            )));
        }
        Ok(Knn {
            k: params.k,
            n_classes: targets.iter().max().map_or(0, |m| m + 1),
            vectors: data.vectors.clone(),
            targets: targets.to_vec(),
        })
    }

    /// Indices of the `k` nearest training vectors, nearest first.
    pub fn neighbours(&self, x: &SparseVector) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (x.squared_distance(v), i))
            .collect();
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < scored.len() {
            scored.select_nth_unstable_by(self.k - 1, by_distance);
            scored.truncate(self.k);
        }
        scored.sort_by(by_distance);
        scored.into_iter().map(|(_, i)| i).collect()
    }

    pub(crate) fn predict_index(&self, x: &SparseVector) -> usize {
        let neighbours = self.neighbours(x);
        let mut votes = vec![0usize; self.n_classes];
        for &i in &neighbours {
            votes[self.targets[i]] += 1;
        }
        let top = *votes.iter().max().unwrap_or(&0);
        neighbours
            .iter()
            .map(|&i| self.targets[i])
            .find(|&c| votes[c] == top)
            .unwrap_or(0)
    }
}
