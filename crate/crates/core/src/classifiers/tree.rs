//! CART trees shared by the random forest (Gini) and gradient boosting
//! (least squares).
//!
//! Rows carry non-negative weights, which is how bootstrap multiplicities
//! enter the forest. A split sends `x[feature] <= threshold` left, with the
//! threshold halfway between two consecutive distinct values in the node.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::SparseVector;

/// Row-major dense copy of a training set.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DenseMatrix {
    pub fn from_sparse(vectors: &[SparseVector], cols: usize) -> Self {
        let mut values = vec![0.0; vectors.len() * cols];
        for (r, v) in vectors.iter().enumerate() {
            for &(c, x) in v.entries() {
                values[r * cols + c as usize] = x;
            }
        }
        DenseMatrix { values, rows: vectors.len(), cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<L> {
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf(L),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    pub nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    pub fn leaf(&self, x: &SparseVector) -> &L {
        self.descend(|f| x.get(f))
    }

    pub fn leaf_dense(&self, x: &[f64]) -> &L {
        self.descend(|f| x[f])
    }

    fn descend(&self, value: impl Fn(usize) -> f64) -> &L {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf(l) => return l,
                Node::Split { feature, threshold, left, right } => {
                    at = if value(*feature as usize) <= *threshold { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<L>(t: &Tree<L>, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left as usize).max(walk(t, *right as usize)),
            }
        }
        walk(self, 0)
    }
}

/// Split criterion over additive per-node statistics.
pub(crate) trait Criterion {
    type Stats: Clone;
    type Leaf;

    fn empty(&self) -> Self::Stats;
    fn add(&self, stats: &mut Self::Stats, row: usize, weight: f64);
    /// `total - part`.
    fn difference(&self, total: &Self::Stats, part: &Self::Stats) -> Self::Stats;
    fn weight(&self, stats: &Self::Stats) -> f64;
    /// Larger is better; a split's quality is the sum over its two children.
    fn proxy(&self, stats: &Self::Stats) -> f64;
    fn is_pure(&self, stats: &Self::Stats) -> bool;
    fn leaf(&self, stats: &Self::Stats) -> Self::Leaf;
}

/// Gini impurity over weighted class counts.
pub(crate) struct Gini<'a> {
    pub targets: &'a [usize],
    pub n_classes: usize,
}

impl Criterion for Gini<'_> {
    type Stats = Vec<f64>;
    type Leaf = usize;

    fn empty(&self) -> Vec<f64> {
        vec![0.0; self.n_classes]
    }

    fn add(&self, stats: &mut Vec<f64>, row: usize, weight: f64) {
        stats[self.targets[row]] += weight;
    }

    fn difference(&self, total: &Vec<f64>, part: &Vec<f64>) -> Vec<f64> {
        total.iter().zip(part).map(|(t, p)| t - p).collect()
    }

    fn weight(&self, stats: &Vec<f64>) -> f64 {
        stats.iter().sum()
    }

    /// Minimizing `n * gini = n - sum(c^2)/n` is maximizing `sum(c^2)/n`.
    fn proxy(&self, stats: &Vec<f64>) -> f64 {
        let n: f64 = stats.iter().sum();
        if n <= 0.0 {
            0.0
        } else {
            stats.iter().map(|c| c * c).sum::<f64>() / n
        }
    }

    fn is_pure(&self, stats: &Vec<f64>) -> bool {
        stats.iter().filter(|&&c| c > 0.0).count() <= 1
    }

    fn leaf(&self, stats: &Vec<f64>) -> usize {
        super::argmax(stats)
    }
}

/// Least squares on residuals; leaves take a Newton step `sum(r) / sum(h)`
/// scaled by `leaf_scale`.
pub(crate) struct LeastSquares<'a> {
    pub residuals: &'a [f64],
    pub hessians: &'a [f64],
    pub leaf_scale: f64,
}

/// `[sum w*r, sum w*r^2, sum w*h, sum w]`.
pub(crate) type SquaresStats = [f64; 4];

impl Criterion for LeastSquares<'_> {
    type Stats = SquaresStats;
    type Leaf = f64;

    fn empty(&self) -> SquaresStats {
        [0.0; 4]
    }

    fn add(&self, s: &mut SquaresStats, row: usize, w: f64) {
        let r = self.residuals[row];
        s[0] += w * r;
        s[1] += w * r * r;
        s[2] += w * self.hessians[row];
        s[3] += w;
    }

    fn difference(&self, t: &SquaresStats, p: &SquaresStats) -> SquaresStats {
        [t[0] - p[0], t[1] - p[1], t[2] - p[2], t[3] - p[3]]
    }

    fn weight(&self, s: &SquaresStats) -> f64 {
        s[3]
    }

    fn proxy(&self, s: &SquaresStats) -> f64 {
        if s[3] <= 0.0 {
            0.0
        } else {
            s[0] * s[0] / s[3]
        }
    }

    fn is_pure(&self, s: &SquaresStats) -> bool {
        s[3] <= 0.0 || s[1] / s[3] - (s[0] / s[3]).powi(2) <= 1e-14
    }

    fn leaf(&self, s: &SquaresStats) -> f64 {
        if s[2].abs() < 1e-150 {
            0.0
        } else {
            self.leaf_scale * s[0] / s[2]
        }
    }
}

pub(crate) struct GrowthLimits {
    pub max_depth: Option<usize>,
    pub min_samples_split: f64,
    /// Stop looking for a split once this many non-constant features have
    /// been evaluated; `None` evaluates every feature.
    pub features_per_node: Option<usize>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    quality: f64,
}

pub(crate) struct TreeBuilder<'a, C: Criterion, R: Rng> {
    pub x: &'a DenseMatrix,
    pub criterion: C,
    pub limits: GrowthLimits,
    pub rng: R,
}

impl<C: Criterion, R: Rng> TreeBuilder<'_, C, R> {
    /// Grows a tree over `(row, weight)` pairs; rows with zero weight must be
    /// left out by the caller.
    pub fn build(mut self, rows: Vec<(usize, f64)>) -> Tree<C::Leaf> {
        let mut nodes = Vec::new();
        self.grow(rows, 0, &mut nodes);
        Tree { nodes }
    }

    fn grow(&mut self, rows: Vec<(usize, f64)>, depth: usize, nodes: &mut Vec<Node<C::Leaf>>) -> u32 {
        let id = nodes.len();
        let mut stats = self.criterion.empty();
        for &(r, w) in &rows {
            self.criterion.add(&mut stats, r, w);
        }
        let stop = self.criterion.is_pure(&stats)
            || self.criterion.weight(&stats) < self.limits.min_samples_split
            || self.limits.max_depth.is_some_and(|d| depth >= d);
        let split = if stop { None } else { self.best_split(&rows, &stats) };
        let Some(split) = split else {
            nodes.push(Node::Leaf(self.criterion.leaf(&stats)));
            return id as u32;
        };

        nodes.push(Node::Split { feature: split.feature as u32, threshold: split.threshold, left: 0, right: 0 });
        let (left_rows, right_rows): (Vec<_>, Vec<_>) =
            rows.into_iter().partition(|&(r, _)| self.x.get(r, split.feature) <= split.threshold);
        let left = self.grow(left_rows, depth + 1, nodes);
        let right = self.grow(right_rows, depth + 1, nodes);
        if let Node::Split { left: l, right: r, .. } = &mut nodes[id] {
            *l = left;
            *r = right;
        }
        id as u32
    }

    fn best_split(&mut self, rows: &[(usize, f64)], total: &C::Stats) -> Option<BestSplit> {
        let cols = self.x.cols();
        let mut order: Vec<usize> = (0..cols).collect();
        let mut best: Option<BestSplit> = None;
        let mut evaluated = 0usize;
        let mut sorted: Vec<(f64, usize, f64)> = Vec::with_capacity(rows.len());

        for i in 0..cols {
            if self.limits.features_per_node.is_some_and(|m| evaluated >= m) {
                break;
            }
            let feature = if self.limits.features_per_node.is_some() {
                let j = self.rng.gen_range(i..cols);
                order.swap(i, j);
                order[i]
            } else {
                i
            };

            sorted.clear();
            sorted.extend(rows.iter().map(|&(r, w)| (self.x.get(r, feature), r, w)));
            let first = sorted[0].0;
            if sorted.iter().all(|s| s.0 == first) {
                continue;
            }
            evaluated += 1;
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

            let mut left = self.criterion.empty();
            for k in 0..sorted.len() - 1 {
                let (value, row, weight) = sorted[k];
                self.criterion.add(&mut left, row, weight);
                let next = sorted[k + 1].0;
                if next == value {
                    continue;
                }
                let right = self.criterion.difference(total, &left);
                let quality = self.criterion.proxy(&left) + self.criterion.proxy(&right);
                if best.as_ref().is_none_or(|b| quality > b.quality) {
                    let mut threshold = value + (next - value) / 2.0;
                    if threshold >= next {
                        threshold = value;
                    }
                    best = Some(BestSplit { feature, threshold, quality });
                }
            }
        }
        best
    }
}
