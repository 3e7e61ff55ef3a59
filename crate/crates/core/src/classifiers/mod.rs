//! Five classifiers behind one fit/predict contract.
//!
//! Every model predicts over the class list seen at training time, kept in
//! [`FailureClass`] order. Argmax ties always resolve to the earliest class
//! in that order.

mod boosting;
mod forest;
mod knn;
mod mlp;
mod svm;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::class::FailureClass;
use crate::error::{Result, TriageError};
use crate::features::{Dataset, SparseVector};

pub use boosting::{BoostingParams, GradientBoosting};
pub use forest::{ForestParams, RandomForest};
pub use knn::{Knn, KnnParams};
pub use mlp::{flatten, Layer, Mlp, MlpParams};
pub use svm::{LinearSvm, SvmParams};
pub use tree::{DenseMatrix, Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    LinearSvm,
    Knn,
    RandomForest,
    GradientBoosting,
    Mlp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::LinearSvm,
        Algorithm::Knn,
        Algorithm::RandomForest,
        Algorithm::GradientBoosting,
        Algorithm::Mlp,
    ];

    /// Name used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::LinearSvm => "SVM",
            Algorithm::Knn => "KNN",
            Algorithm::RandomForest => "Random Forest",
            Algorithm::GradientBoosting => "Gradient Boosting",
            Algorithm::Mlp => "MLP",
        }
    }

    /// Name used on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            Algorithm::LinearSvm => "svm",
            Algorithm::Knn => "knn",
            Algorithm::RandomForest => "rf",
            Algorithm::GradientBoosting => "gb",
            Algorithm::Mlp => "mlp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Algorithm {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        let alg = match key.as_str() {
            "svm" | "linearsvm" => Algorithm::LinearSvm,
            "knn" | "kneighbors" => Algorithm::Knn,
            "rf" | "randomforest" => Algorithm::RandomForest,
            "gb" | "gbc" | "gradientboosting" => Algorithm::GradientBoosting,
            "mlp" => Algorithm::Mlp,
            _ => return Err(TriageError::Parse(format!("unknown algorithm {s:?}"))),
        };
        Ok(alg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Hyperparameters {
    LinearSvm(SvmParams),
    Knn(KnnParams),
    RandomForest(ForestParams),
    GradientBoosting(BoostingParams),
    Mlp(MlpParams),
}

impl Hyperparameters {
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::LinearSvm => Hyperparameters::LinearSvm(SvmParams::default()),
            Algorithm::Knn => Hyperparameters::Knn(KnnParams::default()),
            Algorithm::RandomForest => Hyperparameters::RandomForest(ForestParams::default()),
            Algorithm::GradientBoosting => Hyperparameters::GradientBoosting(BoostingParams::default()),
            Algorithm::Mlp => Hyperparameters::Mlp(MlpParams::default()),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Hyperparameters::LinearSvm(_) => Algorithm::LinearSvm,
            Hyperparameters::Knn(_) => Algorithm::Knn,
            Hyperparameters::RandomForest(_) => Algorithm::RandomForest,
            Hyperparameters::GradientBoosting(_) => Algorithm::GradientBoosting,
            Hyperparameters::Mlp(_) => Algorithm::Mlp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(TriageError::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

impl ClassifierSpec {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        ClassifierSpec { hyperparameters: Hyperparameters::default_for(algorithm), seed }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.hyperparameters.algorithm()
    }

    pub fn validate(&self) -> Result<()> {
        match &self.hyperparameters {
            Hyperparameters::LinearSvm(p) => {
                positive("C", p.c)?;
                positive("epochs", p.epochs as f64)
            }
            Hyperparameters::Knn(p) => positive("k", p.k as f64),
            Hyperparameters::RandomForest(p) => {
                positive("trees", p.trees as f64)?;
                if let Some(m) = p.max_features {
                    positive("max_features", m as f64)?;
                }
                Ok(())
            }
            Hyperparameters::GradientBoosting(p) => {
                positive("learning_rate", p.learning_rate)?;
                positive("max_depth", p.max_depth as f64)
            }
            Hyperparameters::Mlp(p) => {
                if p.hidden.is_empty() {
                    return Err(TriageError::InvalidParameter("MLP needs at least one hidden layer".into()));
                }
                for &h in &p.hidden {
                    positive("hidden size", h as f64)?;
                }
                if !(0.0..1.0).contains(&p.dropout) {
                    return Err(TriageError::InvalidParameter(format!(
                        "dropout must lie in [0, 1), got {}",
                        p.dropout
                    )));
                }
                positive("learning_rate", p.learning_rate)?;
                positive("epochs", p.epochs as f64)?;
                positive("batch_size", p.batch_size as f64)
            }
        }
    }

    pub fn fit(&self, data: &Dataset) -> Result<TrainedModel> {
        self.validate()?;
        if data.is_empty() {
            return Err(TriageError::DegenerateTraining("empty training set".into()));
        }
        let (classes, targets) = encode_labels(data);
        let needs_two = !matches!(self.hyperparameters, Hyperparameters::Knn(_) | Hyperparameters::RandomForest(_));
        if needs_two && classes.len() < 2 {
            return Err(TriageError::DegenerateTraining(format!(
                "{} needs at least two classes, training data only has {}",
                self.algorithm(),
                classes[0]
            )));
        }
        let n_classes = classes.len();
        let dimension = data.dimension();
        let params = match &self.hyperparameters {
            Hyperparameters::LinearSvm(p) => {
                ModelParams::LinearSvm(LinearSvm::fit(data, &targets, n_classes, p, self.seed))
            }
            Hyperparameters::Knn(p) => ModelParams::Knn(Knn::fit(data, &targets, p)?),
            Hyperparameters::RandomForest(p) => {
                ModelParams::RandomForest(RandomForest::fit(data, &targets, n_classes, p, self.seed))
            }
            Hyperparameters::GradientBoosting(p) => {
                ModelParams::GradientBoosting(GradientBoosting::fit(data, &targets, n_classes, p))
            }
            Hyperparameters::Mlp(p) => ModelParams::Mlp(Mlp::fit(data, &targets, n_classes, p, self.seed)?),
        };
        Ok(TrainedModel { spec: self.clone(), classes, dimension, vocabulary_checksum: None, params })
    }
}

/// Class list in [`FailureClass`] order and each label's index into it.
fn encode_labels(data: &Dataset) -> (Vec<FailureClass>, Vec<usize>) {
    let classes = data.classes();
    let targets = data
        .labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, targets)
}

/// Index of the largest value; the first one wins ties and NaN never wins.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum ModelParams {
    LinearSvm(LinearSvm),
    Knn(Knn),
    RandomForest(RandomForest),
    GradientBoosting(GradientBoosting),
    Mlp(Mlp),
}

/// A fitted, immutable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub classes: Vec<FailureClass>,
    pub dimension: usize,
    pub vocabulary_checksum: Option<String>,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        self.spec.algorithm()
    }

    pub fn with_vocabulary_checksum(mut self, checksum: String) -> Self {
        self.vocabulary_checksum = Some(checksum);
        self
    }

    fn predict_index(&self, x: &SparseVector) -> usize {
        match &self.params {
            ModelParams::LinearSvm(m) => m.predict_index(x),
            ModelParams::Knn(m) => m.predict_index(x),
            ModelParams::RandomForest(m) => m.predict_index(x),
            ModelParams::GradientBoosting(m) => m.predict_index(x),
            ModelParams::Mlp(m) => m.predict_index(x),
        }
    }

    pub fn predict(&self, vectors: &[SparseVector]) -> Result<Vec<FailureClass>> {
        if let Some(bad) = vectors.iter().find(|v| v.dimension() != self.dimension) {
            return Err(TriageError::Shape { expected: self.dimension, actual: bad.dimension() });
        }
        Ok(vectors.iter().map(|x| self.classes[self.predict_index(x)]).collect())
    }

    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn checksum(&self) -> String {
        let bytes = self.canonical_bytes().expect("models serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
pub(crate) mod test_data {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    pub fn dataset(points: &[(&[f64], FailureClass)]) -> Dataset {
        Dataset::new(
            points.iter().map(|(x, _)| SparseVector::from_dense(x)).collect(),
            points.iter().map(|&(_, c)| c).collect(),
        )
        .unwrap()
    }

    /// Gaussian-ish blobs around one centre per class, dimension `dim`.
    pub fn blobs(per_class: usize, classes: &[FailureClass], dim: usize, spread: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for (ci, &class) in classes.iter().enumerate() {
            for _ in 0..per_class {
                let x: Vec<f64> = (0..dim)
                    .map(|d| {
                        let centre = if d % classes.len() == ci { 3.0 } else { 0.0 };
                        centre + spread * (rng.gen::<f64>() - 0.5)
                    })
                    .collect();
                vectors.push(SparseVector::from_dense(&x));
                labels.push(class);
            }
        }
        Dataset::new(vectors, labels).unwrap()
    }

    pub fn training_accuracy(model: &TrainedModel, data: &Dataset) -> f64 {
        let predicted = model.predict(&data.vectors).unwrap();
        predicted.iter().zip(&data.labels).filter(|(a, b)| a == b).count() as f64 / data.len() as f64
    }
}
