//! Stratified k-fold cross-validation of several learners on one corpus.
//!
//! Every fold rebuilds the vocabulary from its training documents alone,
//! vectorizes both sides, then fits and times each learner serially.
//! Vectorization is outside both timers.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::class::FailureClass;
use crate::classifiers::{ClassifierSpec, TrainedModel};
use crate::corpus::CorpusManifest;
use crate::error::{Result, TriageError};
use crate::features::{build_vocabulary, vectorize, Dataset, SparseVector, Vocabulary};
use crate::ingest::{scan_dump, SelectionRules};
use crate::preprocess::{preprocess_bundle, CleaningConfig, TokenDocument};
use crate::stats::{friedman_test, nemenyi_pairwise, FriedmanResult, NemenyiResult, ScoreMatrix};

/// Fold id of every instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles each class's indices with a seeded generator and deals them
/// round-robin. Each class continues dealing where the previous class
/// stopped, so overall fold sizes stay within one of each other as well.
pub fn stratified_folds(labels: &[FailureClass], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(TriageError::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in FailureClass::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(TriageError::Stratification { class: class.to_string(), count: members.len(), k });
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { k, assignment })
}

fn check_lengths(truth: &[FailureClass], predicted: &[FailureClass]) -> Result<()> {
    if truth.len() != predicted.len() {
        return Err(TriageError::Shape { expected: truth.len(), actual: predicted.len() });
    }
    if truth.is_empty() {
        return Err(TriageError::InvalidParameter("cannot score an empty prediction set".into()));
    }
    Ok(())
}

pub fn accuracy(truth: &[FailureClass], predicted: &[FailureClass]) -> Result<f64> {
    check_lengths(truth, predicted)?;
    let hits = truth.iter().zip(predicted).filter(|(t, p)| t == p).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Support-weighted mean of per-class F1 over the classes present in `truth`.
pub fn weighted_f1(truth: &[FailureClass], predicted: &[FailureClass]) -> Result<f64> {
    check_lengths(truth, predicted)?;
    let mut total = 0.0;
    for class in FailureClass::ALL {
        let support = truth.iter().filter(|&&t| t == class).count();
        if support == 0 {
            continue;
        }
        let pairs = truth.iter().zip(predicted);
        let tp = pairs.clone().filter(|&(&t, &p)| t == class && p == class).count() as f64;
        let predicted_pos = predicted.iter().filter(|&&p| p == class).count() as f64;
        let precision = if predicted_pos > 0.0 { tp / predicted_pos } else { 0.0 };
        let recall = tp / support as f64;
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        total += f1 * support as f64;
    }
    Ok(total / truth.len() as f64)
}

/// Something that can be trained inside the cross-validation loop.
pub trait Learner: Sync {
    fn name(&self) -> String;
    fn fit(&self, data: &Dataset) -> Result<Box<dyn Predictor>>;
}

pub trait Predictor {
    fn predict(&self, vectors: &[SparseVector]) -> Result<Vec<FailureClass>>;

    /// Content hash of the trained state, if the model has one.
    fn checksum(&self) -> Option<String> {
        None
    }

    /// Records which vocabulary the model was trained against.
    fn set_vocabulary(&mut self, _checksum: String) {}
}

impl Learner for ClassifierSpec {
    fn name(&self) -> String {
        self.algorithm().display_name().to_string()
    }

    fn fit(&self, data: &Dataset) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(ClassifierSpec::fit(self, data)?))
    }
}

impl Predictor for TrainedModel {
    fn predict(&self, vectors: &[SparseVector]) -> Result<Vec<FailureClass>> {
        TrainedModel::predict(self, vectors)
    }

    fn checksum(&self) -> Option<String> {
        Some(TrainedModel::checksum(self))
    }

    fn set_vocabulary(&mut self, checksum: String) {
        self.vocabulary_checksum = Some(checksum);
    }
}

/// Cleaned documents and their labels, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub documents: Vec<TokenDocument>,
    pub labels: Vec<FailureClass>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

/// Scans and cleans every bundle listed in the manifest.
pub fn load_corpus(
    root: &Path,
    manifest: &CorpusManifest,
    rules: &SelectionRules,
    cleaning: &CleaningConfig,
) -> Result<Corpus> {
    let documents = manifest
        .entries
        .par_iter()
        .map(|entry| preprocess_bundle(&scan_dump(&root.join(&entry.path), rules)?, cleaning))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { documents, labels: manifest.labels() })
}

/// One fold's training and test sets, vectorized against a vocabulary
/// built from the training documents only.
#[derive(Debug, Clone)]
pub struct PreparedFold {
    pub vocabulary: Vocabulary,
    pub train: Dataset,
    pub test: Dataset,
    pub test_indices: Vec<usize>,
}

pub fn prepare_fold(corpus: &Corpus, folds: &FoldAssignment, fold: usize, min_df: usize) -> Result<PreparedFold> {
    let train_indices = folds.train_indices(fold);
    let test_indices = folds.test_indices(fold);
    let train_docs: Vec<TokenDocument> = train_indices.iter().map(|&i| corpus.documents[i].clone()).collect();
    let vocabulary = build_vocabulary(&train_docs, min_df)?;
    let side = |indices: &[usize]| {
        let vectors = indices.par_iter().map(|&i| vectorize(&vocabulary, &corpus.documents[i])).collect();
        Dataset::new(vectors, indices.iter().map(|&i| corpus.labels[i]).collect())
    };
    let train = side(&train_indices)?;
    let test = side(&test_indices)?;
    Ok(PreparedFold { vocabulary, train, test, test_indices })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub min_df: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { k: 10, seed: 0, min_df: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub algorithm: String,
    pub fold: usize,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub train_seconds: f64,
    pub predict_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub mean_accuracy: f64,
    pub mean_weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTests {
    pub friedman: FriedmanResult,
    pub nemenyi: NemenyiResult,
}

impl MetricTests {
    fn compute(m: &ScoreMatrix) -> MetricTests {
        MetricTests { friedman: friedman_test(m), nemenyi: nemenyi_pairwise(m) }
    }
}

/// Rank tests per metric; absent when fewer than two algorithms ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub accuracy: MetricTests,
    pub weighted_f1: MetricTests,
}

/// Wall-clock measurements, kept apart from the reproducible sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Folds by algorithms, seconds.
    pub train_seconds: Vec<Vec<f64>>,
    pub predict_seconds: Vec<Vec<f64>>,
    pub mean_train_seconds: Vec<f64>,
    pub mean_predict_seconds: Vec<f64>,
    pub environment: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Resolved run configuration, echoed for reproducibility.
    pub config: serde_json::Value,
    pub k: usize,
    pub seed: u64,
    pub algorithms: Vec<String>,
    pub summary: Vec<AlgorithmSummary>,
    /// Folds by algorithms.
    pub accuracy: Vec<Vec<f64>>,
    pub weighted_f1: Vec<Vec<f64>>,
    /// Folds by algorithms; empty strings for learners without checksums.
    pub model_checksums: Vec<Vec<String>>,
    pub statistics: Option<Statistics>,
    pub timing: Timing,
}

/// The reproducible part of a report: everything except `timing`.
#[derive(Serialize)]
struct ReproducibleView<'a> {
    config: &'a serde_json::Value,
    k: usize,
    seed: u64,
    algorithms: &'a [String],
    summary: &'a [AlgorithmSummary],
    accuracy: &'a [Vec<f64>],
    weighted_f1: &'a [Vec<f64>],
    model_checksums: &'a [Vec<String>],
    statistics: &'a Option<Statistics>,
}

impl ComparisonReport {
    pub fn fold_results(&self) -> Vec<FoldResult> {
        let mut out = Vec::new();
        for fold in 0..self.k {
            for (a, name) in self.algorithms.iter().enumerate() {
                out.push(FoldResult {
                    algorithm: name.clone(),
                    fold,
                    accuracy: self.accuracy[fold][a],
                    weighted_f1: self.weighted_f1[fold][a],
                    train_seconds: self.timing.train_seconds[fold][a],
                    predict_seconds: self.timing.predict_seconds[fold][a],
                });
            }
        }
        out
    }

    pub fn accuracy_matrix(&self) -> Result<ScoreMatrix> {
        ScoreMatrix::new(self.algorithms.clone(), self.accuracy.clone())
    }

    pub fn weighted_f1_matrix(&self) -> Result<ScoreMatrix> {
        ScoreMatrix::new(self.algorithms.clone(), self.weighted_f1.clone())
    }

    /// JSON of every section except timing; identical runs give identical bytes.
    pub fn reproducible_json(&self) -> Result<String> {
        let view = ReproducibleView {
            config: &self.config,
            k: self.k,
            seed: self.seed,
            algorithms: &self.algorithms,
            summary: &self.summary,
            accuracy: &self.accuracy,
            weighted_f1: &self.weighted_f1,
            model_checksums: &self.model_checksums,
            statistics: &self.statistics,
        };
        Ok(serde_json::to_string_pretty(&view)?)
    }
}

pub fn environment_note() -> String {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{} {}, hardware threads: {}", std::env::consts::OS, std::env::consts::ARCH, threads)
}

fn column_means(matrix: &[Vec<f64>], columns: usize) -> Vec<f64> {
    (0..columns).map(|j| matrix.iter().map(|r| r[j]).sum::<f64>() / matrix.len() as f64).collect()
}

/// Cross-validates every learner on the same folds.
pub fn run_cv(
    corpus: &Corpus,
    learners: &[&dyn Learner],
    options: &CvOptions,
    config: serde_json::Value,
) -> Result<ComparisonReport> {
    if learners.is_empty() {
        return Err(TriageError::InvalidParameter("no algorithms to evaluate".into()));
    }
    let folds = stratified_folds(&corpus.labels, options.k, options.seed)?;
    let algorithms: Vec<String> = learners.iter().map(|l| l.name()).collect();
    let blank = || vec![vec![0.0; learners.len()]; options.k];
    let (mut acc, mut f1, mut train_s, mut predict_s) = (blank(), blank(), blank(), blank());
    let mut checksums = vec![vec![String::new(); learners.len()]; options.k];

    for fold in 0..options.k {
        let prepared = prepare_fold(corpus, &folds, fold, options.min_df).map_err(|e| TriageError::Fold {
            fold,
            algorithm: "feature extraction".into(),
            source: Box::new(e),
        })?;
        let vocab_checksum = prepared.vocabulary.checksum();
        for (a, learner) in learners.iter().enumerate() {
            let wrap = |e| TriageError::Fold { fold, algorithm: algorithms[a].clone(), source: Box::new(e) };
            let start = Instant::now();
            let mut model = learner.fit(&prepared.train).map_err(wrap)?;
            train_s[fold][a] = start.elapsed().as_secs_f64();

            let start = Instant::now();
            let predicted = model.predict(&prepared.test.vectors).map_err(wrap)?;
            predict_s[fold][a] = start.elapsed().as_secs_f64();

            acc[fold][a] = accuracy(&prepared.test.labels, &predicted)?;
            f1[fold][a] = weighted_f1(&prepared.test.labels, &predicted)?;
            model.set_vocabulary(vocab_checksum.clone());
            checksums[fold][a] = model.checksum().unwrap_or_default();
        }
    }

    let n = learners.len();
    let (mean_acc, mean_f1) = (column_means(&acc, n), column_means(&f1, n));
    let summary = algorithms
        .iter()
        .enumerate()
        .map(|(a, name)| AlgorithmSummary {
            algorithm: name.clone(),
            mean_accuracy: mean_acc[a],
            mean_weighted_f1: mean_f1[a],
        })
        .collect();
    let statistics = if n >= 2 {
        Some(Statistics {
            accuracy: MetricTests::compute(&ScoreMatrix::new(algorithms.clone(), acc.clone())?),
            weighted_f1: MetricTests::compute(&ScoreMatrix::new(algorithms.clone(), f1.clone())?),
        })
    } else {
        None
    };
    let timing = Timing {
        mean_train_seconds: column_means(&train_s, n),
        mean_predict_seconds: column_means(&predict_s, n),
        train_seconds: train_s,
        predict_seconds: predict_s,
        environment: environment_note(),
    };
    Ok(ComparisonReport {
        config,
        k: options.k,
        seed: options.seed,
        algorithms,
        summary,
        accuracy: acc,
        weighted_f1: f1,
        model_checksums: checksums,
        statistics,
        timing,
    })
}

/// [`run_cv`] over classifier specs, with the specs and options echoed into the report.
pub fn run_cv_specs(corpus: &Corpus, specs: &[ClassifierSpec], options: &CvOptions) -> Result<ComparisonReport> {
    let learners: Vec<&dyn Learner> = specs.iter().map(|s| s as &dyn Learner).collect();
    let config = serde_json::json!({ "options": options, "specs": specs });
    run_cv(corpus, &learners, options, config)
}
