//! Failure triage for Kubernetes cluster dumps.
//!
//! The pipeline runs from raw dump directories to a trained classifier:
//! [`ingest`] selects pod logs, [`preprocess`] strips volatile tokens,
//! [`features`] builds TF-IDF vectors and [`classifiers`] fits one of five
//! model families. [`evaluation`] and [`stats`] compare the families under
//! stratified cross-validation; [`report`] renders the comparison.

pub mod class;
pub mod classifiers;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod preprocess;
pub mod report;
pub mod stats;
pub mod store;

pub use class::FailureClass;
pub use classifiers::{Algorithm, ClassifierSpec, Hyperparameters, TrainedModel};
pub use error::{Result, TriageError};
pub use evaluation::{ComparisonReport, CvOptions};
pub use features::{Dataset, SparseVector, Vocabulary};
