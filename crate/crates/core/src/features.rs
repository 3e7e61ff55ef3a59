//! TF-IDF vocabulary and sparse feature vectors.
//!
//! Weights use the smoothed inverse document frequency
//! `idf(t) = ln((1 + n) / (1 + df(t))) + 1`, raw term counts, and L2
//! normalization. Stored idf values are rounded to 12 significant digits at
//! build time, so the persisted decimal form reloads to the identical `f64`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::class::FailureClass;
use crate::error::{Result, TriageError};
use crate::preprocess::TokenDocument;
use crate::store;

pub const VOCABULARY_KIND: &str = "vocabulary";
pub const VOCABULARY_VERSION: u32 = 1;

fn round_significant(x: f64) -> f64 {
    format_idf(x).parse().expect("formatted float parses")
}

fn format_idf(x: f64) -> String {
    format!("{x:.11e}")
}

/// Frozen token → (column, idf) mapping. Columns follow lexicographic term order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    idf: Vec<f64>,
    doc_count: usize,
    min_df: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).map(|&c| c as usize)
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.column(term).map(|c| self.idf[c])
    }

    pub fn idf_values(&self) -> &[f64] {
        &self.idf
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    /// Canonical text body: a summary line, then one `term\tcolumn\tidf`
    /// record per term.
    pub fn to_body(&self) -> String {
        let mut out = format!("n={} min_df={} terms={}\n", self.doc_count, self.min_df, self.len());
        for (col, term) in self.terms.iter().enumerate() {
            let _ = writeln!(out, "{term}\t{col}\t{}", format_idf(self.idf[col]));
        }
        out
    }

    pub fn from_body(body: &str) -> Result<Self> {
        let bad = |msg: String| TriageError::Parse(format!("vocabulary: {msg}"));
        let mut lines = body.lines();
        let summary = lines.next().ok_or_else(|| bad("missing summary line".into()))?;
        let mut fields: HashMap<&str, usize> = HashMap::new();
        for part in summary.split_whitespace() {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed summary field {part:?}")))?;
            let v = v.parse().map_err(|_| bad(format!("non-integer summary field {part:?}")))?;
            fields.insert(k, v);
        }
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("missing {k}")));
        let (doc_count, min_df, count) = (field("n")?, field("min_df")?, field("terms")?);

        let mut terms = Vec::with_capacity(count);
        let mut idf = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split('\t').collect();
            let [term, col, weight] = parts[..] else {
                return Err(bad(format!("record {i}: expected 3 tab-separated fields")));
            };
            if col.parse::<usize>().ok() != Some(i) {
                return Err(bad(format!("record {i}: column {col} out of order")));
            }
            if term.is_empty() || terms.last().is_some_and(|prev: &String| prev.as_str() >= term) {
                return Err(bad(format!("record {i}: terms must be non-empty and strictly sorted")));
            }
            let weight: f64 = weight.parse().map_err(|_| bad(format!("record {i}: bad idf")))?;
            if !(weight.is_finite() && weight >= 1.0) {
                return Err(bad(format!("record {i}: idf {weight} below 1")));
            }
            terms.push(term.to_string());
            idf.push(weight);
        }
        if terms.len() != count {
            return Err(bad(format!("expected {count} terms, found {}", terms.len())));
        }
        Ok(Vocabulary::from_parts(terms, idf, doc_count, min_df))
    }

    fn from_parts(terms: Vec<String>, idf: Vec<f64>, doc_count: usize, min_df: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { terms, index, idf, doc_count, min_df }
    }

    /// SHA-256 of the canonical body, hex encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_body().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        store::write_artifact(path, VOCABULARY_KIND, VOCABULARY_VERSION, self.to_body().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = store::read_artifact(path, VOCABULARY_KIND, VOCABULARY_VERSION)?;
        let text = String::from_utf8(body).map_err(|_| TriageError::Corrupt {
            path: path.to_path_buf(),
            reason: "vocabulary body is not UTF-8".into(),
        })?;
        Vocabulary::from_body(&text)
    }
}

/// Fits a vocabulary on `docs`, keeping tokens found in at least `min_df` of them.
pub fn build_vocabulary(docs: &[TokenDocument], min_df: usize) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(TriageError::InvalidParameter("cannot build a vocabulary from zero documents".into()));
    }
    if min_df == 0 {
        return Err(TriageError::InvalidParameter("min_df must be >= 1".into()));
    }
    let df: HashMap<&str, usize> = docs
        .par_iter()
        .map(|doc| doc.tokens.iter().map(String::as_str).collect::<HashSet<&str>>())
        .fold(HashMap::new, |mut acc, distinct| {
            for t in distinct {
                *acc.entry(t).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (t, c) in b {
                *a.entry(t).or_insert(0) += c;
            }
            a
        });

    let n = docs.len();
    let mut kept: Vec<(&str, usize)> = df.into_iter().filter(|&(_, c)| c >= min_df).collect();
    if kept.is_empty() {
        return Err(TriageError::EmptyVocabulary { min_df, docs: n });
    }
    kept.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let idf = kept
        .iter()
        .map(|&(_, df)| round_significant(((1 + n) as f64 / (1 + df) as f64).ln() + 1.0))
        .collect();
    let terms = kept.into_iter().map(|(t, _)| t.to_string()).collect();
    Ok(Vocabulary::from_parts(terms, idf, n, min_df))
}

/// Sparse, L2-normalized feature vector. Empty when the document had no
/// in-vocabulary tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
    dimension: usize,
}

impl SparseVector {
    /// Builds a vector from (column, value) pairs; zero values are dropped and
    /// columns must be distinct and below `dimension`.
    pub fn new(mut entries: Vec<(u32, f64)>, dimension: usize) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(c, _)| c);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(TriageError::InvalidParameter("duplicate column in sparse vector".into()));
        }
        if let Some(&(c, _)) = entries.last() {
            if c as usize >= dimension {
                return Err(TriageError::Shape { expected: dimension, actual: c as usize + 1 });
            }
        }
        if entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(TriageError::InvalidParameter("non-finite sparse vector entry".into()));
        }
        Ok(SparseVector { entries, dimension })
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .collect();
        SparseVector { entries, dimension: values.len() }
    }

    pub fn empty(dimension: usize) -> Self {
        SparseVector { entries: Vec::new(), dimension }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, column: usize) -> f64 {
        match self.entries.binary_search_by_key(&(column as u32), |&(c, _)| c) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (ca, va) = self.entries[i];
            let (cb, vb) = other.entries[j];
            match ca.cmp(&cb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += va * vb;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Exact squared Euclidean distance, summed over the union of columns in
    /// increasing column order.
    pub fn squared_distance(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() || j < b.len() {
            let ca = a.get(i).map_or(u32::MAX, |e| e.0);
            let cb = b.get(j).map_or(u32::MAX, |e| e.0);
            let d = if ca < cb {
                i += 1;
                a[i - 1].1
            } else if cb < ca {
                j += 1;
                -b[j - 1].1
            } else {
                i += 1;
                j += 1;
                a[i - 1].1 - b[j - 1].1
            };
            acc += d * d;
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dimension];
        for &(c, v) in &self.entries {
            dense[c as usize] = v;
        }
        dense
    }
}

/// TF-IDF vector of `doc`; out-of-vocabulary tokens are ignored.
pub fn vectorize(vocab: &Vocabulary, doc: &TokenDocument) -> SparseVector {
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for token in &doc.tokens {
        if let Some(&col) = vocab.index.get(token.as_str()) {
            *counts.entry(col).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(u32, f64)> = counts
        .into_iter()
        .map(|(col, n)| (col, n as f64 * vocab.idf[col as usize]))
        .collect();
    let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut entries {
            *w /= norm;
        }
    }
    SparseVector { entries, dimension: vocab.len() }
}

/// Feature vectors paired with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vectors: Vec<SparseVector>,
    pub labels: Vec<FailureClass>,
}

impl Dataset {
    pub fn new(vectors: Vec<SparseVector>, labels: Vec<FailureClass>) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(TriageError::Shape { expected: vectors.len(), actual: labels.len() });
        }
        if let Some(first) = vectors.first() {
            if let Some(bad) = vectors.iter().find(|v| v.dimension != first.dimension) {
                return Err(TriageError::Shape { expected: first.dimension, actual: bad.dimension });
            }
        }
        Ok(Dataset { vectors, labels })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.dimension)
    }

    /// Distinct labels in class order.
    pub fn classes(&self) -> Vec<FailureClass> {
        let mut classes = self.labels.clone();
        classes.sort();
        classes.dedup();
        classes
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tokens: &[&str]) -> TokenDocument {
        tokens.iter().copied().collect()
    }

    fn fixture() -> Vec<TokenDocument> {
        vec![
            doc(&["error", "pod", "crash"]),
            doc(&["pod", "running"]),
            doc(&["error", "timeout"]),
        ]
    }

    #[test]
    fn vocabulary_of_three_docs() {
        let vocab = build_vocabulary(&fixture(), 1).unwrap();
        assert_eq!(vocab.terms(), ["crash", "error", "pod", "running", "timeout"]);
        let oracle = |df: f64| ((1.0 + 3.0) / (1.0 + df)).ln() + 1.0;
        assert!((vocab.idf("error").unwrap() - oracle(2.0)).abs() < 1e-9);
        assert!((vocab.idf("crash").unwrap() - oracle(1.0)).abs() < 1e-9);
        assert!((vocab.idf("error").unwrap() - 1.287682).abs() < 1e-6);
        assert!((vocab.idf("crash").unwrap() - 1.693147).abs() < 1e-6);
        assert!(vocab.idf_values().iter().all(|&w| w >= 1.0));
    }

    #[test]
    fn min_df_filters_and_single_doc_idf_is_one() {
        let vocab = build_vocabulary(&fixture(), 2).unwrap();
        assert_eq!(vocab.terms(), ["error", "pod"]);

        let single = build_vocabulary(&[doc(&["a1", "b2", "a1"])], 1).unwrap();
        assert!(single.idf_values().iter().all(|&w| w == 1.0));

        assert!(matches!(
            build_vocabulary(&fixture(), 4),
            Err(TriageError::EmptyVocabulary { min_df: 4, docs: 3 })
        ));
        assert!(build_vocabulary(&[], 1).is_err());
        assert!(build_vocabulary(&fixture(), 0).is_err());
    }

    #[test]
    fn vectorize_fixture_doc() {
        let vocab = build_vocabulary(&fixture(), 1).unwrap();
        let v = vectorize(&vocab, &fixture()[0]);
        let raw = [1.693147180560, 1.287682072452, 1.287682072452];
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cols: Vec<u32> = v.entries().iter().map(|e| e.0).collect();
        assert_eq!(cols, vec![0, 1, 2]);
        for ((_, w), r) in v.entries().iter().zip(raw) {
            assert!((w - r / norm).abs() < 1e-9);
        }
        assert!((v.norm() - 1.0).abs() < 1e-9);
        assert_eq!(v.dimension(), 5);
    }

    #[test]
    fn out_of_vocabulary_and_repeated_tokens() {
        let vocab = build_vocabulary(&fixture(), 1).unwrap();
        let empty = vectorize(&vocab, &doc(&["unknown", "words"]));
        assert!(empty.is_empty());
        assert_eq!(empty.dimension(), 5);
        for k in 1..5 {
            let v = vectorize(&vocab, &doc(&vec!["pod"; k]));
            assert_eq!(v.entries(), &[(2, 1.0)]);
        }
    }

    #[test]
    fn body_round_trip_is_exact() {
        let vocab = build_vocabulary(&fixture(), 1).unwrap();
        let body = vocab.to_body();
        let back = Vocabulary::from_body(&body).unwrap();
        assert_eq!(back, vocab);
        assert_eq!(back.to_body(), body);
        assert_eq!(back.checksum(), vocab.checksum());
        assert!(body.starts_with("n=3 min_df=1 terms=5\ncrash\t0\t1.69314718056e0\n"));
    }

    #[test]
    fn malformed_bodies_are_rejected() {
        for body in [
            "",
            "n=3 min_df=1\n",
            "n=1 min_df=1 terms=1\nonly\t0\n",
            "n=1 min_df=1 terms=2\nb\t0\t1e0\na\t1\t1e0\n",
            "n=1 min_df=1 terms=1\na\t1\t1e0\n",
            "n=1 min_df=1 terms=1\na\t0\t0.5e0\n",
            "n=1 min_df=1 terms=2\na\t0\t1e0\n",
        ] {
            assert!(Vocabulary::from_body(body).is_err(), "{body:?}");
        }
    }

    #[test]
    fn sparse_vector_helpers() {
        let a = SparseVector::new(vec![(3, 2.0), (0, 1.0), (1, 0.0)], 4).unwrap();
        assert_eq!(a.entries(), &[(0, 1.0), (3, 2.0)]);
        let b = SparseVector::from_dense(&[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(a.dot(&b), 2.0);
        assert_eq!(a.squared_distance(&b), 1.0 + 1.0 + 1.0);
        assert_eq!(a.get(3), 2.0);
        assert_eq!(a.get(2), 0.0);
        assert_eq!(a.to_dense(), vec![1.0, 0.0, 0.0, 2.0]);
        assert!(SparseVector::new(vec![(4, 1.0)], 4).is_err());
        assert!(SparseVector::new(vec![(1, 1.0), (1, 2.0)], 4).is_err());
    }

    #[test]
    fn dataset_shape_checks() {
        let v = SparseVector::empty(3);
        assert!(Dataset::new(vec![v.clone()], vec![]).is_err());
        assert!(Dataset::new(vec![v, SparseVector::empty(2)], vec![FailureClass::Cluster; 2]).is_err());
    }
}
