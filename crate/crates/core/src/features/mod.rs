//! Numeric document representations: sparse TF-IDF vectors and dense
//! averages of word embeddings.

mod embeddings;
mod tfidf;

pub use embeddings::{average_doc_vector, load_embeddings, EmbeddingTable};
pub use tfidf::{
    build_vocabulary, s_stem, tfidf_vector, TfIdfVector, Vocabulary, VocabularyOptions,
    ENGLISH_STOPWORDS,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty embedding file")]
    EmptyFile,
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-finite value")]
    NonFiniteValue { line: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// A dense document representation.
pub type DocVector = Vec<f64>;

/// Read access to a feature vector, dense or sparse.
pub trait FeatureVector {
    /// Number of dense components, or `None` for sparse input.
    fn dense_len(&self) -> Option<usize>;

    /// Visits the stored `(index, value)` entries.
    fn for_each_entry(&self, f: impl FnMut(usize, f64));

    fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        self.for_each_entry(|i, v| {
            if i < dim {
                out[i] += v
            }
        });
        out
    }
}

impl FeatureVector for [f64] {
    fn dense_len(&self) -> Option<usize> {
        Some(self.len())
    }

    fn for_each_entry(&self, mut f: impl FnMut(usize, f64)) {
        for (i, &v) in self.iter().enumerate() {
            f(i, v);
        }
    }
}

impl FeatureVector for Vec<f64> {
    fn dense_len(&self) -> Option<usize> {
        Some(self.len())
    }

    fn for_each_entry(&self, f: impl FnMut(usize, f64)) {
        self.as_slice().for_each_entry(f)
    }
}

impl FeatureVector for TfIdfVector {
    fn dense_len(&self) -> Option<usize> {
        None
    }

    fn for_each_entry(&self, mut f: impl FnMut(usize, f64)) {
        for &(i, v) in self.entries() {
            f(i as usize, v);
        }
    }
}
