//! Hierarchical text classification.
//!
//! * [`taxonomy`]: label trees, ancestors, lowest common ancestors.
//! * [`metrics`]: flat, hierarchical, and LCA-based precision/recall/F1.
//! * [`corpus`]: RCV1 ingestion, single-label reduction, splits, and
//!   per-parent local datasets.
//! * [`features`]: TF-IDF vectors and averaged word embeddings.
//! * [`learner`]: softmax linear and joint-embedding classifiers.
//! * [`strategy`]: flat and top-down local-classifier-per-parent models.
//! * [`cli`]: the `htc` command-line driver.

pub mod cli;
pub mod corpus;
pub mod features;
pub mod kv;
pub mod learner;
pub mod metrics;
pub mod strategy;
pub mod synthetic;
pub mod taxonomy;

pub use taxonomy::{NodeId, Taxonomy, TaxonomyError};
