//! Flat, hierarchical, and LCA-based precision/recall/F1 for single-label
//! predictions over a tree taxonomy.
//!
//! Hierarchical measures augment each label with its ancestors (root
//! excluded); LCA measures augment it only with the path up to the lowest
//! common ancestor of the true and predicted labels. Both are pooled over
//! pairs: numerators and denominators are summed before dividing.
//!
//! On a tree, with `l = lca(t, p)` and depths measured from the root:
//!
//! ```text
//! |Anc(t)| = depth(t)      |Anc(t) ∩ Anc(p)| = depth(l)
//! |Y_aug|  = depth(t) - depth(l) + [l ≠ root]
//! |Y_aug ∩ Ŷ_aug| = [l ≠ root]
//! ```
//!
//! so every measure reduces to depth arithmetic after one LCA query.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::ops::{Add, AddAssign};

use thiserror::Error;

use crate::taxonomy::{NodeId, Taxonomy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no prediction pairs")]
    EmptyInput,
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("the root label {0:?} cannot be a true or predicted class")]
    RootLabel(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two values, got {0}")]
    TooFewValues(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("document {0:?} has no prediction")]
    MissingPrediction(String),
    #[error("prediction for {0:?} has no gold label")]
    UnexpectedPrediction(String),
    #[error("document {0:?} listed twice")]
    DuplicateDocument(String),
    #[error("line {line}: expected \"doc_id<TAB>label\", got {content:?}")]
    Parse { line: usize, content: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionPair {
    pub doc_id: String,
    pub true_label: String,
    pub predicted_label: String,
}

impl PredictionPair {
    pub fn new(
        doc_id: impl Into<String>,
        true_label: impl Into<String>,
        predicted_label: impl Into<String>,
    ) -> Self {
        PredictionPair {
            doc_id: doc_id.into(),
            true_label: true_label.into(),
            predicted_label: predicted_label.into(),
        }
    }
}

/// Precision, recall, and F1.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// `num / den`, or 0 when the denominator is 0.
pub fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        Prf {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
        }
    }
}

impl fmt::Display for Prf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P={:.4} R={:.4} F1={:.4}",
            self.precision, self.recall, self.f1
        )
    }
}

/// Pooled set-size sums behind a hierarchical or LCA measure.
///
/// Counts from disjoint batches of pairs can be added before dividing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PooledCounts {
    pub overlap: u64,
    pub predicted: u64,
    pub truth: u64,
}

impl PooledCounts {
    pub fn scores(&self) -> Prf {
        Prf::from_pr(
            ratio(self.overlap as f64, self.predicted as f64),
            ratio(self.overlap as f64, self.truth as f64),
        )
    }
}

impl Add for PooledCounts {
    type Output = PooledCounts;
    fn add(self, rhs: Self) -> Self {
        PooledCounts {
            overlap: self.overlap + rhs.overlap,
            predicted: self.predicted + rhs.predicted,
            truth: self.truth + rhs.truth,
        }
    }
}

impl AddAssign for PooledCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for PooledCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(PooledCounts::default(), Add::add)
    }
}

/// Set sizes for one pair under ancestor augmentation.
pub fn hier_counts(tax: &Taxonomy, truth: NodeId, predicted: NodeId) -> PooledCounts {
    let l = tax.lca_ids(truth, predicted);
    PooledCounts {
        overlap: tax.depth(l) as u64,
        predicted: tax.depth(predicted) as u64,
        truth: tax.depth(truth) as u64,
    }
}

/// Set sizes for one pair under LCA-path augmentation.
pub fn lca_counts(tax: &Taxonomy, truth: NodeId, predicted: NodeId) -> PooledCounts {
    let l = tax.lca_ids(truth, predicted);
    let shared = u64::from(l != tax.root());
    let dl = tax.depth(l) as u64;
    PooledCounts {
        overlap: shared,
        predicted: tax.depth(predicted) as u64 - dl + shared,
        truth: tax.depth(truth) as u64 - dl + shared,
    }
}

fn resolve(tax: &Taxonomy, label: &str) -> Result<NodeId, MetricsError> {
    let id = tax
        .id(label)
        .map_err(|_| MetricsError::UnknownLabel(label.to_string()))?;
    if id == tax.root() {
        return Err(MetricsError::RootLabel(label.to_string()));
    }
    Ok(id)
}

fn pooled(
    pairs: &[PredictionPair],
    tax: &Taxonomy,
    per_pair: fn(&Taxonomy, NodeId, NodeId) -> PooledCounts,
) -> Result<PooledCounts, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut total = PooledCounts::default();
    for pair in pairs {
        let t = resolve(tax, &pair.true_label)?;
        let p = resolve(tax, &pair.predicted_label)?;
        total += per_pair(tax, t, p);
    }
    Ok(total)
}

/// Hierarchical precision, recall, and F1 (hP, hR, hF1).
pub fn hier_scores(pairs: &[PredictionPair], tax: &Taxonomy) -> Result<Prf, MetricsError> {
    Ok(pooled(pairs, tax, hier_counts)?.scores())
}

/// LCA-based precision, recall, and F1 (lcaP, lcaR, lcaF1).
pub fn lca_scores(pairs: &[PredictionPair], tax: &Taxonomy) -> Result<Prf, MetricsError> {
    Ok(pooled(pairs, tax, lca_counts)?.scores())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlatAveraging {
    /// Pooled contingency table across classes.
    Micro,
    /// Unweighted mean of per-class precision and recall; F1 is the harmonic
    /// mean of the two averages.
    #[default]
    Macro,
    /// Unweighted mean of per-class precision, recall, and F1 separately.
    MacroPerClassF1,
}

#[derive(Debug, Default, Clone, Copy)]
struct Contingency {
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl Contingency {
    fn prf(&self) -> Prf {
        Prf::from_pr(
            ratio(self.tp as f64, (self.tp + self.fp) as f64),
            ratio(self.tp as f64, (self.tp + self.fn_) as f64),
        )
    }
}

/// Flat (hierarchy-ignoring) scores.
///
/// Macro variants average over the classes of `class_set` that occur at least
/// once as a true or predicted label.
pub fn flat_scores(
    pairs: &[PredictionPair],
    class_set: &BTreeSet<String>,
    averaging: FlatAveraging,
) -> Result<Prf, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut table: HashMap<&str, Contingency> = HashMap::new();
    for pair in pairs {
        for label in [&pair.true_label, &pair.predicted_label] {
            if !class_set.contains(label) {
                return Err(MetricsError::UnknownLabel(label.clone()));
            }
        }
        if pair.true_label == pair.predicted_label {
            table.entry(&pair.true_label).or_default().tp += 1;
        } else {
            table.entry(&pair.predicted_label).or_default().fp += 1;
            table.entry(&pair.true_label).or_default().fn_ += 1;
        }
    }

    Ok(match averaging {
        FlatAveraging::Micro => {
            let pooled = table.values().fold(Contingency::default(), |acc, c| Contingency {
                tp: acc.tp + c.tp,
                fp: acc.fp + c.fp,
                fn_: acc.fn_ + c.fn_,
            });
            pooled.prf()
        }
        FlatAveraging::Macro | FlatAveraging::MacroPerClassF1 => {
            // Iterate in class order so the float sums are reproducible.
            let per_class: Vec<Prf> = class_set
                .iter()
                .filter_map(|c| table.get(c.as_str()))
                .map(Contingency::prf)
                .collect();
            let n = per_class.len() as f64;
            let p = per_class.iter().map(|s| s.precision).sum::<f64>() / n;
            let r = per_class.iter().map(|s| s.recall).sum::<f64>() / n;
            if averaging == FlatAveraging::Macro {
                Prf::from_pr(p, r)
            } else {
                Prf {
                    precision: p,
                    recall: r,
                    f1: per_class.iter().map(|s| s.f1).sum::<f64>() / n,
                }
            }
        }
    })
}

/// All nine measures for one evaluation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub flat_macro: Prf,
    pub flat_micro: Prf,
    pub hier: Prf,
    pub lca: Prf,
    pub n_pairs: usize,
}

impl MetricsReport {
    /// Scores `pairs` with flat classes taken as every non-root node.
    pub fn compute(
        pairs: &[PredictionPair],
        tax: &Taxonomy,
        averaging: FlatAveraging,
    ) -> Result<Self, MetricsError> {
        let classes: BTreeSet<String> = tax
            .node_ids()
            .filter(|&n| n != tax.root())
            .map(|n| tax.label(n).to_string())
            .collect();
        let macro_averaging = match averaging {
            FlatAveraging::Micro => FlatAveraging::Macro,
            other => other,
        };
        Ok(MetricsReport {
            flat_macro: flat_scores(pairs, &classes, macro_averaging)?,
            flat_micro: flat_scores(pairs, &classes, FlatAveraging::Micro)?,
            hier: hier_scores(pairs, tax)?,
            lca: lca_scores(pairs, tax)?,
            n_pairs: pairs.len(),
        })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pairs       {}", self.n_pairs)?;
        writeln!(f, "flat macro  {}", self.flat_macro)?;
        writeln!(f, "flat micro  {}", self.flat_micro)?;
        writeln!(f, "hier        {}", self.hier)?;
        write!(f, "lca         {}", self.lca)
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricsError::TooFewValues(xs.len()));
    }
    let mx = mean(xs).unwrap_or_default();
    let my = mean(ys).unwrap_or_default();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Reads a `doc_id<TAB>label` file, keeping line order.
pub fn read_label_file<R: BufRead>(reader: R) -> Result<Vec<(String, String)>, MetricsError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MetricsError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match line.split_once('\t') {
            Some((id, label)) if !id.is_empty() && !label.trim().is_empty() => {
                out.push((id.to_string(), label.trim().to_string()))
            }
            _ => {
                return Err(MetricsError::Parse {
                    line: i + 1,
                    content: line,
                })
            }
        }
    }
    Ok(out)
}

/// Joins gold and predicted labels on document id, in gold order.
///
/// Every gold document needs exactly one prediction and vice versa.
pub fn join_on_doc_id(
    gold: &[(String, String)],
    predicted: &[(String, String)],
) -> Result<Vec<PredictionPair>, MetricsError> {
    let mut by_id: HashMap<&str, &str> = HashMap::with_capacity(predicted.len());
    for (id, label) in predicted {
        if by_id.insert(id, label).is_some() {
            return Err(MetricsError::DuplicateDocument(id.clone()));
        }
    }
    let mut seen = std::collections::HashSet::with_capacity(gold.len());
    let mut pairs = Vec::with_capacity(gold.len());
    for (id, label) in gold {
        if !seen.insert(id.as_str()) {
            return Err(MetricsError::DuplicateDocument(id.clone()));
        }
        let pred = by_id
            .get(id.as_str())
            .ok_or_else(|| MetricsError::MissingPrediction(id.clone()))?;
        pairs.push(PredictionPair::new(id.as_str(), label.as_str(), *pred));
    }
    if let Some((id, _)) = predicted.iter().find(|(id, _)| !seen.contains(id.as_str())) {
        return Err(MetricsError::UnexpectedPrediction(id.clone()));
    }
    Ok(pairs)
}
