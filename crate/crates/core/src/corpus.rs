//! Document ingestion and dataset preparation.
//!
//! Raw RCV1-style XML documents are reduced to a single label each (the least
//! frequent of their topic codes), split into train and test sets, and the
//! training set is then cut into one [`LocalDataset`] per internal taxonomy
//! node for local-per-parent training.
//!
//! Random splits use `ChaCha8Rng::seed_from_u64(seed)` followed by the
//! `rand` 0.8 Fisher-Yates shuffle of document positions; the first
//! `round(fraction * n)` shuffled positions form the test set. Both sets keep
//! the input order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::taxonomy::{vc_label, NodeId, Taxonomy};

/// Class attribute of the topic code group in RCV1 metadata.
pub const TOPIC_CODE_CLASS: &str = "bip:topics:1.0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("document {0:?} has no topic codes")]
    NoTopicCodes(String),
    #[error("document {0:?} has no text")]
    EmptyText(String),
    #[error("document {doc_id:?}: unknown label {label:?}")]
    UnknownLabel { doc_id: String, label: String },
    #[error("document {0:?} is labeled with the taxonomy root")]
    RootLabel(String),
    #[error("holdout fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("need at least {needed} documents, got {got}")]
    TooFewDocuments { needed: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub text: String,
    pub topic_codes: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDocument {
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub label: String,
}

impl LabeledDocument {
    pub fn new(doc_id: impl Into<String>, tokens: Vec<String>, label: impl Into<String>) -> Self {
        LabeledDocument {
            doc_id: doc_id.into(),
            tokens,
            label: label.into(),
        }
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn normalize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Decodes ISO-8859-1 bytes; every byte maps to the code point of equal value.
pub fn decode_latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| char::from(b)).collect()
}

/// Parses one RCV1 news item.
///
/// The document id is the `itemid` attribute of the root element, or empty
/// when absent. Text is the headline followed by every paragraph of the
/// `<text>` element, whitespace collapsed to single spaces.
pub fn ingest_rcv1_xml(xml: &str) -> Result<RawDocument, CorpusError> {
    // roxmltree rejects DTDs by default; RCV1 files carry none, but be lenient.
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let doc = roxmltree::Document::parse_with_options(xml, opts)
        .map_err(|e| CorpusError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    let doc_id = root.attribute("itemid").unwrap_or_default().to_string();

    let mut pieces: Vec<String> = Vec::new();
    let descendants = || root.descendants().filter(|n| n.is_element());
    if let Some(h) = descendants().find(|n| n.has_tag_name("headline")) {
        pieces.push(collect_text(h));
    }
    if let Some(body) = descendants().find(|n| n.has_tag_name("text")) {
        let paragraphs: Vec<_> = body
            .children()
            .filter(|n| n.is_element() && n.has_tag_name("p"))
            .collect();
        if paragraphs.is_empty() {
            pieces.push(collect_text(body));
        } else {
            pieces.extend(paragraphs.into_iter().map(collect_text));
        }
    }
    let text = pieces
        .iter()
        .flat_map(|p| p.split_whitespace())
        .collect::<Vec<_>>()
        .join(" ");
    if text.is_empty() {
        return Err(CorpusError::EmptyText(doc_id));
    }

    let topic_codes: BTreeSet<String> = descendants()
        .filter(|n| n.has_tag_name("codes") && n.attribute("class") == Some(TOPIC_CODE_CLASS))
        .flat_map(|group| group.children())
        .filter(|n| n.is_element() && n.has_tag_name("code"))
        .filter_map(|n| n.attribute("code"))
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect();
    if topic_codes.is_empty() {
        return Err(CorpusError::NoTopicCodes(doc_id));
    }

    Ok(RawDocument {
        doc_id,
        text,
        topic_codes,
    })
}

fn collect_text(node: roxmltree::Node<'_, '_>) -> String {
    node.descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Keeps, for every document, its topic code with the lowest corpus-wide
/// document frequency (ties go to the lexicographically smallest code).
///
/// Frequencies count raw code occurrences across all input documents, before
/// any reduction.
pub fn reduce_to_single_label(
    docs: &[RawDocument],
    tax: &Taxonomy,
) -> Result<Vec<LabeledDocument>, CorpusError> {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        if doc.topic_codes.is_empty() {
            return Err(CorpusError::NoTopicCodes(doc.doc_id.clone()));
        }
        for code in &doc.topic_codes {
            let id = tax.id(code).map_err(|_| CorpusError::UnknownLabel {
                doc_id: doc.doc_id.clone(),
                label: code.clone(),
            })?;
            if id == tax.root() {
                return Err(CorpusError::RootLabel(doc.doc_id.clone()));
            }
            *freq.entry(code).or_default() += 1;
        }
    }
    Ok(docs
        .iter()
        .map(|doc| {
            // topic_codes iterates in lexicographic order, so min_by_key keeps
            // the smallest code among equally rare ones.
            let label = doc
                .topic_codes
                .iter()
                .min_by_key(|c| freq[c.as_str()])
                .expect("checked non-empty");
            LabeledDocument::new(doc.doc_id.clone(), normalize(&doc.text), label.clone())
        })
        .collect())
}

/// Checks that every label is a known, non-root taxonomy node.
pub fn validate_labels(docs: &[LabeledDocument], tax: &Taxonomy) -> Result<(), CorpusError> {
    for doc in docs {
        label_id(doc, tax)?;
    }
    Ok(())
}

fn label_id(doc: &LabeledDocument, tax: &Taxonomy) -> Result<NodeId, CorpusError> {
    let id = tax.id(&doc.label).map_err(|_| CorpusError::UnknownLabel {
        doc_id: doc.doc_id.clone(),
        label: doc.label.clone(),
    })?;
    if id == tax.root() {
        return Err(CorpusError::RootLabel(doc.doc_id.clone()));
    }
    Ok(id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<LabeledDocument>,
    pub test: Vec<LabeledDocument>,
    pub seed: u64,
}

/// Uniform random holdout of `round(fraction * n)` documents.
pub fn holdout_split(
    docs: &[LabeledDocument],
    fraction: f64,
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::BadFraction(fraction));
    }
    if docs.len() < 2 {
        return Err(CorpusError::TooFewDocuments {
            needed: 2,
            got: docs.len(),
        });
    }
    let n_test = (fraction * docs.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; docs.len()];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (doc, t) in docs.iter().zip(is_test) {
        if t {
            test.push(doc.clone());
        } else {
            train.push(doc.clone());
        }
    }
    Ok(CorpusSplit { train, test, seed })
}

/// Training examples for the local classifier of one internal node.
///
/// Local labels are the node's children plus, below the root, the node's
/// virtual category, which stands for "stop here".
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset<'a> {
    pub parent: String,
    pub vc_label: Option<String>,
    /// Children in lexicographic order, then the virtual category if any.
    pub classes: Vec<String>,
    pub examples: Vec<(&'a LabeledDocument, String)>,
}

/// One local dataset per internal node, in [`Taxonomy::internal_nodes`]
/// order.
///
/// A document labeled `n` joins the dataset of every proper ancestor `a` of
/// `n` under the child of `a` leading to `n`, and, when `n` is itself
/// internal, the dataset of `n` under its virtual category.
pub fn hierarchical_split<'a>(
    train: &'a [LabeledDocument],
    tax: &Taxonomy,
) -> Result<Vec<LocalDataset<'a>>, CorpusError> {
    let internal = tax.internal_node_ids();
    let slot: HashMap<NodeId, usize> = internal.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut datasets: Vec<LocalDataset<'a>> = internal
        .iter()
        .map(|&n| {
            let vc = (n != tax.root()).then(|| vc_label(tax.label(n)));
            let mut classes: Vec<String> = tax
                .children(n)
                .iter()
                .map(|&c| tax.label(c).to_string())
                .collect();
            classes.extend(vc.clone());
            LocalDataset {
                parent: tax.label(n).to_string(),
                vc_label: vc,
                classes,
                examples: Vec::new(),
            }
        })
        .collect();

    for doc in train {
        let id = label_id(doc, tax)?;
        let path = tax.path_from_root(id);
        for edge in path.windows(2) {
            let ds = &mut datasets[slot[&edge[0]]];
            ds.examples.push((doc, tax.label(edge[1]).to_string()));
        }
        if let Some(&s) = slot.get(&id) {
            let ds = &mut datasets[s];
            let vc = ds.vc_label.clone().expect("non-root internal node has a VC");
            ds.examples.push((doc, vc));
        }
    }
    Ok(datasets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalStats {
    pub n_examples: usize,
    pub n_local_labels: usize,
    /// Largest local-label count over the smallest non-zero one.
    pub imbalance: f64,
}

pub fn local_dataset_stats(ds: &LocalDataset<'_>) -> Result<LocalStats, CorpusError> {
    label_count_stats(ds.examples.iter().map(|(_, l)| l.as_str()))
}

fn label_count_stats<'s>(labels: impl Iterator<Item = &'s str>) -> Result<LocalStats, CorpusError> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut n = 0;
    for l in labels {
        *counts.entry(l).or_default() += 1;
        n += 1;
    }
    let max = counts.values().max().ok_or(CorpusError::EmptyDataset)?;
    let min = counts.values().min().ok_or(CorpusError::EmptyDataset)?;
    Ok(LocalStats {
        n_examples: n,
        n_local_labels: counts.len(),
        imbalance: *max as f64 / *min as f64,
    })
}

/// Reads a plain corpus file: `label<TAB>doc_id<TAB>text` per line.
///
/// Text is run through [`normalize`].
pub fn read_plain_corpus<R: BufRead>(reader: R) -> Result<Vec<LabeledDocument>, CorpusError> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let (label, id, text) = (fields.next(), fields.next(), fields.next());
        match (label, id) {
            (Some(label), Some(id)) if !label.is_empty() && !id.is_empty() => {
                docs.push(LabeledDocument::new(
                    id,
                    normalize(text.unwrap_or_default()),
                    label,
                ));
            }
            _ => {
                return Err(CorpusError::Parse {
                    line: i + 1,
                    reason: "expected \"label<TAB>doc_id<TAB>text\"".into(),
                })
            }
        }
    }
    Ok(docs)
}

/// Writes documents in the plain corpus format, tokens joined by spaces.
pub fn write_plain_corpus<W: Write>(docs: &[LabeledDocument], mut out: W) -> std::io::Result<()> {
    for doc in docs {
        writeln!(out, "{}\t{}\t{}", doc.label, doc.doc_id, doc.tokens.join(" "))?;
    }
    Ok(())
}

/// Writes a local dataset as `local_label<TAB>doc_id<TAB>text` lines.
pub fn write_local_dataset<W: Write>(ds: &LocalDataset<'_>, mut out: W) -> std::io::Result<()> {
    for (doc, local) in &ds.examples {
        writeln!(out, "{}\t{}\t{}", local, doc.doc_id, doc.tokens.join(" "))?;
    }
    Ok(())
}
