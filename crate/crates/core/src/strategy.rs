//! Flat and hierarchical (local classifier per parent node) models.
//!
//! A [`FlatModel`] is one multi-class classifier over every label seen in
//! training. A [`HierModel`] holds one local classifier per internal taxonomy
//! node, trained on that node's [`LocalDataset`]; prediction walks down from
//! the root taking the argmax of each local distribution, and stops when it
//! reaches a leaf or a node's virtual category wins.
//!
//! Local models train in parallel. Each gets the seed
//! `config.seed.wrapping_add(fnv1a64(node_label))`, so results do not depend
//! on thread scheduling.
//!
//! # On-disk layout
//!
//! A model directory holds `manifest.txt` (`key=value`), shared feature
//! files (`vocabulary.tsv` and optionally `stopwords.txt` for TF-IDF,
//! `embeddings.txt` for averaged embeddings), and the learner files described
//! in [`crate::learner::LearnerModel`]. A flat model's learner files use the
//! stem `model`; a hierarchical model adds `taxonomy.txt` and stores node `n`
//! under `nodes/` with the stem [`escape_label`]`(n)`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{LabeledDocument, LocalDataset};
use crate::features::{
    average_doc_vector, load_embeddings, tfidf_vector, EmbeddingTable, FeatureError, Vocabulary,
    VocabularyOptions,
};
use crate::kv::{KeyValues, KvError};
use crate::learner::{
    fnv1a64, train_joint_embedding, train_softmax_linear, Labels, LearnerError, LearnerModel,
    ProbabilityDistribution, TrainConfig, TrainWarning, Trained,
};
use crate::taxonomy::{Taxonomy, TaxonomyError, VC_PREFIX};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const FLAT_STEM: &str = "model";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("no training documents")]
    EmptyTrainingSet,
    #[error("internal node {0:?} has no local dataset")]
    MissingInternalNode(String),
    #[error("local dataset for {0:?} does not belong to an internal node")]
    UnexpectedDataset(String),
    #[error("node {node:?}: local class {class:?} is neither a child nor its virtual category")]
    BadLocalClass { node: String, class: String },
    #[error("the root local model must be trained")]
    UntrainedRoot,
    #[error("class {0:?} is not a non-root taxonomy node")]
    BadFlatClass(String),
    #[error("features and learner do not match: {0}")]
    FeatureMismatch(String),
    #[error("model directory: {0}")]
    Format(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Manifest(#[from] KvError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for StrategyError {
    fn from(e: std::io::Error) -> Self {
        StrategyError::Io(e.to_string())
    }
}

/// Anything that maps a token list to a distribution over its classes.
pub trait Classifier: Send + Sync {
    fn classes(&self) -> &[String];
    fn predict_proba(&self, tokens: &[String]) -> ProbabilityDistribution;
}

/// How documents become learner input.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    /// The joint-embedding learner reads tokens directly.
    Learned,
    TfIdf(Arc<Vocabulary>),
    EmbeddingAverage(Arc<EmbeddingTable>),
}

impl Features {
    pub fn name(&self) -> &'static str {
        match self {
            Features::Learned => "learned",
            Features::TfIdf(_) => "tfidf",
            Features::EmbeddingAverage(_) => "embedding-average",
        }
    }

    fn dimension(&self) -> Option<usize> {
        match self {
            Features::Learned => None,
            Features::TfIdf(v) => Some(v.len()),
            Features::EmbeddingAverage(t) => Some(t.dimension()),
        }
    }

    /// Size of the document representation, as reported in results tables.
    pub fn size(&self, config: &TrainConfig) -> usize {
        self.dimension().unwrap_or(config.dimension)
    }
}

/// Which learner to train, and on which features.
pub type LearnerSpec = Features;

/// A trained learner together with its feature pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseModel {
    features: Features,
    learner: LearnerModel,
}

impl BaseModel {
    pub fn new(features: Features, learner: LearnerModel) -> Result<Self, StrategyError> {
        match (&features, &learner) {
            (Features::Learned, LearnerModel::Joint(_)) => {}
            (Features::TfIdf(_) | Features::EmbeddingAverage(_), LearnerModel::Linear(m)) => {
                let d = features.dimension().expect("fixed-size features");
                if m.dimension() != d {
                    return Err(StrategyError::FeatureMismatch(format!(
                        "{} features have {d} dimensions, model expects {}",
                        features.name(),
                        m.dimension()
                    )));
                }
            }
            _ => {
                return Err(StrategyError::FeatureMismatch(format!(
                    "{} learner cannot use {} features",
                    learner.kind(),
                    features.name()
                )))
            }
        }
        Ok(BaseModel { features, learner })
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn learner(&self) -> &LearnerModel {
        &self.learner
    }
}

impl Classifier for BaseModel {
    fn classes(&self) -> &[String] {
        self.learner.classes()
    }

    fn predict_proba(&self, tokens: &[String]) -> ProbabilityDistribution {
        match (&self.features, &self.learner) {
            (Features::Learned, LearnerModel::Joint(m)) => m.predict_proba(tokens),
            (Features::TfIdf(v), LearnerModel::Linear(m)) => m
                .predict_proba(&tfidf_vector(tokens, v))
                .expect("dimension checked at construction"),
            (Features::EmbeddingAverage(t), LearnerModel::Linear(m)) => m
                .predict_proba(&average_doc_vector(tokens, t))
                .expect("dimension checked at construction"),
            _ => unreachable!("pairing checked at construction"),
        }
    }
}

/// Training diagnostics for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// The internal node for local models, `None` for a flat model.
    pub node: Option<String>,
    pub n_examples: usize,
    pub epoch_losses: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub warnings: Vec<TrainWarning>,
}

/// Trains one base model. `classes` fixes the class order; otherwise the
/// sorted distinct labels are used.
pub fn train_base(
    docs: &[&[String]],
    labels: &[&str],
    classes: Option<Vec<String>>,
    spec: &LearnerSpec,
    config: &TrainConfig,
) -> Result<Trained<BaseModel>, StrategyError> {
    let labels = Labels::new(labels, classes)?;
    let trained = match spec {
        Features::Learned => {
            let t = train_joint_embedding(docs, &labels, config)?;
            wrap(t, LearnerModel::Joint)
        }
        Features::TfIdf(v) => {
            let x: Vec<_> = docs.iter().map(|d| tfidf_vector(d, v)).collect();
            wrap(train_softmax_linear(&x, &labels, v.len(), config)?, LearnerModel::Linear)
        }
        Features::EmbeddingAverage(t) => {
            let x: Vec<_> = docs.iter().map(|d| average_doc_vector(d, t)).collect();
            wrap(
                train_softmax_linear(&x, &labels, t.dimension(), config)?,
                LearnerModel::Linear,
            )
        }
    };
    Ok(Trained {
        model: BaseModel::new(spec.clone(), trained.model)?,
        epoch_losses: trained.epoch_losses,
        epoch_seconds: trained.epoch_seconds,
        warnings: trained.warnings,
    })
}

fn wrap<M>(t: Trained<M>, f: impl FnOnce(M) -> LearnerModel) -> Trained<LearnerModel> {
    Trained {
        model: f(t.model),
        epoch_losses: t.epoch_losses,
        epoch_seconds: t.epoch_seconds,
        warnings: t.warnings,
    }
}

/// One classifier over every observed label.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatModel<C = BaseModel> {
    model: C,
}

impl<C: Classifier> FlatModel<C> {
    pub fn new(model: C) -> Self {
        FlatModel { model }
    }

    pub fn classes(&self) -> &[String] {
        self.model.classes()
    }

    pub fn model(&self) -> &C {
        &self.model
    }

    /// Checks that every class is a non-root node of `tax`.
    pub fn check_classes(&self, tax: &Taxonomy) -> Result<(), StrategyError> {
        for c in self.classes() {
            if !tax.contains(c) || c == tax.root_label() {
                return Err(StrategyError::BadFlatClass(c.clone()));
            }
        }
        Ok(())
    }
}

pub fn train_flat(
    train: &[LabeledDocument],
    spec: &LearnerSpec,
    config: &TrainConfig,
) -> Result<(FlatModel, TrainReport), StrategyError> {
    if train.is_empty() {
        return Err(StrategyError::EmptyTrainingSet);
    }
    let docs: Vec<&[String]> = train.iter().map(|d| d.tokens.as_slice()).collect();
    let labels: Vec<&str> = train.iter().map(|d| d.label.as_str()).collect();
    let t = train_base(&docs, &labels, None, spec, config)?;
    let report = TrainReport {
        node: None,
        n_examples: train.len(),
        epoch_losses: t.epoch_losses,
        epoch_seconds: t.epoch_seconds,
        warnings: t.warnings,
    };
    Ok((FlatModel::new(t.model), report))
}

/// Argmax over the class list; the first class wins ties.
pub fn predict_flat<'m, C: Classifier>(model: &'m FlatModel<C>, tokens: &[String]) -> &'m str {
    &model.classes()[model.model.predict_proba(tokens).argmax()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    LeafReached,
    /// The current node's virtual category won, or the node has no trained
    /// local model because no training document reached it.
    VirtualCategory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionPath {
    /// Chosen nodes, from a child of the root down to the returned label.
    pub nodes: Vec<String>,
    pub stop_reason: StopReason,
}

/// The local classifier of one internal node.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel<C> {
    pub node: String,
    /// `None` when the node's local dataset was empty.
    pub model: Option<C>,
}

/// One local classifier per internal node of a taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct HierModel<C = BaseModel> {
    taxonomy: Taxonomy,
    locals: Vec<LocalModel<C>>,
    slot: HashMap<String, usize>,
}

impl<C: Classifier> HierModel<C> {
    /// Assembles a model, checking that there is exactly one local model per
    /// internal node, that the root's is trained, and that every local class
    /// is a child of its node or the node's virtual category.
    pub fn from_parts(taxonomy: Taxonomy, locals: Vec<LocalModel<C>>) -> Result<Self, StrategyError> {
        let internal: Vec<String> = internal_labels(&taxonomy);
        let mut slot = HashMap::new();
        for (i, local) in locals.iter().enumerate() {
            if !internal.contains(&local.node) {
                return Err(StrategyError::UnexpectedDataset(local.node.clone()));
            }
            if slot.insert(local.node.clone(), i).is_some() {
                return Err(StrategyError::Format(format!(
                    "two local models for {:?}",
                    local.node
                )));
            }
            if let Some(m) = &local.model {
                let allowed = allowed_local_classes(&taxonomy, &local.node);
                for c in m.classes() {
                    if !allowed.contains(c) {
                        return Err(StrategyError::BadLocalClass {
                            node: local.node.clone(),
                            class: c.clone(),
                        });
                    }
                }
            }
        }
        if let Some(missing) = internal.iter().find(|n| !slot.contains_key(*n)) {
            return Err(StrategyError::MissingInternalNode(missing.clone()));
        }
        if locals[slot[taxonomy.root_label()]].model.is_none() {
            return Err(StrategyError::UntrainedRoot);
        }
        Ok(HierModel {
            taxonomy,
            locals,
            slot,
        })
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    /// Local models in [`Taxonomy::internal_nodes`] order when trained by
    /// [`train_lcpn_vc`].
    pub fn locals(&self) -> &[LocalModel<C>] {
        &self.locals
    }

    pub fn local(&self, node: &str) -> Option<&LocalModel<C>> {
        self.slot.get(node).map(|&i| &self.locals[i])
    }
}

fn internal_labels(tax: &Taxonomy) -> Vec<String> {
    tax.internal_nodes().into_iter().map(String::from).collect()
}

fn allowed_local_classes(tax: &Taxonomy, node: &str) -> HashSet<String> {
    let mut allowed: HashSet<String> = tax
        .children(tax.id(node).expect("internal node"))
        .iter()
        .map(|&c| tax.label(c).to_string())
        .collect();
    if node != tax.root_label() {
        allowed.insert(format!("{VC_PREFIX}{node}"));
    }
    allowed
}

/// Trains one local model per dataset, in parallel.
///
/// `locals` must come from [`crate::corpus::hierarchical_split`] over `tax`.
/// A node whose dataset is empty gets no model; prediction stops there.
pub fn train_lcpn_vc(
    locals: &[LocalDataset<'_>],
    tax: &Taxonomy,
    spec: &LearnerSpec,
    config: &TrainConfig,
) -> Result<(HierModel, Vec<TrainReport>), StrategyError> {
    let by_node: HashMap<&str, &LocalDataset<'_>> =
        locals.iter().map(|d| (d.parent.as_str(), d)).collect();
    let internal = internal_labels(tax);
    if let Some(missing) = internal.iter().find(|n| !by_node.contains_key(n.as_str())) {
        return Err(StrategyError::MissingInternalNode(missing.clone()));
    }
    if let Some(extra) = locals.iter().find(|d| !internal.contains(&d.parent)) {
        return Err(StrategyError::UnexpectedDataset(extra.parent.clone()));
    }
    if by_node[tax.root_label()].examples.is_empty() {
        return Err(StrategyError::EmptyTrainingSet);
    }

    let results: Vec<Result<(LocalModel<BaseModel>, TrainReport), StrategyError>> = internal
        .par_iter()
        .map(|node| {
            let ds = by_node[node.as_str()];
            let mut report = TrainReport {
                node: Some(node.clone()),
                n_examples: ds.examples.len(),
                epoch_losses: Vec::new(),
                epoch_seconds: Vec::new(),
                warnings: Vec::new(),
            };
            if ds.examples.is_empty() {
                let local = LocalModel {
                    node: node.clone(),
                    model: None,
                };
                return Ok((local, report));
            }
            let docs: Vec<&[String]> = ds.examples.iter().map(|(d, _)| d.tokens.as_slice()).collect();
            let labels: Vec<&str> = ds.examples.iter().map(|(_, l)| l.as_str()).collect();
            let node_config = TrainConfig {
                seed: node_seed(config.seed, node),
                ..config.clone()
            };
            let t = train_base(&docs, &labels, Some(ds.classes.clone()), spec, &node_config)?;
            report.epoch_losses = t.epoch_losses;
            report.epoch_seconds = t.epoch_seconds;
            report.warnings = t.warnings;
            let local = LocalModel {
                node: node.clone(),
                model: Some(t.model),
            };
            Ok((local, report))
        })
        .collect();

    let mut models = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        let (m, rep) = r?;
        models.push(m);
        reports.push(rep);
    }
    Ok((HierModel::from_parts(tax.clone(), models)?, reports))
}

/// Seed of the local model at `node`.
pub fn node_seed(seed: u64, node: &str) -> u64 {
    seed.wrapping_add(fnv1a64(node.as_bytes()))
}

/// Top-down prediction with virtual-category stopping.
pub fn predict_top_down<C: Classifier>(model: &HierModel<C>, tokens: &[String]) -> (String, PredictionPath) {
    let tax = &model.taxonomy;
    let mut current = tax.root_label().to_string();
    let mut nodes = Vec::new();
    let stop_reason = loop {
        let Some(local) = model.local(&current) else {
            break StopReason::LeafReached;
        };
        let Some(m) = &local.model else {
            break StopReason::VirtualCategory;
        };
        let choice = &m.classes()[m.predict_proba(tokens).argmax()];
        if choice.starts_with(VC_PREFIX) {
            break StopReason::VirtualCategory;
        }
        current = choice.clone();
        nodes.push(current.clone());
    };
    (current, PredictionPath { nodes, stop_reason })
}

/// File stem for a node label: ASCII letters, digits, `_` and `-` are kept,
/// every other byte becomes `%XX` (uppercase hex).
pub fn escape_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for &b in label.as_bytes() {
        if b.is_ascii_alphanumeric() || b == b'_' || b == b'-' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Either kind of trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Flat(FlatModel),
    Hier(HierModel),
}

impl TrainedModel {
    pub fn strategy_name(&self) -> &'static str {
        match self {
            TrainedModel::Flat(_) => "flat",
            TrainedModel::Hier(_) => "lcpn-vc",
        }
    }

    fn any_base(&self) -> &BaseModel {
        match self {
            TrainedModel::Flat(f) => &f.model,
            TrainedModel::Hier(h) => h.locals[h.slot[h.taxonomy.root_label()]]
                .model
                .as_ref()
                .expect("root is trained"),
        }
    }

    pub fn features(&self) -> &Features {
        self.any_base().features()
    }

    pub fn learner_kind(&self) -> &'static str {
        self.any_base().learner().kind()
    }

    /// The predicted label for `tokens`.
    pub fn predict(&self, tokens: &[String]) -> String {
        match self {
            TrainedModel::Flat(f) => predict_flat(f, tokens).to_string(),
            TrainedModel::Hier(h) => predict_top_down(h, tokens).0,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), StrategyError> {
        std::fs::create_dir_all(dir)?;
        let features = self.features();
        let mut manifest = KeyValues::new();
        manifest
            .set("format_version", MODEL_FORMAT_VERSION)
            .set("strategy", self.strategy_name())
            .set("learner", self.learner_kind())
            .set("representation", features.name());
        save_features(features, dir)?;
        match self {
            TrainedModel::Flat(f) => {
                f.model.learner.save(dir, FLAT_STEM)?;
            }
            TrainedModel::Hier(h) => {
                let mut out = BufWriter::new(File::create(dir.join("taxonomy.txt"))?);
                h.taxonomy.write(&mut out)?;
                out.flush()?;
                let nodes_dir = dir.join("nodes");
                std::fs::create_dir_all(&nodes_dir)?;
                let mut untrained = Vec::new();
                for local in &h.locals {
                    match &local.model {
                        Some(m) => m.learner.save(&nodes_dir, &escape_label(&local.node))?,
                        None => untrained.push(escape_label(&local.node)),
                    }
                }
                manifest
                    .set("local_models", h.locals.len() - untrained.len())
                    .set("untrained_nodes", untrained.join(","));
            }
        }
        let mut out = BufWriter::new(File::create(dir.join("manifest.txt"))?);
        manifest.write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, StrategyError> {
        let manifest = KeyValues::read(BufReader::new(File::open(dir.join("manifest.txt"))?))?;
        let version: u32 = manifest.parse_required("format_version")?;
        if version != MODEL_FORMAT_VERSION {
            return Err(StrategyError::Format(format!(
                "unsupported format version {version}"
            )));
        }
        let features = load_features(manifest.require("representation")?, dir)?;
        let base = |d: &Path, stem: &str| -> Result<BaseModel, StrategyError> {
            BaseModel::new(features.clone(), LearnerModel::load(d, stem)?)
        };
        match manifest.require("strategy")? {
            "flat" => Ok(TrainedModel::Flat(FlatModel::new(base(dir, FLAT_STEM)?))),
            "lcpn-vc" => {
                let taxonomy = Taxonomy::read(BufReader::new(File::open(dir.join("taxonomy.txt"))?))?;
                let untrained: BTreeSet<&str> = manifest
                    .require("untrained_nodes")?
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .collect();
                let nodes_dir = dir.join("nodes");
                let mut locals = Vec::new();
                for node in internal_labels(&taxonomy) {
                    let stem = escape_label(&node);
                    let model = if untrained.contains(stem.as_str()) {
                        None
                    } else {
                        Some(base(&nodes_dir, &stem)?)
                    };
                    locals.push(LocalModel { node, model });
                }
                Ok(TrainedModel::Hier(HierModel::from_parts(taxonomy, locals)?))
            }
            other => Err(StrategyError::Format(format!("unknown strategy {other:?}"))),
        }
    }
}

fn save_features(features: &Features, dir: &Path) -> Result<(), StrategyError> {
    match features {
        Features::Learned => {}
        Features::TfIdf(v) => {
            let mut out = BufWriter::new(File::create(dir.join("vocabulary.tsv"))?);
            v.write(&mut out)?;
            out.flush()?;
            let mut opts = KeyValues::new();
            opts.set("stem", v.options.stem)
                .set("min_df", v.options.min_df)
                .set("stopwords", v.options.stopwords.is_some());
            let mut out = BufWriter::new(File::create(dir.join("vocabulary.options"))?);
            opts.write(&mut out)?;
            out.flush()?;
            if let Some(stop) = &v.options.stopwords {
                let sorted: BTreeSet<&String> = stop.iter().collect();
                let mut out = BufWriter::new(File::create(dir.join("stopwords.txt"))?);
                for w in sorted {
                    writeln!(out, "{w}")?;
                }
                out.flush()?;
            }
        }
        Features::EmbeddingAverage(t) => {
            let mut out = BufWriter::new(File::create(dir.join("embeddings.txt"))?);
            t.write(&mut out, true)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn load_features(name: &str, dir: &Path) -> Result<Features, StrategyError> {
    match name {
        "learned" => Ok(Features::Learned),
        "tfidf" => {
            let opts = KeyValues::read(BufReader::new(File::open(dir.join("vocabulary.options"))?))?;
            let stopwords = if opts.parse_required::<bool>("stopwords")? {
                let f = BufReader::new(File::open(dir.join("stopwords.txt"))?);
                Some(f.lines().collect::<Result<HashSet<_>, _>>()?)
            } else {
                None
            };
            let options = VocabularyOptions {
                stopwords,
                stem: opts.parse_required("stem")?,
                min_df: opts.parse_required("min_df")?,
            };
            let f = BufReader::new(File::open(dir.join("vocabulary.tsv"))?);
            Ok(Features::TfIdf(Arc::new(Vocabulary::read(f, options)?)))
        }
        "embedding-average" => {
            let f = BufReader::new(File::open(dir.join("embeddings.txt"))?);
            Ok(Features::EmbeddingAverage(Arc::new(load_embeddings(f)?)))
        }
        other => Err(StrategyError::Format(format!("unknown representation {other:?}"))),
    }
}
