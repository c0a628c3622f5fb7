//! The `htc` command-line driver.
//!
//! Every command reads an experiment config (`key=value` lines, `#`
//! comments; relative paths resolve against the config file's directory)
//! and works inside one output directory:
//!
//! ```text
//! corpus.tsv  train.tsv  test.tsv  test_gold.tsv   written by `prepare`
//! local/<node>.tsv                                  written by `prepare`
//! model/                                            written by `train`
//! predictions.tsv                                   written by `predict`
//! results.tsv                                       appended by `eval`
//! ```
//!
//! Recognized config keys: `taxonomy`, `corpus`, `embeddings`, `output_dir`,
//! `strategy` (`flat` | `lcpn-vc`), `learner` (`softmax-linear` |
//! `joint-embedding`), `representation` (`tfidf` | `embedding-average` |
//! `learned`), `classifier` (name used in results rows), `holdout_fraction`,
//! `seed`, `learning_rate`, `epochs`, `dimension`, `bigrams`,
//! `bigram_buckets`, `min_token_count`, `stopwords`, `stem`, `min_df`, and
//! `averaging` (`macro` | `micro` | `macro-per-class`).
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for usage and
//! configuration errors (including missing input files).

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use thiserror::Error;

use crate::corpus::{
    decode_latin1, hierarchical_split, holdout_split, ingest_rcv1_xml, local_dataset_stats,
    read_plain_corpus, reduce_to_single_label, validate_labels, write_local_dataset,
    write_plain_corpus, CorpusError, LabeledDocument, RawDocument,
};
use crate::features::{build_vocabulary, load_embeddings, FeatureError, VocabularyOptions};
use crate::kv::{KeyValues, KvError};
use crate::learner::{extract_embeddings, LearnerModel, TrainConfig, TrainWarning};
use crate::metrics::{
    join_on_doc_id, mean, pearson, read_label_file, FlatAveraging, MetricsError, MetricsReport,
};
use crate::strategy::{
    escape_label, train_flat, train_lcpn_vc, Features, StrategyError, TrainReport, TrainedModel,
};
use crate::taxonomy::{Taxonomy, TaxonomyError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{}: no such file or directory", .0.display())]
    MissingPath(PathBuf),
    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::MissingPath(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Flat,
    LcpnVc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerKind {
    SoftmaxLinear,
    JointEmbedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Representation {
    Tfidf,
    EmbeddingAverage,
    Learned,
}

macro_rules! value_enum_text {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let v = self.to_possible_value().expect("no skipped variants");
                f.write_str(v.get_name())
            }
        }

        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                <$t as ValueEnum>::from_str(s, false)
            }
        }
    )*};
}

value_enum_text!(Strategy, LearnerKind, Representation);

/// One experiment: where the data lives and how to train and score.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub taxonomy: PathBuf,
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub strategy: Strategy,
    pub learner: LearnerKind,
    pub representation: Representation,
    pub classifier: Option<String>,
    pub holdout_fraction: f64,
    pub train: TrainConfig,
    pub stopwords: bool,
    pub stem: bool,
    pub min_df: u32,
    pub averaging: FlatAveraging,
}

const CONFIG_KEYS: &[&str] = &[
    "taxonomy",
    "corpus",
    "embeddings",
    "output_dir",
    "strategy",
    "learner",
    "representation",
    "classifier",
    "holdout_fraction",
    "seed",
    "learning_rate",
    "epochs",
    "dimension",
    "bigrams",
    "bigram_buckets",
    "min_token_count",
    "stopwords",
    "stem",
    "min_df",
    "averaging",
];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path).map_err(|_| CliError::MissingPath(path.to_path_buf()))?;
        let kv = KeyValues::read(BufReader::new(file))
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_kv(&kv, base)
    }

    pub fn from_kv(kv: &KeyValues, base: &Path) -> Result<Self, CliError> {
        if let Some(k) = kv.keys().find(|k| !CONFIG_KEYS.contains(k)) {
            return Err(CliError::Config(format!("unknown key {k:?}")));
        }
        let cfg_err = |e: KvError| CliError::Config(e.to_string());
        let path = |key: &str| kv.get(key).map(|p| base.join(p));
        let parse_enum = |key: &str, default: &str| -> Result<String, CliError> {
            Ok(kv.get(key).unwrap_or(default).to_string())
        };
        let strategy: Strategy = parse_enum("strategy", "flat")?
            .parse()
            .map_err(CliError::Config)?;
        let learner: LearnerKind = parse_enum("learner", "joint-embedding")?
            .parse()
            .map_err(CliError::Config)?;
        let default_repr = match learner {
            LearnerKind::JointEmbedding => "learned",
            LearnerKind::SoftmaxLinear => "tfidf",
        };
        let representation: Representation = parse_enum("representation", default_repr)?
            .parse()
            .map_err(CliError::Config)?;
        let averaging = match kv.get("averaging").unwrap_or("macro") {
            "macro" => FlatAveraging::Macro,
            "micro" => FlatAveraging::Micro,
            "macro-per-class" => FlatAveraging::MacroPerClassF1,
            other => return Err(CliError::Config(format!("invalid averaging {other:?}"))),
        };
        let d = TrainConfig::default();
        let train = TrainConfig {
            learning_rate: kv.parse("learning_rate").map_err(cfg_err)?.unwrap_or(d.learning_rate),
            epochs: kv.parse("epochs").map_err(cfg_err)?.unwrap_or(d.epochs),
            dimension: kv.parse("dimension").map_err(cfg_err)?.unwrap_or(d.dimension),
            bigrams: kv.parse("bigrams").map_err(cfg_err)?.unwrap_or(d.bigrams),
            bigram_buckets: kv.parse("bigram_buckets").map_err(cfg_err)?.unwrap_or(d.bigram_buckets),
            min_token_count: kv.parse("min_token_count").map_err(cfg_err)?.unwrap_or(d.min_token_count),
            seed: kv.parse("seed").map_err(cfg_err)?.unwrap_or(d.seed),
            loss: d.loss,
        };
        let config = ExperimentConfig {
            taxonomy: path("taxonomy").ok_or_else(|| CliError::Config("missing key \"taxonomy\"".into()))?,
            corpus: path("corpus"),
            embeddings: path("embeddings"),
            output_dir: path("output_dir").unwrap_or_else(|| base.join("out")),
            strategy,
            learner,
            representation,
            classifier: kv.get("classifier").map(String::from),
            holdout_fraction: kv.parse("holdout_fraction").map_err(cfg_err)?.unwrap_or(0.1),
            train,
            stopwords: kv.parse("stopwords").map_err(cfg_err)?.unwrap_or(false),
            stem: kv.parse("stem").map_err(cfg_err)?.unwrap_or(false),
            min_df: kv.parse("min_df").map_err(cfg_err)?.unwrap_or(1),
            averaging,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks enum combinations and numeric ranges.
    pub fn validate(&self) -> Result<(), CliError> {
        let ok = matches!(
            (self.learner, self.representation),
            (LearnerKind::JointEmbedding, Representation::Learned)
                | (LearnerKind::SoftmaxLinear, Representation::Tfidf)
                | (LearnerKind::SoftmaxLinear, Representation::EmbeddingAverage)
        );
        if !ok {
            return Err(CliError::Config(format!(
                "learner {} cannot use representation {}",
                self.learner, self.representation
            )));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "holdout_fraction must lie in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        self.train
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Applies command-line overrides.
    fn apply(&mut self, args: &CommonArgs) -> Result<(), CliError> {
        if let Some(seed) = args.seed {
            self.train.seed = seed;
        }
        if let Some(s) = args.strategy {
            self.strategy = s;
        }
        if let Some(l) = args.learner {
            self.learner = l;
            if args.representation.is_none() && l == LearnerKind::JointEmbedding {
                self.representation = Representation::Learned;
            }
            if args.representation.is_none()
                && l == LearnerKind::SoftmaxLinear
                && self.representation == Representation::Learned
            {
                self.representation = Representation::Tfidf;
            }
        }
        if let Some(r) = args.representation {
            self.representation = r;
        }
        if let Some(out) = &args.out {
            self.output_dir = out.clone();
        }
        self.validate()
    }

    pub fn classifier_name(&self) -> String {
        self.classifier.clone().unwrap_or_else(|| self.learner.to_string())
    }

    pub fn vocabulary_options(&self) -> VocabularyOptions {
        let opts = VocabularyOptions {
            stem: self.stem,
            min_df: self.min_df,
            ..Default::default()
        };
        if self.stopwords {
            opts.with_english_stopwords()
        } else {
            opts
        }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn model_dir(&self) -> PathBuf {
        self.file("model")
    }
}

#[derive(Debug, Parser)]
#[command(name = "htc", version, about = "Hierarchical text classification experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub learner: Option<LearnerKind>,
    #[arg(long)]
    pub representation: Option<Representation>,
    /// Overrides the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest the corpus, reduce to single labels, split, and write local datasets.
    Prepare(CommonArgs),
    /// Train and save a flat or LCPN+VC model.
    Train(CommonArgs),
    /// Predict labels for a corpus file (default: the test split).
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        /// Model directory (default: <out>/model).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Plain corpus file to label (default: <out>/test.tsv).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Score predictions and append a row to the results table.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// `doc_id<TAB>label` predictions (default: run the model on the test split).
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// `doc_id<TAB>label` gold labels (default: <out>/test_gold.tsv).
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Results table to append to (default: <out>/results.tsv).
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Summarize a results table: column means and correlations.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code. Errors are logged to standard error.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare(args) => cmd_prepare(&load_config(&args)?, stdout),
        Command::Train(args) => cmd_train(&load_config(&args)?, stdout),
        Command::Predict { common, model, input } => {
            let cfg = load_config(&common)?;
            cmd_predict(&cfg, model.as_deref(), input.as_deref(), stdout)
        }
        Command::Eval {
            common,
            model,
            predictions,
            gold,
            results,
        } => {
            let cfg = load_config(&common)?;
            let sources = EvalSources {
                model,
                predictions,
                gold,
                results,
            };
            cmd_eval(&cfg, &sources, stdout).map(|_| ())
        }
        Command::Report { config, results } => {
            let path = match (results, config) {
                (Some(r), _) => r,
                (None, Some(c)) => ExperimentConfig::load(&c)?.file("results.tsv"),
                (None, None) => {
                    return Err(CliError::Usage("report needs --results or --config".into()))
                }
            };
            let summary = cmd_report(&path)?;
            write!(stdout, "{summary}")?;
            Ok(())
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.apply(args)?;
    Ok(cfg)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|_| CliError::MissingPath(path.to_path_buf()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn in_file<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn load_taxonomy(cfg: &ExperimentConfig) -> Result<Taxonomy, CliError> {
    Taxonomy::read(open(&cfg.taxonomy)?).map_err(in_file(&cfg.taxonomy))
}

fn read_corpus_file(path: &Path) -> Result<Vec<LabeledDocument>, CliError> {
    read_plain_corpus(open(path)?).map_err(in_file(path))
}

/// All `*.xml` files under `dir`, recursively, in path order.
fn xml_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Decodes an XML file, honoring an ISO-8859-1 encoding declaration.
fn read_xml_text(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)?;
    let head = String::from_utf8_lossy(&bytes[..bytes.len().min(200)]).to_ascii_lowercase();
    let prolog = head.split("?>").next().unwrap_or_default();
    if prolog.contains("iso-8859-1") || prolog.contains("latin-1") || prolog.contains("latin1") {
        Ok(decode_latin1(&bytes))
    } else {
        String::from_utf8(bytes).map_err(in_file(path))
    }
}

/// Loads the configured corpus: a directory of RCV1 XML files (reduced to
/// single labels) or a plain corpus file.
pub fn load_corpus(cfg: &ExperimentConfig, tax: &Taxonomy) -> Result<Vec<LabeledDocument>, CliError> {
    let path = cfg
        .corpus
        .as_ref()
        .ok_or_else(|| CliError::Config("missing key \"corpus\"".into()))?;
    if !path.exists() {
        return Err(CliError::MissingPath(path.clone()));
    }
    let docs = if path.is_dir() {
        let mut raw: Vec<RawDocument> = Vec::new();
        for file in xml_files(path)? {
            let text = read_xml_text(&file)?;
            raw.push(ingest_rcv1_xml(&text).map_err(in_file(&file))?);
        }
        info!("read {} XML documents from {}", raw.len(), path.display());
        reduce_to_single_label(&raw, tax).map_err(in_file(path))?
    } else {
        read_corpus_file(path)?
    };
    validate_labels(&docs, tax).map_err(in_file(path))?;
    Ok(docs)
}

pub fn cmd_prepare(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let tax = load_taxonomy(cfg)?;
    let docs = load_corpus(cfg, &tax)?;
    let split = holdout_split(&docs, cfg.holdout_fraction, cfg.train.seed)?;

    write_plain_corpus(&docs, create(&cfg.file("corpus.tsv"))?)?;
    write_plain_corpus(&split.train, create(&cfg.file("train.tsv"))?)?;
    write_plain_corpus(&split.test, create(&cfg.file("test.tsv"))?)?;
    let mut gold = create(&cfg.file("test_gold.tsv"))?;
    for d in &split.test {
        writeln!(gold, "{}\t{}", d.doc_id, d.label)?;
    }
    gold.flush()?;

    let local_dir = cfg.file("local");
    if local_dir.exists() {
        fs::remove_dir_all(&local_dir)?;
    }
    let locals = hierarchical_split(&split.train, &tax)?;
    writeln!(
        out,
        "documents\t{}\ntrain\t{}\ntest\t{}\nlocal datasets\t{}",
        docs.len(),
        split.train.len(),
        split.test.len(),
        locals.len()
    )?;
    writeln!(out, "node\texamples\tlocal_labels\timbalance")?;
    for ds in &locals {
        let mut w = create(&local_dir.join(format!("{}.tsv", escape_label(&ds.parent))))?;
        write_local_dataset(ds, &mut w)?;
        w.flush()?;
        match local_dataset_stats(ds) {
            Ok(s) => writeln!(
                out,
                "{}\t{}\t{}\t{:.1}:1",
                ds.parent, s.n_examples, s.n_local_labels, s.imbalance
            )?,
            Err(_) => writeln!(out, "{}\t0\t0\t-", ds.parent)?,
        }
    }
    Ok(())
}

fn log_report(r: &TrainReport) {
    let who = r.node.as_deref().unwrap_or("flat");
    for (e, (loss, secs)) in r.epoch_losses.iter().zip(&r.epoch_seconds).enumerate() {
        info!("{who}: epoch {} loss {loss:.6} ({secs:.3}s)", e + 1);
    }
    for w in &r.warnings {
        match w {
            TrainWarning::SingleClassDegenerate(c) => {
                warn!("{who}: only class {c:?} present; the model always predicts it")
            }
            TrainWarning::EmptyDocumentsSkipped(n) => {
                warn!("{who}: skipped {n} documents without known tokens")
            }
        }
    }
    if r.n_examples == 0 {
        warn!("{who}: no training examples; prediction stops at this node");
    }
}

/// Builds the document representation named in the config.
pub fn build_features(cfg: &ExperimentConfig, train: &[LabeledDocument]) -> Result<Features, CliError> {
    Ok(match cfg.representation {
        Representation::Learned => Features::Learned,
        Representation::Tfidf => {
            let tokens: Vec<&[String]> = train.iter().map(|d| d.tokens.as_slice()).collect();
            let vocab = build_vocabulary(&tokens, cfg.vocabulary_options())?;
            info!("tf-idf vocabulary: {} terms", vocab.len());
            Features::TfIdf(Arc::new(vocab))
        }
        Representation::EmbeddingAverage => match &cfg.embeddings {
            Some(path) => {
                let table = load_embeddings(open(path)?).map_err(in_file(path))?;
                info!("loaded {} embeddings of dimension {}", table.len(), table.dimension());
                Features::EmbeddingAverage(Arc::new(table))
            }
            None => {
                info!("no embeddings file; learning supervised embeddings on the training set");
                let (flat, report) = train_flat(train, &Features::Learned, &cfg.train)?;
                log_report(&report);
                let LearnerModel::Joint(joint) = flat.model().learner() else {
                    unreachable!("learned features always train a joint model")
                };
                Features::EmbeddingAverage(Arc::new(extract_embeddings(joint)))
            }
        },
    })
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let tax = load_taxonomy(cfg)?;
    let train = read_corpus_file(&cfg.file("train.tsv"))?;
    validate_labels(&train, &tax)?;
    let start = Instant::now();
    let features = build_features(cfg, &train)?;
    let model = match cfg.strategy {
        Strategy::Flat => {
            let (model, report) = train_flat(&train, &features, &cfg.train)?;
            log_report(&report);
            TrainedModel::Flat(model)
        }
        Strategy::LcpnVc => {
            let locals = hierarchical_split(&train, &tax)?;
            let (model, reports) = train_lcpn_vc(&locals, &tax, &features, &cfg.train)?;
            reports.iter().for_each(log_report);
            TrainedModel::Hier(model)
        }
    };
    info!("training took {:.2}s", start.elapsed().as_secs_f64());
    let dir = cfg.model_dir();
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    model.save(&dir)?;
    writeln!(out, "model\t{}", dir.display())?;
    Ok(())
}

fn load_model(cfg: &ExperimentConfig, model: Option<&Path>) -> Result<TrainedModel, CliError> {
    let dir = model.map(Path::to_path_buf).unwrap_or_else(|| cfg.model_dir());
    if !dir.join("manifest.txt").exists() {
        return Err(CliError::MissingPath(dir.join("manifest.txt")));
    }
    Ok(TrainedModel::load(&dir)?)
}

fn predict_docs(model: &TrainedModel, docs: &[LabeledDocument]) -> Vec<(String, String)> {
    use rayon::prelude::*;
    docs.par_iter()
        .map(|d| (d.doc_id.clone(), model.predict(&d.tokens)))
        .collect()
}

pub fn cmd_predict(
    cfg: &ExperimentConfig,
    model: Option<&Path>,
    input: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let model = load_model(cfg, model)?;
    let input = input.map(Path::to_path_buf).unwrap_or_else(|| cfg.file("test.tsv"));
    let docs = read_corpus_file(&input)?;
    let predictions = predict_docs(&model, &docs);
    let path = cfg.file("predictions.tsv");
    let mut w = create(&path)?;
    for (id, label) in &predictions {
        writeln!(w, "{id}\t{label}")?;
    }
    w.flush()?;
    writeln!(out, "predictions\t{}\t{}", predictions.len(), path.display())?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct EvalSources {
    pub model: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub results: Option<PathBuf>,
}

/// Scores predictions against gold labels, prints the report, and appends
/// one row to the results table.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    sources: &EvalSources,
    out: &mut dyn Write,
) -> Result<MetricsReport, CliError> {
    let tax = load_taxonomy(cfg)?;
    let gold_path = sources.gold.clone().unwrap_or_else(|| cfg.file("test_gold.tsv"));
    let gold = read_label_file(open(&gold_path)?).map_err(in_file(&gold_path))?;

    let model_dir = sources.model.clone().unwrap_or_else(|| cfg.model_dir());
    let model = if model_dir.join("manifest.txt").exists() {
        Some(TrainedModel::load(&model_dir)?)
    } else {
        None
    };
    let predicted = match &sources.predictions {
        Some(p) => read_label_file(open(p)?).map_err(in_file(p))?,
        None => {
            let model = model
                .as_ref()
                .ok_or_else(|| CliError::MissingPath(model_dir.join("manifest.txt")))?;
            predict_docs(model, &read_corpus_file(&cfg.file("test.tsv"))?)
        }
    };
    let pairs = join_on_doc_id(&gold, &predicted)?;
    let report = MetricsReport::compute(&pairs, &tax, cfg.averaging)?;
    writeln!(out, "{report}")?;

    let flat = match cfg.averaging {
        FlatAveraging::Micro => report.flat_micro,
        _ => report.flat_macro,
    };
    let size = match (&model, cfg.representation) {
        (Some(m), _) => m.features().size(&cfg.train).to_string(),
        (None, Representation::Tfidf) => "-".to_string(),
        (None, _) => cfg.train.dimension.to_string(),
    };
    let strategy = model
        .as_ref()
        .map(|m| m.strategy_name().to_string())
        .unwrap_or_else(|| cfg.strategy.to_string());
    let row = ResultsRow {
        classifier: cfg.classifier_name(),
        representation: cfg.representation.to_string(),
        size,
        strategy,
        metrics: [
            flat.precision,
            flat.recall,
            flat.f1,
            report.hier.precision,
            report.hier.recall,
            report.hier.f1,
            report.lca.precision,
            report.lca.recall,
            report.lca.f1,
        ],
    };
    let results = sources.results.clone().unwrap_or_else(|| cfg.file("results.tsv"));
    append_result(&results, &row)?;
    Ok(report)
}

/// Column names of the results table.
pub const RESULTS_HEADER: [&str; 13] = [
    "classifier",
    "representation",
    "size",
    "strategy",
    "P",
    "R",
    "F1",
    "hP",
    "hR",
    "hF1",
    "lcaP",
    "lcaR",
    "lcaF1",
];

/// One results-table row: four descriptors and nine measures (flat, then
/// hierarchical, then LCA precision/recall/F1).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub classifier: String,
    pub representation: String,
    pub size: String,
    pub strategy: String,
    pub metrics: [f64; 9],
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("results table needs at least 2 rows, found {0}")]
    TooFewRows(usize),
    #[error("column {0} has zero variance")]
    ZeroVariance(String),
    #[error("results line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub fn read_results<R: BufRead>(reader: R) -> Result<Vec<ResultsRow>, ReportError> {
    let err = |line, reason: String| ReportError::Parse { line, reason };
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| err(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if i == 0 {
            if fields != RESULTS_HEADER {
                return Err(err(1, "unexpected header".into()));
            }
            continue;
        }
        if fields.len() != RESULTS_HEADER.len() {
            return Err(err(
                i + 1,
                format!("expected {} fields, found {}", RESULTS_HEADER.len(), fields.len()),
            ));
        }
        let mut metrics = [0.0; 9];
        for (m, f) in metrics.iter_mut().zip(&fields[4..]) {
            *m = f
                .trim()
                .parse()
                .map_err(|_| err(i + 1, format!("not a number: {f:?}")))?;
        }
        rows.push(ResultsRow {
            classifier: fields[0].to_string(),
            representation: fields[1].to_string(),
            size: fields[2].to_string(),
            strategy: fields[3].to_string(),
            metrics,
        });
    }
    Ok(rows)
}

/// Appends `row`, writing the header first when the file is new or empty.
pub fn append_result(path: &Path, row: &ResultsRow) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{}", RESULTS_HEADER.join("\t"))?;
    }
    let metrics: Vec<String> = row.metrics.iter().map(|m| format!("{m:.6}")).collect();
    writeln!(
        f,
        "{}\t{}\t{}\t{}\t{}",
        row.classifier,
        row.representation,
        row.size,
        row.strategy,
        metrics.join("\t")
    )?;
    Ok(())
}

/// Means of every measure plus correlations among the three F1 columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub n_rows: usize,
    /// `(column, mean)` for the nine measure columns.
    pub means: Vec<(String, f64)>,
    /// `(column, column, Pearson r)` for F1/hF1, F1/lcaF1, and hF1/lcaF1.
    pub correlations: Vec<(String, String, f64)>,
}

impl ReportSummary {
    pub fn mean_of(&self, column: &str) -> Option<f64> {
        self.means.iter().find(|(c, _)| c == column).map(|&(_, m)| m)
    }

    pub fn correlation(&self, a: &str, b: &str) -> Option<f64> {
        self.correlations
            .iter()
            .find(|(x, y, _)| (x == a && y == b) || (x == b && y == a))
            .map(|&(_, _, r)| r)
    }
}

impl fmt::Display for ReportSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows\t{}", self.n_rows)?;
        for (c, m) in &self.means {
            writeln!(f, "mean\t{c}\t{m:.4}")?;
        }
        for (a, b, r) in &self.correlations {
            writeln!(f, "pearson\t{a}\t{b}\t{r:.4}")?;
        }
        Ok(())
    }
}

pub fn summarize(rows: &[ResultsRow]) -> Result<ReportSummary, ReportError> {
    if rows.len() < 2 {
        return Err(ReportError::TooFewRows(rows.len()));
    }
    let column = |k: usize| rows.iter().map(|r| r.metrics[k]).collect::<Vec<_>>();
    let means = (0..9)
        .map(|k| {
            let m = mean(&column(k)).expect("non-empty");
            (RESULTS_HEADER[4 + k].to_string(), m)
        })
        .collect();
    let mut correlations = Vec::new();
    for (a, b) in [(2, 5), (2, 8), (5, 8)] {
        let r = pearson(&column(a), &column(b)).map_err(|_| {
            let (xa, xb) = (column(a), column(b));
            let flat = |v: &[f64]| v.iter().all(|x| *x == v[0]);
            let which = if flat(&xa) { a } else { b };
            debug_assert!(flat(&xa) || flat(&xb));
            ReportError::ZeroVariance(RESULTS_HEADER[4 + which].to_string())
        })?;
        correlations.push((RESULTS_HEADER[4 + a].to_string(), RESULTS_HEADER[4 + b].to_string(), r));
    }
    Ok(ReportSummary {
        n_rows: rows.len(),
        means,
        correlations,
    })
}

pub fn cmd_report(results: &Path) -> Result<ReportSummary, CliError> {
    let rows = read_results(open(results)?).map_err(in_file(results))?;
    Ok(summarize(&rows)?)
}
