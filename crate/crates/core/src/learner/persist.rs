//! On-disk model format.
//!
//! A model named `stem` is stored as:
//!
//! * `stem.manifest`: `key=value` lines (format version, model kind,
//!   dimension, class list, vocabulary size, bucket count, seed, and the
//!   remaining training settings);
//! * `stem.bin`: the magic bytes `HTXM1` followed by every parameter as a
//!   little-endian `f32`, row-major, in [`LinearModel::parameter_groups`] or
//!   [`JointEmbeddingModel::parameter_groups`] order;
//! * `stem.vocab` (joint-embedding models only): one token per line, in
//!   input-row order.
//!
//! Class labels are joined with commas in the manifest and so may not
//! contain one.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{JointEmbeddingModel, LearnerError, LinearModel, Loss, ProbabilityDistribution, TrainConfig};
use crate::kv::KeyValues;

pub const BLOB_MAGIC: &[u8; 5] = b"HTXM1";
pub const FORMAT_VERSION: u32 = 1;

const KIND_LINEAR: &str = "softmax-linear";
const KIND_JOINT: &str = "joint-embedding";

/// Either trained learner, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerModel {
    Linear(LinearModel),
    Joint(JointEmbeddingModel),
}

impl LearnerModel {
    pub fn classes(&self) -> &[String] {
        match self {
            LearnerModel::Linear(m) => m.classes(),
            LearnerModel::Joint(m) => m.classes(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LearnerModel::Linear(_) => KIND_LINEAR,
            LearnerModel::Joint(_) => KIND_JOINT,
        }
    }

    /// Joint models score tokens directly; linear models need features and
    /// are scored by the caller.
    pub fn predict_tokens(&self, tokens: &[String]) -> Option<ProbabilityDistribution> {
        match self {
            LearnerModel::Joint(m) => Some(m.predict_proba(tokens)),
            LearnerModel::Linear(_) => None,
        }
    }

    pub fn manifest(&self) -> Result<KeyValues, LearnerError> {
        let mut kv = KeyValues::new();
        kv.set("format_version", FORMAT_VERSION).set("model_kind", self.kind());
        let classes = self.classes();
        if classes.iter().any(|c| c.contains(',') || c.contains('\n')) {
            return Err(LearnerError::Format(
                "class labels may not contain commas or newlines".into(),
            ));
        }
        match self {
            LearnerModel::Linear(m) => {
                kv.set("dimension", m.dimension())
                    .set("classes", classes.join(","))
                    .set("vocab_size", 0)
                    .set("bucket_count", 0);
            }
            LearnerModel::Joint(m) => {
                let c = m.config();
                kv.set("dimension", m.dimension())
                    .set("classes", classes.join(","))
                    .set("vocab_size", m.vocabulary().len())
                    .set("bucket_count", m.bucket_count())
                    .set("seed", c.seed)
                    .set("learning_rate", c.learning_rate)
                    .set("epochs", c.epochs)
                    .set("bigrams", c.bigrams)
                    .set("bigram_buckets", c.bigram_buckets)
                    .set("min_token_count", c.min_token_count)
                    .set("loss", "softmax");
            }
        }
        Ok(kv)
    }

    /// Parameter blob: magic bytes, then little-endian `f32`s.
    pub fn blob(&self) -> Vec<u8> {
        let groups: [(&str, &[f32]); 2] = match self {
            LearnerModel::Linear(m) => m.parameter_groups(),
            LearnerModel::Joint(m) => m.parameter_groups(),
        };
        let n: usize = groups.iter().map(|(_, g)| g.len()).sum();
        let mut out = Vec::with_capacity(BLOB_MAGIC.len() + 4 * n);
        out.extend_from_slice(BLOB_MAGIC);
        for (_, g) in groups {
            for v in g {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), LearnerError> {
        std::fs::create_dir_all(dir)?;
        let mut m = BufWriter::new(File::create(dir.join(format!("{stem}.manifest")))?);
        self.manifest()?.write(&mut m)?;
        m.flush()?;
        std::fs::write(dir.join(format!("{stem}.bin")), self.blob())?;
        if let LearnerModel::Joint(j) = self {
            let mut v = BufWriter::new(File::create(dir.join(format!("{stem}.vocab")))?);
            for t in j.vocabulary() {
                writeln!(v, "{t}")?;
            }
            v.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self, LearnerError> {
        let manifest = KeyValues::read(BufReader::new(File::open(dir.join(format!("{stem}.manifest")))?))?;
        let mut blob = Vec::new();
        File::open(dir.join(format!("{stem}.bin")))?.read_to_end(&mut blob)?;
        let vocab = if manifest.get("model_kind") == Some(KIND_JOINT) {
            let f = BufReader::new(File::open(dir.join(format!("{stem}.vocab")))?);
            f.lines().collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        Self::from_parts(&manifest, &blob, vocab)
    }

    pub fn from_parts(manifest: &KeyValues, blob: &[u8], vocab: Vec<String>) -> Result<Self, LearnerError> {
        let version: u32 = manifest.parse_required("format_version")?;
        if version != FORMAT_VERSION {
            return Err(LearnerError::Format(format!("unsupported format version {version}")));
        }
        let dimension: usize = manifest.parse_required("dimension")?;
        let classes: Vec<String> = manifest
            .require("classes")?
            .split(',')
            .map(String::from)
            .collect();
        let params = decode_blob(blob)?;

        match manifest.require("model_kind")? {
            KIND_LINEAR => {
                let mut model = LinearModel::<f32>::zeros(classes, dimension);
                fill(&mut model.parameter_groups_mut(), &params)?;
                Ok(LearnerModel::Linear(model))
            }
            KIND_JOINT => {
                let vocab_size: usize = manifest.parse_required("vocab_size")?;
                if vocab.len() != vocab_size {
                    return Err(LearnerError::Format(format!(
                        "vocabulary has {} tokens, manifest says {vocab_size}",
                        vocab.len()
                    )));
                }
                let buckets: usize = manifest.parse_required("bucket_count")?;
                let config = TrainConfig {
                    learning_rate: manifest.parse_required("learning_rate")?,
                    epochs: manifest.parse_required("epochs")?,
                    dimension,
                    bigrams: manifest.parse_required("bigrams")?,
                    bigram_buckets: manifest.parse_required("bigram_buckets")?,
                    min_token_count: manifest.parse_required("min_token_count")?,
                    seed: manifest.parse_required("seed")?,
                    loss: Loss::Softmax,
                };
                let n_in = (vocab_size + buckets) * dimension;
                let n_out = classes.len() * dimension;
                if params.len() != n_in + n_out {
                    return Err(LearnerError::Format(format!(
                        "blob holds {} values, expected {}",
                        params.len(),
                        n_in + n_out
                    )));
                }
                let output = params[n_in..].to_vec();
                let mut input = params;
                input.truncate(n_in);
                Ok(LearnerModel::Joint(JointEmbeddingModel::from_raw_parts(
                    vocab, classes, dimension, buckets, config, input, output,
                )))
            }
            other => Err(LearnerError::Format(format!("unknown model kind {other:?}"))),
        }
    }
}

fn decode_blob(blob: &[u8]) -> Result<Vec<f32>, LearnerError> {
    let body = blob
        .strip_prefix(BLOB_MAGIC.as_slice())
        .ok_or_else(|| LearnerError::Format("bad magic bytes".into()))?;
    if body.len() % 4 != 0 {
        return Err(LearnerError::Format("truncated parameter blob".into()));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn fill(groups: &mut [(&'static str, &mut [f32])], params: &[f32]) -> Result<(), LearnerError> {
    let expected: usize = groups.iter().map(|(_, g)| g.len()).sum();
    if params.len() != expected {
        return Err(LearnerError::Format(format!(
            "blob holds {} values, expected {expected}",
            params.len()
        )));
    }
    let mut rest = params;
    for (_, g) in groups.iter_mut() {
        let (head, tail) = rest.split_at(g.len());
        g.copy_from_slice(head);
        rest = tail;
    }
    Ok(())
}
