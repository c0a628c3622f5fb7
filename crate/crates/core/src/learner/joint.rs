//! Joint-embedding classifier.
//!
//! A document is the mean of the input embeddings of its features: one id per
//! in-vocabulary token occurrence, plus one hashed-bucket id per adjacent
//! token pair (bigrams are taken over all tokens, known or not). Scores are
//! `O h` for the mean `h`, followed by a softmax.
//!
//! Bigram ids are `|vocab| + bigram_bucket(left, right, buckets)` where
//!
//! ```text
//! bigram_bucket(l, r, B) = (fnv1a64(l) * 116049371 + fnv1a64(r)) mod B
//! ```
//!
//! with wrapping 64-bit arithmetic and 64-bit FNV-1a over the UTF-8 bytes.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::{
    cross_entropy_backward, real, run_sgd, training_rng, LearnerError, Labels, ProbabilityDistribution,
    Real, TrainConfig, TrainWarning, Trained,
};
use crate::features::EmbeddingTable;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

pub fn bigram_bucket(left: &str, right: &str, buckets: usize) -> usize {
    let h = fnv1a64(left.as_bytes())
        .wrapping_mul(116_049_371)
        .wrapping_add(fnv1a64(right.as_bytes()));
    (h % buckets as u64) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointEmbeddingModel<T = f32> {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    classes: Vec<String>,
    dimension: usize,
    buckets: usize,
    /// `(|vocab| + buckets) × dimension`, row-major.
    input: Vec<T>,
    /// `classes × dimension`, row-major.
    output: Vec<T>,
    config: TrainConfig,
}

impl<T: Real> JointEmbeddingModel<T> {
    /// A model with all parameters zero.
    pub fn zeros(
        vocab: Vec<String>,
        classes: Vec<String>,
        dimension: usize,
        buckets: usize,
        config: TrainConfig,
    ) -> Self {
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let rows = vocab.len() + buckets;
        JointEmbeddingModel {
            input: vec![T::zero(); rows * dimension],
            output: vec![T::zero(); classes.len() * dimension],
            vocab,
            index,
            classes,
            dimension,
            buckets,
            config,
        }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn input_embeddings(&self) -> &[T] {
        &self.input
    }

    pub fn output_weights(&self) -> &[T] {
        &self.output
    }

    /// Parameter groups in persistence order: input rows, then output rows.
    pub fn parameter_groups(&self) -> [(&'static str, &[T]); 2] {
        [("input", &self.input), ("output", &self.output)]
    }

    pub fn parameter_groups_mut(&mut self) -> [(&'static str, &mut [T]); 2] {
        [("input", &mut self.input), ("output", &mut self.output)]
    }

    /// Input-row ids of a document: unigrams first, then bigram buckets.
    pub fn feature_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let mut ids: Vec<usize> = tokens
            .iter()
            .filter_map(|t| self.index.get(t.as_ref()).copied())
            .collect();
        if self.buckets > 0 {
            let base = self.vocab.len();
            ids.extend(
                tokens
                    .windows(2)
                    .map(|w| base + bigram_bucket(w[0].as_ref(), w[1].as_ref(), self.buckets)),
            );
        }
        ids
    }

    fn row(&self, id: usize) -> &[T] {
        &self.input[id * self.dimension..(id + 1) * self.dimension]
    }

    fn mean_of(&self, ids: &[usize]) -> Vec<T> {
        let mut h = vec![T::zero(); self.dimension];
        if ids.is_empty() {
            return h;
        }
        for &id in ids {
            for (a, &v) in h.iter_mut().zip(self.row(id)) {
                *a += v;
            }
        }
        let inv = T::one() / real::<T>(ids.len() as f64);
        h.iter_mut().for_each(|a| *a *= inv);
        h
    }

    /// Document representation: mean input embedding of its features.
    pub fn hidden<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<T> {
        self.mean_of(&self.feature_ids(tokens))
    }

    fn scores_for(&self, h: &[T]) -> Vec<T> {
        self.output
            .chunks_exact(self.dimension)
            .map(|w| w.iter().zip(h).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    pub fn predict_proba<S: AsRef<str>>(&self, tokens: &[S]) -> ProbabilityDistribution {
        let mut s = self.scores_for(&self.hidden(tokens));
        super::softmax_in_place(&mut s);
        ProbabilityDistribution(s.into_iter().map(|p| p.to_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> &str {
        &self.classes[self.predict_proba(tokens).argmax()]
    }

    pub fn loss<S: AsRef<str>>(&self, tokens: &[S], target: usize) -> T {
        let mut s = self.scores_for(&self.hidden(tokens));
        cross_entropy_backward(&mut s, target)
    }

    /// Loss, hidden vector, score gradient, and hidden-vector gradient.
    fn backward(&self, ids: &[usize], target: usize) -> (T, Vec<T>, Vec<T>, Vec<T>) {
        let h = self.mean_of(ids);
        let mut g = self.scores_for(&h);
        let loss = cross_entropy_backward(&mut g, target);
        let mut grad_h = vec![T::zero(); self.dimension];
        for (w, &gc) in self.output.chunks_exact(self.dimension).zip(&g) {
            for (a, &v) in grad_h.iter_mut().zip(w) {
                *a += gc * v;
            }
        }
        (loss, h, g, grad_h)
    }

    fn accumulate(&mut self, ids: &[usize], h: &[T], g: &[T], grad_h: &[T], scale: T) {
        let d = self.dimension;
        for (w, &gc) in self.output.chunks_exact_mut(d).zip(g) {
            for (a, &v) in w.iter_mut().zip(h) {
                *a += scale * gc * v;
            }
        }
        let per_row = scale / real::<T>(ids.len() as f64);
        for &id in ids {
            for (a, &v) in self.input[id * d..(id + 1) * d].iter_mut().zip(grad_h) {
                *a += per_row * v;
            }
        }
    }

    /// Gradient of [`JointEmbeddingModel::loss`], shaped like the model.
    pub fn gradient<S: AsRef<str>>(&self, tokens: &[S], target: usize) -> Self {
        let mut grad = Self::zeros(
            self.vocab.clone(),
            self.classes.clone(),
            self.dimension,
            self.buckets,
            self.config.clone(),
        );
        let ids = self.feature_ids(tokens);
        if !ids.is_empty() {
            let (_, h, g, grad_h) = self.backward(&ids, target);
            grad.accumulate(&ids, &h, &g, &grad_h, T::one());
        }
        grad
    }

    /// One SGD update on precomputed feature ids; `None` for an empty
    /// document.
    fn sgd_step(&mut self, ids: &[usize], target: usize, learning_rate: f64) -> Option<T> {
        if ids.is_empty() {
            return None;
        }
        let (loss, h, g, grad_h) = self.backward(ids, target);
        self.accumulate(ids, &h, &g, &grad_h, real::<T>(-learning_rate));
        Some(loss)
    }
}

impl JointEmbeddingModel<f32> {
    pub(crate) fn from_raw_parts(
        vocab: Vec<String>,
        classes: Vec<String>,
        dimension: usize,
        buckets: usize,
        config: TrainConfig,
        input: Vec<f32>,
        output: Vec<f32>,
    ) -> Self {
        let mut m = Self::zeros(vec![], vec![], dimension, 0, config);
        m.index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        m.vocab = vocab;
        m.classes = classes;
        m.buckets = buckets;
        m.input = input;
        m.output = output;
        m
    }
}

/// Trains a joint-embedding model on token lists.
///
/// The vocabulary is every token seen at least `min_token_count` times, in
/// lexicographic order. Input embeddings start uniform in
/// `[-1/dimension, 1/dimension]`, output weights at zero.
pub fn train_joint_embedding<D: AsRef<[String]>>(
    docs: &[D],
    labels: &Labels,
    config: &TrainConfig,
) -> Result<Trained<JointEmbeddingModel>, LearnerError> {
    config.validate()?;
    if docs.len() != labels.len() {
        return Err(LearnerError::LengthMismatch {
            features: docs.len(),
            labels: labels.len(),
        });
    }
    if docs.is_empty() {
        return Err(LearnerError::EmptyTrainingSet);
    }

    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for doc in docs {
        for t in doc.as_ref() {
            *counts.entry(t).or_default() += 1;
        }
    }
    let vocab: Vec<String> = counts
        .into_iter()
        .filter(|&(_, n)| n >= config.min_token_count)
        .map(|(t, _)| t.to_string())
        .collect();

    let mut rng = training_rng(config.seed);
    let mut model = JointEmbeddingModel::<f32>::zeros(
        vocab,
        labels.classes().to_vec(),
        config.dimension,
        config.effective_buckets(),
        config.clone(),
    );
    let bound = 1.0 / config.dimension as f32;
    for v in model.input.iter_mut() {
        *v = rng.gen_range(-bound..=bound);
    }

    let ids: Vec<Vec<usize>> = docs.iter().map(|d| model.feature_ids(d.as_ref())).collect();
    let mut warnings = Vec::new();
    if labels.classes().len() == 1 {
        warnings.push(TrainWarning::SingleClassDegenerate(labels.classes()[0].clone()));
    }
    let empty = ids.iter().filter(|i| i.is_empty()).count();
    if empty > 0 {
        warnings.push(TrainWarning::EmptyDocumentsSkipped(empty));
    }

    let targets = labels.targets();
    let (epoch_losses, epoch_seconds) = run_sgd(docs.len(), config, &mut rng, |i, lr| {
        model.sgd_step(&ids[i], targets[i], lr).map(f64::from)
    });
    Ok(Trained {
        model,
        epoch_losses,
        epoch_seconds,
        warnings,
    })
}

/// Exports the unigram input embeddings; bigram buckets are dropped.
pub fn extract_embeddings(model: &JointEmbeddingModel) -> EmbeddingTable {
    let mut table = EmbeddingTable::new(model.dimension);
    for (i, token) in model.vocab.iter().enumerate() {
        table.insert(token, model.row(i));
    }
    table
}
