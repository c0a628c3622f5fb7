//! Softmax classifiers trained with plain SGD.
//!
//! Two learners share one training loop: [`LinearModel`] over fixed feature
//! vectors, and [`JointEmbeddingModel`], which learns unigram and hashed
//! bigram embeddings jointly with the output layer.
//!
//! Training is single-threaded and reproducible: examples are visited in an
//! order reshuffled each epoch by `ChaCha8Rng::seed_from_u64(seed)`, and the
//! learning rate decays linearly from its initial value to zero over all
//! `epochs * n_examples` updates. There is no regularization.
//!
//! Models are generic over the parameter type so gradients can be checked in
//! `f64`; trained and persisted models use `f32`.

mod joint;
mod linear;
mod persist;

pub use joint::{bigram_bucket, extract_embeddings, fnv1a64, train_joint_embedding, JointEmbeddingModel};
pub use linear::{train_softmax_linear, LinearModel};
pub use persist::{LearnerModel, BLOB_MAGIC, FORMAT_VERSION};

use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kv::KvError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("no training examples")]
    EmptyTrainingSet,
    #[error("label {0:?} is not in the class list")]
    UnknownLabel(String),
    #[error("class list is empty or has duplicates")]
    BadClassList,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Manifest(#[from] KvError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LearnerError {
    fn from(e: std::io::Error) -> Self {
        LearnerError::Io(e.to_string())
    }
}

/// Floating-point parameter type.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Debug + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Debug + Send + Sync + 'static
{
}

pub(crate) fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("representable")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    #[default]
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Embedding size of the joint-embedding learner.
    pub dimension: usize,
    pub bigrams: bool,
    pub bigram_buckets: usize,
    pub min_token_count: u32,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 5,
            dimension: 30,
            bigrams: true,
            bigram_buckets: 2_000_000,
            min_token_count: 1,
            seed: 0,
            loss: Loss::Softmax,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::InvalidConfig(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.dimension == 0 {
            return bad("dimension must be positive");
        }
        if self.bigrams && self.bigram_buckets == 0 {
            return bad("bigram_buckets must be positive when bigrams are enabled");
        }
        if self.min_token_count == 0 {
            return bad("min_token_count must be at least 1");
        }
        Ok(())
    }

    /// Number of bigram bucket rows a joint model gets under this config.
    pub fn effective_buckets(&self) -> usize {
        if self.bigrams {
            self.bigram_buckets
        } else {
            0
        }
    }
}

/// Class probabilities aligned to a model's class list.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityDistribution(pub Vec<f64>);

impl ProbabilityDistribution {
    /// Index of the largest probability; the first one wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn uniform(n: usize) -> Self {
        ProbabilityDistribution(vec![1.0 / n as f64; n])
    }
}

/// Class list plus per-example class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    classes: Vec<String>,
    targets: Vec<usize>,
}

impl Labels {
    /// Uses `classes` as the class order when given, otherwise the sorted
    /// distinct labels.
    pub fn new<S: AsRef<str>>(labels: &[S], classes: Option<Vec<String>>) -> Result<Self, LearnerError> {
        let classes = match classes {
            Some(c) => c,
            None => {
                let mut c: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
                c.sort();
                c.dedup();
                c
            }
        };
        let index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        if classes.is_empty() || index.len() != classes.len() {
            return Err(LearnerError::BadClassList);
        }
        let targets = labels
            .iter()
            .map(|l| {
                index
                    .get(l.as_ref())
                    .copied()
                    .ok_or_else(|| LearnerError::UnknownLabel(l.as_ref().to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Labels { classes, targets })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Non-fatal conditions met during training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrainWarning {
    /// Only one class: the model always predicts it.
    SingleClassDegenerate(String),
    /// Documents with no known token or bigram, skipped during updates.
    EmptyDocumentsSkipped(usize),
}

#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub warnings: Vec<TrainWarning>,
}

/// Replaces `scores` by softmax probabilities and returns the log-partition
/// function, so the cross-entropy of class `k` is `log_z - scores_k`.
pub(crate) fn softmax_in_place<T: Real>(scores: &mut [T]) -> T {
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s = *s / sum;
    }
    max + sum.ln()
}

/// Turns raw scores into the cross-entropy loss and its gradient with respect
/// to the scores (`p - onehot(target)`), in place.
pub(crate) fn cross_entropy_backward<T: Real>(scores: &mut [T], target: usize) -> T {
    let target_score = scores[target];
    let log_z = softmax_in_place(scores);
    scores[target] -= T::one();
    log_z - target_score
}

/// Shared SGD loop. `step(example, lr)` applies one update and returns the
/// example's loss, or `None` when the example was skipped.
pub(crate) fn run_sgd(
    n_examples: usize,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut step: impl FnMut(usize, f64) -> Option<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let total = (config.epochs * n_examples) as f64;
    let mut order: Vec<usize> = (0..n_examples).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    let mut seconds = Vec::with_capacity(config.epochs);
    let mut done = 0usize;
    for _ in 0..config.epochs {
        let start = std::time::Instant::now();
        order.shuffle(rng);
        let (mut sum, mut counted) = (0.0, 0usize);
        for &i in &order {
            let lr = config.learning_rate * (1.0 - done as f64 / total);
            done += 1;
            if let Some(loss) = step(i, lr) {
                sum += loss;
                counted += 1;
            }
        }
        losses.push(if counted > 0 { sum / counted as f64 } else { 0.0 });
        seconds.push(start.elapsed().as_secs_f64());
    }
    (losses, seconds)
}

pub(crate) fn training_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_normalizes() {
        let mut s = vec![1.0f64, 2.0, 3.0];
        let log_z = softmax_in_place(&mut s);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let expect = (1f64.exp() + 2f64.exp() + 3f64.exp()).ln();
        assert!((log_z - expect).abs() < 1e-12);

        let mut big = vec![1000.0f32, 1000.0];
        softmax_in_place(&mut big);
        assert_eq!(big, vec![0.5, 0.5]);
    }

    #[test]
    fn cross_entropy_gradient_sums_to_zero() {
        let mut s = vec![0.3f64, -1.0, 2.0];
        let loss = cross_entropy_backward(&mut s, 1);
        assert!(loss > 0.0);
        assert!(s.iter().sum::<f64>().abs() < 1e-12);
        assert!(s[1] < 0.0);
    }

    #[test]
    fn argmax_first_on_ties() {
        assert_eq!(ProbabilityDistribution(vec![0.25, 0.5, 0.25]).argmax(), 1);
        assert_eq!(ProbabilityDistribution::uniform(4).argmax(), 0);
    }

    #[test]
    fn labels() {
        let l = Labels::new(&["b", "a", "b"], None).unwrap();
        assert_eq!(l.classes(), ["a", "b"]);
        assert_eq!(l.targets(), [1, 0, 1]);
        let l = Labels::new(&["b", "a"], Some(vec!["b".into(), "a".into(), "c".into()])).unwrap();
        assert_eq!(l.targets(), [0, 1]);
        assert_eq!(
            Labels::new(&["z"], Some(vec!["a".into()])),
            Err(LearnerError::UnknownLabel("z".into()))
        );
        assert_eq!(
            Labels::new(&["a"], Some(vec!["a".into(), "a".into()])),
            Err(LearnerError::BadClassList)
        );
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(LearnerError::InvalidConfig(_))));
        let no_bigrams = TrainConfig {
            bigrams: false,
            bigram_buckets: 0,
            ..Default::default()
        };
        assert!(no_bigrams.validate().is_ok());
        assert_eq!(no_bigrams.effective_buckets(), 0);
    }
}
