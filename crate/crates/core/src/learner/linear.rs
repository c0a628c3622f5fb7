use super::{
    cross_entropy_backward, real, run_sgd, training_rng, LearnerError, Labels, ProbabilityDistribution,
    Real, TrainConfig, TrainWarning, Trained,
};
use crate::features::FeatureVector;

/// Multinomial logistic regression: `softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T = f32> {
    classes: Vec<String>,
    dimension: usize,
    /// `classes × dimension`, row-major.
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Real> LinearModel<T> {
    pub fn zeros(classes: Vec<String>, dimension: usize) -> Self {
        let k = classes.len();
        LinearModel {
            classes,
            dimension,
            weights: vec![T::zero(); k * dimension],
            bias: vec![T::zero(); k],
        }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    /// Parameter groups in persistence order: weights, then bias.
    pub fn parameter_groups_mut(&mut self) -> [(&'static str, &mut [T]); 2] {
        [("weights", &mut self.weights), ("bias", &mut self.bias)]
    }

    pub fn parameter_groups(&self) -> [(&'static str, &[T]); 2] {
        [("weights", &self.weights), ("bias", &self.bias)]
    }

    fn check<F: FeatureVector + ?Sized>(&self, x: &F) -> Result<(), LearnerError> {
        if let Some(n) = x.dense_len() {
            if n != self.dimension {
                return Err(LearnerError::DimensionMismatch {
                    expected: self.dimension,
                    found: n,
                });
            }
        } else {
            let mut max = None;
            x.for_each_entry(|i, _| max = max.max(Some(i)));
            if let Some(i) = max.filter(|&i| i >= self.dimension) {
                return Err(LearnerError::DimensionMismatch {
                    expected: self.dimension,
                    found: i + 1,
                });
            }
        }
        Ok(())
    }

    /// `W x + b`.
    pub fn scores<F: FeatureVector + ?Sized>(&self, x: &F) -> Result<Vec<T>, LearnerError> {
        self.check(x)?;
        let mut scores = self.bias.clone();
        x.for_each_entry(|j, v| {
            let v: T = real(v);
            for (c, s) in scores.iter_mut().enumerate() {
                *s += self.weights[c * self.dimension + j] * v;
            }
        });
        Ok(scores)
    }

    pub fn predict_proba<F: FeatureVector + ?Sized>(
        &self,
        x: &F,
    ) -> Result<ProbabilityDistribution, LearnerError> {
        let mut s = self.scores(x)?;
        super::softmax_in_place(&mut s);
        Ok(ProbabilityDistribution(
            s.into_iter().map(|p| p.to_f64().unwrap_or(f64::NAN)).collect(),
        ))
    }

    pub fn predict<F: FeatureVector + ?Sized>(&self, x: &F) -> Result<&str, LearnerError> {
        Ok(&self.classes[self.predict_proba(x)?.argmax()])
    }

    /// Cross-entropy of `target` at `x`.
    pub fn loss<F: FeatureVector + ?Sized>(&self, x: &F, target: usize) -> Result<T, LearnerError> {
        let mut s = self.scores(x)?;
        Ok(cross_entropy_backward(&mut s, target))
    }

    /// Loss and score gradient `p - onehot(target)`.
    fn backward<F: FeatureVector + ?Sized>(&self, x: &F, target: usize) -> Result<(T, Vec<T>), LearnerError> {
        let mut g = self.scores(x)?;
        let loss = cross_entropy_backward(&mut g, target);
        Ok((loss, g))
    }

    /// Adds `scale` times the parameter gradient built from score gradient
    /// `g` at `x`.
    fn accumulate<F: FeatureVector + ?Sized>(&mut self, x: &F, g: &[T], scale: T) {
        let d = self.dimension;
        x.for_each_entry(|j, v| {
            let v: T = real(v);
            for (c, &gc) in g.iter().enumerate() {
                self.weights[c * d + j] += scale * gc * v;
            }
        });
        for (b, &gc) in self.bias.iter_mut().zip(g) {
            *b += scale * gc;
        }
    }

    /// Gradient of [`LinearModel::loss`], shaped like the model.
    pub fn gradient<F: FeatureVector + ?Sized>(&self, x: &F, target: usize) -> Result<Self, LearnerError> {
        let (_, g) = self.backward(x, target)?;
        let mut grad = Self::zeros(self.classes.clone(), self.dimension);
        grad.accumulate(x, &g, T::one());
        Ok(grad)
    }

    /// One SGD update; returns the loss before the update.
    pub fn sgd_step<F: FeatureVector + ?Sized>(
        &mut self,
        x: &F,
        target: usize,
        learning_rate: f64,
    ) -> Result<T, LearnerError> {
        let (loss, g) = self.backward(x, target)?;
        self.accumulate(x, &g, real::<T>(-learning_rate));
        Ok(loss)
    }
}

/// Trains a zero-initialized linear softmax model on `dimension`-wide
/// features.
pub fn train_softmax_linear<F: FeatureVector>(
    features: &[F],
    labels: &Labels,
    dimension: usize,
    config: &TrainConfig,
) -> Result<Trained<LinearModel>, LearnerError> {
    config.validate()?;
    if features.len() != labels.len() {
        return Err(LearnerError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(LearnerError::EmptyTrainingSet);
    }
    let mut model = LinearModel::<f32>::zeros(labels.classes().to_vec(), dimension);
    for x in features {
        model.check(x)?;
    }
    let mut warnings = Vec::new();
    if labels.classes().len() == 1 {
        warnings.push(TrainWarning::SingleClassDegenerate(labels.classes()[0].clone()));
    }
    let mut rng = training_rng(config.seed);
    let targets = labels.targets();
    let (epoch_losses, epoch_seconds) = run_sgd(features.len(), config, &mut rng, |i, lr| {
        let loss = model
            .sgd_step(&features[i], targets[i], lr)
            .expect("dimensions checked");
        Some(f64::from(loss))
    });
    Ok(Trained {
        model,
        epoch_losses,
        epoch_seconds,
        warnings,
    })
}
