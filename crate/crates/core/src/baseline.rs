//! Minimal softmax classifier: multinomial logistic regression trained by
//! full-batch gradient descent on the mean cross-entropy.
//!
//! Weights start at zero, so training is deterministic and needs no seed.
//! Each weight row is `[w_1, ..., w_d, bias]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    /// One row per class, `n_features + 1` columns (bias last).
    pub weights: Vec<Vec<f64>>,
    pub iterations: usize,
    pub final_loss: f64,
    /// Whether the training loss never increased between iterations.
    pub loss_non_increasing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 300,
            learning_rate: 0.5,
        }
    }
}

impl BaselineModel {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        BaselineModel {
            weights: vec![vec![0.0; n_features + 1]; n_classes],
            iterations: 0,
            final_loss: f64::NAN,
            loss_non_increasing: true,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn n_features(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len() - 1)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                got: x.len(),
                expected: self.n_features(),
            });
        }
        Ok(logits(&self.weights, x))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.logits(x).map(|z| softmax(&z))
    }
}

fn logits(weights: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .map(|w| {
            let (bias, coef) = w.split_last().expect("weight row has a bias");
            coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias
        })
        .collect()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check_data(weights: &[Vec<f64>], features: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{} feature rows for {} labels",
            features.len(),
            labels.len()
        )));
    }
    let d = weights.first().map_or(0, |w| w.len().saturating_sub(1));
    if let Some(bad) = features.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            got: bad.len(),
            expected: d,
        });
    }
    if labels.iter().any(|&y| y >= weights.len()) {
        return Err(Error::InvalidConfig("class index out of range".into()));
    }
    Ok(())
}

/// Mean cross-entropy of the softmax model over the data.
pub fn cross_entropy(weights: &[Vec<f64>], features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    check_data(weights, features, labels)?;
    let total: f64 = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let z = logits(weights, x);
            log_sum_exp(&z) - z[y]
        })
        .sum();
    Ok(total / features.len() as f64)
}

/// Analytic gradient of [`cross_entropy`]: `mean_i (p_ik - [y_i = k]) * [x_i, 1]`.
pub fn cross_entropy_gradient(
    weights: &[Vec<f64>],
    features: &[Vec<f64>],
    labels: &[usize],
) -> Result<Vec<Vec<f64>>> {
    check_data(weights, features, labels)?;
    let n = features.len() as f64;
    let mut grad = vec![vec![0.0; weights[0].len()]; weights.len()];
    for (x, &y) in features.iter().zip(labels) {
        let p = softmax(&logits(weights, x));
        for (k, row) in grad.iter_mut().enumerate() {
            let r = p[k] - if k == y { 1.0 } else { 0.0 };
            let (bias, coef) = row.split_last_mut().expect("bias column");
            for (g, xi) in coef.iter_mut().zip(x) {
                *g += r * xi / n;
            }
            *bias += r / n;
        }
    }
    Ok(grad)
}

/// Fits the model by `config.iterations` steps of gradient descent from zero.
pub fn baseline_train(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    config: TrainConfig,
) -> Result<BaselineModel> {
    if config.iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be at least 1".into()));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("learning rate must be positive".into()));
    }
    let n_features = features.first().map_or(0, Vec::len);
    let mut model = BaselineModel::zeros(n_classes, n_features);
    check_data(&model.weights, features, labels)?;
    let first = labels[0];
    if labels.iter().all(|&y| y == first) {
        return Err(Error::DegenerateData);
    }

    let mut prev = cross_entropy(&model.weights, features, labels)?;
    for _ in 0..config.iterations {
        let grad = cross_entropy_gradient(&model.weights, features, labels)?;
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= config.learning_rate * gi;
            }
        }
        let loss = cross_entropy(&model.weights, features, labels)?;
        if loss > prev {
            model.loss_non_increasing = false;
        }
        prev = loss;
    }
    if model.weights.iter().flatten().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("baseline weights".into()));
    }
    model.iterations = config.iterations;
    model.final_loss = prev;
    Ok(model)
}

/// Softmax score rows for each feature row.
pub fn baseline_predict(model: &BaselineModel, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    features.iter().map(|x| model.predict_proba(x)).collect()
}
