//! Seeded Gaussian-blob generator standing in for real sensor datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::LabelSpace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub n_features: usize,
    /// Distance of each class mean from the origin. Zero makes all classes
    /// identically distributed.
    pub class_separation: f64,
    pub noise_scale: f64,
    pub seed: u64,
    pub label_space: LabelSpace,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::InvalidConfig("n_per_class must be at least 1".into()));
        }
        if self.n_features == 0 {
            return Err(Error::InvalidConfig("n_features must be at least 1".into()));
        }
        if !(self.class_separation.is_finite() && self.class_separation >= 0.0) {
            return Err(Error::InvalidConfig("class_separation must be finite and >= 0".into()));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::InvalidConfig("noise_scale must be finite and > 0".into()));
        }
        Ok(())
    }
}

/// Feature rows with their class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledFeatures {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> LabeledFeatures {
        LabeledFeatures {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Unit directions of the class means. The first `min(classes, features)`
/// are coordinate axes; any further class gets a normalised Gaussian direction.
fn class_directions(n_classes: usize, n_features: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n_classes)
        .map(|c| {
            if c < n_features {
                let mut e = vec![0.0; n_features];
                e[c] = 1.0;
                e
            } else {
                loop {
                    let v: Vec<f64> = (0..n_features).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        break v.into_iter().map(|x| x / norm).collect();
                    }
                }
            }
        })
        .collect()
}

/// Draws `n_per_class` points per class, class by class in label order.
pub fn synth_generate(config: &SynthConfig) -> Result<LabeledFeatures> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.label_space.len();
    let dirs = class_directions(k, config.n_features, &mut rng);
    let mut features = Vec::with_capacity(k * config.n_per_class);
    let mut labels = Vec::with_capacity(k * config.n_per_class);
    for (c, dir) in dirs.iter().enumerate() {
        for _ in 0..config.n_per_class {
            let x = dir
                .iter()
                .map(|d| {
                    let z: f64 = rng.sample(StandardNormal);
                    config.class_separation * d + config.noise_scale * z
                })
                .collect();
            features.push(x);
            labels.push(c);
        }
    }
    Ok(LabeledFeatures { features, labels })
}
