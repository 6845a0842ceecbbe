//! End-to-end score generation: synthetic features, a training split for the
//! baseline classifier, and softmax score records for the held-out pool.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baseline::{baseline_predict, baseline_train, BaselineModel, TrainConfig};
use crate::domain::{LabelSpace, ScoreRecord};
use crate::error::{Error, Result};
use crate::synth::{synth_generate, SynthConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub synth: SynthConfig,
    /// Fraction of generated samples used to train the baseline.
    pub train_fraction: f64,
    pub train: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: BaselineModel,
    /// Scores for the pool disjoint from training, ordered by sample id.
    pub records: Vec<ScoreRecord>,
    pub train_size: usize,
}

pub const DEFAULT_LABELS: [&str; 4] = ["Normal", "IR", "OR", "Ball"];
pub const DEFAULT_NORMAL_LABEL: &str = "Normal";
pub const DEFAULT_PER_CLASS: usize = 150;
pub const DEFAULT_FEATURES: usize = 4;
pub const DEFAULT_SEPARATION: f64 = 2.0;
pub const DEFAULT_NOISE: f64 = 1.0;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.6;

impl SimulateConfig {
    /// Default setup: four bearing-style classes, 150 samples each, a 60/40
    /// train/pool split and the default baseline training schedule.
    pub fn with_defaults(seed: u64) -> Self {
        let space = LabelSpace::with_normal(&DEFAULT_LABELS, &[DEFAULT_NORMAL_LABEL])
            .expect("default label space is valid");
        SimulateConfig {
            synth: SynthConfig {
                n_per_class: DEFAULT_PER_CLASS,
                n_features: DEFAULT_FEATURES,
                class_separation: DEFAULT_SEPARATION,
                noise_scale: DEFAULT_NOISE,
                seed,
                label_space: space,
            },
            train_fraction: DEFAULT_TRAIN_FRACTION,
            train: TrainConfig::default(),
        }
    }

    pub fn space(&self) -> &LabelSpace {
        &self.synth.label_space
    }
}

/// Generates data, trains on a seeded `train_fraction` of it, and scores the rest.
///
/// Sample ids are `s<index>` with the zero-padded generation index.
pub fn simulate(config: &SimulateConfig) -> Result<Simulation> {
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {} is outside (0, 1)",
            config.train_fraction
        )));
    }
    let data = synth_generate(&config.synth)?;
    let n = data.len();
    let n_train = ((n as f64 * config.train_fraction).round() as usize).clamp(1, n - 1);

    let mut order: Vec<usize> = (0..n).collect();
    // a separate stream from the generator keeps the split independent of draws
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.synth.seed ^ 0x5EED_5911_7000_0001));
    let (train_idx, pool_idx) = order.split_at(n_train);
    let mut pool_idx = pool_idx.to_vec();
    pool_idx.sort_unstable();

    let train = data.select(train_idx);
    let space = &config.synth.label_space;
    let model = baseline_train(&train.features, &train.labels, space.len(), config.train)?;

    let pool = data.select(&pool_idx);
    let scores = baseline_predict(&model, &pool.features)?;
    let width = n.to_string().len();
    let records = pool_idx
        .iter()
        .zip(pool.labels)
        .zip(scores)
        .map(|((&i, y), s)| ScoreRecord::new(format!("s{i:0width$}"), Some(y), s, space))
        .collect::<Result<Vec<_>>>()?;
    Ok(Simulation {
        model,
        records,
        train_size: n_train,
    })
}
