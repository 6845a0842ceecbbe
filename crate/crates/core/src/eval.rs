//! Evaluation harness: coverage and set-size metrics, false-alarm accounting,
//! seeded calibration/evaluation splits, repeated trials over an alpha grid,
//! and an exact rank-enumeration oracle for p-value validity.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conformal::{calibrate, outcome_from_p_values, p_values_all};
use crate::domain::{Alpha, Decision, LabelSpace, PredictionOutcome, ScoreRecord};
use crate::error::{Error, Result};

/// Fraction of outcomes whose true label lies in the prediction set.
pub fn ecr(outcomes: &[PredictionOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let mut covered = 0usize;
    for o in outcomes {
        match o.covers_truth() {
            Some(true) => covered += 1,
            Some(false) => {}
            None => return Err(Error::MissingLabel(o.sample_id.clone())),
        }
    }
    Ok(covered as f64 / outcomes.len() as f64)
}

/// Mean prediction-set size.
pub fn apss(outcomes: &[PredictionOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let total: usize = outcomes.iter().map(PredictionOutcome::set_size).sum();
    Ok(total as f64 / outcomes.len() as f64)
}

/// Joint tally of coverage and decision over outcomes with a normal true label.
///
/// `type1 = missed_faulty + covered_faulty` and
/// `miscovered = missed_faulty + missed_normal + missed_ambiguous` hold exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalBreakdown {
    pub total: usize,
    pub covered_normal: usize,
    pub covered_faulty: usize,
    pub missed_normal: usize,
    pub missed_faulty: usize,
    pub missed_ambiguous: usize,
}

impl NormalBreakdown {
    pub fn tally(outcomes: &[PredictionOutcome], space: &LabelSpace) -> Result<Self> {
        let mut b = NormalBreakdown::default();
        for o in outcomes {
            let t = o
                .true_label
                .ok_or_else(|| Error::MissingLabel(o.sample_id.clone()))?;
            if t >= space.len() {
                return Err(Error::UnknownLabel {
                    label: format!("#{t}"),
                    line: None,
                });
            }
            if !space.is_normal(t) {
                continue;
            }
            b.total += 1;
            let covered = o.set_members.binary_search(&t).is_ok();
            match (covered, o.decision) {
                (true, Decision::Normal) => b.covered_normal += 1,
                (true, Decision::Faulty) => b.covered_faulty += 1,
                // a covered normal label rules out an empty set
                (true, Decision::Ambiguous) => unreachable!("covered set is non-empty"),
                (false, Decision::Normal) => b.missed_normal += 1,
                (false, Decision::Faulty) => b.missed_faulty += 1,
                (false, Decision::Ambiguous) => b.missed_ambiguous += 1,
            }
        }
        if b.total == 0 {
            return Err(Error::NoNormalSamples);
        }
        Ok(b)
    }

    pub fn faulty(&self) -> usize {
        self.covered_faulty + self.missed_faulty
    }

    pub fn miscovered(&self) -> usize {
        self.missed_normal + self.missed_faulty + self.missed_ambiguous
    }

    pub fn type1_rate(&self) -> f64 {
        self.faulty() as f64 / self.total as f64
    }

    pub fn miscoverage_rate(&self) -> f64 {
        self.miscovered() as f64 / self.total as f64
    }
}

/// Among normal-truth outcomes, the fraction decided `Faulty`.
pub fn type1_rate(outcomes: &[PredictionOutcome], space: &LabelSpace) -> Result<f64> {
    NormalBreakdown::tally(outcomes, space).map(|b| b.type1_rate())
}

/// Among normal-truth outcomes, the fraction whose true label is not in the set.
pub fn miscoverage_on_normal(outcomes: &[PredictionOutcome], space: &LabelSpace) -> Result<f64> {
    NormalBreakdown::tally(outcomes, space).map(|b| b.miscoverage_rate())
}

/// Seeded random split: the first `ceil(n * calib_ratio)` records of a
/// uniform permutation go to calibration, the rest to evaluation. Both sides
/// keep at least one record.
pub fn split(
    records: &[ScoreRecord],
    calib_ratio: f64,
    seed: u64,
) -> Result<(Vec<ScoreRecord>, Vec<ScoreRecord>)> {
    let n = records.len();
    if n < 2 {
        return Err(Error::TooFewRecords(n));
    }
    check_ratio(calib_ratio)?;
    let n_calib = calib_count(n, calib_ratio);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |ix: &[usize]| ix.iter().map(|&i| records[i].clone()).collect();
    Ok((pick(&order[..n_calib]), pick(&order[n_calib..])))
}

/// [`split`] with equal halves, calibration taking the odd record.
pub fn split_half(records: &[ScoreRecord], seed: u64) -> Result<(Vec<ScoreRecord>, Vec<ScoreRecord>)> {
    split(records, 0.5, seed)
}

fn check_ratio(calib_ratio: f64) -> Result<()> {
    if !(calib_ratio > 0.0 && calib_ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "calibration ratio {calib_ratio} is outside (0, 1)"
        )));
    }
    Ok(())
}

fn calib_count(n: usize, calib_ratio: f64) -> usize {
    // the small offset keeps products like 0.3 * 10 from rounding up to 4
    let raw = (n as f64 * calib_ratio - 1e-9).ceil() as usize;
    raw.clamp(1, n - 1)
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `t`: `splitmix64(base + (t + 1) * 0x9E3779B97F4A7C15)`,
/// with wrapping arithmetic.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    splitmix64(base_seed.wrapping_add((trial as u64 + 1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Metrics of one trial at one significance level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    pub alpha: Alpha,
    pub trial: usize,
    pub ecr: f64,
    pub apss: f64,
    pub type1_rate: f64,
    pub miscoverage_normal: f64,
    pub n_eval: usize,
}

impl TrialMetrics {
    pub fn from_outcomes(
        outcomes: &[PredictionOutcome],
        space: &LabelSpace,
        alpha: Alpha,
        trial: usize,
    ) -> Result<Self> {
        let b = NormalBreakdown::tally(outcomes, space)?;
        Ok(TrialMetrics {
            alpha,
            trial,
            ecr: ecr(outcomes)?,
            apss: apss(outcomes)?,
            type1_rate: b.type1_rate(),
            miscoverage_normal: b.miscoverage_rate(),
            n_eval: outcomes.len(),
        })
    }
}

/// One calibration/evaluation split evaluated at every alpha of the grid.
///
/// The calibration is shared across the grid, so sets are nested in alpha.
/// Returns outcomes grouped per alpha, in grid order.
pub fn trial_outcomes(
    records: &[ScoreRecord],
    space: &LabelSpace,
    alphas: &[Alpha],
    calib_ratio: f64,
    seed: u64,
) -> Result<Vec<Vec<PredictionOutcome>>> {
    if let Some(r) = records.iter().find(|r| r.true_label.is_none()) {
        return Err(Error::MissingLabel(r.sample_id.clone()));
    }
    let (cal, eval) = split(records, calib_ratio, seed)?;
    let model = calibrate(&cal, space)?;
    let p = eval
        .iter()
        .map(|r| p_values_all(&model, r, space))
        .collect::<Result<Vec<_>>>()?;
    alphas
        .iter()
        .map(|&a| {
            eval.iter()
                .zip(&p)
                .map(|(r, pv)| outcome_from_p_values(r, pv.clone(), a, space))
                .collect()
        })
        .collect()
}

/// Split, calibrate, predict and aggregate at a single alpha with a 1:1 split.
pub fn run_trial(
    records: &[ScoreRecord],
    space: &LabelSpace,
    alpha: Alpha,
    seed: u64,
) -> Result<TrialMetrics> {
    let outcomes = trial_outcomes(records, space, &[alpha], 0.5, seed)?;
    TrialMetrics::from_outcomes(&outcomes[0], space, alpha, 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub alphas: Vec<Alpha>,
    pub n_trials: usize,
    pub seed: u64,
    pub calib_ratio: f64,
}

impl SweepConfig {
    pub fn new(alphas: Vec<Alpha>, n_trials: usize, seed: u64) -> Self {
        SweepConfig {
            alphas,
            n_trials,
            seed,
            calib_ratio: 0.5,
        }
    }

    pub fn with_calib_ratio(mut self, calib_ratio: f64) -> Self {
        self.calib_ratio = calib_ratio;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::InvalidConfig("alpha grid is empty".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("number of trials must be at least 1".into()));
        }
        check_ratio(self.calib_ratio)
    }
}

/// Per-alpha aggregates over trials. Standard deviations are population SDs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSummary {
    pub alpha: Alpha,
    pub ecr_mean: f64,
    pub ecr_sd: f64,
    pub apss_mean: f64,
    pub apss_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub seed: u64,
    pub n_trials: usize,
    /// Sorted by (alpha grid position, trial).
    pub rows: Vec<TrialMetrics>,
    /// One entry per alpha, in grid order.
    pub summaries: Vec<AlphaSummary>,
}

impl SweepReport {
    pub fn rows_for(&self, alpha: Alpha) -> impl Iterator<Item = &TrialMetrics> {
        self.rows.iter().filter(move |r| r.alpha == alpha)
    }

    /// Mean Type-I rate over trials at `alpha`.
    pub fn type1_mean(&self, alpha: Alpha) -> f64 {
        mean_sd(&self.rows_for(alpha).map(|r| r.type1_rate).collect::<Vec<_>>()).0
    }

    /// Mean miscoverage of normal-truth samples over trials at `alpha`.
    pub fn miscoverage_mean(&self, alpha: Alpha) -> f64 {
        mean_sd(&self.rows_for(alpha).map(|r| r.miscoverage_normal).collect::<Vec<_>>()).0
    }
}

/// Repeats [`trial_outcomes`] for `n_trials` derived seeds and aggregates.
///
/// Trials run on the current rayon pool; the result does not depend on the
/// pool size.
pub fn sweep(records: &[ScoreRecord], space: &LabelSpace, config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let per_trial = (0..config.n_trials)
        .into_par_iter()
        .map(|t| {
            let outcomes = trial_outcomes(
                records,
                space,
                &config.alphas,
                config.calib_ratio,
                trial_seed(config.seed, t),
            )?;
            config
                .alphas
                .iter()
                .zip(&outcomes)
                .map(|(&a, o)| TrialMetrics::from_outcomes(o, space, a, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(config.alphas.len() * config.n_trials);
    for ai in 0..config.alphas.len() {
        rows.extend(per_trial.iter().map(|trial| trial[ai]));
    }
    let summaries = summarize(&rows, &config.alphas);
    Ok(SweepReport {
        seed: config.seed,
        n_trials: config.n_trials,
        rows,
        summaries,
    })
}

/// Mean and population SD per alpha, reducing rows in trial order.
pub fn summarize(rows: &[TrialMetrics], alphas: &[Alpha]) -> Vec<AlphaSummary> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut sel: Vec<&TrialMetrics> = rows.iter().filter(|r| r.alpha == alpha).collect();
            sel.sort_by_key(|r| r.trial);
            let col = |f: fn(&TrialMetrics) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (ecr_mean, ecr_sd) = mean_sd(&col(|r| r.ecr));
            let (apss_mean, apss_sd) = mean_sd(&col(|r| r.apss));
            AlphaSummary {
                alpha,
                ecr_mean,
                ecr_sd,
                apss_mean,
                apss_sd,
            }
        })
        .collect()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// An exact probability `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactFraction {
    pub num: u64,
    pub den: u64,
}

impl ExactFraction {
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Exact probability that the true label's p-value is `<= alpha` when the
/// test score and `n_calib` calibration scores are exchangeable and distinct.
///
/// Works by enumerating the `n_calib + 1` equally likely ranks of the test
/// score among the pooled values, building the calibration list for each rank
/// and counting the strictly larger calibration values directly.
pub fn permutation_oracle(n_calib: usize, alpha: Alpha) -> Result<ExactFraction> {
    if n_calib == 0 {
        return Err(Error::EmptyCalibration);
    }
    let m = n_calib as u64 + 1;
    let mut rejections = 0u64;
    for test_rank in 0..=n_calib {
        let calibration = (0..=n_calib).filter(|&v| v != test_rank);
        let larger = calibration.filter(|&v| v > test_rank).count() as u64;
        // p = (larger + 1) / m <= alpha
        if u128::from(larger + 1) * u128::from(alpha.denominator())
            <= u128::from(alpha.numerator()) * u128::from(m)
        {
            rejections += 1;
        }
    }
    Ok(ExactFraction {
        num: rejections,
        den: m,
    })
}
