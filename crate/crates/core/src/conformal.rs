//! Split-conformal engine: residual nonconformity, rank p-values and
//! prediction sets.
//!
//! For a base model with per-class scores `f(x)`, the nonconformity of label
//! `y` is `|1 - f_y(x)|`. Given calibration scores `s_1..s_N`, the p-value of a
//! candidate score `S` is
//!
//! ```text
//! p = (#{i : s_i > S} + 1) / (N + 1)
//! ```
//!
//! with a strict inequality, so ties with calibration scores raise `p`. The
//! prediction set keeps every label whose p-value strictly exceeds `alpha`.

use crate::decision::classify;
use crate::domain::{Alpha, CalibrationModel, LabelSpace, PValue, PredictionOutcome, ScoreRecord};
use crate::error::{Error, Result};

/// Nonconformity of `label` for `record`.
pub fn nonconformity(record: &ScoreRecord, label: &str, space: &LabelSpace) -> Result<f64> {
    let idx = space.require_index(label)?;
    nonconformity_at(record, idx)
}

/// Nonconformity of the label at position `index` in the label space.
pub fn nonconformity_at(record: &ScoreRecord, index: usize) -> Result<f64> {
    let score = record.scores.get(index).ok_or_else(|| Error::UnknownLabel {
        label: format!("#{index}"),
        line: None,
    })?;
    Ok((1.0 - score).abs())
}

/// Builds the calibration model from labeled records.
pub fn calibrate(records: &[ScoreRecord], space: &LabelSpace) -> Result<CalibrationModel> {
    if records.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let scores = records
        .iter()
        .map(|r| {
            r.validate(space)?;
            nonconformity_at(r, r.require_label()?)
        })
        .collect::<Result<Vec<_>>>()?;
    CalibrationModel::from_scores(scores)
}

/// Conformal p-value of a candidate nonconformity score.
///
/// `candidate` must be finite.
pub fn p_value(model: &CalibrationModel, candidate: f64) -> PValue {
    let sorted = model.sorted_scores();
    let n = sorted.len() as u64;
    let at_or_below = sorted.partition_point(|&s| s <= candidate) as u64;
    let greater = n - at_or_below;
    PValue::new(greater + 1, n + 1).expect("count is within the lattice")
}

/// p-values for every label of `space`, in label order.
pub fn p_values_all(
    model: &CalibrationModel,
    record: &ScoreRecord,
    space: &LabelSpace,
) -> Result<Vec<PValue>> {
    record.validate(space)?;
    (0..space.len())
        .map(|i| nonconformity_at(record, i).map(|s| p_value(model, s)))
        .collect()
}

/// Label indices whose p-value strictly exceeds `alpha`.
pub fn prediction_set(p_values: &[PValue], alpha: Alpha) -> Vec<usize> {
    p_values
        .iter()
        .enumerate()
        .filter(|(_, p)| p.exceeds(alpha))
        .map(|(i, _)| i)
        .collect()
}

/// Turns precomputed p-values into a full outcome at `alpha`.
pub fn outcome_from_p_values(
    record: &ScoreRecord,
    p_values: Vec<PValue>,
    alpha: Alpha,
    space: &LabelSpace,
) -> Result<PredictionOutcome> {
    let set_members = prediction_set(&p_values, alpha);
    let decision = classify(&set_members, space)?;
    Ok(PredictionOutcome {
        sample_id: record.sample_id.clone(),
        true_label: record.true_label,
        p_values,
        set_members,
        alpha,
        decision,
    })
}

/// p-values, prediction set and decision for one record.
pub fn predict(
    model: &CalibrationModel,
    record: &ScoreRecord,
    space: &LabelSpace,
    alpha: Alpha,
) -> Result<PredictionOutcome> {
    let p = p_values_all(model, record, space)?;
    outcome_from_p_values(record, p, alpha, space)
}
