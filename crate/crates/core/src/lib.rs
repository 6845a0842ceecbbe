//! Calibrated fault detection with split-conformal p-values.
//!
//! Any classifier's per-class scores become prediction sets with a
//! finite-sample coverage guarantee: under exchangeability of calibration and
//! test data, the true label is in the set with probability at least
//! `1 - alpha`. A set is then mapped to a `Normal`, `Faulty` or `Ambiguous`
//! decision by intersecting it with the normal and fault label subsets.
//!
//! ```
//! use pcfd_core::{calibrate, predict, Decision, LabelSpace, ScoreRecord};
//!
//! let space = LabelSpace::with_normal(&["Normal", "IR", "OR", "Ball"], &["Normal"]).unwrap();
//! let cal: Vec<_> = [0.95, 0.9, 0.8, 0.7, 0.6]
//!     .iter()
//!     .enumerate()
//!     .map(|(i, &p)| {
//!         let rest = (1.0 - p) / 3.0;
//!         ScoreRecord::labeled(format!("c{i}"), "Normal", vec![p, rest, rest, rest], &space).unwrap()
//!     })
//!     .collect();
//! let model = calibrate(&cal, &space).unwrap();
//! let x = ScoreRecord::new("x", None, vec![0.97, 0.01, 0.01, 0.01], &space).unwrap();
//! let outcome = predict(&model, &x, &space, "0.2".parse().unwrap()).unwrap();
//! assert_eq!(outcome.set_members, vec![0]);
//! assert_eq!(outcome.decision, Decision::Normal);
//! ```

pub mod baseline;
pub mod conformal;
pub mod decision;
pub mod domain;
pub mod error;
pub mod eval;
pub mod io;
pub mod simulate;
pub mod synth;

pub use conformal::{calibrate, nonconformity, p_value, p_values_all, predict, prediction_set};
pub use decision::{classify, classify_names};
pub use domain::{
    validate_label_space, Alpha, CalibrationModel, Decision, LabelSpace, PValue,
    PredictionOutcome, RawLabelSpace, ScoreRecord,
};
pub use error::{Error, Result};
pub use eval::{
    apss, ecr, miscoverage_on_normal, permutation_oracle, run_trial, split_half, sweep, type1_rate,
    SweepConfig, SweepReport, TrialMetrics,
};
