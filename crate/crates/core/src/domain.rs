//! Shared domain types: the partitioned label space, score records, the
//! calibration model, exact p-values, significance levels and outcomes.
//!
//! Labels are case-sensitive opaque strings. The order of `LabelSpace::labels`
//! is the canonical column order for score vectors, p-value vectors and files.
//! Label subsets are carried as sorted index vectors into that order.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered class labels split into a normal and a fault subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabelSpace", into = "RawLabelSpace")]
pub struct LabelSpace {
    labels: Vec<String>,
    is_normal: Vec<bool>,
}

/// Unvalidated label partition, as read from a file or the command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLabelSpace {
    pub labels: Vec<String>,
    pub normal_labels: Vec<String>,
    pub fault_labels: Vec<String>,
}

impl TryFrom<RawLabelSpace> for LabelSpace {
    type Error = Error;

    fn try_from(raw: RawLabelSpace) -> Result<Self> {
        validate_label_space(&raw)
    }
}

impl From<LabelSpace> for RawLabelSpace {
    fn from(space: LabelSpace) -> Self {
        RawLabelSpace {
            normal_labels: space.normal_labels().map(str::to_owned).collect(),
            fault_labels: space.fault_labels().map(str::to_owned).collect(),
            labels: space.labels,
        }
    }
}

/// Checks a raw partition and builds a [`LabelSpace`] from it.
pub fn validate_label_space(raw: &RawLabelSpace) -> Result<LabelSpace> {
    if raw.labels.is_empty() {
        return Err(Error::EmptyPartition("label"));
    }
    let mut seen = HashSet::new();
    for l in &raw.labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    if raw.normal_labels.is_empty() {
        return Err(Error::EmptyPartition("normal"));
    }
    if raw.fault_labels.is_empty() {
        return Err(Error::EmptyPartition("fault"));
    }
    let normal: HashSet<&str> = raw.normal_labels.iter().map(String::as_str).collect();
    let fault: HashSet<&str> = raw.fault_labels.iter().map(String::as_str).collect();
    if let Some(l) = raw.normal_labels.iter().find(|l| fault.contains(l.as_str())) {
        return Err(Error::Overlap(l.clone()));
    }
    for l in raw.normal_labels.iter().chain(&raw.fault_labels) {
        if !seen.contains(l.as_str()) {
            return Err(Error::UnknownLabel {
                label: l.clone(),
                line: None,
            });
        }
    }
    if let Some(l) = raw
        .labels
        .iter()
        .find(|l| !normal.contains(l.as_str()) && !fault.contains(l.as_str()))
    {
        return Err(Error::UncoveredLabel(l.clone()));
    }
    Ok(LabelSpace {
        is_normal: raw.labels.iter().map(|l| normal.contains(l.as_str())).collect(),
        labels: raw.labels.clone(),
    })
}

impl LabelSpace {
    pub fn new<S: AsRef<str>>(labels: &[S], normal: &[S], fault: &[S]) -> Result<Self> {
        let own = |v: &[S]| v.iter().map(|s| s.as_ref().to_owned()).collect();
        validate_label_space(&RawLabelSpace {
            labels: own(labels),
            normal_labels: own(normal),
            fault_labels: own(fault),
        })
    }

    /// Builds a space where every label not listed as normal is a fault label.
    pub fn with_normal<S: AsRef<str>>(labels: &[S], normal: &[S]) -> Result<Self> {
        let fault: Vec<&str> = labels
            .iter()
            .map(AsRef::as_ref)
            .filter(|l| !normal.iter().any(|n| n.as_ref() == *l))
            .collect();
        let labels: Vec<&str> = labels.iter().map(AsRef::as_ref).collect();
        let normal: Vec<&str> = normal.iter().map(AsRef::as_ref).collect();
        Self::new(&labels, &normal, &fault)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn require_index(&self, label: &str) -> Result<usize> {
        self.index_of(label).ok_or_else(|| Error::UnknownLabel {
            label: label.to_owned(),
            line: None,
        })
    }

    pub fn is_normal(&self, index: usize) -> bool {
        self.is_normal[index]
    }

    pub fn normal_labels(&self) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .zip(&self.is_normal)
            .filter(|(_, n)| **n)
            .map(|(l, _)| l.as_str())
    }

    pub fn fault_labels(&self) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .zip(&self.is_normal)
            .filter(|(_, n)| !**n)
            .map(|(l, _)| l.as_str())
    }
}

/// One sample's per-class scores, optionally with its true label index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub true_label: Option<usize>,
    pub scores: Vec<f64>,
}

impl ScoreRecord {
    pub fn new(
        sample_id: impl Into<String>,
        true_label: Option<usize>,
        scores: Vec<f64>,
        space: &LabelSpace,
    ) -> Result<Self> {
        let record = ScoreRecord {
            sample_id: sample_id.into(),
            true_label,
            scores,
        };
        record.validate(space)?;
        Ok(record)
    }

    /// Convenience constructor taking the true label by name.
    pub fn labeled(
        sample_id: impl Into<String>,
        true_label: &str,
        scores: Vec<f64>,
        space: &LabelSpace,
    ) -> Result<Self> {
        let idx = space.require_index(true_label)?;
        Self::new(sample_id, Some(idx), scores, space)
    }

    pub fn validate(&self, space: &LabelSpace) -> Result<()> {
        if self.scores.len() != space.len() {
            return Err(Error::ScoreArity {
                id: self.sample_id.clone(),
                got: self.scores.len(),
                expected: space.len(),
            });
        }
        if self.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite(self.sample_id.clone()));
        }
        if let Some(t) = self.true_label {
            if t >= space.len() {
                return Err(Error::UnknownLabel {
                    label: format!("#{t}"),
                    line: None,
                });
            }
        }
        Ok(())
    }

    pub fn require_label(&self) -> Result<usize> {
        self.true_label
            .ok_or_else(|| Error::MissingLabel(self.sample_id.clone()))
    }
}

/// Sorted calibration nonconformity scores `s_1 <= ... <= s_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCalibration", into = "RawCalibration")]
pub struct CalibrationModel {
    sorted_scores: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCalibration {
    n: usize,
    sorted_scores: Vec<f64>,
}

impl TryFrom<RawCalibration> for CalibrationModel {
    type Error = Error;

    fn try_from(raw: RawCalibration) -> Result<Self> {
        if raw.n != raw.sorted_scores.len() {
            return Err(Error::InvalidConfig(format!(
                "calibration count {} does not match {} stored scores",
                raw.n,
                raw.sorted_scores.len()
            )));
        }
        if raw.sorted_scores.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("calibration scores are not sorted".into()));
        }
        CalibrationModel::from_scores(raw.sorted_scores)
    }
}

impl From<CalibrationModel> for RawCalibration {
    fn from(model: CalibrationModel) -> Self {
        RawCalibration {
            n: model.n(),
            sorted_scores: model.sorted_scores,
        }
    }
}

impl CalibrationModel {
    /// Builds a model from unsorted nonconformity scores.
    pub fn from_scores(mut scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyCalibration);
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::NonFinite(format!("calibration score {bad}")));
        }
        scores.sort_by(f64::total_cmp);
        // -0.0 sorts before 0.0 under total_cmp; normalise so the list is plain.
        for s in &mut scores {
            if *s == 0.0 {
                *s = 0.0;
            }
        }
        Ok(CalibrationModel {
            sorted_scores: scores,
        })
    }

    pub fn sorted_scores(&self) -> &[f64] {
        &self.sorted_scores
    }

    pub fn n(&self) -> usize {
        self.sorted_scores.len()
    }
}

/// Exact conformal p-value `k / m` with `m = N + 1`, kept unreduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PValue {
    k: u64,
    m: u64,
}

impl PValue {
    pub fn new(k: u64, m: u64) -> Result<Self> {
        if m < 2 || k == 0 || k > m {
            return Err(Error::InvalidConfig(format!("p-value {k}/{m} is off the lattice")));
        }
        Ok(PValue { k, m })
    }

    pub fn numerator(self) -> u64 {
        self.k
    }

    pub fn denominator(self) -> u64 {
        self.m
    }

    pub fn to_f64(self) -> f64 {
        self.k as f64 / self.m as f64
    }

    /// `p > alpha`, decided exactly by cross-multiplication.
    pub fn exceeds(self, alpha: Alpha) -> bool {
        u128::from(self.k) * u128::from(alpha.den) > u128::from(alpha.num) * u128::from(self.m)
    }

    /// Decimal rendering with six places, rounding half to even on the exact ratio.
    pub fn decimal6(self) -> String {
        let scaled = u128::from(self.k) * 1_000_000;
        let m = u128::from(self.m);
        let (mut q, r) = (scaled / m, scaled % m);
        if 2 * r > m || (2 * r == m && q % 2 == 1) {
            q += 1;
        }
        format!("{}.{:06}", q / 1_000_000, q % 1_000_000)
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.k, self.m)
    }
}

impl FromStr for PValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (k, m) = s
            .split_once('/')
            .ok_or_else(|| Error::parse(None, format!("expected `k/m`, got `{s}`")))?;
        let num = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::parse(None, format!("bad p-value `{s}`")))
        };
        PValue::new(num(k)?, num(m)?)
    }
}

const MAX_ALPHA_DIGITS: u32 = 18;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Significance level in (0, 1), held as an exact reduced fraction.
///
/// Holding alpha exactly keeps `p > alpha` honest when alpha sits on a
/// p-value lattice point such as 0.5 or 0.7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alpha {
    num: u64,
    den: u64,
}

impl Alpha {
    pub fn from_ratio(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::AlphaOutOfRange(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(Alpha {
            num: num / g,
            den: den / g,
        })
    }

    /// Alpha from an `f64`, read through its shortest round-trip decimal form.
    pub fn from_f64(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 || value >= 1.0 {
            return Err(Error::AlphaOutOfRange(value.to_string()));
        }
        value.to_string().parse()
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn denominator(self) -> u64 {
        self.den
    }

    /// `floor(alpha * m)`, exact.
    pub fn floor_times(self, m: u64) -> u64 {
        (u128::from(self.num) * u128::from(m) / u128::from(self.den)) as u64
    }

    /// Parses `start:stop:step` (both ends inclusive, within `step / 2`) or a
    /// comma-separated list. Grid points are computed exactly.
    pub fn parse_grid(text: &str) -> Result<Vec<Alpha>> {
        let parts: Vec<&str> = text.split(':').collect();
        match parts.as_slice() {
            [single] => single.split(',').map(str::parse).collect(),
            [start, stop, step] => {
                let (a, b, h) = (start.parse::<Alpha>()?, stop.parse::<Alpha>()?, step.parse::<Alpha>()?);
                let den = lcm(lcm(a.den, b.den), h.den);
                let scale = |x: Alpha| u128::from(x.num) * u128::from(den / x.den);
                let (a, b, h) = (scale(a), scale(b), scale(h));
                if b < a {
                    return Err(Error::AlphaFormat(text.to_owned()));
                }
                let mut grid = Vec::new();
                let mut v = a;
                // v <= b + h/2, doubled to stay in integers
                while 2 * v <= 2 * b + h && v < u128::from(den) {
                    grid.push(Alpha::from_ratio(v as u64, den)?);
                    v += h;
                }
                Ok(grid)
            }
            _ => Err(Error::AlphaFormat(text.to_owned())),
        }
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::AlphaFormat(s.to_owned());
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let frac = frac.trim_end_matches('0');
        if frac.len() as u32 > MAX_ALPHA_DIGITS {
            return Err(bad());
        }
        let int_val: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        if int_val != 0 {
            return Err(Error::AlphaOutOfRange(s.to_owned()));
        }
        let den = 10u64.pow(frac.len() as u32);
        let num: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        Alpha::from_ratio(num, den).map_err(|_| Error::AlphaOutOfRange(s.to_owned()))
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Normal,
    Faulty,
    Ambiguous,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Normal => "Normal",
            Decision::Faulty => "Faulty",
            Decision::Ambiguous => "Ambiguous",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Normal" => Ok(Decision::Normal),
            "Faulty" => Ok(Decision::Faulty),
            "Ambiguous" => Ok(Decision::Ambiguous),
            other => Err(Error::parse(None, format!("unknown decision `{other}`"))),
        }
    }
}

/// Per-label p-values, the prediction set at `alpha`, and the decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOutcome {
    pub sample_id: String,
    pub true_label: Option<usize>,
    /// One entry per label, in label-space order.
    pub p_values: Vec<PValue>,
    /// Sorted label indices with `p > alpha`.
    pub set_members: Vec<usize>,
    pub alpha: Alpha,
    pub decision: Decision,
}

impl PredictionOutcome {
    pub fn covers_truth(&self) -> Option<bool> {
        self.true_label.map(|t| self.set_members.binary_search(&t).is_ok())
    }

    pub fn set_size(&self) -> usize {
        self.set_members.len()
    }
}
