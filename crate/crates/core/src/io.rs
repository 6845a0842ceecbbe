//! File formats: score files, outcome files, sweep reports and the
//! calibration artifact.
//!
//! Score file: UTF-8 CSV with a mandatory header `sample_id,true_label,<label>...`.
//! The label columns define the label order; `true_label` may be empty.
//!
//! Outcome file: `sample_id,true_label,alpha,decision,set_members,p_<label>...,
//! p_<label>_rational...`, set members joined by `;`, p-values both as six-place
//! decimals and as exact `k/m` text.
//!
//! Report files: per-trial rows `alpha,trial,ecr,apss,type1_rate,
//! miscoverage_normal,n_eval` and per-alpha aggregates
//! `alpha,ecr_mean,ecr_sd,apss_mean,apss_sd`. Report floats use six decimal
//! places, rounded half to even.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Alpha, CalibrationModel, Decision, LabelSpace, PValue, PredictionOutcome, ScoreRecord};
use crate::error::{Error, Result};
use crate::eval::{AlphaSummary, SweepReport, TrialMetrics};

const SET_DELIMITER: char = ';';

/// Label columns of a score file together with its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub labels: Vec<String>,
    pub records: Vec<ScoreRecord>,
}

impl ScoreTable {
    /// Checks that `space` uses exactly this file's label columns, in order.
    pub fn matches(&self, space: &LabelSpace) -> bool {
        self.labels == space.labels()
    }
}

/// Formats a report value with six decimal places.
pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_alpha(a: Alpha) -> String {
    fmt6(a.value())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io {
            path: "<csv stream>".into(),
            source: io,
        },
        other => Error::parse(line, format!("{other:?}")),
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().flexible(true).from_writer(w)
}

fn rows<R: Read>(r: R) -> impl Iterator<Item = Result<(usize, csv::StringRecord)>> {
    reader(r).into_records().map(|rec| {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        Ok((line, rec))
    })
}

fn expect_header(
    rows: &mut impl Iterator<Item = Result<(usize, csv::StringRecord)>>,
    fixed: &[&str],
) -> Result<Vec<String>> {
    let (line, header) = rows
        .next()
        .ok_or_else(|| Error::parse(Some(1), "missing header"))??;
    let cols: Vec<String> = header.iter().map(str::to_owned).collect();
    if cols.len() < fixed.len() || cols.iter().zip(fixed).any(|(a, b)| a != b) {
        return Err(Error::parse(
            Some(line),
            format!("header must start with `{}`", fixed.join(",")),
        ));
    }
    Ok(cols)
}

fn parse_float(s: &str, line: usize, column: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(Some(line), format!("bad number `{s}` in column `{column}`")))
}

fn parse_usize(s: &str, line: usize, column: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(Some(line), format!("bad count `{s}` in column `{column}`")))
}

fn check_label_columns(labels: &[String], line: usize) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::parse(Some(line), "no label columns"));
    }
    for (i, l) in labels.iter().enumerate() {
        if l.is_empty() || l.contains(SET_DELIMITER) {
            return Err(Error::parse(Some(line), format!("invalid label name `{l}`")));
        }
        if labels[..i].contains(l) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

fn label_index(labels: &[String], name: &str, line: usize) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == name)
        .ok_or_else(|| Error::UnknownLabel {
            label: name.to_owned(),
            line: Some(line),
        })
}

/// Reads a score file from any reader. Row order is preserved.
pub fn read_scores<R: Read>(input: R) -> Result<ScoreTable> {
    let mut it = rows(input);
    let cols = expect_header(&mut it, &["sample_id", "true_label"])?;
    let labels = cols[2..].to_vec();
    check_label_columns(&labels, 1)?;
    let mut records = Vec::new();
    for row in it {
        let (line, rec) = row?;
        if rec.len() != cols.len() {
            return Err(Error::parse(
                Some(line),
                format!("expected {} fields, found {}", cols.len(), rec.len()),
            ));
        }
        let truth = match &rec[1] {
            "" => None,
            name => Some(label_index(&labels, name, line)?),
        };
        let scores = rec
            .iter()
            .skip(2)
            .zip(&labels)
            .map(|(v, col)| {
                let x = parse_float(v, line, col)?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::NonFiniteScore {
                        line,
                        value: v.to_owned(),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(ScoreRecord {
            sample_id: rec[0].to_owned(),
            true_label: truth,
            scores,
        });
    }
    Ok(ScoreTable { labels, records })
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreTable> {
    read_scores(open(path.as_ref())?)
}

/// Writes a score file. Scores keep full round-trip precision.
pub fn write_scores<W: Write>(output: W, space: &LabelSpace, records: &[ScoreRecord]) -> Result<()> {
    check_label_columns(space.labels(), 1)?;
    let mut w = writer(output);
    let mut header = vec!["sample_id".to_owned(), "true_label".to_owned()];
    header.extend(space.labels().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        r.validate(space)?;
        let mut row = vec![
            r.sample_id.clone(),
            r.true_label.map(|t| space.label(t).to_owned()).unwrap_or_default(),
        ];
        row.extend(r.scores.iter().map(|s| s.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv stream>", e))
}

pub fn save_scores(path: impl AsRef<Path>, space: &LabelSpace, records: &[ScoreRecord]) -> Result<()> {
    let path = path.as_ref();
    write_scores(create(path)?, space, records)
}

/// Label columns of an outcome file together with its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    pub labels: Vec<String>,
    pub outcomes: Vec<PredictionOutcome>,
}

const OUTCOME_FIXED: [&str; 5] = ["sample_id", "true_label", "alpha", "decision", "set_members"];

pub fn write_outcomes<W: Write>(
    output: W,
    space: &LabelSpace,
    outcomes: &[PredictionOutcome],
) -> Result<()> {
    check_label_columns(space.labels(), 1)?;
    let mut w = writer(output);
    let mut header: Vec<String> = OUTCOME_FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(space.labels().iter().map(|l| format!("p_{l}")));
    header.extend(space.labels().iter().map(|l| format!("p_{l}_rational")));
    w.write_record(&header).map_err(csv_err)?;
    for o in outcomes {
        if o.p_values.len() != space.len() || o.set_members.iter().any(|&i| i >= space.len()) {
            return Err(Error::LabelSpaceMismatch);
        }
        let set: Vec<&str> = o.set_members.iter().map(|&i| space.label(i)).collect();
        let mut row = vec![
            o.sample_id.clone(),
            o.true_label.map(|t| space.label(t).to_owned()).unwrap_or_default(),
            fmt_alpha(o.alpha),
            o.decision.to_string(),
            set.join(&SET_DELIMITER.to_string()),
        ];
        row.extend(o.p_values.iter().map(|p| p.decimal6()));
        row.extend(o.p_values.iter().map(|p| p.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv stream>", e))
}

pub fn save_outcomes(
    path: impl AsRef<Path>,
    space: &LabelSpace,
    outcomes: &[PredictionOutcome],
) -> Result<()> {
    write_outcomes(create(path.as_ref())?, space, outcomes)
}

/// Reads an outcome file. Exact p-values come from the rational columns.
pub fn read_outcomes<R: Read>(input: R) -> Result<OutcomeTable> {
    let mut it = rows(input);
    let cols = expect_header(&mut it, &OUTCOME_FIXED)?;
    let rest = &cols[OUTCOME_FIXED.len()..];
    if rest.is_empty() || rest.len() % 2 != 0 {
        return Err(Error::parse(Some(1), "p-value columns must come in decimal/rational pairs"));
    }
    let k = rest.len() / 2;
    let labels = rest[..k]
        .iter()
        .zip(&rest[k..])
        .map(|(dec, rat)| {
            let l = dec
                .strip_prefix("p_")
                .ok_or_else(|| Error::parse(Some(1), format!("bad column `{dec}`")))?;
            if rat != &format!("p_{l}_rational") {
                return Err(Error::parse(Some(1), format!("bad column `{rat}`")));
            }
            Ok(l.to_owned())
        })
        .collect::<Result<Vec<_>>>()?;
    check_label_columns(&labels, 1)?;

    let mut outcomes = Vec::new();
    for row in it {
        let (line, rec) = row?;
        if rec.len() != cols.len() {
            return Err(Error::parse(
                Some(line),
                format!("expected {} fields, found {}", cols.len(), rec.len()),
            ));
        }
        let true_label = match &rec[1] {
            "" => None,
            name => Some(label_index(&labels, name, line)?),
        };
        let alpha: Alpha = rec[2].parse()?;
        let decision: Decision = rec[3]
            .parse()
            .map_err(|_| Error::parse(Some(line), format!("unknown decision `{}`", &rec[3])))?;
        let mut set_members = match &rec[4] {
            "" => Vec::new(),
            s => s
                .split(SET_DELIMITER)
                .map(|name| label_index(&labels, name, line))
                .collect::<Result<Vec<_>>>()?,
        };
        set_members.sort_unstable();
        set_members.dedup();
        let p_values = (0..k)
            .map(|i| {
                rec[OUTCOME_FIXED.len() + k + i]
                    .parse::<PValue>()
                    .map_err(|_| Error::parse(Some(line), format!("bad p-value `{}`", &rec[OUTCOME_FIXED.len() + k + i])))
            })
            .collect::<Result<Vec<_>>>()?;
        outcomes.push(PredictionOutcome {
            sample_id: rec[0].to_owned(),
            true_label,
            p_values,
            set_members,
            alpha,
            decision,
        });
    }
    Ok(OutcomeTable { labels, outcomes })
}

pub fn load_outcomes(path: impl AsRef<Path>) -> Result<OutcomeTable> {
    read_outcomes(open(path.as_ref())?)
}

const TRIAL_HEADER: [&str; 7] = [
    "alpha",
    "trial",
    "ecr",
    "apss",
    "type1_rate",
    "miscoverage_normal",
    "n_eval",
];
const SUMMARY_HEADER: [&str; 5] = ["alpha", "ecr_mean", "ecr_sd", "apss_mean", "apss_sd"];

pub fn write_trials<W: Write>(output: W, rows: &[TrialMetrics]) -> Result<()> {
    let mut w = writer(output);
    w.write_record(TRIAL_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            fmt_alpha(r.alpha),
            r.trial.to_string(),
            fmt6(r.ecr),
            fmt6(r.apss),
            fmt6(r.type1_rate),
            fmt6(r.miscoverage_normal),
            r.n_eval.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv stream>", e))
}

pub fn write_summary<W: Write>(output: W, summaries: &[AlphaSummary]) -> Result<()> {
    let mut w = writer(output);
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for s in summaries {
        w.write_record([
            fmt_alpha(s.alpha),
            fmt6(s.ecr_mean),
            fmt6(s.ecr_sd),
            fmt6(s.apss_mean),
            fmt6(s.apss_sd),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv stream>", e))
}

/// Writes the per-trial file and the per-alpha aggregate file.
pub fn save_report(
    trials_path: impl AsRef<Path>,
    summary_path: impl AsRef<Path>,
    report: &SweepReport,
) -> Result<()> {
    write_trials(create(trials_path.as_ref())?, &report.rows)?;
    write_summary(create(summary_path.as_ref())?, &report.summaries)
}

pub fn read_trials<R: Read>(input: R) -> Result<Vec<TrialMetrics>> {
    let mut it = rows(input);
    let cols = expect_header(&mut it, &TRIAL_HEADER)?;
    let mut out = Vec::new();
    for row in it {
        let (line, rec) = row?;
        if rec.len() != cols.len() {
            return Err(Error::parse(Some(line), "wrong number of fields"));
        }
        out.push(TrialMetrics {
            alpha: rec[0].parse()?,
            trial: parse_usize(&rec[1], line, "trial")?,
            ecr: parse_float(&rec[2], line, "ecr")?,
            apss: parse_float(&rec[3], line, "apss")?,
            type1_rate: parse_float(&rec[4], line, "type1_rate")?,
            miscoverage_normal: parse_float(&rec[5], line, "miscoverage_normal")?,
            n_eval: parse_usize(&rec[6], line, "n_eval")?,
        });
    }
    Ok(out)
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<AlphaSummary>> {
    let mut it = rows(input);
    let cols = expect_header(&mut it, &SUMMARY_HEADER)?;
    let mut out = Vec::new();
    for row in it {
        let (line, rec) = row?;
        if rec.len() != cols.len() {
            return Err(Error::parse(Some(line), "wrong number of fields"));
        }
        out.push(AlphaSummary {
            alpha: rec[0].parse()?,
            ecr_mean: parse_float(&rec[1], line, "ecr_mean")?,
            ecr_sd: parse_float(&rec[2], line, "ecr_sd")?,
            apss_mean: parse_float(&rec[3], line, "apss_mean")?,
            apss_sd: parse_float(&rec[4], line, "apss_sd")?,
        });
    }
    Ok(out)
}

pub fn load_trials(path: impl AsRef<Path>) -> Result<Vec<TrialMetrics>> {
    read_trials(open(path.as_ref())?)
}

pub fn load_summary(path: impl AsRef<Path>) -> Result<Vec<AlphaSummary>> {
    read_summary(open(path.as_ref())?)
}

/// Persisted calibration: the label space and the sorted nonconformity scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub label_space: LabelSpace,
    pub calibration: CalibrationModel,
}

pub fn save_calibration(path: impl AsRef<Path>, artifact: &CalibrationArtifact) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, artifact)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<CalibrationArtifact> {
    let path = path.as_ref();
    serde_json::from_reader(open(path)?).map_err(|e| Error::parse(Some(e.line()), e.to_string()))
}
