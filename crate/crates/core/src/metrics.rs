//! Binary classification metrics with sarcasm as the positive class, and
//! per-round reports over inference result files.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Real;
use crate::types::{DcrRecord, Label, Prediction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{preds} predictions for {golds} labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: record has no gold label")]
    MissingGold { line: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Adds one (prediction, gold) pair. An invalid prediction is an error
    /// against the gold class: a missed positive or a false alarm.
    pub fn add(&mut self, pred: &Prediction, gold: Label) {
        match (pred.label(), gold) {
            (Some(Label::Sarcastic), Label::Sarcastic) => self.tp += 1,
            (Some(Label::Sarcastic), Label::NotSarcastic) => self.fp += 1,
            (Some(Label::NotSarcastic), Label::Sarcastic) | (None, Label::Sarcastic) => self.fn_ += 1,
            (Some(Label::NotSarcastic), Label::NotSarcastic) => self.tn += 1,
            (None, Label::NotSarcastic) => self.fp += 1,
        }
    }

    /// Metrics as percentages rounded half-up to one decimal, computed from
    /// the integer counts without floating-point rounding.
    pub fn percentages(&self) -> Percentages {
        Percentages {
            p: pct(self.tp, self.tp + self.fp),
            r: pct(self.tp, self.tp + self.fn_),
            f1: pct(2 * self.tp, 2 * self.tp + self.fp + self.fn_),
            acc: pct(self.tp + self.tn, self.total()),
        }
    }
}

pub fn confusion(preds: &[Prediction], golds: &[Label]) -> Result<Confusion, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch { preds: preds.len(), golds: golds.len() });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut c = Confusion::default();
    for (p, &g) in preds.iter().zip(golds) {
        c.add(p, g);
    }
    Ok(c)
}

/// Fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores<T = f64> {
    pub p: T,
    pub r: T,
    pub f1: T,
    pub acc: T,
}

fn ratio<T: Real>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::lit(num as f64) / T::lit(den as f64)
    }
}

/// Precision, recall, F1 and accuracy; a zero denominator yields 0.
pub fn prf1<T: Real>(c: &Confusion) -> Scores<T> {
    let p = ratio::<T>(c.tp, c.tp + c.fp);
    let r = ratio::<T>(c.tp, c.tp + c.fn_);
    let f1 = if p + r > T::zero() { (p + p) * r / (p + r) } else { T::zero() };
    Scores { p, r, f1, acc: ratio(c.tp + c.tn, c.total()) }
}

/// Percentages with one decimal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Percentages {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub acc: f64,
}

/// `100 * num / den` rounded half-up to one decimal, in exact integer
/// arithmetic. Zero denominators give 0.
pub fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let (num, den) = (u128::from(num), u128::from(den));
    let tenths = (2000 * num + den) / (2 * den);
    tenths as f64 / 10.0
}

/// Half-up rounding of a percentage to one decimal.
pub fn round_half_up_1(x: f64) -> f64 {
    (x * 10.0 + 0.5).floor() / 10.0
}

/// Which predictions of each record to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundSelector {
    Draft,
    /// After `r` revisions (`r = 0` is the draft).
    Round(usize),
    Final,
    /// Draft plus every revision round present in the file.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: String,
    pub f1: f64,
    pub acc: f64,
    pub p: f64,
    pub r: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ReportRow {
    pub fn new(name: impl Into<String>, c: &Confusion) -> Self {
        let pc = c.percentages();
        Self { name: name.into(), f1: pc.f1, acc: pc.acc, p: pc.p, r: pc.r, tp: c.tp, fp: c.fp, fn_: c.fn_, tn: c.tn }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(5);
        let mut out = format!(
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}\n",
            "round", "F1", "Acc", "P", "R", "tp", "fp", "fn", "tn"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6.1}  {:>6.1}  {:>6.1}  {:>6.1}  {:>6}  {:>6}  {:>6}  {:>6}",
                r.name, r.f1, r.acc, r.p, r.r, r.tp, r.fp, r.fn_, r.tn
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn round_name(r: usize) -> String {
    if r == 0 {
        "Draft".to_string()
    } else {
        format!("Revise {r}")
    }
}

/// Parses a JSONL file of [`DcrRecord`]s (blank lines ignored).
pub fn parse_results(contents: &str) -> Result<Vec<(usize, DcrRecord)>, MetricsError> {
    contents
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<DcrRecord>(l)
                .map(|r| (i + 1, r))
                .map_err(|e| MetricsError::Parse { line: i + 1, message: e.to_string() })
        })
        .collect()
}

/// Per-round metrics over a results file's contents.
pub fn evaluate_run(contents: &str, selector: RoundSelector) -> Result<Report, MetricsError> {
    let records = parse_results(contents)?;
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let golds: Vec<Label> = records
        .iter()
        .map(|(line, r)| r.gold.ok_or(MetricsError::MissingGold { line: *line }))
        .collect::<Result<_, _>>()?;

    let score = |name: String, pick: &dyn Fn(&DcrRecord) -> &Prediction| {
        let mut c = Confusion::default();
        for ((_, rec), &g) in records.iter().zip(&golds) {
            c.add(pick(rec), g);
        }
        ReportRow::new(name, &c)
    };

    let rows = match selector {
        RoundSelector::Draft => vec![score(round_name(0), &|r| r.draft.prediction())],
        RoundSelector::Round(k) => vec![score(round_name(k), &|r| r.prediction_at(k))],
        RoundSelector::Final => vec![score("Final".into(), &|r| &r.final_prediction)],
        RoundSelector::All => {
            let max = records.iter().map(|(_, r)| r.rounds.len()).max().unwrap_or(0);
            (0..=max).map(|k| score(round_name(k), &move |r: &DcrRecord| r.prediction_at(k))).collect()
        }
    };
    Ok(Report { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{NotSarcastic as No, Sarcastic as Yes};

    fn p(l: Label) -> Prediction {
        Prediction::of(l)
    }

    #[test]
    fn counts() {
        let preds = [p(Yes), p(Yes), p(No), p(Yes), p(No)];
        let golds = [Yes, No, Yes, Yes, No];
        assert_eq!(confusion(&preds, &golds).unwrap(), Confusion { tp: 2, fp: 1, fn_: 1, tn: 1 });
    }

    #[test]
    fn invalid_counts_against() {
        let c = confusion(&[Prediction::invalid("?"), Prediction::invalid("?")], &[Yes, No]).unwrap();
        assert_eq!(c, Confusion { tp: 0, fp: 1, fn_: 1, tn: 0 });
    }

    #[test]
    fn errors() {
        assert_eq!(confusion(&[], &[]), Err(MetricsError::Empty));
        assert!(matches!(confusion(&[p(Yes)], &[]), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn small_prf1() {
        let s = prf1::<f64>(&Confusion { tp: 2, fp: 1, fn_: 1, tn: 1 });
        assert!((s.p - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.acc - 0.6).abs() < 1e-15);
    }

    #[test]
    fn no_positive_predictions() {
        let s = prf1::<f32>(&Confusion { tp: 0, fp: 0, fn_: 3, tn: 2 });
        assert_eq!((s.p, s.r, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn half_up() {
        assert_eq!(pct(1, 8), 12.5);
        assert_eq!(pct(1, 16), 6.3); // 6.25 rounds up
        assert_eq!(pct(1, 3), 33.3);
        assert_eq!(pct(2, 3), 66.7);
        assert_eq!(pct(0, 0), 0.0);
        assert_eq!(round_half_up_1(83.14), 83.1);
    }

    #[test]
    fn parse_error_has_line() {
        let err = evaluate_run("\n{not json}\n", RoundSelector::Draft).unwrap_err();
        assert!(matches!(err, MetricsError::Parse { line: 2, .. }));
    }
}
