use std::collections::HashSet;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use serde::Serialize;

use super::{EvalError, GroundTruth};
use crate::attributes::{AttributeKey, AttributeSet};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MetricCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Add for MetricCounts {
    type Output = MetricCounts;

    fn add(self, o: MetricCounts) -> MetricCounts {
        MetricCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for MetricCounts {
    fn add_assign(&mut self, o: MetricCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for MetricCounts {
    fn sum<I: Iterator<Item = MetricCounts>>(iter: I) -> Self {
        iter.fold(MetricCounts::default(), Add::add)
    }
}

/// Value-level counts for one key. Both sides must already be canonicalized.
pub fn compare_key(pred: &AttributeSet, gt: &AttributeSet, key: AttributeKey) -> MetricCounts {
    let p: HashSet<&str> = pred.values(key).iter().map(String::as_str).collect();
    let g: HashSet<&str> = gt.values(key).iter().map(String::as_str).collect();
    let mut c = MetricCounts::default();
    if g.is_empty() {
        if p.is_empty() {
            c.tn = 1;
        } else {
            c.fp = p.len() as u64;
        }
    } else {
        c.tp = p.intersection(&g).count() as u64;
        c.fp = p.difference(&g).count() as u64;
        c.fn_ = g.difference(&p).count() as u64;
    }
    c
}

pub fn compare_page(pred: &AttributeSet, gt: &AttributeSet) -> MetricCounts {
    AttributeKey::ALL.iter().map(|&k| compare_key(pred, gt, k)).sum()
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn precision(c: &MetricCounts) -> Option<f64> {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: &MetricCounts) -> Option<f64> {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn accuracy(c: &MetricCounts) -> Option<f64> {
    ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn_)
}

/// Harmonic mean of precision and recall; undefined unless both are defined
/// and their sum is positive.
pub fn f1(c: &MetricCounts) -> Option<f64> {
    f1_from(precision(c)?, recall(c)?)
}

/// F1 from precision and recall given directly.
pub fn f1_from(p: f64, r: f64) -> Option<f64> {
    (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
}

/// A [0, 1] ratio as a percentage rounded half-up to one decimal, or "n/a".
pub fn format_percent(v: Option<f64>) -> String {
    match v {
        // The epsilon keeps values like 0.9685 (stored as 0.96849999..) on
        // the side their decimal spelling implies.
        Some(x) => format!("{:.1}", ((x * 1000.0) + 0.5 + 1e-9).floor() / 10.0),
        None => "n/a".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub counts: MetricCounts,
    /// Canonical key order.
    pub per_attribute: Vec<(AttributeKey, Option<f64>)>,
}

fn missing(preds: &[AttributeSet], gt: &GroundTruth) -> Result<(), EvalError> {
    let mut absent: Vec<usize> = preds
        .iter()
        .map(|p| p.page_index)
        .filter(|i| gt.page(*i).is_none())
        .collect();
    if absent.is_empty() {
        return Ok(());
    }
    absent.sort_unstable();
    absent.dedup();
    Err(EvalError::MissingPages(absent))
}

pub fn per_attribute_accuracy(
    preds: &[AttributeSet],
    gt: &GroundTruth,
) -> Result<Vec<(AttributeKey, Option<f64>)>, EvalError> {
    missing(preds, gt)?;
    Ok(AttributeKey::ALL
        .iter()
        .map(|&k| {
            let c: MetricCounts = preds
                .iter()
                .map(|p| compare_key(p, gt.page(p.page_index).expect("checked"), k))
                .sum();
            (k, accuracy(&c))
        })
        .collect())
}

/// Scores page-level predictions (one set per page) against `gt`.
pub fn evaluate(preds: &[AttributeSet], gt: &GroundTruth) -> Result<MetricsReport, EvalError> {
    let per_attribute = per_attribute_accuracy(preds, gt)?;
    let counts: MetricCounts = preds
        .iter()
        .map(|p| compare_page(p, gt.page(p.page_index).expect("checked")))
        .sum();
    Ok(MetricsReport {
        precision: precision(&counts),
        recall: recall(&counts),
        accuracy: accuracy(&counts),
        f1: f1(&counts),
        counts,
        per_attribute,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetRow {
    pub name: String,
    pub text_f1: Option<f64>,
    pub image_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetTable {
    pub rows: Vec<DatasetRow>,
    /// Macro averages over the rows where the value is defined.
    pub average: DatasetRow,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn aggregate_report(rows: Vec<DatasetRow>) -> Result<DatasetTable, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::NoDatasets);
    }
    let average = DatasetRow {
        name: "Average".into(),
        text_f1: mean(rows.iter().map(|r| r.text_f1)),
        image_f1: mean(rows.iter().map(|r| r.image_f1)),
    };
    Ok(DatasetTable { rows, average })
}

impl DatasetTable {
    pub fn render(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain([self.average.name.len(), "Dataset".len()])
            .max()
            .unwrap_or(7);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>11}  {:>12}", "Dataset", "F1 (text) %", "F1 (image) %");
        for r in self.rows.iter().chain([&self.average]) {
            let _ = writeln!(
                out,
                "{:<width$}  {:>11}  {:>12}",
                r.name,
                format_percent(r.text_f1),
                format_percent(r.image_f1)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::SetSource;
    use AttributeKey::*;

    fn set(page: usize, values: &[(AttributeKey, &[&str])]) -> AttributeSet {
        let mut s = AttributeSet::empty(SetSource::Merged, page);
        for (k, v) in values {
            s.set_values(*k, v.iter());
        }
        s
    }

    #[test]
    fn compare_examples() {
        let hit = compare_key(&set(0, &[(Neck, &["V-Neck"])]), &set(0, &[(Neck, &["V-Neck"])]), Neck);
        assert_eq!(hit, MetricCounts { tp: 1, ..Default::default() });
        let tn = compare_key(&set(0, &[]), &set(0, &[]), Neck);
        assert_eq!(tn, MetricCounts { tn: 1, ..Default::default() });
        let f = compare_key(
            &set(0, &[(Features, &["Cosy", "Soft Finish", "Boxy"])]),
            &set(0, &[(Features, &["Cosy", "Soft Finish"])]),
            Features,
        );
        assert_eq!(f, MetricCounts { tp: 2, fp: 1, fn_: 0, tn: 0 });
        let fp = compare_key(&set(0, &[(Age, &["Adult", "Teen"])]), &set(0, &[]), Age);
        assert_eq!(fp.fp, 2);
    }

    #[test]
    fn metric_formulas() {
        let c = MetricCounts { tp: 3, fp: 1, fn_: 1, tn: 0 };
        assert_eq!(precision(&c), Some(0.75));
        assert_eq!(recall(&c), Some(0.75));
        assert_eq!(accuracy(&c), Some(0.6));
        assert_eq!(f1(&c), Some(0.75));
    }

    #[test]
    fn undefined_metrics() {
        let c = MetricCounts { tn: 4, ..Default::default() };
        assert_eq!(precision(&c), None);
        assert_eq!(recall(&c), None);
        assert_eq!(f1(&c), None);
        assert_eq!(accuracy(&c), Some(1.0));
        let zero = MetricCounts { fp: 1, fn_: 1, ..Default::default() };
        assert_eq!(f1(&zero), None);
        assert_eq!(format_percent(None), "n/a");
    }

    #[test]
    fn percent_rounding_is_half_up() {
        assert_eq!(format_percent(Some(0.9685)), "96.9");
        assert_eq!(format_percent(Some(0.96849)), "96.8");
        assert_eq!(format_percent(Some(0.0)), "0.0");
        assert_eq!(format_percent(Some(1.0)), "100.0");
        assert_eq!(format_percent(Some(0.125)), "12.5");
        assert_eq!(format_percent(Some(0.0005)), "0.1");
    }

    #[test]
    fn per_attribute() {
        let gt = GroundTruth {
            pages: [(0, set(0, &[(Neck, &["V-Neck"]), (Color, &["Red"])]))].into(),
        };
        let perfect = per_attribute_accuracy(&[set(0, &[(Neck, &["V-Neck"]), (Color, &["Red"])])], &gt).unwrap();
        assert!(perfect.iter().all(|(_, a)| *a == Some(1.0)));
        let no_neck = per_attribute_accuracy(&[set(0, &[(Color, &["Red"])])], &gt).unwrap();
        for (k, a) in no_neck {
            assert_eq!(a, Some(if k == Neck { 0.0 } else { 1.0 }), "{k}");
        }
        assert!(matches!(
            per_attribute_accuracy(&[set(5, &[])], &gt),
            Err(EvalError::MissingPages(p)) if p == [5]
        ));
    }

    #[test]
    fn aggregate() {
        let one = aggregate_report(vec![DatasetRow {
            name: "a".into(),
            text_f1: Some(0.9),
            image_f1: None,
        }])
        .unwrap();
        assert_eq!(one.average.text_f1, Some(0.9));
        assert_eq!(one.average.image_f1, None);
        let two = aggregate_report(vec![
            DatasetRow {
                name: "a".into(),
                text_f1: Some(0.9),
                image_f1: Some(1.0),
            },
            DatasetRow {
                name: "b".into(),
                text_f1: Some(1.0),
                image_f1: Some(0.5),
            },
        ])
        .unwrap();
        assert!((two.average.text_f1.unwrap() - 0.95).abs() < 1e-12);
        assert!(two.render().contains("Average"));
        assert!(matches!(aggregate_report(vec![]), Err(EvalError::NoDatasets)));
    }
}
