//! Tabular evaluation reports and their CSV serialization.
//!
//! Every evaluation emits rows of `(estimator, snr_db, metric, value, count)`.
//! Rows are sorted by `(metric, estimator, snr_db)` before serialization so a
//! report's bytes depend only on its contents, never on evaluation order.

use std::fmt::Write as _;

use crate::{Error, Result};

/// One measurement: `count` is the number of items (samples or blocks) the
/// value was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub estimator: String,
    pub snr_db: f64,
    pub metric: String,
    pub value: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

pub const CSV_HEADER: &str = "estimator,snr_db,metric,value,count";

impl EvalReport {
    pub fn new(rows: Vec<ReportRow>) -> Self {
        EvalReport { rows }
    }

    /// Canonical order: metric, then estimator, then SNR ascending.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (a.metric.as_str(), a.estimator.as_str())
                .cmp(&(b.metric.as_str(), b.estimator.as_str()))
                .then(a.snr_db.total_cmp(&b.snr_db))
        });
    }

    /// Rows for one `(estimator, metric)` pair in SNR order.
    pub fn series(&self, estimator: &str, metric: &str) -> Vec<&ReportRow> {
        let mut rows: Vec<&ReportRow> = self
            .rows
            .iter()
            .filter(|r| r.estimator == estimator && r.metric == metric)
            .collect();
        rows.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        rows
    }

    /// The value at one exact `(estimator, metric, snr)` coordinate.
    pub fn value_at(&self, estimator: &str, metric: &str, snr_db: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.metric == metric && r.snr_db == snr_db)
            .map(|r| r.value)
    }

    /// Serializes to CSV with a fixed header. Floats use Rust's shortest
    /// round-trip formatting, so output is byte-stable.
    pub fn to_csv(&self) -> String {
        let mut sorted = self.clone();
        sorted.sort();
        let mut out = String::with_capacity(64 + 32 * sorted.rows.len());
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &sorted.rows {
            writeln!(out, "{},{},{},{},{}", r.estimator, r.snr_db, r.metric, r.value, r.count)
                .expect("string write");
        }
        out
    }

    /// Parses the exact format [`EvalReport::to_csv`] writes.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            other => {
                return Err(Error::data(format!(
                    "bad report header: expected {CSV_HEADER:?}, got {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::data(format!("report line {}: expected 5 fields", i + 2)));
            }
            let bad = |what: &str| Error::data(format!("report line {}: bad {what}", i + 2));
            rows.push(ReportRow {
                estimator: fields[0].to_string(),
                snr_db: fields[1].parse().map_err(|_| bad("snr_db"))?,
                metric: fields[2].to_string(),
                value: fields[3].parse().map_err(|_| bad("value"))?,
                count: fields[4].parse().map_err(|_| bad("count"))?,
            });
        }
        Ok(EvalReport { rows })
    }
}
