//! CSV tables: per-run metric rows and paired subjective scores.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use onwheel_core::metrics::{MetricName, MetricRow};
use onwheel_core::runlog::Condition;
use onwheel_core::stats::PairedScores;
use thiserror::Error;

pub const METRIC_COLUMNS: [&str; 6] = ["subject", "condition", "road", "metric", "value", "unit"];
pub const SCORE_COLUMNS: [&str; 4] = ["name", "subject", "a", "b"];

#[derive(Debug, Error)]
pub enum TableError {
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("expected columns {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn write_metrics<W: Write>(rows: &[MetricRow], out: W) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRIC_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.subject.to_string(),
            r.condition.to_string(),
            r.road.to_string(),
            r.metric.to_string(),
            r.value.to_string(),
            r.metric.unit().symbol().to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn check_header<R: Read>(r: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), TableError> {
    let found = r.headers()?.clone();
    if found.iter().ne(expected.iter().copied()) {
        return Err(TableError::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, row: usize) -> Result<T, TableError> {
    let s = rec.get(i).unwrap_or_default();
    s.parse().map_err(|_| TableError::Row { row, msg: format!("column `{}`: cannot parse `{s}`", rec_name(i)) })
}

fn rec_name(i: usize) -> &'static str {
    METRIC_COLUMNS.get(i).copied().unwrap_or("?")
}

/// Row numbers count the header as row 1.
pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricRow>, TableError> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &METRIC_COLUMNS)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let condition: Condition = rec[1].parse().map_err(|e| TableError::Row { row, msg: format!("{e}") })?;
        let metric: MetricName =
            rec[3].parse().map_err(|_| TableError::Row { row, msg: format!("unknown metric `{}`", &rec[3]) })?;
        if &rec[5] != metric.unit().symbol() {
            return Err(TableError::Row {
                row,
                msg: format!("unit `{}` does not match {metric} ({})", &rec[5], metric.unit().symbol()),
            });
        }
        rows.push(MetricRow {
            subject: field(&rec, 0, row)?,
            condition,
            road: field(&rec, 2, row)?,
            metric,
            value: field(&rec, 4, row)?,
        });
    }
    Ok(rows)
}

/// Paired ratings in long form, one row per subject and item; items keep
/// their first-appearance order.
pub fn read_scores<R: Read>(input: R) -> Result<Vec<PairedScores>, TableError> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &SCORE_COLUMNS)?;
    let mut order: Vec<String> = Vec::new();
    let mut items: BTreeMap<String, BTreeMap<u32, (f64, f64)>> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let name = rec[0].to_string();
        let subject: u32 =
            rec[1].parse().map_err(|_| TableError::Row { row, msg: format!("bad subject `{}`", &rec[1]) })?;
        let score = |j: usize| -> Result<f64, TableError> {
            rec[j]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| TableError::Row { row, msg: format!("bad score `{}`", &rec[j]) })
        };
        let pair = (score(2)?, score(3)?);
        if !items.contains_key(&name) {
            order.push(name.clone());
        }
        if items.entry(name.clone()).or_default().insert(subject, pair).is_some() {
            return Err(TableError::Row { row, msg: format!("subject {subject} rated `{name}` twice") });
        }
    }
    Ok(order
        .into_iter()
        .map(|name| {
            let pairs = items[&name].values().copied().collect();
            PairedScores { name, pairs }
        })
        .collect())
}
