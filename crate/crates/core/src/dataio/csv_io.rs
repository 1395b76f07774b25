use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::frame::format_timestamp;
use super::{compute_returns, DataError, Frame, ReturnKind};

/// Maps CSV header names onto frame roles.
///
/// Every header not named here (and not in `drop`) becomes an extra feature
/// column when `extra` is empty; otherwise only the listed extras are kept.
/// `drop` defaults to `returns`, which is always recomputed from `close`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub timestamp: String,
    pub close: String,
    pub open: Option<String>,
    pub high: Option<String>,
    pub low: Option<String>,
    pub volume: Option<String>,
    pub extra: Vec<String>,
    pub target: Option<String>,
    pub drop: Vec<String>,
    pub returns: ReturnKind,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            timestamp: "date".into(),
            close: "close".into(),
            open: None,
            high: None,
            low: None,
            volume: None,
            extra: Vec::new(),
            target: None,
            drop: vec!["returns".into()],
            returns: ReturnKind::Simple,
        }
    }
}

const EPOCH_MS_THRESHOLD: f64 = 1e11;

fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        if !v.is_finite() {
            return None;
        }
        // magnitudes at or above 1e11 are milliseconds, below are seconds
        return Some(if v.abs() >= EPOCH_MS_THRESHOLD { v as i64 } else { (v * 1000.0) as i64 });
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp_millis());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp_millis());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp_millis())
}

fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headered CSV into a [`Frame`], sorting rows by timestamp.
pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Frame, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| DataError::Csv(e.to_string()))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };

    let ts_idx = find(&schema.timestamp)?;
    let mut numeric: Vec<(String, usize)> = vec![(schema.close.clone(), find(&schema.close)?)];
    for name in [&schema.open, &schema.high, &schema.low, &schema.volume].into_iter().flatten() {
        numeric.push((name.clone(), find(name)?));
    }
    let target_idx = match &schema.target {
        Some(t) => Some(find(t)?),
        None => None,
    };
    if schema.extra.is_empty() {
        for (i, h) in headers.iter().enumerate() {
            let taken = i == ts_idx
                || Some(i) == target_idx
                || numeric.iter().any(|(_, j)| *j == i)
                || schema.drop.contains(h);
            if !taken {
                numeric.push((h.clone(), i));
            }
        }
    } else {
        for name in &schema.extra {
            numeric.push((name.clone(), find(name)?));
        }
    }

    struct Row {
        ts: i64,
        values: Vec<f64>,
        label: Option<i8>,
    }
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row_no = r + 1;
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let ts = parse_timestamp(cell(ts_idx)).ok_or_else(|| DataError::UnparsableCell {
            row: row_no,
            col: schema.timestamp.clone(),
        })?;
        let mut values = Vec::with_capacity(numeric.len());
        for (name, i) in &numeric {
            values.push(parse_number(cell(*i)).ok_or_else(|| DataError::UnparsableCell {
                row: row_no,
                col: name.clone(),
            })?);
        }
        let label = match target_idx {
            Some(i) => {
                let col = schema.target.clone().unwrap_or_default();
                let v = parse_number(cell(i))
                    .filter(|v| v.fract() == 0.0)
                    .ok_or(DataError::UnparsableCell { row: row_no, col })?;
                if !(-1.0..=1.0).contains(&v) {
                    return Err(DataError::InvalidLabel(v as i64));
                }
                Some(v as i8)
            }
            None => None,
        };
        rows.push(Row { ts, values, label });
    }

    rows.sort_by_key(|r| r.ts);
    if let Some(w) = rows.windows(2).find(|w| w[0].ts == w[1].ts) {
        return Err(DataError::NonMonotonicTimestamps(format_timestamp(w[0].ts)));
    }

    let mut columns: IndexMap<String, Vec<f64>> = IndexMap::new();
    for (j, (name, _)) in numeric.iter().enumerate() {
        columns.insert(name.clone(), rows.iter().map(|r| r.values[j]).collect());
    }
    let returns = compute_returns(&columns[&schema.close], schema.returns)?;
    let labels = target_idx.map(|_| rows.iter().map(|r| r.label.unwrap_or(0)).collect());
    Frame::new(rows.iter().map(|r| r.ts).collect(), columns, returns, labels)
}

/// Writes a frame as CSV: `date`, every column, `returns`, and `target` when labeled.
pub fn write_csv<W: Write>(frame: &Frame, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| DataError::Csv(e.to_string());
    let mut header = vec!["date".to_string()];
    header.extend(frame.columns().keys().cloned());
    header.push("returns".into());
    if frame.labels().is_some() {
        header.push("target".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..frame.len() {
        let mut rec = vec![format_timestamp(frame.timestamps()[i])];
        rec.extend(frame.columns().values().map(|c| format!("{}", c[i])));
        rec.push(format!("{}", frame.returns()[i]));
        if let Some(l) = frame.labels() {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| DataError::Csv(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_formats() {
        assert_eq!(parse_timestamp("1970-01-01"), Some(0));
        assert_eq!(parse_timestamp("1970-01-01T00:00:01Z"), Some(1000));
        assert_eq!(parse_timestamp("1970-01-01 00:00:02"), Some(2000));
        // seconds below the millisecond threshold
        assert_eq!(parse_timestamp("1700000000"), Some(1_700_000_000_000));
        assert_eq!(parse_timestamp("1700000000000"), Some(1_700_000_000_000));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn blank_cells_are_errors() {
        assert_eq!(parse_number(""), None);
        assert_eq!(parse_number("1,5"), None);
        assert_eq!(parse_number("1.5"), Some(1.5));
    }
}
