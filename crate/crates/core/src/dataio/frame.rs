use chrono::{DateTime, SecondsFormat, Utc};
use indexmap::IndexMap;

use super::DataError;
use crate::Matrix;

/// Timestamped feature table with a returns series and optional labels.
///
/// Timestamps are epoch milliseconds (UTC). A frame is immutable once built;
/// every transformation returns a new frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    timestamps: Vec<i64>,
    columns: IndexMap<String, Vec<f64>>,
    returns: Vec<f64>,
    labels: Option<Vec<i8>>,
}

impl Frame {
    pub fn new(
        timestamps: Vec<i64>,
        columns: IndexMap<String, Vec<f64>>,
        returns: Vec<f64>,
        labels: Option<Vec<i8>>,
    ) -> Result<Self, DataError> {
        let n = timestamps.len();
        if n < 2 {
            return Err(DataError::TooShort { need: 2, got: n });
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[1] <= w[0]) {
            return Err(DataError::NonMonotonicTimestamps(format_timestamp(w[1])));
        }
        for (name, col) in &columns {
            if col.len() != n {
                return Err(DataError::LengthMismatch {
                    name: name.clone(),
                    expected: n,
                    got: col.len(),
                });
            }
        }
        if returns.len() != n {
            return Err(DataError::LengthMismatch {
                name: "returns".into(),
                expected: n,
                got: returns.len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(DataError::LengthMismatch {
                    name: "labels".into(),
                    expected: n,
                    got: l.len(),
                });
            }
            if let Some(&bad) = l.iter().find(|v| !(-1..=1).contains(*v)) {
                return Err(DataError::InvalidLabel(bad as i64));
            }
        }
        Ok(Self { timestamps, columns, returns, labels })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn columns(&self) -> &IndexMap<String, Vec<f64>> {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.keys().map(String::as_str).collect()
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn labels(&self) -> Option<&[i8]> {
        self.labels.as_deref()
    }

    pub fn with_labels(&self, labels: Option<Vec<i8>>) -> Result<Self, DataError> {
        Frame::new(self.timestamps.clone(), self.columns.clone(), self.returns.clone(), labels)
    }

    pub fn with_column(&self, name: &str, values: Vec<f64>) -> Result<Self, DataError> {
        let mut cols = self.columns.clone();
        cols.insert(name.to_string(), values);
        Frame::new(self.timestamps.clone(), cols, self.returns.clone(), self.labels.clone())
    }

    /// Same frame with columns rearranged into `order` (names must exist).
    pub fn reorder_columns(&self, order: &[&str]) -> Result<Self, DataError> {
        let mut cols = IndexMap::new();
        for &name in order {
            let v = self
                .columns
                .get(name)
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
            cols.insert(name.to_string(), v.clone());
        }
        Frame::new(self.timestamps.clone(), cols, self.returns.clone(), self.labels.clone())
    }

    /// Rows `[start, start + len)`; all series stay aligned.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self, DataError> {
        let n = self.len();
        if start.checked_add(len).map_or(true, |end| end > n) {
            return Err(DataError::OutOfRange { start, len, n });
        }
        let end = start + len;
        let columns = self
            .columns
            .iter()
            .map(|(k, v)| (k.clone(), v[start..end].to_vec()))
            .collect();
        Frame::new(
            self.timestamps[start..end].to_vec(),
            columns,
            self.returns[start..end].to_vec(),
            self.labels.as_ref().map(|l| l[start..end].to_vec()),
        )
    }

    /// Selected columns as a row-major matrix (all columns when `names` is empty).
    pub fn feature_matrix(&self, names: &[String]) -> Result<Matrix, DataError> {
        let cols: Vec<&Vec<f64>> = if names.is_empty() {
            self.columns.values().collect()
        } else {
            names
                .iter()
                .map(|n| self.columns.get(n).ok_or_else(|| DataError::MissingColumn(n.clone())))
                .collect::<Result<_, _>>()?
        };
        let n = self.len();
        let mut m = Matrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        Ok(m)
    }
}

pub(crate) fn format_timestamp(ms: i64) -> String {
    DateTime::<Utc>::from_timestamp_millis(ms)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Millis, true))
        .unwrap_or_else(|| ms.to_string())
}
