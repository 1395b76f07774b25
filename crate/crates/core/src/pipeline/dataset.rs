use serde::{Deserialize, Serialize};

use super::{FoldPlan, Mode, PipelineError, Scaler};
use crate::dataio::{
    apply_thresholds, fit_garch11, garch_variance, label_by_quantiles, sma, Frame,
    LabelThresholds, SmaWarmup,
};
use crate::Matrix;

/// Which feature columns feed the models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Frame columns to use; empty means all of them.
    pub columns: Vec<String>,
    pub include_returns: bool,
    /// Trailing SMA windows computed on `sma_column`.
    pub sma_windows: Vec<usize>,
    pub sma_column: String,
    /// Adds a GARCH(1,1) conditional-variance column computed from returns.
    pub garch: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            columns: Vec::new(),
            include_returns: true,
            sma_windows: Vec::new(),
            sma_column: "close".into(),
            garch: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Frame labels when present, quantile labels otherwise.
    Auto,
    Frame,
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub source: LabelSource,
    pub q_low: f64,
    pub q_high: f64,
}

impl Default for LabelSpec {
    fn default() -> Self {
        Self { source: LabelSource::Auto, q_low: 0.33, q_high: 0.67 }
    }
}

/// Supervised rows built from a frame: features at `t`, the class of the
/// return realised over `(t, t + 1]`, and that return itself for backtesting.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    /// Unscaled features, one row per supervised time step.
    pub features: Matrix,
    pub timestamps: Vec<i64>,
    pub next_returns: Vec<f64>,
    pub labels: Vec<i8>,
    /// True when labels come from quantiles and may be re-derived per fold.
    pub quantile_labels: bool,
    pub q_low: f64,
    pub q_high: f64,
    pub thresholds: Option<LabelThresholds>,
}

/// Scaled train/test matrices and labels for one fold.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub x_train: Matrix,
    pub y_train: Vec<i8>,
    pub x_test: Matrix,
    pub y_test: Vec<i8>,
}

impl Dataset {
    pub fn from_frame(
        frame: &Frame,
        features: &FeatureSpec,
        labels: &LabelSpec,
        mode: Mode,
        n_splits: usize,
    ) -> Result<Dataset, PipelineError> {
        let n = frame.len();
        let mut names: Vec<String> = if features.columns.is_empty() {
            frame.column_names().into_iter().map(str::to_string).collect()
        } else {
            features.columns.clone()
        };
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for name in &names {
            let c = frame
                .column(name)
                .ok_or_else(|| crate::dataio::DataError::MissingColumn(name.clone()))?;
            cols.push(c.to_vec());
        }
        if features.include_returns {
            names.push("returns".into());
            cols.push(frame.returns().to_vec());
        }

        let warmup = match mode {
            Mode::PaperFaithful => SmaWarmup::FillGlobalMean,
            Mode::LeakFree => SmaWarmup::Drop,
        };
        let mut skip = 0usize;
        if !features.sma_windows.is_empty() {
            let src = frame
                .column(&features.sma_column)
                .ok_or_else(|| crate::dataio::DataError::MissingColumn(features.sma_column.clone()))?;
            for &w in &features.sma_windows {
                let mut v = sma(src, w, warmup)?;
                if warmup == SmaWarmup::Drop {
                    let mut padded = vec![f64::NAN; w - 1];
                    padded.append(&mut v);
                    v = padded;
                    skip = skip.max(w - 1);
                }
                names.push(format!("sma_{w}"));
                cols.push(v);
            }
        }
        if features.garch {
            let returns = frame.returns();
            let fit_rows = match mode {
                Mode::PaperFaithful => n,
                // never reaches past the first fold's training span
                Mode::LeakFree => n / (n_splits + 1),
            };
            let params = fit_garch11(&returns[..fit_rows])?;
            names.push("garch_var".into());
            cols.push(garch_variance(returns, &params)?);
        }

        // the last row has no realised next return
        let rows: Vec<usize> = (skip..n - 1).collect();
        if rows.len() < 2 {
            return Err(crate::dataio::DataError::TooShort { need: skip + 3, got: n }.into());
        }
        let d = cols.len();
        let mut x = Matrix::zeros(rows.len(), d);
        for (i, &t) in rows.iter().enumerate() {
            for (j, c) in cols.iter().enumerate() {
                x.set(i, j, c[t]);
            }
        }
        let next_returns: Vec<f64> = rows.iter().map(|&t| frame.returns()[t + 1]).collect();
        let use_frame = match labels.source {
            LabelSource::Frame => true,
            LabelSource::Quantile => false,
            LabelSource::Auto => frame.labels().is_some(),
        };
        let (y, thresholds) = if use_frame {
            let fl = frame.labels().ok_or(PipelineError::Unlabeled)?;
            (rows.iter().map(|&t| fl[t]).collect(), None)
        } else {
            let (y, t) = label_by_quantiles(&next_returns, labels.q_low, labels.q_high)?;
            (y, Some(t))
        };
        Ok(Dataset {
            feature_names: names,
            features: x,
            timestamps: rows.iter().map(|&t| frame.timestamps()[t]).collect(),
            next_returns,
            labels: y,
            quantile_labels: !use_frame,
            q_low: labels.q_low,
            q_high: labels.q_high,
            thresholds,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `len` rows with labels re-derived when they are quantile-based.
    pub fn head(&self, len: usize) -> Result<Dataset, PipelineError> {
        let len = len.min(self.len());
        let next_returns = self.next_returns[..len].to_vec();
        let (labels, thresholds) = if self.quantile_labels {
            let (y, t) = label_by_quantiles(&next_returns, self.q_low, self.q_high)?;
            (y, Some(t))
        } else {
            (self.labels[..len].to_vec(), None)
        };
        Ok(Dataset {
            feature_names: self.feature_names.clone(),
            features: self.features.row_range(0, len),
            timestamps: self.timestamps[..len].to_vec(),
            next_returns,
            labels,
            quantile_labels: self.quantile_labels,
            q_low: self.q_low,
            q_high: self.q_high,
            thresholds,
        })
    }

    /// Scaler fitted on every row, and the scaled feature matrix.
    pub fn scaled_all(&self) -> (Scaler, Matrix) {
        Scaler::fit_transform(&self.features)
    }

    /// Train/test data for one fold under `mode`.
    pub fn fold_data(
        &self,
        train: &[usize],
        test: &[usize],
        mode: Mode,
    ) -> Result<FoldData, PipelineError> {
        match mode {
            Mode::PaperFaithful => {
                let (_, xs) = self.scaled_all();
                Ok(FoldData {
                    x_train: xs.select_rows(train),
                    y_train: train.iter().map(|&i| self.labels[i]).collect(),
                    x_test: xs.select_rows(test),
                    y_test: test.iter().map(|&i| self.labels[i]).collect(),
                })
            }
            Mode::LeakFree => {
                let raw_train = self.features.select_rows(train);
                let scaler = Scaler::fit(&raw_train);
                let x_train = scaler.transform(&raw_train)?;
                let x_test = scaler.transform(&self.features.select_rows(test))?;
                let (y_train, y_test) = if self.quantile_labels {
                    let train_ret: Vec<f64> = train.iter().map(|&i| self.next_returns[i]).collect();
                    let (y_train, t) = label_by_quantiles(&train_ret, self.q_low, self.q_high)?;
                    let test_ret: Vec<f64> = test.iter().map(|&i| self.next_returns[i]).collect();
                    (y_train, apply_thresholds(&test_ret, &t))
                } else {
                    (
                        train.iter().map(|&i| self.labels[i]).collect(),
                        test.iter().map(|&i| self.labels[i]).collect(),
                    )
                };
                Ok(FoldData { x_train, y_train, x_test, y_test })
            }
        }
    }

    pub fn plan_folds(&self, plan: &FoldPlan, mode: Mode) -> Result<Vec<FoldData>, PipelineError> {
        plan.folds.iter().map(|f| self.fold_data(&f.train, &f.test, mode)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;

    fn frame(n: usize) -> Frame {
        let close: Vec<f64> = (0..n).map(|i| 100.0 + ((i * 7) % 11) as f64).collect();
        let returns = crate::dataio::compute_returns(&close, Default::default()).unwrap();
        let mut cols = IndexMap::new();
        cols.insert("close".to_string(), close);
        cols.insert("f".to_string(), (0..n).map(|i| (i as f64).sin()).collect());
        Frame::new((0..n as i64).collect(), cols, returns, None).unwrap()
    }

    #[test]
    fn drops_last_row_and_aligns_next_return() {
        let f = frame(20);
        let d = Dataset::from_frame(&f, &FeatureSpec::default(), &LabelSpec::default(), Mode::PaperFaithful, 5)
            .unwrap();
        assert_eq!(d.len(), 19);
        assert_eq!(d.next_returns[0], f.returns()[1]);
        assert_eq!(d.feature_names, vec!["close", "f", "returns"]);
        assert!(d.quantile_labels);
    }

    #[test]
    fn leak_free_drops_sma_warmup() {
        let f = frame(40);
        let spec = FeatureSpec { sma_windows: vec![3, 5], ..Default::default() };
        let faithful = Dataset::from_frame(&f, &spec, &LabelSpec::default(), Mode::PaperFaithful, 5).unwrap();
        let lf = Dataset::from_frame(&f, &spec, &LabelSpec::default(), Mode::LeakFree, 5).unwrap();
        assert_eq!(faithful.len(), 39);
        assert_eq!(lf.len(), 35);
        assert!(lf.features.as_slice().iter().all(|v| v.is_finite()));
        // defined SMA values agree between modes
        let j = lf.feature_names.iter().position(|n| n == "sma_5").unwrap();
        assert_eq!(lf.features.get(0, j), faithful.features.get(4, j));
    }

    #[test]
    fn frame_labels_required_when_requested() {
        let f = frame(10);
        let spec = LabelSpec { source: LabelSource::Frame, ..Default::default() };
        assert!(matches!(
            Dataset::from_frame(&f, &FeatureSpec::default(), &spec, Mode::LeakFree, 2),
            Err(PipelineError::Unlabeled)
        ));
    }

    #[test]
    fn leak_free_fold_uses_train_statistics_only() {
        let f = frame(30);
        let d = Dataset::from_frame(&f, &FeatureSpec::default(), &LabelSpec::default(), Mode::LeakFree, 2).unwrap();
        let train: Vec<usize> = (0..10).collect();
        let test: Vec<usize> = (10..20).collect();
        let fd = d.fold_data(&train, &test, Mode::LeakFree).unwrap();
        let s = Scaler::fit(&fd.x_train);
        assert!(s.means.iter().all(|m| m.abs() < 1e-12));
        // changing future rows leaves the training view unchanged
        let mut d2 = d.clone();
        for i in 20..d2.len() {
            d2.features.set(i, 0, 1e6);
            d2.next_returns[i] = 5.0;
        }
        let fd2 = d2.fold_data(&train, &test, Mode::LeakFree).unwrap();
        assert_eq!(fd.x_train, fd2.x_train);
        assert_eq!(fd.y_train, fd2.y_train);
        assert_eq!(fd.y_test, fd2.y_test);
    }
}
