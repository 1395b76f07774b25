use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Expanding-window folds in chronological order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub n_splits: usize,
}

/// `k` expanding-window folds over `n` rows.
///
/// Every test block has `n / (k + 1)` rows; fold `i` trains on everything
/// before its test block, so leftover rows land in the first training set.
pub fn time_series_split(n: usize, k: usize) -> Result<FoldPlan, PipelineError> {
    if k < 2 {
        return Err(PipelineError::InvalidSplits(k));
    }
    let need = 2 * (k + 1);
    if n < need {
        return Err(PipelineError::TooFewSamples { n, k, need });
    }
    let test_size = n / (k + 1);
    let folds = (1..=k)
        .map(|i| {
            let train_end = n - (k - i + 1) * test_size;
            Fold {
                train: (0..train_end).collect(),
                test: (train_end..train_end + test_size).collect(),
            }
        })
        .collect();
    Ok(FoldPlan { folds, n_splits: k })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let plan = time_series_split(6, 2).unwrap();
        assert_eq!(plan.folds[0], Fold { train: vec![0, 1], test: vec![2, 3] });
        assert_eq!(plan.folds[1], Fold { train: vec![0, 1, 2, 3], test: vec![4, 5] });
    }

    #[test]
    fn five_splits_of_twelve() {
        let plan = time_series_split(12, 5).unwrap();
        assert!(plan.folds.iter().all(|f| f.test.len() == 2));
        assert_eq!(plan.folds[0].train.len(), 2);
        assert_eq!(plan.folds[4].train.len(), 10);
    }

    #[test]
    fn leftover_rows_go_to_first_train() {
        let plan = time_series_split(13, 5).unwrap();
        assert_eq!(plan.folds[0].train.len(), 3);
        assert_eq!(plan.folds[4].test, vec![11, 12]);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(matches!(time_series_split(11, 5), Err(PipelineError::TooFewSamples { .. })));
        assert!(matches!(time_series_split(100, 1), Err(PipelineError::InvalidSplits(1))));
    }
}
