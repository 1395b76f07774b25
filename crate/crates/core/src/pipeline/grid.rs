use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, FoldPlan, Mode, PipelineError};
use crate::evalbt::macro_f1;
use crate::{seed, Matrix};

/// Something that can be fitted on a training split and score a test split.
pub trait Learner: Sync {
    type Params: Clone + Serialize + Send + Sync;

    fn fit_predict(
        &self,
        params: &Self::Params,
        x_train: &Matrix,
        y_train: &[i8],
        x_test: &Matrix,
        seed: u64,
    ) -> Result<Vec<i8>, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult<P> {
    pub params: P,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    /// Reported only; never used for selection.
    pub mean_macro_f1: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBest<P> {
    pub index: usize,
    pub params: P,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult<P> {
    pub candidates: Vec<CandidateResult<P>>,
    pub best: GridBest<P>,
}

struct TaskOutcome {
    accuracy: f64,
    macro_f1: f64,
    failure: Option<String>,
}

/// Mean fold accuracy for every candidate; the best is the first maximiser in
/// grid order. A candidate that fails on a fold scores 0 there and the failure
/// is recorded.
pub fn grid_search<L: Learner>(
    learner: &L,
    grid: &[L::Params],
    data: &Dataset,
    plan: &FoldPlan,
    mode: Mode,
    seed: u64,
) -> Result<GridResult<L::Params>, PipelineError> {
    if grid.is_empty() {
        return Err(PipelineError::EmptyGrid);
    }
    let folds = data.plan_folds(plan, mode)?;
    let k = folds.len();
    let outcomes: Vec<TaskOutcome> = (0..grid.len() * k)
        .into_par_iter()
        .map(|task| {
            let (c, f) = (task / k, task % k);
            let fd = &folds[f];
            let task_seed = seed::derive(seed, &[c as u64, f as u64]);
            match learner.fit_predict(&grid[c], &fd.x_train, &fd.y_train, &fd.x_test, task_seed) {
                Ok(pred) if pred.len() == fd.y_test.len() => TaskOutcome {
                    accuracy: accuracy(&fd.y_test, &pred),
                    macro_f1: macro_f1(&fd.y_test, &pred),
                    failure: None,
                },
                Ok(pred) => TaskOutcome {
                    accuracy: 0.0,
                    macro_f1: 0.0,
                    failure: Some(format!(
                        "fold {f}: {} predictions for {} rows",
                        pred.len(),
                        fd.y_test.len()
                    )),
                },
                Err(msg) => {
                    log::warn!("candidate {c} failed on fold {f}: {msg}");
                    TaskOutcome { accuracy: 0.0, macro_f1: 0.0, failure: Some(format!("fold {f}: {msg}")) }
                }
            }
        })
        .collect();

    let candidates: Vec<CandidateResult<L::Params>> = grid
        .iter()
        .enumerate()
        .map(|(c, p)| {
            let rows = &outcomes[c * k..(c + 1) * k];
            CandidateResult {
                params: p.clone(),
                fold_accuracies: rows.iter().map(|o| o.accuracy).collect(),
                mean_accuracy: rows.iter().map(|o| o.accuracy).sum::<f64>() / k as f64,
                mean_macro_f1: rows.iter().map(|o| o.macro_f1).sum::<f64>() / k as f64,
                failures: rows.iter().filter_map(|o| o.failure.clone()).collect(),
            }
        })
        .collect();
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.mean_accuracy > candidates[best].mean_accuracy {
            best = i;
        }
    }
    Ok(GridResult {
        best: GridBest {
            index: best,
            params: candidates[best].params.clone(),
            mean_accuracy: candidates[best].mean_accuracy,
        },
        candidates,
    })
}

pub fn accuracy(y_true: &[i8], y_pred: &[i8]) -> f64 {
    if y_true.is_empty() {
        return 0.0;
    }
    y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count() as f64 / y_true.len() as f64
}
