use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::knn::KnnModel;
use super::linear::{fit_logistic, fit_online, fit_ridge, LinearModel, OnlineConfig, OnlineLoss, Penalty};
use super::nb::GaussianNbModel;
use super::params::{Family, ModelSpec, ParamSet, ParamValue};
use super::smo::{decision_unchecked, smo_solve, SmoOptions, SvmModel};
use super::tree::{fit_boosting, fit_decision_tree, fit_forest, BoostModel, ForestModel, Tree, TreeParams};
use super::{argmax, ClassicError};
use crate::pipeline::Learner;
use crate::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelState {
    /// One binary SVM per class, class vs rest.
    Svm { heads: Vec<SvmModel> },
    Linear(LinearModel),
    Knn(KnnModel),
    GaussianNb(GaussianNbModel),
    Tree { tree: Tree, d: usize },
    Forest(ForestModel),
    Boost(BoostModel),
}

/// A fitted classifier. Internally classes are indices into `classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub classes: Vec<i8>,
    pub state: ModelState,
    /// False when an iterative solver stopped at its iteration cap.
    pub converged: bool,
}

fn online_config(spec: &ModelSpec, loss: OnlineLoss) -> Result<OnlineConfig, ClassicError> {
    let penalty = match spec.value_of("penalty") {
        ParamValue::Null => Penalty::None,
        ParamValue::Str(s) => Penalty::parse(Some(&s))?,
        ParamValue::Num(_) => Penalty::parse(Some("?"))?,
    };
    let alpha = match loss {
        OnlineLoss::PassiveAggressive { .. } => 0.0,
        _ => spec.f64("alpha")?,
    };
    Ok(OnlineConfig {
        loss,
        alpha,
        penalty: if matches!(loss, OnlineLoss::PassiveAggressive { .. }) { Penalty::None } else { penalty },
        max_iter: spec.usize("max_iter")?,
        tol: 1e-3,
        n_iter_no_change: 5,
    })
}

fn svm_kernel(spec: &ModelSpec, x: &Matrix) -> Result<Kernel, ClassicError> {
    let d = x.ncols().max(1) as f64;
    let gamma = match spec.value_of("gamma") {
        ParamValue::Num(g) => g,
        ParamValue::Str(s) if s == "auto" => 1.0 / d,
        _ => {
            let v = crate::matrix::variance(x.as_slice());
            if v > 0.0 { 1.0 / (d * v) } else { 1.0 }
        }
    };
    match spec.string("kernel").as_deref() {
        Some("linear") => Ok(Kernel::Linear),
        Some("poly") => Ok(Kernel::Poly { degree: spec.usize("degree")? as u32 }),
        _ => Ok(Kernel::Rbf { gamma }),
    }
}

/// Fits one model. `seed` drives every random choice (bootstrap, shuffles).
pub fn fit_classic(spec: &ModelSpec, x: &Matrix, y: &[i8], seed: u64) -> Result<TrainedModel, ClassicError> {
    spec.validate()?;
    let n = x.nrows();
    if y.len() != n {
        return Err(ClassicError::LabelMismatch { labels: y.len(), rows: n });
    }
    if n < 2 {
        return Err(ClassicError::TooFewSamples { need: 2, got: n });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(ClassicError::NonFinite);
    }
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ClassicError::SingleClassInput);
    }
    let k = classes.len();
    let yi: Vec<usize> = y.iter().map(|v| classes.binary_search(v).unwrap()).collect();
    let mut converged = true;
    let state = match spec.family {
        Family::Svm => {
            let kernel = svm_kernel(spec, x)?;
            let opts = SmoOptions {
                tol: spec.f64("tol")?,
                max_passes: spec.usize("max_passes")?,
                trace: false,
            };
            let c = spec.f64("C")?;
            let mut heads = Vec::with_capacity(k);
            for class in 0..k {
                let yb: Vec<f64> = yi.iter().map(|&v| if v == class { 1.0 } else { -1.0 }).collect();
                let head = smo_solve(x, &yb, c, kernel, &opts)?;
                converged &= head.converged;
                heads.push(head);
            }
            ModelState::Svm { heads }
        }
        Family::Logistic => ModelState::Linear(fit_logistic(x, &yi, k, spec.f64("C")?)),
        Family::Knn => ModelState::Knn(KnnModel::fit(
            x,
            &yi,
            k,
            spec.usize("n_neighbors")?,
            spec.string("weights").as_deref() == Some("distance"),
        )),
        Family::GaussianNb => ModelState::GaussianNb(GaussianNbModel::fit(x, &yi, k)),
        Family::DecisionTree => {
            let params = TreeParams {
                max_depth: spec.opt_usize("max_depth")?,
                min_samples_split: spec.usize("min_samples_split")?,
                max_features: None,
            };
            ModelState::Tree { tree: fit_decision_tree(x, &yi, k, &params), d: x.ncols() }
        }
        Family::RandomForest => ModelState::Forest(fit_forest(
            x,
            &yi,
            k,
            spec.usize("n_estimators")?,
            spec.opt_usize("max_depth")?,
            spec.usize("min_samples_split")?,
            seed,
        )),
        Family::GradientBoosting => ModelState::Boost(fit_boosting(
            x,
            &yi,
            k,
            spec.usize("n_estimators")?,
            spec.f64("learning_rate")?,
            spec.usize("max_depth")?,
        )),
        Family::SgdLinear => {
            ModelState::Linear(fit_online(x, &yi, k, &online_config(spec, OnlineLoss::Hinge)?, seed))
        }
        Family::Perceptron => {
            ModelState::Linear(fit_online(x, &yi, k, &online_config(spec, OnlineLoss::Perceptron)?, seed))
        }
        Family::PassiveAggressive => {
            let c = spec.f64("C")?;
            ModelState::Linear(fit_online(
                x,
                &yi,
                k,
                &online_config(spec, OnlineLoss::PassiveAggressive { c })?,
                seed,
            ))
        }
        Family::Ridge => ModelState::Linear(fit_ridge(x, &yi, k, spec.f64("alpha")?)?),
    };
    Ok(TrainedModel { format_version: MODEL_FORMAT_VERSION, spec: spec.clone(), classes, state, converged })
}

impl TrainedModel {
    /// Expected feature count.
    pub fn n_features(&self) -> usize {
        match &self.state {
            ModelState::Svm { heads } => heads
                .iter()
                .map(|h| h.support_vectors.ncols())
                .find(|&c| c > 0)
                .unwrap_or(0),
            ModelState::Linear(m) => m.d,
            ModelState::Knn(m) => m.x.ncols(),
            ModelState::GaussianNb(m) => m.d,
            ModelState::Tree { d, .. } => *d,
            ModelState::Forest(m) => m.d,
            ModelState::Boost(m) => m.d,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<i8>, ClassicError> {
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        let d = self.n_features();
        if d > 0 && x.ncols() != d {
            return Err(ClassicError::DimensionMismatch { expected: d, got: x.ncols() });
        }
        let idx = match &self.state {
            ModelState::Svm { heads } => x
                .rows_iter()
                .map(|r| {
                    let scores: Vec<f64> = heads.iter().map(|h| decision_unchecked(h, r)).collect();
                    argmax(&scores)
                })
                .collect(),
            ModelState::Linear(m) => m.predict(x)?,
            ModelState::Knn(m) => m.predict(x)?,
            ModelState::GaussianNb(m) => m.predict(x)?,
            ModelState::Tree { tree, .. } => x.rows_iter().map(|r| tree.predict_value(r) as usize).collect(),
            ModelState::Forest(m) => m.predict(x)?,
            ModelState::Boost(m) => m.predict(x)?,
        };
        Ok(idx.into_iter().map(|i: usize| self.classes[i]).collect())
    }

    pub fn to_json(&self) -> Result<String, ClassicError> {
        serde_json::to_string(self).map_err(|e| ClassicError::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<TrainedModel, ClassicError> {
        let m: TrainedModel = serde_json::from_str(s).map_err(|e| ClassicError::Format(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassicError::Format(format!("unsupported format version {}", m.format_version)));
        }
        Ok(m)
    }
}

/// Grid-search adapter for one family. Unconverged fits count as failures.
#[derive(Debug, Clone, Copy)]
pub struct ClassicLearner {
    pub family: Family,
}

impl Learner for ClassicLearner {
    type Params = ParamSet;

    fn fit_predict(
        &self,
        params: &ParamSet,
        x_train: &Matrix,
        y_train: &[i8],
        x_test: &Matrix,
        seed: u64,
    ) -> Result<Vec<i8>, String> {
        let spec = ModelSpec::new(self.family, params.clone());
        let model = fit_classic(&spec, x_train, y_train, seed).map_err(|e| e.to_string())?;
        if !model.converged {
            return Err("solver did not converge".into());
        }
        model.predict(x_test).map_err(|e| e.to_string())
    }
}
