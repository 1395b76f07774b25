use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::ClassicError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Svm,
    Logistic,
    Knn,
    GaussianNb,
    DecisionTree,
    RandomForest,
    GradientBoosting,
    SgdLinear,
    Ridge,
    Perceptron,
    PassiveAggressive,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Svm,
        Family::Logistic,
        Family::Knn,
        Family::GaussianNb,
        Family::DecisionTree,
        Family::RandomForest,
        Family::GradientBoosting,
        Family::SgdLinear,
        Family::Ridge,
        Family::Perceptron,
        Family::PassiveAggressive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Svm => "svm",
            Family::Logistic => "logistic",
            Family::Knn => "knn",
            Family::GaussianNb => "gaussian_nb",
            Family::DecisionTree => "decision_tree",
            Family::RandomForest => "random_forest",
            Family::GradientBoosting => "gradient_boosting",
            Family::SgdLinear => "sgd_linear",
            Family::Ridge => "ridge",
            Family::Perceptron => "perceptron",
            Family::PassiveAggressive => "passive_aggressive",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ClassicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| ClassicError::UnknownFamily(s.to_string()))
    }
}

/// One hyperparameter value. `Null` stands for "no limit" (e.g. `max_depth`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Null,
    Num(f64),
    Str(String),
}

impl ParamValue {
    /// Parses `none`/`null`, numbers, and falls back to strings.
    pub fn parse(s: &str) -> ParamValue {
        let t = s.trim();
        if t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("null") {
            return ParamValue::Null;
        }
        match t.parse::<f64>() {
            Ok(v) => ParamValue::Num(v),
            Err(_) => ParamValue::Str(t.to_string()),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Null => f.write_str("none"),
            ParamValue::Num(v) => write!(f, "{v}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

pub type ParamSet = IndexMap<String, ParamValue>;

/// A declared grid: keys in order with their candidate values.
pub type GridDecl = Vec<(String, Vec<ParamValue>)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub params: ParamSet,
}

fn num(v: &[f64]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Num(x)).collect()
}

fn strs(v: &[&str]) -> Vec<ParamValue> {
    v.iter().map(|s| ParamValue::Str(s.to_string())).collect()
}

fn depths() -> Vec<ParamValue> {
    vec![ParamValue::Null, ParamValue::Num(5.0), ParamValue::Num(10.0)]
}

/// The reference grids, in the order their keys were declared.
pub fn default_grid(family: Family) -> GridDecl {
    let g = |pairs: Vec<(&str, Vec<ParamValue>)>| -> GridDecl {
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    };
    let penalties = strs(&["l1", "l2", "elasticnet"]);
    match family {
        Family::Logistic => g(vec![
            ("C", num(&[0.01, 0.1, 1.0, 10.0, 100.0])),
            ("solver", strs(&["liblinear", "saga"])),
        ]),
        Family::Svm => g(vec![
            ("C", num(&[0.1, 1.0, 10.0])),
            ("kernel", strs(&["rbf", "linear"])),
            ("gamma", strs(&["scale", "auto"])),
            ("degree", num(&[2.0, 3.0, 4.0])),
        ]),
        Family::RandomForest => g(vec![
            ("n_estimators", num(&[50.0, 100.0, 200.0])),
            ("max_depth", depths()),
        ]),
        Family::Knn => g(vec![
            ("n_neighbors", num(&[3.0, 5.0, 7.0])),
            ("weights", strs(&["uniform", "distance"])),
        ]),
        Family::DecisionTree => g(vec![
            ("max_depth", depths()),
            ("min_samples_split", num(&[2.0, 5.0, 10.0])),
        ]),
        Family::GaussianNb => Vec::new(),
        Family::GradientBoosting => g(vec![
            ("n_estimators", num(&[50.0, 100.0, 200.0])),
            ("learning_rate", num(&[0.01, 0.1, 1.0])),
        ]),
        Family::SgdLinear => g(vec![("alpha", num(&[1e-4, 1e-3, 1e-2])), ("penalty", penalties)]),
        Family::Ridge => g(vec![("alpha", num(&[0.1, 1.0, 10.0]))]),
        Family::Perceptron => g(vec![("alpha", num(&[1e-4, 1e-3, 1e-2])), ("penalty", penalties)]),
        Family::PassiveAggressive => g(vec![("C", num(&[0.01, 0.1, 1.0, 10.0, 100.0]))]),
    }
}

/// Cartesian product in declared key order; the last key varies fastest. An
/// empty declaration yields a single empty candidate.
pub fn expand_grid(decl: &GridDecl) -> Vec<ParamSet> {
    let mut out = vec![ParamSet::new()];
    for (key, values) in decl {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for base in &out {
            for v in values {
                let mut p = base.clone();
                p.insert(key.clone(), v.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Every key a family understands, with its default.
fn known_params(family: Family) -> Vec<(&'static str, ParamValue)> {
    use ParamValue::*;
    let s = |x: &str| Str(x.to_string());
    match family {
        Family::Svm => vec![
            ("C", Num(1.0)),
            ("kernel", s("rbf")),
            ("gamma", s("scale")),
            ("degree", Num(3.0)),
            ("tol", Num(1e-3)),
            ("max_passes", Num(10_000.0)),
        ],
        Family::Logistic => vec![("C", Num(1.0)), ("solver", s("lbfgs"))],
        Family::Knn => vec![("n_neighbors", Num(5.0)), ("weights", s("uniform"))],
        Family::GaussianNb => vec![],
        Family::DecisionTree => vec![("max_depth", Null), ("min_samples_split", Num(2.0))],
        Family::RandomForest => vec![
            ("n_estimators", Num(100.0)),
            ("max_depth", Null),
            ("min_samples_split", Num(2.0)),
        ],
        Family::GradientBoosting => vec![
            ("n_estimators", Num(100.0)),
            ("learning_rate", Num(0.1)),
            ("max_depth", Num(3.0)),
        ],
        Family::SgdLinear | Family::Perceptron => vec![
            ("alpha", Num(1e-4)),
            ("penalty", if family == Family::SgdLinear { s("l2") } else { Null }),
            ("max_iter", Num(1000.0)),
        ],
        Family::Ridge => vec![("alpha", Num(1.0))],
        Family::PassiveAggressive => vec![("C", Num(1.0)), ("max_iter", Num(1000.0))],
    }
}

impl ModelSpec {
    pub fn new(family: Family, params: ParamSet) -> Self {
        Self { family, params }
    }

    /// Rejects unknown keys and out-of-range values.
    pub fn validate(&self) -> Result<(), ClassicError> {
        let known = known_params(self.family);
        for (k, v) in &self.params {
            if !known.iter().any(|(name, _)| name == k) {
                return Err(bad(k, format!("not a {} parameter", self.family)));
            }
            let positive = |v: &ParamValue| matches!(v, ParamValue::Num(x) if *x > 0.0 && x.is_finite());
            let ok = match k.as_str() {
                "C" | "learning_rate" | "tol" => positive(v),
                "alpha" => matches!(v, ParamValue::Num(x) if *x >= 0.0 && x.is_finite()),
                "n_neighbors" | "n_estimators" | "degree" | "max_iter" | "max_passes" => {
                    matches!(v, ParamValue::Num(x) if *x >= 1.0 && x.fract() == 0.0)
                }
                "min_samples_split" => matches!(v, ParamValue::Num(x) if *x >= 2.0 && x.fract() == 0.0),
                "max_depth" => {
                    matches!(v, ParamValue::Null) || matches!(v, ParamValue::Num(x) if *x >= 1.0 && x.fract() == 0.0)
                }
                "kernel" => matches!(v, ParamValue::Str(s) if ["rbf", "linear", "poly"].contains(&s.as_str())),
                "gamma" => {
                    matches!(v, ParamValue::Str(s) if s == "scale" || s == "auto")
                        || matches!(v, ParamValue::Num(x) if *x >= 0.0 && x.is_finite())
                }
                "weights" => matches!(v, ParamValue::Str(s) if s == "uniform" || s == "distance"),
                "penalty" => {
                    matches!(v, ParamValue::Null)
                        || matches!(v, ParamValue::Str(s) if ["l1", "l2", "elasticnet"].contains(&s.as_str()))
                }
                "solver" => matches!(v, ParamValue::Str(_)),
                _ => true,
            };
            if !ok {
                return Err(bad(k, format!("value `{v}` out of range")));
            }
        }
        Ok(())
    }

    fn value(&self, key: &str) -> ParamValue {
        self.params.get(key).cloned().unwrap_or_else(|| {
            known_params(self.family)
                .into_iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| v)
                .unwrap_or(ParamValue::Null)
        })
    }

    pub(crate) fn f64(&self, key: &str) -> Result<f64, ClassicError> {
        match self.value(key) {
            ParamValue::Num(v) => Ok(v),
            other => Err(bad(key, format!("expected a number, got `{other}`"))),
        }
    }

    pub(crate) fn usize(&self, key: &str) -> Result<usize, ClassicError> {
        Ok(self.f64(key)? as usize)
    }

    pub(crate) fn opt_usize(&self, key: &str) -> Result<Option<usize>, ClassicError> {
        match self.value(key) {
            ParamValue::Null => Ok(None),
            ParamValue::Num(v) => Ok(Some(v as usize)),
            other => Err(bad(key, format!("expected a number or none, got `{other}`"))),
        }
    }

    pub(crate) fn string(&self, key: &str) -> Option<String> {
        match self.value(key) {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub(crate) fn value_of(&self, key: &str) -> ParamValue {
        self.value(key)
    }
}

fn bad(key: &str, reason: String) -> ClassicError {
    ClassicError::InvalidParam { key: key.to_string(), reason }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let sizes: Vec<usize> = Family::ALL.iter().map(|&f| expand_grid(&default_grid(f)).len()).collect();
        assert_eq!(sizes, vec![36, 10, 6, 1, 9, 9, 9, 9, 3, 9, 5]);
    }

    #[test]
    fn last_key_varies_fastest() {
        let g = expand_grid(&default_grid(Family::Knn));
        assert_eq!(g[0]["n_neighbors"], ParamValue::Num(3.0));
        assert_eq!(g[1]["weights"], ParamValue::Str("distance".into()));
        assert_eq!(g[2]["n_neighbors"], ParamValue::Num(5.0));
    }

    #[test]
    fn default_grids_validate() {
        for f in Family::ALL {
            for p in expand_grid(&default_grid(f)) {
                ModelSpec::new(f, p).validate().unwrap();
            }
        }
    }

    #[test]
    fn rejects_foreign_keys_and_ranges() {
        let mut p = ParamSet::new();
        p.insert("n_neighbors".into(), ParamValue::Num(3.0));
        assert!(ModelSpec::new(Family::Svm, p.clone()).validate().is_err());
        p.insert("n_neighbors".into(), ParamValue::Num(0.0));
        assert!(ModelSpec::new(Family::Knn, p).validate().is_err());
    }

    #[test]
    fn param_parsing() {
        assert_eq!(ParamValue::parse("None"), ParamValue::Null);
        assert_eq!(ParamValue::parse("0.1"), ParamValue::Num(0.1));
        assert_eq!(ParamValue::parse("rbf"), ParamValue::Str("rbf".into()));
        let json = serde_json::to_string(&expand_grid(&default_grid(Family::DecisionTree))[0]).unwrap();
        assert_eq!(json, r#"{"max_depth":null,"min_samples_split":2.0}"#);
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
    }
}
