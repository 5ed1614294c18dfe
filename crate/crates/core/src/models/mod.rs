//! Regression model zoo with a uniform fit/predict contract and a versioned
//! JSON artifact format.

pub mod ensemble;
mod grid;
pub mod linear;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
pub use grid::{default_grid, extended_zoo, standard_zoo, ModelEntry};
use tree::{RegressionTree, TreeBuilder, TreeParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub type Hyperparams = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Ols,
    Ridge,
    Lasso,
    BayesianRidge,
    Cart,
    RandomForest,
    GradientBoosting,
    AdaboostR2,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 8] = [
        ModelFamily::Ols,
        ModelFamily::Ridge,
        ModelFamily::Lasso,
        ModelFamily::BayesianRidge,
        ModelFamily::Cart,
        ModelFamily::RandomForest,
        ModelFamily::GradientBoosting,
        ModelFamily::AdaboostR2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Ols => "ols",
            ModelFamily::Ridge => "ridge",
            ModelFamily::Lasso => "lasso",
            ModelFamily::BayesianRidge => "bayesian_ridge",
            ModelFamily::Cart => "cart",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::GradientBoosting => "gradient_boosting",
            ModelFamily::AdaboostR2 => "adaboost_r2",
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(
            self,
            ModelFamily::Ols | ModelFamily::Ridge | ModelFamily::Lasso | ModelFamily::BayesianRidge
        )
    }

    /// Hyperparameter names and their defaults.
    pub fn defaults(self) -> Hyperparams {
        let pairs: &[(&str, f64)] = match self {
            ModelFamily::Ols => &[],
            ModelFamily::Ridge => &[("lambda", 1.0)],
            // penalty as a fraction of the smallest all-zero penalty
            ModelFamily::Lasso => &[("lambda_ratio", 0.01)],
            ModelFamily::BayesianRidge => &[("max_iter", 300.0), ("tol", 1e-6)],
            ModelFamily::Cart => &[("max_depth", 6.0), ("min_leaf", 5.0)],
            // mtry_rule: 0 all features, 1 ceil(q/3), 2 ceil(sqrt q); mtry > 0 overrides
            ModelFamily::RandomForest => &[
                ("n_trees", 200.0),
                ("mtry", 0.0),
                ("mtry_rule", 1.0),
                ("max_depth", 64.0),
                ("min_leaf", 1.0),
                ("bootstrap", 1.0),
            ],
            ModelFamily::GradientBoosting => &[
                ("learning_rate", 0.1),
                ("n_stages", 100.0),
                ("max_depth", 3.0),
                ("min_leaf", 5.0),
            ],
            ModelFamily::AdaboostR2 => &[("n_learners", 50.0), ("max_depth", 3.0), ("min_leaf", 1.0)],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub hyperparameters: Hyperparams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, seed: u64) -> Self {
        ModelSpec {
            family,
            hyperparameters: family.defaults(),
            seed,
        }
    }

    /// Defaults overlaid with `overrides`; unknown names are rejected.
    pub fn with_params(family: ModelFamily, overrides: &Hyperparams, seed: u64) -> Result<Self> {
        let mut spec = ModelSpec::new(family, seed);
        for (k, v) in overrides {
            spec = spec.set(k, *v)?;
        }
        Ok(spec)
    }

    pub fn set(mut self, name: &str, value: f64) -> Result<Self> {
        match self.hyperparameters.get_mut(name) {
            Some(slot) => {
                *slot = value;
                Ok(self)
            }
            None => Err(Error::invalid(format!(
                "{} has no hyperparameter {name:?}",
                self.family
            ))),
        }
    }

    fn real(&self, name: &str) -> f64 {
        self.hyperparameters[name]
    }

    fn count(&self, name: &str, min: usize) -> Result<usize> {
        let v = self.real(name);
        if !(v.fract() == 0.0 && v >= min as f64 && v <= 1e9) {
            return Err(Error::invalid(format!(
                "{}: {name} must be an integer >= {min}, got {v}",
                self.family
            )));
        }
        Ok(v as usize)
    }

    fn positive(&self, name: &str) -> Result<f64> {
        let v = self.real(name);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{}: {name} must be > 0, got {v}", self.family)));
        }
        Ok(v)
    }

    fn tree_params(&self) -> Result<TreeParams> {
        Ok(TreeParams {
            max_depth: self.count("max_depth", 1)?,
            min_leaf: self.count("min_leaf", 1)?,
            mtry: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Linear {
        intercept: f64,
        coef: Vec<f64>,
    },
    BayesianRidge {
        intercept: f64,
        coef: Vec<f64>,
        alpha: f64,
        lambda: f64,
    },
    Tree {
        tree: RegressionTree,
    },
    Forest {
        trees: Vec<RegressionTree>,
    },
    Boosting {
        init: f64,
        learning_rate: f64,
        trees: Vec<RegressionTree>,
    },
    AdaBoost {
        learners: Vec<RegressionTree>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingDiagnostics {
    pub n_train: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Training MSE of F_0, F_1, ... for gradient boosting.
    #[serde(default)]
    pub stage_mse: Vec<f64>,
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Penalty actually used by lasso, on the standardized scale.
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub family: ModelFamily,
    pub hyperparameters: Hyperparams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub params: ModelParams,
    pub diagnostics: TrainingDiagnostics,
}

fn check_target(x: &FeatureMatrix, y: &[f64]) -> Result<()> {
    if x.n_cols() == 0 {
        return Err(Error::invalid("no features"));
    }
    if y.len() != x.n_rows() {
        return Err(Error::invalid(format!(
            "target has {} rows, features have {}",
            y.len(),
            x.n_rows()
        )));
    }
    if y.is_empty() {
        return Err(Error::invalid("no training rows"));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite target at row {}", i + 1)));
    }
    Ok(())
}

pub fn fit(spec: &ModelSpec, x: &FeatureMatrix, y: &[f64]) -> Result<TrainedModel> {
    check_target(x, y)?;
    for k in spec.hyperparameters.keys() {
        if !spec.family.defaults().contains_key(k) {
            return Err(Error::invalid(format!("{} has no hyperparameter {k:?}", spec.family)));
        }
    }
    let full = ModelSpec::with_params(spec.family, &spec.hyperparameters, spec.seed)?;
    let cols = x.cols();
    let q = x.n_cols();
    let mut diag = TrainingDiagnostics {
        n_train: y.len(),
        ..Default::default()
    };
    let params = match full.family {
        ModelFamily::Ols => {
            let f = linear::fit_ols(cols, y)?;
            diag.warnings = f.warnings;
            ModelParams::Linear {
                intercept: f.intercept,
                coef: f.coef,
            }
        }
        ModelFamily::Ridge => {
            let lambda = full.real("lambda");
            let f = linear::fit_ridge(cols, y, lambda)?;
            ModelParams::Linear {
                intercept: f.intercept,
                coef: f.coef,
            }
        }
        ModelFamily::Lasso => {
            let ratio = full.real("lambda_ratio");
            if !(ratio >= 0.0 && ratio.is_finite()) {
                return Err(Error::invalid(format!("lasso: lambda_ratio must be >= 0, got {ratio}")));
            }
            let z = crate::linalg::standardize(cols);
            let (_, yc) = crate::linalg::center(y);
            let lambda = ratio * linear::lasso_lambda_max(&z.cols, &yc);
            let (f, path) = linear::fit_lasso(cols, y, lambda)?;
            diag.iterations = Some(path.sweeps);
            diag.lambda = Some(lambda);
            ModelParams::Linear {
                intercept: f.intercept,
                coef: f.coef,
            }
        }
        ModelFamily::BayesianRidge => {
            let max_iter = full.count("max_iter", 1)?;
            let tol = full.positive("tol")?;
            let f = linear::fit_bayesian_ridge(cols, y, max_iter, tol)?;
            diag.iterations = Some(f.iterations);
            diag.warnings = f.fit.warnings;
            ModelParams::BayesianRidge {
                intercept: f.fit.intercept,
                coef: f.fit.coef,
                alpha: f.alpha,
                lambda: f.lambda,
            }
        }
        ModelFamily::Cart => {
            let tp = full.tree_params()?;
            let tree = TreeBuilder::new(cols).fit(y, &vec![1.0; y.len()], &tp, None);
            ModelParams::Tree { tree }
        }
        ModelFamily::RandomForest => {
            let mut tp = full.tree_params()?;
            let explicit = full.real("mtry");
            let mtry = if explicit > 0.0 {
                full.count("mtry", 1)?
            } else {
                match full.real("mtry_rule") as i64 {
                    0 => q,
                    1 => q.div_ceil(3),
                    2 => (q as f64).sqrt().ceil() as usize,
                    _ => return Err(Error::invalid("random_forest: mtry_rule must be 0, 1 or 2")),
                }
            };
            tp.mtry = Some(mtry.clamp(1, q));
            let p = ensemble::ForestParams {
                n_trees: full.count("n_trees", 1)?,
                tree: tp,
                bootstrap: full.real("bootstrap") != 0.0,
            };
            ModelParams::Forest {
                trees: ensemble::fit_forest(cols, y, &p, full.seed),
            }
        }
        ModelFamily::GradientBoosting => {
            let nu = full.positive("learning_rate")?;
            if nu > 1.0 {
                return Err(Error::invalid("gradient_boosting: learning_rate must be <= 1"));
            }
            let p = ensemble::BoostingParams {
                learning_rate: nu,
                n_stages: full.count("n_stages", 0)?,
                tree: full.tree_params()?,
            };
            let f = ensemble::fit_boosting(cols, y, &p);
            diag.stage_mse = f.stage_mse;
            diag.iterations = Some(f.trees.len());
            diag.warnings.extend(f.stop_reason);
            ModelParams::Boosting {
                init: f.init,
                learning_rate: nu,
                trees: f.trees,
            }
        }
        ModelFamily::AdaboostR2 => {
            let p = ensemble::AdaBoostParams {
                n_learners: full.count("n_learners", 1)?,
                tree: full.tree_params()?,
            };
            let f = ensemble::fit_adaboost(cols, y, &p, full.seed);
            diag.iterations = Some(f.learners.len());
            diag.warnings.extend(f.stop_reason);
            ModelParams::AdaBoost {
                learners: f.learners,
                weights: f.weights,
            }
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        family: full.family,
        hyperparameters: full.hyperparameters,
        seed: full.seed,
        feature_names: x.names().to_vec(),
        params,
        diagnostics: diag,
    })
}

impl TrainedModel {
    /// Reorder `x` to the training feature order, or report the mismatch.
    pub fn align<'a>(&self, x: &'a FeatureMatrix) -> Result<Vec<&'a Vec<f64>>> {
        let missing: Vec<String> = self
            .feature_names
            .iter()
            .filter(|n| x.column_index(n).is_none())
            .cloned()
            .collect();
        let unexpected: Vec<String> = x
            .names()
            .iter()
            .filter(|n| !self.feature_names.contains(n))
            .cloned()
            .collect();
        if !missing.is_empty() || !unexpected.is_empty() {
            return Err(Error::FeatureMismatch { missing, unexpected });
        }
        Ok(self
            .feature_names
            .iter()
            .map(|n| &x.cols()[x.column_index(n).unwrap()])
            .collect())
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        let cols: Vec<Vec<f64>> = self.align(x)?.into_iter().cloned().collect();
        Ok(self.predict_aligned(&cols))
    }

    /// Predict from columns already in training order.
    pub fn predict_aligned(&self, cols: &[Vec<f64>]) -> Vec<f64> {
        let m = cols.first().map_or(0, Vec::len);
        let linear = |intercept: f64, coef: &[f64]| -> Vec<f64> {
            (0..m)
                .map(|i| intercept + coef.iter().zip(cols).map(|(b, c)| b * c[i]).sum::<f64>())
                .collect()
        };
        match &self.params {
            ModelParams::Linear { intercept, coef } => linear(*intercept, coef),
            ModelParams::BayesianRidge { intercept, coef, .. } => linear(*intercept, coef),
            ModelParams::Tree { tree } => (0..m).map(|i| tree.predict_cols(cols, i)).collect(),
            ModelParams::Forest { trees } => (0..m)
                .map(|i| ensemble::predict_forest(trees, cols, i))
                .collect(),
            ModelParams::Boosting {
                init,
                learning_rate,
                trees,
            } => (0..m)
                .map(|i| ensemble::predict_boosting(*init, *learning_rate, trees, cols, i))
                .collect(),
            ModelParams::AdaBoost { learners, weights } => (0..m)
                .map(|i| ensemble::predict_adaboost(learners, weights, cols, i))
                .collect(),
        }
    }

    /// Raw-unit coefficients for the linear families.
    pub fn coefficients(&self) -> Option<(f64, &[f64])> {
        match &self.params {
            ModelParams::Linear { intercept, coef } | ModelParams::BayesianRidge { intercept, coef, .. } => {
                Some((*intercept, coef))
            }
            _ => None,
        }
    }

    /// Summed split gains per feature for the tree families, unnormalized.
    pub fn split_gains(&self) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; self.feature_names.len()];
        let trees: Vec<&RegressionTree> = match &self.params {
            ModelParams::Tree { tree } => vec![tree],
            ModelParams::Forest { trees } | ModelParams::Boosting { trees, .. } => trees.iter().collect(),
            ModelParams::AdaBoost { learners, weights } => {
                for (t, w) in learners.iter().zip(weights) {
                    let mut g = vec![0.0; acc.len()];
                    t.add_importance(&mut g);
                    for (a, v) in acc.iter_mut().zip(g) {
                        *a += w * v;
                    }
                }
                return Some(acc);
            }
            _ => return None,
        };
        for t in trees {
            t.add_importance(&mut acc);
        }
        Some(acc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
