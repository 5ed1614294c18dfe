use serde::{Deserialize, Serialize};

use super::{Hyperparams, ModelFamily};

fn point(pairs: &[(&str, f64)]) -> Hyperparams {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Fixed search grids. Entries hold only the overridden hyperparameters;
/// everything else keeps the family default.
pub fn default_grid(family: ModelFamily) -> Vec<Hyperparams> {
    match family {
        ModelFamily::Ols | ModelFamily::BayesianRidge => vec![Hyperparams::new()],
        ModelFamily::Ridge => [0.01, 0.1, 1.0, 10.0]
            .iter()
            .map(|l| point(&[("lambda", *l)]))
            .collect(),
        ModelFamily::Lasso => (0..20)
            .map(|k| point(&[("lambda_ratio", 10f64.powf(-3.0 + 3.0 * k as f64 / 19.0))]))
            .collect(),
        ModelFamily::Cart => {
            let mut g = Vec::new();
            for d in [3.0, 6.0, 10.0] {
                for m in [2.0, 5.0] {
                    g.push(point(&[("max_depth", d), ("min_leaf", m)]));
                }
            }
            g
        }
        ModelFamily::RandomForest => [1.0, 2.0]
            .iter()
            .map(|r| point(&[("n_trees", 200.0), ("mtry_rule", *r)]))
            .collect(),
        ModelFamily::GradientBoosting => {
            let mut g = Vec::new();
            for nu in [0.05, 0.1] {
                for s in [100.0, 300.0] {
                    for d in [2.0, 3.0] {
                        g.push(point(&[("learning_rate", nu), ("n_stages", s), ("max_depth", d)]));
                    }
                }
            }
            g
        }
        ModelFamily::AdaboostR2 => [50.0, 100.0]
            .iter()
            .map(|n| point(&[("n_learners", *n)]))
            .collect(),
    }
}

/// A named model configuration in the evaluation grid: a family plus the
/// hyperparameter grid searched for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    pub family: ModelFamily,
    pub grid: Vec<Hyperparams>,
}

impl ModelEntry {
    pub fn standard(family: ModelFamily) -> Self {
        ModelEntry {
            name: family.as_str().to_string(),
            family,
            grid: default_grid(family),
        }
    }
}

/// One entry per family with its default grid.
pub fn standard_zoo() -> Vec<ModelEntry> {
    ModelFamily::ALL.into_iter().map(ModelEntry::standard).collect()
}

/// The eight families plus four variants, giving twelve model entries.
pub fn extended_zoo() -> Vec<ModelEntry> {
    let mut zoo = standard_zoo();
    zoo.push(ModelEntry {
        name: "bagged_trees".into(),
        family: ModelFamily::RandomForest,
        grid: vec![point(&[("n_trees", 200.0), ("mtry_rule", 0.0)])],
    });
    zoo.push(ModelEntry {
        name: "gradient_boosting_stumps".into(),
        family: ModelFamily::GradientBoosting,
        grid: [0.1, 0.3]
            .iter()
            .flat_map(|nu| {
                [100.0, 300.0]
                    .map(|s| point(&[("learning_rate", *nu), ("n_stages", s), ("max_depth", 1.0)]))
            })
            .collect(),
    });
    zoo.push(ModelEntry {
        name: "ridge_strong".into(),
        family: ModelFamily::Ridge,
        grid: [30.0, 100.0, 300.0]
            .iter()
            .map(|l| point(&[("lambda", *l)]))
            .collect(),
    });
    zoo.push(ModelEntry {
        name: "adaboost_r2_deep".into(),
        family: ModelFamily::AdaboostR2,
        grid: vec![point(&[("n_learners", 50.0), ("max_depth", 5.0)])],
    });
    zoo
}
