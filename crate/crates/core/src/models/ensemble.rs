//! Tree ensembles: random forest, least-squares gradient boosting and
//! AdaBoost.R2.

use rand::Rng;
use rayon::prelude::*;

use super::tree::{RegressionTree, TreeBuilder, TreeParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
}

/// Trees are independent given their derived stream, so they are grown in
/// parallel and collected in index order.
pub fn fit_forest(cols: &[Vec<f64>], y: &[f64], params: &ForestParams, seed: u64) -> Vec<RegressionTree> {
    let builder = TreeBuilder::new(cols);
    let n = y.len();
    (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(rng::derive(seed, t as u64));
            let mut w = vec![0.0; n];
            if params.bootstrap {
                for _ in 0..n {
                    w[r.random_range(0..n)] += 1.0;
                }
            } else {
                w.iter_mut().for_each(|v| *v = 1.0);
            }
            builder.fit(y, &w, &params.tree, Some(&mut r))
        })
        .collect()
}

pub fn predict_forest(trees: &[RegressionTree], cols: &[Vec<f64>], row: usize) -> f64 {
    let mut s = 0.0;
    for t in trees {
        s += t.predict_cols(cols, row);
    }
    s / trees.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostingParams {
    pub learning_rate: f64,
    pub n_stages: usize,
    pub tree: TreeParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostingFit {
    pub init: f64,
    pub trees: Vec<RegressionTree>,
    /// Training MSE of F_0, F_1, ... (length = stages kept + 1).
    pub stage_mse: Vec<f64>,
    pub stop_reason: Option<String>,
}

fn mse(y: &[f64], f: &[f64]) -> f64 {
    y.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

pub fn fit_boosting(cols: &[Vec<f64>], y: &[f64], params: &BoostingParams) -> BoostingFit {
    let builder = TreeBuilder::new(cols);
    let n = y.len();
    let init = crate::linalg::mean(y);
    let mut f = vec![init; n];
    let mut stage_mse = vec![mse(y, &f)];
    let mut trees = Vec::with_capacity(params.n_stages);
    let ones = vec![1.0; n];
    let mut stop_reason = None;
    for m in 0..params.n_stages {
        let resid: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
        let tree = builder.fit(&resid, &ones, &params.tree, None);
        if tree.n_splits() == 0 {
            stop_reason = Some(format!("stage {m}: residuals admit no split"));
            break;
        }
        let next: Vec<f64> = (0..n)
            .map(|i| f[i] + params.learning_rate * tree.predict_cols(cols, i))
            .collect();
        let e = mse(y, &next);
        let prev = *stage_mse.last().unwrap();
        if e > prev {
            stop_reason = Some(format!("stage {m}: rounding would raise training MSE"));
            break;
        }
        f = next;
        stage_mse.push(e);
        trees.push(tree);
    }
    BoostingFit {
        init,
        trees,
        stage_mse,
        stop_reason,
    }
}

pub fn predict_boosting(init: f64, learning_rate: f64, trees: &[RegressionTree], cols: &[Vec<f64>], row: usize) -> f64 {
    let mut f = init;
    for t in trees {
        f += learning_rate * t.predict_cols(cols, row);
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaBoostParams {
    pub n_learners: usize,
    pub tree: TreeParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostFit {
    pub learners: Vec<RegressionTree>,
    pub weights: Vec<f64>,
    pub stop_reason: Option<String>,
}

/// Drucker's AdaBoost.R2 with the linear loss. Each round resamples the
/// training rows by the current weights from a stream derived from the round.
pub fn fit_adaboost(cols: &[Vec<f64>], y: &[f64], params: &AdaBoostParams, seed: u64) -> AdaBoostFit {
    let builder = TreeBuilder::new(cols);
    let n = y.len();
    let mut w = vec![1.0 / n as f64; n];
    let mut learners = Vec::new();
    let mut weights = Vec::new();
    let mut stop_reason = None;
    for t in 0..params.n_learners {
        let mut r = rng::stream(rng::derive(seed, t as u64));
        let cum: Vec<f64> = w
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let total = cum[n - 1];
        let mut counts = vec![0.0; n];
        for _ in 0..n {
            let u = r.random::<f64>() * total;
            let k = cum.partition_point(|c| *c <= u).min(n - 1);
            counts[k] += 1.0;
        }
        let tree = builder.fit(y, &counts, &params.tree, None);
        let err: Vec<f64> = (0..n).map(|i| (tree.predict_cols(cols, i) - y[i]).abs()).collect();
        let max_err = err.iter().copied().fold(0.0, f64::max);
        if max_err == 0.0 {
            learners.push(tree);
            weights.push(1.0);
            stop_reason = Some(format!("round {t}: perfect fit"));
            break;
        }
        let loss: Vec<f64> = err.iter().map(|e| e / max_err).collect();
        let avg: f64 = loss.iter().zip(&w).map(|(l, wi)| l * wi).sum::<f64>() / total;
        if avg >= 0.5 {
            if learners.is_empty() {
                learners.push(tree);
                weights.push(1.0);
            }
            stop_reason = Some(format!("round {t}: average loss {avg:.3} >= 0.5"));
            break;
        }
        if avg <= 0.0 {
            learners.push(tree);
            weights.push(1.0);
            stop_reason = Some(format!("round {t}: zero weighted loss"));
            break;
        }
        let beta = avg / (1.0 - avg);
        for i in 0..n {
            w[i] *= beta.powf(1.0 - loss[i]);
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        learners.push(tree);
        weights.push((1.0 / beta).ln());
    }
    AdaBoostFit {
        learners,
        weights,
        stop_reason,
    }
}

/// Weighted median of the learners' predictions: the smallest prediction whose
/// cumulative weight reaches half the total.
pub fn predict_adaboost(learners: &[RegressionTree], weights: &[f64], cols: &[Vec<f64>], row: usize) -> f64 {
    let mut preds: Vec<(f64, f64)> = learners
        .iter()
        .zip(weights)
        .map(|(t, w)| (t.predict_cols(cols, row), *w))
        .collect();
    preds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (p, w) in &preds {
        acc += w;
        if acc >= 0.5 * total {
            return *p;
        }
    }
    preds.last().map_or(f64::NAN, |p| p.0)
}
