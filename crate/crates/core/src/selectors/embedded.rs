//! Embedded selectors: lasso path with CV, ridge magnitudes and CART
//! importance.

use std::collections::BTreeMap;

use serde_json::json;

use super::{rank_by_score, report, sparse_report, Selector, SelectorConfig, SelectorReport};
use crate::dataset::FeatureMatrix;
use crate::error::Result;
use crate::evaluation::kfold_split;
use crate::linalg;
use crate::models::linear::{lasso_cd, lasso_lambda_max, LASSO_MAX_SWEEPS, LASSO_TOL};
use crate::models::tree::{TreeBuilder, TreeParams};
use crate::rng;

fn subset(cols: &[Vec<f64>], rows: &[usize]) -> Vec<Vec<f64>> {
    cols.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect()
}

/// Log-spaced penalties from `lambda_max` down to `lambda_max / 1000`.
pub(crate) fn lasso_path(lambda_max: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| lambda_max * 1000f64.powf(-(k as f64) / (len - 1) as f64))
        .collect()
}

pub fn lasso_select(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let z = linalg::standardize(x.cols());
    let (_, yc) = linalg::center(y);
    let lmax = lasso_lambda_max(&z.cols, &yc);
    let path = lasso_path(lmax, config.lasso_path_len);
    let folds = kfold_split(y.len(), config.cv_folds, rng::derive_str(config.seed, "lasso"))?;
    let mut cv = vec![0.0; path.len()];
    let mut worst_kkt: f64 = 0.0;
    for f in &folds {
        let zt = linalg::standardize(&subset(x.cols(), &f.train));
        let yt: Vec<f64> = f.train.iter().map(|&i| y[i]).collect();
        let (ym, ytc) = linalg::center(&yt);
        let mut warm: Option<Vec<f64>> = None;
        for (k, &lambda) in path.iter().enumerate() {
            let fit = lasso_cd(&zt.cols, &ytc, lambda, warm.as_deref(), LASSO_TOL, LASSO_MAX_SWEEPS)?;
            worst_kkt = worst_kkt.max(fit.kkt_violation);
            let mut sse = 0.0;
            for &i in &f.validation {
                let mut pred = ym;
                for j in 0..fit.coef.len() {
                    if fit.coef[j] != 0.0 && zt.sds[j] > 0.0 {
                        pred += fit.coef[j] * (x.cols()[j][i] - zt.means[j]) / zt.sds[j];
                    }
                }
                sse += (y[i] - pred).powi(2);
            }
            cv[k] += (sse / f.validation.len() as f64).sqrt() / folds.len() as f64;
            warm = Some(fit.coef);
        }
    }
    let mut chosen = 0;
    for k in 1..cv.len() {
        if cv[k] < cv[chosen] {
            chosen = k;
        }
    }
    let mut warm: Option<Vec<f64>> = None;
    let mut coef = vec![0.0; x.n_cols()];
    for &lambda in &path[..=chosen] {
        let fit = lasso_cd(&z.cols, &yc, lambda, warm.as_deref(), LASSO_TOL, LASSO_MAX_SWEEPS)?;
        worst_kkt = worst_kkt.max(fit.kkt_violation);
        coef = fit.coef.clone();
        warm = Some(fit.coef);
    }
    let scores: Vec<f64> = coef.iter().map(|b| b.abs()).collect();
    let mut meta = BTreeMap::new();
    meta.insert("lambda".into(), json!(path[chosen]));
    meta.insert("lambda_max".into(), json!(lmax));
    meta.insert("cv_rmse".into(), json!(cv));
    meta.insert("max_kkt_violation".into(), json!(worst_kkt));
    meta.insert("nonzero".into(), json!(scores.iter().filter(|s| **s > 0.0).count()));
    Ok(sparse_report(Selector::Lasso, rank_by_score(x.names(), &scores, config.top_k), meta))
}

/// Standardized ridge coefficients at `lambda`.
pub(crate) fn ridge_standardized(cols: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let z = linalg::standardize(cols);
    let (_, yc) = linalg::center(y);
    let g = linalg::gram(&z.cols);
    let c = linalg::xty(&z.cols, &yc);
    linalg::ridge_from_gram(&g, &c, lambda)
        .map(|b| b.iter().copied().collect())
        .unwrap_or_else(|| vec![0.0; cols.len()])
}

pub fn ridge_rank(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let scores: Vec<f64> = ridge_standardized(x.cols(), y, 1.0).iter().map(|b| b.abs()).collect();
    let mut meta = BTreeMap::new();
    meta.insert("lambda".into(), json!(1.0));
    Ok(report(Selector::Ridge, rank_by_score(x.names(), &scores, config.top_k), meta))
}

pub fn tree_importance_rank(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let params = TreeParams {
        max_depth: 6,
        min_leaf: 5,
        mtry: None,
    };
    let tree = TreeBuilder::new(x.cols()).fit(y, &vec![1.0; y.len()], &params, None);
    let mut gains = vec![0.0; x.n_cols()];
    tree.add_importance(&mut gains);
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        gains.iter_mut().for_each(|g| *g /= total);
    }
    let mut meta = BTreeMap::new();
    meta.insert("splits".into(), json!(tree.n_splits()));
    Ok(sparse_report(
        Selector::DecisionTree,
        rank_by_score(x.names(), &gains, config.top_k),
        meta,
    ))
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{check_report, linear_fixture};
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn ridge_hand_design_matches_closed_form() {
        // already standardized 3x2 design
        let s = (1.5f64).sqrt();
        let cols = vec![vec![-s, 0.0, s], vec![s, -s, 0.0]];
        let y = vec![1.0, 2.0, 6.0];
        let b = ridge_standardized(&cols, &y, 0.7);
        let x = DMatrix::from_fn(3, 2, |i, j| cols[j][i]);
        let yc = DVector::from_vec(vec![-2.0, -1.0, 3.0]);
        let a = x.transpose() * &x + DMatrix::identity(2, 2) * 0.7;
        let want = a.lu().solve(&(x.transpose() * yc)).unwrap();
        for j in 0..2 {
            assert!((b[j] - want[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn lasso_select_meets_kkt_tolerance() {
        let (x, y) = linear_fixture(150, 10, &[(3, 4.0), (6, -2.0)], 0.5, 6);
        let rep = lasso_select(&x, &y, &SelectorConfig { top_k: 5, ..Default::default() }).unwrap();
        check_report(&rep, 10, 5);
        assert!(rep.metadata["max_kkt_violation"].as_f64().unwrap() < 1e-6);
        assert_eq!(rep.feature_names()[..2], ["x3".to_string(), "x6".to_string()]);
    }

    #[test]
    fn tree_scores_sum_to_one_and_constant_target_is_empty() {
        let (x, y) = linear_fixture(200, 5, &[(3, 1.0)], 0.0, 7);
        let step: Vec<f64> = y.iter().map(|v| if *v > 0.5 { 1.0 } else { 0.0 }).collect();
        let rep = tree_importance_rank(&x, &step, &SelectorConfig { top_k: 5, ..Default::default() }).unwrap();
        let total: f64 = rep.ranked_features.iter().map(|(_, s)| s).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(rep.ranked_features[0].0, "x3");
        assert!(rep.ranked_features[0].1 >= 0.9);
        let rep = tree_importance_rank(&x, &[1.0; 200], &SelectorConfig { top_k: 5, ..Default::default() }).unwrap();
        assert_eq!(rep.n_selected, 0);
        assert!(rep.ranked_features.iter().all(|(_, s)| *s == 0.0));
    }
}
