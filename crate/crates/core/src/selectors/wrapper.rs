//! Wrapper selectors: forward selection by cross-validated OLS and recursive
//! elimination by ridge coefficient magnitude.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use super::{ordered_with_fill, report, Selector, SelectorConfig, SelectorReport};
use crate::dataset::FeatureMatrix;
use crate::error::Result;
use crate::evaluation::kfold_split;
use crate::linalg;
use crate::rng;

const MIN_IMPROVEMENT: f64 = 1e-6;

/// Gram of the design `[1, Z]` restricted to `rows`, plus its product with y.
fn augmented_gram(z: &[Vec<f64>], y: &[f64], rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let p = z.len();
    let mut g = DMatrix::zeros(p + 1, p + 1);
    let mut c = DVector::zeros(p + 1);
    g[(0, 0)] = rows.len() as f64;
    c[0] = rows.iter().map(|&i| y[i]).sum();
    for a in 0..p {
        let za = &z[a];
        let s: f64 = rows.iter().map(|&i| za[i]).sum();
        g[(0, a + 1)] = s;
        g[(a + 1, 0)] = s;
        c[a + 1] = rows.iter().map(|&i| za[i] * y[i]).sum();
        for b in a..p {
            let zb = &z[b];
            let v: f64 = rows.iter().map(|&i| za[i] * zb[i]).sum();
            g[(a + 1, b + 1)] = v;
            g[(b + 1, a + 1)] = v;
        }
    }
    (g, c)
}

fn solve_subset(g: &DMatrix<f64>, c: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |a, b| g[(idx[a], idx[b])]);
    let rhs = DVector::from_fn(k, |a, _| c[idx[a]]);
    if let Some(b) = linalg::solve_spd(sub.clone(), &rhs) {
        return b;
    }
    let mut ridged = sub;
    for a in 1..k {
        ridged[(a, a)] += 1e-8;
    }
    linalg::solve_spd(ridged, &rhs).unwrap_or_else(|| DVector::zeros(k))
}

/// Greedy forward selection. Each step adds the feature whose inclusion gives
/// the lowest mean fold RMSE of an intercept OLS fit; stops at `top_k` or when
/// the best improvement is at most 1e-6.
pub fn forward_select(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let n = y.len();
    let p = x.n_cols();
    let z = linalg::standardize(x.cols()).cols;
    let folds = kfold_split(n, config.cv_folds, rng::derive_str(config.seed, "forward"))?;
    let grams: Vec<(DMatrix<f64>, DVector<f64>)> = folds
        .iter()
        .map(|f| augmented_gram(&z, y, &f.train))
        .collect();
    let cv_rmse = |set: &[usize]| -> f64 {
        let idx: Vec<usize> = std::iter::once(0).chain(set.iter().map(|j| j + 1)).collect();
        let mut total = 0.0;
        for (f, (g, c)) in folds.iter().zip(&grams) {
            let b = solve_subset(g, c, &idx);
            let mut sse = 0.0;
            for &i in &f.validation {
                let mut pred = b[0];
                for (k, j) in set.iter().enumerate() {
                    pred += b[k + 1] * z[*j][i];
                }
                sse += (y[i] - pred).powi(2);
            }
            total += (sse / f.validation.len() as f64).sqrt();
        }
        total / folds.len() as f64
    };

    let mut current = cv_rmse(&[]);
    let mut set: Vec<usize> = Vec::new();
    let mut raw = Vec::new();
    let mut path = vec![current];
    while set.len() < config.top_k {
        let mut best: Option<(usize, f64)> = None;
        let mut trial = set.clone();
        trial.push(0);
        for j in 0..p {
            if set.contains(&j) {
                continue;
            }
            *trial.last_mut().unwrap() = j;
            let r = cv_rmse(&trial);
            if best.map_or(true, |(_, b)| r < b) {
                best = Some((j, r));
            }
        }
        let Some((j, r)) = best else { break };
        let gain = current - r;
        if !(gain > MIN_IMPROVEMENT) {
            break;
        }
        set.push(j);
        raw.push(gain);
        path.push(r);
        current = r;
    }
    // improvements are reported non-increasing; raw values kept in metadata
    let mut picks = Vec::with_capacity(set.len());
    let mut cap = f64::INFINITY;
    for (j, g) in set.iter().zip(&raw) {
        cap = cap.min(*g);
        picks.push((*j, cap));
    }
    let mut meta = BTreeMap::new();
    meta.insert("cv_rmse_path".into(), json!(path));
    meta.insert("raw_improvements".into(), json!(raw));
    let mut rep = report(Selector::Forward, ordered_with_fill(x.names(), &picks, config.top_k), meta);
    rep.n_selected = picks.len();
    Ok(rep)
}

/// Ridge (lambda = 1) on standardized features; drop the smallest |coef|
/// one at a time until `top_k` remain.
pub fn rfe_select(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let p = x.n_cols();
    let z = linalg::standardize(x.cols()).cols;
    let (_, yc) = linalg::center(y);
    let g = linalg::gram(&z);
    let c = linalg::xty(&z, &yc);
    let fit = |active: &[usize]| -> Vec<f64> {
        let k = active.len();
        let mut sub = DMatrix::from_fn(k, k, |a, b| g[(active[a], active[b])]);
        for a in 0..k {
            sub[(a, a)] += 1.0;
        }
        let rhs = DVector::from_fn(k, |a, _| c[active[a]]);
        linalg::solve_spd(sub, &rhs)
            .map(|b| b.iter().copied().collect())
            .unwrap_or_else(|| vec![0.0; k])
    };
    let mut active: Vec<usize> = (0..p).collect();
    let mut eliminated = Vec::new();
    while active.len() > config.top_k {
        let b = fit(&active);
        // smallest |coef|; ties drop the higher column index
        let mut drop = 0;
        for k in 1..active.len() {
            if b[k].abs() <= b[drop].abs() {
                drop = k;
            }
        }
        eliminated.push(x.names()[active[drop]].clone());
        active.remove(drop);
    }
    let b = fit(&active);
    let mut order: Vec<usize> = (0..active.len()).collect();
    order.sort_by(|&u, &v| b[v].abs().total_cmp(&b[u].abs()).then(active[u].cmp(&active[v])));
    let ranked = order
        .iter()
        .enumerate()
        .map(|(r, &k)| (x.names()[active[k]].clone(), (p - r) as f64))
        .collect();
    let mut meta = BTreeMap::new();
    meta.insert("elimination_order".into(), json!(eliminated));
    meta.insert("lambda".into(), json!(1.0));
    Ok(report(Selector::Rfe, ranked, meta))
}
