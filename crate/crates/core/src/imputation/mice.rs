//! Chained equations with ridge conditional models and predictive mean
//! matching.
//!
//! The cross-product matrix of the standardized working table (plus an
//! intercept column) is kept up to date as imputations change, so each
//! conditional fit costs one rank-|missing| downdate and a Cholesky solve
//! instead of a full pass over the data.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dataset::{ColumnKind, DataMatrix};
use crate::error::{Error, Result};
use crate::rng;

use super::{ImputationConfig, ImputationResult, KnnDiagnostics};

/// Minimum observed entries for a continuous column to be imputed.
const MIN_OBSERVED: usize = 10;

pub fn mice_impute_continuous(data: &DataMatrix, config: &ImputationConfig) -> Result<ImputationResult> {
    config.validate()?;
    let n = data.n_rows();
    let p = data.n_cols();
    for c in 0..p {
        if data.kind(c) == ColumnKind::Discrete && !data.column_is_complete(c) {
            return Err(Error::precondition(format!(
                "discrete column {:?} still has gaps; run KNN imputation first",
                data.names()[c]
            )));
        }
    }
    let mut targets: Vec<usize> = (0..p)
        .filter(|&c| data.kind(c) == ColumnKind::Continuous && !data.column_is_complete(c))
        .collect();
    let identity = || ImputationResult {
        completed: data.clone(),
        trace: Vec::new(),
        per_column_method: BTreeMap::new(),
        knn: KnnDiagnostics::default(),
    };
    if targets.is_empty() {
        return Ok(identity());
    }
    for &c in &targets {
        if data.observed_count(c) < MIN_OBSERVED {
            return Err(Error::precondition(format!(
                "column {:?} has fewer than {MIN_OBSERVED} observed entries",
                data.names()[c]
            )));
        }
    }
    // increasing missingness, ties by column index
    targets.sort_by_key(|&c| (n - data.observed_count(c), c));

    // Working table: observed values, missing continuous cells at their mean.
    let mut center = vec![0.0; p];
    let mut scale = vec![1.0; p];
    let mut work: Vec<Vec<f64>> = Vec::with_capacity(p);
    for c in 0..p {
        let obs = data.observed(c);
        let m = obs.iter().sum::<f64>() / obs.len() as f64;
        let s = (obs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / obs.len() as f64).sqrt();
        center[c] = m;
        scale[c] = if s > 0.0 { s } else { 1.0 };
        work.push((0..n).map(|i| data.get(i, c).unwrap_or(m)).collect());
    }
    let missing: Vec<Vec<usize>> = (0..p).map(|c| data.missing_rows(c)).collect();
    let observed_rows: Vec<Vec<usize>> = (0..p)
        .map(|c| (0..n).filter(|&i| data.is_observed(i, c)).collect())
        .collect();

    // z-scored design with an intercept column at index p
    let q = p + 1;
    let mut z: Vec<Vec<f64>> = (0..p)
        .map(|c| work[c].iter().map(|v| (v - center[c]) / scale[c]).collect())
        .collect();
    z.push(vec![1.0; n]);
    let mut g = DMatrix::zeros(q, q);
    for a in 0..q {
        for b in a..q {
            let v: f64 = z[a].iter().zip(&z[b]).map(|(x, y)| x * y).sum();
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }

    let total_imputed: usize = targets.iter().map(|&c| missing[c].len()).sum();
    let mut trace = Vec::with_capacity(config.mice_cycles);
    for cycle in 0..config.mice_cycles {
        let mut abs_change = 0.0;
        for &c in &targets {
            let mis = &missing[c];
            let mut rng = rng::stream(rng::derive(rng::derive(config.seed, cycle as u64), c as u64));

            // Gram over the observed rows of c: full minus missing rows.
            let mut g_obs = g.clone();
            for &i in mis {
                for a in 0..q {
                    let za = z[a][i];
                    if za == 0.0 {
                        continue;
                    }
                    for b in 0..q {
                        g_obs[(a, b)] -= za * z[b][i];
                    }
                }
            }
            let preds: Vec<usize> = (0..q).filter(|&j| j != c).collect();
            let k = preds.len();
            let mut a_mat = DMatrix::from_fn(k, k, |u, v| g_obs[(preds[u], preds[v])]);
            for (u, &j) in preds.iter().enumerate() {
                if j != p {
                    a_mat[(u, u)] += config.ridge_lambda;
                }
            }
            let rhs = DVector::from_fn(k, |u, _| g_obs[(preds[u], c)]);
            let beta = a_mat
                .cholesky()
                .map(|ch| ch.solve(&rhs))
                .filter(|b| b.iter().all(|v| v.is_finite()))
                .ok_or_else(|| {
                    Error::Singular(format!("conditional model for column {:?}", data.names()[c]))
                })?;
            let predict = |i: usize| -> f64 {
                preds
                    .iter()
                    .zip(beta.iter())
                    .map(|(&j, b)| z[j][i] * b)
                    .sum()
            };

            // Predictive mean matching against observed rows.
            let mut donors: Vec<(f64, usize)> =
                observed_rows[c].iter().map(|&i| (predict(i), i)).collect();
            donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let new_vals: Vec<f64> = mis
                .iter()
                .map(|&i| {
                    let target = predict(i);
                    let pool = nearest_donors(&donors, target, config.pmm_donors);
                    let pick = pool[rng.random_range(0..pool.len())];
                    data.get(pick, c).expect("donor is observed")
                })
                .collect();

            for (&i, v) in mis.iter().zip(new_vals) {
                abs_change += (v - work[c][i]).abs() / scale[c];
                work[c][i] = v;
                z[c][i] = (v - center[c]) / scale[c];
            }
            for b in 0..q {
                let v: f64 = z[c].iter().zip(&z[b]).map(|(x, y)| x * y).sum();
                g[(c, b)] = v;
                g[(b, c)] = v;
            }
        }
        trace.push(abs_change / total_imputed as f64);
    }

    let mut completed = data.clone();
    for &c in &targets {
        for &i in &missing[c] {
            completed.set(i, c, work[c][i]);
        }
    }
    Ok(ImputationResult {
        completed,
        trace,
        per_column_method: BTreeMap::new(),
        knn: KnnDiagnostics::default(),
    })
}

/// The `k` donors whose prediction is closest to `target` (ties by row index).
/// `sorted` is ordered by (prediction, row).
fn nearest_donors(sorted: &[(f64, usize)], target: f64, k: usize) -> Vec<usize> {
    let k = k.min(sorted.len());
    let pos = sorted.partition_point(|d| d.0 < target);
    let (mut lo, mut hi) = (pos, pos);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let left = (lo > 0).then(|| sorted[lo - 1]);
        let right = (hi < sorted.len()).then(|| sorted[hi]);
        let take_left = match (left, right) {
            (Some(l), Some(r)) => {
                let dl = target - l.0;
                let dr = r.0 - target;
                dl < dr || (dl == dr && l.1 < r.1)
            }
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_left {
            lo -= 1;
            out.push(sorted[lo].1);
        } else {
            out.push(sorted[hi].1);
            hi += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_donor_window() {
        let d = vec![(0.0, 0), (1.0, 1), (2.0, 2), (3.0, 3), (10.0, 4)];
        let mut got = nearest_donors(&d, 2.2, 3);
        got.sort();
        assert_eq!(got, vec![1, 2, 3]);
        assert_eq!(nearest_donors(&d, 100.0, 2), vec![4, 3]);
        assert_eq!(nearest_donors(&d, -5.0, 10).len(), 5);
    }

    #[test]
    fn discrete_gaps_violate_precondition() {
        let d = DataMatrix::from_columns(
            vec!["d".into()],
            vec![vec![Some(1.0), None, Some(0.0)]],
        )
        .unwrap();
        assert!(matches!(
            mice_impute_continuous(&d, &ImputationConfig::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn too_few_observed_violates_precondition() {
        let col: Vec<Option<f64>> = (0..12)
            .map(|i| if i < 5 { Some(i as f64 + 0.5) } else { None })
            .collect();
        let d = DataMatrix::from_columns(vec!["x".into()], vec![col]).unwrap();
        assert!(mice_impute_continuous(&d, &ImputationConfig::default()).is_err());
    }
}
