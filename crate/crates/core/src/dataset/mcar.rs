//! Little's MCAR test with EM estimates of the multivariate-normal mean and
//! covariance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{ColumnKind, DataMatrix};
use crate::error::{Error, Result};

const EM_MAX_ITER: usize = 100;
const EM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McarTestResult {
    pub d2: f64,
    pub df: usize,
    pub p_value: f64,
    pub applicable: bool,
    pub columns: Vec<String>,
    pub pattern_count: usize,
    pub em_iterations: usize,
    pub em_converged: bool,
    /// Set when a pattern covariance needed ridge stabilisation.
    pub ridge_stabilized: bool,
}

impl McarTestResult {
    fn not_applicable(columns: Vec<String>, pattern_count: usize) -> Self {
        McarTestResult {
            d2: 0.0,
            df: 0,
            p_value: 1.0,
            applicable: false,
            columns,
            pattern_count,
            em_iterations: 0,
            em_converged: false,
            ridge_stabilized: false,
        }
    }
}

struct Pattern {
    observed: Vec<usize>,
    rows: Vec<usize>,
}

/// Inverse and log-determinant of the observed block of `sigma`, ridge
/// stabilised with `1e-8 * trace / p` on failure.
fn block_inverse(sigma: &DMatrix<f64>, idx: &[usize], flag: &mut bool) -> (DMatrix<f64>, f64) {
    let k = idx.len();
    let block = DMatrix::from_fn(k, k, |a, b| sigma[(idx[a], idx[b])]);
    if let Some(ch) = block.clone().cholesky() {
        let logdet = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        return (ch.inverse(), logdet);
    }
    *flag = true;
    let eps = 1e-8 * sigma.trace() / sigma.nrows() as f64;
    let mut b = block;
    let mut bump = eps.max(f64::MIN_POSITIVE);
    loop {
        let mut trial = b.clone();
        for i in 0..k {
            trial[(i, i)] += bump;
        }
        if let Some(ch) = trial.cholesky() {
            let logdet = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            b = ch.inverse();
            return (b, logdet);
        }
        bump *= 10.0;
    }
}

fn nearest_pd(s: DMatrix<f64>) -> DMatrix<f64> {
    if s.clone().cholesky().is_some() {
        return s;
    }
    let p = s.nrows();
    let floor = 1e-6 * (s.trace() / p as f64).abs().max(1e-12);
    let eig = SymmetricEigen::new(s);
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Run Little's test on `columns` (all continuous columns when `None`).
pub fn little_mcar_test(data: &DataMatrix, columns: Option<&[usize]>) -> Result<McarTestResult> {
    let cols: Vec<usize> = match columns {
        Some(c) => {
            for &j in c {
                if j >= data.n_cols() {
                    return Err(Error::invalid(format!("column index {j} out of range")));
                }
                if data.kind(j) != ColumnKind::Continuous {
                    return Err(Error::precondition(format!(
                        "column {:?} is not continuous",
                        data.names()[j]
                    )));
                }
            }
            c.to_vec()
        }
        None => (0..data.n_cols())
            .filter(|&j| data.kind(j) == ColumnKind::Continuous)
            .collect(),
    };
    let names: Vec<String> = cols.iter().map(|&j| data.names()[j].clone()).collect();
    let p = cols.len();
    if p == 0 {
        return Ok(McarTestResult::not_applicable(names, 0));
    }

    // Group rows by pattern; rows with nothing observed carry no information.
    let mut groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for i in 0..data.n_rows() {
        let pat: Vec<bool> = cols.iter().map(|&j| data.is_observed(i, j)).collect();
        if pat.iter().any(|o| *o) {
            groups.entry(pat).or_default().push(i);
        }
    }
    let pattern_count = groups.len();
    let multi = groups.values().filter(|r| r.len() >= 2).count();
    if multi < 2 {
        return Ok(McarTestResult::not_applicable(names, pattern_count));
    }
    let patterns: Vec<Pattern> = groups
        .into_iter()
        // Reverse so the complete pattern (all true) comes first.
        .rev()
        .map(|(pat, rows)| Pattern {
            observed: (0..p).filter(|&k| pat[k]).collect(),
            rows,
        })
        .collect();
    let df_total: isize =
        patterns.iter().map(|pt| pt.observed.len() as isize).sum::<isize>() - p as isize;
    if df_total <= 0 {
        return Ok(McarTestResult::not_applicable(names, pattern_count));
    }

    let x = |i: usize, k: usize| data.get(i, cols[k]).expect("observed by pattern");
    let n_used: usize = patterns.iter().map(|pt| pt.rows.len()).sum();

    // Available-case means and pairwise-complete covariance.
    let mut mu = DVector::zeros(p);
    for k in 0..p {
        let obs = data.observed(cols[k]);
        if obs.is_empty() {
            return Err(Error::ColumnUninferrable(names[k].clone()));
        }
        mu[k] = obs.iter().sum::<f64>() / obs.len() as f64;
    }
    let mut sigma = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let mut s = 0.0;
            let mut cnt = 0usize;
            for i in 0..data.n_rows() {
                if let (Some(u), Some(v)) = (data.get(i, cols[a]), data.get(i, cols[b])) {
                    s += (u - mu[a]) * (v - mu[b]);
                    cnt += 1;
                }
            }
            let c = if cnt > 0 { s / cnt as f64 } else { 0.0 };
            sigma[(a, b)] = c;
            sigma[(b, a)] = c;
        }
    }
    let mut sigma = nearest_pd(sigma);

    let mut ridge_flag = false;
    let mut prev_ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..EM_MAX_ITER {
        iterations += 1;
        let mut t1 = DVector::zeros(p);
        let mut t2 = DMatrix::zeros(p, p);
        let mut ll = 0.0;
        for pt in &patterns {
            let o = &pt.observed;
            let m: Vec<usize> = (0..p).filter(|k| !o.contains(k)).collect();
            let (inv_oo, logdet) = block_inverse(&sigma, o, &mut ridge_flag);
            let s_mo = DMatrix::from_fn(m.len(), o.len(), |a, b| sigma[(m[a], o[b])]);
            let reg = &s_mo * &inv_oo;
            let cond_cov = if m.is_empty() {
                DMatrix::zeros(0, 0)
            } else {
                let s_mm = DMatrix::from_fn(m.len(), m.len(), |a, b| sigma[(m[a], m[b])]);
                s_mm - &reg * s_mo.transpose()
            };
            for &i in &pt.rows {
                let dev = DVector::from_fn(o.len(), |a, _| x(i, o[a]) - mu[o[a]]);
                ll -= 0.5
                    * (o.len() as f64 * 1.837_877_066_409_345_5
                        + logdet
                        + dev.dot(&(&inv_oo * &dev)));
                let mut full = DVector::zeros(p);
                for &k in o {
                    full[k] = x(i, k);
                }
                if !m.is_empty() {
                    let fill = &reg * &dev;
                    for (a, &k) in m.iter().enumerate() {
                        full[k] = mu[k] + fill[a];
                    }
                }
                t1 += &full;
                t2 += &full * full.transpose();
                for (a, &ka) in m.iter().enumerate() {
                    for (b, &kb) in m.iter().enumerate() {
                        t2[(ka, kb)] += cond_cov[(a, b)];
                    }
                }
            }
        }
        let gain = ll - prev_ll;
        let nf = n_used as f64;
        mu = t1 / nf;
        sigma = t2 / nf - &mu * mu.transpose();
        sigma = (&sigma + sigma.transpose()) * 0.5;
        if gain.is_finite() && gain < EM_TOL {
            converged = true;
            break;
        }
        prev_ll = ll;
    }

    let mut d2 = 0.0;
    for pt in &patterns {
        let o = &pt.observed;
        let nj = pt.rows.len() as f64;
        let (inv_oo, _) = block_inverse(&sigma, o, &mut ridge_flag);
        let diff = DVector::from_fn(o.len(), |a, _| {
            pt.rows.iter().map(|&i| x(i, o[a])).sum::<f64>() / nj - mu[o[a]]
        });
        d2 += nj * diff.dot(&(&inv_oo * &diff));
    }
    let df = df_total as usize;
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let p_value = chi.sf(d2).clamp(0.0, 1.0);
    Ok(McarTestResult {
        d2,
        df,
        p_value,
        applicable: true,
        columns: names,
        pattern_count,
        em_iterations: iterations,
        em_converged: converged,
        ridge_stabilized: ridge_flag,
    })
}
