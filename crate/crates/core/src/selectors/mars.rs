//! Additive MARS: forward addition of mirrored hinge pairs, backward pruning
//! by GCV.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{rank_by_score, sparse_report, Selector, SelectorConfig, SelectorReport};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg;

/// Cost charged per knot in the effective parameter count.
const KNOT_PENALTY: f64 = 3.0;

/// `max(0, sign * (x[feature] - knot))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarsTerm {
    pub feature: usize,
    pub knot: f64,
    pub sign: f64,
}

impl MarsTerm {
    pub fn eval(&self, x: f64) -> f64 {
        (self.sign * (x - self.knot)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarsFit {
    pub intercept: f64,
    pub terms: Vec<MarsTerm>,
    pub coef: Vec<f64>,
    pub rss: f64,
    pub gcv: f64,
    /// GCV of the forward model followed by each backward deletion.
    pub gcv_path: Vec<f64>,
    pub forward_terms: usize,
    /// GCV increase from deleting each surviving term alone.
    pub term_gcv_increase: Vec<f64>,
}

impl MarsFit {
    pub fn predict_cols(&self, cols: &[Vec<f64>], row: usize) -> f64 {
        self.intercept
            + self
                .terms
                .iter()
                .zip(&self.coef)
                .map(|(t, b)| b * t.eval(cols[t.feature][row]))
                .sum::<f64>()
    }
}

fn gcv(rss: f64, n: usize, m: usize) -> f64 {
    let nf = n as f64;
    let c = m as f64 + KNOT_PENALTY * (m as f64 - 1.0) / 2.0;
    if c >= nf {
        return f64::INFINITY;
    }
    rss / (nf * (1.0 - c / nf).powi(2))
}

struct Candidate {
    reduction: f64,
    feature: usize,
    knot: f64,
    use_pos: bool,
    use_neg: bool,
}

fn orthonormalize(q: &[Vec<f64>], mut v: Vec<f64>) -> Option<Vec<f64>> {
    let before = linalg::dot(&v, &v).sqrt();
    for _ in 0..2 {
        for b in q {
            let d = linalg::dot(b, &v);
            for (a, bi) in v.iter_mut().zip(b) {
                *a -= d * bi;
            }
        }
    }
    let norm = linalg::dot(&v, &v).sqrt();
    if !(norm > 1e-9 * before) {
        return None;
    }
    v.iter_mut().for_each(|a| *a /= norm);
    Some(v)
}

fn best_for_feature(x: &[f64], order: &[usize], q: &[Vec<f64>], r: &[f64], feature: usize) -> Option<Candidate> {
    let n = x.len();
    let m = q.len();
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    // prefix sums (exclusive) over sorted positions for w in {r, q_0..}
    let nv = m + 1;
    let mut pw = vec![0.0; nv * (n + 1)];
    let mut pxw = vec![0.0; nv * (n + 1)];
    for v in 0..nv {
        let w = if v == 0 { r } else { &q[v - 1] };
        let base = v * (n + 1);
        for k in 0..n {
            let i = order[k];
            pw[base + k + 1] = pw[base + k] + w[i];
            pxw[base + k + 1] = pxw[base + k] + xs[k] * w[i];
        }
    }
    let mut p1 = vec![0.0; n + 1];
    let mut px = vec![0.0; n + 1];
    let mut pxx = vec![0.0; n + 1];
    for k in 0..n {
        p1[k + 1] = p1[k] + 1.0;
        px[k + 1] = px[k] + xs[k];
        pxx[k + 1] = pxx[k] + xs[k] * xs[k];
    }
    let mut best: Option<Candidate> = None;
    let mut a1 = vec![0.0; m];
    let mut a2 = vec![0.0; m];
    let mut s = 0;
    while s < n {
        let mut e = s;
        while e + 1 < n && xs[e + 1] == xs[s] {
            e += 1;
        }
        let t = xs[s];
        // rows above the knot: positions e+1..n; below: 0..s
        let (hi, lo) = (e + 1, s);
        if hi >= n {
            break;
        }
        let suf = |arr: &[f64], base: usize| arr[base + n] - arr[base + hi];
        let pre = |arr: &[f64], base: usize| arr[base + lo];
        let b1b1 = (pxx[n] - pxx[hi]) - 2.0 * t * (px[n] - px[hi]) + t * t * (p1[n] - p1[hi]);
        let b2b2 = pxx[lo] - 2.0 * t * px[lo] + t * t * p1[lo];
        let u1 = suf(&pxw, 0) - t * suf(&pw, 0);
        let u2 = t * pre(&pw, 0) - pre(&pxw, 0);
        let (mut n1, mut n2, mut c12) = (0.0, 0.0, 0.0);
        for v in 0..m {
            let base = (v + 1) * (n + 1);
            a1[v] = suf(&pxw, base) - t * suf(&pw, base);
            a2[v] = t * pre(&pw, base) - pre(&pxw, base);
            n1 += a1[v] * a1[v];
            n2 += a2[v] * a2[v];
            c12 -= a1[v] * a2[v];
        }
        let c11 = b1b1 - n1;
        let c22 = b2b2 - n2;
        let ok1 = b1b1 > 0.0 && c11 > 1e-9 * b1b1;
        let ok2 = b2b2 > 0.0 && c22 > 1e-9 * b2b2;
        let mut cand: Option<(f64, bool, bool)> = None;
        if ok1 && ok2 {
            let det = c11 * c22 - c12 * c12;
            if det > 1e-9 * c11 * c22 {
                cand = Some(((c22 * u1 * u1 - 2.0 * c12 * u1 * u2 + c11 * u2 * u2) / det, true, true));
            }
        }
        if cand.is_none() {
            let r1 = if ok1 { u1 * u1 / c11 } else { -1.0 };
            let r2 = if ok2 { u2 * u2 / c22 } else { -1.0 };
            if r1 >= 0.0 || r2 >= 0.0 {
                cand = Some(if r1 >= r2 { (r1, true, false) } else { (r2, false, true) });
            }
        }
        if let Some((red, p, q_)) = cand {
            if best.as_ref().map_or(true, |b| red > b.reduction) {
                best = Some(Candidate {
                    reduction: red,
                    feature,
                    knot: t,
                    use_pos: p,
                    use_neg: q_,
                });
            }
        }
        s = e + 1;
    }
    best
}

/// RSS of every single-term deletion from `active` (indices into the basis,
/// 0 = intercept and never deleted), plus the RSS of `active` itself.
fn deletion_rss(g: &DMatrix<f64>, c: &DVector<f64>, yy: f64, active: &[usize]) -> (f64, Vec<f64>, DVector<f64>) {
    let k = active.len();
    let mut sub = DMatrix::from_fn(k, k, |a, b| g[(active[a], active[b])]);
    let rhs = DVector::from_fn(k, |a, _| c[active[a]]);
    let inv = match sub.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => {
            for a in 0..k {
                sub[(a, a)] *= 1.0 + 1e-10;
            }
            sub.clone().try_inverse().unwrap_or_else(|| DMatrix::identity(k, k))
        }
    };
    let beta = &inv * &rhs;
    let rss = (yy - beta.dot(&rhs)).max(0.0);
    let del = (0..k)
        .map(|a| if a == 0 { f64::INFINITY } else { rss + beta[a] * beta[a] / inv[(a, a)] })
        .collect();
    (rss, del, beta)
}

pub fn mars_fit(cols: &[Vec<f64>], y: &[f64], max_terms: usize) -> Result<MarsFit> {
    let n = y.len();
    if n < 10 {
        return Err(Error::precondition(format!("mars: insufficient rows ({n} < 10)")));
    }
    let p = cols.len();
    let orders: Vec<Vec<usize>> = cols
        .iter()
        .map(|c| {
            let mut o: Vec<usize> = (0..n).collect();
            o.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
            o
        })
        .collect();
    let (_, mut r) = linalg::center(y);
    let tss = linalg::dot(&r, &r);
    let mut q: Vec<Vec<f64>> = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let mut terms: Vec<MarsTerm> = Vec::new();
    while terms.len() < max_terms && tss > 0.0 {
        let rss = linalg::dot(&r, &r);
        if rss <= 1e-20 * tss {
            break;
        }
        let mut best: Option<Candidate> = None;
        for j in 0..p {
            if let Some(c) = best_for_feature(&cols[j], &orders[j], &q, &r, j) {
                if best.as_ref().map_or(true, |b| c.reduction > b.reduction) {
                    best = Some(c);
                }
            }
        }
        let Some(b) = best else { break };
        if !(b.reduction > 1e-12 * tss) {
            break;
        }
        let mut added = false;
        for (use_it, sign) in [(b.use_pos, 1.0), (b.use_neg, -1.0)] {
            if !use_it || terms.len() >= max_terms {
                continue;
            }
            let t = MarsTerm {
                feature: b.feature,
                knot: b.knot,
                sign,
            };
            let v: Vec<f64> = cols[b.feature].iter().map(|x| t.eval(*x)).collect();
            if let Some(u) = orthonormalize(&q, v) {
                let d = linalg::dot(&u, &r);
                for (ri, ui) in r.iter_mut().zip(&u) {
                    *ri -= d * ui;
                }
                q.push(u);
                terms.push(t);
                added = true;
            }
        }
        if !added {
            break;
        }
    }

    // backward pass on norm-scaled raw basis
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for t in &terms {
        basis.push(cols[t.feature].iter().map(|x| t.eval(*x)).collect());
    }
    let scale: Vec<f64> = basis.iter().map(|b| linalg::dot(b, b).sqrt().max(f64::MIN_POSITIVE)).collect();
    for (b, s) in basis.iter_mut().zip(&scale) {
        b.iter_mut().for_each(|v| *v /= s);
    }
    let g = linalg::gram(&basis);
    let c = linalg::xty(&basis, y);
    let yy = linalg::dot(y, y);
    let mut active: Vec<usize> = (0..basis.len()).collect();
    let (rss0, _, _) = deletion_rss(&g, &c, yy, &active);
    let mut gcv_path = vec![gcv(rss0, n, active.len())];
    let mut best_set = active.clone();
    let mut best_gcv = gcv_path[0];
    while active.len() > 1 {
        let (_, del, _) = deletion_rss(&g, &c, yy, &active);
        let mut drop = 1;
        for a in 2..active.len() {
            if del[a] < del[drop] {
                drop = a;
            }
        }
        active.remove(drop);
        let (rss, _, _) = deletion_rss(&g, &c, yy, &active);
        let v = gcv(rss, n, active.len());
        gcv_path.push(v);
        if v <= best_gcv {
            best_gcv = v;
            best_set = active.clone();
        }
    }
    let (_, del, beta) = deletion_rss(&g, &c, yy, &best_set);
    let final_terms: Vec<MarsTerm> = best_set[1..].iter().map(|&k| terms[k - 1]).collect();
    let coef: Vec<f64> = (1..best_set.len()).map(|a| beta[a] / scale[best_set[a]]).collect();
    let intercept = beta[0] / scale[0];
    let increase: Vec<f64> = (1..best_set.len())
        .map(|a| (gcv(del[a], n, best_set.len() - 1) - best_gcv).max(0.0))
        .collect();
    let mut fit = MarsFit {
        intercept,
        terms: final_terms,
        coef,
        rss: 0.0,
        gcv: best_gcv,
        gcv_path,
        forward_terms: terms.len(),
        term_gcv_increase: increase,
    };
    fit.rss = (0..n).map(|i| (y[i] - fit.predict_cols(cols, i)).powi(2)).sum();
    Ok(fit)
}

pub fn mars_select(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let fit = mars_fit(x.cols(), y, config.mars_max_terms)?;
    let mut scores = vec![0.0; x.n_cols()];
    for (t, inc) in fit.terms.iter().zip(&fit.term_gcv_increase) {
        scores[t.feature] += inc;
    }
    let mut meta = BTreeMap::new();
    meta.insert("forward_terms".into(), json!(fit.forward_terms));
    meta.insert("final_terms".into(), json!(fit.terms.len()));
    meta.insert("gcv".into(), json!(fit.gcv));
    Ok(sparse_report(Selector::Mars, rank_by_score(x.names(), &scores, config.top_k), meta))
}
