//! Filter selectors: correlation, univariate F, binned mutual information,
//! Kendall's tau-b and incremental max-min normalized MI.

use std::collections::BTreeMap;

use serde_json::json;

use super::{ordered_with_fill, rank_by_score, report, Selector, SelectorConfig, SelectorReport};
use crate::dataset::FeatureMatrix;
use crate::error::Result;

/// Sample Pearson correlation; zero when either side is constant.
pub fn pearson_r(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

pub fn pearson_rank(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let scores: Vec<f64> = x.cols().iter().map(|c| pearson_r(c, y).abs()).collect();
    Ok(report(
        Selector::Pearson,
        rank_by_score(x.names(), &scores, config.top_k),
        BTreeMap::new(),
    ))
}

pub fn anova_f_rank(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let n = y.len() as f64;
    if y.len() < 3 {
        return Err(crate::Error::invalid("anova needs at least 3 rows"));
    }
    let mut perfect = Vec::new();
    let scores: Vec<f64> = x
        .cols()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let r2 = pearson_r(c, y).powi(2);
            if 1.0 - r2 <= 4.0 * f64::EPSILON {
                perfect.push(x.names()[j].clone());
                f64::MAX
            } else {
                (n - 2.0) * r2 / (1.0 - r2)
            }
        })
        .collect();
    let mut meta = BTreeMap::new();
    if !perfect.is_empty() {
        meta.insert("perfect_fit_features".into(), json!(perfect));
    }
    Ok(report(Selector::Anova, rank_by_score(x.names(), &scores, config.top_k), meta))
}

/// Equal-frequency bin labels in `0..bins`. Tied values share the bin of
/// their lowest rank, so a column with few levels uses fewer bins.
pub fn equal_frequency_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut out = vec![0; n];
    let mut k = 0;
    while k < n {
        let mut e = k;
        while e + 1 < n && x[idx[e + 1]] == x[idx[k]] {
            e += 1;
        }
        let b = (k * bins / n).min(bins - 1);
        for &i in &idx[k..=e] {
            out[i] = b;
        }
        k = e + 1;
    }
    out
}

/// Plug-in entropy in nats of a label vector.
pub fn binned_entropy(a: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut counts = BTreeMap::new();
    for v in a {
        *counts.entry(*v).or_insert(0usize) += 1;
    }
    -counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Plug-in mutual information in nats between two label vectors.
pub fn mutual_info_binned(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![0usize; ka * kb];
    let mut ca = vec![0usize; ka];
    let mut cb = vec![0usize; kb];
    for (&u, &v) in a.iter().zip(b) {
        joint[u * kb + v] += 1;
        ca[u] += 1;
        cb[v] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for u in 0..ka {
        for v in 0..kb {
            let c = joint[u * kb + v];
            if c > 0 {
                // symmetric in (a, b): the marginal product is formed as an
                // integer before dividing
                let denom = (ca[u] * cb[v]) as f64;
                mi += c as f64 / nf * (c as f64 * nf / denom).ln();
            }
        }
    }
    mi.max(0.0)
}

pub fn mutual_info_rank(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let by = equal_frequency_bins(y, config.mi_bins);
    let scores: Vec<f64> = x
        .cols()
        .iter()
        .map(|c| mutual_info_binned(&equal_frequency_bins(c, config.mi_bins), &by))
        .collect();
    let mut meta = BTreeMap::new();
    meta.insert("bins".into(), json!(config.mi_bins));
    Ok(report(Selector::MutualInfo, rank_by_score(x.names(), &scores, config.top_k), meta))
}

fn tie_pairs_sorted(v: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for k in 1..=v.len() {
        if k < v.len() && v[k] == v[k - 1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total
}

/// Merge sort counting strict inversions.
fn sort_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count(&mut v[..mid], &mut buf[..mid]) + sort_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    let k2 = k + mid - i;
    buf[k2..n].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b by Knight's O(n log n) algorithm; counts are exact
/// integers. Returns 0 when either side is entirely tied.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tie_pairs_sorted(&xs);
    let mut n3 = 0u64;
    let mut run = 1u64;
    for k in 1..=n {
        if k < n && xs[k] == xs[k - 1] && ys[k] == ys[k - 1] {
            run += 1;
        } else {
            n3 += run * (run - 1) / 2;
            run = 1;
        }
    }
    let mut buf = vec![0.0; n];
    let swaps = sort_count(&mut ys, &mut buf);
    let n2 = tie_pairs_sorted(&ys);
    if n1 == n0 || n2 == n0 {
        return 0.0;
    }
    let s = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    s as f64 / (((n0 - n1) as f64) * ((n0 - n2) as f64)).sqrt()
}

pub fn kendall_rank(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let scores: Vec<f64> = x.cols().iter().map(|c| kendall_tau_b(c, y).abs()).collect();
    Ok(report(Selector::Kendall, rank_by_score(x.names(), &scores, config.top_k), BTreeMap::new()))
}

fn normalized_mi(a: &[usize], ha: f64, b: &[usize], hb: f64) -> f64 {
    let h = ha.min(hb);
    if h <= 0.0 {
        0.0
    } else {
        mutual_info_binned(a, b) / h
    }
}

/// Greedy selection by NI(x; y) minus the largest NI(x; s) over already
/// selected s, with NI(a; b) = MI(a; b) / min(H(a), H(b)).
pub fn inmifs_select(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let p = x.n_cols();
    let bins: Vec<Vec<usize>> = x.cols().iter().map(|c| equal_frequency_bins(c, config.mi_bins)).collect();
    let h: Vec<f64> = bins.iter().map(|b| binned_entropy(b)).collect();
    let by = equal_frequency_bins(y, config.mi_bins);
    let hy = binned_entropy(&by);
    let relevance: Vec<f64> = (0..p).map(|j| normalized_mi(&bins[j], h[j], &by, hy)).collect();
    let mut redundancy = vec![f64::NEG_INFINITY; p];
    let mut chosen = vec![false; p];
    let mut picks: Vec<(usize, f64)> = Vec::with_capacity(config.top_k);
    while picks.len() < config.top_k {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..p {
            if chosen[j] {
                continue;
            }
            let c = if picks.is_empty() { relevance[j] } else { relevance[j] - redundancy[j] };
            if best.map_or(true, |(_, b)| c > b) {
                best = Some((j, c));
            }
        }
        let Some((j, c)) = best else { break };
        chosen[j] = true;
        picks.push((j, c));
        for k in 0..p {
            if !chosen[k] {
                redundancy[k] = redundancy[k].max(normalized_mi(&bins[k], h[k], &bins[j], h[j]));
            }
        }
    }
    let mut meta = BTreeMap::new();
    meta.insert(
        "criterion".into(),
        json!("NI(x;y) - max_s NI(x;s), NI = MI / min(H)"),
    );
    meta.insert("bins".into(), json!(config.mi_bins));
    let mut rep = report(Selector::Inmifs, ordered_with_fill(x.names(), &picks, config.top_k), meta);
    rep.n_selected = picks.len();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut s, mut tx, mut ty) = (0i64, 0u64, 0u64);
        for i in 0..n {
            for j in i + 1..n {
                let dx = (x[i] - x[j]).signum() as i64 * (x[i] != x[j]) as i64;
                let dy = (y[i] - y[j]).signum() as i64 * (y[i] != y[j]) as i64;
                s += dx * dy;
                tx += (x[i] == x[j]) as u64;
                ty += (y[i] == y[j]) as u64;
            }
        }
        let n0 = (n * (n - 1) / 2) as u64;
        s as f64 / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt()
    }

    #[test]
    fn pearson_hand_value() {
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).abs() - 0.5).abs() < 1e-15);
        assert_eq!(pearson_r(&[1.0, 1.0, 1.0], &[3.0, 1.0, 2.0]), 0.0);
    }

    #[test]
    fn kendall_fixture_matches_brute_force() {
        let x = [1.0, 2.0, 2.0, 3.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        assert_eq!(kendall_tau_b(&x, &y), brute_tau_b(&x, &y));
        let inc: Vec<f64> = (0..10).map(f64::from).collect();
        let dec: Vec<f64> = inc.iter().map(|v| -v).collect();
        assert_eq!(kendall_tau_b(&inc, &inc), 1.0);
        assert_eq!(kendall_tau_b(&inc, &dec), -1.0);
        assert_eq!(kendall_tau_b(&[2.0; 5], &inc[..5]), 0.0);
    }

    #[test]
    fn kendall_with_many_ties_matches_brute_force() {
        let mut r = crate::rng::stream(4);
        for _ in 0..20 {
            let x: Vec<f64> = (0..60).map(|_| f64::from(r.random_range(0..5u8))).collect();
            let y: Vec<f64> = (0..60).map(|_| f64::from(r.random_range(0..4u8))).collect();
            assert_eq!(kendall_tau_b(&x, &y), brute_tau_b(&x, &y));
        }
    }

    #[test]
    fn mi_of_balanced_binary_copy_is_ln2() {
        let x: Vec<f64> = (0..100).map(|i| f64::from(i % 2)).collect();
        let b = equal_frequency_bins(&x, 10);
        assert!((mutual_info_binned(&b, &b) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bins_are_equal_frequency() {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        let b = equal_frequency_bins(&x, 10);
        for k in 0..10 {
            assert_eq!(b.iter().filter(|v| **v == k).count(), 10);
        }
    }

    #[test]
    fn anova_hand_value() {
        // r = 0.5 exactly is awkward to build; check the transform directly
        let n = 102.0;
        let r2: f64 = 0.25;
        assert!(((n - 2.0) * r2 / (1.0 - r2) - 100.0 / 3.0).abs() < 1e-12);
        let x = FeatureMatrix::from_cols(vec![vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let rep = anova_f_rank(&x, &[2.0, 4.0, 6.0, 8.0], &SelectorConfig { top_k: 1, ..Default::default() }).unwrap();
        assert_eq!(rep.ranked_features[0].1, f64::MAX);
        assert!(rep.metadata.contains_key("perfect_fit_features"));
    }

    #[test]
    fn inmifs_prefers_novel_feature_over_duplicate() {
        let mut r = crate::rng::stream(8);
        let n = 2000;
        let a: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|i| 3.0 * a[i] + b[i]).collect();
        let x = FeatureMatrix::new(
            vec!["a".into(), "a_copy".into(), "b".into()],
            vec![a.clone(), a, b],
        )
        .unwrap();
        let rep = inmifs_select(&x, &y, &SelectorConfig { top_k: 3, ..Default::default() }).unwrap();
        let names = rep.feature_names();
        assert_eq!(names, vec!["a", "b", "a_copy"]);
        assert!(rep.ranked_features[2].1 <= 0.0);
    }
}
