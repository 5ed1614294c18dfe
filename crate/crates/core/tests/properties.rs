//! Property tests for the structural invariants of each stage.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use bwml::dataset::{
    classify_distribution, little_mcar_test, missingness_profile, summarize, ColumnKind, DataMatrix, Distribution,
    FeatureMatrix,
};
use bwml::evaluation::{
    compute_metrics, kfold_split, leaderboard, EvalRecord, Metrics, PipelineMode,
};
use bwml::imputation::{hybrid_impute, mask_known_entries, ImputationConfig, MaskMechanism};
use bwml::models::linear::{fit_lasso, fit_ols, fit_ridge};
use bwml::models::tree::{TreeBuilder, TreeParams};
use bwml::models::{fit, ModelFamily, ModelSpec};
use bwml::rng;
use bwml::selectors::{
    equal_frequency_bins, kendall_rank, mutual_info_binned, Selector, SelectorConfig, SelectorReport,
};
use bwml::synthgen::{generate_cohort, CohortSpec};

fn normal_cols(seed: u64, n: usize, q: usize) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed);
    let common: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    (0..q)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let e: f64 = r.sample(StandardNormal);
                    10.0 * j as f64 + 3.0 * (0.6 * common[i] + 0.8 * e)
                })
                .collect()
        })
        .collect()
}

fn names(q: usize) -> Vec<String> {
    (0..q).map(|j| format!("f{j}")).collect()
}

fn permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut r = rng::stream(seed);
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, r.random_range(0..=i));
    }
    p
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn masked(seed: u64, n: usize, q: usize, rate: f64) -> DataMatrix {
    let full = DataMatrix::from_complete(names(q), normal_cols(seed, n, q)).unwrap();
    mask_known_entries(&full, rate, MaskMechanism::Mcar, seed ^ 0xabc, None).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn row_permutation_leaves_exploratory_outputs_unchanged(seed in 0u64..10_000) {
        let d = masked(seed, 120, 4, 0.1);
        let p = d.select_rows(&permutation(seed + 1, d.n_rows()));
        let (a, b) = (summarize(&d), summarize(&p));
        for (x, y) in a.columns.iter().zip(&b.columns) {
            prop_assert_eq!(x.count, y.count);
            prop_assert_eq!(x.min, y.min);
            prop_assert_eq!(x.max, y.max);
            prop_assert_eq!(x.median, y.median);
            prop_assert!(close(x.mean.unwrap(), y.mean.unwrap(), 1e-12));
            prop_assert!(close(x.std.unwrap(), y.std.unwrap(), 1e-10));
        }
        prop_assert_eq!(missingness_profile(&d), missingness_profile(&p));
        for c in 0..d.n_cols() {
            let (u, v) = (classify_distribution(&d.observed(c), ColumnKind::Continuous),
                          classify_distribution(&p.observed(c), ColumnKind::Continuous));
            prop_assert_eq!(u.verdict, v.verdict);
        }
        let (u, v) = (little_mcar_test(&d, None).unwrap(), little_mcar_test(&p, None).unwrap());
        prop_assert_eq!(u.df, v.df);
        prop_assert!(close(u.d2, v.d2, 1e-6));
    }

    #[test]
    fn column_permutation_reorders_summaries(seed in 0u64..10_000) {
        let d = masked(seed, 80, 5, 0.1);
        let perm = permutation(seed, 5);
        let p = d.select_columns(&perm);
        let (a, b) = (summarize(&d), summarize(&p));
        for (k, &c) in perm.iter().enumerate() {
            prop_assert_eq!(&a.columns[c], &b.columns[k]);
        }
        let (u, v) = (missingness_profile(&d), missingness_profile(&p));
        for (k, &c) in perm.iter().enumerate() {
            prop_assert_eq!(u.per_column_rate[c], v.per_column_rate[k]);
        }
    }

    #[test]
    fn self_concatenation_keeps_location_summaries(seed in 0u64..10_000) {
        let d = masked(seed, 60, 3, 0.1);
        let rows: Vec<usize> = (0..d.n_rows()).chain(0..d.n_rows()).collect();
        let dd = d.select_rows(&rows);
        for (x, y) in summarize(&d).columns.iter().zip(&summarize(&dd).columns) {
            prop_assert!(close(x.mean.unwrap(), y.mean.unwrap(), 1e-12));
            prop_assert_eq!(x.median, y.median);
            prop_assert_eq!(x.min, y.min);
            prop_assert_eq!(x.max, y.max);
        }
    }

    #[test]
    fn mcar_statistic_is_affine_invariant(seed in 0u64..10_000, a in prop_oneof![-50.0..-0.1f64, 0.1..50.0f64], b in -1e3..1e3f64) {
        let d = masked(seed, 150, 4, 0.12);
        let col = (seed % 4) as usize;
        let mut s = d.clone();
        for i in 0..s.n_rows() {
            if let Some(v) = s.get(i, col) {
                s.set(i, col, a * v + b);
            }
        }
        let (u, v) = (little_mcar_test(&d, None).unwrap(), little_mcar_test(&s, None).unwrap());
        prop_assert!(close(u.d2, v.d2, 1e-8), "{} vs {}", u.d2, v.d2);
    }

    #[test]
    fn non_positive_columns_never_get_positive_families(values in prop::collection::vec(-100.0..100.0f64, 30..200), k in 0usize..30) {
        let mut v = values;
        let i = k % v.len();
        v[i] = -v[i].abs();
        let fit = classify_distribution(&v, ColumnKind::Continuous);
        prop_assert!(!matches!(fit.verdict, Distribution::Lognormal | Distribution::Gamma | Distribution::Exponential));
    }
}

fn mixed_masked(seed: u64) -> DataMatrix {
    let n = 90;
    let mut cols = normal_cols(seed, n, 4);
    cols.push(cols[0].iter().map(|v| if *v < -0.5 { 0.0 } else if *v < 1.0 { 1.0 } else { 2.0 }).collect());
    let full = DataMatrix::from_complete(names(5), cols).unwrap();
    mask_known_entries(&full, 0.1, MaskMechanism::Mar, seed, None).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn imputation_preserves_observed_cells_and_draws_from_observed_values(seed in 0u64..10_000) {
        let d = mixed_masked(seed);
        let cfg = ImputationConfig { mice_cycles: 5, seed, ..Default::default() };
        let res = hybrid_impute(&d, &cfg).unwrap();
        let again = hybrid_impute(&d, &cfg).unwrap();
        prop_assert_eq!(&res.completed, &again.completed);
        for c in 0..d.n_cols() {
            let observed: BTreeSet<u64> = d.observed(c).iter().map(|v| v.to_bits()).collect();
            for i in 0..d.n_rows() {
                let out = res.completed.get(i, c).unwrap();
                match d.get(i, c) {
                    Some(v) => prop_assert_eq!(v.to_bits(), out.to_bits()),
                    None => prop_assert!(observed.contains(&out.to_bits()), "imputed {} not observed in column {}", out, c),
                }
            }
        }
    }
}

#[test]
fn mice_trace_stabilizes() {
    let mut settled = 0;
    for seed in 0..10 {
        let spec = CohortSpec {
            n: 300,
            seed,
            noise_sd: 200.0,
            missing_rate: 0.1,
            ..Default::default()
        };
        let (d, _) = generate_cohort(&spec).unwrap();
        let res = hybrid_impute(&d, &ImputationConfig { mice_cycles: 8, seed, ..Default::default() }).unwrap();
        let t = &res.trace;
        assert_eq!(t.len(), 8);
        let head = t[..3].iter().sum::<f64>() / 3.0;
        let tail = t[t.len() - 3..].iter().sum::<f64>() / 3.0;
        settled += usize::from(tail < head);
    }
    assert_eq!(settled, 10);
}

fn regression(seed: u64, n: usize, q: usize) -> (FeatureMatrix, Vec<f64>) {
    let cols = normal_cols(seed, n, q);
    let mut r = rng::stream(seed ^ 77);
    let y = (0..n)
        .map(|i| 2.0 * cols[0][i] - cols[q - 1][i] + 0.5 * cols[1 % q][i].powi(2) + r.sample::<f64, _>(StandardNormal))
        .collect();
    (FeatureMatrix::new(names(q), cols).unwrap(), y)
}

fn check_prefix(rep: &SelectorReport, p: usize, top_k: usize) -> Result<(), TestCaseError> {
    prop_assert_eq!(rep.ranked_features.len(), top_k.min(p));
    let uniq: BTreeSet<&String> = rep.ranked_features.iter().map(|(n, _)| n).collect();
    prop_assert_eq!(uniq.len(), rep.ranked_features.len());
    prop_assert!(rep.ranked_features.iter().all(|(_, s)| s.is_finite()));
    prop_assert!(rep.ranked_features.windows(2).all(|w| w[0].1 >= w[1].1), "{:?}", rep.ranked_features);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn every_selector_returns_a_valid_prefix(seed in 0u64..10_000, top_k in 1usize..=6) {
        let (x, y) = regression(seed, 80, 6);
        let cfg = SelectorConfig { top_k, bart_trees: 10, bart_burn_in: 20, bart_draws: 40, seed, ..Default::default() };
        for s in Selector::ALL {
            check_prefix(&s.run(&x, &y, &cfg).unwrap(), 6, top_k)?;
        }
    }

    #[test]
    fn filter_rankings_are_affine_invariant(seed in 0u64..10_000, a in 0.01..100.0f64, b in -1e3..1e3f64, col in 0usize..5) {
        let (x, y) = regression(seed, 100, 5);
        let mut cols = x.cols().to_vec();
        cols[col] = cols[col].iter().map(|v| a * v + b).collect();
        let xs = FeatureMatrix::new(x.names().to_vec(), cols.clone()).unwrap();
        let cfg = SelectorConfig { top_k: 5, ..Default::default() };
        for s in [Selector::Pearson, Selector::Kendall, Selector::Anova] {
            prop_assert_eq!(s.run(&x, &y, &cfg).unwrap().feature_names(), s.run(&xs, &y, &cfg).unwrap().feature_names());
        }
        // kendall only sees order
        cols[col] = x.cols()[col].iter().map(|v| (v / 5.0).exp()).collect();
        let xm = FeatureMatrix::new(x.names().to_vec(), cols).unwrap();
        prop_assert_eq!(kendall_rank(&x, &y, &cfg).unwrap(), kendall_rank(&xm, &y, &cfg).unwrap());
    }

    #[test]
    fn binned_mutual_information_is_symmetric(seed in 0u64..10_000, bins in 2usize..12) {
        let (x, y) = regression(seed, 150, 2);
        let a = equal_frequency_bins(x.col(0), bins);
        let b = equal_frequency_bins(&y, bins);
        prop_assert!((mutual_info_binned(&a, &b) - mutual_info_binned(&b, &a)).abs() <= 1e-12);
    }

    #[test]
    fn importance_selectors_emit_probability_vectors(seed in 0u64..10_000) {
        let (x, y) = regression(seed, 80, 5);
        let cfg = SelectorConfig { top_k: 5, bart_trees: 10, bart_burn_in: 20, bart_draws: 40, seed, ..Default::default() };
        for s in [Selector::DecisionTree, Selector::Bart] {
            let rep = s.run(&x, &y, &cfg).unwrap();
            let total: f64 = rep.ranked_features.iter().map(|(_, v)| v).sum();
            prop_assert!(rep.ranked_features.iter().all(|(_, v)| *v >= 0.0));
            prop_assert!((total - 1.0).abs() < 1e-9, "{} sums to {}", s, total);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ols_residuals_are_orthogonal_to_the_design(seed in 0u64..10_000) {
        let (x, y) = regression(seed, 60, 4);
        let f = fit_ols(x.cols(), &y).unwrap();
        let resid: Vec<f64> = (0..y.len())
            .map(|i| y[i] - f.intercept - (0..4).map(|j| f.coef[j] * x.col(j)[i]).sum::<f64>())
            .collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let xnorm = x.cols().iter().map(|c| norm(c).powi(2)).sum::<f64>().sqrt();
        for c in x.cols() {
            let dot: f64 = c.iter().zip(&resid).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-8 * xnorm * norm(&y));
        }
    }

    #[test]
    fn ridge_shrinks_with_the_penalty(seed in 0u64..10_000, l1 in 0.0..20.0f64, dl in 0.0..50.0f64) {
        let (x, y) = regression(seed, 60, 4);
        // standardized design so the raw coefficient norm tracks the penalized one
        let z: Vec<Vec<f64>> = x.cols().iter().map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            let s = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / c.len() as f64).sqrt();
            c.iter().map(|v| (v - m) / s).collect()
        }).collect();
        let norm = |b: &[f64]| b.iter().map(|v| v * v).sum::<f64>();
        let a = fit_ridge(&z, &y, l1).unwrap();
        let b = fit_ridge(&z, &y, l1 + dl).unwrap();
        prop_assert!(norm(&b.coef) <= norm(&a.coef) * (1.0 + 1e-12));
    }

    #[test]
    fn cart_predictions_take_at_most_leaf_count_values(seed in 0u64..10_000, depth in 1usize..6) {
        let (x, y) = regression(seed, 120, 3);
        let t = TreeBuilder::new(x.cols()).fit(&y, &vec![1.0; y.len()], &TreeParams { max_depth: depth, min_leaf: 3, mtry: None }, None);
        let values: BTreeSet<u64> = (0..y.len()).map(|i| t.predict_cols(x.cols(), i).to_bits()).collect();
        prop_assert!(values.len() <= t.n_leaves());
    }

    #[test]
    fn linear_fits_ignore_row_order(seed in 0u64..10_000) {
        let (x, y) = regression(seed, 70, 4);
        let perm = permutation(seed, y.len());
        let xp = x.take_rows(&perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        for fam in [ModelFamily::Ols, ModelFamily::Ridge, ModelFamily::Lasso, ModelFamily::BayesianRidge] {
            let spec = ModelSpec::new(fam, 0);
            let (a, b) = (fit(&spec, &x, &y).unwrap(), fit(&spec, &xp, &yp).unwrap());
            let ((ia, ca), (ib, cb)) = (a.coefficients().unwrap(), b.coefficients().unwrap());
            prop_assert!((ia - ib).abs() <= 1e-10 * ia.abs().max(1.0), "{} intercept {} vs {}", fam, ia, ib);
            for (u, v) in ca.iter().zip(cb) {
                prop_assert!((u - v).abs() <= 1e-10 * u.abs().max(1.0), "{} coef {} vs {}", fam, u, v);
            }
        }
        let (la, _) = fit_lasso(x.cols(), &y, 0.05).unwrap();
        let (lb, _) = fit_lasso(xp.cols(), &yp, 0.05).unwrap();
        for (u, v) in la.coef.iter().zip(&lb.coef) {
            prop_assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0));
        }
    }

    #[test]
    fn folds_are_disjoint_and_exhaustive(n in 10usize..400, folds in 2usize..10, seed in any::<u64>()) {
        prop_assume!(folds <= n);
        let parts = kfold_split(n, folds, seed).unwrap();
        prop_assert_eq!(parts.len(), folds);
        let mut seen = vec![0usize; n];
        for f in &parts {
            for &i in &f.validation {
                seen[i] += 1;
            }
            let val: BTreeSet<usize> = f.validation.iter().copied().collect();
            prop_assert!(f.train.iter().all(|i| !val.contains(i)));
            prop_assert_eq!(f.train.len() + f.validation.len(), n);
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn rmse_squared_is_mse(y in prop::collection::vec(-1e4..1e4f64, 2..100), noise in prop::collection::vec(-500.0..500.0f64, 100)) {
        prop_assume!(y.iter().any(|v| *v != y[0]));
        let p: Vec<f64> = y.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let m = compute_metrics(&y, &p).unwrap();
        prop_assert!(close(m.rmse * m.rmse, m.mse, 1e-12));
    }

    #[test]
    fn leaderboard_argmin_survives_monotone_transforms(rmse in prop::collection::vec(1.0..1e3f64, 1..30), pow in 0.2..3.0f64, shift in 0.0..100.0f64) {
        let record = |k: usize, v: f64| EvalRecord {
            selector_name: format!("s{k}"),
            model_name: "m".into(),
            family: ModelFamily::Ols,
            hyperparameters: Default::default(),
            features: Vec::new(),
            cv_metrics: Metrics { mse: v * v, rmse: v, r2: 0.5 },
            mean_fold_rmse: v,
            holdout_metrics: None,
            residuals: None,
            grid_points: Vec::new(),
            mode: PipelineMode::Paper,
            seed: 0,
            note: String::new(),
        };
        let a: Vec<EvalRecord> = rmse.iter().enumerate().map(|(k, v)| record(k, *v)).collect();
        let b: Vec<EvalRecord> = rmse.iter().enumerate().map(|(k, v)| record(k, v.powf(pow) + shift)).collect();
        prop_assert_eq!(&leaderboard(&a, "x")[0].selector, &leaderboard(&b, "x")[0].selector);
    }
}

/// Pooled over seeds: a single 791-row cohort cannot resolve a 0.1% rate.
#[test]
fn cohort_targets_stay_plausible() {
    let (mut outside, mut total) = (0, 0);
    for seed in 0..20 {
        let spec = CohortSpec {
            seed,
            noise_sd: 183.0,
            ..Default::default()
        };
        let (d, truth) = generate_cohort(&spec).unwrap();
        let y = d.complete_column(d.column_index("fl_bw").unwrap()).unwrap();
        let bad = y.iter().filter(|v| !(500.0..=5500.0).contains(*v)).count();
        assert_eq!(bad, truth.implausible_targets);
        outside += bad;
        total += y.len();
    }
    assert!(outside as f64 <= 0.001 * total as f64, "{outside}/{total} implausible");
}
