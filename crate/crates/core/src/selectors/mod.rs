//! Supervised feature selectors emitting ranked top-K reports, and consensus
//! aggregation across selectors.

mod bart;
mod consensus;
mod embedded;
mod filter;
mod mars;
mod wrapper;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};

pub use bart::{bart_select, BartDiagnostics};
pub use consensus::{consensus_rank, ConsensusEntry, ConsensusReport};
pub use embedded::{lasso_select, ridge_rank, tree_importance_rank};
pub use filter::{
    anova_f_rank, binned_entropy, equal_frequency_bins, inmifs_select, kendall_rank, kendall_tau_b,
    mutual_info_binned, mutual_info_rank, pearson_r, pearson_rank,
};
pub use mars::{mars_fit, mars_select, MarsFit, MarsTerm};
pub use wrapper::{forward_select, rfe_select};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorConfig {
    pub top_k: usize,
    pub mi_bins: usize,
    pub cv_folds: usize,
    pub lasso_path_len: usize,
    pub bart_trees: usize,
    pub bart_burn_in: usize,
    pub bart_draws: usize,
    pub mars_max_terms: usize,
    pub seed: u64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            top_k: 20,
            mi_bins: 10,
            cv_folds: 5,
            lasso_path_len: 50,
            bart_trees: 50,
            bart_burn_in: 200,
            bart_draws: 500,
            mars_max_terms: 40,
            seed: 0,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::invalid("top_k must be >= 1"));
        }
        if self.top_k > p {
            return Err(Error::invalid(format!("top_k={} exceeds {p} features", self.top_k)));
        }
        if self.mi_bins < 2 {
            return Err(Error::invalid("mi_bins must be >= 2"));
        }
        if self.cv_folds < 2 {
            return Err(Error::invalid("cv_folds must be >= 2"));
        }
        if self.lasso_path_len < 2 {
            return Err(Error::invalid("lasso_path_len must be >= 2"));
        }
        if self.bart_trees == 0 || self.bart_draws == 0 {
            return Err(Error::invalid("bart_trees and bart_draws must be >= 1"));
        }
        if self.mars_max_terms < 2 {
            return Err(Error::invalid("mars_max_terms must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorReport {
    pub selector_name: String,
    pub ranked_features: Vec<(String, f64)>,
    /// Leading entries actually chosen by the method. Any remaining entries
    /// are zero-score fillers in column order.
    pub n_selected: usize,
    pub metadata: BTreeMap<String, Value>,
}

impl SelectorReport {
    pub fn feature_names(&self) -> Vec<String> {
        self.ranked_features.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Features chosen by the method, in rank order.
    pub fn selected(&self) -> Vec<String> {
        self.ranked_features[..self.n_selected]
            .iter()
            .map(|(n, _)| n.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Pearson,
    Anova,
    MutualInfo,
    Kendall,
    Inmifs,
    Forward,
    Rfe,
    Lasso,
    Ridge,
    DecisionTree,
    Mars,
    Bart,
}

impl Selector {
    pub const ALL: [Selector; 12] = [
        Selector::Pearson,
        Selector::Anova,
        Selector::MutualInfo,
        Selector::Kendall,
        Selector::Inmifs,
        Selector::Forward,
        Selector::Rfe,
        Selector::Lasso,
        Selector::Ridge,
        Selector::DecisionTree,
        Selector::Mars,
        Selector::Bart,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Selector::Pearson => "pearson",
            Selector::Anova => "anova",
            Selector::MutualInfo => "mutual_info",
            Selector::Kendall => "kendall",
            Selector::Inmifs => "inmifs",
            Selector::Forward => "forward",
            Selector::Rfe => "rfe",
            Selector::Lasso => "lasso",
            Selector::Ridge => "ridge",
            Selector::DecisionTree => "decision_tree",
            Selector::Mars => "mars",
            Selector::Bart => "bart",
        }
    }

    pub fn run(self, x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
        if y.len() != x.n_rows() {
            return Err(Error::invalid(format!(
                "target has {} rows, features have {}",
                y.len(),
                x.n_rows()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite target at row {}", i + 1)));
        }
        config.validate(x.n_cols())?;
        match self {
            Selector::Pearson => pearson_rank(x, y, config),
            Selector::Anova => anova_f_rank(x, y, config),
            Selector::MutualInfo => mutual_info_rank(x, y, config),
            Selector::Kendall => kendall_rank(x, y, config),
            Selector::Inmifs => inmifs_select(x, y, config),
            Selector::Forward => forward_select(x, y, config),
            Selector::Rfe => rfe_select(x, y, config),
            Selector::Lasso => lasso_select(x, y, config),
            Selector::Ridge => ridge_rank(x, y, config),
            Selector::DecisionTree => tree_importance_rank(x, y, config),
            Selector::Mars => mars_select(x, y, config),
            Selector::Bart => bart_select(x, y, config),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Selector::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown selector {s:?}")))
    }
}

/// Sort by score descending with ties by column index, keep `top_k`.
pub(crate) fn rank_by_score(names: &[String], scores: &[f64], top_k: usize) -> Vec<(String, f64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.into_iter()
        .take(top_k)
        .map(|j| (names[j].clone(), scores[j]))
        .collect()
}

/// Ordered picks followed by the unpicked features at score zero in column
/// order, truncated to `top_k`.
pub(crate) fn ordered_with_fill(
    names: &[String],
    picks: &[(usize, f64)],
    top_k: usize,
) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = picks.iter().map(|(j, s)| (names[*j].clone(), *s)).collect();
    let taken: std::collections::HashSet<usize> = picks.iter().map(|(j, _)| *j).collect();
    for (j, n) in names.iter().enumerate() {
        if out.len() >= top_k {
            break;
        }
        if !taken.contains(&j) {
            out.push((n.clone(), 0.0));
        }
    }
    out.truncate(top_k);
    out
}

pub(crate) fn report(
    selector: Selector,
    ranked_features: Vec<(String, f64)>,
    metadata: BTreeMap<String, Value>,
) -> SelectorReport {
    SelectorReport {
        selector_name: selector.as_str().to_string(),
        n_selected: ranked_features.len(),
        ranked_features,
        metadata,
    }
}

/// Report for a method whose zero scores mean "not selected".
pub(crate) fn sparse_report(
    selector: Selector,
    ranked_features: Vec<(String, f64)>,
    metadata: BTreeMap<String, Value>,
) -> SelectorReport {
    let mut r = report(selector, ranked_features, metadata);
    r.n_selected = r.ranked_features.iter().take_while(|(_, s)| *s > 0.0).count();
    r
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;

    /// `n` rows of `p` independent uniform features; y = sum_j w_j x_j + noise.
    pub fn linear_fixture(n: usize, p: usize, weights: &[(usize, f64)], noise: f64, seed: u64) -> (FeatureMatrix, Vec<f64>) {
        let mut r = crate::rng::stream(seed);
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| r.random::<f64>()).collect()).collect();
        let y = (0..n)
            .map(|i| weights.iter().map(|(j, w)| w * cols[*j][i]).sum::<f64>() + noise * (r.random::<f64>() - 0.5))
            .collect();
        (FeatureMatrix::from_cols(cols).unwrap(), y)
    }

    pub fn check_report(rep: &SelectorReport, p: usize, top_k: usize) {
        assert_eq!(rep.ranked_features.len(), top_k.min(p));
        let mut seen = std::collections::HashSet::new();
        for w in rep.ranked_features.windows(2) {
            assert!(w[0].1 >= w[1].1, "{}: scores not non-increasing", rep.selector_name);
        }
        for (n, s) in &rep.ranked_features {
            assert!(s.is_finite());
            assert!(seen.insert(n.clone()), "duplicate {n}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Selector::ALL {
            assert_eq!(s.as_str().parse::<Selector>().unwrap(), s);
        }
        assert!("boruta".parse::<Selector>().is_err());
    }

    #[test]
    fn every_selector_emits_a_valid_prefix() {
        let (x, y) = testutil::linear_fixture(120, 8, &[(1, 3.0), (4, 1.0)], 0.5, 1);
        let cfg = SelectorConfig {
            top_k: 5,
            bart_burn_in: 20,
            bart_draws: 40,
            ..Default::default()
        };
        for s in Selector::ALL {
            let rep = s.run(&x, &y, &cfg).unwrap();
            testutil::check_report(&rep, 8, 5);
            assert_eq!(rep.ranked_features[0].0, "x1", "{s}");
        }
    }

    #[test]
    fn top_k_above_p_is_rejected() {
        let (x, y) = testutil::linear_fixture(30, 3, &[(0, 1.0)], 0.1, 2);
        let cfg = SelectorConfig { top_k: 4, ..Default::default() };
        assert!(Selector::Pearson.run(&x, &y, &cfg).is_err());
    }
}
