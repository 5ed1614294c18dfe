use serde::{Deserialize, Serialize};

use super::{
    classify_distribution, little_mcar_test, missingness_profile, summarize, ColumnKind, DataMatrix,
    Distribution, DistributionFit, McarTestResult, MissingnessProfile, SummaryStats,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionTableRow {
    pub distribution: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnVerdict {
    pub name: String,
    pub kind: ColumnKind,
    pub fit: DistributionFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaReport {
    pub n_rows: usize,
    pub n_cols: usize,
    pub continuous_columns: usize,
    pub discrete_columns: usize,
    pub summary: SummaryStats,
    /// Gaussian, Log-Normal, Uniform, Gamma, Discrete in that order, followed by
    /// the remaining classes when any column received them.
    pub distribution_table: Vec<DistributionTableRow>,
    pub columns: Vec<ColumnVerdict>,
    pub missingness: MissingnessProfile,
    pub mcar: McarTestResult,
}

/// Full exploratory report. Distribution verdicts are also written back into
/// the column metadata of `data`.
pub fn eda_report(data: &mut DataMatrix, mcar_columns: Option<&[usize]>) -> Result<EdaReport> {
    let mut columns = Vec::with_capacity(data.n_cols());
    for c in 0..data.n_cols() {
        let fit = classify_distribution(&data.observed(c), data.kind(c));
        data.set_distribution(c, fit.verdict);
        columns.push(ColumnVerdict {
            name: data.names()[c].clone(),
            kind: data.kind(c),
            fit,
        });
    }
    let count = |d: Distribution| columns.iter().filter(|v| v.fit.verdict == d).count();
    let mut table: Vec<DistributionTableRow> = [
        ("Gaussian (Normal)", Distribution::Gaussian),
        ("Log-Normal", Distribution::Lognormal),
        ("Uniform", Distribution::Uniform),
        ("Gamma", Distribution::Gamma),
        ("Discrete", Distribution::Discrete),
    ]
    .into_iter()
    .map(|(label, d)| DistributionTableRow {
        distribution: label.to_string(),
        count: count(d),
    })
    .collect();
    for (label, d) in [
        ("Exponential", Distribution::Exponential),
        ("Poisson", Distribution::Poisson),
        ("Unknown", Distribution::Unknown),
    ] {
        let c = count(d);
        if c > 0 {
            table.push(DistributionTableRow {
                distribution: label.to_string(),
                count: c,
            });
        }
    }
    let discrete_columns = (0..data.n_cols())
        .filter(|&c| data.kind(c) == ColumnKind::Discrete)
        .count();
    Ok(EdaReport {
        n_rows: data.n_rows(),
        n_cols: data.n_cols(),
        continuous_columns: data.n_cols() - discrete_columns,
        discrete_columns,
        summary: summarize(data),
        distribution_table: table,
        columns,
        missingness: missingness_profile(data),
        mcar: little_mcar_test(data, mcar_columns)?,
    })
}
