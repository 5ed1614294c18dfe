//! Tabular data with an explicit observation mask, plus the exploratory
//! diagnostics run before imputation: summary statistics, distribution
//! classification, missingness profiling and Little's MCAR test.
//!
//! Missing cells are never exposed: every accessor goes through the mask and
//! returns `Option<f64>` or only the observed values.

mod csvio;
mod distribution;
mod eda;
mod features;
mod mcar;
mod missingness;
mod summary;

pub use csvio::{load_csv, read_csv, write_csv, write_csv_to};
pub use distribution::{classify_distribution, DistributionFit, MIN_CLASSIFY_OBS};
pub use eda::{eda_report, DistributionTableRow, EdaReport};
pub use features::FeatureMatrix;
pub use mcar::{little_mcar_test, McarTestResult};
pub use missingness::{missingness_profile, MissingnessProfile};
pub use summary::{summarize, ColumnSummary, SummaryStats};

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distinct-value ceiling for an all-integer column to be typed as discrete.
pub const DISCRETE_MAX_DISTINCT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    Lognormal,
    Gamma,
    Exponential,
    Uniform,
    Poisson,
    Discrete,
    Unknown,
}

impl Distribution {
    pub fn is_discrete(self) -> bool {
        matches!(self, Distribution::Discrete | Distribution::Poisson)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Distribution::Gaussian => "gaussian",
            Distribution::Lognormal => "lognormal",
            Distribution::Gamma => "gamma",
            Distribution::Exponential => "exponential",
            Distribution::Uniform => "uniform",
            Distribution::Poisson => "poisson",
            Distribution::Discrete => "discrete",
            Distribution::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub kind: ColumnKind,
    pub distribution: Distribution,
    #[serde(default)]
    pub unit: String,
}

impl ColumnMeta {
    pub fn new(kind: ColumnKind) -> Self {
        let distribution = match kind {
            ColumnKind::Discrete => Distribution::Discrete,
            ColumnKind::Continuous => Distribution::Unknown,
        };
        ColumnMeta {
            kind,
            distribution,
            unit: String::new(),
        }
    }
}

/// Kind inference rule: discrete iff every observed value is an integer and
/// there are at most [`DISCRETE_MAX_DISTINCT`] distinct values.
pub fn infer_kind<'a>(observed: impl IntoIterator<Item = &'a f64>) -> ColumnKind {
    let mut distinct = BTreeSet::new();
    let mut any = false;
    for v in observed {
        any = true;
        if v.fract() != 0.0 {
            return ColumnKind::Continuous;
        }
        distinct.insert(v.to_bits());
        if distinct.len() > DISCRETE_MAX_DISTINCT {
            return ColumnKind::Continuous;
        }
    }
    if any {
        ColumnKind::Discrete
    } else {
        ColumnKind::Continuous
    }
}

/// An n x p numeric table with an observation mask (column-major storage).
#[derive(Debug, Clone)]
pub struct DataMatrix {
    n: usize,
    values: Vec<Vec<f64>>,
    mask: Vec<Vec<bool>>,
    names: Vec<String>,
    meta: Vec<ColumnMeta>,
}

impl DataMatrix {
    /// Build from columns of optional values; kinds are inferred.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("data matrix needs at least one column"));
        }
        if names.len() != columns.len() {
            return Err(Error::invalid("column name count differs from column count"));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::invalid("data matrix needs at least one row"));
        }
        check_unique(&names)?;
        let mut values = Vec::with_capacity(columns.len());
        let mut mask = Vec::with_capacity(columns.len());
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::invalid(format!("column {name:?} has wrong length")));
            }
            let mut v = Vec::with_capacity(n);
            let mut m = Vec::with_capacity(n);
            for cell in col {
                match cell {
                    Some(x) if x.is_finite() => {
                        v.push(*x);
                        m.push(true);
                    }
                    Some(_) => {
                        return Err(Error::invalid(format!("non-finite value in column {name:?}")))
                    }
                    None => {
                        v.push(f64::NAN);
                        m.push(false);
                    }
                }
            }
            values.push(v);
            mask.push(m);
        }
        let meta = values
            .iter()
            .zip(&mask)
            .map(|(v, m)| {
                ColumnMeta::new(infer_kind(
                    v.iter().zip(m).filter(|(_, o)| **o).map(|(x, _)| x),
                ))
            })
            .collect();
        Ok(DataMatrix {
            n,
            values,
            mask,
            names,
            meta,
        })
    }

    /// Build a fully observed matrix.
    pub fn from_complete(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_columns(
            names,
            columns
                .into_iter()
                .map(|c| c.into_iter().map(Some).collect())
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.values.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn meta(&self) -> &[ColumnMeta] {
        &self.meta
    }

    pub fn kind(&self, col: usize) -> ColumnKind {
        self.meta[col].kind
    }

    pub fn set_kind(&mut self, col: usize, kind: ColumnKind) {
        self.meta[col] = ColumnMeta {
            unit: std::mem::take(&mut self.meta[col].unit),
            ..ColumnMeta::new(kind)
        };
    }

    /// Record a distribution verdict. Keeps the kind/distribution invariant by
    /// ignoring verdicts that contradict the column kind.
    pub fn set_distribution(&mut self, col: usize, dist: Distribution) {
        let m = &mut self.meta[col];
        let ok = match m.kind {
            ColumnKind::Discrete => dist.is_discrete(),
            ColumnKind::Continuous => !dist.is_discrete(),
        };
        if ok {
            m.distribution = dist;
        }
    }

    pub fn set_unit(&mut self, col: usize, unit: impl Into<String>) {
        self.meta[col].unit = unit.into();
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[col][row]
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.mask[col][row].then(|| self.values[col][row])
    }

    /// Set a cell to an observed finite value.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(value.is_finite(), "observed values must be finite");
        self.values[col][row] = value;
        self.mask[col][row] = true;
    }

    /// Mark a cell missing.
    pub fn clear(&mut self, row: usize, col: usize) {
        self.values[col][row] = f64::NAN;
        self.mask[col][row] = false;
    }

    pub fn observed(&self, col: usize) -> Vec<f64> {
        self.observed_iter(col).map(|(_, v)| v).collect()
    }

    /// `(row, value)` pairs of the observed cells of a column.
    pub fn observed_iter(&self, col: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values[col]
            .iter()
            .zip(&self.mask[col])
            .enumerate()
            .filter(|(_, (_, m))| **m)
            .map(|(i, (v, _))| (i, *v))
    }

    pub fn missing_rows(&self, col: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.mask[col][i]).collect()
    }

    pub fn observed_count(&self, col: usize) -> usize {
        self.mask[col].iter().filter(|m| **m).count()
    }

    pub fn missing_count(&self) -> usize {
        self.mask
            .iter()
            .map(|m| m.iter().filter(|o| !**o).count())
            .sum()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|m| m.iter().all(|o| *o))
    }

    pub fn column_is_complete(&self, col: usize) -> bool {
        self.mask[col].iter().all(|o| *o)
    }

    /// The mask row for one observation.
    pub fn row_pattern(&self, row: usize) -> Vec<bool> {
        self.mask.iter().map(|m| m[row]).collect()
    }

    /// Complete column values; errors if any cell is missing.
    pub fn complete_column(&self, col: usize) -> Result<&[f64]> {
        if !self.column_is_complete(col) {
            return Err(Error::precondition(format!(
                "column {:?} has missing entries",
                self.names[col]
            )));
        }
        Ok(&self.values[col])
    }

    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        DataMatrix {
            n: rows.len(),
            values: self
                .values
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            mask: self
                .mask
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            names: self.names.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> DataMatrix {
        DataMatrix {
            n: self.n,
            values: cols.iter().map(|&c| self.values[c].clone()).collect(),
            mask: cols.iter().map(|&c| self.mask[c].clone()).collect(),
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            meta: cols.iter().map(|&c| self.meta[c].clone()).collect(),
        }
    }

    /// Extract a complete numeric design over the given columns.
    pub fn to_features(&self, cols: &[usize]) -> Result<FeatureMatrix> {
        let mut data = Vec::with_capacity(cols.len());
        for &c in cols {
            data.push(self.complete_column(c)?.to_vec());
        }
        FeatureMatrix::new(cols.iter().map(|&c| self.names[c].clone()).collect(), data)
    }

    /// Split a complete matrix into (features without `target`, target vector).
    pub fn split_target(&self, target: &str) -> Result<(FeatureMatrix, Vec<f64>)> {
        let t = self.column_index(target)?;
        let y = self.complete_column(t)?.to_vec();
        let cols: Vec<usize> = (0..self.n_cols()).filter(|&c| c != t).collect();
        Ok((self.to_features(&cols)?, y))
    }
}

/// Equality over shape, names, metadata, mask and observed values (bitwise).
impl PartialEq for DataMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.names == other.names
            && self.meta == other.meta
            && self.mask == other.mask
            && self.values.iter().zip(&other.values).zip(&self.mask).all(|((a, b), m)| {
                a.iter()
                    .zip(b)
                    .zip(m)
                    .all(|((x, y), o)| !*o || x.to_bits() == y.to_bits())
            })
    }
}

fn check_unique(names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::DuplicateHeader(n.clone()));
        }
    }
    Ok(())
}
