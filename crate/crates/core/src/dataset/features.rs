use std::collections::HashSet;

use crate::error::{Error, Result};

/// A complete, finite, column-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, cols: Vec<Vec<f64>>) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::invalid("feature matrix needs at least one column"));
        }
        if names.len() != cols.len() {
            return Err(Error::invalid("feature name count differs from column count"));
        }
        let n = cols[0].len();
        let mut seen = HashSet::new();
        for (name, c) in names.iter().zip(&cols) {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateHeader(name.clone()));
            }
            if c.len() != n {
                return Err(Error::invalid(format!("feature {name:?} has wrong length")));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("feature {name:?} has NaN/Inf entries")));
            }
        }
        Ok(FeatureMatrix { n, names, cols })
    }

    /// Anonymous columns named `x0, x1, ...`.
    pub fn from_cols(cols: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..cols.len()).map(|j| format!("x{j}")).collect();
        Self::new(names, cols)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    pub fn cols(&self) -> &[Vec<f64>] {
        &self.cols
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[i]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            n: self.n,
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
            cols: idx.iter().map(|&j| self.cols[j].clone()).collect(),
        }
    }

    pub fn select_names<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| Error::UnknownColumn(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select(&idx))
    }

    pub fn take_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            n: rows.len(),
            names: self.names.clone(),
            cols: self
                .cols
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
        }
    }
}
