use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::DataMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessProfile {
    pub overall_rate: f64,
    pub per_column_rate: Vec<f64>,
    pub missing_cells: usize,
    /// Number of distinct row-wise mask patterns.
    pub pattern_count: usize,
}

pub fn missingness_profile(data: &DataMatrix) -> MissingnessProfile {
    let n = data.n_rows();
    let p = data.n_cols();
    let per_column_rate = (0..p)
        .map(|c| (n - data.observed_count(c)) as f64 / n as f64)
        .collect();
    let missing_cells = data.missing_count();
    let patterns: HashSet<Vec<bool>> = (0..n).map(|i| data.row_pattern(i)).collect();
    MissingnessProfile {
        overall_rate: missing_cells as f64 / (n * p) as f64,
        per_column_rate,
        missing_cells,
        pattern_count: patterns.len(),
    }
}
