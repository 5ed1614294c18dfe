use std::collections::BTreeMap;

use crate::dataset::{ColumnKind, DataMatrix};
use crate::error::{Error, Result};

use super::ImputationConfig;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnnDiagnostics {
    pub imputed_cells: usize,
    /// Cells with no usable donor, filled with the column mode instead.
    pub fallback_cells: usize,
    pub fallback_by_column: BTreeMap<String, usize>,
}

/// Per-column scaling used by the mixed distance: continuous differences are
/// divided by the observed sd, discrete columns compare by equality.
struct Scaler {
    continuous: Vec<bool>,
    sd: Vec<f64>,
}

impl Scaler {
    fn fit(data: &DataMatrix) -> Self {
        let p = data.n_cols();
        let mut sd = vec![1.0; p];
        let mut continuous = vec![false; p];
        for c in 0..p {
            if data.kind(c) == ColumnKind::Continuous {
                continuous[c] = true;
                let v = data.observed(c);
                if !v.is_empty() {
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
                    sd[c] = if s > 0.0 { s } else { 1.0 };
                }
            }
        }
        Scaler { continuous, sd }
    }

    fn term(&self, c: usize, a: f64, b: f64) -> f64 {
        if self.continuous[c] {
            let d = (a - b) / self.sd[c];
            d * d
        } else if a == b {
            0.0
        } else {
            1.0
        }
    }
}

/// Squared distance over the coordinates observed in both rows, rescaled by
/// `usable / shared`. `None` when the rows share no coordinate.
fn row_distance(
    scaler: &Scaler,
    a: &[Option<f64>],
    b: &[Option<f64>],
    usable: usize,
) -> Option<f64> {
    let mut acc = 0.0;
    let mut shared = 0usize;
    for (c, (x, y)) in a.iter().zip(b).enumerate() {
        if let (Some(x), Some(y)) = (x, y) {
            acc += scaler.term(c, *x, *y);
            shared += 1;
        }
    }
    (shared > 0).then(|| acc * usable as f64 / shared as f64)
}

/// Most frequent value; ties resolve to the smallest value.
pub(crate) fn mode(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for v in values {
        // order-preserving key for finite doubles
        let bits = v.to_bits();
        let key = if v.is_sign_negative() { !bits } else { bits | (1 << 63) };
        counts.entry(key).or_insert((v, 0)).1 += 1;
    }
    let mut best: Option<(f64, usize)> = None;
    for (_, (v, n)) in counts {
        if best.map_or(true, |(_, bn)| n > bn) {
            best = Some((v, n));
        }
    }
    best.map(|(v, _)| v)
}

fn rows_of(data: &DataMatrix) -> Vec<Vec<Option<f64>>> {
    (0..data.n_rows())
        .map(|i| (0..data.n_cols()).map(|c| data.get(i, c)).collect())
        .collect()
}

/// Fill missing cells of discrete columns by majority vote of the `knn_k`
/// nearest rows that observe the column. Distances use only originally
/// observed cells.
pub fn knn_impute_discrete(
    data: &DataMatrix,
    config: &ImputationConfig,
) -> Result<(DataMatrix, KnnDiagnostics)> {
    config.validate()?;
    let targets: Vec<usize> = (0..data.n_cols())
        .filter(|&c| data.kind(c) == ColumnKind::Discrete && !data.column_is_complete(c))
        .collect();
    let mut out = data.clone();
    let mut diag = KnnDiagnostics::default();
    if targets.is_empty() {
        return Ok((out, diag));
    }
    for &c in &targets {
        if data.observed_count(c) == 0 {
            return Err(Error::ColumnUninferrable(data.names()[c].clone()));
        }
    }
    let scaler = Scaler::fit(data);
    let rows = rows_of(data);
    let usable = data.n_cols() - 1;
    let modes: BTreeMap<usize, f64> = targets
        .iter()
        .map(|&c| (c, mode(data.observed(c)).expect("column has observations")))
        .collect();

    for r in 0..data.n_rows() {
        let missing: Vec<usize> = targets
            .iter()
            .copied()
            .filter(|&c| !data.is_observed(r, c))
            .collect();
        if missing.is_empty() {
            continue;
        }
        let dist: Vec<Option<f64>> = (0..data.n_rows())
            .map(|s| {
                if s == r {
                    None
                } else {
                    row_distance(&scaler, &rows[r], &rows[s], usable)
                }
            })
            .collect();
        for c in missing {
            let mut donors: Vec<(f64, usize)> = (0..data.n_rows())
                .filter_map(|s| match (dist[s], rows[s][c]) {
                    (Some(d), Some(_)) => Some((d, s)),
                    _ => None,
                })
                .collect();
            diag.imputed_cells += 1;
            let value = if donors.is_empty() {
                diag.fallback_cells += 1;
                *diag
                    .fallback_by_column
                    .entry(data.names()[c].clone())
                    .or_insert(0) += 1;
                modes[&c]
            } else {
                donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                donors.truncate(config.knn_k);
                mode(donors.iter().map(|&(_, s)| rows[s][c].expect("donor observes column")))
                    .expect("non-empty donor set")
            };
            out.set(r, c, value);
        }
    }
    Ok((out, diag))
}

/// Complete the rows of `rows` using a fully observed `reference` table with
/// the same columns: each missing cell takes the donor mean (continuous) or
/// donor mode (discrete) of the `k` nearest reference rows. Only the reference
/// is used to fit scaling, so held-out rows never influence each other.
pub fn impute_from_reference(reference: &DataMatrix, rows: &DataMatrix, k: usize) -> Result<DataMatrix> {
    if reference.names() != rows.names() {
        return Err(Error::invalid("reference and target columns differ"));
    }
    if !reference.is_complete() {
        return Err(Error::precondition("reference table must be complete"));
    }
    let k = k.max(1);
    let scaler = Scaler::fit(reference);
    let ref_rows = rows_of(reference);
    let usable = reference.n_cols();
    let mut out = rows.clone();
    for r in 0..rows.n_rows() {
        let row: Vec<Option<f64>> = (0..rows.n_cols()).map(|c| rows.get(r, c)).collect();
        let missing: Vec<usize> = (0..rows.n_cols()).filter(|&c| row[c].is_none()).collect();
        if missing.is_empty() {
            continue;
        }
        let mut donors: Vec<(f64, usize)> = (0..reference.n_rows())
            .map(|s| (row_distance(&scaler, &row, &ref_rows[s], usable).unwrap_or(0.0), s))
            .collect();
        donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        donors.truncate(k);
        for c in missing {
            let vals = donors.iter().map(|&(_, s)| ref_rows[s][c].expect("complete reference"));
            let v = if reference.kind(c) == ColumnKind::Discrete {
                mode(vals).expect("non-empty donors")
            } else {
                vals.sum::<f64>() / donors.len() as f64
            };
            out.set(r, c, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_ties_pick_smallest() {
        assert_eq!(mode([2.0, 1.0, 2.0, 1.0, 3.0]), Some(1.0));
        assert_eq!(mode([-1.0, -2.0]), Some(-2.0));
        assert_eq!(mode([5.0, 5.0, 1.0]), Some(5.0));
    }

    #[test]
    fn unique_nearest_neighbour_is_copied() {
        // Row 0 matches row 2 exactly on every observed coordinate.
        let d = DataMatrix::from_columns(
            vec!["x".into(), "z".into(), "d".into()],
            vec![
                vec![Some(0.1), Some(5.0), Some(0.1), Some(9.0)],
                vec![Some(1.5), Some(-3.0), Some(1.5), Some(7.0)],
                vec![None, Some(1.0), Some(2.0), Some(1.0)],
            ],
        )
        .unwrap();
        assert_eq!(d.kind(2), ColumnKind::Discrete);
        let cfg = ImputationConfig {
            knn_k: 1,
            ..Default::default()
        };
        let (out, diag) = knn_impute_discrete(&d, &cfg).unwrap();
        assert_eq!(out.get(0, 2), Some(2.0));
        assert_eq!(diag.fallback_cells, 0);
    }

    #[test]
    fn fully_missing_discrete_column_is_uninferrable() {
        let mut d = DataMatrix::from_complete(
            vec!["x".into(), "d".into()],
            vec![vec![0.5, 1.5], vec![1.0, 2.0]],
        )
        .unwrap();
        d.clear(0, 1);
        d.clear(1, 1);
        assert!(matches!(
            knn_impute_discrete(&d, &ImputationConfig::default()),
            Err(Error::ColumnUninferrable(_))
        ));
    }

    #[test]
    fn no_shared_coordinates_falls_back_to_mode() {
        let d = DataMatrix::from_columns(
            vec!["x".into(), "d".into()],
            vec![
                vec![None, Some(1.5), Some(2.5), Some(3.5)],
                vec![None, Some(1.0), Some(1.0), Some(2.0)],
            ],
        )
        .unwrap();
        let (out, diag) = knn_impute_discrete(&d, &ImputationConfig::default()).unwrap();
        assert_eq!(out.get(0, 1), Some(1.0));
        assert_eq!(diag.fallback_cells, 1);
    }

    #[test]
    fn no_discrete_gaps_is_identity() {
        let d = DataMatrix::from_columns(
            vec!["x".into(), "d".into()],
            vec![vec![None, Some(1.5)], vec![Some(1.0), Some(2.0)]],
        )
        .unwrap();
        let (out, _) = knn_impute_discrete(&d, &ImputationConfig::default()).unwrap();
        assert_eq!(out, d);
    }
}
