//! Controlled removal of known cells, for measuring imputation error against
//! ground truth and for calibrating missingness tests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMechanism {
    /// Independent Bernoulli(rate) per cell.
    Mcar,
    /// Missingness of a column is logistic in a paired, never-masked column.
    Mar,
    /// Missingness of a cell is logistic in its own value.
    Mnar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskedCell {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Logistic slope on the standardized driver value.
const LOGISTIC_SLOPE: f64 = 2.0;
const MAX_ATTEMPTS: u64 = 1000;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn zscore(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    if s > 0.0 {
        v.iter().map(|x| (x - m) / s).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Intercept `a` with mean(sigmoid(a + slope * z)) = rate, by bisection.
fn logistic_probs(z: &[f64], rate: f64) -> Vec<f64> {
    let mean_at = |a: f64| z.iter().map(|v| sigmoid(a + LOGISTIC_SLOPE * v)).sum::<f64>() / z.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    z.iter().map(|v| sigmoid(a + LOGISTIC_SLOPE * v)).collect()
}

/// Remove cells of a complete matrix by `mechanism` at overall `rate` over the
/// eligible `columns` (all when `None`). Returns the masked matrix and the
/// removed ground-truth cells. The realized rate is guaranteed to lie within
/// 10% (relative) of `rate`; draws are repeated with derived seeds until it
/// does, and an error is returned if that is impossible at this size.
pub fn mask_known_entries(
    data: &DataMatrix,
    rate: f64,
    mechanism: MaskMechanism,
    seed: u64,
    columns: Option<&[usize]>,
) -> Result<(DataMatrix, Vec<MaskedCell>)> {
    if !(rate > 0.0 && rate < 0.5) {
        return Err(Error::invalid(format!("mask rate {rate} outside (0, 0.5)")));
    }
    if !data.is_complete() {
        return Err(Error::precondition("masking requires a fully observed matrix"));
    }
    let eligible: Vec<usize> = columns.map_or_else(|| (0..data.n_cols()).collect(), <[usize]>::to_vec);
    if eligible.is_empty() {
        return Err(Error::invalid("no eligible columns to mask"));
    }
    let n = data.n_rows();

    // (masked column, per-row probability)
    let plan: Vec<(usize, Vec<f64>)> = match mechanism {
        MaskMechanism::Mcar => eligible.iter().map(|&c| (c, vec![rate; n])).collect(),
        MaskMechanism::Mnar => eligible
            .iter()
            .map(|&c| {
                let z = zscore(data.complete_column(c).expect("complete"));
                (c, logistic_probs(&z, rate))
            })
            .collect(),
        MaskMechanism::Mar => {
            if eligible.len() < 2 {
                return Err(Error::invalid("MAR masking needs at least two columns"));
            }
            // Even positions are masked, odd positions drive them and stay observed.
            let masked: Vec<usize> = eligible.iter().copied().step_by(2).collect();
            let drivers: Vec<usize> = eligible.iter().copied().skip(1).step_by(2).collect();
            let col_rate = rate * eligible.len() as f64 / masked.len() as f64;
            if col_rate >= 1.0 {
                return Err(Error::invalid("MAR rate too high for the eligible columns"));
            }
            masked
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let d = drivers[k % drivers.len()];
                    let z = zscore(data.complete_column(d).expect("complete"));
                    (c, logistic_probs(&z, col_rate))
                })
                .collect()
        }
    };

    let total = (eligible.len() * n) as f64;
    for attempt in 0..MAX_ATTEMPTS {
        let mut r = rng::stream(rng::derive(seed, attempt));
        let mut cells = Vec::new();
        for (c, probs) in &plan {
            for (i, pr) in probs.iter().enumerate() {
                if r.random::<f64>() < *pr {
                    cells.push(MaskedCell {
                        row: i,
                        col: *c,
                        value: data.get(i, *c).expect("complete"),
                    });
                }
            }
        }
        let realized = cells.len() as f64 / total;
        if (realized - rate).abs() <= 0.1 * rate {
            let mut out = data.clone();
            for cell in &cells {
                out.clear(cell.row, cell.col);
            }
            cells.sort_by_key(|c| (c.col, c.row));
            return Ok((out, cells));
        }
    }
    Err(Error::invalid(format!(
        "cannot realize mask rate {rate} within 10% on {} cells",
        total as usize
    )))
}
