use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub folds: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            holdout_fraction: 0.2,
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid(format!("folds must be >= 2, got {}", self.folds)));
        }
        if !(0.0..0.5).contains(&self.holdout_fraction) {
            return Err(Error::invalid(format!(
                "holdout_fraction must be in [0, 0.5), got {}",
                self.holdout_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Shuffle `0..n` and cut it into `folds` contiguous blocks; the first
/// `n % folds` blocks take one extra row. Index lists are sorted.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::invalid(format!("folds must be >= 2, got {folds}")));
    }
    if n < folds {
        return Err(Error::invalid(format!("cannot split {n} rows into {folds} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    let mut fold_of = vec![0usize; n];
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        for &i in &idx[start..start + size] {
            fold_of[i] = f;
        }
        start += size;
    }
    for f in 0..folds {
        let (validation, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == f);
        out.push(Fold { train, validation });
    }
    Ok(out)
}

/// Shuffled split into (train, holdout) with `round(n * fraction)` hold-out
/// rows, both sorted.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed));
    let m = (n as f64 * fraction).round() as usize;
    let mut hold = idx[..m].to_vec();
    let mut train = idx[m..].to_vec();
    hold.sort_unstable();
    train.sort_unstable();
    (train, hold)
}
