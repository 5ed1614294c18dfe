use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{DataMatrix, FeatureMatrix};
use crate::error::{Error, Result};
use crate::models::TrainedModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
    pub r2: f64,
}

impl Metrics {
    fn from_sums(ss_res: f64, ss_tot: f64, n: usize) -> Self {
        let mse = ss_res / n as f64;
        Metrics {
            mse,
            rmse: mse.sqrt(),
            r2: 1.0 - ss_res / ss_tot,
        }
    }
}

pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} targets, {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::invalid("metrics need at least two rows"));
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(Error::invalid("metrics inputs contain NaN/Inf"));
    }
    let n = y_true.len();
    let mean = y_true.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedR2);
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(Metrics::from_sums(ss_res, ss_tot, n))
}

/// Average fold metrics: mse and r2 are fold means, rmse is the root of the
/// mean mse.
pub fn mean_metrics(folds: &[Metrics]) -> Metrics {
    let k = folds.len() as f64;
    let mse = folds.iter().map(|m| m.mse).sum::<f64>() / k;
    Metrics {
        mse,
        rmse: mse.sqrt(),
        r2: folds.iter().map(|m| m.r2).sum::<f64>() / k,
    }
}

/// Absolute-residual bin edges in grams; the last bin is open.
pub const RESIDUAL_EDGES: [f64; 5] = [0.0, 50.0, 100.0, 500.0, 1000.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBins {
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
    pub percentages: Vec<f64>,
    pub mean_abs_error: f64,
    pub n: usize,
}

impl ResidualBins {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,count,percentage\n");
        for ((l, c), p) in self.labels.iter().zip(&self.counts).zip(&self.percentages) {
            out.push_str(&format!("{l},{c},{p}\n"));
        }
        out
    }
}

fn bin_label(k: usize) -> String {
    match RESIDUAL_EDGES.get(k + 1) {
        Some(hi) => format!("[{},{})", RESIDUAL_EDGES[k], hi),
        None => format!("[{},inf)", RESIDUAL_EDGES[k]),
    }
}

/// Bin `|residual|` values by [`RESIDUAL_EDGES`].
pub fn bin_residuals(residuals: &[f64]) -> Result<ResidualBins> {
    if residuals.iter().any(|r| r.is_nan()) {
        return Err(Error::invalid("residuals contain NaN"));
    }
    let mut counts = vec![0usize; RESIDUAL_EDGES.len()];
    for r in residuals {
        let a = r.abs();
        let k = RESIDUAL_EDGES.partition_point(|e| *e <= a) - 1;
        counts[k] += 1;
    }
    let n = residuals.len();
    let percentages = counts
        .iter()
        .map(|&c| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 })
        .collect();
    let mean_abs_error = if n == 0 {
        0.0
    } else {
        residuals.iter().map(|r| r.abs()).sum::<f64>() / n as f64
    };
    Ok(ResidualBins {
        labels: (0..RESIDUAL_EDGES.len()).map(bin_label).collect(),
        counts,
        percentages,
        mean_abs_error,
        n,
    })
}

pub fn residual_analysis(model: &TrainedModel, x: &FeatureMatrix, y: &[f64]) -> Result<ResidualBins> {
    let pred = model.predict(x)?;
    if pred.len() != y.len() {
        return Err(Error::invalid("target length differs from row count"));
    }
    let res: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    bin_residuals(&res)
}

/// Per-feature share of total split gain, sorted by share (ties by feature
/// order).
pub fn feature_importance_report(model: &TrainedModel) -> Result<Vec<(String, f64)>> {
    let gains = model
        .split_gains()
        .ok_or_else(|| Error::LinearFamily(model.family.to_string()))?;
    let total: f64 = gains.iter().sum();
    let mut shares: Vec<(usize, f64)> = gains
        .iter()
        .map(|g| if total > 0.0 { g / total } else { 0.0 })
        .enumerate()
        .collect();
    shares.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(shares
        .into_iter()
        .map(|(j, s)| (model.feature_names[j].clone(), s))
        .collect())
}

/// Absolute raw-scale coefficients of a linear model, sorted descending.
pub fn coefficient_magnitudes(model: &TrainedModel) -> Result<Vec<(String, f64)>> {
    let (_, coef) = model.coefficients().ok_or_else(|| {
        Error::invalid(format!("{} has no coefficients: use feature importance", model.family))
    })?;
    let mut out: Vec<(usize, f64)> = coef.iter().map(|c| c.abs()).enumerate().collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out
        .into_iter()
        .map(|(j, c)| (model.feature_names[j].clone(), c))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SexGap {
    /// mean(male) - mean(female), male coded 1.
    pub gap: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub df: f64,
    pub n_male: usize,
    pub n_female: usize,
}

impl SexGap {
    pub fn contains(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }
}

/// Welch 95% interval for the male minus female mean of `target`, over rows
/// where both columns are observed. The sex column must be coded 0/1.
pub fn sex_gap(data: &DataMatrix, target: &str, sex: &str) -> Result<SexGap> {
    let t = data.column_index(target)?;
    let s = data.column_index(sex)?;
    let (mut male, mut female) = (Vec::new(), Vec::new());
    for i in 0..data.n_rows() {
        if let (Some(y), Some(g)) = (data.get(i, t), data.get(i, s)) {
            match g {
                v if v == 1.0 => male.push(y),
                v if v == 0.0 => female.push(y),
                v => return Err(Error::invalid(format!("sex column must be 0/1, found {v}"))),
            }
        }
    }
    if male.len() < 2 || female.len() < 2 {
        return Err(Error::precondition(format!(
            "each sex group needs at least 2 rows (male {}, female {})",
            male.len(),
            female.len()
        )));
    }
    let moments = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0), n)
    };
    let (m1, v1, n1) = moments(&male);
    let (m0, v0, n0) = moments(&female);
    let gap = m1 - m0;
    let a = v1 / n1;
    let b = v0 / n0;
    let se = (a + b).sqrt();
    let df = if se > 0.0 {
        (a + b).powi(2) / (a * a / (n1 - 1.0) + b * b / (n0 - 1.0))
    } else {
        n1 + n0 - 2.0
    };
    let half = if se > 0.0 {
        StudentsT::new(0.0, 1.0, df)
            .map_err(|e| Error::invalid(e.to_string()))?
            .inverse_cdf(0.975)
            * se
    } else {
        0.0
    };
    Ok(SexGap {
        gap,
        ci_low: gap - half,
        ci_high: gap + half,
        df,
        n_male: male.len(),
        n_female: female.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        let m = compute_metrics(&[1.0, 2.0, 3.0, 4.0], &[1.1, 1.9, 3.2, 3.8]).unwrap();
        assert!((m.r2 - 0.98).abs() < 1e-12);
        assert!((m.rmse - 0.025f64.sqrt()).abs() < 1e-12);
        let p = compute_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(p.r2, 0.0);
        let e = compute_metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((e.mse, e.rmse, e.r2), (0.0, 0.0, 1.0));
        assert!(matches!(compute_metrics(&[3.0, 3.0], &[1.0, 2.0]), Err(Error::UndefinedR2)));
        assert!(compute_metrics(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn residual_bins_follow_edges() {
        let b = bin_residuals(&[10.0, -60.0, 200.0, 700.0]).unwrap();
        assert_eq!(b.counts, vec![1, 1, 1, 1, 0]);
        assert_eq!(bin_residuals(&[50.0, 1000.0, 0.0]).unwrap().counts, vec![1, 1, 0, 0, 1]);
        let total: f64 = b.percentages.iter().sum();
        assert!((total - 100.0).abs() < 1e-9);
        assert_eq!(b.mean_abs_error, 242.5);
        assert_eq!(b.labels[4], "[1000,inf)");
    }

    fn gap_data(male: &[f64], female: &[f64]) -> DataMatrix {
        let mut y = male.to_vec();
        y.extend_from_slice(female);
        let s: Vec<f64> = male.iter().map(|_| 1.0).chain(female.iter().map(|_| 0.0)).collect();
        DataMatrix::from_complete(vec!["bw".into(), "sex".into()], vec![y, s]).unwrap()
    }

    #[test]
    fn sex_gap_arithmetic() {
        let g = sex_gap(&gap_data(&[3000.0, 3000.0], &[2870.0, 2870.0]), "bw", "sex").unwrap();
        assert_eq!(g.gap, 130.0);
        assert!(g.contains(130.0));
        let same = sex_gap(&gap_data(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), "bw", "sex").unwrap();
        assert_eq!(same.gap, 0.0);
        assert!(same.ci_low < 0.0 && same.ci_high > 0.0);
        assert!(sex_gap(&gap_data(&[3000.0], &[2870.0, 2900.0]), "bw", "sex").is_err());
    }

    #[test]
    fn welch_interval_matches_reference() {
        // male {1,2,3,4}, female {2,4,6}: gap -1.5, se^2 = 5/12 + 4/3
        let g = sex_gap(&gap_data(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0]), "bw", "sex").unwrap();
        let se2: f64 = 5.0 / 12.0 + 4.0 / 3.0;
        let df = se2 * se2 / ((5.0f64 / 12.0).powi(2) / 3.0 + (4.0f64 / 3.0).powi(2) / 2.0);
        assert!((g.df - df).abs() < 1e-12);
        let t = StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(0.975);
        assert!((g.ci_high - (-1.5 + t * se2.sqrt())).abs() < 1e-12);
    }
}
