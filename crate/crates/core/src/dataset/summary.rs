use serde::{Deserialize, Serialize};

use super::DataMatrix;

/// Per-column descriptive statistics over observed entries. Statistics that
/// are undefined for the observed count are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub count: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator).
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub columns: Vec<ColumnSummary>,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// at position `q * (n - 1)`.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summarize(data: &DataMatrix) -> SummaryStats {
    let columns = (0..data.n_cols())
        .map(|c| summarize_values(&data.names()[c], data.observed(c)))
        .collect();
    SummaryStats { columns }
}

fn summarize_values(name: &str, mut v: Vec<f64>) -> ColumnSummary {
    let count = v.len();
    if count == 0 {
        return ColumnSummary {
            name: name.to_string(),
            count,
            mean: None,
            std: None,
            min: None,
            q25: None,
            median: None,
            q75: None,
            max: None,
        };
    }
    let mean = v.iter().sum::<f64>() / count as f64;
    let std = (count > 1).then(|| {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1) as f64).sqrt()
    });
    v.sort_by(f64::total_cmp);
    ColumnSummary {
        name: name.to_string(),
        count,
        mean: Some(mean),
        std,
        min: Some(v[0]),
        q25: Some(quantile_sorted(&v, 0.25)),
        median: Some(quantile_sorted(&v, 0.5)),
        q75: Some(quantile_sorted(&v, 0.75)),
        max: Some(v[count - 1]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(col: Vec<Option<f64>>) -> ColumnSummary {
        let d = DataMatrix::from_columns(vec!["c".into()], vec![col]).unwrap();
        summarize(&d).columns.remove(0)
    }

    #[test]
    fn one_to_five() {
        let s = one((1..=5).map(|v| Some(f64::from(v))).collect());
        assert_eq!(s.mean, Some(3.0));
        assert_eq!(s.median, Some(3.0));
        assert_eq!(s.min, Some(1.0));
        assert_eq!(s.max, Some(5.0));
        assert_eq!(s.q25, Some(2.0));
        assert_eq!(s.q75, Some(4.0));
    }

    #[test]
    fn observed_only() {
        let s = one(vec![Some(1.0), Some(2.0), None, Some(4.0)]);
        assert_eq!(s.count, 3);
        assert!((s.mean.unwrap() - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_missing_is_not_available() {
        let d = DataMatrix::from_columns(
            vec!["a".into(), "b".into()],
            vec![vec![None, None], vec![Some(1.0), Some(2.0)]],
        )
        .unwrap();
        let s = summarize(&d);
        assert_eq!(s.columns[0].count, 0);
        assert!(s.columns[0].mean.is_none() && s.columns[0].median.is_none());
    }

    #[test]
    fn interpolated_quartiles() {
        let s = one(vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)]);
        assert_eq!(s.q25, Some(1.75));
        assert_eq!(s.median, Some(2.5));
        assert_eq!(s.q75, Some(3.25));
    }
}
