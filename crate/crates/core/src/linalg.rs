//! Small dense helpers shared by the linear learners, the imputer and the
//! selectors. Columns are stored as `Vec<f64>` slices (column-major).

use nalgebra::{DMatrix, DVector};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (divides by n).
pub fn var_pop(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Sample variance (divides by n - 1).
pub fn var_sample(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column-wise z-scoring with population standard deviation. Constant columns
/// map to all-zero columns and keep `sd = 0`.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub cols: Vec<Vec<f64>>,
}

pub fn standardize(cols: &[Vec<f64>]) -> Standardized {
    let mut means = Vec::with_capacity(cols.len());
    let mut sds = Vec::with_capacity(cols.len());
    let mut out = Vec::with_capacity(cols.len());
    for c in cols {
        let m = mean(c);
        let s = var_pop(c).sqrt();
        let z = if s > 0.0 && s.is_finite() {
            c.iter().map(|v| (v - m) / s).collect()
        } else {
            vec![0.0; c.len()]
        };
        means.push(m);
        sds.push(if s.is_finite() { s } else { 0.0 });
        out.push(z);
    }
    Standardized {
        means,
        sds,
        cols: out,
    }
}

pub fn center(y: &[f64]) -> (f64, Vec<f64>) {
    let m = mean(y);
    (m, y.iter().map(|v| v - m).collect())
}

pub fn gram(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let q = cols.len();
    let mut g = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in i..q {
            let v = dot(&cols[i], &cols[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

pub fn xty(cols: &[Vec<f64>], y: &[f64]) -> DVector<f64> {
    DVector::from_iterator(cols.len(), cols.iter().map(|c| dot(c, y)))
}

/// Solve a symmetric positive-definite system by Cholesky.
pub fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = a.cholesky()?;
    let x = chol.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Ridge normal equations `(G + lambda I) beta = c` on pre-centred data.
pub fn ridge_from_gram(g: &DMatrix<f64>, c: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let q = g.nrows();
    let mut a = g.clone();
    for i in 0..q {
        a[(i, i)] += lambda;
    }
    solve_spd(a, c)
}

/// Least squares through a QR factorisation. Returns `None` when the design is
/// numerically rank deficient.
pub fn lstsq_qr(cols: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let n = y.len();
    let q = cols.len();
    if q == 0 {
        return Some(Vec::new());
    }
    if n < q {
        return None;
    }
    let x = DMatrix::from_fn(n, q, |i, j| cols[j][i]);
    let qr = x.qr();
    let r = qr.r();
    let max_diag = (0..q).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..q).any(|i| r[(i, i)].abs() <= 1e-10 * max_diag) {
        return None;
    }
    let qt_y = qr.q().transpose() * DVector::from_column_slice(y);
    let beta = r.solve_upper_triangular(&qt_y)?;
    beta.iter()
        .all(|v| v.is_finite())
        .then(|| beta.iter().copied().collect())
}
