//! Linear learners: least squares, ridge, lasso by coordinate descent and
//! evidence-maximizing Bayesian ridge.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Standardized};

pub const LASSO_TOL: f64 = 1e-7;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub warnings: Vec<String>,
}

fn back_transform(z: &Standardized, y_mean: f64, beta_z: &[f64]) -> (f64, Vec<f64>) {
    let coef: Vec<f64> = beta_z
        .iter()
        .zip(&z.sds)
        .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
        .collect();
    let intercept = y_mean - coef.iter().zip(&z.means).map(|(b, m)| b * m).sum::<f64>();
    (intercept, coef)
}

/// Ordinary least squares with intercept via QR on the centred design. Falls
/// back to a tiny ridge when `n < 2q` or the design is rank deficient.
pub fn fit_ols(cols: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let n = y.len();
    let q = cols.len();
    let (y_mean, yc) = linalg::center(y);
    let means: Vec<f64> = cols.iter().map(|c| linalg::mean(c)).collect();
    let xc: Vec<Vec<f64>> = cols
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let mut warnings = Vec::new();
    let beta = if n >= 2 * q { linalg::lstsq_qr(&xc, &yc) } else { None };
    let coef = match beta {
        Some(b) => b,
        None => {
            warnings.push(if n < 2 * q {
                format!("ols: n={n} < 2q={}; ridge-stabilized", 2 * q)
            } else {
                "ols: design rank deficient; ridge-stabilized".to_string()
            });
            let fit = fit_ridge(cols, y, 1e-8 * n as f64)?;
            return Ok(LinearFit { warnings, ..fit });
        }
    };
    let intercept = y_mean - coef.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearFit {
        intercept,
        coef,
        warnings,
    })
}

/// Ridge with unpenalized intercept; penalty applies to standardized
/// coefficients, which are then mapped back to raw units.
pub fn fit_ridge(cols: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LinearFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("ridge lambda must be finite and >= 0, got {lambda}")));
    }
    let z = linalg::standardize(cols);
    let (y_mean, yc) = linalg::center(y);
    let g = linalg::gram(&z.cols);
    let c = linalg::xty(&z.cols, &yc);
    // constant columns carry no signal; a unit diagonal keeps the system PD
    let mut a = g;
    for (j, s) in z.sds.iter().enumerate() {
        if *s == 0.0 {
            a[(j, j)] = 1.0;
        }
    }
    let beta = linalg::ridge_from_gram(&a, &c, lambda)
        .ok_or_else(|| Error::Singular("ridge system is not positive definite".into()))?;
    let (intercept, coef) = back_transform(&z, y_mean, beta.as_slice());
    Ok(LinearFit {
        intercept,
        coef,
        warnings: Vec::new(),
    })
}

/// Smallest lambda at which every lasso coefficient is zero, for centred `y`
/// and (already scaled) columns under the `(1/2n)` loss.
pub fn lasso_lambda_max(cols: &[Vec<f64>], yc: &[f64]) -> f64 {
    let n = yc.len() as f64;
    cols.iter()
        .map(|c| linalg::dot(c, yc).abs() / n)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub coef: Vec<f64>,
    pub sweeps: usize,
    pub kkt_violation: f64,
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for `(1/2n)|yc - X b|^2 + lambda |b|_1` on
/// centred inputs. Stops once the largest KKT violation is below `tol`.
pub fn lasso_cd(
    cols: &[Vec<f64>],
    yc: &[f64],
    lambda: f64,
    warm: Option<&[f64]>,
    tol: f64,
    max_sweeps: usize,
) -> Result<LassoPath> {
    let n = yc.len();
    let nf = n as f64;
    let q = cols.len();
    let norms: Vec<f64> = cols.iter().map(|c| linalg::dot(c, c) / nf).collect();
    let mut b = warm.map_or_else(|| vec![0.0; q], <[f64]>::to_vec);
    let mut r = yc.to_vec();
    for (j, c) in cols.iter().enumerate() {
        if b[j] != 0.0 {
            for i in 0..n {
                r[i] -= c[i] * b[j];
            }
        }
    }
    let kkt = |b: &[f64], r: &[f64]| -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..q {
            if norms[j] == 0.0 {
                continue;
            }
            let g = linalg::dot(&cols[j], r) / nf;
            let v = if b[j] == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * b[j].signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    };
    let mut viol = kkt(&b, &r);
    let mut sweeps = 0;
    while viol >= tol {
        if sweeps == max_sweeps {
            return Err(Error::NonConvergence(format!(
                "lasso coordinate descent at lambda={lambda:.6e}: KKT violation {viol:.3e} after {max_sweeps} sweeps"
            )));
        }
        sweeps += 1;
        for j in 0..q {
            if norms[j] == 0.0 {
                b[j] = 0.0;
                continue;
            }
            let c = &cols[j];
            let rho = linalg::dot(c, &r) / nf + norms[j] * b[j];
            let new = soft(rho, lambda) / norms[j];
            let delta = new - b[j];
            if delta != 0.0 {
                for i in 0..n {
                    r[i] -= c[i] * delta;
                }
                b[j] = new;
            }
        }
        viol = kkt(&b, &r);
    }
    Ok(LassoPath {
        coef: b,
        sweeps,
        kkt_violation: viol,
    })
}

/// Lasso on standardized features. `lambda` is on the standardized scale.
pub fn fit_lasso(cols: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<(LinearFit, LassoPath)> {
    let z = linalg::standardize(cols);
    let (y_mean, yc) = linalg::center(y);
    let path = lasso_cd(&z.cols, &yc, lambda, None, LASSO_TOL, LASSO_MAX_SWEEPS)?;
    let (intercept, coef) = back_transform(&z, y_mean, &path.coef);
    Ok((
        LinearFit {
            intercept,
            coef,
            warnings: Vec::new(),
        },
        path,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesianRidgeFit {
    pub fit: LinearFit,
    /// Noise precision.
    pub alpha: f64,
    /// Weight precision.
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Evidence maximization over the noise precision `alpha` and the weight
/// precision `lambda` with Gamma(1e-6, 1e-6) hyperpriors, using the SVD of the
/// centred design.
pub fn fit_bayesian_ridge(
    cols: &[Vec<f64>],
    y: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<BayesianRidgeFit> {
    const A1: f64 = 1e-6;
    const A2: f64 = 1e-6;
    const L1: f64 = 1e-6;
    const L2: f64 = 1e-6;
    let n = y.len();
    let q = cols.len();
    let means: Vec<f64> = cols.iter().map(|c| linalg::mean(c)).collect();
    let x = DMatrix::from_fn(n, q, |i, j| cols[j][i] - means[j]);
    let (y_mean, yc) = linalg::center(y);
    let yv = DVector::from_vec(yc);
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Singular("bayesian_ridge: SVD failed".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Singular("bayesian_ridge: SVD failed".into()))?;
    let s = &svd.singular_values;
    let uty = u.transpose() * &yv;
    let eig: Vec<f64> = s.iter().map(|v| v * v).collect();

    let var_y = yv.norm_squared() / n as f64;
    let mut alpha = 1.0 / (var_y + f64::EPSILON);
    let mut lambda = 1.0;
    let solve = |alpha: f64, lambda: f64| -> DVector<f64> {
        let w = DVector::from_iterator(
            s.len(),
            (0..s.len()).map(|k| s[k] / (eig[k] + lambda / alpha) * uty[k]),
        );
        vt.transpose() * w
    };
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..max_iter {
        iterations = it + 1;
        let coef = solve(alpha, lambda);
        let resid = &yv - &x * &coef;
        let rss = resid.norm_squared();
        let gamma: f64 = eig.iter().map(|e| alpha * e / (lambda + alpha * e)).sum();
        let new_lambda = (gamma + 2.0 * L1) / (coef.norm_squared() + 2.0 * L2);
        let new_alpha = (n as f64 - gamma + 2.0 * A1) / (rss + 2.0 * A2);
        let done = ((new_alpha - alpha) / alpha).abs() < tol && ((new_lambda - lambda) / lambda).abs() < tol;
        alpha = new_alpha;
        lambda = new_lambda;
        if !alpha.is_finite() || !lambda.is_finite() {
            return Err(Error::NonConvergence("bayesian_ridge: precision diverged".into()));
        }
        if done {
            converged = true;
            break;
        }
    }
    let coef: Vec<f64> = solve(alpha, lambda).iter().copied().collect();
    let intercept = y_mean - coef.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("bayesian_ridge: no convergence in {max_iter} iterations"));
    }
    Ok(BayesianRidgeFit {
        fit: LinearFit {
            intercept,
            coef,
            warnings,
        },
        alpha,
        lambda,
        iterations,
        converged,
    })
}
