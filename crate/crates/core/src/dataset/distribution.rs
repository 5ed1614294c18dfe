//! Maximum-likelihood distribution classification by AIC.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::{ColumnKind, Distribution};

/// Minimum observed count for a verdict other than `Unknown`.
pub const MIN_CLASSIFY_OBS: usize = 30;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub distribution: Distribution,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFit {
    pub verdict: Distribution,
    pub candidates: Vec<CandidateFit>,
}

impl DistributionFit {
    fn bare(verdict: Distribution) -> Self {
        DistributionFit {
            verdict,
            candidates: Vec::new(),
        }
    }
}

fn candidate(distribution: Distribution, log_likelihood: f64, n_params: usize) -> CandidateFit {
    CandidateFit {
        distribution,
        log_likelihood,
        n_params,
        aic: 2.0 * n_params as f64 - 2.0 * log_likelihood,
    }
}

fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x
        + x2 / 2.0
        + (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0)))
}

/// Gamma shape MLE: solve ln k - digamma(k) = s with s = ln(mean) - mean(ln x).
fn gamma_shape_mle(s: f64) -> f64 {
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = k.ln() - digamma(k) - s;
        let df = 1.0 / k - trigamma(k);
        let next = k - f / df;
        let next = if next <= 0.0 { k / 2.0 } else { next };
        if (next - k).abs() <= 1e-12 * k {
            return next;
        }
        k = next;
    }
    k
}

fn ln_factorial(k: f64) -> f64 {
    ln_gamma(k + 1.0)
}

/// Classify observed values. Discrete columns return `Discrete`, or `Poisson`
/// when the support is non-negative integers and the variance is within 20% of
/// the mean. Continuous columns compare Gaussian and Uniform always, plus
/// Lognormal, Gamma and Exponential when every value is strictly positive, and
/// return the candidate of minimal AIC.
pub fn classify_distribution(values: &[f64], kind: ColumnKind) -> DistributionFit {
    let n = values.len();
    let nf = n as f64;
    if kind == ColumnKind::Discrete {
        if n < MIN_CLASSIFY_OBS || values.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
            return DistributionFit::bare(Distribution::Discrete);
        }
        let m = values.iter().sum::<f64>() / nf;
        let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nf - 1.0);
        if m <= 0.0 {
            return DistributionFit::bare(Distribution::Discrete);
        }
        let ll: f64 = values
            .iter()
            .map(|&x| x * m.ln() - m - ln_factorial(x))
            .sum();
        let fit = vec![candidate(Distribution::Poisson, ll, 1)];
        let verdict = if (var / m - 1.0).abs() <= 0.2 {
            Distribution::Poisson
        } else {
            Distribution::Discrete
        };
        return DistributionFit {
            verdict,
            candidates: fit,
        };
    }

    if n < MIN_CLASSIFY_OBS {
        return DistributionFit::bare(Distribution::Unknown);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return DistributionFit::bare(Distribution::Unknown);
    }

    let mut cands = Vec::with_capacity(5);
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    cands.push(candidate(
        Distribution::Gaussian,
        -0.5 * nf * (LN_2PI + var.ln() + 1.0),
        2,
    ));

    if min > 0.0 {
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let lmean = logs.iter().sum::<f64>() / nf;
        let lvar = logs.iter().map(|v| (v - lmean).powi(2)).sum::<f64>() / nf;
        let sum_log = lmean * nf;
        if lvar > 0.0 {
            cands.push(candidate(
                Distribution::Lognormal,
                -0.5 * nf * (LN_2PI + lvar.ln() + 1.0) - sum_log,
                2,
            ));
        }
        let s = mean.ln() - lmean;
        if s > 0.0 {
            let k = gamma_shape_mle(s);
            let theta = mean / k;
            let ll = (k - 1.0) * sum_log - nf * mean / theta - nf * k * theta.ln() - nf * ln_gamma(k);
            cands.push(candidate(Distribution::Gamma, ll, 2));
        }
        cands.push(candidate(
            Distribution::Exponential,
            -nf * mean.ln() - nf,
            1,
        ));
    }
    cands.push(candidate(Distribution::Uniform, -nf * (max - min).ln(), 2));

    let verdict = cands
        .iter()
        .filter(|c| c.aic.is_finite())
        .min_by(|a, b| a.aic.total_cmp(&b.aic))
        .map_or(Distribution::Unknown, |c| c.distribution);
    DistributionFit {
        verdict,
        candidates: cands,
    }
}
