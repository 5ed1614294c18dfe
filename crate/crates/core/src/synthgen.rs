//! Synthetic birth-weight cohorts with planted ground truth.
//!
//! Features are drawn through a Gaussian copula: a rank-r latent factor model
//! gives correlated standard normals, which are mapped onto each column's
//! marginal by its quantile function. The target is linear in the
//! standardized planted features, plus one interaction between the first two
//! planted features, a sex gap and Gaussian noise.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma, Normal};

use crate::dataset::{DataMatrix, Distribution};
use crate::error::{Error, Result};
use crate::imputation::{mask_known_entries, MaskMechanism};
use crate::{linalg, rng};

pub const TARGET: &str = "fl_bw";
pub const SEX: &str = "sex";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFeature {
    pub name: String,
    pub distribution: Distribution,
    /// Grams per population standard deviation of the feature.
    pub weight: f64,
}

impl PlantedFeature {
    fn new(name: &str, distribution: Distribution, weight: f64) -> Self {
        PlantedFeature {
            name: name.to_string(),
            distribution,
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n: usize,
    /// Column count including the target.
    pub p: usize,
    pub n_gaussian: usize,
    pub n_lognormal: usize,
    pub n_gamma: usize,
    pub n_discrete: usize,
    pub latent_rank: usize,
    pub loading_sd: f64,
    /// Loading scale for planted features, kept small so the signal variance
    /// does not swing with the sign pattern of their correlations.
    pub planted_loading_sd: f64,
    pub planted: Vec<PlantedFeature>,
    /// Grams per unit product of the first two standardized planted features.
    pub interaction: f64,
    pub sex_gap: f64,
    pub male_fraction: f64,
    pub baseline: f64,
    pub noise_sd: f64,
    pub missing_rate: f64,
    pub mechanism: MaskMechanism,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        use Distribution::*;
        CohortSpec {
            n: 791,
            p: 109,
            n_gaussian: 17,
            n_lognormal: 47,
            n_gamma: 25,
            n_discrete: 20,
            latent_rank: 10,
            loading_sd: 0.4,
            planted_loading_sd: 0.15,
            planted: vec![
                PlantedFeature::new("ga_delivery", Gaussian, 230.0),
                PlantedFeature::new("placental_wt", Lognormal, 190.0),
                PlantedFeature::new("fundal_ht_v2", Gaussian, 70.0),
                PlantedFeature::new("abd_cir_v2", Gaussian, 65.0),
                PlantedFeature::new("fasting_glucose_v2", Lognormal, 60.0),
                PlantedFeature::new("sbp_v1", Gaussian, -55.0),
                PlantedFeature::new("pulse_v2", Gamma, 50.0),
                PlantedFeature::new("maternal_wt_v2", Lognormal, 65.0),
            ],
            interaction: 200.0,
            sex_gap: 130.0,
            male_fraction: 0.52,
            baseline: 2900.0,
            noise_sd: 250.0,
            missing_rate: 0.0678,
            mechanism: MaskMechanism::Mcar,
            seed: 0,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_gaussian + self.n_lognormal + self.n_gamma + self.n_discrete != self.p {
            return Err(Error::invalid(format!(
                "distribution counts sum to {}, expected p = {}",
                self.n_gaussian + self.n_lognormal + self.n_gamma + self.n_discrete,
                self.p
            )));
        }
        if self.n < 10 {
            return Err(Error::invalid("cohort needs at least 10 rows"));
        }
        let count = |d: Distribution| self.planted.iter().filter(|f| f.distribution == d).count();
        if self.planted.iter().any(|f| {
            !matches!(f.distribution, Distribution::Gaussian | Distribution::Lognormal | Distribution::Gamma)
        }) {
            return Err(Error::invalid("planted features must be gaussian, lognormal or gamma"));
        }
        if count(Distribution::Gaussian) + 1 > self.n_gaussian
            || count(Distribution::Lognormal) > self.n_lognormal
            || count(Distribution::Gamma) > self.n_gamma
            || self.n_discrete < 1
        {
            return Err(Error::invalid(
                "distribution counts too small for the planted features, target and sex",
            ));
        }
        if self.planted.len() < 2 {
            return Err(Error::invalid("at least two planted features are required"));
        }
        let mut names: Vec<&str> = self.planted.iter().map(|f| f.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.planted.len() || names.iter().any(|n| *n == TARGET || *n == SEX) {
            return Err(Error::invalid("planted feature names must be unique and distinct from target and sex"));
        }
        let finite = self.planted.iter().all(|f| f.weight.is_finite())
            && self.interaction.is_finite()
            && self.sex_gap.is_finite()
            && self.baseline.is_finite()
            && self.loading_sd.is_finite()
            && self.planted_loading_sd.is_finite();
        if !finite {
            return Err(Error::invalid("coefficients must be finite"));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd must be > 0"));
        }
        if !(0.0..0.5).contains(&self.missing_rate) {
            return Err(Error::invalid("missing_rate must be in [0, 0.5)"));
        }
        if !(self.male_fraction > 0.0 && self.male_fraction < 1.0) {
            return Err(Error::invalid("male_fraction must be in (0, 1)"));
        }
        Ok(())
    }

    pub fn planted_names(&self) -> Vec<String> {
        self.planted.iter().map(|f| f.name.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub relevant: Vec<String>,
    /// Grams per population SD.
    pub coefficients: BTreeMap<String, f64>,
    /// Grams per unit of the raw feature.
    pub raw_coefficients: BTreeMap<String, f64>,
    pub interaction: (String, String, f64),
    pub sex_gap: f64,
    pub noise_sd: f64,
    pub noiseless_target: Vec<f64>,
    /// Generating class of every column, target included.
    pub distributions: BTreeMap<String, Distribution>,
    /// Number of target values outside the [500, 5500] g window.
    pub implausible_targets: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
enum Marginal {
    Gaussian { mean: f64, sd: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Gamma { shape: f64, scale: f64 },
    Discrete { cum: Vec<f64>, levels: Vec<f64> },
}

impl Marginal {
    fn class(&self) -> Distribution {
        match self {
            Marginal::Gaussian { .. } => Distribution::Gaussian,
            Marginal::Lognormal { .. } => Distribution::Lognormal,
            Marginal::Gamma { .. } => Distribution::Gamma,
            Marginal::Discrete { .. } => Distribution::Discrete,
        }
    }

    fn moments(&self) -> (f64, f64) {
        match self {
            Marginal::Gaussian { mean, sd } => (*mean, *sd),
            Marginal::Lognormal { mu, sigma } => {
                let s2 = sigma * sigma;
                ((mu + s2 / 2.0).exp(), ((s2.exp() - 1.0) * (2.0 * mu + s2).exp()).sqrt())
            }
            Marginal::Gamma { shape, scale } => (shape * scale, shape.sqrt() * scale),
            Marginal::Discrete { cum, levels } => {
                let mut prev = 0.0;
                let (mut m, mut m2) = (0.0, 0.0);
                for (c, v) in cum.iter().zip(levels) {
                    let p = c - prev;
                    prev = *c;
                    m += p * v;
                    m2 += p * v * v;
                }
                (m, (m2 - m * m).sqrt())
            }
        }
    }

    /// Map a standard normal score onto the marginal.
    fn quantile(&self, g: f64, phi: &Normal) -> f64 {
        match self {
            Marginal::Gaussian { mean, sd } => mean + sd * g,
            Marginal::Lognormal { mu, sigma } => (mu + sigma * g).exp(),
            Marginal::Gamma { shape, scale } => {
                let u = phi.cdf(g).clamp(1e-12, 1.0 - 1e-12);
                Gamma::new(*shape, 1.0 / scale).expect("valid gamma").inverse_cdf(u)
            }
            Marginal::Discrete { cum, levels } => {
                let u = phi.cdf(g);
                let k = cum.partition_point(|c| *c <= u).min(levels.len() - 1);
                levels[k]
            }
        }
    }
}

fn discrete_marginal(r: &mut rng::StreamRng) -> Marginal {
    loop {
        let k = r.random_range(2..=5usize);
        let w: Vec<f64> = (0..k).map(|_| 0.3 + r.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let levels: Vec<f64> = (0..k).map(|v| v as f64).collect();
        let mut acc = 0.0;
        let cum: Vec<f64> = w
            .iter()
            .map(|v| {
                acc += v / total;
                acc
            })
            .collect();
        let m = Marginal::Discrete { cum, levels };
        let (mean, sd) = m.moments();
        // keep well away from the Poisson-like dispersion band
        if (sd * sd / mean - 1.0).abs() > 0.4 {
            return m;
        }
    }
}

struct Plan {
    name: String,
    marginal: Marginal,
    loadings: Vec<f64>,
}

struct Draw {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    classes: Vec<Distribution>,
    signal: Vec<f64>,
    unit_noise: Vec<f64>,
    /// Reference design: planted features and sex.
    reference: Vec<Vec<f64>>,
    raw_coefficients: BTreeMap<String, f64>,
}

fn simulate(spec: &CohortSpec, seed: u64) -> Draw {
    let mut pr = rng::stream(rng::derive_str(seed, "params"));
    let mut plans: Vec<Plan> = Vec::new();
    let loadings = |r: &mut rng::StreamRng, sd: f64| -> Vec<f64> {
        (0..spec.latent_rank)
            .map(|_| sd * r.sample::<f64, _>(StandardNormal))
            .collect()
    };
    // Planted columns get mildly skewed margins so a handful of extreme rows
    // cannot dominate the target variance.
    let push = |plans: &mut Vec<Plan>, name: String, class: Distribution, r: &mut rng::StreamRng, planted: bool| {
        let marginal = match class {
            Distribution::Gaussian => {
                let mean = r.random_range(20.0..120.0);
                Marginal::Gaussian {
                    mean,
                    sd: mean * r.random_range(0.25..0.4),
                }
            }
            Distribution::Lognormal => Marginal::Lognormal {
                mu: r.random_range(1.0..5.0),
                sigma: if planted { r.random_range(0.25..0.35) } else { r.random_range(0.4..0.9) },
            },
            Distribution::Gamma => Marginal::Gamma {
                shape: if planted { r.random_range(8.0..12.0) } else { r.random_range(1.5..6.0) },
                scale: r.random_range(0.5..20.0),
            },
            _ => discrete_marginal(r),
        };
        plans.push(Plan {
            name,
            marginal,
            loadings: loadings(r, if planted { spec.planted_loading_sd } else { spec.loading_sd }),
        });
    };
    for f in &spec.planted {
        push(&mut plans, f.name.clone(), f.distribution, &mut pr, true);
    }
    let planted_of = |d: Distribution| spec.planted.iter().filter(|f| f.distribution == d).count();
    for (class, total, prefix) in [
        (Distribution::Gaussian, spec.n_gaussian - 1, "gauss"),
        (Distribution::Lognormal, spec.n_lognormal, "lognorm"),
        (Distribution::Gamma, spec.n_gamma, "gamma"),
    ] {
        for k in 0..total - planted_of(class) {
            push(&mut plans, format!("{prefix}_{:02}", k + 1), class, &mut pr, false);
        }
    }
    plans.push(Plan {
        name: SEX.into(),
        marginal: Marginal::Discrete {
            cum: vec![1.0 - spec.male_fraction, 1.0],
            levels: vec![0.0, 1.0],
        },
        loadings: vec![0.0; spec.latent_rank],
    });
    for k in 0..spec.n_discrete - 1 {
        push(&mut plans, format!("disc_{:02}", k + 1), Distribution::Discrete, &mut pr, false);
    }

    let n = spec.n;
    let mut lr = rng::stream(rng::derive_str(seed, "latent"));
    let latent: Vec<Vec<f64>> = (0..spec.latent_rank)
        .map(|_| (0..n).map(|_| lr.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let phi = Normal::standard();
    let mut er = rng::stream(rng::derive_str(seed, "columns"));
    let columns: Vec<Vec<f64>> = plans
        .iter()
        .map(|plan| {
            let norm = (plan.loadings.iter().map(|l| l * l).sum::<f64>() + 1.0).sqrt();
            (0..n)
                .map(|i| {
                    let e: f64 = er.sample(StandardNormal);
                    let g = (plan.loadings.iter().zip(&latent).map(|(l, z)| l * z[i]).sum::<f64>() + e) / norm;
                    plan.marginal.quantile(g, &phi)
                })
                .collect()
        })
        .collect();

    let mut signal = vec![spec.baseline; n];
    let mut reference = Vec::new();
    let mut raw_coefficients = BTreeMap::new();
    let mut std_cols = Vec::new();
    for (k, f) in spec.planted.iter().enumerate() {
        let (m, s) = plans[k].marginal.moments();
        let z: Vec<f64> = columns[k].iter().map(|v| (v - m) / s).collect();
        for i in 0..n {
            signal[i] += f.weight * z[i];
        }
        raw_coefficients.insert(f.name.clone(), f.weight / s);
        reference.push(columns[k].clone());
        std_cols.push(z);
    }
    let inter: Vec<f64> = (0..n).map(|i| std_cols[0][i] * std_cols[1][i]).collect();
    let sex_idx = plans.iter().position(|p| p.name == SEX).unwrap();
    for i in 0..n {
        signal[i] += spec.interaction * inter[i] + spec.sex_gap * (columns[sex_idx][i] - spec.male_fraction);
    }
    reference.push(columns[sex_idx].clone());
    let mut nr = rng::stream(rng::derive_str(seed, "noise"));
    let unit_noise: Vec<f64> = (0..n).map(|_| nr.sample(StandardNormal)).collect();
    Draw {
        names: plans.iter().map(|p| p.name.clone()).collect(),
        classes: plans.iter().map(|p| p.marginal.class()).collect(),
        columns,
        signal,
        unit_noise,
        reference,
        raw_coefficients,
    }
}

/// Generate a cohort and its ground truth. The column order is shuffled by
/// the seed; the target and sex columns are never masked.
pub fn generate_cohort(spec: &CohortSpec) -> Result<(DataMatrix, GroundTruth)> {
    spec.validate()?;
    let draw = simulate(spec, spec.seed);
    let n = spec.n;
    let target: Vec<f64> = (0..n).map(|i| draw.signal[i] + spec.noise_sd * draw.unit_noise[i]).collect();
    let mut names = draw.names.clone();
    let mut columns = draw.columns.clone();
    let mut classes = draw.classes.clone();
    names.push(TARGET.into());
    columns.push(target.clone());
    classes.push(Distribution::Gaussian);

    let mut order: Vec<usize> = (0..names.len()).collect();
    order.shuffle(&mut rng::stream(rng::derive_str(spec.seed, "order")));
    let names: Vec<String> = order.iter().map(|&k| names[k].clone()).collect();
    let columns: Vec<Vec<f64>> = order.iter().map(|&k| std::mem::take(&mut columns[k])).collect();
    let classes: Vec<Distribution> = order.iter().map(|&k| classes[k]).collect();

    let mut data = DataMatrix::from_complete(names.clone(), columns)?;
    if spec.missing_rate > 0.0 {
        let eligible: Vec<usize> = (0..names.len())
            .filter(|&j| names[j] != TARGET && names[j] != SEX)
            .collect();
        let rate = spec.missing_rate * names.len() as f64 / eligible.len() as f64;
        data = mask_known_entries(
            &data,
            rate,
            spec.mechanism,
            rng::derive_str(spec.seed, "missing"),
            Some(&eligible),
        )?
        .0;
    }
    let mut coefficients: BTreeMap<String, f64> =
        spec.planted.iter().map(|f| (f.name.clone(), f.weight)).collect();
    coefficients.insert(SEX.into(), spec.sex_gap);
    let implausible = target.iter().filter(|v| !(500.0..=5500.0).contains(*v)).count();
    let truth = GroundTruth {
        relevant: spec.planted_names(),
        coefficients,
        raw_coefficients: draw.raw_coefficients,
        interaction: (spec.planted[0].name.clone(), spec.planted[1].name.clone(), spec.interaction),
        sex_gap: spec.sex_gap,
        noise_sd: spec.noise_sd,
        noiseless_target: draw.signal,
        distributions: names.iter().cloned().zip(classes).collect(),
        implausible_targets: implausible,
        seed: spec.seed,
    };
    Ok((data, truth))
}

/// Residual pieces of the reference OLS fit, so R^2 can be evaluated for any
/// noise scale without refitting.
struct ReferenceFit {
    ss_signal: f64,
    ss_noise: f64,
    ss_cross: f64,
    tss_signal: f64,
    tss_noise: f64,
    tss_cross: f64,
}

impl ReferenceFit {
    fn new(draw: &Draw) -> Result<Self> {
        let cols: Vec<Vec<f64>> = draw.reference.iter().map(|c| linalg::center(c).1).collect();
        let (_, s) = linalg::center(&draw.signal);
        let (_, e) = linalg::center(&draw.unit_noise);
        let resid = |y: &[f64]| -> Result<Vec<f64>> {
            let b = linalg::lstsq_qr(&cols, y)
                .ok_or_else(|| Error::Singular("reference design is rank deficient".into()))?;
            Ok((0..y.len())
                .map(|i| y[i] - cols.iter().zip(&b).map(|(c, bj)| bj * c[i]).sum::<f64>())
                .collect())
        };
        let rs = resid(&s)?;
        let re = resid(&e)?;
        Ok(ReferenceFit {
            ss_signal: linalg::dot(&rs, &rs),
            ss_noise: linalg::dot(&re, &re),
            ss_cross: linalg::dot(&rs, &re),
            tss_signal: linalg::dot(&s, &s),
            tss_noise: linalg::dot(&e, &e),
            tss_cross: linalg::dot(&s, &e),
        })
    }

    fn r2(&self, sigma: f64) -> f64 {
        let rss = self.ss_signal + 2.0 * sigma * self.ss_cross + sigma * sigma * self.ss_noise;
        let tss = self.tss_signal + 2.0 * sigma * self.tss_cross + sigma * sigma * self.tss_noise;
        1.0 - rss / tss
    }
}

/// Number of cohorts averaged by [`calibrate_noise`].
pub const CALIBRATION_SEEDS: u64 = 5;

/// In-sample R^2 of OLS on the true feature columns (planted and sex),
/// averaged over the calibration cohorts, at noise scale `sigma`.
pub fn reference_r2(spec: &CohortSpec, sigma: f64) -> Result<f64> {
    let fits = calibration_fits(spec)?;
    Ok(fits.iter().map(|f| f.r2(sigma)).sum::<f64>() / fits.len() as f64)
}

fn calibration_fits(spec: &CohortSpec) -> Result<Vec<ReferenceFit>> {
    (0..CALIBRATION_SEEDS)
        .map(|k| ReferenceFit::new(&simulate(spec, rng::derive(rng::derive_str(spec.seed, "calibrate"), k))))
        .collect()
}

/// Noise scale at which the reference fit attains `target_r2` on average.
pub fn calibrate_noise(spec: &CohortSpec, target_r2: f64) -> Result<f64> {
    if !(target_r2 > 0.0 && target_r2 < 1.0) {
        return Err(Error::invalid(format!("target r2 must be in (0, 1), got {target_r2}")));
    }
    let mut probe = spec.clone();
    probe.noise_sd = 1.0;
    probe.validate()?;
    let fits = calibration_fits(&probe)?;
    let r2 = |s: f64| fits.iter().map(|f| f.r2(s)).sum::<f64>() / fits.len() as f64;
    let mut hi = fits.iter().map(|f| (f.tss_signal / spec.n as f64).sqrt()).fold(1e-12, f64::max);
    let mut guard = 0;
    while r2(hi) > target_r2 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NonConvergence(format!("r2 {target_r2} unattainable")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if r2(mid) > target_r2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = 0.5 * (lo + hi);
    if (r2(sigma) - target_r2).abs() > 0.02 || !(sigma > 0.0) {
        return Err(Error::NonConvergence(format!("r2 {target_r2} unattainable")));
    }
    Ok(sigma)
}
