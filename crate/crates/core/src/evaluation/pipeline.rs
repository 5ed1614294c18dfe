use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{holdout_split, kfold_split, CvConfig};
use super::metrics::{bin_residuals, compute_metrics, mean_metrics, Metrics, ResidualBins};
use crate::dataset::{DataMatrix, FeatureMatrix};
use crate::error::{Error, Result};
use crate::imputation::{hybrid_impute, impute_from_reference, ImputationConfig};
use crate::models::{fit, Hyperparams, ModelEntry, ModelFamily, ModelSpec, TrainedModel};
use crate::rng;
use crate::selectors::{Selector, SelectorConfig, SelectorReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub hyperparameters: Hyperparams,
    pub mean_fold_rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub hyperparameters: Hyperparams,
    /// Mean of the fold RMSEs at the chosen point; the selection criterion.
    pub mean_fold_rmse: f64,
    pub cv_metrics: Metrics,
    pub fold_metrics: Vec<Metrics>,
    pub points: Vec<GridPoint>,
}

/// Training and evaluation rows over the full feature set.
#[derive(Debug, Clone)]
struct Stage {
    x_train: FeatureMatrix,
    y_train: Vec<f64>,
    x_eval: FeatureMatrix,
    y_eval: Vec<f64>,
}

impl Stage {
    fn slice(x: &FeatureMatrix, y: &[f64], train: &[usize], eval: &[usize]) -> Stage {
        Stage {
            x_train: x.take_rows(train),
            y_train: train.iter().map(|&i| y[i]).collect(),
            x_eval: x.take_rows(eval),
            y_eval: eval.iter().map(|&i| y[i]).collect(),
        }
    }

    fn restrict(&self, names: &[String]) -> Result<Stage> {
        Ok(Stage {
            x_train: self.x_train.select_names(names)?,
            y_train: self.y_train.clone(),
            x_eval: self.x_eval.select_names(names)?,
            y_eval: self.y_eval.clone(),
        })
    }
}

fn fold_score(spec: &ModelSpec, stage: &Stage) -> Result<Metrics> {
    let model = fit(spec, &stage.x_train, &stage.y_train)?;
    compute_metrics(&stage.y_eval, &model.predict(&stage.x_eval)?)
}

fn search_stages(family: ModelFamily, grid: &[Hyperparams], folds: &[Stage], seed: u64) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::invalid("hyperparameter grid is empty"));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, Vec<Metrics>)> = None;
    for (k, hp) in grid.iter().enumerate() {
        let scored = ModelSpec::with_params(family, hp, seed)
            .and_then(|spec| folds.iter().map(|s| fold_score(&spec, s)).collect::<Result<Vec<_>>>());
        match scored {
            Ok(fm) => {
                let rmse = fm.iter().map(|m| m.rmse).sum::<f64>() / fm.len() as f64;
                points.push(GridPoint {
                    hyperparameters: hp.clone(),
                    mean_fold_rmse: Some(rmse),
                    error: None,
                });
                if best.as_ref().is_none_or(|b| rmse < b.1) {
                    best = Some((k, rmse, fm));
                }
            }
            Err(e) => points.push(GridPoint {
                hyperparameters: hp.clone(),
                mean_fold_rmse: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let (best_index, mean_fold_rmse, fold_metrics) = best.ok_or_else(|| {
        Error::NonConvergence(format!(
            "every grid point failed for {family}: {}",
            points[0].error.as_deref().unwrap_or("")
        ))
    })?;
    Ok(GridSearchResult {
        best_index,
        hyperparameters: grid[best_index].clone(),
        mean_fold_rmse,
        cv_metrics: mean_metrics(&fold_metrics),
        fold_metrics,
        points,
    })
}

fn fold_seed(cv: &CvConfig) -> u64 {
    rng::derive_str(cv.seed, "folds")
}

fn holdout_seed(cv: &CvConfig) -> u64 {
    rng::derive_str(cv.seed, "holdout")
}

/// Pick the grid point with the lowest mean k-fold RMSE; ties keep the
/// earlier point. Failing points are recorded and skipped.
pub fn grid_search(
    family: ModelFamily,
    grid: &[Hyperparams],
    x: &FeatureMatrix,
    y: &[f64],
    cv: &CvConfig,
    seed: u64,
) -> Result<GridSearchResult> {
    cv.validate()?;
    if y.len() != x.n_rows() {
        return Err(Error::invalid("target length differs from row count"));
    }
    let folds: Vec<Stage> = kfold_split(x.n_rows(), cv.folds, fold_seed(cv))?
        .iter()
        .map(|f| Stage::slice(x, y, &f.train, &f.validation))
        .collect();
    search_stages(family, grid, &folds, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// Impute and select once on the full table, then cross-validate.
    #[default]
    Paper,
    /// Refit imputation and selection inside every training split.
    #[serde(alias = "leak-free")]
    LeakFree,
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PipelineMode::Paper => "paper",
            PipelineMode::LeakFree => "leak-free",
        })
    }
}

impl FromStr for PipelineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(PipelineMode::Paper),
            "leak-free" | "leak_free" => Ok(PipelineMode::LeakFree),
            _ => Err(Error::invalid(format!("unknown pipeline mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub selector_name: String,
    pub model_name: String,
    pub family: ModelFamily,
    pub hyperparameters: Hyperparams,
    pub features: Vec<String>,
    pub cv_metrics: Metrics,
    pub mean_fold_rmse: f64,
    pub holdout_metrics: Option<Metrics>,
    pub residuals: Option<ResidualBins>,
    pub grid_points: Vec<GridPoint>,
    pub mode: PipelineMode,
    pub seed: u64,
    pub note: String,
}

impl EvalRecord {
    /// Leaderboard key: hold-out RMSE, or CV RMSE without a hold-out set.
    pub fn rank_rmse(&self) -> f64 {
        self.holdout_metrics.map_or(self.cv_metrics.rmse, |m| m.rmse)
    }

    pub fn rank_r2(&self) -> f64 {
        self.holdout_metrics.map_or(self.cv_metrics.r2, |m| m.r2)
    }
}

fn with_extras(report: &SelectorReport, extra: &[String]) -> Vec<String> {
    let mut names = report.feature_names();
    for e in extra {
        if !names.contains(e) {
            names.push(e.clone());
        }
    }
    names
}

/// Grid-search `entry` on the CV folds, refit the winner on the outer
/// training rows and score it on the outer evaluation rows. `reports` holds
/// one report per fold followed by the report for the outer split.
fn evaluate_stages(
    reports: &[&SelectorReport],
    entry: &ModelEntry,
    folds: &[Stage],
    outer: &Stage,
    extra: &[String],
    mode: PipelineMode,
    seed: u64,
) -> Result<(EvalRecord, TrainedModel)> {
    let restricted: Vec<Stage> = folds
        .iter()
        .zip(reports)
        .map(|(s, r)| s.restrict(&with_extras(r, extra)))
        .collect::<Result<_>>()?;
    let search = search_stages(entry.family, &entry.grid, &restricted, seed)?;
    let outer_report = reports[folds.len()];
    let features = with_extras(outer_report, extra);
    let outer = outer.restrict(&features)?;
    let spec = ModelSpec::with_params(entry.family, &search.hyperparameters, seed)?;
    let model = fit(&spec, &outer.x_train, &outer.y_train)?;
    let (holdout_metrics, residuals) = if outer.y_eval.is_empty() {
        (None, None)
    } else {
        let pred = model.predict(&outer.x_eval)?;
        let res: Vec<f64> = outer.y_eval.iter().zip(&pred).map(|(a, b)| a - b).collect();
        (Some(compute_metrics(&outer.y_eval, &pred)?), Some(bin_residuals(&res)?))
    };
    let mut note = Vec::new();
    if !extra.is_empty() {
        note.push(format!("added columns: {}", extra.join(" ")));
    }
    note.extend(model.diagnostics.warnings.iter().cloned());
    let record = EvalRecord {
        selector_name: outer_report.selector_name.clone(),
        model_name: entry.name.clone(),
        family: entry.family,
        hyperparameters: spec.hyperparameters.clone(),
        features,
        cv_metrics: search.cv_metrics,
        mean_fold_rmse: search.mean_fold_rmse,
        holdout_metrics,
        residuals,
        grid_points: search.points,
        mode,
        seed,
        note: note.join("; "),
    };
    Ok((record, model))
}

/// Restrict a complete design to the report's top-K features (plus
/// `extra_columns`), hold out `cv.holdout_fraction` of the rows, grid-search
/// the model on the remainder with k-fold CV, refit the best point on the
/// whole remainder and score it on the hold-out rows.
pub fn evaluate_combo(
    report: &SelectorReport,
    entry: &ModelEntry,
    x: &FeatureMatrix,
    y: &[f64],
    cv: &CvConfig,
    extra_columns: &[String],
    seed: u64,
) -> Result<(EvalRecord, TrainedModel)> {
    cv.validate()?;
    let (outer, folds) = paper_stages(x, y, cv)?;
    let reports = vec![report; folds.len() + 1];
    evaluate_stages(&reports, entry, &folds, &outer, extra_columns, PipelineMode::Paper, seed)
}

fn paper_stages(x: &FeatureMatrix, y: &[f64], cv: &CvConfig) -> Result<(Stage, Vec<Stage>)> {
    if y.len() != x.n_rows() {
        return Err(Error::invalid("target length differs from row count"));
    }
    let (train, hold) = holdout_split(x.n_rows(), cv.holdout_fraction, holdout_seed(cv));
    let outer = Stage::slice(x, y, &train, &hold);
    let folds = kfold_split(train.len(), cv.folds, fold_seed(cv))?
        .iter()
        .map(|f| Stage::slice(&outer.x_train, &outer.y_train, &f.train, &f.validation))
        .collect();
    Ok((outer, folds))
}

/// Per-row read counters for the fitting side of the leak-free pipeline.
#[derive(Debug)]
pub struct RowAccess {
    counts: Vec<AtomicUsize>,
}

impl RowAccess {
    pub fn new(n: usize) -> Self {
        RowAccess {
            counts: (0..n).map(|_| AtomicUsize::new(0)).collect(),
        }
    }

    fn read(&self, data: &DataMatrix, rows: &[usize]) -> DataMatrix {
        for &r in rows {
            self.counts[r].fetch_add(1, Ordering::Relaxed);
        }
        data.select_rows(rows)
    }

    pub fn count(&self, row: usize) -> usize {
        self.counts[row].load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        for c in &self.counts {
            c.store(0, Ordering::Relaxed);
        }
    }
}

/// Fit imputation and selection on `fit_rows` only, then complete
/// `eval_rows` against the imputed fitting rows. Fitting reads go through
/// `access`; evaluation rows are only ever read by the reference completion.
struct LeakFreeSplit {
    stage: Stage,
    reports: Vec<Result<SelectorReport>>,
}

pub fn leak_free_split(
    data: &DataMatrix,
    target: &str,
    fit_rows: &[usize],
    eval_rows: &[usize],
    selectors: &[Selector],
    config: &GridConfig,
    access: &RowAccess,
) -> Result<(FeatureMatrix, Vec<f64>, Vec<Result<SelectorReport>>)> {
    let split = leak_free_inner(data, target, fit_rows, eval_rows, selectors, config, access)?;
    Ok((split.stage.x_train, split.stage.y_train, split.reports))
}

fn leak_free_inner(
    data: &DataMatrix,
    target: &str,
    fit_rows: &[usize],
    eval_rows: &[usize],
    selectors: &[Selector],
    config: &GridConfig,
    access: &RowAccess,
) -> Result<LeakFreeSplit> {
    let t = data.column_index(target)?;
    let feature_cols: Vec<usize> = (0..data.n_cols()).filter(|&c| c != t).collect();
    let fit_part = access.read(data, fit_rows);
    let y_train = fit_part.complete_column(t)?.to_vec();
    let fit_features = fit_part.select_columns(&feature_cols);
    let imputed = if fit_features.is_complete() {
        fit_features
    } else {
        let cfg = ImputationConfig {
            seed: rng::derive_str(config.cv.seed, "impute"),
            ..config.imputation.clone()
        };
        hybrid_impute(&fit_features, &cfg)?.completed
    };
    let eval_part = data.select_rows(eval_rows);
    let y_eval = eval_part.complete_column(t)?.to_vec();
    let eval_features = eval_part.select_columns(&feature_cols);
    let eval_done = if eval_rows.is_empty() || eval_features.is_complete() {
        eval_features
    } else {
        impute_from_reference(&imputed, &eval_features, config.imputation.knn_k)?
    };
    let all: Vec<usize> = (0..feature_cols.len()).collect();
    let x_train = imputed.to_features(&all)?;
    let x_eval = if eval_rows.is_empty() {
        x_train.take_rows(&[])
    } else {
        eval_done.to_features(&all)?
    };
    let reports = selectors
        .par_iter()
        .map(|s| s.run(&x_train, &y_train, &selector_config(config, *s)))
        .collect();
    Ok(LeakFreeSplit {
        stage: Stage {
            x_train,
            y_train,
            x_eval,
            y_eval,
        },
        reports,
    })
}

fn selector_config(config: &GridConfig, s: Selector) -> SelectorConfig {
    SelectorConfig {
        seed: rng::derive_str(config.cv.seed, s.as_str()),
        ..config.selector.clone()
    }
}

fn combo_seed(config: &GridConfig, s: Selector, m: &ModelEntry) -> u64 {
    rng::derive_str(rng::derive_str(config.cv.seed, s.as_str()), &m.name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// `cv.seed` drives every split and every derived selector/model seed.
    pub cv: CvConfig,
    pub selector: SelectorConfig,
    pub imputation: ImputationConfig,
    pub mode: PipelineMode,
    pub extra_columns: Vec<String>,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            cv: CvConfig::default(),
            selector: SelectorConfig::default(),
            imputation: ImputationConfig::default(),
            mode: PipelineMode::Paper,
            extra_columns: Vec::new(),
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboFailure {
    pub selector_name: String,
    pub model_name: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub selector: String,
    pub imputer: String,
    pub model: String,
    pub r2: f64,
    pub rmse: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub mode: PipelineMode,
    pub imputer: String,
    /// Successful records in selector-major combination order.
    pub records: Vec<EvalRecord>,
    pub failures: Vec<ComboFailure>,
    pub leaderboard: Vec<LeaderboardRow>,
    /// Selector counts over the top 20 leaderboard rows.
    pub selector_frequency: Vec<(String, usize)>,
    /// Reports computed on the outer training data (or the full table in
    /// paper mode).
    pub reports: Vec<SelectorReport>,
    #[serde(skip)]
    pub models: Vec<TrainedModel>,
}

impl GridRun {
    /// Best record and its refit model.
    pub fn winner(&self) -> Option<(&EvalRecord, &TrainedModel)> {
        let row = self.leaderboard.first()?;
        let k = self
            .records
            .iter()
            .position(|r| r.selector_name == row.selector && r.model_name == row.model)?;
        Some((&self.records[k], &self.models[k]))
    }

    pub fn leaderboard_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rank", "selector", "imputer", "model", "r2", "rmse", "note"])
            .map_err(|e| Error::Io(e.into()))?;
        for r in &self.leaderboard {
            w.write_record([
                r.rank.to_string(),
                r.selector.clone(),
                r.imputer.clone(),
                r.model.clone(),
                r.r2.to_string(),
                r.rmse.to_string(),
                r.note.clone(),
            ])
            .map_err(|e| Error::Io(e.into()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Sort records by hold-out RMSE ascending, then R^2 descending, then by
/// combination order.
pub fn leaderboard(records: &[EvalRecord], imputer: &str) -> Vec<LeaderboardRow> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[a]
            .rank_rmse()
            .total_cmp(&records[b].rank_rmse())
            .then(records[b].rank_r2().total_cmp(&records[a].rank_r2()))
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .enumerate()
        .map(|(k, i)| {
            let r = &records[i];
            LeaderboardRow {
                rank: k + 1,
                selector: r.selector_name.clone(),
                imputer: imputer.to_string(),
                model: r.model_name.clone(),
                r2: r.rank_r2(),
                rmse: r.rank_rmse(),
                note: r.note.clone(),
            }
        })
        .collect()
}

/// How often each selector appears in the first `top` leaderboard rows,
/// sorted by count (ties by first appearance).
pub fn selector_frequency(board: &[LeaderboardRow], top: usize) -> Vec<(String, usize)> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for row in board.iter().take(top) {
        match out.iter_mut().find(|(s, _)| *s == row.selector) {
            Some(e) => e.1 += 1,
            None => out.push((row.selector.clone(), 1)),
        }
    }
    out.sort_by(|a, b| b.1.cmp(&a.1));
    out
}

type ComboOutcome = (usize, usize, Result<(EvalRecord, TrainedModel)>);

/// Evaluate every selector x model combination. Combination failures are
/// recorded and do not abort the run. Output is independent of the worker
/// count.
pub fn run_grid(
    selectors: &[Selector],
    models: &[ModelEntry],
    data: &DataMatrix,
    target: &str,
    config: &GridConfig,
) -> Result<GridRun> {
    if selectors.is_empty() || models.is_empty() {
        return Err(Error::invalid("selector and model lists must be nonempty"));
    }
    config.cv.validate()?;
    data.column_index(target)?;
    for e in &config.extra_columns {
        if e == target {
            return Err(Error::invalid("extra columns cannot include the target"));
        }
        data.column_index(e)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| match config.mode {
        PipelineMode::Paper => run_paper(selectors, models, data, target, config),
        PipelineMode::LeakFree => run_leak_free(selectors, models, data, target, config),
    })
}

fn assemble(
    selectors: &[Selector],
    models: &[ModelEntry],
    outcomes: Vec<ComboOutcome>,
    reports: Vec<SelectorReport>,
    mode: PipelineMode,
    imputer: String,
) -> GridRun {
    let mut records = Vec::new();
    let mut trained = Vec::new();
    let mut failures = Vec::new();
    for (s, m, out) in outcomes {
        match out {
            Ok((r, t)) => {
                records.push(r);
                trained.push(t);
            }
            Err(e) => failures.push(ComboFailure {
                selector_name: selectors[s].as_str().to_string(),
                model_name: models[m].name.clone(),
                error: e.to_string(),
            }),
        }
    }
    let board = leaderboard(&records, &imputer);
    GridRun {
        mode,
        selector_frequency: selector_frequency(&board, 20),
        leaderboard: board,
        imputer,
        records,
        failures,
        reports,
        models: trained,
    }
}

fn combos(selectors: &[Selector], models: &[ModelEntry]) -> Vec<(usize, usize)> {
    (0..selectors.len())
        .flat_map(|s| (0..models.len()).map(move |m| (s, m)))
        .collect()
}

fn run_paper(
    selectors: &[Selector],
    models: &[ModelEntry],
    data: &DataMatrix,
    target: &str,
    config: &GridConfig,
) -> Result<GridRun> {
    let (complete, imputer) = if data.is_complete() {
        (data.clone(), "none".to_string())
    } else {
        let cfg = ImputationConfig {
            seed: rng::derive_str(config.cv.seed, "impute"),
            ..config.imputation.clone()
        };
        (hybrid_impute(data, &cfg)?.completed, "knn+mice".to_string())
    };
    let (x, y) = complete.split_target(target)?;
    let reports: Vec<Result<SelectorReport>> = selectors
        .par_iter()
        .map(|s| s.run(&x, &y, &selector_config(config, *s)))
        .collect();
    let (outer, folds) = paper_stages(&x, &y, &config.cv)?;
    let outcomes: Vec<ComboOutcome> = combos(selectors, models)
        .into_par_iter()
        .map(|(s, m)| {
            let out = match &reports[s] {
                Ok(rep) => {
                    let reps = vec![rep; folds.len() + 1];
                    evaluate_stages(
                        &reps,
                        &models[m],
                        &folds,
                        &outer,
                        &config.extra_columns,
                        PipelineMode::Paper,
                        combo_seed(config, selectors[s], &models[m]),
                    )
                }
                Err(e) => Err(Error::Precondition(format!("selector failed: {e}"))),
            };
            (s, m, out)
        })
        .collect();
    let ok_reports = reports.into_iter().filter_map(|r| r.ok()).collect();
    Ok(assemble(selectors, models, outcomes, ok_reports, PipelineMode::Paper, imputer))
}

fn run_leak_free(
    selectors: &[Selector],
    models: &[ModelEntry],
    data: &DataMatrix,
    target: &str,
    config: &GridConfig,
) -> Result<GridRun> {
    let cv = &config.cv;
    let access = RowAccess::new(data.n_rows());
    let (train, hold) = holdout_split(data.n_rows(), cv.holdout_fraction, holdout_seed(cv));
    let fold_rows = kfold_split(train.len(), cv.folds, fold_seed(cv))?;
    let mut splits: Vec<(Vec<usize>, Vec<usize>)> = fold_rows
        .iter()
        .map(|f| {
            (
                f.train.iter().map(|&i| train[i]).collect(),
                f.validation.iter().map(|&i| train[i]).collect(),
            )
        })
        .collect();
    splits.push((train, hold));
    let prepared: Vec<LeakFreeSplit> = splits
        .iter()
        .map(|(fit_rows, eval_rows)| leak_free_inner(data, target, fit_rows, eval_rows, selectors, config, &access))
        .collect::<Result<_>>()?;
    let k = prepared.len() - 1;
    let stages: Vec<Stage> = prepared.iter().map(|p| p.stage.clone()).collect();
    let outcomes: Vec<ComboOutcome> = combos(selectors, models)
        .into_par_iter()
        .map(|(s, m)| {
            let reps: Result<Vec<&SelectorReport>> = prepared
                .iter()
                .map(|p| {
                    p.reports[s]
                        .as_ref()
                        .map_err(|e| Error::Precondition(format!("selector failed: {e}")))
                })
                .collect();
            let out = reps.and_then(|reps| {
                evaluate_stages(
                    &reps,
                    &models[m],
                    &stages[..k],
                    &stages[k],
                    &config.extra_columns,
                    PipelineMode::LeakFree,
                    combo_seed(config, selectors[s], &models[m]),
                )
            });
            (s, m, out)
        })
        .collect();
    let imputer = if data.is_complete() { "none" } else { "knn+mice (per split)" }.to_string();
    let reports = prepared
        .into_iter()
        .next_back()
        .map(|p| p.reports.into_iter().filter_map(|r| r.ok()).collect())
        .unwrap_or_default();
    Ok(assemble(selectors, models, outcomes, reports, PipelineMode::LeakFree, imputer))
}
