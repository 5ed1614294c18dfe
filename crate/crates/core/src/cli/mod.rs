//! Command-line front end. Every subcommand writes its outputs plus a
//! `manifest.json` into an output directory; `replay` reruns a manifest.

mod config;
mod manifest;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::{parse_models, parse_selectors, split_list, RunConfig};
pub use manifest::{sha256_file, InputHash, Manifest, MANIFEST_FILE};

use crate::dataset::{eda_report, load_csv, write_csv, ColumnKind, DataMatrix, FeatureMatrix};
use crate::error::{Error, ErrorClass, Result};
use crate::evaluation::{
    coefficient_magnitudes, feature_importance_report, run_grid, sex_gap, EvalRecord, GridConfig, LeaderboardRow,
    PipelineMode, ResidualBins,
};
use crate::imputation::{hybrid_impute, ImputationConfig, MaskMechanism};
use crate::models::{fit, Hyperparams, ModelFamily, ModelSpec, TrainedModel};
use crate::selectors::{consensus_rank, SelectorConfig, SelectorReport};
use crate::synthgen::{calibrate_noise, generate_cohort, CohortSpec};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BWML_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "bwml", version, about = "Birth-weight regression toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Summary statistics, distribution classes, missingness and MCAR test.
    Eda(EdaArgs),
    /// KNN for discrete gaps, chained equations for continuous gaps.
    Impute(ImputeArgs),
    /// Run feature selectors and a consensus ranking on a complete table.
    Select(SelectArgs),
    /// Fit one model and save it as JSON.
    Train(TrainArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Evaluate every selector x model combination.
    Grid(GridArgs),
    /// Generate a synthetic cohort with planted ground truth.
    Synth(SynthArgs),
    /// Summarize a grid run directory.
    Report(ReportArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OutArgs {
    /// Output directory (default: $BWML_OUT_DIR or the current directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl OutArgs {
    fn resolve(&self) -> Result<PathBuf> {
        let dir = self
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EdaArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated columns forced to discrete.
    #[arg(long, default_value = "")]
    pub discrete: String,
    /// Comma-separated columns forced to continuous.
    #[arg(long, default_value = "")]
    pub continuous: String,
    /// Comma-separated columns for the MCAR test (default: all continuous).
    #[arg(long)]
    pub mcar_columns: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ImputeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub mice_cycles: usize,
    #[arg(long, default_value_t = 5)]
    pub pmm_donors: usize,
    #[arg(long, default_value_t = 5)]
    pub knn_k: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub ridge_lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "fl_bw")]
    pub target: String,
    /// Comma-separated selector names, or `all`.
    #[arg(long, default_value = "all")]
    pub selectors: String,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "fl_bw")]
    pub target: String,
    #[arg(long)]
    pub model: String,
    /// Hyperparameter override `name=value`; repeatable.
    #[arg(long = "param")]
    pub params: Vec<String>,
    /// Comma-separated feature columns (default: every non-target column).
    #[arg(long)]
    pub features: Option<String>,
    /// Use the ranked features of a selector report JSON.
    #[arg(long, conflicts_with = "features")]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub selectors: Option<String>,
    /// `standard`, `extended`, or comma-separated families / entry names.
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub mode: Option<PipelineMode>,
    #[arg(long)]
    pub extra_columns: Option<String>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
    /// Fully resolved configuration, filled in before the manifest is written.
    #[arg(skip)]
    #[serde(default)]
    pub resolved: Option<RunConfig>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 791)]
    pub n: usize,
    /// Calibrate the noise so the reference fit reaches this R^2.
    #[arg(long, default_value_t = 0.62)]
    pub target_r2: f64,
    /// Use this noise scale instead of calibrating.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long, default_value_t = 0.0678)]
    pub missing_rate: f64,
    #[arg(long, value_parser = parse_mechanism, default_value = "mcar")]
    pub mechanism: MaskMechanism,
    #[arg(long)]
    pub interaction: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Output directory of a `grid` run.
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Table for the sex-gap statistic.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "fl_bw")]
    pub target: String,
    #[arg(long, default_value = "sex")]
    pub sex: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_mechanism(s: &str) -> std::result::Result<MaskMechanism, String> {
    match s {
        "mcar" => Ok(MaskMechanism::Mcar),
        "mar" => Ok(MaskMechanism::Mar),
        "mnar" => Ok(MaskMechanism::Mnar),
        _ => Err(format!("unknown mechanism {s:?} (mcar, mar, mnar)")),
    }
}

/// Exit code for an error class.
pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            exit_code(e.class())
        }
    }
}

/// SHA-256 of the resolved command with its output directory cleared, so runs
/// that differ only in where they write share a digest.
pub fn config_digest(command: &Command) -> Result<String> {
    let bare = with_out_dir(command.clone(), None);
    Ok(manifest::sha256_bytes(serde_json::to_string(&bare)?.as_bytes()))
}

/// Run a command and return its output directory.
pub fn execute(command: Command) -> Result<PathBuf> {
    match command {
        Command::Eda(a) => eda(a),
        Command::Impute(a) => impute(a),
        Command::Select(a) => select(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Grid(a) => grid(a),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report(a),
        Command::Replay(a) => replay(a),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(path.to_path_buf())
}

fn finish(command: Command, dir: &Path, inputs: &[PathBuf], outputs: Vec<PathBuf>) -> Result<PathBuf> {
    let command = with_out_dir(command, Some(dir));
    Manifest::new(command, inputs, outputs)?.write(dir)?;
    Ok(dir.to_path_buf())
}

fn with_out_dir(mut command: Command, dir: Option<&Path>) -> Command {
    let d = dir.map(Path::to_path_buf);
    match &mut command {
        Command::Eda(a) => a.out.out_dir = d,
        Command::Impute(a) => a.out.out_dir = d,
        Command::Select(a) => a.out.out_dir = d,
        Command::Train(a) => a.out.out_dir = d,
        Command::Predict(a) => a.out.out_dir = d,
        Command::Grid(a) => {
            a.out.out_dir = d.clone();
            if let Some(r) = &mut a.resolved {
                r.out_dir = d;
            }
        }
        Command::Synth(a) => a.out.out_dir = d,
        Command::Report(a) => a.out.out_dir = d,
        Command::Replay(a) => a.out_dir = d,
    }
    command
}

fn column_indices(data: &DataMatrix, names: &[String]) -> Result<Vec<usize>> {
    names.iter().map(|n| data.column_index(n)).collect()
}

fn eda(a: EdaArgs) -> Result<PathBuf> {
    let dir = a.out.resolve()?;
    let mut schema = HashMap::new();
    for c in split_list(&a.discrete) {
        schema.insert(c, ColumnKind::Discrete);
    }
    for c in split_list(&a.continuous) {
        schema.insert(c, ColumnKind::Continuous);
    }
    let mut data = load_csv(&a.input, Some(&schema))?;
    let mcar = a
        .mcar_columns
        .as_deref()
        .map(|s| column_indices(&data, &split_list(s)))
        .transpose()?;
    let rep = eda_report(&mut data, mcar.as_deref())?;
    let out = write_json(&dir.join("eda.json"), &rep)?;
    finish(Command::Eda(a.clone()), &dir, &[a.input], vec![out])
}

fn impute(a: ImputeArgs) -> Result<PathBuf> {
    let dir = a.out.resolve()?;
    let data = load_csv(&a.input, None)?;
    let cfg = ImputationConfig {
        mice_cycles: a.mice_cycles,
        pmm_donors: a.pmm_donors,
        knn_k: a.knn_k,
        ridge_lambda: a.ridge_lambda,
        seed: a.seed,
    };
    let res = hybrid_impute(&data, &cfg)?;
    let csv = dir.join("completed.csv");
    write_csv(&res.completed, &csv)?;
    let diag = write_json(&dir.join("imputation.json"), &res.diagnostics(&cfg))?;
    finish(Command::Impute(a.clone()), &dir, &[a.input], vec![csv, diag])
}

fn select(a: SelectArgs) -> Result<PathBuf> {
    let dir = a.out.resolve()?;
    let data = load_csv(&a.input, None)?;
    let (x, y) = data.split_target(&a.target)?;
    let selectors = parse_selectors(&split_list(&a.selectors))?;
    let reports_dir = dir.join("reports");
    fs::create_dir_all(&reports_dir)?;
    let mut reports = Vec::new();
    let mut outputs = Vec::new();
    for s in &selectors {
        let cfg = SelectorConfig {
            top_k: a.top_k,
            seed: crate::rng::derive_str(a.seed, s.as_str()),
            ..Default::default()
        };
        let rep = s.run(&x, &y, &cfg)?;
        outputs.push(write_json(&reports_dir.join(format!("{}.json", s.as_str())), &rep)?);
        reports.push(rep);
    }
    let consensus = consensus_rank(&reports, x.names(), a.top_k)?;
    outputs.push(write_json(&dir.join("consensus.json"), &consensus)?);
    let names: Vec<String> = selectors.iter().map(|s| s.as_str().to_string()).collect();
    let freq = dir.join("selector_frequency.csv");
    fs::write(&freq, consensus.to_csv(&names))?;
    outputs.push(freq);
    finish(Command::Select(a.clone()), &dir, &[a.input], outputs)
}

fn parse_params(params: &[String]) -> Result<Hyperparams> {
    let mut out = Hyperparams::new();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("parameter {p:?} is not name=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("parameter {k:?} has non-numeric value {v:?}")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn train(a: TrainArgs) -> Result<PathBuf> {
    let dir = a.out.resolve()?;
    let data = load_csv(&a.input, None)?;
    let (x, y) = data.split_target(&a.target)?;
    let mut inputs = vec![a.input.clone()];
    let x = if let Some(f) = &a.features {
        x.select_names(&split_list(f))?
    } else if let Some(r) = &a.report {
        let rep: SelectorReport = serde_json::from_str(&fs::read_to_string(r)?)?;
        inputs.push(r.clone());
        x.select_names(&rep.feature_names())?
    } else {
        x
    };
    let family: ModelFamily = a.model.parse()?;
    let spec = ModelSpec::with_params(family, &parse_params(&a.params)?, a.seed)?;
    let model = fit(&spec, &x, &y)?;
    let path = dir.join("model.json");
    model.save(&path)?;
    finish(Command::Train(a.clone()), &dir, &inputs, vec![path])
}

fn predict(a: PredictArgs) -> Result<PathBuf> {
    let dir = a.out.resolve()?;
    let model = TrainedModel::load(&a.model)?;
    let data = load_csv(&a.input, None)?;
    let missing: Vec<String> = model
        .feature_names
        .iter()
        .filter(|n| data.column_index(n).is_err())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::FeatureMismatch {
            missing,
            unexpected: Vec::new(),
        });
    }
    let x: FeatureMatrix = data.to_features(&column_indices(&data, &model.feature_names)?)?;
    let pred = model.predict(&x)?;
    let path = dir.join("predictions.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(["row", "prediction"]).map_err(csv_err)?;
    for (i, p) in pred.iter().enumerate() {
        w.write_record([i.to_string(), p.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    finish(Command::Predict(a.clone()), &dir, &[a.model, a.input], vec![path])
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

fn resolve_grid(a: &GridArgs) -> Result<RunConfig> {
    if let Some(r) = &a.resolved {
        return Ok(r.clone());
    }
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &a.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &a.target {
        cfg.target = v.clone();
    }
    if let Some(v) = &a.selectors {
        cfg.selectors = split_list(v);
    }
    if let Some(v) = &a.models {
        cfg.models = split_list(v);
    }
    if let Some(v) = a.mode {
        cfg.mode = v;
    }
    if let Some(v) = &a.extra_columns {
        cfg.extra_columns = split_list(v);
    }
    if let Some(v) = a.top_k {
        cfg.selector.top_k = v;
    }
    if let Some(v) = a.folds {
        cfg.cv.folds = v;
    }
    if let Some(v) = a.holdout_fraction {
        cfg.cv.holdout_fraction = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.workers {
        cfg.workers = v;
    }
    if let Some(v) = &a.out.out_dir {
        cfg.out_dir = Some(v.clone());
    }
    cfg.cv.seed = cfg.seed;
    cfg.imputation.seed = cfg.seed;
    cfg.selector.seed = cfg.seed;
    if cfg.input.is_none() {
        return Err(Error::invalid("grid needs an input table (--input or config)"));
    }
    Ok(cfg)
}

fn grid(mut a: GridArgs) -> Result<PathBuf> {
    let cfg = resolve_grid(&a)?;
    let dir = OutArgs {
        out_dir: cfg.out_dir.clone(),
    }
    .resolve()?;
    let input = cfg.input.clone().expect("resolved input");
    let data = load_csv(&input, None)?;
    let run = run_grid(
        &cfg.selector_list()?,
        &cfg.model_list()?,
        &data,
        &cfg.target,
        &GridConfig {
            cv: cfg.cv.clone(),
            selector: cfg.selector.clone(),
            imputation: cfg.imputation.clone(),
            mode: cfg.mode,
            extra_columns: cfg.extra_columns.clone(),
            workers: cfg.workers,
        },
    )?;
    let mut outputs = Vec::new();
    let board = dir.join("leaderboard.csv");
    fs::write(&board, run.leaderboard_csv()?)?;
    outputs.push(board);
    outputs.push(write_json(&dir.join("records.json"), &run.records)?);
    outputs.push(write_json(&dir.join("failures.json"), &run.failures)?);
    outputs.push(write_json(&dir.join("selector_reports.json"), &run.reports)?);
    let freq = dir.join("selector_frequency.csv");
    let mut text = String::from("selector,count\n");
    for (s, c) in &run.selector_frequency {
        text.push_str(&format!("{s},{c}\n"));
    }
    fs::write(&freq, text)?;
    outputs.push(freq);
    if let Some((rec, model)) = run.winner() {
        if let Some(bins) = &rec.residuals {
            let p = dir.join("residual_bins.csv");
            fs::write(&p, bins.to_csv())?;
            outputs.push(p);
        }
        let (kind, rows) = match feature_importance_report(model) {
            Ok(r) => ("importance", r),
            Err(Error::LinearFamily(_)) => ("coefficient_magnitude", coefficient_magnitudes(model)?),
            Err(e) => return Err(e),
        };
        let p = dir.join("feature_importance.csv");
        let mut text = format!("feature,{kind}\n");
        for (f, v) in &rows {
            text.push_str(&format!("{f},{v}\n"));
        }
        fs::write(&p, text)?;
        outputs.push(p);
    }
    a.resolved = Some(cfg);
    finish(Command::Grid(a), &dir, &[input], outputs)
}

fn synth(a: SynthArgs) -> Result<PathBuf> {
    let dir = a.out.resolve()?;
    let mut spec = CohortSpec {
        n: a.n,
        missing_rate: a.missing_rate,
        mechanism: a.mechanism,
        seed: a.seed,
        ..Default::default()
    };
    if let Some(i) = a.interaction {
        spec.interaction = i;
    }
    spec.noise_sd = match a.noise_sd {
        Some(s) => s,
        None => calibrate_noise(&spec, a.target_r2)?,
    };
    let (data, truth) = generate_cohort(&spec)?;
    let csv = dir.join("cohort.csv");
    write_csv(&data, &csv)?;
    let truth_path = write_json(&dir.join("ground_truth.json"), &truth)?;
    let spec_path = write_json(&dir.join("cohort_spec.json"), &spec)?;
    finish(Command::Synth(a), &dir, &[], vec![csv, truth_path, spec_path])
}

#[derive(Debug, Serialize)]
struct RunSummary {
    mode: Option<PipelineMode>,
    records: usize,
    top: Vec<LeaderboardRow>,
    selector_frequency: Vec<(String, usize)>,
    winner_residuals: Option<ResidualBins>,
    sex_gap: Option<crate::evaluation::SexGap>,
}

fn report(a: ReportArgs) -> Result<PathBuf> {
    let dir = a.out.resolve()?;
    let records_path = a.run_dir.join("records.json");
    let records: Vec<EvalRecord> = serde_json::from_str(&fs::read_to_string(&records_path)?)?;
    let board = crate::evaluation::leaderboard(&records, "");
    let winner_residuals = board.first().and_then(|w| {
        records
            .iter()
            .find(|r| r.selector_name == w.selector && r.model_name == w.model)
            .and_then(|r| r.residuals.clone())
    });
    let mut inputs = vec![records_path];
    let gap = match &a.input {
        Some(p) => {
            inputs.push(p.clone());
            Some(sex_gap(&load_csv(p, None)?, &a.target, &a.sex)?)
        }
        None => None,
    };
    let summary = RunSummary {
        mode: records.first().map(|r| r.mode),
        records: records.len(),
        selector_frequency: crate::evaluation::selector_frequency(&board, 20),
        top: board.into_iter().take(a.top).collect(),
        winner_residuals,
        sex_gap: gap,
    };
    println!("mode: {}", summary.mode.map_or("-".to_string(), |m| m.to_string()));
    for r in &summary.top {
        println!("{:>3}  {:<14} {:<26} r2 {:.4}  rmse {:.2}", r.rank, r.selector, r.model, r.r2, r.rmse);
    }
    if let Some(g) = &summary.sex_gap {
        println!("sex gap {:.1} g (95% CI {:.1} to {:.1})", g.gap, g.ci_low, g.ci_high);
    }
    let out = write_json(&dir.join("report.json"), &summary)?;
    finish(Command::Report(a.clone()), &dir, &inputs, vec![out])
}

fn replay(a: ReplayArgs) -> Result<PathBuf> {
    let manifest = Manifest::read(&a.manifest)?;
    manifest.verify_inputs()?;
    let command = match a.out_dir {
        Some(d) => {
            fs::create_dir_all(&d)?;
            with_out_dir(manifest.command, Some(&d))
        }
        None => manifest.command,
    };
    if matches!(command, Command::Replay(_)) {
        return Err(Error::invalid("a replay manifest cannot replay itself"));
    }
    execute(command)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_cli(["bwml", "frobnicate"]), 1);
        assert_eq!(run_cli(["bwml"]), 1);
        assert_eq!(run_cli(["bwml", "--help"]), 0);
    }

    #[test]
    fn params_parse() {
        let p = parse_params(&["lambda=0.5".into(), " n_trees = 10".into()]).unwrap();
        assert_eq!(p["lambda"], 0.5);
        assert_eq!(p["n_trees"], 10.0);
        assert!(parse_params(&["lambda".into()]).is_err());
        assert!(parse_params(&["lambda=abc".into()]).is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, "input = \"a.csv\"\nseed = 3\nworkers = 2\n[cv]\nfolds = 4\n").unwrap();
        let args = GridArgs {
            config: Some(cfg),
            input: None,
            target: None,
            selectors: Some("bart,lasso".into()),
            models: None,
            mode: None,
            extra_columns: None,
            top_k: None,
            folds: Some(3),
            holdout_fraction: None,
            seed: None,
            workers: None,
            out: OutArgs { out_dir: None },
            resolved: None,
        };
        let r = resolve_grid(&args).unwrap();
        assert_eq!(r.cv.folds, 3);
        assert_eq!(r.cv.seed, 3);
        assert_eq!(r.workers, 2);
        assert_eq!(r.selectors, vec!["bart", "lasso"]);
    }
}
