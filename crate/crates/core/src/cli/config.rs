use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{CvConfig, PipelineMode};
use crate::imputation::ImputationConfig;
use crate::models::{extended_zoo, standard_zoo, ModelEntry, ModelFamily};
use crate::selectors::{Selector, SelectorConfig};

/// Resolved settings for a `grid` run. Loaded from TOML, then overridden by
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub target: String,
    /// Selector names, or `["all"]`.
    pub selectors: Vec<String>,
    /// Entries are `standard`, `extended`, a family name or an extended-zoo
    /// entry name.
    pub models: Vec<String>,
    pub imputation: ImputationConfig,
    pub cv: CvConfig,
    pub selector: SelectorConfig,
    pub mode: PipelineMode,
    pub extra_columns: Vec<String>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            target: "fl_bw".into(),
            selectors: vec!["all".into()],
            models: vec!["extended".into()],
            imputation: ImputationConfig::default(),
            cv: CvConfig::default(),
            selector: SelectorConfig::default(),
            mode: PipelineMode::Paper,
            extra_columns: Vec::new(),
            out_dir: None,
            seed: 0,
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))
    }

    pub fn selector_list(&self) -> Result<Vec<Selector>> {
        parse_selectors(&self.selectors)
    }

    pub fn model_list(&self) -> Result<Vec<ModelEntry>> {
        parse_models(&self.models)
    }
}

pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

pub fn parse_selectors(names: &[String]) -> Result<Vec<Selector>> {
    let mut out = Vec::new();
    for n in names {
        if n == "all" {
            out.extend(Selector::ALL);
        } else {
            out.push(n.parse()?);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no selectors configured"));
    }
    Ok(out)
}

pub fn parse_models(names: &[String]) -> Result<Vec<ModelEntry>> {
    let mut out = Vec::new();
    for n in names {
        match n.as_str() {
            "standard" => out.extend(standard_zoo()),
            "extended" => out.extend(extended_zoo()),
            other => {
                let entry = extended_zoo()
                    .into_iter()
                    .find(|e| e.name == other)
                    .map_or_else(|| other.parse::<ModelFamily>().map(ModelEntry::standard), Ok)?;
                out.push(entry);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no models configured"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_lists() {
        let cfg: RunConfig = toml::from_str(
            r#"
            target = "bw"
            selectors = ["bart", "lasso"]
            models = ["standard", "bagged_trees"]
            mode = "leak_free"
            [cv]
            folds = 4
            "#,
        )
        .unwrap();
        assert_eq!(cfg.cv.folds, 4);
        assert_eq!(cfg.cv.holdout_fraction, 0.2);
        assert_eq!(cfg.mode, PipelineMode::LeakFree);
        assert_eq!(cfg.selector_list().unwrap(), vec![Selector::Bart, Selector::Lasso]);
        assert_eq!(cfg.model_list().unwrap().len(), 9);
        assert_eq!(RunConfig::default().model_list().unwrap().len(), 12);
        assert_eq!(RunConfig::default().selector_list().unwrap().len(), 12);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        let dashed: RunConfig = toml::from_str("mode = \"leak-free\"").unwrap();
        assert_eq!(dashed.mode, PipelineMode::LeakFree);
        assert!(parse_models(&["svr".into()]).is_err());
    }
}
