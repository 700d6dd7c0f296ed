//! Run configuration: a versioned TOML document resolved against CLI
//! overrides.
//!
//! - Paths inside the file are relative to the file's directory.
//! - Every master-file indicator column must appear in `[columns]`.
//! - Model sections override only the fields they name; everything else
//!   keeps the library defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use disagg_core::preprocess::{TransformKind, TransformSpec};
use disagg_core::regressors::{
    ElasticNetConfig, FeedForwardConfig, GradientBoostConfig, RegressorKind, RegressorSpec,
};

use crate::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

/// Full run configuration as parsed from TOML.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub country: String,
    /// Master CSV path, relative to the config file.
    pub master: String,
    /// Output directory, relative to the config file.
    pub out_dir: String,
    pub seed: u64,
    #[serde(default = "default_gdp_column")]
    pub gdp_column: String,
    /// Transform kind per indicator column; must cover the master file
    /// exactly.
    pub columns: BTreeMap<String, TransformKind>,
    #[serde(default)]
    pub lags: LagSection,
    #[serde(default)]
    pub models: ModelSection,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub reconciliation: ReconciliationSection,
    #[serde(default)]
    pub explain: ExplainSection,
}

fn default_gdp_column() -> String {
    "GDP".to_string()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagSection {
    /// Quarterly lag depths evaluated as separate cells.
    pub counts: Vec<usize>,
}

impl Default for LagSection {
    fn default() -> Self {
        Self { counts: vec![0, 1, 2] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kinds: Vec<RegressorKind>,
    #[serde(default)]
    pub elastic_net: ElasticNetOverrides,
    #[serde(default)]
    pub gradient_boost: GradientBoostOverrides,
    #[serde(default)]
    pub feedforward: FeedForwardOverrides,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kinds: vec![RegressorKind::ChowLin, RegressorKind::ElasticNet],
            elastic_net: ElasticNetOverrides::default(),
            gradient_boost: GradientBoostOverrides::default(),
            feedforward: FeedForwardOverrides::default(),
        }
    }
}

/// Optional elastic-net knobs; unset fields keep library defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticNetOverrides {
    pub folds: Option<usize>,
    pub mix_grid: Option<Vec<f64>>,
    pub n_alphas: Option<usize>,
    pub bootstrap: Option<usize>,
}

/// Optional gradient-boosting grid overrides.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientBoostOverrides {
    pub folds: Option<usize>,
    pub depths: Option<Vec<usize>>,
    pub learning_rates: Option<Vec<f64>>,
    pub tree_counts: Option<Vec<usize>>,
    pub subsamples: Option<Vec<f64>>,
    pub leaf_l2: Option<Vec<f64>>,
    pub min_child_weights: Option<Vec<f64>>,
}

/// Optional feedforward search overrides.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedForwardOverrides {
    pub trials: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub learning_rate: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    /// Share of the sample in the first training window.
    pub initial_ratio: Option<f64>,
    /// Exact quarters in the first training window; excludes the ratio.
    pub initial_quarters: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconciliationSection {
    pub mode: ReconciliationMode,
    /// Index value of the month before the first estimate.
    pub base_level: f64,
}

impl Default for ReconciliationSection {
    fn default() -> Self {
        Self {
            mode: ReconciliationMode::Ma5,
            base_level: 100.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconciliationMode {
    /// Minimum-norm adjustment under five-month moving-average constraints.
    Ma5,
    /// Proportional scaling so three-month sums hit quarterly totals.
    Denton,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainSection {
    /// Permutations when the design is too wide for exact enumeration.
    pub permutations: usize,
    /// Rows kept in the importance ranking output.
    pub top: usize,
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            permutations: 10_000,
            top: 10,
        }
    }
}

/// Command-line overrides applied after parsing.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<String>,
    pub country: Option<String>,
}

/// Configuration resolved against its file location and CLI overrides.
#[derive(Clone, Debug)]
pub struct ResolvedConfig {
    pub run: RunConfig,
    /// Directory of the config file; anchors relative paths.
    pub base_dir: PathBuf,
}

impl ResolvedConfig {
    pub fn master_path(&self) -> PathBuf {
        self.base_dir.join(&self.run.master)
    }

    pub fn out_path(&self) -> PathBuf {
        self.base_dir.join(&self.run.out_dir)
    }

    /// Transform spec over the configured indicator columns.
    pub fn transform_spec(&self) -> CliResult<TransformSpec> {
        TransformSpec::new(
            self.run
                .columns
                .iter()
                .map(|(c, k)| (c.clone(), *k))
                .collect(),
        )
        .map_err(CliError::from)
    }

    /// Regressor spec for one evaluation cell, with overrides applied.
    pub fn regressor_spec(&self, kind: RegressorKind, seed: u64) -> RegressorSpec {
        let mut spec = RegressorSpec::new(kind, seed);
        let m = &self.run.models;
        apply_elastic_net(&mut spec.elastic_net, &m.elastic_net);
        apply_gradient_boost(&mut spec.gradient_boost, &m.gradient_boost);
        apply_feedforward(&mut spec.feedforward, &m.feedforward);
        spec
    }

    pub fn bootstrap_replicates(&self) -> usize {
        self.run
            .models
            .elastic_net
            .bootstrap
            .unwrap_or_else(|| ElasticNetConfig::default().bootstrap)
    }
}

fn apply_elastic_net(config: &mut ElasticNetConfig, over: &ElasticNetOverrides) {
    if let Some(v) = over.folds {
        config.folds = v;
    }
    if let Some(v) = &over.mix_grid {
        config.mix_grid = v.clone();
    }
    if let Some(v) = over.n_alphas {
        config.n_alphas = v;
    }
    if let Some(v) = over.bootstrap {
        config.bootstrap = v;
    }
}

fn apply_gradient_boost(config: &mut GradientBoostConfig, over: &GradientBoostOverrides) {
    if let Some(v) = over.folds {
        config.folds = v;
    }
    if let Some(v) = &over.depths {
        config.depths = v.clone();
    }
    if let Some(v) = &over.learning_rates {
        config.learning_rates = v.clone();
    }
    if let Some(v) = &over.tree_counts {
        config.tree_counts = v.clone();
    }
    if let Some(v) = &over.subsamples {
        config.subsamples = v.clone();
    }
    if let Some(v) = &over.leaf_l2 {
        config.leaf_l2 = v.clone();
    }
    if let Some(v) = &over.min_child_weights {
        config.min_child_weights = v.clone();
    }
}

fn apply_feedforward(config: &mut FeedForwardConfig, over: &FeedForwardOverrides) {
    if let Some(v) = over.trials {
        config.trials = v;
    }
    if let Some(v) = over.max_epochs {
        config.max_epochs = v;
    }
    if let Some(v) = over.patience {
        config.patience = v;
    }
    if let Some(v) = over.learning_rate {
        config.learning_rate = v;
    }
}

/// Loads, validates, and resolves a config file.
pub fn load_config(path: &Path, overrides: &Overrides) -> CliResult<ResolvedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("cannot read config {}: {e}", path.display()))
    })?;
    let mut run: RunConfig = toml::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
    if let Some(seed) = overrides.seed {
        run.seed = seed;
    }
    if let Some(out) = &overrides.out_dir {
        run.out_dir = out.clone();
    }
    if let Some(country) = &overrides.country {
        run.country = country.clone();
    }
    validate(&run)?;
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    Ok(ResolvedConfig { run, base_dir })
}

fn validate(run: &RunConfig) -> CliResult<()> {
    if run.version != CONFIG_VERSION {
        return Err(CliError::Validation(format!(
            "config version {} is not supported (expected {CONFIG_VERSION})",
            run.version
        )));
    }
    if run.country.is_empty() {
        return Err(CliError::Validation("country label is empty".to_string()));
    }
    if run.columns.is_empty() {
        return Err(CliError::Validation(
            "[columns] must list every indicator".to_string(),
        ));
    }
    if run.lags.counts.is_empty() {
        return Err(CliError::Validation(
            "[lags] counts must not be empty".to_string(),
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &lag in &run.lags.counts {
        if !seen.insert(lag) {
            return Err(CliError::Validation(format!("duplicate lag count {lag}")));
        }
    }
    if run.models.kinds.is_empty() {
        return Err(CliError::Validation(
            "[models] kinds must not be empty".to_string(),
        ));
    }
    let mut kinds = std::collections::HashSet::new();
    for kind in &run.models.kinds {
        if !kinds.insert(*kind) {
            return Err(CliError::Validation(format!("duplicate model kind {kind}")));
        }
    }
    if run.window.initial_ratio.is_some() && run.window.initial_quarters.is_some() {
        return Err(CliError::Validation(
            "[window] sets both initial_ratio and initial_quarters".to_string(),
        ));
    }
    if !(run.reconciliation.base_level > 0.0) {
        return Err(CliError::Validation(format!(
            "reconciliation base level {} must be positive",
            run.reconciliation.base_level
        )));
    }
    if run.explain.permutations == 0 || run.explain.top == 0 {
        return Err(CliError::Validation(
            "[explain] permutations and top must be positive".to_string(),
        ));
    }
    Ok(())
}

/// Checks the `[columns]` map against the indicators actually present.
pub fn check_columns_cover(run: &RunConfig, indicators: &[String]) -> CliResult<()> {
    let configured: std::collections::BTreeSet<&String> = run.columns.keys().collect();
    let present: std::collections::BTreeSet<&String> = indicators.iter().collect();
    let missing: Vec<&&String> = present.difference(&configured).collect();
    let extra: Vec<&&String> = configured.difference(&present).collect();
    if missing.is_empty() && extra.is_empty() {
        return Ok(());
    }
    Err(CliError::Validation(format!(
        "[columns] does not match the master file: missing {missing:?}, extra {extra:?}"
    )))
}
