//! Quarterly regression back ends behind one interface.
//!
//! Four interchangeable models map a design panel to quarterly growth: a
//! GLS regression with AR(1) monthly residuals, an elastic net, gradient
//! boosted trees, and a feedforward network. Fitting is deterministic given
//! (data, spec, seed); prediction is deterministic given a [`FitResult`].

mod chow_lin;
mod elastic_net;
mod feedforward;
mod gradient_boost;

pub use chow_lin::{
    chow_lin_distribute, fit_chow_lin, fit_chow_lin_at_rho, fit_chow_lin_quarterly, ChowLinState,
};
pub use elastic_net::{
    bootstrap_elastic_net, elastic_net_objective_trace, fit_elastic_net, fit_elastic_net_fixed,
    BootstrapSummary, ElasticNetState,
};
pub use feedforward::{
    fit_feedforward, fit_feedforward_fixed, Activation, Architecture, DenseLayer,
    FeedForwardState,
};
pub use gradient_boost::{
    fit_gradient_boost, fit_gradient_boost_fixed, GbtCombo, GradientBoostState, Tree, TreeNode,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Fingerprint;
use crate::series::{Panel, Series};

/// Serialization format version of [`FitResult`].
pub const FIT_FORMAT_VERSION: u32 = 1;

/// Which regression back end to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    ChowLin,
    ElasticNet,
    GradientBoost,
    FeedForward,
}

impl std::fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            RegressorKind::ChowLin => "chow_lin",
            RegressorKind::ElasticNet => "elastic_net",
            RegressorKind::GradientBoost => "gradient_boost",
            RegressorKind::FeedForward => "feedforward",
        };
        write!(f, "{name}")
    }
}

/// Elastic net search configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElasticNetConfig {
    /// Cross-validation folds (contiguous, unshuffled).
    pub folds: usize,
    /// Candidate ℓ1 shares of the penalty.
    pub mix_grid: Vec<f64>,
    /// Penalty path length per mixing value.
    pub n_alphas: usize,
    /// Smallest path value as a fraction of the all-zero threshold.
    pub alpha_min_ratio: f64,
    /// Coordinate-descent sweep budget.
    pub max_sweeps: usize,
    /// Convergence threshold on the largest coordinate change per sweep.
    pub tol: f64,
    /// Bootstrap replicates used for the final coefficient summary.
    pub bootstrap: usize,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            mix_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0],
            n_alphas: 100,
            alpha_min_ratio: 1e-4,
            max_sweeps: 50_000,
            tol: 1e-10,
            bootstrap: 5_000,
        }
    }
}

/// Gradient boosting grid; the default spans 432 combinations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradientBoostConfig {
    pub folds: usize,
    pub depths: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub tree_counts: Vec<usize>,
    pub subsamples: Vec<f64>,
    pub leaf_l2: Vec<f64>,
    pub min_child_weights: Vec<f64>,
}

impl Default for GradientBoostConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            depths: vec![2, 3, 4],
            learning_rates: vec![0.01, 0.05, 0.1, 0.3],
            tree_counts: vec![100, 300, 500],
            subsamples: vec![0.7, 0.85, 1.0],
            leaf_l2: vec![0.0, 1.0],
            min_child_weights: vec![1.0, 3.0],
        }
    }
}

/// Feedforward architecture search configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeedForwardConfig {
    /// Architecture draws; the reference budget is 100.
    pub trials: usize,
    pub max_epochs: usize,
    /// Early-stopping patience in epochs.
    pub patience: usize,
    /// Adam step size.
    pub learning_rate: f64,
    /// Hidden-layer width choices (each at most 128).
    pub units_choices: Vec<usize>,
    pub dropout_choices: Vec<f64>,
}

impl Default for FeedForwardConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            max_epochs: 1_000,
            patience: 50,
            learning_rate: 1e-3,
            units_choices: vec![8, 16, 32, 64, 96, 128],
            dropout_choices: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }
}

/// Model choice, search spaces, and the master seed for all stochastic steps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub seed: u64,
    pub elastic_net: ElasticNetConfig,
    pub gradient_boost: GradientBoostConfig,
    pub feedforward: FeedForwardConfig,
}

impl RegressorSpec {
    pub fn new(kind: RegressorKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            elastic_net: ElasticNetConfig::default(),
            gradient_boost: GradientBoostConfig::default(),
            feedforward: FeedForwardConfig::default(),
        }
    }
}

/// Hyperparameters chosen by a search, reusable for frozen refits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Hyperparams {
    /// The AR(1) parameter is re-estimated at every fit, so nothing freezes.
    ChowLin,
    ElasticNet { alpha: f64, mix: f64 },
    GradientBoost(GbtCombo),
    FeedForward(Architecture),
}

/// Learned state of one back end.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitState {
    ChowLin(ChowLinState),
    ElasticNet(ElasticNetState),
    GradientBoost(GradientBoostState),
    FeedForward(FeedForwardState),
}

/// A trained model: kind, chosen hyperparameters, numeric state, and a
/// fingerprint of the training window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub version: u32,
    pub kind: RegressorKind,
    /// Design columns in training order; prediction inputs must match.
    pub columns: Vec<String>,
    pub seed: u64,
    /// Content hash of (kind, columns, training data, seed).
    pub fingerprint: String,
    pub hyperparams: Hyperparams,
    pub state: FitState,
}

impl FitResult {
    /// Versioned JSON document; identical fits serialize identically.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("fit state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Schema(format!("invalid fit document: {e}")))
    }
}

/// Content hash of the training inputs; prediction targets outside the
/// window never enter.
pub(crate) fn training_fingerprint(
    kind: RegressorKind,
    x: &Panel,
    y: &Series,
    seed: u64,
) -> String {
    let mut fp = Fingerprint::new("fit");
    fp.add_str(&kind.to_string());
    fp.add_u64(seed);
    for name in x.columns() {
        fp.add_str(name);
    }
    for c in 0..x.n_cols() {
        fp.add_f64s(x.column_at(c));
    }
    fp.add_f64s(y.values());
    fp.finish()
}

/// Contiguous, unshuffled fold boundaries; the first `n % k` folds absorb
/// the remainder.
pub(crate) fn contiguous_folds(n: usize, k: usize) -> Vec<(usize, usize)> {
    let base = n / k;
    let extra = n % k;
    let mut bounds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        bounds.push((start, start + len));
        start += len;
    }
    bounds
}

pub(crate) fn check_fit_alignment(x: &Panel, y: &Series) -> Result<()> {
    if x.index() != y.index() {
        return Err(Error::Alignment(
            "design panel and target must share the same index".to_string(),
        ));
    }
    if x.n_rows() == 0 {
        return Err(Error::InvalidArgument("empty training window".to_string()));
    }
    Ok(())
}

fn check_columns(fit: &FitResult, x: &Panel) -> Result<()> {
    if fit.columns == x.columns() {
        return Ok(());
    }
    let missing: Vec<&String> = fit
        .columns
        .iter()
        .filter(|c| !x.columns().contains(c))
        .collect();
    let extra: Vec<&String> = x
        .columns()
        .iter()
        .filter(|c| !fit.columns.contains(c))
        .collect();
    if missing.is_empty() && extra.is_empty() {
        return Err(Error::Schema(format!(
            "columns out of order: fit expects {:?}, panel has {:?}",
            fit.columns,
            x.columns()
        )));
    }
    Err(Error::Schema(format!(
        "column mismatch: missing {missing:?}, extra {extra:?}"
    )))
}

/// Point predictions of a trained model on a matching panel.
///
/// Works at monthly or quarterly frequency; the panel's columns must equal
/// the training columns in name and order.
pub fn predict(fit: &FitResult, x: &Panel) -> Result<Series> {
    check_columns(fit, x)?;
    let values = match &fit.state {
        FitState::ChowLin(state) => state.predict_rows(x),
        FitState::ElasticNet(state) => state.predict_rows(x),
        FitState::GradientBoost(state) => state.predict_rows(x),
        FitState::FeedForward(state) => state.predict_rows(x),
    };
    Series::new(*x.index(), values)
}

/// Fits the configured back end with a full hyperparameter search.
pub fn fit(spec: &RegressorSpec, x: &Panel, y: &Series) -> Result<FitResult> {
    match spec.kind {
        RegressorKind::ChowLin => fit_chow_lin_quarterly(x, y),
        RegressorKind::ElasticNet => fit_elastic_net(x, y, spec.elastic_net.folds, spec),
        RegressorKind::GradientBoost => {
            fit_gradient_boost(x, y, spec.gradient_boost.folds, spec)
        }
        RegressorKind::FeedForward => {
            fit_feedforward(x, y, spec.feedforward.trials, spec.seed, &spec.feedforward)
        }
    }
}

/// Refits model weights with hyperparameters frozen from an earlier search.
pub fn refit(
    spec: &RegressorSpec,
    hyperparams: &Hyperparams,
    x: &Panel,
    y: &Series,
) -> Result<FitResult> {
    match hyperparams {
        Hyperparams::ChowLin => fit_chow_lin_quarterly(x, y),
        Hyperparams::ElasticNet { alpha, mix } => {
            fit_elastic_net_fixed(x, y, *alpha, *mix, &spec.elastic_net)
        }
        Hyperparams::GradientBoost(combo) => fit_gradient_boost_fixed(x, y, combo, spec.seed),
        Hyperparams::FeedForward(arch) => fit_feedforward_fixed(
            x,
            y,
            arch,
            spec.seed,
            &spec.feedforward,
        ),
    }
}
