//! Expanding-window evaluation, forecast metrics, and loss comparisons.
//!
//! - The driver fits on quarters up to t and predicts t + 1, searching
//!   hyperparameters only on the first window and refitting weights after.
//! - Scaling is fit on training rows per step; the target row never reaches
//!   fitting, scaling, or early stopping.
//! - Failed steps yield missing predictions and the run continues; more
//!   than 20% failures aborts.
//! - Forecast accuracy comparisons use the squared-loss differential with a
//!   Bartlett-kernel long-run variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{derive_seed, mean, std_normal_cdf};
use crate::preprocess::{fit_apply_standardizer, TransformSpec};
use crate::regressors::{self, Hyperparams, RegressorSpec};
use crate::series::{Panel, Series};

const STEP_SALT: u64 = 0x57E9_0000;
/// Share of failed steps that aborts a run.
const MAX_FAILURE_SHARE: f64 = 0.2;

/// Expanding-window schedule: where the first training window ends.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialWindow {
    /// First window covers this share of the sample, rounded up.
    Ratio(f64),
    /// First window covers exactly this many quarters.
    Quarters(usize),
}

/// One-step-ahead protocol: hyperparameters are searched on the initial
/// window and frozen for the rest of the run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WindowProtocol {
    pub initial: InitialWindow,
}

impl Default for WindowProtocol {
    fn default() -> Self {
        Self {
            initial: InitialWindow::Ratio(0.5),
        }
    }
}

impl WindowProtocol {
    /// Initial training length t0 so that steps run t0 .. n-1.
    pub fn initial_quarters(&self, n: usize) -> Result<usize> {
        let t0 = match self.initial {
            InitialWindow::Ratio(r) => {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "initial window ratio {r} outside (0, 1)"
                    )));
                }
                (r * n as f64).ceil() as usize
            }
            InitialWindow::Quarters(q) => q,
        };
        if t0 == 0 || t0 >= n {
            return Err(Error::InvalidArgument(format!(
                "initial window of {t0} quarters leaves no evaluation steps in {n}"
            )));
        }
        Ok(t0)
    }
}

/// One evaluation step: the window end, the derived seed, and the outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepLog {
    /// Quarters in the training window (the prediction targets row
    /// `train_end`, the next quarter).
    pub train_end: usize,
    /// Label of the predicted quarter.
    pub target: String,
    pub seed: u64,
    /// Training-window fingerprint of the step's fit; empty when the fit
    /// itself failed.
    pub fingerprint: String,
    pub prediction: f64,
    pub failed: bool,
    pub message: Option<String>,
}

/// Output of one expanding-window run.
#[derive(Clone, Debug)]
pub struct EvalRun {
    /// One-step-ahead predictions for quarters t0+1 .. N; failed steps are
    /// NaN.
    pub predictions: Series,
    /// The matching slice of observed targets.
    pub actuals: Series,
    pub steps: Vec<StepLog>,
    /// Hyperparameters frozen after the first window.
    pub hyperparams: Hyperparams,
    pub initial_quarters: usize,
    pub failed_steps: usize,
}

/// Forecast accuracy summary; `None` marks measures that are undefined on
/// the sample (zero-variance sides).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub rmse: f64,
    pub mae: f64,
    pub r_squared: Option<f64>,
    pub correlation: Option<f64>,
    pub sign_accuracy: f64,
    /// Pairs entering the computation after missing values are dropped.
    pub pairs: usize,
}

/// Equal-accuracy test result on the squared-loss differential.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DmResult {
    /// Negative values favor the first model.
    pub statistic: f64,
    pub p_value: f64,
    /// Bartlett truncation lag actually used.
    pub bandwidth: usize,
    /// Set when the loss differential has no variance.
    pub degenerate: bool,
}

/// Runs the expanding-window protocol for one model on quarterly data.
///
/// Level columns are standardized per step on training rows only; the
/// per-step seed derives from the spec's master seed and the absolute
/// window end, so truncated reruns reproduce step predictions bit-exactly.
pub fn run_expanding_window(
    spec: &RegressorSpec,
    x: &Panel,
    y: &Series,
    transform: &TransformSpec,
    protocol: &WindowProtocol,
) -> Result<EvalRun> {
    if x.index() != y.index() {
        return Err(Error::Alignment(
            "design panel and target must share the same index".to_string(),
        ));
    }
    let n = x.n_rows();
    if n < 8 {
        return Err(Error::InvalidArgument(format!(
            "expanding-window evaluation needs at least 8 quarters, got {n}"
        )));
    }
    let t0 = protocol.initial_quarters(n)?;

    let mut frozen: Option<Hyperparams> = None;
    let mut steps: Vec<StepLog> = Vec::with_capacity(n - t0);
    let mut predictions = Vec::with_capacity(n - t0);
    let mut failed_steps = 0usize;
    for t in t0..n {
        let step_seed = derive_seed(spec.seed, STEP_SALT + t as u64);
        let mut step_spec = spec.clone();
        step_spec.seed = step_seed;
        let target = x.index().label(t);
        let outcome = run_step(&step_spec, x, y, transform, t, frozen.as_ref());
        let log = match outcome {
            Ok((fit, prediction)) => {
                if frozen.is_none() {
                    frozen = Some(fit.hyperparams.clone());
                }
                if prediction.is_finite() {
                    StepLog {
                        train_end: t,
                        target,
                        seed: step_seed,
                        fingerprint: fit.fingerprint,
                        prediction,
                        failed: false,
                        message: None,
                    }
                } else {
                    StepLog {
                        train_end: t,
                        target,
                        seed: step_seed,
                        fingerprint: fit.fingerprint,
                        prediction: f64::NAN,
                        failed: true,
                        message: Some("non-finite prediction".to_string()),
                    }
                }
            }
            Err(e) => {
                // without a first-window search there is nothing to freeze,
                // so the run cannot continue
                if frozen.is_none() {
                    return Err(Error::NonConvergence(format!(
                        "hyperparameter search on the initial window failed: {e}"
                    )));
                }
                StepLog {
                    train_end: t,
                    target,
                    seed: step_seed,
                    fingerprint: String::new(),
                    prediction: f64::NAN,
                    failed: true,
                    message: Some(e.to_string()),
                }
            }
        };
        if log.failed {
            failed_steps += 1;
        }
        predictions.push(log.prediction);
        steps.push(log);
    }

    let total = n - t0;
    if failed_steps as f64 > MAX_FAILURE_SHARE * total as f64 {
        return Err(Error::NonConvergence(format!(
            "{failed_steps} of {total} evaluation steps failed"
        )));
    }
    let index = x.index().slice(t0, total)?;
    Ok(EvalRun {
        predictions: Series::new(index, predictions)?,
        actuals: Series::new(index, y.values()[t0..].to_vec())?,
        steps,
        hyperparams: frozen.expect("first window fitted"),
        initial_quarters: t0,
        failed_steps,
    })
}

fn run_step(
    spec: &RegressorSpec,
    x: &Panel,
    y: &Series,
    transform: &TransformSpec,
    t: usize,
    frozen: Option<&Hyperparams>,
) -> Result<(regressors::FitResult, f64)> {
    let train_x = x.slice_rows(0, t)?;
    let train_y = y.slice(0, t)?;
    let test_x = x.slice_rows(t, 1)?;
    let (train_std, test_std, _) = fit_apply_standardizer(&train_x, &test_x, transform)?;
    let fit = match frozen {
        None => regressors::fit(spec, &train_std, &train_y)?,
        Some(hp) => regressors::refit(spec, hp, &train_std, &train_y)?,
    };
    let pred = regressors::predict(&fit, &test_std)?;
    let value = pred.values()[0];
    Ok((fit, value))
}

/// Drops pairs where either side is missing; returns aligned vectors.
fn finite_pairs(predictions: &Series, actuals: &Series) -> Result<(Vec<f64>, Vec<f64>)> {
    if predictions.index() != actuals.index() {
        return Err(Error::Alignment(
            "prediction and actual series must share the same index".to_string(),
        ));
    }
    let mut p = Vec::new();
    let mut a = Vec::new();
    for (pv, av) in predictions.values().iter().zip(actuals.values()) {
        if pv.is_finite() && av.is_finite() {
            p.push(*pv);
            a.push(*av);
        }
    }
    Ok((p, a))
}

fn sign_positive(v: f64) -> bool {
    v >= 0.0
}

/// Accuracy metrics over the finite prediction-actual pairs.
pub fn compute_metrics(predictions: &Series, actuals: &Series) -> Result<MetricSet> {
    let (p, a) = finite_pairs(predictions, actuals)?;
    let n = p.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "metrics need at least 2 finite pairs, got {n}"
        )));
    }
    let errors: Vec<f64> = p.iter().zip(&a).map(|(pv, av)| pv - av).collect();
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n as f64;
    let a_mean = mean(&a);
    let tss: f64 = a.iter().map(|v| (v - a_mean).powi(2)).sum();
    let sse: f64 = errors.iter().map(|e| e * e).sum();
    let r_squared = if tss > 0.0 { Some(1.0 - sse / tss) } else { None };
    let p_mean = mean(&p);
    let sp: f64 = p.iter().map(|v| (v - p_mean).powi(2)).sum::<f64>().sqrt();
    let sa = tss.sqrt();
    let correlation = if sp > 0.0 && sa > 0.0 {
        let cov: f64 = p
            .iter()
            .zip(&a)
            .map(|(pv, av)| (pv - p_mean) * (av - a_mean))
            .sum();
        Some(cov / (sp * sa))
    } else {
        None
    };
    let sign_hits = p
        .iter()
        .zip(&a)
        .filter(|(pv, av)| sign_positive(**pv) == sign_positive(**av))
        .count();
    Ok(MetricSet {
        rmse,
        mae,
        r_squared,
        correlation,
        sign_accuracy: sign_hits as f64 / n as f64,
        pairs: n,
    })
}

/// Default Bartlett truncation lag.
pub fn default_bandwidth(t: usize) -> usize {
    (4.0 * (t as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Equal-accuracy test on squared-loss differentials of two aligned
/// forecast-error series; pairs with a missing side are dropped first.
pub fn dm_test(errors_1: &Series, errors_2: &Series, bandwidth: Option<usize>) -> Result<DmResult> {
    let (e1, e2) = finite_pairs(errors_1, errors_2)?;
    let t = e1.len();
    if t < 10 {
        return Err(Error::InvalidArgument(format!(
            "loss comparison needs at least 10 aligned observations, got {t}"
        )));
    }
    let d: Vec<f64> = e1
        .iter()
        .zip(&e2)
        .map(|(a, b)| a * a - b * b)
        .collect();
    let d_mean = mean(&d);
    let lag = bandwidth.unwrap_or_else(|| default_bandwidth(t));
    let centered: Vec<f64> = d.iter().map(|v| v - d_mean).collect();
    let gamma = |l: usize| -> f64 {
        (l..t).map(|i| centered[i] * centered[i - l]).sum::<f64>() / t as f64
    };
    let mut long_run = gamma(0);
    for l in 1..=lag.min(t - 1) {
        let w = 1.0 - l as f64 / (lag + 1) as f64;
        long_run += 2.0 * w * gamma(l);
    }
    if !(long_run > 0.0) {
        return Ok(DmResult {
            statistic: 0.0,
            p_value: 1.0,
            bandwidth: lag,
            degenerate: true,
        });
    }
    let statistic = d_mean / (long_run / t as f64).sqrt();
    let p_value = 2.0 * (1.0 - std_normal_cdf(statistic.abs()));
    Ok(DmResult {
        statistic,
        p_value,
        bandwidth: lag,
        degenerate: false,
    })
}
