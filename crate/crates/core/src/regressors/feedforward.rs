//! Feedforward regression networks with a seeded architecture search.
//!
//! - Architectures draw from one or two hidden layers, widths up to 128,
//!   five activations, and a dropout grid; the output is linear.
//! - Weights train full batch with Adam under early stopping on the last
//!   fifth of the window, restoring the best-validation weights.
//! - Every draw comes from streams derived from the master seed, so fits
//!   are bit-identical across runs; divergent trials are logged and
//!   discarded, and an all-divergent search is an error.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::seeded_rng;
use crate::series::{Panel, Series};

use super::{
    check_fit_alignment, training_fingerprint, FeedForwardConfig, FitResult, FitState,
    Hyperparams, RegressorKind, FIT_FORMAT_VERSION,
};

const TRIAL_SALT: u64 = 0xFF00_0000;
const REFIT_SALT: u64 = 0xFF0F_FFFF;
const MAX_UNITS: usize = 128;
const MAX_HIDDEN_LAYERS: usize = 2;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Hidden-layer activation functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Elu,
    Selu,
    Swish,
}

const ACTIVATIONS: [Activation; 5] = [
    Activation::Relu,
    Activation::Tanh,
    Activation::Elu,
    Activation::Selu,
    Activation::Swish,
];

const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA * z
                } else {
                    SELU_LAMBDA * SELU_ALPHA * z.exp_m1()
                }
            }
            Activation::Swish => z / (1.0 + (-z).exp()),
        }
    }

    /// Derivative as a function of the pre-activation.
    fn grad(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * z.exp()
                }
            }
            Activation::Swish => {
                let s = 1.0 / (1.0 + (-z).exp());
                s + z * s * (1.0 - s)
            }
        }
    }
}

/// A sampled network shape: hidden widths, activation, and dropout rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub dropout: f64,
}

/// One affine layer; `weights` is row-major with `rows` outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// `None` marks the linear output layer.
    pub activation: Option<Activation>,
}

/// Learned state: trained layers plus the early-stopping record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeedForwardState {
    pub layers: Vec<DenseLayer>,
    /// Epochs run up to the restored weights.
    pub best_epoch: usize,
    /// Validation error of the restored weights.
    pub validation_mse: f64,
}

impl FeedForwardState {
    pub(super) fn predict_rows(&self, x: &Panel) -> Vec<f64> {
        let n = x.n_rows();
        let mut activations: Vec<f64> = Vec::new();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut current: Vec<f64> = (0..x.n_cols()).map(|c| x.column_at(c)[i]).collect();
            for layer in &self.layers {
                activations.clear();
                activations.reserve(layer.rows);
                for r in 0..layer.rows {
                    let mut z = layer.bias[r];
                    for (c, v) in current.iter().enumerate() {
                        z += layer.weights[r * layer.cols + c] * v;
                    }
                    activations.push(match layer.activation {
                        Some(act) => act.apply(z),
                        None => z,
                    });
                }
                current.clone_from(&activations);
            }
            out.push(current[0]);
        }
        out
    }
}

struct Net {
    w: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    act: Vec<Option<Activation>>,
}

impl Net {
    /// Glorot-uniform weights, zero biases.
    fn init(sizes: &[usize], act: Vec<Option<Activation>>, rng: &mut ChaCha8Rng) -> Self {
        let mut w = Vec::new();
        let mut b = Vec::new();
        for l in 1..sizes.len() {
            let (fan_out, fan_in) = (sizes[l], sizes[l - 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.push(DMatrix::from_fn(fan_out, fan_in, |_, _| {
                (rng.random::<f64>() * 2.0 - 1.0) * limit
            }));
            b.push(DVector::zeros(fan_out));
        }
        Net { w, b, act }
    }

    /// Forward pass without dropout.
    fn forward(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = input.clone();
        for l in 0..self.w.len() {
            let mut z = &self.w[l] * &a;
            for c in 0..z.ncols() {
                for r in 0..z.nrows() {
                    z[(r, c)] += self.b[l][r];
                }
            }
            if let Some(act) = self.act[l] {
                z.apply(|v| *v = act.apply(*v));
            }
            a = z;
        }
        a
    }
}

fn mse_row(pred: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len();
    (0..n).map(|i| (pred[(0, i)] - y[i]).powi(2)).sum::<f64>() / n as f64
}

struct AdamState {
    mw: Vec<DMatrix<f64>>,
    vw: Vec<DMatrix<f64>>,
    mb: Vec<DVector<f64>>,
    vb: Vec<DVector<f64>>,
    t: i32,
}

impl AdamState {
    fn new(net: &Net) -> Self {
        Self {
            mw: net.w.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            vw: net.w.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            mb: net.b.iter().map(|b| DVector::zeros(b.nrows())).collect(),
            vb: net.b.iter().map(|b| DVector::zeros(b.nrows())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Net, gw: &[DMatrix<f64>], gb: &[DVector<f64>], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for l in 0..net.w.len() {
            for (idx, g) in gw[l].iter().enumerate() {
                let m = &mut self.mw[l][idx];
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                let v = &mut self.vw[l][idx];
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                net.w[l][idx] -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            }
            for (idx, g) in gb[l].iter().enumerate() {
                let m = &mut self.mb[l][idx];
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                let v = &mut self.vb[l][idx];
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                net.b[l][idx] -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

struct Trained {
    net: Net,
    best_epoch: usize,
    val_mse: f64,
}

/// Trains one architecture with full-batch Adam and early stopping on the
/// trailing validation slice; `None` means the trial diverged.
fn train_once(
    x_train: &DMatrix<f64>,
    y_train: &[f64],
    x_val: &DMatrix<f64>,
    y_val: &[f64],
    arch: &Architecture,
    config: &FeedForwardConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Trained> {
    let k = x_train.nrows();
    let n = x_train.ncols();
    let mut sizes = vec![k];
    sizes.extend_from_slice(&arch.hidden);
    sizes.push(1);
    let mut act: Vec<Option<Activation>> = arch.hidden.iter().map(|_| Some(arch.activation)).collect();
    act.push(None);
    let mut net = Net::init(&sizes, act, rng);
    let mut adam = AdamState::new(&net);
    let depth = net.w.len();
    let keep = 1.0 - arch.dropout;

    let mut best: Option<(f64, Vec<DMatrix<f64>>, Vec<DVector<f64>>, usize)> = None;
    let mut since_best = 0usize;
    for epoch in 0..config.max_epochs {
        // forward with caches; inverted dropout on hidden activations
        let mut zs: Vec<DMatrix<f64>> = Vec::with_capacity(depth);
        let mut activations: Vec<DMatrix<f64>> = vec![x_train.clone()];
        let mut masks: Vec<Option<DMatrix<f64>>> = Vec::with_capacity(depth);
        for l in 0..depth {
            let mut z = &net.w[l] * &activations[l];
            for c in 0..z.ncols() {
                for r in 0..z.nrows() {
                    z[(r, c)] += net.b[l][r];
                }
            }
            zs.push(z.clone());
            let mut a = z;
            if let Some(actv) = net.act[l] {
                a.apply(|v| *v = actv.apply(*v));
                if arch.dropout > 0.0 {
                    let mask = DMatrix::from_fn(a.nrows(), a.ncols(), |_, _| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    a.component_mul_assign(&mask);
                    masks.push(Some(mask));
                } else {
                    masks.push(None);
                }
            } else {
                masks.push(None);
            }
            activations.push(a);
        }
        let out = &activations[depth];
        let train_loss = mse_row(out, y_train);
        if !train_loss.is_finite() {
            return None;
        }

        // backward
        let mut delta = DMatrix::zeros(1, n);
        for i in 0..n {
            delta[(0, i)] = 2.0 * (out[(0, i)] - y_train[i]) / n as f64;
        }
        let mut gw: Vec<DMatrix<f64>> = Vec::with_capacity(depth);
        let mut gb: Vec<DVector<f64>> = Vec::with_capacity(depth);
        for l in (0..depth).rev() {
            let gw_l = &delta * activations[l].transpose();
            let mut gb_l = DVector::zeros(delta.nrows());
            for r in 0..delta.nrows() {
                gb_l[r] = delta.row(r).sum();
            }
            gw.push(gw_l);
            gb.push(gb_l);
            if l > 0 {
                let mut upstream = net.w[l].transpose() * &delta;
                if let Some(mask) = &masks[l - 1] {
                    upstream.component_mul_assign(mask);
                }
                let actv = net.act[l - 1].expect("hidden layers have activations");
                for c in 0..upstream.ncols() {
                    for r in 0..upstream.nrows() {
                        upstream[(r, c)] *= actv.grad(zs[l - 1][(r, c)]);
                    }
                }
                delta = upstream;
            }
        }
        gw.reverse();
        gb.reverse();
        adam.step(&mut net, &gw, &gb, config.learning_rate);

        let val_pred = net.forward(x_val);
        let val = mse_row(&val_pred, y_val);
        if !val.is_finite() {
            return None;
        }
        let improved = best.as_ref().is_none_or(|(b, _, _, _)| val < *b);
        if improved {
            best = Some((val, net.w.clone(), net.b.clone(), epoch + 1));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    let (val_mse, w, b, best_epoch) = best?;
    net.w = w;
    net.b = b;
    Some(Trained {
        net,
        best_epoch,
        val_mse,
    })
}

fn sample_architecture(config: &FeedForwardConfig, rng: &mut ChaCha8Rng) -> Architecture {
    let n_layers = 1 + rng.random_range(0..MAX_HIDDEN_LAYERS);
    let hidden: Vec<usize> = (0..n_layers)
        .map(|_| config.units_choices[rng.random_range(0..config.units_choices.len())])
        .collect();
    let activation = ACTIVATIONS[rng.random_range(0..ACTIVATIONS.len())];
    let dropout = config.dropout_choices[rng.random_range(0..config.dropout_choices.len())];
    Architecture {
        hidden,
        activation,
        dropout,
    }
}

fn validate_config(config: &FeedForwardConfig) -> Result<()> {
    if config.units_choices.is_empty()
        || config.units_choices.iter().any(|&u| u == 0 || u > MAX_UNITS)
    {
        return Err(Error::InvalidArgument(format!(
            "hidden widths must lie in 1..={MAX_UNITS}"
        )));
    }
    if config.dropout_choices.is_empty()
        || config.dropout_choices.iter().any(|d| !(0.0..1.0).contains(d))
    {
        return Err(Error::InvalidArgument(
            "dropout rates must lie in [0, 1)".to_string(),
        ));
    }
    if config.max_epochs == 0 || config.patience == 0 || config.learning_rate <= 0.0 {
        return Err(Error::InvalidArgument(
            "epochs, patience, and learning rate must be positive".to_string(),
        ));
    }
    Ok(())
}

fn validate_architecture(arch: &Architecture) -> Result<()> {
    if arch.hidden.is_empty() || arch.hidden.len() > MAX_HIDDEN_LAYERS {
        return Err(Error::InvalidArgument(format!(
            "network needs 1..={MAX_HIDDEN_LAYERS} hidden layers, got {}",
            arch.hidden.len()
        )));
    }
    if arch.hidden.iter().any(|&u| u == 0 || u > MAX_UNITS) {
        return Err(Error::InvalidArgument(format!(
            "hidden widths must lie in 1..={MAX_UNITS}"
        )));
    }
    if !(0.0..1.0).contains(&arch.dropout) {
        return Err(Error::InvalidArgument(format!(
            "dropout {} outside [0, 1)",
            arch.dropout
        )));
    }
    Ok(())
}

/// The trailing-fifth validation split, at least one row on each side.
fn split_rows(n: usize) -> Result<(usize, usize)> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!(
            "network training needs at least 5 rows, got {n}"
        )));
    }
    let n_val = (n / 5).max(1);
    Ok((n - n_val, n_val))
}

fn design_matrices(x: &Panel, n_train: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = x.n_cols();
    let n = x.n_rows();
    let full = DMatrix::from_fn(k, n, |r, c| x.column_at(r)[c]);
    let train = full.columns(0, n_train).into_owned();
    let val = full.columns(n_train, n - n_train).into_owned();
    (train, val)
}

fn layers_of(net: &Net) -> Vec<DenseLayer> {
    (0..net.w.len())
        .map(|l| {
            let w = &net.w[l];
            let mut weights = Vec::with_capacity(w.nrows() * w.ncols());
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    weights.push(w[(r, c)]);
                }
            }
            DenseLayer {
                rows: w.nrows(),
                cols: w.ncols(),
                weights,
                bias: net.b[l].iter().copied().collect(),
                activation: net.act[l],
            }
        })
        .collect()
}

fn make_fit(
    x: &Panel,
    seed: u64,
    arch: Architecture,
    trained: Trained,
    fingerprint: String,
) -> FitResult {
    FitResult {
        version: FIT_FORMAT_VERSION,
        kind: RegressorKind::FeedForward,
        columns: x.columns().to_vec(),
        seed,
        fingerprint,
        hyperparams: Hyperparams::FeedForward(arch),
        state: FitState::FeedForward(FeedForwardState {
            layers: layers_of(&trained.net),
            best_epoch: trained.best_epoch,
            validation_mse: trained.val_mse,
        }),
    }
}

/// Seeded architecture search: draws up to `trials` shapes, trains each,
/// and keeps the best validation error; ties prefer fewer total units, then
/// the earlier trial.
pub fn fit_feedforward(
    x: &Panel,
    y: &Series,
    trials: usize,
    seed: u64,
    config: &FeedForwardConfig,
) -> Result<FitResult> {
    check_fit_alignment(x, y)?;
    validate_config(config)?;
    if trials == 0 {
        return Err(Error::InvalidArgument(
            "architecture search needs at least one trial".to_string(),
        ));
    }
    let (n_train, _) = split_rows(x.n_rows())?;
    let (x_train, x_val) = design_matrices(x, n_train);
    let (y_train, y_val) = y.values().split_at(n_train);

    let mut best: Option<(Trained, Architecture, usize, usize)> = None; // + units, trial
    let mut divergent = 0usize;
    for trial in 0..trials {
        let mut rng = seeded_rng(seed, TRIAL_SALT + trial as u64);
        let arch = sample_architecture(config, &mut rng);
        match train_once(&x_train, y_train, &x_val, y_val, &arch, config, &mut rng) {
            Some(trained) => {
                let units: usize = arch.hidden.iter().sum();
                let take = match &best {
                    None => true,
                    Some((b, _, b_units, _)) => {
                        trained.val_mse < b.val_mse
                            || (trained.val_mse == b.val_mse && units < *b_units)
                    }
                };
                if take {
                    best = Some((trained, arch, units, trial));
                }
            }
            None => {
                divergent += 1;
                log::warn!("architecture trial {trial} diverged and was discarded");
            }
        }
    }
    let (trained, arch, _, _) = best.ok_or_else(|| {
        Error::NonConvergence(format!("all {divergent} architecture trials diverged"))
    })?;
    let fingerprint = training_fingerprint(RegressorKind::FeedForward, x, y, seed);
    Ok(make_fit(x, seed, arch, trained, fingerprint))
}

/// Trains a fixed architecture; used when hyperparameters are frozen.
pub fn fit_feedforward_fixed(
    x: &Panel,
    y: &Series,
    arch: &Architecture,
    seed: u64,
    config: &FeedForwardConfig,
) -> Result<FitResult> {
    check_fit_alignment(x, y)?;
    validate_config(config)?;
    validate_architecture(arch)?;
    let (n_train, _) = split_rows(x.n_rows())?;
    let (x_train, x_val) = design_matrices(x, n_train);
    let (y_train, y_val) = y.values().split_at(n_train);
    let mut rng = seeded_rng(seed, REFIT_SALT);
    let trained = train_once(&x_train, y_train, &x_val, y_val, arch, config, &mut rng)
        .ok_or_else(|| Error::NonConvergence("network training diverged".to_string()))?;
    let fingerprint = training_fingerprint(RegressorKind::FeedForward, x, y, seed);
    Ok(make_fit(x, seed, arch.clone(), trained, fingerprint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeIndex;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn random_panel(seed: u64, n: usize, k: usize) -> Panel {
        let mut rng = seeded_rng(seed, 40);
        Panel::new(
            TimeIndex::quarterly(2000, 1, n).unwrap(),
            (0..k).map(|c| format!("x{c}")).collect(),
            (0..k)
                .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn small_config() -> FeedForwardConfig {
        FeedForwardConfig {
            trials: 8,
            max_epochs: 400,
            patience: 50,
            learning_rate: 1e-2,
            units_choices: vec![8, 16],
            dropout_choices: vec![0.0],
        }
    }

    fn state_of(fit: &FitResult) -> &FeedForwardState {
        match &fit.state {
            FitState::FeedForward(s) => s,
            _ => unreachable!(),
        }
    }

    fn arch_of(fit: &FitResult) -> &Architecture {
        match &fit.hyperparams {
            Hyperparams::FeedForward(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn search_always_keeps_at_least_one_hidden_layer() {
        let x = random_panel(1, 40, 2);
        let y = Series::new(
            *x.index(),
            (0..40).map(|i| x.column_at(0)[i] * 0.5).collect(),
        )
        .unwrap();
        let fit = fit_feedforward(&x, &y, 6, 3, &small_config()).unwrap();
        let arch = arch_of(&fit);
        assert!(!arch.hidden.is_empty() && arch.hidden.len() <= 2);
        let state = state_of(&fit);
        assert_eq!(state.layers.len(), arch.hidden.len() + 1);
        assert!(state.layers.last().unwrap().activation.is_none());
    }

    #[test]
    fn noiseless_linear_signal_is_learned_tightly() {
        let x = random_panel(2, 100, 2);
        let y = Series::new(
            *x.index(),
            (0..100)
                .map(|i| 0.7 * x.column_at(0)[i] - 0.4 * x.column_at(1)[i])
                .collect(),
        )
        .unwrap();
        let config = FeedForwardConfig {
            trials: 12,
            max_epochs: 1_000,
            patience: 100,
            learning_rate: 1e-2,
            units_choices: vec![16, 32],
            dropout_choices: vec![0.0],
        };
        let fit = fit_feedforward(&x, &y, 12, 5, &config).unwrap();
        assert!(
            state_of(&fit).validation_mse < 1e-3,
            "validation mse {}",
            state_of(&fit).validation_mse
        );
    }

    #[test]
    fn fixed_seed_yields_bit_identical_fits() {
        let x = random_panel(3, 30, 2);
        let y = Series::new(
            *x.index(),
            (0..30).map(|i| (x.column_at(0)[i] * 1.3).tanh()).collect(),
        )
        .unwrap();
        let config = small_config();
        let a = fit_feedforward(&x, &y, 4, 11, &config).unwrap();
        let b = fit_feedforward(&x, &y, 4, 11, &config).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(arch_of(&a), arch_of(&b));
        assert_eq!(state_of(&a).validation_mse, state_of(&b).validation_mse);
        assert_eq!(
            super::super::predict(&a, &x).unwrap().values(),
            super::super::predict(&b, &x).unwrap().values()
        );
    }

    #[test]
    fn refit_with_frozen_architecture_is_deterministic() {
        let x = random_panel(4, 25, 2);
        let y = Series::new(
            *x.index(),
            (0..25).map(|i| x.column_at(1)[i].powi(2) * 0.2).collect(),
        )
        .unwrap();
        let arch = Architecture {
            hidden: vec![8],
            activation: Activation::Tanh,
            dropout: 0.0,
        };
        let a = fit_feedforward_fixed(&x, &y, &arch, 7, &small_config()).unwrap();
        let b = fit_feedforward_fixed(&x, &y, &arch, 7, &small_config()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn dropout_training_stays_deterministic_and_predicts_without_noise() {
        let x = random_panel(5, 40, 2);
        let y = Series::new(
            *x.index(),
            (0..40).map(|i| 0.5 * x.column_at(0)[i]).collect(),
        )
        .unwrap();
        let arch = Architecture {
            hidden: vec![16],
            activation: Activation::Relu,
            dropout: 0.3,
        };
        let config = small_config();
        let a = fit_feedforward_fixed(&x, &y, &arch, 13, &config).unwrap();
        let b = fit_feedforward_fixed(&x, &y, &arch, 13, &config).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let p1 = super::super::predict(&a, &x).unwrap();
        let p2 = super::super::predict(&a, &x).unwrap();
        assert_eq!(p1.values(), p2.values());
    }

    #[test]
    fn activation_gradients_match_finite_differences() {
        // probe away from the origin so central differences never straddle
        // the piecewise kink
        let h = 1e-6;
        for act in ACTIVATIONS {
            for z in [-1.7, -0.3, 0.4, 2.2] {
                let numeric = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert_abs_diff_eq!(act.grad(z), numeric, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn invalid_architectures_are_rejected() {
        let x = random_panel(6, 20, 1);
        let y = Series::new(*x.index(), (0..20).map(|i| i as f64).collect()).unwrap();
        let config = small_config();
        let too_deep = Architecture {
            hidden: vec![8, 8, 8],
            activation: Activation::Relu,
            dropout: 0.0,
        };
        assert!(fit_feedforward_fixed(&x, &y, &too_deep, 1, &config).is_err());
        let too_wide = Architecture {
            hidden: vec![256],
            activation: Activation::Relu,
            dropout: 0.0,
        };
        assert!(fit_feedforward_fixed(&x, &y, &too_wide, 1, &config).is_err());
        let bad_dropout = Architecture {
            hidden: vec![8],
            activation: Activation::Relu,
            dropout: 1.0,
        };
        assert!(fit_feedforward_fixed(&x, &y, &bad_dropout, 1, &config).is_err());
    }

    #[test]
    fn tiny_windows_are_rejected() {
        let x = random_panel(7, 4, 1);
        let y = Series::new(*x.index(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(
            fit_feedforward(&x, &y, 2, 1, &small_config()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
