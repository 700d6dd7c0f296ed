//! Elastic net via cyclic coordinate descent with soft-thresholding.
//!
//! - Columns are standardized internally once per training window; reported
//!   coefficients and the unpenalized intercept are on the original scale.
//! - The penalty splits as l1 = alpha * mix, l2 = alpha * (1 - mix) on the
//!   raw sum-of-squares objective.
//! - The search crosses a fixed mixing grid with a geometric penalty path
//!   from the all-zero threshold, scored by pooled K-fold errors on
//!   contiguous, unshuffled folds with warm starts down each path.
//! - Bootstrap resampling at fixed hyperparameters yields per-coefficient
//!   means and percentile intervals; degenerate resamples are skipped and
//!   counted.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{mean, sample_sd};
use crate::series::{Panel, Series};

use super::{
    check_fit_alignment, contiguous_folds, training_fingerprint, ElasticNetConfig, FitResult,
    FitState, Hyperparams, RegressorKind, RegressorSpec, FIT_FORMAT_VERSION,
};

/// Learned state on the original scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElasticNetState {
    pub intercept: f64,
    pub beta: Vec<f64>,
}

impl ElasticNetState {
    pub(super) fn predict_rows(&self, x: &Panel) -> Vec<f64> {
        (0..x.n_rows())
            .map(|i| {
                let mut v = self.intercept;
                for (c, b) in self.beta.iter().enumerate() {
                    v += b * x.column_at(c)[i];
                }
                v
            })
            .collect()
    }
}

/// Bootstrap distribution summary of the coefficients at fixed
/// hyperparameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub columns: Vec<String>,
    pub intercept_mean: f64,
    /// Per-coefficient bootstrap means, the final point estimates.
    pub mean: Vec<f64>,
    /// 2.5th percentile per coefficient.
    pub lower: Vec<f64>,
    /// 97.5th percentile per coefficient.
    pub upper: Vec<f64>,
    /// Successful replicates.
    pub replicates: usize,
    /// Resamples skipped for a degenerate (constant) target.
    pub skipped: usize,
}

impl BootstrapSummary {
    /// A fit whose coefficients are the bootstrap means, reusing the
    /// template's metadata.
    pub fn to_fit(&self, template: &FitResult) -> FitResult {
        let mut fit = template.clone();
        fit.state = FitState::ElasticNet(ElasticNetState {
            intercept: self.intercept_mean,
            beta: self.mean.clone(),
        });
        fit
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Centered coordinate-descent problem; `cols` are already centered and the
/// intercept is profiled out.
struct CdProblem {
    cols: Vec<Vec<f64>>,
    sq_norms: Vec<f64>,
    yc: Vec<f64>,
}

impl CdProblem {
    /// Centers the selected rows of standardized columns and the target so
    /// the intercept stays unpenalized.
    fn build(xs: &[Vec<f64>], y: &[f64], rows: &[usize]) -> (Self, Vec<f64>, f64) {
        let n = rows.len();
        let mut col_means = Vec::with_capacity(xs.len());
        let cols: Vec<Vec<f64>> = xs
            .iter()
            .map(|col| {
                let m = rows.iter().map(|&i| col[i]).sum::<f64>() / n as f64;
                col_means.push(m);
                rows.iter().map(|&i| col[i] - m).collect()
            })
            .collect();
        let y_mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
        let yc: Vec<f64> = rows.iter().map(|&i| y[i] - y_mean).collect();
        let sq_norms = cols
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .collect();
        (Self { cols, sq_norms, yc }, col_means, y_mean)
    }

    fn objective(&self, residual: &[f64], beta: &[f64], lam1: f64, lam2: f64) -> f64 {
        let sse: f64 = residual.iter().map(|r| r * r).sum();
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        sse + lam1 * l1 + lam2 * l2
    }

    /// Cyclic coordinate descent from `beta`, which is updated in place;
    /// returns the per-sweep objective when tracing.
    fn solve(
        &self,
        beta: &mut [f64],
        lam1: f64,
        lam2: f64,
        tol: f64,
        max_sweeps: usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<()> {
        let n = self.yc.len();
        let mut residual = self.yc.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if beta[j] != 0.0 {
                for i in 0..n {
                    residual[i] -= col[i] * beta[j];
                }
            }
        }
        let half_lam1 = lam1 / 2.0;
        let mut last_delta = f64::INFINITY;
        for _ in 0..max_sweeps {
            let mut max_delta = 0.0f64;
            for j in 0..self.cols.len() {
                if self.sq_norms[j] == 0.0 {
                    beta[j] = 0.0;
                    continue;
                }
                let col = &self.cols[j];
                let mut rho = self.sq_norms[j] * beta[j];
                for i in 0..n {
                    rho += col[i] * residual[i];
                }
                let updated = soft_threshold(rho, half_lam1) / (self.sq_norms[j] + lam2);
                let delta = updated - beta[j];
                if delta != 0.0 {
                    for i in 0..n {
                        residual[i] -= col[i] * delta;
                    }
                    beta[j] = updated;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if let Some(out) = trace.as_deref_mut() {
                out.push(self.objective(&residual, beta, lam1, lam2));
            }
            if max_delta < tol {
                return Ok(());
            }
            last_delta = max_delta;
        }
        Err(Error::NonConvergence(format!(
            "coordinate descent stalled after {max_sweeps} sweeps, last max coordinate change {last_delta:.3e}"
        )))
    }
}

struct Standardized {
    xs: Vec<Vec<f64>>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

/// Standardizes columns to unit sample deviation; constant columns stay
/// zeroed and drop out of the penalty path.
fn standardize(cols: &[&[f64]]) -> Standardized {
    let mut xs = Vec::with_capacity(cols.len());
    let mut means = Vec::with_capacity(cols.len());
    let mut sds = Vec::with_capacity(cols.len());
    for col in cols {
        let m = mean(col);
        let sd = sample_sd(col);
        means.push(m);
        sds.push(sd);
        if sd == 0.0 {
            xs.push(vec![0.0; col.len()]);
        } else {
            xs.push(col.iter().map(|v| (v - m) / sd).collect());
        }
    }
    Standardized { xs, means, sds }
}

/// Smallest penalty with an all-zero solution on the standardized problem.
fn alpha_max(xs: &[Vec<f64>], y: &[f64], mix: f64) -> f64 {
    let ym = mean(y);
    let top = xs
        .iter()
        .map(|col| {
            col.iter()
                .zip(y)
                .map(|(x, v)| x * (v - ym))
                .sum::<f64>()
                .abs()
        })
        .fold(0.0f64, f64::max);
    2.0 * top / mix
}

fn geometric_path(alpha_max: f64, n_alphas: usize, min_ratio: f64) -> Vec<f64> {
    if n_alphas == 1 {
        return vec![alpha_max];
    }
    (0..n_alphas)
        .map(|i| alpha_max * min_ratio.powf(i as f64 / (n_alphas - 1) as f64))
        .collect()
}

/// Slope solution on the standardized scale mapped back: original slopes and
/// the unpenalized intercept.
fn to_original_scale(
    beta_std: &[f64],
    std: &Standardized,
    col_means_centered: &[f64],
    y_mean: f64,
) -> (f64, Vec<f64>) {
    let mut intercept = y_mean;
    let mut beta = vec![0.0; beta_std.len()];
    for j in 0..beta_std.len() {
        if std.sds[j] == 0.0 {
            continue;
        }
        // slope per standardized unit maps back through the column scale;
        // both centering steps fold into the intercept
        beta[j] = beta_std[j] / std.sds[j];
        intercept -= beta_std[j] * col_means_centered[j] + beta[j] * std.means[j];
    }
    (intercept, beta)
}

fn validate_inputs(x: &Panel, y: &Series, folds: usize) -> Result<()> {
    check_fit_alignment(x, y)?;
    if sample_sd(y.values()) == 0.0 {
        return Err(Error::Domain("target has zero variance".to_string()));
    }
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    if x.n_rows() < folds {
        return Err(Error::InvalidArgument(format!(
            "{} rows cannot fill {folds} folds",
            x.n_rows()
        )));
    }
    Ok(())
}

/// Full-data solve at fixed hyperparameters on raw column slices; returns
/// (intercept, original-scale slopes).
fn solve_columns(
    cols: &[&[f64]],
    y: &[f64],
    alpha: f64,
    mix: f64,
    config: &ElasticNetConfig,
) -> Result<(f64, Vec<f64>)> {
    let std = standardize(cols);
    let rows: Vec<usize> = (0..y.len()).collect();
    let (problem, col_means, y_mean) = CdProblem::build(&std.xs, y, &rows);
    let mut beta = vec![0.0; cols.len()];
    problem.solve(
        &mut beta,
        alpha * mix,
        alpha * (1.0 - mix),
        config.tol,
        config.max_sweeps,
        None,
    )?;
    Ok(to_original_scale(&beta, &std, &col_means, y_mean))
}

fn panel_columns(x: &Panel) -> Vec<&[f64]> {
    (0..x.n_cols()).map(|c| x.column_at(c)).collect()
}

fn make_fit(
    x: &Panel,
    seed: u64,
    fingerprint: String,
    alpha: f64,
    mix: f64,
    intercept: f64,
    beta: Vec<f64>,
) -> FitResult {
    FitResult {
        version: FIT_FORMAT_VERSION,
        kind: RegressorKind::ElasticNet,
        columns: x.columns().to_vec(),
        seed,
        fingerprint,
        hyperparams: Hyperparams::ElasticNet { alpha, mix },
        state: FitState::ElasticNet(ElasticNetState { intercept, beta }),
    }
}

/// Fits the elastic net with the mixing-grid penalty-path search scored by
/// K-fold cross-validation; ties prefer the larger penalty, then grid order.
pub fn fit_elastic_net(
    x: &Panel,
    y: &Series,
    folds: usize,
    spec: &RegressorSpec,
) -> Result<FitResult> {
    let config = &spec.elastic_net;
    validate_inputs(x, y, folds)?;
    if mix_grid_invalid(&config.mix_grid) {
        return Err(Error::InvalidArgument(
            "mixing grid values must lie in (0, 1]".to_string(),
        ));
    }
    let n = x.n_rows();
    let cols = panel_columns(x);
    let std = standardize(&cols);
    let yv = y.values();
    let fold_bounds = contiguous_folds(n, folds);

    let mut best: Option<(f64, f64, f64)> = None; // (cv_mse, alpha, mix)
    for &mix in &config.mix_grid {
        let a_max = alpha_max(&std.xs, yv, mix);
        if !a_max.is_finite() || a_max <= 0.0 {
            return Err(Error::Domain(
                "penalty path undefined: design uncorrelated with target".to_string(),
            ));
        }
        let path = geometric_path(a_max, config.n_alphas, config.alpha_min_ratio);
        let mut sse = vec![0.0f64; path.len()];
        for &(lo, hi) in &fold_bounds {
            let train: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
            let (problem, col_means, y_mean) = CdProblem::build(&std.xs, yv, &train);
            let mut beta = vec![0.0; cols.len()];
            for (ai, &alpha) in path.iter().enumerate() {
                problem.solve(
                    &mut beta,
                    alpha * mix,
                    alpha * (1.0 - mix),
                    config.tol,
                    config.max_sweeps,
                    None,
                )?;
                for i in lo..hi {
                    let mut pred = y_mean;
                    for j in 0..cols.len() {
                        pred += beta[j] * (std.xs[j][i] - col_means[j]);
                    }
                    sse[ai] += (yv[i] - pred).powi(2);
                }
            }
        }
        for (ai, &alpha) in path.iter().enumerate() {
            let mse = sse[ai] / n as f64;
            let better = match best {
                None => true,
                Some((b_mse, b_alpha, _)) => mse < b_mse || (mse == b_mse && alpha > b_alpha),
            };
            if better {
                best = Some((mse, alpha, mix));
            }
        }
    }
    let (_, alpha, mix) = best.expect("non-empty search grid");
    let (intercept, beta) = solve_columns(&cols, yv, alpha, mix, config)?;
    let fingerprint = training_fingerprint(RegressorKind::ElasticNet, x, y, spec.seed);
    Ok(make_fit(x, spec.seed, fingerprint, alpha, mix, intercept, beta))
}

fn mix_grid_invalid(grid: &[f64]) -> bool {
    grid.is_empty() || grid.iter().any(|m| !(*m > 0.0 && *m <= 1.0))
}

/// Fit at caller-fixed hyperparameters, no search.
/// Per-sweep penalized objective of a coordinate-descent solve at fixed
/// penalties; exposes the monotone-descent property for external checks.
pub fn elastic_net_objective_trace(
    x: &Panel,
    y: &Series,
    alpha: f64,
    mix: f64,
    config: &ElasticNetConfig,
) -> Result<Vec<f64>> {
    check_fit_alignment(x, y)?;
    if !(0.0..=1.0).contains(&mix) || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "penalty alpha {alpha} and mix {mix} must be non-negative with mix in [0, 1]"
        )));
    }
    let cols = panel_columns(x);
    let std = standardize(&cols);
    let rows: Vec<usize> = (0..y.len()).collect();
    let (problem, _, _) = CdProblem::build(&std.xs, y.values(), &rows);
    let mut beta = vec![0.0; cols.len()];
    let mut trace = Vec::new();
    problem.solve(
        &mut beta,
        alpha * mix,
        alpha * (1.0 - mix),
        config.tol,
        config.max_sweeps,
        Some(&mut trace),
    )?;
    Ok(trace)
}

pub fn fit_elastic_net_fixed(
    x: &Panel,
    y: &Series,
    alpha: f64,
    mix: f64,
    config: &ElasticNetConfig,
) -> Result<FitResult> {
    check_fit_alignment(x, y)?;
    if sample_sd(y.values()) == 0.0 {
        return Err(Error::Domain("target has zero variance".to_string()));
    }
    if !(0.0..=1.0).contains(&mix) || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "penalty alpha {alpha} and mix {mix} must be non-negative with mix in [0, 1]"
        )));
    }
    let cols = panel_columns(x);
    let (intercept, beta) = solve_columns(&cols, y.values(), alpha, mix, config)?;
    let fingerprint = training_fingerprint(RegressorKind::ElasticNet, x, y, 0);
    Ok(make_fit(x, 0, fingerprint, alpha, mix, intercept, beta))
}

fn resample_fit(
    cols: &[&[f64]],
    y: &[f64],
    indices: &[usize],
    alpha: f64,
    mix: f64,
    config: &ElasticNetConfig,
) -> Result<Option<(f64, Vec<f64>)>> {
    let ys: Vec<f64> = indices.iter().map(|&i| y[i]).collect();
    if sample_sd(&ys) == 0.0 {
        return Ok(None);
    }
    let sampled: Vec<Vec<f64>> = cols
        .iter()
        .map(|col| indices.iter().map(|&i| col[i]).collect())
        .collect();
    let views: Vec<&[f64]> = sampled.iter().map(|c| c.as_slice()).collect();
    solve_columns(&views, &ys, alpha, mix, config).map(Some)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let pos = q * (m - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= m {
        sorted[m - 1]
    } else {
        sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
    }
}

/// Row bootstrap at fixed hyperparameters: per-coefficient means (the final
/// point estimates) and 2.5/97.5 percentile intervals.
pub fn bootstrap_elastic_net(
    x: &Panel,
    y: &Series,
    alpha: f64,
    mix: f64,
    replicates: usize,
    seed: u64,
    config: &ElasticNetConfig,
) -> Result<BootstrapSummary> {
    check_fit_alignment(x, y)?;
    if replicates < 1 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least one replicate".to_string(),
        ));
    }
    let n = x.n_rows();
    let cols = panel_columns(x);
    let mut rng = crate::numeric::seeded_rng(seed, 0xB001);
    let mut draws: Vec<Vec<f64>> = Vec::new();
    let mut intercepts: Vec<f64> = Vec::new();
    let mut skipped = 0usize;
    for _ in 0..replicates {
        let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        match resample_fit(&cols, y.values(), &indices, alpha, mix, config)? {
            Some((intercept, beta)) => {
                intercepts.push(intercept);
                draws.push(beta);
            }
            None => skipped += 1,
        }
    }
    if draws.is_empty() {
        return Err(Error::Domain(
            "all bootstrap resamples had a degenerate target".to_string(),
        ));
    }
    summarize_draws(x, intercepts, draws, skipped)
}

fn summarize_draws(
    x: &Panel,
    intercepts: Vec<f64>,
    draws: Vec<Vec<f64>>,
    skipped: usize,
) -> Result<BootstrapSummary> {
    let k = x.n_cols();
    let mut mean_vec = vec![0.0; k];
    let mut lower = vec![0.0; k];
    let mut upper = vec![0.0; k];
    for j in 0..k {
        let mut vals: Vec<f64> = draws.iter().map(|d| d[j]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite coefficients"));
        mean_vec[j] = mean(&vals);
        lower[j] = percentile(&vals, 0.025);
        upper[j] = percentile(&vals, 0.975);
    }
    Ok(BootstrapSummary {
        columns: x.columns().to_vec(),
        intercept_mean: mean(&intercepts),
        mean: mean_vec,
        lower,
        upper,
        replicates: draws.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{ols_solve, seeded_rng};
    use crate::series::TimeIndex;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand_distr::{Distribution, StandardNormal};

    fn random_panel(seed: u64, n: usize, k: usize) -> Panel {
        let mut rng = seeded_rng(seed, 10);
        Panel::new(
            TimeIndex::quarterly(2000, 1, n).unwrap(),
            (0..k).map(|c| format!("x{c}")).collect(),
            (0..k)
                .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn linear_target(x: &Panel, slopes: &[f64], intercept: f64, noise: f64, seed: u64) -> Series {
        let mut rng = seeded_rng(seed, 11);
        let values: Vec<f64> = (0..x.n_rows())
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                intercept
                    + slopes
                        .iter()
                        .enumerate()
                        .map(|(c, s)| s * x.column_at(c)[i])
                        .sum::<f64>()
                    + noise * e
            })
            .collect();
        Series::new(*x.index(), values).unwrap()
    }

    fn state_of(fit: &FitResult) -> &ElasticNetState {
        match &fit.state {
            FitState::ElasticNet(s) => s,
            _ => unreachable!(),
        }
    }

    #[test]
    fn vanishing_penalty_matches_ols() {
        let x = random_panel(1, 60, 3);
        let y = linear_target(&x, &[1.2, -0.5, 0.3], 0.7, 0.2, 2);
        let fit =
            fit_elastic_net_fixed(&x, &y, 1e-10, 0.5, &ElasticNetConfig::default()).unwrap();
        let state = state_of(&fit);

        let mut design = DMatrix::zeros(60, 4);
        for i in 0..60 {
            design[(i, 0)] = 1.0;
            for c in 0..3 {
                design[(i, c + 1)] = x.column_at(c)[i];
            }
        }
        let ols = ols_solve(&design, &DVector::from_column_slice(y.values())).unwrap();
        assert_abs_diff_eq!(state.intercept, ols[0], epsilon = 1e-4);
        for c in 0..3 {
            assert_abs_diff_eq!(state.beta[c], ols[c + 1], epsilon = 1e-4);
        }
    }

    #[test]
    fn huge_penalty_zeroes_slopes_and_keeps_mean_intercept() {
        let x = random_panel(3, 40, 4);
        let y = linear_target(&x, &[1.0, 1.0, 1.0, 1.0], 2.0, 0.5, 4);
        let fit = fit_elastic_net_fixed(&x, &y, 1e9, 0.5, &ElasticNetConfig::default()).unwrap();
        let state = state_of(&fit);
        for b in &state.beta {
            assert_eq!(*b, 0.0);
        }
        assert_abs_diff_eq!(state.intercept, mean(y.values()), epsilon = 1e-12);
        let pred = super::super::predict(&fit, &x).unwrap();
        for v in pred.values() {
            assert_abs_diff_eq!(*v, state.intercept, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_feature_lasso_matches_brute_force_scan() {
        let mut rng = seeded_rng(5, 12);
        let n = 50;
        let raw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = mean(&raw);
        let sd = sample_sd(&raw);
        let xcol: Vec<f64> = raw.iter().map(|v| (v - m) / sd).collect();
        let y_raw: Vec<f64> = xcol
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                0.8 * v + 0.4 * e
            })
            .collect();
        let x = Panel::new(
            TimeIndex::quarterly(2000, 1, n).unwrap(),
            vec!["x".into()],
            vec![xcol.clone()],
        )
        .unwrap();
        let y = Series::new(*x.index(), y_raw.clone()).unwrap();

        for alpha in [5.0, 20.0, 60.0] {
            let fit =
                fit_elastic_net_fixed(&x, &y, alpha, 1.0, &ElasticNetConfig::default()).unwrap();
            let got = state_of(&fit).beta[0];

            // profile the intercept out on centered data, then scan the
            // penalized objective in two stages
            let xm = mean(&xcol);
            let ym = mean(&y_raw);
            let xc: Vec<f64> = xcol.iter().map(|v| v - xm).collect();
            let yc: Vec<f64> = y_raw.iter().map(|v| v - ym).collect();
            // the fit rescales to unit sample deviation internally
            let xsd = sample_sd(&xcol);
            let objective = |b_orig: f64| {
                let sse: f64 = xc
                    .iter()
                    .zip(&yc)
                    .map(|(xv, yv)| (yv - b_orig * xv).powi(2))
                    .sum();
                sse + alpha * (b_orig * xsd).abs()
            };
            let scan = |lo: f64, hi: f64, steps: usize| {
                let mut best = (lo, objective(lo));
                for i in 1..=steps {
                    let b = lo + (hi - lo) * i as f64 / steps as f64;
                    let v = objective(b);
                    if v < best.1 {
                        best = (b, v);
                    }
                }
                best
            };
            let coarse = scan(-3.0, 3.0, 6_000);
            let fine = scan(coarse.0 - 2e-3, coarse.0 + 2e-3, 40_000);
            assert_abs_diff_eq!(got, fine.0, epsilon = 1e-6);

            // closed form at unit scale for cross-checking
            let sxy: f64 = xc.iter().zip(&yc).map(|(a, b)| a * b).sum();
            let sxx: f64 = xc.iter().map(|v| v * v).sum();
            let closed = soft_threshold(sxy / xsd, alpha / 2.0) / (sxx / (xsd * xsd));
            assert_abs_diff_eq!(got, closed / xsd, epsilon = 1e-9);
        }
    }

    #[test]
    fn sweep_objective_never_increases() {
        let mut rng = seeded_rng(6, 13);
        let n = 80;
        let base: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let corr: Vec<f64> = base
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + 0.05 * e
            })
            .collect();
        let third: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                1.0 + 2.0 * base[i] - 1.0 * corr[i] + 0.5 * third[i] + 0.3 * e
            })
            .collect();
        let std = standardize(&[&base, &corr, &third]);
        let rows: Vec<usize> = (0..n).collect();
        let (problem, _, _) = CdProblem::build(&std.xs, &y, &rows);
        let mut beta = vec![0.0; 3];
        let mut trace = Vec::new();
        problem
            .solve(&mut beta, 3.0, 1.5, 1e-10, 50_000, Some(&mut trace))
            .unwrap();
        assert!(trace.len() > 2);
        for w in trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0),
                "objective rose from {} to {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn different_starts_reach_the_same_objective() {
        let mut rng = seeded_rng(7, 14);
        let n = 60;
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                0.9 * cols[0][i] - 0.4 * cols[2][i] + 0.2 * e
            })
            .collect();
        let views: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let std = standardize(&views);
        let rows: Vec<usize> = (0..n).collect();
        let (problem, _, _) = CdProblem::build(&std.xs, &y, &rows);

        let (lam1, lam2) = (4.0, 2.0);
        let run = |warm: Vec<f64>| {
            let mut beta = warm;
            let mut trace = Vec::new();
            problem
                .solve(&mut beta, lam1, lam2, 1e-12, 100_000, Some(&mut trace))
                .unwrap();
            *trace.last().unwrap()
        };
        let from_zeros = run(vec![0.0; 4]);
        let from_far = run(vec![5.0, -3.0, 2.5, -4.0]);
        assert_abs_diff_eq!(from_zeros, from_far, epsilon = 1e-8);
    }

    #[test]
    fn sweep_budget_exhaustion_reports_surrogate() {
        let x = random_panel(8, 50, 3);
        let shadow: Vec<f64> = x
            .column_at(0)
            .iter()
            .zip(x.column_at(1))
            .map(|(a, b)| a + 1e-3 * b)
            .collect();
        let panel = Panel::new(
            *x.index(),
            vec!["a".into(), "b".into()],
            vec![x.column_at(0).to_vec(), shadow],
        )
        .unwrap();
        let y = linear_target(&panel, &[1.0, -1.0], 0.0, 0.1, 9);
        let config = ElasticNetConfig {
            max_sweeps: 2,
            tol: 1e-14,
            ..ElasticNetConfig::default()
        };
        match fit_elastic_net_fixed(&panel, &y, 1e-6, 0.5, &config) {
            Err(Error::NonConvergence(msg)) => {
                assert!(msg.contains("sweeps"), "{msg}");
                assert!(msg.contains("coordinate change"), "{msg}");
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn search_picks_a_path_point_and_shrinks_noise() {
        let x = random_panel(10, 48, 6);
        let y = linear_target(&x, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.3, 0.4, 11);
        let spec = RegressorSpec::new(RegressorKind::ElasticNet, 21);
        let fit = fit_elastic_net(&x, &y, 4, &spec).unwrap();
        let (alpha, mix) = match fit.hyperparams {
            Hyperparams::ElasticNet { alpha, mix } => (alpha, mix),
            _ => unreachable!(),
        };
        assert!(spec.elastic_net.mix_grid.contains(&mix));
        assert!(alpha > 0.0);
        let state = state_of(&fit);
        let signal = state.beta[0].abs();
        for c in 1..6 {
            assert!(
                state.beta[c].abs() < signal,
                "noise coefficient {c} not shrunk below the signal"
            );
        }
    }

    #[test]
    fn full_sample_resample_reproduces_the_fixed_fit() {
        let x = random_panel(12, 30, 2);
        let y = linear_target(&x, &[1.0, -2.0], 0.5, 0.3, 13);
        let config = ElasticNetConfig::default();
        let fit = fit_elastic_net_fixed(&x, &y, 0.7, 0.5, &config).unwrap();
        let cols = panel_columns(&x);
        let identity: Vec<usize> = (0..30).collect();
        let (intercept, beta) =
            resample_fit(&cols, y.values(), &identity, 0.7, 0.5, &config)
                .unwrap()
                .unwrap();
        let state = state_of(&fit);
        assert_eq!(intercept, state.intercept);
        assert_eq!(beta, state.beta);
    }

    #[test]
    fn noiseless_bootstrap_mean_recovers_the_slope() {
        let x = random_panel(14, 40, 1);
        let y = linear_target(&x, &[2.0], 0.0, 0.0, 15);
        let summary =
            bootstrap_elastic_net(&x, &y, 1e-10, 0.5, 30, 99, &ElasticNetConfig::default())
                .unwrap();
        assert_abs_diff_eq!(summary.mean[0], 2.0, epsilon = 1e-6);
        assert_eq!(summary.replicates, 30);
        assert_eq!(summary.skipped, 0);
    }

    #[test]
    fn interval_width_grows_with_noise() {
        let x = random_panel(16, 60, 1);
        let mut widths = Vec::new();
        for noise in [0.1, 0.2, 0.4] {
            let y = linear_target(&x, &[1.5], 0.2, noise, 17);
            let summary =
                bootstrap_elastic_net(&x, &y, 1e-6, 0.5, 200, 7, &ElasticNetConfig::default())
                    .unwrap();
            widths.push(summary.upper[0] - summary.lower[0]);
        }
        assert!(widths[0] < widths[1], "widths {widths:?}");
        assert!(widths[1] < widths[2], "widths {widths:?}");
    }

    #[test]
    fn degenerate_resamples_are_skipped_and_counted() {
        let x = Panel::new(
            TimeIndex::quarterly(2000, 1, 4).unwrap(),
            vec!["x".into()],
            vec![vec![1.0, 2.0, 3.0, 4.0]],
        )
        .unwrap();
        let y = Series::new(*x.index(), vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let summary =
            bootstrap_elastic_net(&x, &y, 1e-4, 0.5, 40, 3, &ElasticNetConfig::default())
                .unwrap();
        assert!(summary.skipped > 0);
        assert_eq!(summary.replicates + summary.skipped, 40);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let x = random_panel(18, 12, 2);
        let constant = Series::new(*x.index(), vec![3.0; 12]).unwrap();
        let spec = RegressorSpec::new(RegressorKind::ElasticNet, 1);
        assert!(matches!(
            fit_elastic_net(&x, &constant, 3, &spec),
            Err(Error::Domain(_))
        ));
        let y = linear_target(&x, &[1.0, 1.0], 0.0, 0.2, 19);
        assert!(matches!(
            fit_elastic_net(&x, &y, 1, &spec),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            fit_elastic_net(&x, &y, 13, &spec),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn constant_column_gets_zero_coefficient() {
        let base = random_panel(20, 30, 1);
        let x = Panel::new(
            *base.index(),
            vec!["x".into(), "flat".into()],
            vec![base.column_at(0).to_vec(), vec![2.0; 30]],
        )
        .unwrap();
        let y = linear_target(&base, &[1.0], 0.1, 0.2, 21);
        let y = Series::new(*x.index(), y.values().to_vec()).unwrap();
        let fit = fit_elastic_net_fixed(&x, &y, 0.01, 0.5, &ElasticNetConfig::default()).unwrap();
        assert_eq!(state_of(&fit).beta[1], 0.0);
    }
}
