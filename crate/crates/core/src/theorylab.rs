//! Simulation checks of two population results behind the modeling choices.
//!
//! - Regime switching: OLS on a mixture of coefficient regimes concentrates
//!   on the share-weighted blend, and crisis-quarter residuals against that
//!   blend carry a computable conditional bias.
//! - Ridge regression: the exact mean squared error of the coefficient
//!   estimate as a function of the penalty, with a Monte Carlo cross-check;
//!   some positive penalty beats least squares whenever noise is present.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{seeded_rng, solve_spd};

const REGIME_SALT: u64 = 0x7E01_0000;
const RIDGE_SALT: u64 = 0x7E02_0000;
/// Expected crisis draws below this trigger the underrepresentation warning.
const MIN_CRISIS_DRAWS: f64 = 5.0;

/// Two-regime data-generating process: coefficients switch with probability
/// `crisis_share`, regressors are unit-variance Gaussian with a
/// regime-conditional mean.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegimeDgpSpec {
    pub beta_normal: Vec<f64>,
    pub beta_crisis: Vec<f64>,
    /// Probability of the crisis regime per observation.
    pub crisis_share: f64,
    pub noise_sd: f64,
    /// Regressor mean in the crisis regime; the normal-regime mean is zero.
    pub crisis_mean: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

/// What one simulated sample says about the blended coefficient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegimeBiasReport {
    /// OLS estimate on the pooled sample, no intercept.
    pub beta_ols: Vec<f64>,
    /// Share-weighted coefficient blend the estimate concentrates on.
    pub beta_blend: Vec<f64>,
    /// Heteroskedasticity-robust standard errors of the OLS estimate.
    pub beta_se: Vec<f64>,
    pub crisis_draws: usize,
    /// Population crisis bias: (1 - share) * (crisis - normal)' * crisis mean.
    pub crisis_bias_formula: f64,
    /// Mean crisis-quarter residual against the blend; absent without
    /// crisis draws.
    pub crisis_bias_empirical: Option<f64>,
    /// Standard error of the empirical crisis bias.
    pub crisis_bias_stderr: Option<f64>,
    pub warning: Option<String>,
}

/// Simulates the two-regime process and measures the OLS blend and the
/// crisis conditional bias, both empirically and in closed form.
pub fn simulate_regime_bias(spec: &RegimeDgpSpec) -> Result<RegimeBiasReport> {
    let k = spec.beta_normal.len();
    if k == 0 || spec.beta_crisis.len() != k || spec.crisis_mean.len() != k {
        return Err(Error::InvalidArgument(format!(
            "coefficient and mean vectors must share one nonzero length, got {}, {}, {}",
            k,
            spec.beta_crisis.len(),
            spec.crisis_mean.len()
        )));
    }
    if !(0.0..=1.0).contains(&spec.crisis_share) {
        return Err(Error::Domain(format!(
            "crisis share {} outside [0, 1]",
            spec.crisis_share
        )));
    }
    if !(spec.noise_sd >= 0.0) {
        return Err(Error::Domain(format!(
            "noise standard deviation {} must be nonnegative",
            spec.noise_sd
        )));
    }
    if spec.n < 100 {
        return Err(Error::InvalidArgument(format!(
            "regime simulation needs at least 100 observations, got {}",
            spec.n
        )));
    }

    let pi = spec.crisis_share;
    let beta_blend: Vec<f64> = spec
        .beta_normal
        .iter()
        .zip(&spec.beta_crisis)
        .map(|(b1, b2)| (1.0 - pi) * b1 + pi * b2)
        .collect();
    let crisis_bias_formula = (1.0 - pi)
        * spec
            .beta_crisis
            .iter()
            .zip(&spec.beta_normal)
            .zip(&spec.crisis_mean)
            .map(|((b2, b1), m)| (b2 - b1) * m)
            .sum::<f64>();

    let mut rng = seeded_rng(spec.seed, REGIME_SALT);
    let n = spec.n;
    let mut x = DMatrix::<f64>::zeros(n, k);
    let mut y = DVector::<f64>::zeros(n);
    let mut crisis_rows: Vec<usize> = Vec::new();
    for i in 0..n {
        let crisis = rng.random_bool(pi);
        let beta = if crisis {
            &spec.beta_crisis
        } else {
            &spec.beta_normal
        };
        let mut signal = 0.0;
        for j in 0..k {
            let shift = if crisis { spec.crisis_mean[j] } else { 0.0 };
            let draw: f64 = StandardNormal.sample(&mut rng);
            let v = shift + draw;
            x[(i, j)] = v;
            signal += beta[j] * v;
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        y[i] = signal + spec.noise_sd * e;
        if crisis {
            crisis_rows.push(i);
        }
    }

    let xtx = x.transpose() * &x;
    let beta_ols = solve_spd(&xtx, &(x.transpose() * &y))?;
    let beta_se = hc0_standard_errors(&x, &y, &beta_ols, &xtx)?;

    // residuals against the population blend, not the sample estimate, so
    // the empirical mean targets the closed-form bias directly
    let (crisis_bias_empirical, crisis_bias_stderr) = if crisis_rows.is_empty() {
        (None, None)
    } else {
        let resid: Vec<f64> = crisis_rows
            .iter()
            .map(|&i| {
                let fitted: f64 = (0..k).map(|j| beta_blend[j] * x[(i, j)]).sum();
                y[i] - fitted
            })
            .collect();
        let m = resid.len() as f64;
        let mean = resid.iter().sum::<f64>() / m;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
        (Some(mean), Some((var / m).sqrt()))
    };

    let warning = if pi * n as f64 >= MIN_CRISIS_DRAWS {
        None
    } else {
        Some("crisis regime underrepresented".to_string())
    };
    Ok(RegimeBiasReport {
        beta_ols: beta_ols.iter().copied().collect(),
        beta_blend,
        beta_se,
        crisis_draws: crisis_rows.len(),
        crisis_bias_formula,
        crisis_bias_empirical,
        crisis_bias_stderr,
        warning,
    })
}

/// White sandwich standard errors; robust to the regime-induced
/// heteroskedasticity of residuals around the blend.
fn hc0_standard_errors(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    xtx: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let k = x.ncols();
    let resid = y - x * beta;
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for i in 0..x.nrows() {
        let u2 = resid[i] * resid[i];
        for a in 0..k {
            for b in 0..k {
                meat[(a, b)] += u2 * x[(i, a)] * x[(i, b)];
            }
        }
    }
    let inv = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("design gram matrix is singular".to_string()))?
        .inverse();
    let cov = &inv * meat * &inv;
    Ok((0..k).map(|j| cov[(j, j)].sqrt()).collect())
}

/// Spectral description of a ridge problem: gram eigenvalues, true
/// coefficients in the eigenbasis, and the noise variance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RidgeCurveSpec {
    /// Eigenvalues of the design gram matrix, all positive.
    pub eigenvalues: Vec<f64>,
    /// True coefficients rotated into the eigenbasis.
    pub alignments: Vec<f64>,
    pub noise_variance: f64,
    /// Penalty grid; must contain 0 so the unpenalized point anchors it.
    pub lambdas: Vec<f64>,
}

impl RidgeCurveSpec {
    fn validate(&self) -> Result<()> {
        if self.eigenvalues.is_empty() || self.eigenvalues.len() != self.alignments.len() {
            return Err(Error::InvalidArgument(format!(
                "need matching nonzero eigenvalue and alignment lengths, got {} and {}",
                self.eigenvalues.len(),
                self.alignments.len()
            )));
        }
        if let Some(d) = self.eigenvalues.iter().find(|d| !(**d > 0.0)) {
            return Err(Error::Domain(format!("eigenvalue {d} must be positive")));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::Domain(format!(
                "noise variance {} must be nonnegative",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

/// One grid point of the ridge risk curve.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RidgePoint {
    pub lambda: f64,
    pub mse: f64,
}

/// Closed-form ridge risk over a grid, anchored at the unpenalized point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RidgeCurveReport {
    pub points: Vec<RidgePoint>,
    /// Grid penalty with the smallest risk; ties keep the smallest penalty.
    pub argmin: f64,
    pub min_mse: f64,
    pub mse_at_zero: f64,
    /// Finite-difference slope just right of zero.
    pub initial_slope: f64,
    pub initially_decreasing: bool,
}

/// Exact coefficient mean squared error of ridge at one penalty:
/// variance sum(sigma^2 d / (d + lambda)^2) plus bias
/// sum(lambda^2 alpha^2 / (d + lambda)^2).
pub fn ridge_mse_at(spec: &RidgeCurveSpec, lambda: f64) -> Result<f64> {
    spec.validate()?;
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("penalty {lambda} must be nonnegative")));
    }
    Ok(spec
        .eigenvalues
        .iter()
        .zip(&spec.alignments)
        .map(|(d, a)| {
            let denom = (d + lambda) * (d + lambda);
            (spec.noise_variance * d + lambda * lambda * a * a) / denom
        })
        .sum())
}

/// Evaluates the risk curve on the spec's grid.
pub fn ridge_mse_curve(spec: &RidgeCurveSpec) -> Result<RidgeCurveReport> {
    spec.validate()?;
    if !spec.lambdas.contains(&0.0) {
        return Err(Error::InvalidArgument(
            "penalty grid must contain 0".to_string(),
        ));
    }
    let mut points = Vec::with_capacity(spec.lambdas.len());
    for &lambda in &spec.lambdas {
        points.push(RidgePoint {
            lambda,
            mse: ridge_mse_at(spec, lambda)?,
        });
    }
    let mse_at_zero = ridge_mse_at(spec, 0.0)?;
    let best = points
        .iter()
        .min_by(|a, b| {
            a.mse
                .partial_cmp(&b.mse)
                .unwrap()
                .then(a.lambda.partial_cmp(&b.lambda).unwrap())
        })
        .expect("grid is nonempty");
    let d_min = spec.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let h = 1e-6 * d_min;
    let initial_slope = (ridge_mse_at(spec, h)? - mse_at_zero) / h;
    Ok(RidgeCurveReport {
        argmin: best.lambda,
        min_mse: best.mse,
        points,
        mse_at_zero,
        initial_slope,
        initially_decreasing: initial_slope < 0.0,
    })
}

/// Monte Carlo average with its standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
}

/// Simulates the spectral ridge problem and averages the squared
/// coefficient error over replications; cross-checks the closed form.
pub fn ridge_mse_monte_carlo(
    spec: &RidgeCurveSpec,
    lambda: f64,
    replications: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    spec.validate()?;
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("penalty {lambda} must be nonnegative")));
    }
    if replications < 2 {
        return Err(Error::InvalidArgument(
            "Monte Carlo cross-check needs at least 2 replications".to_string(),
        ));
    }
    let sigma = spec.noise_variance.sqrt();
    let mut rng = seeded_rng(seed, RIDGE_SALT);
    let mut draws = Vec::with_capacity(replications);
    for _ in 0..replications {
        // with the design diag(sqrt(d)) the ridge estimate separates per
        // coordinate: (d b + sqrt(d) e) / (d + lambda)
        let mut sq_err = 0.0;
        for (d, a) in spec.eigenvalues.iter().zip(&spec.alignments) {
            let e: f64 = StandardNormal.sample(&mut rng);
            let est = (d * a + d.sqrt() * sigma * e) / (d + lambda);
            sq_err += (est - a) * (est - a);
        }
        draws.push(sq_err);
    }
    let m = replications as f64;
    let mean = draws.iter().sum::<f64>() / m;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        stderr: (var / m).sqrt(),
        replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn scalar_spec(pi: f64, crisis_mean: f64, n: usize, seed: u64) -> RegimeDgpSpec {
        RegimeDgpSpec {
            beta_normal: vec![0.0],
            beta_crisis: vec![2.0],
            crisis_share: pi,
            noise_sd: 0.1,
            crisis_mean: vec![crisis_mean],
            n,
            seed,
        }
    }

    #[test]
    fn no_crisis_regime_reports_formula_only() {
        let report = simulate_regime_bias(&scalar_spec(0.0, 1.0, 500, 3)).unwrap();
        assert_eq!(report.beta_blend, vec![0.0]);
        assert_eq!(report.crisis_draws, 0);
        assert_eq!(report.crisis_bias_empirical, None);
        assert_eq!(report.crisis_bias_stderr, None);
        assert_abs_diff_eq!(report.crisis_bias_formula, 2.0, epsilon = 1e-15);
        assert_eq!(
            report.warning.as_deref(),
            Some("crisis regime underrepresented")
        );
    }

    #[test]
    fn scalar_blend_and_bias_formula_by_hand() {
        let report = simulate_regime_bias(&scalar_spec(0.5, 1.0, 1000, 4)).unwrap();
        assert_eq!(report.beta_blend, vec![1.0]);
        assert_eq!(report.crisis_bias_formula, 1.0);
        assert!(report.warning.is_none());
    }

    #[test]
    fn ols_concentrates_on_the_blend_across_seeds() {
        let mut hits = 0;
        for seed in 0..100 {
            let report = simulate_regime_bias(&scalar_spec(0.5, 0.0, 100_000, seed)).unwrap();
            if (report.beta_ols[0] - 1.0).abs() < 3.0 * report.beta_se[0] {
                hits += 1;
            }
        }
        assert!(hits >= 95, "blend covered in only {hits} of 100 seeds");
    }

    #[test]
    fn empirical_crisis_bias_matches_the_formula() {
        let report = simulate_regime_bias(&scalar_spec(0.5, 1.0, 100_000, 11)).unwrap();
        let bias = report.crisis_bias_empirical.unwrap();
        let se = report.crisis_bias_stderr.unwrap();
        assert!(
            (bias - report.crisis_bias_formula).abs() < 3.0 * se,
            "bias {bias} vs formula {} (se {se})",
            report.crisis_bias_formula
        );
    }

    #[test]
    fn equal_regimes_show_no_crisis_bias() {
        let spec = RegimeDgpSpec {
            beta_normal: vec![0.7, -0.3],
            beta_crisis: vec![0.7, -0.3],
            crisis_share: 0.3,
            noise_sd: 0.5,
            crisis_mean: vec![0.5, 1.0],
            n: 20_000,
            seed: 12,
        };
        let report = simulate_regime_bias(&spec).unwrap();
        assert_eq!(report.crisis_bias_formula, 0.0);
        let bias = report.crisis_bias_empirical.unwrap();
        let se = report.crisis_bias_stderr.unwrap();
        assert!(bias.abs() < 3.0 * se, "bias {bias} vs se {se}");
    }

    #[test]
    fn regime_simulation_is_deterministic() {
        let a = simulate_regime_bias(&scalar_spec(0.4, 0.5, 1000, 9)).unwrap();
        let b = simulate_regime_bias(&scalar_spec(0.4, 0.5, 1000, 9)).unwrap();
        assert_eq!(a.beta_ols[0].to_bits(), b.beta_ols[0].to_bits());
        assert_eq!(a.crisis_draws, b.crisis_draws);
        assert_eq!(
            a.crisis_bias_empirical.unwrap().to_bits(),
            b.crisis_bias_empirical.unwrap().to_bits()
        );
    }

    #[test]
    fn regime_spec_validation() {
        assert!(simulate_regime_bias(&scalar_spec(-0.1, 0.0, 500, 1)).is_err());
        assert!(simulate_regime_bias(&scalar_spec(1.5, 0.0, 500, 1)).is_err());
        assert!(simulate_regime_bias(&scalar_spec(0.5, 0.0, 99, 1)).is_err());
        let mut bad = scalar_spec(0.5, 0.0, 500, 1);
        bad.noise_sd = -1.0;
        assert!(simulate_regime_bias(&bad).is_err());
        let mut mismatch = scalar_spec(0.5, 0.0, 500, 1);
        mismatch.beta_crisis = vec![1.0, 2.0];
        assert!(simulate_regime_bias(&mismatch).is_err());
        let tiny = simulate_regime_bias(&scalar_spec(0.01, 0.0, 300, 1)).unwrap();
        assert_eq!(
            tiny.warning.as_deref(),
            Some("crisis regime underrepresented")
        );
    }

    fn unit_spec(lambdas: Vec<f64>) -> RidgeCurveSpec {
        RidgeCurveSpec {
            eigenvalues: vec![1.0, 1.0],
            alignments: vec![1.0, 1.0],
            noise_variance: 1.0,
            lambdas,
        }
    }

    #[test]
    fn textbook_two_eigenvalue_curve() {
        let spec = unit_spec(vec![0.0, 1.0]);
        let report = ridge_mse_curve(&spec).unwrap();
        assert_eq!(report.mse_at_zero, 2.0);
        assert_eq!(report.points[1].mse, 1.0);
        assert_eq!(report.argmin, 1.0);
        assert!(report.initially_decreasing);
        // whole curve matches 2 (1 + l^2) / (1 + l)^2
        for l in [0.1, 0.5, 2.0, 7.3] {
            let direct = 2.0 * (1.0 + l * l) / ((1.0 + l) * (1.0 + l));
            assert_abs_diff_eq!(ridge_mse_at(&spec, l).unwrap(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_shrinkage_leaves_pure_bias() {
        let spec = RidgeCurveSpec {
            eigenvalues: vec![0.5, 2.0, 4.0],
            alignments: vec![1.0, -2.0, 0.5],
            noise_variance: 2.0,
            lambdas: vec![0.0],
        };
        let norm2 = 1.0 + 4.0 + 0.25;
        let far = ridge_mse_at(&spec, 1e12).unwrap();
        assert_abs_diff_eq!(far, norm2, epsilon = 1e-9 * norm2);
    }

    #[test]
    fn noise_free_risk_is_minimized_by_least_squares() {
        let spec = RidgeCurveSpec {
            eigenvalues: vec![1.0, 3.0],
            alignments: vec![0.8, -1.2],
            noise_variance: 0.0,
            lambdas: vec![0.0, 0.1, 1.0, 10.0],
        };
        let report = ridge_mse_curve(&spec).unwrap();
        assert_eq!(report.mse_at_zero, 0.0);
        assert_eq!(report.argmin, 0.0);
        assert!(!report.initially_decreasing);
        for p in &report.points[1..] {
            assert!(p.mse > 0.0);
        }
    }

    #[test]
    fn monte_carlo_tracks_the_closed_form() {
        let spec = unit_spec(vec![0.0, 1.0]);
        for (lambda, exact, seed) in [(0.0, 2.0, 100), (1.0, 1.0, 101)] {
            let mc = ridge_mse_monte_carlo(&spec, lambda, 2000, seed).unwrap();
            assert!(
                (mc.mean - exact).abs() < 3.0 * mc.stderr,
                "lambda {lambda}: mc {} vs exact {exact} (se {})",
                mc.mean,
                mc.stderr
            );
        }
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let spec = unit_spec(vec![0.0]);
        let a = ridge_mse_monte_carlo(&spec, 0.5, 500, 7).unwrap();
        let b = ridge_mse_monte_carlo(&spec, 0.5, 500, 7).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn ridge_spec_validation() {
        let mut spec = unit_spec(vec![0.0, 1.0]);
        spec.eigenvalues[0] = 0.0;
        assert!(ridge_mse_curve(&spec).is_err());
        let mut neg = unit_spec(vec![0.0, -1.0]);
        assert!(ridge_mse_curve(&neg).is_err());
        neg.lambdas = vec![0.5, 1.0];
        assert!(ridge_mse_curve(&neg).is_err());
        let mut mismatch = unit_spec(vec![0.0]);
        mismatch.alignments.pop();
        assert!(ridge_mse_curve(&mismatch).is_err());
        let mut noisy = unit_spec(vec![0.0]);
        noisy.noise_variance = -0.5;
        assert!(ridge_mse_curve(&noisy).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn some_positive_penalty_beats_least_squares_under_noise(
            dims in proptest::collection::vec((0.1f64..10.0, -3.0f64..3.0), 1..6),
            noise in 0.01f64..4.0,
        ) {
            let spec = RidgeCurveSpec {
                eigenvalues: dims.iter().map(|p| p.0).collect(),
                alignments: dims.iter().map(|p| p.1).collect(),
                noise_variance: noise,
                lambdas: vec![0.0],
            };
            let max_align_sq = spec
                .alignments
                .iter()
                .map(|a| a * a)
                .fold(0.0f64, f64::max);
            // any penalty below 2 sigma^2 / max alpha^2 improves on least
            // squares; probe the midpoint of that window
            let lambda = if max_align_sq > 0.0 {
                noise / max_align_sq
            } else {
                1.0
            };
            let at_zero = ridge_mse_at(&spec, 0.0).unwrap();
            let at_lambda = ridge_mse_at(&spec, lambda).unwrap();
            prop_assert!(at_lambda < at_zero, "mse({lambda}) = {at_lambda} >= {at_zero}");
        }
    }
}
