//! GLS regression with AR(1) monthly residuals and its monthly distributor.
//!
//! - The quarterly residual covariance has a closed Toeplitz form, so the
//!   likelihood never builds a monthly covariance matrix.
//! - The AR(1) parameter maximizes the concentrated likelihood on
//!   (-0.999, 0.999) via a grid scan plus golden-section refinement.
//! - Distribution adds the covariance-weighted residual spread to the
//!   monthly regression signal; quarterly sums of the output reproduce the
//!   observed target exactly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::golden_section_max;
use crate::series::{Frequency, Panel, Series};

use super::{
    check_fit_alignment, training_fingerprint, FitResult, FitState, Hyperparams, RegressorKind,
    FIT_FORMAT_VERSION,
};

/// AR(1) parameter bound for the likelihood search.
pub const RHO_BOUND: f64 = 0.999;
/// Distance from the bound that triggers a boundary warning.
const BOUNDARY_MARGIN: f64 = 1e-3;
const GRID_PROBES: usize = 41;
const RHO_TOL: f64 = 1e-8;

/// Learned state: regression coefficients, AR(1) parameter, and innovation
/// variance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChowLinState {
    pub intercept: f64,
    pub beta: Vec<f64>,
    /// AR(1) parameter of the monthly residual, strictly inside (-1, 1).
    pub rho: f64,
    /// Innovation variance of the monthly residual.
    pub sigma2: f64,
    /// Concentrated log-likelihood at the optimum.
    pub log_likelihood: f64,
    /// Set when the AR(1) estimate hit the search boundary.
    pub boundary_warning: bool,
}

impl ChowLinState {
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

/// Covariance of 3-month sums of a stationary AR(1) with unit innovation
/// variance: diagonal (3 + 4p + 2p^2)/(1 - p^2), off-diagonal at lag h
/// p^(3h-2) (1 + p + p^2)^2 / (1 - p^2).
fn quarterly_ar1_gram(rho: f64, q: usize) -> DMatrix<f64> {
    let scale = 1.0 / (1.0 - rho * rho);
    let diag = (3.0 + 4.0 * rho + 2.0 * rho * rho) * scale;
    let cross = (1.0 + rho + rho * rho).powi(2) * scale;
    let mut omega = DMatrix::zeros(q, q);
    for i in 0..q {
        omega[(i, i)] = diag;
        for j in i + 1..q {
            let h = (j - i) as i32;
            let v = rho.powi(3 * h - 2) * cross;
            omega[(i, j)] = v;
            omega[(j, i)] = v;
        }
    }
    omega
}

/// Monthly AR(1) covariance with unit innovation variance.
fn monthly_ar1_cov(rho: f64, t: usize) -> DMatrix<f64> {
    let scale = 1.0 / (1.0 - rho * rho);
    DMatrix::from_fn(t, t, |i, j| rho.powi((i as i32 - j as i32).abs()) * scale)
}

struct GlsSolution {
    beta: DVector<f64>,
    sigma2: f64,
    log_likelihood: f64,
}

/// GLS at a fixed AR(1) parameter by whitening with the Cholesky factor of
/// the quarterly covariance; also returns the concentrated log-likelihood.
fn gls_at_rho(design: &DMatrix<f64>, y: &DVector<f64>, rho: f64) -> Result<GlsSolution> {
    let q = y.len();
    let omega = quarterly_ar1_gram(rho, q);
    let chol = omega
        .cholesky()
        .ok_or_else(|| Error::Domain(format!("residual covariance not positive definite at rho {rho}")))?;
    let log_det: f64 = (0..q).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
    let l = chol.unpack();
    let z = l
        .solve_lower_triangular(design)
        .ok_or_else(|| Error::Domain("singular whitening factor".to_string()))?;
    let w = l
        .solve_lower_triangular(y)
        .ok_or_else(|| Error::Domain("singular whitening factor".to_string()))?;
    let ztz = z.transpose() * &z;
    let beta = ztz
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("rank deficient design in GLS normal equations".to_string()))?
        .solve(&(z.transpose() * &w));
    let resid = &w - &z * &beta;
    let sigma2 = resid.dot(&resid) / q as f64;
    let n = q as f64;
    let log_likelihood = -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + 1.0)
        - 0.5 * n * sigma2.ln()
        - 0.5 * log_det;
    Ok(GlsSolution {
        beta,
        sigma2,
        log_likelihood,
    })
}

fn state_from_solution(sol: GlsSolution, rho: f64, boundary: bool) -> ChowLinState {
    let beta = sol.beta.as_slice();
    ChowLinState {
        intercept: beta[0],
        beta: beta[1..].to_vec(),
        rho,
        sigma2: sol.sigma2,
        log_likelihood: sol.log_likelihood,
        boundary_warning: boundary,
    }
}

fn make_fit(columns: Vec<String>, fingerprint: String, state: ChowLinState) -> FitResult {
    FitResult {
        version: FIT_FORMAT_VERSION,
        kind: RegressorKind::ChowLin,
        columns,
        seed: 0,
        fingerprint,
        hyperparams: Hyperparams::ChowLin,
        state: FitState::ChowLin(state),
    }
}

/// Quarterly design with an intercept column prepended.
fn quarterly_design(x: &Panel) -> DMatrix<f64> {
    let q = x.n_rows();
    let mut design = DMatrix::zeros(q, x.n_cols() + 1);
    for i in 0..q {
        design[(i, 0)] = 1.0;
    }
    for c in 0..x.n_cols() {
        for i in 0..q {
            design[(i, c + 1)] = x.column_at(c)[i];
        }
    }
    design
}

/// Design built by summing monthly regressors within quarters; the intercept
/// column sums to 3, keeping coefficients on the monthly scale.
fn summed_design(x: &Panel, q: usize) -> DMatrix<f64> {
    let mut design = DMatrix::zeros(q, x.n_cols() + 1);
    for i in 0..q {
        design[(i, 0)] = 3.0;
    }
    for c in 0..x.n_cols() {
        let col = x.column_at(c);
        for i in 0..q {
            design[(i, c + 1)] = col[3 * i] + col[3 * i + 1] + col[3 * i + 2];
        }
    }
    design
}

fn check_monthly_alignment(x: &Panel, y: &Series) -> Result<usize> {
    if x.index().freq() != Frequency::Monthly {
        return Err(Error::Alignment("monthly design panel required".to_string()));
    }
    if y.index().freq() != Frequency::Quarterly {
        return Err(Error::Alignment("quarterly target required".to_string()));
    }
    let q = y.len();
    if x.n_rows() != 3 * q {
        return Err(Error::Alignment(format!(
            "monthly panel covers {} months but target needs {}",
            x.n_rows(),
            3 * q
        )));
    }
    if !x.index().is_quarter_end(2) {
        return Err(Error::Alignment(
            "monthly panel must start on the first month of a quarter".to_string(),
        ));
    }
    if x.index().quarter_of(0)? != y.index().year_sub(0) {
        return Err(Error::Alignment(
            "monthly panel and quarterly target start in different quarters".to_string(),
        ));
    }
    Ok(q)
}

fn fit_design(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    columns: Vec<String>,
    fingerprint: String,
) -> Result<FitResult> {
    if design.ncols() >= design.nrows() {
        return Err(Error::InvalidArgument(format!(
            "{} regressors with intercept need more than {} quarters",
            design.ncols() - 1,
            design.nrows()
        )));
    }
    gls_at_rho(design, y, 0.0)?;
    let (rho, _) = golden_section_max(
        |r| match gls_at_rho(design, y, r) {
            Ok(sol) => sol.log_likelihood,
            Err(_) => f64::NEG_INFINITY,
        },
        -RHO_BOUND,
        RHO_BOUND,
        GRID_PROBES,
        RHO_TOL,
    );
    let boundary = rho.abs() > RHO_BOUND - BOUNDARY_MARGIN;
    if boundary {
        log::warn!("AR(1) estimate {rho:.4} at the search boundary");
    }
    let sol = gls_at_rho(design, y, rho)?;
    Ok(make_fit(columns, fingerprint, state_from_solution(sol, rho, boundary)))
}

/// Fits the regression on monthly regressors against quarterly targets by
/// summing the design within quarters and maximizing the concentrated
/// likelihood over the AR(1) parameter.
pub fn fit_chow_lin(x_monthly: &Panel, y_quarterly: &Series) -> Result<FitResult> {
    let q = check_monthly_alignment(x_monthly, y_quarterly)?;
    let design = summed_design(x_monthly, q);
    let y = DVector::from_column_slice(y_quarterly.values());
    let fingerprint =
        training_fingerprint(RegressorKind::ChowLin, x_monthly, y_quarterly, 0);
    fit_design(&design, &y, x_monthly.columns().to_vec(), fingerprint)
}

/// Fits the same model when regressors are already quarterly; the residual
/// still aggregates a monthly AR(1).
pub fn fit_chow_lin_quarterly(x: &Panel, y: &Series) -> Result<FitResult> {
    check_fit_alignment(x, y)?;
    if x.index().freq() != Frequency::Quarterly {
        return Err(Error::Alignment("quarterly design panel required".to_string()));
    }
    let design = quarterly_design(x);
    let yv = DVector::from_column_slice(y.values());
    let fingerprint = training_fingerprint(RegressorKind::ChowLin, x, y, 0);
    fit_design(&design, &yv, x.columns().to_vec(), fingerprint)
}

/// GLS fit at a caller-supplied AR(1) parameter on a quarterly design; no
/// likelihood search.
pub fn fit_chow_lin_at_rho(x: &Panel, y: &Series, rho: f64) -> Result<FitResult> {
    check_fit_alignment(x, y)?;
    if x.index().freq() != Frequency::Quarterly {
        return Err(Error::Alignment("quarterly design panel required".to_string()));
    }
    if rho.abs() >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "AR(1) parameter {rho} outside (-1, 1)"
        )));
    }
    let design = quarterly_design(x);
    let yv = DVector::from_column_slice(y.values());
    if design.ncols() >= design.nrows() {
        return Err(Error::InvalidArgument(format!(
            "{} regressors with intercept need more than {} quarters",
            design.ncols() - 1,
            design.nrows()
        )));
    }
    let sol = gls_at_rho(&design, &yv, rho)?;
    let fingerprint = training_fingerprint(RegressorKind::ChowLin, x, y, 0);
    Ok(make_fit(
        x.columns().to_vec(),
        fingerprint,
        state_from_solution(sol, rho, false),
    ))
}

/// Distributes quarterly observations across months: the monthly regression
/// signal plus the covariance-weighted spread of each quarterly residual.
///
/// Quarterly sums of the output equal the observed target to machine
/// rounding at any coefficient vector; at an AR(1) parameter of zero each
/// month receives a third of its quarter's residual.
pub fn chow_lin_distribute(
    fit: &FitResult,
    x_monthly: &Panel,
    y_quarterly: &Series,
) -> Result<Series> {
    let state = match &fit.state {
        FitState::ChowLin(state) => state,
        _ => {
            return Err(Error::InvalidArgument(
                "distribution requires a chow_lin fit".to_string(),
            ))
        }
    };
    let q = check_monthly_alignment(x_monthly, y_quarterly)?;
    let base = super::predict(fit, x_monthly)?;
    let residual: Vec<f64> = (0..q)
        .map(|i| {
            let s: f64 = base.values()[3 * i..3 * i + 3].iter().sum();
            y_quarterly.values()[i] - s
        })
        .collect();
    let omega = quarterly_ar1_gram(state.rho, q);
    let chol = omega
        .cholesky()
        .ok_or_else(|| Error::Domain("residual covariance not positive definite".to_string()))?;
    let smoothed = chol.solve(&DVector::from_column_slice(&residual));
    let cov = monthly_ar1_cov(state.rho, 3 * q);
    let mut expanded = DVector::zeros(3 * q);
    for i in 0..q {
        for m in 0..3 {
            expanded[3 * i + m] = smoothed[i];
        }
    }
    let correction = &cov * &expanded;
    let values: Vec<f64> = base
        .values()
        .iter()
        .zip(correction.iter())
        .map(|(b, c)| b + c)
        .collect();
    Series::new(*x_monthly.index(), values)
}
