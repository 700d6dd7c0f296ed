//! Alignment of a monthly signal with observed quarterly growth.
//!
//! Observed quarterly growth constrains the monthly path through a five-term
//! moving average: for a quarter ending in month `m`,
//! `z_q = (1/3) y_m + (2/3) y_{m-1} + y_{m-2} + (2/3) y_{m-3} + (1/3) y_{m-4}`.
//! Reconciliation picks the feasible path closest to the model signal in
//! Euclidean norm; a proportional within-quarter scaling is provided as an
//! alternative. Quarters whose window would cross the sample start are left
//! unconstrained.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;

/// MA(5) weight numerators over a common denominator of 3.
const WEIGHT_NUM: [f64; 5] = [1.0, 2.0, 3.0, 2.0, 1.0];

/// Weights applied at months `m-4 ..= m` for a quarter ending in month `m`.
pub fn ma5_weights() -> [f64; 5] {
    let mut w = [0.0; 5];
    for (out, num) in w.iter_mut().zip(WEIGHT_NUM) {
        *out = num / 3.0;
    }
    w
}

/// Linear constraint system tying a monthly path to quarterly growth targets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintSystem {
    n_months: usize,
    /// 1-based last months of the constrainable quarters (all >= 5).
    ends: Vec<usize>,
    /// Observed quarterly growth, one entry per constrainable quarter.
    z: Vec<f64>,
}

impl ConstraintSystem {
    pub fn n_months(&self) -> usize {
        self.n_months
    }

    pub fn n_rows(&self) -> usize {
        self.ends.len()
    }

    /// 1-based quarter-end months retained as constraint rows.
    pub fn quarter_ends(&self) -> &[usize] {
        &self.ends
    }

    pub fn targets(&self) -> &[f64] {
        &self.z
    }

    /// Attaches observed quarterly growth, one value per constraint row.
    #[must_use = "returns the system with targets attached"]
    pub fn with_targets(mut self, z: Vec<f64>) -> Result<Self> {
        if z.len() != self.ends.len() {
            return Err(Error::Alignment(format!(
                "{} targets for {} constraint rows",
                z.len(),
                self.ends.len()
            )));
        }
        self.z = z;
        Ok(self)
    }

    /// Dense constraint matrix (rows x months).
    pub fn matrix(&self) -> DMatrix<f64> {
        let w = ma5_weights();
        let mut m = DMatrix::zeros(self.ends.len(), self.n_months);
        for (row, &end) in self.ends.iter().enumerate() {
            for (offset, weight) in w.iter().enumerate() {
                m[(row, end - 5 + offset)] = *weight;
            }
        }
        m
    }

    /// Applies the MA(5) aggregator to a monthly path.
    pub fn aggregate(&self, y: &[f64]) -> Vec<f64> {
        let w = ma5_weights();
        self.ends
            .iter()
            .map(|&end| {
                w.iter()
                    .enumerate()
                    .map(|(offset, weight)| weight * y[end - 5 + offset])
                    .sum()
            })
            .collect()
    }
}

/// Builds the constraint skeleton for `n_months` months with quarters ending
/// at the given 1-based month indices; targets start at zero.
///
/// Quarter ends must be increasing and spaced exactly 3 apart; ends below
/// month 5 are dropped because their window would precede the sample.
pub fn build_constraint_matrix(n_months: usize, quarter_ends: &[usize]) -> Result<ConstraintSystem> {
    if n_months < 5 {
        return Err(Error::Infeasible("no constrainable quarter".to_string()));
    }
    for pair in quarter_ends.windows(2) {
        if pair[1] != pair[0] + 3 {
            return Err(Error::InvalidArgument(format!(
                "quarter ends must be spaced 3 months apart, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    for &end in quarter_ends {
        if end == 0 || end > n_months {
            return Err(Error::InvalidArgument(format!(
                "quarter end {end} outside 1..={n_months}"
            )));
        }
    }
    let ends: Vec<usize> = quarter_ends.iter().copied().filter(|&end| end >= 5).collect();
    if ends.is_empty() {
        return Err(Error::Infeasible("no constrainable quarter".to_string()));
    }
    let z = vec![0.0; ends.len()];
    Ok(ConstraintSystem { n_months, ends, z })
}

/// Minimum-norm feasible path: `ŷ = ỹ + Mᵀ(MMᵀ)⁻¹(z − Mỹ)`.
///
/// The Gram matrix is factorized (SPD Cholesky), never inverted explicitly.
pub fn reconcile_min_norm(tilde_y: &Series, system: &ConstraintSystem) -> Result<Series> {
    if tilde_y.len() != system.n_months {
        return Err(Error::Alignment(format!(
            "signal length {} != constraint months {}",
            tilde_y.len(),
            system.n_months
        )));
    }
    let m = system.matrix();
    let gram = &m * m.transpose();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Infeasible("degenerate constraints".to_string()))?;
    let my = DVector::from_vec(system.aggregate(tilde_y.values()));
    let residual = DVector::from_column_slice(&system.z) - my;
    let correction = m.transpose() * chol.solve(&residual);
    let values = tilde_y
        .values()
        .iter()
        .zip(correction.iter())
        .map(|(y, c)| y + c)
        .collect();
    Series::new(*tilde_y.index(), values)
}

/// Proportional within-quarter scaling: each consecutive 3-month block is
/// multiplied by `total_q / block_sum_q`.
pub fn denton_proportional(tilde_y: &Series, quarterly_totals: &Series) -> Result<Series> {
    let n = tilde_y.len();
    if n == 0 || !n.is_multiple_of(3) || quarterly_totals.len() != n / 3 {
        return Err(Error::Alignment(format!(
            "{n} months do not divide into {} quarterly totals",
            quarterly_totals.len()
        )));
    }
    let mut values = tilde_y.values().to_vec();
    for (q, total) in quarterly_totals.values().iter().enumerate() {
        let block = &mut values[3 * q..3 * q + 3];
        let sum: f64 = block.iter().sum();
        if sum == 0.0 {
            return Err(Error::Domain(format!(
                "proportional scaling undefined for quarter {} (zero within-quarter sum)",
                q + 1
            )));
        }
        let k = total / sum;
        for v in block {
            *v *= k;
        }
    }
    Series::new(*tilde_y.index(), values)
}

/// Per-quarter calibration ratios `k_q = z_q / (Mỹ)_q`; `None` marks quarters
/// where the signal aggregate is exactly zero.
pub fn adjustment_factors(tilde_y: &Series, system: &ConstraintSystem) -> Result<Vec<Option<f64>>> {
    if tilde_y.len() != system.n_months {
        return Err(Error::Alignment(format!(
            "signal length {} != constraint months {}",
            tilde_y.len(),
            system.n_months
        )));
    }
    let my = system.aggregate(tilde_y.values());
    Ok(system
        .z
        .iter()
        .zip(my)
        .map(|(z, denom)| if denom == 0.0 { None } else { Some(z / denom) })
        .collect())
}

/// Reconciliation quality report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconcileDiagnostics {
    /// `k_q` per constrained quarter; `None` when the pre-reconciliation
    /// aggregate is zero.
    pub factors: Vec<Option<f64>>,
    pub max_violation_before: f64,
    pub max_violation_after: f64,
    /// Euclidean size of the applied correction.
    pub adjustment_norm: f64,
}

/// Compares the raw and reconciled paths against the constraint targets.
pub fn diagnostics(
    tilde_y: &Series,
    hat_y: &Series,
    system: &ConstraintSystem,
) -> Result<ReconcileDiagnostics> {
    if hat_y.len() != tilde_y.len() {
        return Err(Error::Alignment(
            "raw and reconciled paths differ in length".to_string(),
        ));
    }
    let violation = |y: &Series| -> Result<f64> {
        Ok(system
            .aggregate(y.values())
            .iter()
            .zip(&system.z)
            .map(|(a, z)| (a - z).abs())
            .fold(0.0, f64::max))
    };
    let adjustment_norm = tilde_y
        .values()
        .iter()
        .zip(hat_y.values())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ReconcileDiagnostics {
        factors: adjustment_factors(tilde_y, system)?,
        max_violation_before: violation(tilde_y)?,
        max_violation_after: violation(hat_y)?,
        adjustment_norm,
    })
}

/// Accumulates a level path: `level_m = level_{m-1} * exp(growth_m)` starting
/// from `base_level`.
pub fn recover_levels(hat_y: &Series, base_level: f64) -> Result<Series> {
    if !(base_level > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "base level must be positive, got {base_level}"
        )));
    }
    let mut level = base_level;
    let mut values = Vec::with_capacity(hat_y.len());
    for (i, g) in hat_y.values().iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite growth at {}",
                hat_y.index().label(i)
            )));
        }
        level *= g.exp();
        values.push(level);
    }
    Series::new(*hat_y.index(), values)
}

/// Annualized growth: the MA(5)-weighted monthly rate scaled by 4 quarters
/// and 100 percentage points; the first four positions are NaN markers.
pub fn annualize(hat_y: &Series) -> Result<Series> {
    let g = hat_y.values();
    if g.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "annualization needs at least 5 observations, got {}",
            g.len()
        )));
    }
    let w = ma5_weights();
    let mut values = vec![f64::NAN; g.len()];
    for t in 4..g.len() {
        let ma: f64 = w
            .iter()
            .enumerate()
            .map(|(offset, weight)| weight * g[t - 4 + offset])
            .sum();
        values[t] = ma * 4.0 * 100.0;
    }
    Series::new(*hat_y.index(), values)
}
