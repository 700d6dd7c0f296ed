//! Stationarity transforms, quarterly aggregation, and train-only scaling.
//!
//! Column treatment is driven by a [`TransformSpec`]; the unit-root test is
//! advisory only, since the final classification mixes statistics with
//! judgment and lives in configuration.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::series::{Frequency, Panel, Series, TimeIndex};

/// Per-column stationarity treatment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// `log(x_m) - log(x_{m-1})`; requires strictly positive levels.
    LogDiff,
    /// `x_m - x_{m-1}`, e.g. for interest rates.
    Diff,
    /// Passed through unchanged; standardized with train-only moments.
    Level,
}

impl TransformKind {
    pub fn is_differenced(self) -> bool {
        matches!(self, TransformKind::LogDiff | TransformKind::Diff)
    }
}

/// Assignment of exactly one [`TransformKind`] to each column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSpec {
    kinds: BTreeMap<String, TransformKind>,
}

impl TransformSpec {
    pub fn new(entries: Vec<(String, TransformKind)>) -> Result<Self> {
        let mut kinds = BTreeMap::new();
        for (name, kind) in entries {
            if kinds.insert(name.clone(), kind).is_some() {
                return Err(Error::Schema(format!(
                    "column {name} assigned more than one transform kind"
                )));
            }
        }
        Ok(Self { kinds })
    }

    pub fn kind_of(&self, column: &str) -> Result<TransformKind> {
        // Lagged design columns inherit the kind of their source column.
        let base = column.split("_lag").next().unwrap_or(column);
        self.kinds
            .get(column)
            .or_else(|| self.kinds.get(base))
            .copied()
            .ok_or_else(|| Error::Schema(format!("no transform kind for column {column}")))
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, TransformKind)> {
        self.kinds.iter().map(|(n, k)| (n.as_str(), *k))
    }
}

/// Outcome of the augmented Dickey-Fuller regression.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdfResult {
    /// t-ratio on the lagged level.
    pub statistic: f64,
    /// Number of lagged differences included.
    pub lag_order: usize,
    /// Constant-case 5% critical value at the effective sample size.
    pub critical_value: f64,
    pub decision: AdfDecision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdfDecision {
    Stationary,
    UnitRoot,
}

/// Constant-case 5% critical value, response-surface style in the effective
/// sample size (large-sample limit about -2.86).
fn adf_critical_value_5pct(n_obs: usize) -> f64 {
    let t = n_obs as f64;
    -2.86154 - 2.8903 / t - 4.234 / (t * t) - 40.040 / (t * t * t)
}

/// Augmented Dickey-Fuller test with a constant, no trend, and a fixed lag
/// order.
///
/// Regresses `Δx_t` on `x_{t-1}`, `max_lag` lagged differences, and a
/// constant; the decision compares the t-ratio on `x_{t-1}` to the 5%
/// critical value.
pub fn adf_test(series: &Series, max_lag: usize) -> Result<AdfResult> {
    let x = series.values();
    let n = x.len();
    if n <= max_lag + 10 {
        return Err(Error::InvalidArgument(format!(
            "series length {n} too short for adf with max_lag {max_lag}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("missing value in adf input".to_string()));
    }
    if numeric::sample_sd(x) == 0.0 {
        return Err(Error::Domain("degenerate series".to_string()));
    }

    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let n_obs = n - max_lag - 1;
    let k = 2 + max_lag;
    let mut design = DMatrix::zeros(n_obs, k);
    let mut target = DVector::zeros(n_obs);
    for (row, s) in (max_lag + 1..n).enumerate() {
        target[row] = dx[s - 1];
        design[(row, 0)] = 1.0;
        design[(row, 1)] = x[s - 1];
        for i in 1..=max_lag {
            design[(row, 1 + i)] = dx[s - 1 - i];
        }
    }

    let xtx = design.transpose() * &design;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("collinear adf design".to_string()))?;
    let beta = chol.solve(&(design.transpose() * &target));
    let resid = &target - &design * &beta;
    let dof = n_obs - k;
    if dof == 0 {
        return Err(Error::InvalidArgument(
            "adf regression has zero degrees of freedom".to_string(),
        ));
    }
    let s2 = resid.norm_squared() / dof as f64;
    let xtx_inv = chol.inverse();
    let se = (s2 * xtx_inv[(1, 1)]).sqrt();
    let statistic = beta[1] / se;
    let critical_value = adf_critical_value_5pct(n_obs);
    Ok(AdfResult {
        statistic,
        lag_order: max_lag,
        critical_value,
        decision: if statistic < critical_value {
            AdfDecision::Stationary
        } else {
            AdfDecision::UnitRoot
        },
    })
}

/// Applies the per-column transform; the first row is dropped panel-wide as
/// soon as any column is differenced.
pub fn transform_panel(panel: &Panel, spec: &TransformSpec) -> Result<Panel> {
    let n = panel.n_rows();
    let any_diff = panel
        .columns()
        .iter()
        .map(|c| spec.kind_of(c))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .any(|k| k.is_differenced());
    if any_diff && n < 2 {
        return Err(Error::InvalidArgument(
            "differencing needs at least two rows".to_string(),
        ));
    }
    let out_len = if any_diff { n - 1 } else { n };
    let mut data = Vec::with_capacity(panel.n_cols());
    for (c, name) in panel.columns().iter().enumerate() {
        let src = panel.column_at(c);
        let col = match spec.kind_of(name)? {
            TransformKind::LogDiff => {
                for (i, &v) in src.iter().enumerate() {
                    if v <= 0.0 {
                        return Err(Error::Domain(format!(
                            "non-positive value {v} in log-diff column {name} at {}",
                            panel.index().label(i)
                        )));
                    }
                }
                src.windows(2).map(|w| w[1].ln() - w[0].ln()).collect()
            }
            TransformKind::Diff => src.windows(2).map(|w| w[1] - w[0]).collect(),
            TransformKind::Level => src[n - out_len..].to_vec(),
        };
        data.push(col);
    }
    Panel::new(
        panel.index().slice(n - out_len, out_len)?,
        panel.columns().to_vec(),
        data,
    )
}

/// Aggregates a monthly panel over complete calendar quarters: differenced
/// kinds are summed within the quarter, levels are averaged.
///
/// Months belonging to incomplete leading or trailing quarters are dropped
/// with a logged warning.
pub fn aggregate_quarterly(panel: &Panel, spec: &TransformSpec) -> Result<Panel> {
    if panel.index().freq() != Frequency::Monthly {
        return Err(Error::Alignment(
            "quarterly aggregation expects a monthly panel".to_string(),
        ));
    }
    let n = panel.n_rows();
    let lead = (3 - panel.index().start_ordinal().rem_euclid(3)) as usize % 3;
    let n_quarters = n.saturating_sub(lead) / 3;
    if n_quarters == 0 {
        return Err(Error::Alignment(
            "panel covers no complete calendar quarter".to_string(),
        ));
    }
    let trail = n - lead - 3 * n_quarters;
    if lead > 0 || trail > 0 {
        log::warn!(
            "aggregate_quarterly: dropping {lead} leading and {trail} trailing months of incomplete quarters"
        );
    }

    let mut data = Vec::with_capacity(panel.n_cols());
    for (c, name) in panel.columns().iter().enumerate() {
        let kind = spec.kind_of(name)?;
        let src = panel.column_at(c);
        let col = (0..n_quarters)
            .map(|q| {
                let chunk = &src[lead + 3 * q..lead + 3 * q + 3];
                let sum: f64 = chunk.iter().sum();
                if kind.is_differenced() {
                    sum
                } else {
                    sum / 3.0
                }
            })
            .collect();
        data.push(col);
    }
    let (year, quarter) = panel.index().quarter_of(lead)?;
    Panel::new(
        TimeIndex::quarterly(year, quarter, n_quarters)?,
        panel.columns().to_vec(),
        data,
    )
}

/// Train-only location/scale parameters for Level columns.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Standardizer {
    entries: Vec<StandardizerEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StandardizerEntry {
    column: String,
    mean: f64,
    sd: f64,
}

impl Standardizer {
    /// Columns this standardizer rescales.
    pub fn columns(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.column.as_str()).collect()
    }

    /// Applies the fitted moments to a panel containing the fitted columns.
    pub fn apply(&self, panel: &Panel) -> Result<Panel> {
        let mut data: Vec<Vec<f64>> = (0..panel.n_cols())
            .map(|c| panel.column_at(c).to_vec())
            .collect();
        for entry in &self.entries {
            let c = panel
                .columns()
                .iter()
                .position(|name| name == &entry.column)
                .ok_or_else(|| {
                    Error::Schema(format!("standardized column {} missing", entry.column))
                })?;
            for v in &mut data[c] {
                *v = (*v - entry.mean) / entry.sd;
            }
        }
        Panel::new(*panel.index(), panel.columns().to_vec(), data)
    }
}

/// Fits train-only moments for Level columns and applies them to both splits.
///
/// Differenced columns pass through unchanged; a constant Level column in the
/// training window is an error.
pub fn fit_apply_standardizer(
    train: &Panel,
    test: &Panel,
    spec: &TransformSpec,
) -> Result<(Panel, Panel, Standardizer)> {
    if train.n_rows() == 0 {
        return Err(Error::InvalidArgument("empty training panel".to_string()));
    }
    if train.columns() != test.columns() {
        return Err(Error::Schema(
            "train and test panels must share columns".to_string(),
        ));
    }
    let mut entries = Vec::new();
    for name in train.columns() {
        if spec.kind_of(name)? != TransformKind::Level {
            continue;
        }
        let col = train.column(name)?;
        let mean = numeric::mean(col);
        let sd = numeric::sample_sd(col);
        if sd == 0.0 {
            return Err(Error::Domain(format!("constant level column {name}")));
        }
        entries.push(StandardizerEntry {
            column: name.clone(),
            mean,
            sd,
        });
    }
    let standardizer = Standardizer { entries };
    Ok((
        standardizer.apply(train)?,
        standardizer.apply(test)?,
        standardizer,
    ))
}
