//! Shapley feature attributions for any fitted model.
//!
//! - Interventional value function: a coalition takes its features from the
//!   explained row and the rest from a background row, averaged over the
//!   background.
//! - Exact mode enumerates every coalition (at most 15 features); sampled
//!   mode averages marginal contributions over seeded random permutations.
//! - The background is thinned deterministically to at most 100 rows.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::numeric::{mean, seeded_rng};
use crate::regressors::{self, FitResult};
use crate::series::{Panel, TimeIndex};

/// Upper bound on background rows entering the value function.
pub const BACKGROUND_CAP: usize = 100;
/// Exact enumeration bound: 2^k coalitions.
pub const MAX_EXACT_FEATURES: usize = 15;
const PERMUTATION_SALT: u64 = 0x5AB0_0000;

/// How coalition values are aggregated into attributions.
#[derive(Clone, Copy, Debug)]
pub enum ShapleyMode {
    /// Enumerates all coalitions; requires at most 15 features.
    Exact,
    /// Averages marginal contributions over this many random permutations.
    Sampled { permutations: usize },
}

/// Per-observation, per-feature attributions around a common base value.
#[derive(Clone, Debug)]
pub struct Attribution {
    pub columns: Vec<String>,
    /// Label of each explained observation.
    pub labels: Vec<String>,
    /// Mean background prediction; attributions are deviations from it.
    pub base: f64,
    /// values[i][j] is the contribution of feature j to observation i.
    pub values: Vec<Vec<f64>>,
    /// Model prediction for each explained observation.
    pub predictions: Vec<f64>,
}

impl Attribution {
    /// Features ranked by mean absolute attribution, descending; ties break
    /// by column name.
    pub fn mean_abs_ranking(&self) -> Vec<(String, f64)> {
        let n = self.values.len().max(1) as f64;
        let mut ranked: Vec<(String, f64)> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let total: f64 = self.values.iter().map(|row| row[j].abs()).sum();
                (name.clone(), total / n)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        ranked
    }
}

/// Evenly spaced row picks: all rows when `n <= cap`, else `cap` strictly
/// increasing indices starting at row 0.
pub fn background_rows(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        (0..n).collect()
    } else {
        (0..cap).map(|t| t * n / cap).collect()
    }
}

/// Shapley attributions of `fit` for every row of `x` against a background
/// sample.
///
/// Exact mode reproduces each prediction as base plus the attribution sum;
/// sampled mode converges to the same values as permutations grow and is
/// deterministic for a fixed seed.
pub fn shapley_attributions(
    fit: &FitResult,
    x: &Panel,
    background: &Panel,
    mode: ShapleyMode,
    seed: u64,
) -> Result<Attribution> {
    if fit.columns != x.columns() || fit.columns != background.columns() {
        return Err(Error::Schema(format!(
            "attribution inputs must match the fit columns {:?}",
            fit.columns
        )));
    }
    let k = x.n_cols();
    if k == 0 {
        return Err(Error::InvalidArgument(
            "attribution needs at least one feature".to_string(),
        ));
    }
    if x.n_rows() == 0 {
        return Err(Error::InvalidArgument(
            "no observations to explain".to_string(),
        ));
    }
    if background.n_rows() == 0 {
        return Err(Error::InvalidArgument(
            "background panel is empty".to_string(),
        ));
    }
    match mode {
        ShapleyMode::Exact => {
            if k > MAX_EXACT_FEATURES {
                return Err(Error::Unsupported(format!(
                    "exact attribution enumerates 2^k coalitions and supports at most \
                     {MAX_EXACT_FEATURES} features, got {k}; use sampled mode"
                )));
            }
        }
        ShapleyMode::Sampled { permutations } => {
            if permutations == 0 {
                return Err(Error::InvalidArgument(
                    "sampled attribution needs at least one permutation".to_string(),
                ));
            }
            if k > 63 {
                return Err(Error::Unsupported(format!(
                    "sampled attribution masks features in a 64-bit word, got {k} features"
                )));
            }
        }
    }

    let picks = background_rows(background.n_rows(), BACKGROUND_CAP);
    let bg_cols: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let col = background.column_at(c);
            picks.iter().map(|&r| col[r]).collect()
        })
        .collect();
    let ctx = ValueContext {
        fit,
        columns: x.columns().to_vec(),
        index: TimeIndex::quarterly(2000, 1, picks.len())?,
        bg_cols,
    };
    let base = ctx.coalition_value(&vec![0.0; k], 0)?;
    let predictions = regressors::predict(fit, x)?.values().to_vec();

    let mut values = Vec::with_capacity(x.n_rows());
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let phi = match mode {
            ShapleyMode::Exact => exact_row(&ctx, &row)?,
            ShapleyMode::Sampled { permutations } => {
                sampled_row(&ctx, &row, base, permutations, seed, i)?
            }
        };
        values.push(phi);
    }
    let labels = (0..x.n_rows()).map(|i| x.index().label(i)).collect();
    Ok(Attribution {
        columns: x.columns().to_vec(),
        labels,
        base,
        values,
        predictions,
    })
}

struct ValueContext<'a> {
    fit: &'a FitResult,
    columns: Vec<String>,
    index: TimeIndex,
    bg_cols: Vec<Vec<f64>>,
}

impl ValueContext<'_> {
    /// Mean prediction over background rows with masked features pinned to
    /// the explained row's values.
    fn coalition_value(&self, row: &[f64], mask: u64) -> Result<f64> {
        let b = self.bg_cols[0].len();
        let cols: Vec<Vec<f64>> = self
            .bg_cols
            .iter()
            .enumerate()
            .map(|(j, bg)| {
                if mask & (1 << j) != 0 {
                    vec![row[j]; b]
                } else {
                    bg.clone()
                }
            })
            .collect();
        let panel = Panel::new(self.index, self.columns.clone(), cols)?;
        Ok(mean(regressors::predict(self.fit, &panel)?.values()))
    }
}

/// Exact Shapley values by full coalition enumeration.
fn exact_row(ctx: &ValueContext, row: &[f64]) -> Result<Vec<f64>> {
    let k = row.len();
    let full = 1usize << k;
    let mut v = Vec::with_capacity(full);
    for mask in 0..full {
        v.push(ctx.coalition_value(row, mask as u64)?);
    }
    // weight of a coalition of size s when adding one feature to it
    let mut fact = vec![1.0; k + 1];
    for i in 1..=k {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weights: Vec<f64> = (0..k).map(|s| fact[s] * fact[k - 1 - s] / fact[k]).collect();
    let mut phi = vec![0.0; k];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        for mask in 0..full {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                *p += weights[s] * (v[mask | bit] - v[mask]);
            }
        }
    }
    Ok(phi)
}

/// Permutation-sampled Shapley values with a coalition-value cache.
fn sampled_row(
    ctx: &ValueContext,
    row: &[f64],
    base: f64,
    permutations: usize,
    seed: u64,
    obs: usize,
) -> Result<Vec<f64>> {
    let k = row.len();
    let mut rng = seeded_rng(seed, PERMUTATION_SALT + obs as u64);
    let mut cache: HashMap<u64, f64> = HashMap::new();
    cache.insert(0, base);
    let mut phi = vec![0.0; k];
    let mut order: Vec<usize> = (0..k).collect();
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let mut mask = 0u64;
        let mut prev = base;
        for &j in &order {
            mask |= 1 << j;
            let value = match cache.get(&mask) {
                Some(v) => *v,
                None => {
                    let v = ctx.coalition_value(row, mask)?;
                    cache.insert(mask, v);
                    v
                }
            };
            phi[j] += value - prev;
            prev = value;
        }
    }
    for p in &mut phi {
        *p /= permutations as f64;
    }
    Ok(phi)
}
