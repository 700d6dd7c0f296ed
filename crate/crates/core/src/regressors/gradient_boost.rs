//! Gradient boosted regression trees for squared loss.
//!
//! - Stagewise second-order fitting: with unit hessians a leaf takes
//!   -G / (H + lambda) and a split scores half the gain in that quadratic.
//! - Rows are subsampled per tree from a seeded stream that draws the same
//!   prefix regardless of the total tree count, so shorter ensembles are
//!   exact prefixes of longer ones.
//! - The search grid crosses depth, learning rate, tree count, subsample
//!   share, leaf penalty, and minimum child weight; tree-count points are
//!   scored as checkpoints of one long run per fold.
//! - Ties prefer fewer trees, then the earlier grid cell.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{mean, seeded_rng};
use crate::series::{Panel, Series};

use super::{
    check_fit_alignment, contiguous_folds, training_fingerprint, FitResult, FitState, Hyperparams,
    RegressorKind, RegressorSpec, FIT_FORMAT_VERSION,
};

/// Minimum split gain; below this a node stays a leaf.
const MIN_GAIN: f64 = 1e-12;
const FOLD_SALT: u64 = 0x6B40_0000;
const FINAL_SALT: u64 = 0x6B4F_FFFF;

/// One grid cell of the hyperparameter search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtCombo {
    pub depth: usize,
    pub learning_rate: f64,
    pub trees: usize,
    pub subsample: f64,
    pub leaf_l2: f64,
    pub min_child_weight: f64,
}

/// Node of a fitted tree; leaf values already include the learning rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A fitted regression tree; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn value_for_row(&self, cols: &[&[f64]], row: usize) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if cols[*feature][row] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// Learned state: base score plus an additive tree ensemble.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradientBoostState {
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl GradientBoostState {
    pub(super) fn predict_rows(&self, x: &Panel) -> Vec<f64> {
        let cols: Vec<&[f64]> = (0..x.n_cols()).map(|c| x.column_at(c)).collect();
        (0..x.n_rows())
            .map(|i| {
                self.base_score
                    + self
                        .trees
                        .iter()
                        .map(|t| t.value_for_row(&cols, i))
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Grows one depth-limited tree on the negative gradient; returns the node
/// index, pushing the subtree into `nodes` with the root first.
fn grow(
    nodes: &mut Vec<TreeNode>,
    cols: &[&[f64]],
    grad: &[f64],
    rows: &[usize],
    depth_left: usize,
    combo: &GbtCombo,
) -> usize {
    let g: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h = rows.len() as f64;
    let leaf_value = -g / (h + combo.leaf_l2) * combo.learning_rate;
    if depth_left == 0 || h < 2.0 * combo.min_child_weight {
        nodes.push(TreeNode::Leaf { value: leaf_value });
        return nodes.len() - 1;
    }

    let parent_score = g * g / (h + combo.leaf_l2);
    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    let mut sorted = rows.to_vec();
    for feature in 0..cols.len() {
        let col = cols[feature];
        sorted.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).expect("finite features"));
        let mut gl = 0.0;
        let mut hl = 0.0;
        for (pos, &i) in sorted.iter().enumerate().take(sorted.len() - 1) {
            gl += grad[i];
            hl += 1.0;
            let next = sorted[pos + 1];
            if col[i] == col[next] {
                continue;
            }
            let hr = h - hl;
            if hl < combo.min_child_weight || hr < combo.min_child_weight {
                continue;
            }
            let gr = g - gl;
            let gain = 0.5
                * (gl * gl / (hl + combo.leaf_l2) + gr * gr / (hr + combo.leaf_l2)
                    - parent_score);
            if gain > MIN_GAIN && best.is_none_or(|(bg, _, _)| gain > bg) {
                best = Some((gain, feature, 0.5 * (col[i] + col[next])));
            }
        }
    }

    match best {
        None => {
            nodes.push(TreeNode::Leaf { value: leaf_value });
            nodes.len() - 1
        }
        Some((_, feature, threshold)) => {
            let me = nodes.len();
            nodes.push(TreeNode::Leaf { value: 0.0 });
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .copied()
                .partition(|&i| cols[feature][i] <= threshold);
            let left = grow(nodes, cols, grad, &left_rows, depth_left - 1, combo);
            let right = grow(nodes, cols, grad, &right_rows, depth_left - 1, combo);
            nodes[me] = TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            };
            me
        }
    }
}

/// Partial Fisher-Yates draw of `m` distinct rows; consumes a fixed number
/// of RNG values per call.
fn subsample_rows(n: usize, share: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = ((share * n as f64).floor() as usize).clamp(1, n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool.sort_unstable();
    pool
}

/// Boosts up to `combo.trees` trees over rows `[0, n)`; when `watch` rows
/// are given, records their squared error at each checkpoint count.
fn boost(
    cols: &[&[f64]],
    y: &[f64],
    train_rows: &[usize],
    combo: &GbtCombo,
    rng: &mut ChaCha8Rng,
    watch: Option<(&[usize], &[usize], &mut Vec<f64>)>,
) -> (f64, Vec<Tree>) {
    let base = mean(&train_rows.iter().map(|&i| y[i]).collect::<Vec<f64>>());
    let n = y.len();
    let mut preds = vec![base; n];
    let mut trees: Vec<Tree> = Vec::with_capacity(combo.trees);
    let (watch_rows, checkpoints, watch_sse) = match watch {
        Some((rows, cps, out)) => (rows, cps, Some(out)),
        None => (&[][..], &[][..], None),
    };
    let mut watch_sse = watch_sse;
    let mut grad = vec![0.0; n];
    let mut next_checkpoint = 0;
    let record = |preds: &[f64], out: &mut Vec<f64>| {
        out.push(watch_rows.iter().map(|&i| (y[i] - preds[i]).powi(2)).sum());
    };
    for t in 0..combo.trees {
        for &i in train_rows {
            grad[i] = preds[i] - y[i];
        }
        let exhausted = train_rows.iter().all(|&i| grad[i] == 0.0);
        if exhausted {
            break;
        }
        let sample = if combo.subsample < 1.0 {
            let picked = subsample_rows(train_rows.len(), combo.subsample, rng);
            picked.into_iter().map(|p| train_rows[p]).collect()
        } else {
            train_rows.to_vec()
        };
        let mut nodes = Vec::new();
        grow(&mut nodes, cols, &grad, &sample, combo.depth, combo);
        let tree = Tree { nodes };
        for &i in train_rows {
            preds[i] += tree.value_for_row(cols, i);
        }
        for &i in watch_rows {
            preds[i] += tree.value_for_row(cols, i);
        }
        trees.push(tree);
        if let Some(out) = watch_sse.as_deref_mut() {
            while next_checkpoint < checkpoints.len() && checkpoints[next_checkpoint] == t + 1 {
                record(&preds, out);
                next_checkpoint += 1;
            }
        }
    }
    if let Some(out) = watch_sse {
        while next_checkpoint < checkpoints.len() {
            record(&preds, out);
            next_checkpoint += 1;
        }
    }
    (base, trees)
}

fn validate_combo(combo: &GbtCombo) -> Result<()> {
    if combo.depth == 0
        || combo.trees == 0
        || combo.learning_rate <= 0.0
        || !(combo.subsample > 0.0 && combo.subsample <= 1.0)
        || combo.leaf_l2 < 0.0
        || combo.min_child_weight < 1.0
    {
        return Err(Error::InvalidArgument(format!(
            "invalid boosting cell {combo:?}"
        )));
    }
    Ok(())
}

fn panel_columns(x: &Panel) -> Vec<&[f64]> {
    (0..x.n_cols()).map(|c| x.column_at(c)).collect()
}

fn make_fit(
    x: &Panel,
    seed: u64,
    combo: GbtCombo,
    base_score: f64,
    trees: Vec<Tree>,
    fingerprint: String,
) -> FitResult {
    FitResult {
        version: FIT_FORMAT_VERSION,
        kind: RegressorKind::GradientBoost,
        columns: x.columns().to_vec(),
        seed,
        fingerprint,
        hyperparams: Hyperparams::GradientBoost(combo),
        state: FitState::GradientBoost(GradientBoostState { base_score, trees }),
    }
}

/// Trains at one fixed grid cell; the result matches the final model of a
/// search that selected the same cell under the same seed.
pub fn fit_gradient_boost_fixed(
    x: &Panel,
    y: &Series,
    combo: &GbtCombo,
    seed: u64,
) -> Result<FitResult> {
    check_fit_alignment(x, y)?;
    validate_combo(combo)?;
    let cols = panel_columns(x);
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let mut rng = seeded_rng(seed, FINAL_SALT);
    let (base, trees) = boost(&cols, y.values(), &rows, combo, &mut rng, None);
    let fingerprint = training_fingerprint(RegressorKind::GradientBoost, x, y, seed);
    Ok(make_fit(x, seed, combo.clone(), base, trees, fingerprint))
}

/// Grid search over the boosting cells by K-fold cross-validation; each
/// fold trains once per cell group and scores tree counts as checkpoints.
pub fn fit_gradient_boost(
    x: &Panel,
    y: &Series,
    folds: usize,
    spec: &RegressorSpec,
) -> Result<FitResult> {
    let config = &spec.gradient_boost;
    check_fit_alignment(x, y)?;
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    if x.n_rows() < folds {
        return Err(Error::InvalidArgument(format!(
            "fewer rows ({}) than cross-validation folds ({folds})",
            x.n_rows()
        )));
    }
    if config.depths.is_empty()
        || config.learning_rates.is_empty()
        || config.tree_counts.is_empty()
        || config.subsamples.is_empty()
        || config.leaf_l2.is_empty()
        || config.min_child_weights.is_empty()
    {
        return Err(Error::InvalidArgument(
            "empty gradient boosting search grid".to_string(),
        ));
    }

    // canonical grid rank for tie-breaking, tree count as the third axis
    let rank_of = |combo: &GbtCombo| -> usize {
        let pos = |vals: &[f64], v: f64| vals.iter().position(|&w| w == v).unwrap();
        let di = config.depths.iter().position(|&d| d == combo.depth).unwrap();
        let li = pos(&config.learning_rates, combo.learning_rate);
        let ti = config
            .tree_counts
            .iter()
            .position(|&t| t == combo.trees)
            .unwrap();
        let si = pos(&config.subsamples, combo.subsample);
        let pi = pos(&config.leaf_l2, combo.leaf_l2);
        let mi = pos(&config.min_child_weights, combo.min_child_weight);
        ((((di * config.learning_rates.len() + li) * config.tree_counts.len() + ti)
            * config.subsamples.len()
            + si)
            * config.leaf_l2.len()
            + pi)
            * config.min_child_weights.len()
            + mi
    };

    let mut checkpoints: Vec<usize> = config.tree_counts.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let max_trees = *checkpoints.last().expect("non-empty tree counts");

    let n = x.n_rows();
    let cols = panel_columns(x);
    let yv = y.values();
    let fold_bounds = contiguous_folds(n, folds);

    struct Candidate {
        mse: f64,
        combo: GbtCombo,
        rank: usize,
    }
    let mut best: Option<Candidate> = None;
    let mut group_index = 0u64;
    for &depth in &config.depths {
        for &learning_rate in &config.learning_rates {
            for &subsample in &config.subsamples {
                for &leaf_l2 in &config.leaf_l2 {
                    for &min_child_weight in &config.min_child_weights {
                        let long = GbtCombo {
                            depth,
                            learning_rate,
                            trees: max_trees,
                            subsample,
                            leaf_l2,
                            min_child_weight,
                        };
                        validate_combo(&long)?;
                        let mut sse = vec![0.0; checkpoints.len()];
                        for (f, &(lo, hi)) in fold_bounds.iter().enumerate() {
                            let train: Vec<usize> =
                                (0..n).filter(|i| *i < lo || *i >= hi).collect();
                            let val: Vec<usize> = (lo..hi).collect();
                            let mut fold_sse = Vec::with_capacity(checkpoints.len());
                            let mut rng = seeded_rng(
                                spec.seed,
                                FOLD_SALT + group_index * 64 + f as u64,
                            );
                            boost(
                                &cols,
                                yv,
                                &train,
                                &long,
                                &mut rng,
                                Some((&val, &checkpoints, &mut fold_sse)),
                            );
                            for (ci, v) in fold_sse.iter().enumerate() {
                                sse[ci] += v;
                            }
                        }
                        for (ci, &trees) in checkpoints.iter().enumerate() {
                            let combo = GbtCombo {
                                trees,
                                ..long.clone()
                            };
                            let cand = Candidate {
                                mse: sse[ci] / n as f64,
                                rank: rank_of(&combo),
                                combo,
                            };
                            let take = match &best {
                                None => true,
                                Some(b) => {
                                    cand.mse < b.mse
                                        || (cand.mse == b.mse
                                            && (cand.combo.trees < b.combo.trees
                                                || (cand.combo.trees == b.combo.trees
                                                    && cand.rank < b.rank)))
                                }
                            };
                            if take {
                                best = Some(cand);
                            }
                        }
                        group_index += 1;
                    }
                }
            }
        }
    }
    let chosen = best.expect("non-empty grid").combo;
    fit_gradient_boost_fixed(x, y, &chosen, spec.seed)
}

#[cfg(test)]
mod tests {
    use super::super::GradientBoostConfig;
    use super::*;
    use crate::numeric::seeded_rng;
    use crate::series::TimeIndex;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn panel_from(cols: Vec<Vec<f64>>) -> Panel {
        let n = cols[0].len();
        Panel::new(
            TimeIndex::quarterly(2000, 1, n).unwrap(),
            (0..cols.len()).map(|c| format!("x{c}")).collect(),
            cols,
        )
        .unwrap()
    }

    fn random_panel(seed: u64, n: usize, k: usize) -> Panel {
        let mut rng = seeded_rng(seed, 30);
        panel_from(
            (0..k)
                .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect(),
        )
    }

    fn combo(depth: usize, lr: f64, trees: usize) -> GbtCombo {
        GbtCombo {
            depth,
            learning_rate: lr,
            trees,
            subsample: 1.0,
            leaf_l2: 0.0,
            min_child_weight: 1.0,
        }
    }

    fn state_of(fit: &FitResult) -> &GradientBoostState {
        match &fit.state {
            FitState::GradientBoost(s) => s,
            _ => unreachable!(),
        }
    }

    fn training_mse(fit: &FitResult, x: &Panel, y: &Series) -> f64 {
        let pred = super::super::predict(fit, x).unwrap();
        pred.values()
            .iter()
            .zip(y.values())
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            / y.len() as f64
    }

    #[test]
    fn constant_target_fits_base_score_only() {
        let x = random_panel(1, 16, 2);
        let y = Series::new(*x.index(), vec![4.25; 16]).unwrap();
        let fit = fit_gradient_boost_fixed(&x, &y, &combo(3, 0.1, 50), 7).unwrap();
        let state = state_of(&fit);
        assert!(state.trees.is_empty());
        assert_eq!(state.base_score, 4.25);
        let pred = super::super::predict(&fit, &x).unwrap();
        for v in pred.values() {
            assert_eq!(*v, 4.25);
        }
    }

    #[test]
    fn single_stump_reproduces_a_step_function_exactly() {
        let x = panel_from(vec![vec![-2.0, -1.0, 1.0, 2.0]]);
        let y = Series::new(*x.index(), vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let fit = fit_gradient_boost_fixed(&x, &y, &combo(1, 1.0, 1), 0).unwrap();
        let pred = super::super::predict(&fit, &x).unwrap();
        assert_eq!(pred.values(), &[0.0, 0.0, 1.0, 1.0]);
        let state = state_of(&fit);
        assert_eq!(state.trees.len(), 1);
        match &state.trees[0].nodes[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, 0.0),
            other => panic!("expected a split at the root, got {other:?}"),
        }
    }

    #[test]
    fn deep_greedy_ensemble_memorizes_training_data() {
        let x = random_panel(2, 30, 2);
        let mut rng = seeded_rng(2, 31);
        let y = Series::new(
            *x.index(),
            (0..30).map(|_| StandardNormal.sample(&mut rng)).collect(),
        )
        .unwrap();
        let fit = fit_gradient_boost_fixed(&x, &y, &combo(6, 1.0, 100), 3).unwrap();
        assert!(training_mse(&fit, &x, &y) < 1e-8);
    }

    #[test]
    fn lower_learning_rate_never_fits_training_data_better() {
        for seed in 0..5 {
            let x = random_panel(40 + seed, 50, 3);
            let mut rng = seeded_rng(50 + seed, 32);
            let y = Series::new(
                *x.index(),
                (0..50)
                    .map(|i| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x.column_at(0)[i].sin() + 0.3 * e
                    })
                    .collect(),
            )
            .unwrap();
            let slow = fit_gradient_boost_fixed(&x, &y, &combo(2, 0.1, 20), 1).unwrap();
            let fast = fit_gradient_boost_fixed(&x, &y, &combo(2, 1.0, 20), 1).unwrap();
            assert!(
                training_mse(&slow, &x, &y) >= training_mse(&fast, &x, &y),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn shorter_ensembles_are_prefixes_of_longer_runs() {
        let x = random_panel(5, 40, 2);
        let mut rng = seeded_rng(5, 33);
        let y = Series::new(
            *x.index(),
            (0..40)
                .map(|i| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    0.5 * x.column_at(1)[i] + 0.2 * e
                })
                .collect(),
        )
        .unwrap();
        let mut sub = combo(3, 0.3, 12);
        sub.subsample = 0.7;
        let mut long = sub.clone();
        long.trees = 30;
        let short_fit = fit_gradient_boost_fixed(&x, &y, &sub, 11).unwrap();
        let long_fit = fit_gradient_boost_fixed(&x, &y, &long, 11).unwrap();
        let short_trees = &state_of(&short_fit).trees;
        let long_trees = &state_of(&long_fit).trees;
        assert_eq!(short_trees.len(), 12);
        assert_eq!(&long_trees[..12], short_trees.as_slice());
    }

    #[test]
    fn subsampling_is_seed_deterministic() {
        let x = random_panel(6, 30, 2);
        let mut rng = seeded_rng(6, 34);
        let y = Series::new(
            *x.index(),
            (0..30).map(|_| StandardNormal.sample(&mut rng)).collect(),
        )
        .unwrap();
        let mut c = combo(3, 0.2, 15);
        c.subsample = 0.7;
        let a = fit_gradient_boost_fixed(&x, &y, &c, 9).unwrap().to_json();
        let b = fit_gradient_boost_fixed(&x, &y, &c, 9).unwrap().to_json();
        assert_eq!(a, b);
        let other = fit_gradient_boost_fixed(&x, &y, &c, 10).unwrap().to_json();
        assert_ne!(a, other);
    }

    #[test]
    fn checkpointed_search_matches_separate_training_runs() {
        let x = random_panel(7, 36, 2);
        let mut rng = seeded_rng(7, 35);
        let y = Series::new(
            *x.index(),
            (0..36)
                .map(|i| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    (x.column_at(0)[i] > 0.0) as i64 as f64 + 0.2 * e
                })
                .collect(),
        )
        .unwrap();
        let mut spec = RegressorSpec::new(RegressorKind::GradientBoost, 17);
        spec.gradient_boost = GradientBoostConfig {
            folds: 3,
            depths: vec![2],
            learning_rates: vec![0.3],
            tree_counts: vec![5, 15],
            subsamples: vec![1.0],
            leaf_l2: vec![0.0],
            min_child_weights: vec![1.0],
        };
        let fit = fit_gradient_boost(&x, &y, 3, &spec).unwrap();
        let chosen = match &fit.hyperparams {
            Hyperparams::GradientBoost(c) => c.clone(),
            _ => unreachable!(),
        };
        assert!(chosen.trees == 5 || chosen.trees == 15);

        // oracle: score both tree counts with standalone per-fold runs
        let folds = contiguous_folds(36, 3);
        let cols: Vec<&[f64]> = (0..2).map(|c| x.column_at(c)).collect();
        let mut best = (f64::INFINITY, 0usize);
        for (ti, &trees) in [5usize, 15].iter().enumerate() {
            let mut sse = 0.0;
            for (f, &(lo, hi)) in folds.iter().enumerate() {
                let train: Vec<usize> = (0..36).filter(|i| *i < lo || *i >= hi).collect();
                let mut rng = seeded_rng(17, FOLD_SALT + f as u64);
                let c = GbtCombo {
                    trees,
                    ..combo(2, 0.3, trees)
                };
                let (base, grown) = boost(&cols, y.values(), &train, &c, &mut rng, None);
                for i in lo..hi {
                    let pred = base
                        + grown
                            .iter()
                            .map(|t| t.value_for_row(&cols, i))
                            .sum::<f64>();
                    sse += (y.values()[i] - pred).powi(2);
                }
            }
            let mse = sse / 36.0;
            if mse < best.0 {
                best = (mse, ti);
            }
        }
        let expected_trees = [5usize, 15][best.1];
        assert_eq!(chosen.trees, expected_trees);
    }

    #[test]
    fn split_gain_agrees_with_direct_sse_reduction() {
        // with lr 1, l2 0 a stump's fit equals per-leaf means, so the gain
        // ordering must match the direct SSE reduction of each threshold
        let xcol = vec![-3.0, -1.5, -0.5, 0.5, 1.5, 3.0];
        let y = [0.1, 0.0, 0.2, 0.9, 1.1, 1.0];
        let base = mean(&y);
        let grad: Vec<f64> = y.iter().map(|v| base - v).collect();
        let cols: Vec<&[f64]> = vec![&xcol];
        let rows: Vec<usize> = (0..6).collect();
        let mut nodes = Vec::new();
        grow(&mut nodes, &cols, &grad, &rows, 1, &combo(1, 1.0, 1));
        let picked = match nodes[0] {
            TreeNode::Split { threshold, .. } => threshold,
            _ => panic!("expected split"),
        };

        let mut best = (f64::INFINITY, f64::NAN);
        for cut in [-2.25, -1.0, 0.0, 1.0, 2.25] {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for i in 0..6 {
                if xcol[i] <= cut {
                    left.push(y[i]);
                } else {
                    right.push(y[i]);
                }
            }
            let sse: f64 = left.iter().map(|v| (v - mean(&left)).powi(2)).sum::<f64>()
                + right.iter().map(|v| (v - mean(&right)).powi(2)).sum::<f64>();
            if sse < best.0 {
                best = (sse, cut);
            }
        }
        assert_abs_diff_eq!(picked, best.1, epsilon = 1e-12);
    }

    #[test]
    fn too_few_rows_for_folds_is_rejected() {
        let x = random_panel(8, 4, 1);
        let y = Series::new(*x.index(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let spec = RegressorSpec::new(RegressorKind::GradientBoost, 1);
        match fit_gradient_boost(&x, &y, 5, &spec) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("fewer rows"), "{msg}"),
            other => panic!("expected invalid argument, got {other:?}"),
        }
    }

    #[test]
    fn min_child_weight_blocks_tiny_leaves() {
        let x = panel_from(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]]);
        let y = Series::new(*x.index(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 5.0]).unwrap();
        let mut c = combo(1, 1.0, 1);
        c.min_child_weight = 2.0;
        let fit = fit_gradient_boost_fixed(&x, &y, &c, 0).unwrap();
        let state = state_of(&fit);
        if let TreeNode::Split { threshold, .. } = &state.trees[0].nodes[0] {
            // isolating the outlier row alone is forbidden
            assert!(*threshold <= 4.5, "threshold {threshold}");
        }
    }
}
