//! Comparison models: an all-spline GAM and an unbounded CART regression
//! tree.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gam::{ModelSpec, TermSpec};

pub const BASELINE_SPLINES: usize = 25;
pub const BASELINE_LAMBDA: f64 = 0.6;

/// Every feature a 25-function spline with `λ = 0.6`, unscaled.
pub fn baseline_gam_spec(n_features: usize) -> ModelSpec {
    ModelSpec::new(vec![TermSpec::spline(BASELINE_SPLINES, BASELINE_LAMBDA, false); n_features])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CartNode {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartTree {
    pub nodes: Vec<CartNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartParams {
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

impl CartTree {
    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, CartNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        let mut stack = vec![(0usize, 0usize)];
        let mut depth = 0;
        while let Some((i, d)) = stack.pop() {
            depth = depth.max(d);
            if let CartNode::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        depth
    }

    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                CartNode::Leaf { value, .. } => return value,
                CartNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row(feature) <= threshold { left } else { right },
            }
        }
    }
}

pub fn predict_cart(tree: &CartTree, features: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(features.nrows(), |r, _| tree.predict_row(|f| features[(r, f)]))
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Sum in a canonical order so the result does not depend on row order.
fn canonical_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

fn best_split(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    rows: &[usize],
    mean: f64,
    params: &CartParams,
) -> Option<Best> {
    let n = rows.len();
    let mut best: Option<Best> = None;
    let mut order = rows.to_vec();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(y[a].total_cmp(&y[b])));
        // with centered targets the gain of a split is S_L² (1/n_L + 1/n_R)
        let mut s_left = 0.0;
        for i in 0..n - 1 {
            s_left += y[order[i]] - mean;
            let lo = x[(order[i], f)];
            let hi = x[(order[i + 1], f)];
            let n_left = i + 1;
            if lo == hi || n_left < params.min_samples_leaf || n - n_left < params.min_samples_leaf {
                continue;
            }
            let gain = s_left * s_left * (1.0 / n_left as f64 + 1.0 / (n - n_left) as f64);
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mid = 0.5 * (lo + hi);
                best = Some(Best {
                    feature: f,
                    threshold: if mid < hi { mid } else { lo },
                    gain,
                });
            }
        }
    }
    best
}

/// Greedy variance-reduction tree grown until nodes are pure, too small to
/// split, or no split lowers the squared error. Among splits with equal
/// gain the first found wins, scanning features in index order and
/// thresholds in ascending order.
pub fn fit_cart(features: &DMatrix<f64>, target: &DVector<f64>, params: CartParams) -> Result<CartTree> {
    if features.nrows() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            found: target.len(),
        });
    }
    if target.is_empty() {
        return Err(Error::TooFewRows { rows: 0, required: 1 });
    }
    let mut nodes = vec![CartNode::Leaf {
        value: 0.0,
        n_samples: 0,
    }];
    let mut stack = vec![(0usize, (0..target.len()).collect::<Vec<usize>>())];
    while let Some((id, rows)) = stack.pop() {
        let mut ys: Vec<f64> = rows.iter().map(|&r| target[r]).collect();
        let mean = canonical_sum(&mut ys) / rows.len() as f64;
        let sse: f64 = ys.iter().map(|v| (v - mean).powi(2)).sum();
        let pure = ys.first() == ys.last();
        let split = if pure || rows.len() < params.min_samples_split {
            None
        } else {
            best_split(features, target, &rows, mean, &params).filter(|b| b.gain > 1e-12 * sse)
        };
        match split {
            None => {
                nodes[id] = CartNode::Leaf {
                    value: mean,
                    n_samples: rows.len(),
                }
            }
            Some(b) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| features[(i, b.feature)] <= b.threshold);
                let left = nodes.len();
                nodes.push(CartNode::Leaf { value: 0.0, n_samples: 0 });
                nodes.push(CartNode::Leaf { value: 0.0, n_samples: 0 });
                nodes[id] = CartNode::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left,
                    right: left + 1,
                };
                stack.push((left + 1, r));
                stack.push((left, l));
            }
        }
    }
    Ok(CartTree { nodes })
}
