//! Single regression tree with axis-aligned splits chosen by exact greedy
//! search over every (feature, midpoint) candidate.

use serde::{Deserialize, Serialize};

use super::GbtHyperParams;
use crate::scalar::{stable_sum, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode<F> {
    Leaf {
        value: F,
    },
    Split {
        feature: usize,
        threshold: F,
        left: Box<TreeNode<F>>,
        right: Box<TreeNode<F>>,
    },
}

impl<F: Real> TreeNode<F> {
    pub fn evaluate(&self, x: &[F]) -> F {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Mean of the residuals, accumulated in sorted order so the result depends
/// only on the multiset of values.
fn leaf_value<F: Real>(rows: &[usize], residuals: &[F]) -> F {
    let mut vals: Vec<F> = rows.iter().map(|&i| residuals[i]).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
    stable_sum(vals.iter().copied()) / F::of(vals.len() as f64)
}

struct BestSplit<F> {
    gain: F,
    feature: usize,
    threshold: F,
    /// Node rows sorted by (feature value, residual); the first `left_count`
    /// go left.
    sorted_rows: Vec<usize>,
    left_count: usize,
}

/// Exact greedy search: for each feature, sort the node rows canonically,
/// sweep prefix sums, and score each midpoint between distinct neighboring
/// values by variance reduction. Ties keep the first candidate found, which
/// is the lowest feature index and then the lowest threshold.
fn best_split<F: Real>(
    rows: &[usize],
    features: &[Vec<F>],
    residuals: &[F],
    min_leaf: usize,
) -> Option<BestSplit<F>> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: F = {
        let mut vals: Vec<F> = rows.iter().map(|&i| residuals[i]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
        stable_sum(vals.iter().copied())
    };
    let n_features = features[rows[0]].len();

    let mut best: Option<BestSplit<F>> = None;
    let mut scratch: Vec<usize> = Vec::with_capacity(n);
    for f in 0..n_features {
        scratch.clear();
        scratch.extend_from_slice(rows);
        scratch.sort_by(|&a, &b| {
            (features[a][f], residuals[a])
                .partial_cmp(&(features[b][f], residuals[b]))
                .expect("finite values")
        });

        let mut left_sum = F::zero();
        for i in 1..n {
            left_sum = left_sum + residuals[scratch[i - 1]];
            if i < min_leaf || n - i < min_leaf {
                continue;
            }
            let prev = features[scratch[i - 1]][f];
            let cur = features[scratch[i]][f];
            if !(cur > prev) {
                continue;
            }
            let right_sum = total - left_sum;
            let nl = F::of(i as f64);
            let nr = F::of((n - i) as f64);
            let gain =
                left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / F::of(n as f64);
            let improves = match &best {
                None => gain > F::zero(),
                Some(b) => gain > b.gain,
            };
            if improves {
                best = Some(BestSplit {
                    gain,
                    feature: f,
                    threshold: (prev + cur) / F::of(2.0),
                    sorted_rows: scratch.clone(),
                    left_count: i,
                });
            }
        }
    }
    best
}

fn grow<F: Real>(
    rows: &[usize],
    features: &[Vec<F>],
    residuals: &[F],
    depth: usize,
    hyper: &GbtHyperParams,
) -> TreeNode<F> {
    if depth >= hyper.max_depth {
        return TreeNode::Leaf {
            value: leaf_value(rows, residuals),
        };
    }
    match best_split(rows, features, residuals, hyper.min_samples_leaf) {
        None => TreeNode::Leaf {
            value: leaf_value(rows, residuals),
        },
        Some(split) => {
            let (left_rows, right_rows) = split.sorted_rows.split_at(split.left_count);
            TreeNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(grow(left_rows, features, residuals, depth + 1, hyper)),
                right: Box::new(grow(right_rows, features, residuals, depth + 1, hyper)),
            }
        }
    }
}

pub fn build<F: Real>(features: &[Vec<F>], residuals: &[F], hyper: &GbtHyperParams) -> TreeNode<F> {
    let rows: Vec<usize> = (0..features.len()).collect();
    grow(&rows, features, residuals, 0, hyper)
}
