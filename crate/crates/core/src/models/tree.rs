//! CART regression tree and bootstrap-aggregated forest.
//!
//! Splits minimize the weighted sum of child squared errors (variance
//! reduction), scanning midpoints of consecutive distinct values for every
//! feature. A node is split only when the best candidate strictly reduces
//! the in-node squared error; ties prefer the lowest feature index, then the
//! lowest threshold. Forest trees are grown on bootstrap resamples of size n
//! with all features considered at every split.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Depth of the tree in edges; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            match &nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    targets: &'a [f64],
    max_depth: usize,
    min_samples_split: usize,
    nodes: Vec<TreeNode>,
}

pub fn fit(
    rows: &[Vec<f64>],
    targets: &[f64],
    max_depth: usize,
    min_samples_split: usize,
) -> Result<TreeModel> {
    if rows.is_empty() || rows.len() != targets.len() {
        return Err(Error::InvalidConfig(
            "decision tree requires equal nonempty rows and targets".into(),
        ));
    }
    let mut builder = TreeBuilder {
        rows,
        targets,
        max_depth,
        min_samples_split,
        nodes: Vec::new(),
    };
    let indices: Vec<usize> = (0..rows.len()).collect();
    builder.build(&indices, 0);
    Ok(TreeModel {
        nodes: builder.nodes,
    })
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    children_sse: f64,
}

impl TreeBuilder<'_> {
    fn build(&mut self, indices: &[usize], depth: usize) -> usize {
        let n = indices.len();
        let mean = indices.iter().map(|&i| self.targets[i]).sum::<f64>() / n as f64;
        let sse: f64 = indices
            .iter()
            .map(|&i| (self.targets[i] - mean).powi(2))
            .sum();

        let can_split = depth < self.max_depth && n >= self.min_samples_split && n >= 2;
        let best = if can_split && sse > 0.0 {
            self.best_split(indices, mean)
        } else {
            None
        };

        match best {
            Some(split) if split.children_sse < sse => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .partition(|&&i| self.rows[i][split.feature] <= split.threshold);
                let slot = self.nodes.len();
                self.nodes.push(TreeNode::Leaf { value: mean, n }); // placeholder
                let left = self.build(&left_idx, depth + 1);
                let right = self.build(&right_idx, depth + 1);
                self.nodes[slot] = TreeNode::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                    n,
                };
                slot
            }
            _ => {
                let slot = self.nodes.len();
                self.nodes.push(TreeNode::Leaf { value: mean, n });
                slot
            }
        }
    }

    fn best_split(&self, indices: &[usize], node_mean: f64) -> Option<BestSplit> {
        let n = indices.len();
        let d = self.rows[0].len();
        let mut best: Option<BestSplit> = None;

        let mut order: Vec<usize> = Vec::with_capacity(n);
        for feature in 0..d {
            order.clear();
            order.extend_from_slice(indices);
            order.sort_by(|&a, &b| {
                self.rows[a][feature]
                    .partial_cmp(&self.rows[b][feature])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });

            // Prefix sums over targets centered on the node mean keep the
            // per-position SSE evaluation stable.
            let mut sum_left = 0.0;
            let mut sq_left = 0.0;
            let total_sum: f64 = order.iter().map(|&i| self.targets[i] - node_mean).sum();
            let total_sq: f64 = order
                .iter()
                .map(|&i| (self.targets[i] - node_mean).powi(2))
                .sum();

            for pos in 1..n {
                let prev = order[pos - 1];
                let y = self.targets[prev] - node_mean;
                sum_left += y;
                sq_left += y * y;

                let left_val = self.rows[prev][feature];
                let right_val = self.rows[order[pos]][feature];
                if left_val >= right_val {
                    continue; // no boundary between equal values
                }
                let threshold = left_val + (right_val - left_val) / 2.0;
                let n_left = pos as f64;
                let n_right = (n - pos) as f64;
                let sum_right = total_sum - sum_left;
                let sq_right = total_sq - sq_left;
                let sse_left = sq_left - sum_left * sum_left / n_left;
                let sse_right = sq_right - sum_right * sum_right / n_right;
                let children = sse_left + sse_right;
                if best.as_ref().is_none_or(|b| children < b.children_sse) {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        children_sse: children,
                    });
                }
            }
        }

        // Recompute the winning partition with a direct two-pass sum so the
        // accepted gain is exact rather than a prefix-sum estimate.
        best.map(|b| {
            let exact = self.partition_sse(indices, b.feature, b.threshold);
            BestSplit {
                children_sse: exact,
                ..b
            }
        })
    }

    fn partition_sse(&self, indices: &[usize], feature: usize, threshold: f64) -> f64 {
        let mut sse = 0.0;
        for side in [true, false] {
            let part: Vec<f64> = indices
                .iter()
                .filter(|&&i| (self.rows[i][feature] <= threshold) == side)
                .map(|&i| self.targets[i])
                .collect();
            if part.is_empty() {
                continue;
            }
            let mean = part.iter().sum::<f64>() / part.len() as f64;
            sse += part.iter().map(|y| (y - mean).powi(2)).sum::<f64>();
        }
        sse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    /// Mean of the member trees' predictions.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

#[allow(clippy::too_many_arguments)]
pub fn fit_forest(
    rows: &[Vec<f64>],
    targets: &[f64],
    max_depth: usize,
    min_samples_split: usize,
    n_trees: usize,
    bootstrap: bool,
    seed: u64,
) -> Result<ForestModel> {
    if n_trees == 0 {
        return Err(Error::InvalidConfig("forest needs at least one tree".into()));
    }
    let n = rows.len();
    let mut trees = Vec::with_capacity(n_trees);
    for tree_idx in 0..n_trees {
        let (tree_rows, tree_targets): (Vec<Vec<f64>>, Vec<f64>) = if bootstrap {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tree_idx as u64));
            (0..n)
                .map(|_| {
                    let pick = rng.random_range(0..n);
                    (rows[pick].clone(), targets[pick])
                })
                .unzip()
        } else {
            (rows.to_vec(), targets.to_vec())
        };
        trees.push(fit(&tree_rows, &tree_targets, max_depth, min_samples_split)?);
    }
    Ok(ForestModel { trees })
}
