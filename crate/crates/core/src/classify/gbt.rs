//! Multiclass gradient-boosted regression trees with logistic (softmax)
//! loss.
//!
//! Each boosting round fits one tree per class on the softmax gradients,
//! with second-order (Newton) leaf values regularized by λ = 1 and shrunk by
//! the learning rate. Split finding is exact greedy over sorted feature
//! values, restricted to a seeded random feature subsample per tree. Raw
//! scores start at the log class priors, so a model that never splits
//! predicts the priors.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::rng_for_stream;
use crate::scene::ClassLabel;

use super::TrainError;

/// Leaf-value regularization (λ in the second-order gain).
const LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Fraction of features drawn per tree.
    pub feature_subsample: f64,
    /// Minimum samples on each side of a split.
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        // selected location-agnostic configuration
        GbtParams {
            n_trees: 100,
            max_depth: 8,
            learning_rate: 0.18,
            feature_subsample: 1.0,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |name: &'static str, reason: String| Err(TrainError::BadParameter { name, reason });
        if self.n_trees == 0 {
            return bad("n_trees", "must be at least 1".into());
        }
        if self.max_depth == 0 {
            return bad("max_depth", "must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return bad("learning_rate", format!("{} outside [0, 1]", self.learning_rate));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return bad("feature_subsample", format!("{} outside (0, 1]", self.feature_subsample));
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf", "must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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

/// One regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Trained boosted ensemble: `trees[round][class]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub trees: Vec<Vec<Tree>>,
    /// Initial per-class raw scores (log priors).
    pub init_scores: [f64; 3],
    pub params: GbtParams,
    pub n_features: usize,
    /// Total split gain accumulated per feature during training.
    pub feature_gain: Vec<f64>,
    /// Multiclass logistic loss after each round.
    pub training_loss: Vec<f64>,
    /// True when no feature carried any signal (all constant); such a model
    /// predicts the class priors everywhere.
    pub degenerate: bool,
}

impl GbtModel {
    pub fn raw_scores(&self, x: &[f64]) -> Result<[f64; 3], TrainError> {
        if x.len() != self.n_features {
            return Err(TrainError::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let mut scores = self.init_scores;
        for round in &self.trees {
            for (c, tree) in round.iter().enumerate() {
                scores[c] += tree.predict(x);
            }
        }
        Ok(scores)
    }
}

fn softmax(scores: &[f64; 3]) -> [f64; 3] {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; 3];
    let mut sum = 0.0;
    for c in 0..3 {
        p[c] = (scores[c] - max).exp();
        sum += p[c];
    }
    for v in p.iter_mut() {
        *v /= sum;
    }
    p
}

/// Multiclass logistic loss (mean negative log-likelihood).
pub fn multiclass_log_loss(scores: &[[f64; 3]], y: &[ClassLabel]) -> f64 {
    let mut loss = 0.0;
    for (s, label) in scores.iter().zip(y) {
        let p = softmax(s);
        loss -= p[label.index()].max(1e-300).ln();
    }
    loss / scores.len() as f64
}

struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Work item for one node during tree construction: per-feature sorted
/// sample index lists, restricted to the node's samples.
struct NodeWork {
    depth: usize,
    /// One sorted index list per subsampled feature, parallel to `features`.
    sorted: Vec<Vec<u32>>,
    grad_sum: f64,
    hess_sum: f64,
    /// Arena slot to write this node into.
    slot: usize,
}

fn leaf_value(grad_sum: f64, hess_sum: f64, learning_rate: f64) -> f64 {
    -learning_rate * grad_sum / (hess_sum + LAMBDA)
}

#[allow(clippy::too_many_arguments)]
fn build_tree(
    x: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    features: &[usize],
    sorted_cols: &[Vec<u32>],
    params: &GbtParams,
    feature_gain: &mut [f64],
) -> Tree {
    let mut nodes: Vec<TreeNode> = vec![TreeNode::Leaf { value: 0.0 }];
    let root_grad: f64 = sorted_cols
        .first()
        .map(|col| col.iter().map(|&i| grad[i as usize]).sum())
        .unwrap_or(0.0);
    let root_hess: f64 = sorted_cols
        .first()
        .map(|col| col.iter().map(|&i| hess[i as usize]).sum())
        .unwrap_or(0.0);

    let mut stack = vec![NodeWork {
        depth: 0,
        sorted: sorted_cols.to_vec(),
        grad_sum: root_grad,
        hess_sum: root_hess,
        slot: 0,
    }];

    while let Some(work) = stack.pop() {
        let n = work.sorted.first().map(|c| c.len()).unwrap_or(0);
        let as_leaf = |nodes: &mut Vec<TreeNode>| {
            nodes[work.slot] = TreeNode::Leaf {
                value: leaf_value(work.grad_sum, work.hess_sum, params.learning_rate),
            };
        };
        if work.depth >= params.max_depth || n < 2 * params.min_samples_leaf {
            as_leaf(&mut nodes);
            continue;
        }

        // exact greedy split search over each subsampled feature
        let parent_score = work.grad_sum * work.grad_sum / (work.hess_sum + LAMBDA);
        let mut best: Option<SplitCandidate> = None;
        for (fi, col) in work.sorted.iter().enumerate() {
            let feature = features[fi];
            let mut gl = 0.0;
            let mut hl = 0.0;
            for (pos, &i) in col.iter().enumerate().take(n - 1) {
                let i = i as usize;
                gl += grad[i];
                hl += hess[i];
                let left_count = pos + 1;
                if left_count < params.min_samples_leaf || n - left_count < params.min_samples_leaf {
                    continue;
                }
                let v = x[i][feature];
                let v_next = x[col[pos + 1] as usize][feature];
                if v_next <= v {
                    continue; // no threshold separates equal values
                }
                let gr = work.grad_sum - gl;
                let hr = work.hess_sum - hl;
                let gain = 0.5
                    * (gl * gl / (hl + LAMBDA) + gr * gr / (hr + LAMBDA) - parent_score);
                if gain > best.as_ref().map(|b| b.gain).unwrap_or(0.0) {
                    best = Some(SplitCandidate {
                        gain,
                        feature,
                        threshold: v + (v_next - v) / 2.0,
                    });
                }
            }
        }

        let Some(split) = best else {
            as_leaf(&mut nodes);
            continue;
        };
        feature_gain[split.feature] += split.gain;

        // stable partition of every feature's sorted list; a sample's side
        // is a pure function of its split-feature value
        let mut left_sorted = Vec::with_capacity(work.sorted.len());
        let mut right_sorted = Vec::with_capacity(work.sorted.len());
        for col in &work.sorted {
            let mut l = Vec::with_capacity(n / 2);
            let mut r = Vec::with_capacity(n / 2);
            for &i in col {
                if x[i as usize][split.feature] < split.threshold {
                    l.push(i);
                } else {
                    r.push(i);
                }
            }
            left_sorted.push(l);
            right_sorted.push(r);
        }

        let (mut gl, mut hl) = (0.0, 0.0);
        for &i in &left_sorted[0] {
            gl += grad[i as usize];
            hl += hess[i as usize];
        }

        let left_slot = nodes.len();
        nodes.push(TreeNode::Leaf { value: 0.0 });
        let right_slot = nodes.len();
        nodes.push(TreeNode::Leaf { value: 0.0 });
        nodes[work.slot] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_slot,
            right: right_slot,
        };
        stack.push(NodeWork {
            depth: work.depth + 1,
            sorted: left_sorted,
            grad_sum: gl,
            hess_sum: hl,
            slot: left_slot,
        });
        stack.push(NodeWork {
            depth: work.depth + 1,
            sorted: right_sorted,
            grad_sum: work.grad_sum - gl,
            hess_sum: work.hess_sum - hl,
            slot: right_slot,
        });
    }
    Tree { nodes }
}

/// Trains the boosted ensemble. Bit-identical for a fixed seed.
pub fn train_gbt(x: &[Vec<f64>], y: &[ClassLabel], params: &GbtParams) -> Result<GbtModel, TrainError> {
    params.validate()?;
    if x.is_empty() || x.len() != y.len() {
        return Err(TrainError::BadTrainingSet {
            reason: format!("{} rows vs {} labels", x.len(), y.len()),
        });
    }
    let n = x.len();
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(TrainError::BadTrainingSet {
            reason: format!("ragged rows: {} vs {}", row.len(), d),
        });
    }

    // class priors → initial scores
    let mut counts = [0usize; 3];
    for label in y {
        counts[label.index()] += 1;
    }
    let init_scores = [
        ((counts[0].max(1)) as f64 / n as f64).ln(),
        ((counts[1].max(1)) as f64 / n as f64).ln(),
        ((counts[2].max(1)) as f64 / n as f64).ln(),
    ];

    // presort each feature column once; ties ordered by sample index
    let mut presorted: Vec<Vec<u32>> = Vec::with_capacity(d);
    let mut constant = vec![true; d];
    for j in 0..d {
        let mut idx: Vec<u32> = (0..n as u32).collect();
        idx.sort_by(|&a, &b| {
            x[a as usize][j]
                .partial_cmp(&x[b as usize][j])
                .expect("finite feature values")
                .then(a.cmp(&b))
        });
        constant[j] = x[idx[0] as usize][j] == x[idx[n - 1] as usize][j];
        presorted.push(idx);
    }
    let degenerate = constant.iter().all(|c| *c);

    let mut scores: Vec<[f64; 3]> = vec![init_scores; n];
    let mut trees: Vec<Vec<Tree>> = Vec::with_capacity(params.n_trees);
    let mut feature_gain = vec![0.0; d];
    let mut training_loss = Vec::with_capacity(params.n_trees);

    let n_sub = ((d as f64 * params.feature_subsample).ceil() as usize).clamp(1, d);

    for round in 0..params.n_trees {
        // softmax gradients at the current scores, shared by the round
        let probs: Vec<[f64; 3]> = scores.iter().map(softmax).collect();
        let mut round_trees = Vec::with_capacity(3);
        for class in 0..3 {
            let grad: Vec<f64> = probs
                .iter()
                .zip(y)
                .map(|(p, label)| p[class] - if label.index() == class { 1.0 } else { 0.0 })
                .collect();
            let hess: Vec<f64> = probs.iter().map(|p| p[class] * (1.0 - p[class])).collect();

            // seeded feature subsample per (round, class)
            let features: Vec<usize> = if n_sub == d {
                (0..d).collect()
            } else {
                let mut rng = rng_for_stream(params.seed, (round * 3 + class) as u64);
                let mut all: Vec<usize> = (0..d).collect();
                all.shuffle(&mut rng);
                let mut chosen = all[..n_sub].to_vec();
                chosen.sort_unstable();
                chosen
            };
            let sorted_cols: Vec<Vec<u32>> = features.iter().map(|&f| presorted[f].clone()).collect();

            let tree = build_tree(x, &grad, &hess, &features, &sorted_cols, params, &mut feature_gain);
            round_trees.push(tree);
        }
        for (i, row) in x.iter().enumerate() {
            for (c, tree) in round_trees.iter().enumerate() {
                scores[i][c] += tree.predict(row);
            }
        }
        trees.push(round_trees);
        training_loss.push(multiclass_log_loss(&scores, y));
    }

    Ok(GbtModel {
        trees,
        init_scores,
        params: params.clone(),
        n_features: d,
        feature_gain,
        training_loss,
        degenerate,
    })
}
