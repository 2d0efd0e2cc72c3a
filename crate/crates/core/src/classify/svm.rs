//! Primal linear SVM with hinge loss, one binary problem per class
//! (one-vs-rest).
//!
//! Training runs deterministic full-batch subgradient descent with a
//! backtracking line search, so the objective ½‖w‖² + C·Σ hinge never
//! increases between epochs. Features are standardized once and the
//! statistics frozen into the model.

use serde::{Deserialize, Serialize};

use crate::scene::ClassLabel;

use super::TrainError;

/// Epochs cap for one one-vs-rest problem.
const MAX_EPOCHS: usize = 10_000;
/// Stop once the relative objective decrease over an epoch falls below this.
const RELATIVE_TOL: f64 = 1e-4;

/// Trained one-vs-rest linear SVM over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    /// Per-class weight vectors, class-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    /// Standardization statistics frozen at training time.
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub penalty_c: f64,
}

impl LinearSvmModel {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    /// Per-class decision values wᵀz + b on the standardized input.
    pub fn raw_scores(&self, x: &[f64]) -> Result<[f64; 3], TrainError> {
        if x.len() != self.n_features() {
            return Err(TrainError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let mut scores = [0.0; 3];
        for (c, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut s = *b;
            for j in 0..x.len() {
                s += w[j] * (x[j] - self.means[j]) / self.scales[j];
            }
            scores[c] = s;
        }
        Ok(scores)
    }
}

fn standardization(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let d = x[0].len();
    let mut means = vec![0.0; d];
    for row in x {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut scales = vec![0.0; d];
    for row in x {
        for j in 0..d {
            let c = row[j] - means[j];
            scales[j] += c * c;
        }
    }
    for s in scales.iter_mut() {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    (means, scales)
}

/// Hinge objective ½‖w‖² + C·Σ max(0, 1 − yᵢ(wᵀxᵢ + b)).
fn objective(z: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, c: f64) -> f64 {
    let reg: f64 = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = z
        .iter()
        .zip(y)
        .map(|(row, yi)| {
            let margin = yi * (dot(w, row) + b);
            (1.0 - margin).max(0.0)
        })
        .sum();
    reg + c * hinge
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One binary problem: returns (w, b).
fn train_binary(z: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let d = z[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut obj = objective(z, y, &w, b, c);
    let mut step = 1.0 / (1.0 + c);

    for _ in 0..MAX_EPOCHS {
        // subgradient: w − C·Σ_{margin<1} yᵢxᵢ, −C·Σ_{margin<1} yᵢ
        let mut gw = w.clone();
        let mut gb = 0.0;
        for (row, yi) in z.iter().zip(y) {
            if yi * (dot(&w, row) + b) < 1.0 {
                for (g, xi) in gw.iter_mut().zip(row) {
                    *g -= c * yi * xi;
                }
                gb -= c * yi;
            }
        }

        // backtracking: accept the first step that decreases the objective
        let mut accepted = false;
        let mut t = step;
        for _ in 0..40 {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - t * gi).collect();
            let b_new = b - t * gb;
            let obj_new = objective(z, y, &w_new, b_new, c);
            if obj_new < obj {
                let rel = (obj - obj_new) / obj.max(1e-12);
                w = w_new;
                b = b_new;
                obj = obj_new;
                step = t * 1.3;
                accepted = true;
                if rel < RELATIVE_TOL {
                    return (w, b);
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no descent step found: at (or numerically at) a minimizer
            break;
        }
    }
    (w, b)
}

/// Trains the three one-vs-rest problems. The seed is recorded for
/// provenance only; the optimizer itself is deterministic.
pub fn train_linear_svm(
    x: &[Vec<f64>],
    y: &[ClassLabel],
    penalty_c: f64,
    _seed: u64,
) -> Result<LinearSvmModel, TrainError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(TrainError::BadTrainingSet {
            reason: format!("{} rows vs {} labels", x.len(), y.len()),
        });
    }
    if !(penalty_c > 0.0) {
        return Err(TrainError::BadParameter {
            name: "penalty_c",
            reason: format!("{penalty_c} is not positive"),
        });
    }
    let mut present = [false; 3];
    for label in y {
        present[label.index()] = true;
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(TrainError::SingleClass);
    }

    let (means, scales) = standardization(x);
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|row| row.iter().zip(means.iter().zip(&scales)).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();

    let mut weights = Vec::with_capacity(3);
    let mut biases = Vec::with_capacity(3);
    for class in ClassLabel::ALL {
        let targets: Vec<f64> = y.iter().map(|l| if *l == class { 1.0 } else { -1.0 }).collect();
        let (w, b) = train_binary(&z, &targets, penalty_c);
        weights.push(w);
        biases.push(b);
    }
    Ok(LinearSvmModel {
        weights,
        biases,
        means,
        scales,
        penalty_c,
    })
}

/// Total hinge loss of one one-vs-rest problem on the training set, using
/// the model's frozen standardization.
pub fn hinge_loss(model: &LinearSvmModel, class: ClassLabel, x: &[Vec<f64>], y: &[ClassLabel]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, label)| {
            let yi = if *label == class { 1.0 } else { -1.0 };
            let score = model.raw_scores(row).expect("dimension checked")[class.index()];
            (1.0 - yi * score).max(0.0)
        })
        .sum()
}
