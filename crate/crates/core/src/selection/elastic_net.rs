//! Elastic-net-penalized multinomial logistic regression, used as a
//! model-based feature filter.
//!
//! Fitted by proximal gradient descent with backtracking on standardized
//! features: the smooth part is the mean cross-entropy plus the L2 half of
//! the penalty, the L1 half enters through soft thresholding. The penalty
//! weight is picked from a logarithmic grid by validation loss.

use super::SelectionError;
use crate::rng::rng_for_stream;
use rand::seq::SliceRandom;

#[derive(Debug, Clone)]
pub struct ElasticNetConfig {
    /// L1/L2 mixing; 0.5 splits the penalty evenly.
    pub alpha: f64,
    /// Number of grid points on the penalty weight, descending from the
    /// smallest all-zero weight.
    pub n_lambdas: usize,
    /// Fraction of rows held out for penalty selection.
    pub validation_fraction: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        ElasticNetConfig {
            alpha: 0.5,
            n_lambdas: 5,
            validation_fraction: 0.25,
            max_iters: 2000,
            tol: 1e-7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ElasticNetFit {
    /// Per-class weight rows over standardized features.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Chosen penalty weight.
    pub lambda: f64,
    pub iterations: usize,
    pub n_classes: usize,
}

impl ElasticNetFit {
    /// Filter score per feature: the largest absolute coefficient over
    /// classes.
    pub fn feature_scores(&self) -> Vec<f64> {
        let d = self.weights.first().map(|w| w.len()).unwrap_or(0);
        (0..d)
            .map(|j| self.weights.iter().map(|w| w[j].abs()).fold(0.0, f64::max))
            .collect()
    }
}

fn standardize(x: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = x.len();
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    let mut mean = vec![0.0; d];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for row in x {
        for j in 0..d {
            let c = row[j] - mean[j];
            var[j] += c * c;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    let z = x
        .iter()
        .map(|row| row.iter().zip(mean.iter().zip(&scale)).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();
    (z, mean, scale)
}

struct SoftmaxModel {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl SoftmaxModel {
    fn zeros(n_classes: usize, d: usize) -> SoftmaxModel {
        SoftmaxModel {
            weights: vec![vec![0.0; d]; n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    fn probs(&self, row: &[f64]) -> Vec<f64> {
        let mut logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(row).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            sum += *l;
        }
        for l in logits.iter_mut() {
            *l /= sum;
        }
        logits
    }
}

/// Mean cross-entropy of a fitted model on (already standardized) rows.
fn cross_entropy(model: &SoftmaxModel, x: &[Vec<f64>], y: &[usize]) -> f64 {
    let mut loss = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let p = model.probs(row);
        loss -= p[yi].max(1e-300).ln();
    }
    loss / x.len() as f64
}

/// Gradient of mean cross-entropy wrt weights and bias.
fn ce_gradient(model: &SoftmaxModel, x: &[Vec<f64>], y: &[usize], n_classes: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = x.len() as f64;
    let d = model.weights[0].len();
    let mut gw = vec![vec![0.0; d]; n_classes];
    let mut gb = vec![0.0; n_classes];
    for (row, &yi) in x.iter().zip(y) {
        let p = model.probs(row);
        for c in 0..n_classes {
            let r = p[c] - if c == yi { 1.0 } else { 0.0 };
            gb[c] += r;
            for (g, xi) in gw[c].iter_mut().zip(row) {
                *g += r * xi;
            }
        }
    }
    for c in 0..n_classes {
        gb[c] /= n;
        for g in gw[c].iter_mut() {
            *g /= n;
        }
    }
    (gw, gb)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// One proximal-gradient fit at a fixed penalty. Returns the model and the
/// iterations used, or a non-convergence error naming the iteration count.
fn fit_at_lambda(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    lambda: f64,
    config: &ElasticNetConfig,
) -> Result<(SoftmaxModel, usize), SelectionError> {
    let d = x[0].len();
    let mut model = SoftmaxModel::zeros(n_classes, d);
    let l1 = lambda * config.alpha;
    let l2 = lambda * (1.0 - config.alpha);

    let smooth = |m: &SoftmaxModel| {
        cross_entropy(m, x, y) + 0.5 * l2 * m.weights.iter().flatten().map(|w| w * w).sum::<f64>()
    };
    let mut step = 1.0;
    let mut obj = smooth(&model) + l1 * model.weights.iter().flatten().map(|w| w.abs()).sum::<f64>();

    for iter in 0..config.max_iters {
        let (mut gw, gb) = ce_gradient(&model, x, y, n_classes);
        for (grow, wrow) in gw.iter_mut().zip(&model.weights) {
            for (g, w) in grow.iter_mut().zip(wrow) {
                *g += l2 * w;
            }
        }
        let g_smooth = smooth(&model);

        // backtracking on the proximal-gradient majorization
        let moved;
        loop {
            let mut cand = SoftmaxModel::zeros(n_classes, d);
            let mut quad = 0.0;
            let mut lin = 0.0;
            for c in 0..n_classes {
                cand.bias[c] = model.bias[c] - step * gb[c];
                let db = cand.bias[c] - model.bias[c];
                lin += gb[c] * db;
                quad += db * db;
                for j in 0..d {
                    cand.weights[c][j] = soft_threshold(model.weights[c][j] - step * gw[c][j], step * l1);
                    let dw = cand.weights[c][j] - model.weights[c][j];
                    lin += gw[c][j] * dw;
                    quad += dw * dw;
                }
            }
            let cand_smooth = smooth(&cand);
            if cand_smooth <= g_smooth + lin + quad / (2.0 * step) + 1e-12 {
                moved = quad.sqrt();
                model = cand;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(SelectionError::NonConvergence { iterations: iter });
            }
        }

        let new_obj = smooth(&model) + l1 * model.weights.iter().flatten().map(|w| w.abs()).sum::<f64>();
        let rel = (obj - new_obj).abs() / obj.abs().max(1e-12);
        obj = new_obj;
        if moved / step.max(1e-12) < config.tol || rel < config.tol {
            return Ok((model, iter + 1));
        }
        // allow the step to grow back after conservative phases
        step = (step * 1.5).min(1.0e3);
    }
    Err(SelectionError::NonConvergence { iterations: config.max_iters })
}

/// Fits the elastic-net multinomial logistic model, choosing the penalty on
/// a held-out validation split. Features are standardized internally.
pub fn fit_multinomial_elastic_net(
    x: &[Vec<f64>],
    y: &[usize],
    config: &ElasticNetConfig,
) -> Result<ElasticNetFit, SelectionError> {
    if x.len() != y.len() {
        return Err(SelectionError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.is_empty() {
        return Err(SelectionError::TooFewSamples { n: 0, bins: 1 });
    }
    let n_classes = y.iter().max().unwrap() + 1;
    let (z, _, _) = standardize(x);

    // deterministic validation split
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.shuffle(&mut rng_for_stream(config.seed, 0xE1A5));
    let n_val = ((z.len() as f64 * config.validation_fraction) as usize).clamp(1, z.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let gather = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (idx.iter().map(|&i| z[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
    };
    let (xv, yv) = gather(val_idx);
    let (xt, yt) = gather(train_idx);

    // lambda_max: smallest penalty that keeps all weights at zero
    let zero = SoftmaxModel::zeros(n_classes, z[0].len());
    let (g0, _) = ce_gradient(&zero, &xt, &yt, n_classes);
    let g_inf = g0.iter().flatten().map(|g| g.abs()).fold(0.0, f64::max);
    let lambda_max = (g_inf / config.alpha.max(1e-12)).max(1e-12);
    let lambdas: Vec<f64> = (0..config.n_lambdas)
        .map(|i| lambda_max * (1e-3f64).powf(i as f64 / (config.n_lambdas - 1).max(1) as f64))
        .collect();

    let mut best: Option<(f64, SoftmaxModel, usize, f64)> = None;
    for &lambda in &lambdas {
        let (model, iters) = fit_at_lambda(&xt, &yt, n_classes, lambda, config)?;
        let val_loss = cross_entropy(&model, &xv, &yv);
        if best.as_ref().is_none_or(|(b, _, _, _)| val_loss < *b) {
            best = Some((val_loss, model, iters, lambda));
        }
    }
    let (_, model, iterations, lambda) = best.unwrap();
    Ok(ElasticNetFit {
        weights: model.weights,
        bias: model.bias,
        lambda,
        iterations,
        n_classes,
    })
}
