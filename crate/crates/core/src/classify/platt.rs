//! Sigmoid score calibration: P(y=1 | s) = 1 / (1 + exp(A·s + B)).
//!
//! Parameters are fitted by damped Newton iterations on the negative
//! log-likelihood with smoothed targets t₊ = (N₊+1)/(N₊+2) and
//! t₋ = 1/(N₋+2), which keeps the optimum finite even for perfectly
//! separated scores.

use serde::{Deserialize, Serialize};

use super::TrainError;

const MAX_NEWTON_ITERS: usize = 200;
const GRADIENT_TOL: f64 = 1e-10;

/// Fitted sigmoid parameters (A, B) for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidParams {
    pub a: f64,
    pub b: f64,
}

impl SigmoidParams {
    /// Calibrated probability for a raw score.
    pub fn probability(&self, score: f64) -> f64 {
        let f = self.a * score + self.b;
        if f >= 0.0 {
            let e = (-f).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + f.exp())
        }
    }
}

fn nll(scores: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    let mut loss = 0.0;
    for (&s, &t) in scores.iter().zip(targets) {
        let f = a * s + b;
        // −t·ln p − (1−t)·ln(1−p) with p = σ(−f), stably:
        // = t·ln(1+e^f) + (1−t)·(f + ln(1+e^{−f}))  for f ≥ 0, mirrored otherwise
        let l = if f >= 0.0 {
            t * (1.0 + (-f).exp()).ln() + (1.0 - t) * (f + (1.0 + (-f).exp()).ln())
        } else {
            t * (-f + (1.0 + f.exp()).ln()) + (1.0 - t) * (1.0 + f.exp()).ln()
        };
        loss += l;
    }
    loss
}

/// Fits (A, B) on raw scores and binary labels. Both label values must be
/// present.
pub fn fit_platt(scores: &[f64], labels: &[bool]) -> Result<SigmoidParams, TrainError> {
    if scores.len() != labels.len() {
        return Err(TrainError::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(TrainError::SingleClass);
    }

    let t_pos = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let t_neg = 1.0 / (n_neg as f64 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { t_pos } else { t_neg }).collect();

    // Newton on (A, B) with step halving; start at the prior-matching offset
    let mut a = 0.0;
    let mut b = ((n_neg as f64 + 1.0) / (n_pos as f64 + 1.0)).ln();
    let mut loss = nll(scores, &targets, a, b);

    for _ in 0..MAX_NEWTON_ITERS {
        // with p = σ(−f), dL/df = t − p, so (p − t) accumulates −∇L
        let mut neg_grad_a = 0.0;
        let mut neg_grad_b = 0.0;
        let mut h_aa = 0.0;
        let mut h_ab = 0.0;
        let mut h_bb = 0.0;
        for (&s, &t) in scores.iter().zip(targets.iter()) {
            let p = SigmoidParams { a, b }.probability(s);
            let diff = p - t;
            let w = (p * (1.0 - p)).max(1e-300);
            neg_grad_a += diff * s;
            neg_grad_b += diff;
            h_aa += w * s * s;
            h_ab += w * s;
            h_bb += w;
        }
        if (neg_grad_a * neg_grad_a + neg_grad_b * neg_grad_b).sqrt() < GRADIENT_TOL {
            break;
        }
        // Newton direction d = H⁻¹·(−∇L), with slight damping for safety
        let damp = 1e-12;
        let det = (h_aa + damp) * (h_bb + damp) - h_ab * h_ab;
        let (da, db) = if det.abs() > 1e-300 {
            (
                ((h_bb + damp) * neg_grad_a - h_ab * neg_grad_b) / det,
                (-h_ab * neg_grad_a + (h_aa + damp) * neg_grad_b) / det,
            )
        } else {
            (neg_grad_a, neg_grad_b)
        };

        let mut stepped = false;
        let mut eta = 1.0;
        for _ in 0..60 {
            let new_loss = nll(scores, &targets, a + eta * da, b + eta * db);
            if new_loss < loss {
                a += eta * da;
                b += eta * db;
                loss = new_loss;
                stepped = true;
                break;
            }
            eta *= 0.5;
        }
        if !stepped {
            break;
        }
    }
    Ok(SigmoidParams { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn symmetric_scores_give_zero_offset() {
        let scores: Vec<f64> = (-50..=50).filter(|v| *v != 0).map(|v| v as f64 / 10.0).collect();
        let labels: Vec<bool> = scores.iter().map(|s| *s > 0.0).collect();
        let fit = fit_platt(&scores, &labels).unwrap();
        assert!(fit.b.abs() < 1e-6, "B = {}", fit.b);
        assert!(fit.a < 0.0, "A = {}", fit.a);
    }

    #[test]
    fn recovers_planted_slope() {
        // labels ~ Bernoulli(1/(1+exp(−2s))), so the true (A, B) = (−2, 0)
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(91);
        let n = 100_000;
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let s: f64 = rng.random_range(-3.0..3.0);
            let p = 1.0 / (1.0 + (-2.0 * s).exp());
            scores.push(s);
            labels.push(rng.random_range(0.0..1.0) < p);
        }
        let fit = fit_platt(&scores, &labels).unwrap();
        assert!((fit.a - (-2.0)).abs() < 0.05, "A = {}", fit.a);
        assert!(fit.b.abs() < 0.05, "B = {}", fit.b);
    }

    #[test]
    fn all_positive_labels_is_an_error() {
        let scores = vec![0.1, 0.4, 0.9];
        let labels = vec![true, true, true];
        assert!(matches!(fit_platt(&scores, &labels), Err(TrainError::SingleClass)));
    }

    #[test]
    fn perfectly_separated_scores_stay_finite() {
        let scores: Vec<f64> = (0..40).map(|i| if i < 20 { -1.0 - i as f64 } else { i as f64 - 18.0 }).collect();
        let labels: Vec<bool> = scores.iter().map(|s| *s > 0.0).collect();
        let fit = fit_platt(&scores, &labels).unwrap();
        assert!(fit.a.is_finite() && fit.b.is_finite());
        assert!(fit.a < 0.0);
        // smoothed targets keep probabilities off the boundary
        assert!(fit.probability(100.0) < 1.0);
        assert!(fit.probability(-100.0) > 0.0);
    }

    #[test]
    fn calibrated_probability_is_monotone_in_score() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(92);
        let scores: Vec<f64> = (0..500).map(|_| rng.random_range(-4.0..4.0)).collect();
        let labels: Vec<bool> = scores.iter().map(|s| rng.random_range(-1.0..1.0) < *s).collect();
        let fit = fit_platt(&scores, &labels).unwrap();
        assert!(fit.a != 0.0);
        let mut prev = fit.probability(-5.0);
        for i in -49..=50 {
            let p = fit.probability(i as f64 / 10.0);
            assert!(p >= prev, "not monotone at {i}");
            prev = p;
        }
    }
}
