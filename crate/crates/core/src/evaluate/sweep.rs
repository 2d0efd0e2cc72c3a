//! Random parameter sweep: sample configurations, cross-validate each, and
//! build the Pareto frontier of (F1, mean detection time).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cross_validate, CvConfig, EvalError, EvalSummary, Outcome, ScoreOptions};
use crate::classify::GbtParams;
use crate::detect::DetectorConfig;
use crate::evaluate::pareto::{pareto_frontier, ParetoPoint};
use crate::pipeline::{ModelParams, PreparedScene, SelectionConfig, TrainConfig, TrainingMode};
use crate::rng::rng_for_stream;

/// Classifier family swept over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepModelKind {
    Gbt,
    LinearSvm,
}

/// Sweep configuration. The default grids are the published ranges; the
/// class-count grid switches with the training mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub model_kind: SweepModelKind,
    pub mode: TrainingMode,
    pub n_samples: usize,
    pub seed: u64,
    pub folds: usize,
    pub scoring: ScoreOptions,
    pub calibration_folds: usize,
    pub selection: Option<SelectionConfig>,
    /// Tree-count choices for GBT.
    pub gbt_trees_grid: Vec<usize>,
    /// Inclusive depth range for GBT.
    pub gbt_depth_range: (usize, usize),
    /// Learning-rate range for GBT.
    pub gbt_eta_range: (f64, f64),
    /// log2 range of the SVM penalty.
    pub svm_log2_c_range: (f64, f64),
    /// Per-class subsample-count choices, drawn independently per class.
    pub class_count_grid: Vec<usize>,
    /// Running-average lengths.
    pub smoothing_grid: Vec<usize>,
}

/// Location-specific per-class subsample grid: 2500..=15000 step 2500.
pub fn location_specific_count_grid() -> Vec<usize> {
    (1..=6).map(|i| i * 2500).collect()
}

/// Location-agnostic per-class subsample grid: 10000..=22500 step 2500.
pub fn location_agnostic_count_grid() -> Vec<usize> {
    (4..=9).map(|i| i * 2500).collect()
}

impl SweepSpec {
    pub fn new(model_kind: SweepModelKind, mode: TrainingMode, n_samples: usize, seed: u64) -> SweepSpec {
        let class_count_grid = match mode {
            TrainingMode::LocationAgnostic => location_agnostic_count_grid(),
            TrainingMode::LocationSpecific(_) => location_specific_count_grid(),
        };
        SweepSpec {
            model_kind,
            mode,
            n_samples,
            seed,
            folds: 10,
            scoring: ScoreOptions::default(),
            calibration_folds: 3,
            selection: None,
            gbt_trees_grid: vec![50, 100, 200, 300, 500, 700],
            gbt_depth_range: (3, 10),
            gbt_eta_range: (0.01, 0.2),
            svm_log2_c_range: (-8.0, 8.0),
            class_count_grid,
            smoothing_grid: vec![1, 5, 10],
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |msg: String| Err(EvalError::Pipeline(crate::pipeline::PipelineError::Config(msg)));
        if self.n_samples == 0 {
            return bad("sweep needs at least one sample".into());
        }
        if self.gbt_trees_grid.is_empty() || self.gbt_trees_grid.iter().any(|&t| t == 0) {
            return bad("tree grid must contain positive counts".into());
        }
        if self.gbt_depth_range.0 == 0 || self.gbt_depth_range.1 < self.gbt_depth_range.0 {
            return bad(format!("depth range {:?} invalid", self.gbt_depth_range));
        }
        if !(self.gbt_eta_range.0 > 0.0 && self.gbt_eta_range.1 >= self.gbt_eta_range.0 && self.gbt_eta_range.1 <= 1.0) {
            return bad(format!("learning-rate range {:?} invalid", self.gbt_eta_range));
        }
        if self.class_count_grid.is_empty() || self.class_count_grid.iter().any(|&c| c == 0) {
            return bad("class-count grid must contain positive counts".into());
        }
        if self.smoothing_grid.is_empty() || self.smoothing_grid.iter().any(|&m| m == 0) {
            return bad("smoothing grid must contain positive lengths".into());
        }
        Ok(())
    }
}

/// One sampled parameter assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub index: usize,
    pub model: ModelParams,
    pub class_targets: [usize; 3],
    pub threshold: f64,
    pub smoothing_len: usize,
}

/// Draws the configuration for one sweep index; pure function of
/// (spec.seed, index).
pub fn sample_configuration(spec: &SweepSpec, index: usize) -> SweepSample {
    let mut rng = rng_for_stream(spec.seed, index as u64);
    let model = match spec.model_kind {
        SweepModelKind::Gbt => ModelParams::Gbt(GbtParams {
            n_trees: spec.gbt_trees_grid[rng.random_range(0..spec.gbt_trees_grid.len())],
            max_depth: rng.random_range(spec.gbt_depth_range.0..=spec.gbt_depth_range.1),
            learning_rate: rng.random_range(spec.gbt_eta_range.0..spec.gbt_eta_range.1),
            ..GbtParams::default()
        }),
        SweepModelKind::LinearSvm => {
            let log2_c = rng.random_range(spec.svm_log2_c_range.0..spec.svm_log2_c_range.1);
            ModelParams::LinearSvm {
                penalty_c: log2_c.exp2(),
            }
        }
    };
    let mut class_targets = [0usize; 3];
    for slot in class_targets.iter_mut() {
        *slot = spec.class_count_grid[rng.random_range(0..spec.class_count_grid.len())];
    }
    let threshold = loop {
        let s: f64 = rng.random_range(0.0..1.0);
        if s > 0.0 {
            break s;
        }
    };
    let smoothing_len = spec.smoothing_grid[rng.random_range(0..spec.smoothing_grid.len())];
    SweepSample {
        index,
        model,
        class_targets,
        threshold,
        smoothing_len,
    }
}

/// One evaluated sweep point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sample: SweepSample,
    pub summary: EvalSummary,
    /// Per-scene detection-time deltas of the true positives, for
    /// histograms.
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Configurations that failed, with their error; the sweep continues
    /// past them.
    pub errors: Vec<(usize, String)>,
    pub frontier: Vec<ParetoPoint>,
}

/// Runs the sweep: each sampled configuration goes through subject-wise
/// cross-validation; the frontier is computed over the successful points.
/// Deterministic given the spec, regardless of parallel scheduling.
pub fn sweep(scenes: &[PreparedScene], spec: &SweepSpec) -> Result<SweepReport, EvalError> {
    spec.validate()?;
    let results: Vec<Result<SweepPoint, (usize, String)>> = (0..spec.n_samples)
        .into_par_iter()
        .map(|index| {
            let sample = sample_configuration(spec, index);
            let config = CvConfig {
                folds: spec.folds,
                train: TrainConfig {
                    model: sample.model.clone(),
                    mode: spec.mode,
                    class_targets: sample.class_targets,
                    selection: spec.selection.clone(),
                    calibration_folds: spec.calibration_folds,
                    detector: DetectorConfig {
                        threshold: sample.threshold,
                        smoothing_len: sample.smoothing_len,
                    },
                    scoring: spec.scoring,
                    seed: rng_for_stream(spec.seed, 0xC0F1 + index as u64).next_u64(),
                },
                detector: DetectorConfig {
                    threshold: sample.threshold,
                    smoothing_len: sample.smoothing_len,
                },
                scoring: spec.scoring,
                seed: spec.seed,
            };
            match cross_validate(scenes, &config) {
                Ok(report) => {
                    let deltas: Vec<f64> = report
                        .scenes
                        .iter()
                        .filter(|r| r.score.outcome == Outcome::TruePositive)
                        .filter_map(|r| r.score.delta_t)
                        .collect();
                    Ok(SweepPoint {
                        sample,
                        summary: report.pooled,
                        deltas,
                    })
                }
                Err(e) => Err((index, e.to_string())),
            }
        })
        .collect();

    let mut points = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => errors.push(e),
        }
    }
    let pareto_points: Vec<ParetoPoint> = points
        .iter()
        .map(|p| {
            ParetoPoint::new(
                p.summary.f1,
                p.summary.mean_detection_time,
                serde_json::to_value(&p.sample).expect("sample serializes"),
            )
        })
        .collect();
    let frontier = pareto_frontier(&pareto_points);
    Ok(SweepReport {
        points,
        errors,
        frontier,
    })
}

use rand::RngCore;
