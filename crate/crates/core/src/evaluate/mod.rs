//! Scene-wise evaluation.
//!
//! Every scene yields exactly one of TP/FP/FN: a detection inside the
//! waiting phase is a false positive, a detection in the starting or moving
//! phase a true positive, and no detection a false negative. The first 3 s
//! of waiting are trimmed from the evaluation span, and the shortened-scene
//! variant additionally cuts everything more than 7 s before the labeled
//! starting movement. The timing objective is the mean of t_d − t_move over
//! true positives.

pub mod pareto;
pub mod sweep;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::DetectorConfig;
use crate::pipeline::{run_prepared, train_pipeline, PipelineError, PreparedScene, TrainConfig};
use crate::rng::rng_for_stream;

pub use pareto::{pareto_frontier, ParetoPoint};
pub use sweep::{sweep, SweepReport, SweepSample, SweepSpec};

/// Default seconds trimmed from the beginning of each waiting phase.
pub const DEFAULT_TRIM_WAITING_S: f64 = 3.0;
/// Pre-start cut of the shortened-scene variant.
pub const DEFAULT_SHORTEN_PRE_START_S: f64 = 7.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{need} folds requested but only {have} distinct subjects")]
    TooFewSubjects { need: usize, have: usize },
    #[error("no scenes to evaluate")]
    NoScenes,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Scene outcome of the three-way scoring rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    FalseNegative,
}

/// Scoring options: evaluation-span trimming and the shortened variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Seconds removed at the beginning of each waiting phase.
    pub trim_waiting_s: f64,
    /// When set, the evaluation span starts no earlier than this many
    /// seconds before the labeled starting movement.
    pub shorten_pre_start_s: Option<f64>,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            trim_waiting_s: DEFAULT_TRIM_WAITING_S,
            shorten_pre_start_s: None,
        }
    }
}

impl ScoreOptions {
    pub fn shortened() -> ScoreOptions {
        ScoreOptions {
            trim_waiting_s: DEFAULT_TRIM_WAITING_S,
            shorten_pre_start_s: Some(DEFAULT_SHORTEN_PRE_START_S),
        }
    }

    /// First time instant that counts for scoring.
    pub fn span_start(&self, phases: &ScenePhases) -> f64 {
        let mut start = phases.start_time + self.trim_waiting_s;
        if let Some(cut) = self.shorten_pre_start_s {
            start = start.max(phases.phase_ii_start() - cut);
        }
        start
    }
}

/// Phase boundaries of a scene, the only inputs scoring needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenePhases {
    pub start_time: f64,
    pub t_start: Option<f64>,
    pub t_move: f64,
}

impl ScenePhases {
    pub fn phase_ii_start(&self) -> f64 {
        self.t_start.unwrap_or(self.t_move)
    }
}

impl From<&crate::scene::Scene> for ScenePhases {
    fn from(scene: &crate::scene::Scene) -> ScenePhases {
        ScenePhases {
            start_time: scene.start_time(),
            t_start: scene.labels.t_start,
            t_move: scene.labels.t_move,
        }
    }
}

/// Per-scene evaluation result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub outcome: Outcome,
    /// Detection time, present for TP and FP.
    pub t_d: Option<f64>,
    /// t_d − t_move, present only for TP.
    pub delta_t: Option<f64>,
}

/// Scores one scene from its phase boundaries and the (single) firing time.
///
/// A firing before the evaluation span is ignored; since a detector fires at
/// most once per scene, callers evaluating a trajectory should pass the
/// first threshold crossing at or after the span start (see
/// [`first_crossing_in_span`]).
pub fn score_phases(phases: &ScenePhases, firing: Option<f64>, options: &ScoreOptions) -> SceneScore {
    let span_start = options.span_start(phases);
    let firing = firing.filter(|t| *t >= span_start);
    match firing {
        None => SceneScore {
            outcome: Outcome::FalseNegative,
            t_d: None,
            delta_t: None,
        },
        Some(t_d) if t_d < phases.phase_ii_start() => SceneScore {
            outcome: Outcome::FalsePositive,
            t_d: Some(t_d),
            delta_t: None,
        },
        Some(t_d) => SceneScore {
            outcome: Outcome::TruePositive,
            t_d: Some(t_d),
            delta_t: Some(t_d - phases.t_move),
        },
    }
}

/// Scores a scene value directly.
pub fn score_scene(scene: &crate::scene::Scene, firing: Option<f64>, options: &ScoreOptions) -> SceneScore {
    score_phases(&ScenePhases::from(scene), firing, options)
}

/// First in-span crossing of the smoothed moving probability, from the
/// per-frame trajectory of (time, smoothed value) pairs.
pub fn first_crossing_in_span(trace: &[(f64, f64)], span_start: f64, threshold: f64) -> Option<f64> {
    trace
        .iter()
        .find(|(t, smoothed)| *t >= span_start && *smoothed >= threshold)
        .map(|(t, _)| *t)
}

/// Aggregate counts, F1 and Eq.-style mean detection time over scenes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Mean of delta_t over true positives; absent without any TP.
    pub mean_detection_time: Option<f64>,
    pub n_scenes: usize,
    pub n_tp: usize,
    pub n_fp: usize,
    pub n_fn: usize,
}

/// Summarizes scene scores: precision, recall, their harmonic mean, and the
/// mean detection time over true positives.
pub fn summarize(scores: &[SceneScore]) -> EvalSummary {
    let n_tp = scores.iter().filter(|s| s.outcome == Outcome::TruePositive).count();
    let n_fp = scores.iter().filter(|s| s.outcome == Outcome::FalsePositive).count();
    let n_fn = scores.iter().filter(|s| s.outcome == Outcome::FalseNegative).count();
    let precision = if n_tp + n_fp > 0 { n_tp as f64 / (n_tp + n_fp) as f64 } else { 0.0 };
    let recall = if n_tp + n_fn > 0 { n_tp as f64 / (n_tp + n_fn) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let mean_detection_time = if n_tp > 0 {
        Some(scores.iter().filter_map(|s| s.delta_t).sum::<f64>() / n_tp as f64)
    } else {
        None
    };
    EvalSummary {
        f1,
        precision,
        recall,
        mean_detection_time,
        n_scenes: scores.len(),
        n_tp,
        n_fp,
        n_fn,
    }
}

/// One scored scene inside a cross-validation fold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneScoreRecord {
    pub scene_id: String,
    pub subject_id: String,
    pub wearing_location: String,
    pub fold: usize,
    pub score: SceneScore,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_subjects: Vec<String>,
    pub summary: EvalSummary,
}

/// Cross-validation output: per-fold and pooled summaries plus every scene
/// score for downstream reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    /// Micro-pooled over all scene scores.
    pub pooled: EvalSummary,
    pub by_location: BTreeMap<String, EvalSummary>,
    pub scenes: Vec<SceneScoreRecord>,
}

/// Cross-validation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub train: TrainConfig,
    pub detector: DetectorConfig,
    pub scoring: ScoreOptions,
    /// Seed for the fold assignment; training uses `train.seed`.
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            train: TrainConfig::default(),
            detector: DetectorConfig::default(),
            scoring: ScoreOptions::default(),
            seed: 42,
        }
    }
}

/// Smoothed-probability trace of one evaluated scene, threshold-free so a
/// grid of thresholds can be scored from a single training pass.
#[derive(Debug, Clone)]
pub struct SceneTrace {
    pub scene_id: String,
    pub subject_id: String,
    pub wearing_location: String,
    pub fold: usize,
    pub phases: ScenePhases,
    pub trace: Vec<(f64, f64)>,
}

/// Assigns each distinct subject to a fold, subject-wise and seeded.
pub fn assign_folds(scenes: &[&PreparedScene], folds: usize, seed: u64) -> Result<BTreeMap<String, usize>, EvalError> {
    let mut subjects: Vec<&str> = scenes.iter().map(|s| s.subject_id.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    if subjects.len() < folds {
        return Err(EvalError::TooFewSubjects {
            need: folds,
            have: subjects.len(),
        });
    }
    use rand::seq::SliceRandom;
    let mut shuffled = subjects.clone();
    shuffled.shuffle(&mut rng_for_stream(seed, 0xF01D));
    Ok(shuffled
        .iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), i % folds))
        .collect())
}

/// Trains per fold on the other folds' subjects and collects the smoothed
/// moving-probability trace of every test scene.
pub fn collect_traces(scenes: &[PreparedScene], config: &CvConfig) -> Result<Vec<SceneTrace>, EvalError> {
    let in_mode = config.train.mode.filter(scenes);
    if in_mode.is_empty() {
        return Err(EvalError::NoScenes);
    }
    let assignment = assign_folds(&in_mode, config.folds, config.seed)?;

    let fold_outputs: Vec<Result<Vec<SceneTrace>, EvalError>> = (0..config.folds)
        .into_par_iter()
        .map(|fold| {
            let train_scenes: Vec<PreparedScene> = in_mode
                .iter()
                .filter(|s| assignment[&s.subject_id] != fold)
                .map(|s| (*s).clone())
                .collect();
            let test_scenes: Vec<&PreparedScene> = in_mode
                .iter()
                .filter(|s| assignment[&s.subject_id] == fold)
                .cloned()
                .collect();
            if test_scenes.is_empty() {
                return Ok(Vec::new());
            }
            let fold_train = TrainConfig {
                seed: rng_for_stream(config.train.seed, fold as u64).next_u64(),
                ..config.train.clone()
            };
            let model = train_pipeline(&train_scenes, &fold_train)?;
            let mut traces = Vec::with_capacity(test_scenes.len());
            for scene in test_scenes {
                let run = run_prepared(scene, &model, config.detector).map_err(PipelineError::from)?;
                traces.push(SceneTrace {
                    scene_id: scene.id.clone(),
                    subject_id: scene.subject_id.clone(),
                    wearing_location: scene.wearing_location.to_string(),
                    fold,
                    phases: scene.phases(),
                    trace: run.states.iter().map(|s| (s.t, s.smoothed_p_moving)).collect(),
                });
            }
            Ok(traces)
        })
        .collect();

    let mut traces = Vec::new();
    for fold_result in fold_outputs {
        traces.extend(fold_result?);
    }
    traces.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    Ok(traces)
}

use rand::RngCore;

/// Scores collected traces at one threshold.
pub fn score_traces(traces: &[SceneTrace], threshold: f64, scoring: &ScoreOptions, folds: usize) -> CvReport {
    let records: Vec<SceneScoreRecord> = traces
        .iter()
        .map(|t| {
            let span_start = scoring.span_start(&t.phases);
            let firing = first_crossing_in_span(&t.trace, span_start, threshold);
            SceneScoreRecord {
                scene_id: t.scene_id.clone(),
                subject_id: t.subject_id.clone(),
                wearing_location: t.wearing_location.clone(),
                fold: t.fold,
                score: score_phases(&t.phases, firing, scoring),
            }
        })
        .collect();

    let fold_reports: Vec<FoldReport> = (0..folds)
        .map(|fold| {
            let fold_scores: Vec<SceneScore> = records.iter().filter(|r| r.fold == fold).map(|r| r.score).collect();
            let mut test_subjects: Vec<String> = records
                .iter()
                .filter(|r| r.fold == fold)
                .map(|r| r.subject_id.clone())
                .collect();
            test_subjects.sort();
            test_subjects.dedup();
            FoldReport {
                fold,
                test_subjects,
                summary: summarize(&fold_scores),
            }
        })
        .collect();

    let all_scores: Vec<SceneScore> = records.iter().map(|r| r.score).collect();
    let mut by_location = BTreeMap::new();
    let mut locations: Vec<String> = records.iter().map(|r| r.wearing_location.clone()).collect();
    locations.sort();
    locations.dedup();
    for location in locations {
        let scores: Vec<SceneScore> = records
            .iter()
            .filter(|r| r.wearing_location == location)
            .map(|r| r.score)
            .collect();
        by_location.insert(location, summarize(&scores));
    }

    CvReport {
        folds: fold_reports,
        pooled: summarize(&all_scores),
        by_location,
        scenes: records,
    }
}

/// Subject-wise k-fold cross-validation of the full pipeline.
pub fn cross_validate(scenes: &[PreparedScene], config: &CvConfig) -> Result<CvReport, EvalError> {
    let traces = collect_traces(scenes, config)?;
    Ok(score_traces(&traces, config.detector.threshold, &config.scoring, config.folds))
}

/// Scores one fixed-model threshold grid from a single cross-validation
/// training pass. Returns (threshold, pooled summary) per grid point.
pub fn threshold_curve(
    scenes: &[PreparedScene],
    config: &CvConfig,
    grid: &[f64],
) -> Result<Vec<(f64, EvalSummary)>, EvalError> {
    let traces = collect_traces(scenes, config)?;
    Ok(grid
        .iter()
        .map(|&s| (s, score_traces(&traces, s, &config.scoring, config.folds).pooled))
        .collect())
}
