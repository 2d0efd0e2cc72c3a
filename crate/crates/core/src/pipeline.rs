//! Training pipeline: frame assembly, rebalancing, optional two-stage
//! feature selection, classifier training and out-of-fold calibration.
//!
//! Scenes are prepared once (preprocessing + full feature extraction) and
//! reused across folds, sweep configurations and threshold grids; everything
//! downstream only gathers rows and columns out of the prepared matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    fit_platt, train_gbt, train_linear_svm, CalibrationModel, ClassifierModel, CoreModel, GbtParams, SigmoidParams,
    TrainError, TrainingProvenance, MODEL_FORMAT_VERSION,
};
use crate::detect::{DetectError, Detector, DetectorConfig, SceneRun};
use crate::evaluate::{score_phases, summarize, ScenePhases, ScoreOptions};
use crate::features::{FeatureCatalog, FeatureExtractor, FeatureVector};
use crate::preprocess::{preprocess_scene, PreprocessError};
use crate::rng::rng_for_stream;
use crate::scene::{frame_labels, ClassLabel, Scene, WearingLocation};
use crate::selection::{
    backward_select, rank_mifs, rank_model, rank_mrmr, rebalance, union_provenance, union_top_k, FilterRanking,
    ModelFilter, RebalanceSpec, SelectedFeatures, SelectionError, MI_BINS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("training set empty after filtering (mode {mode})")]
    NoScenes { mode: String },
    #[error("no valid frames: every scene is shorter than the feature warm-up")]
    NoValidFrames,
    #[error("{0}")]
    Config(String),
}

/// A scene with its derived labels and full feature matrix.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub id: String,
    pub subject_id: String,
    pub wearing_location: WearingLocation,
    pub start_time: f64,
    pub t_start: Option<f64>,
    pub t_move: f64,
    pub times: Vec<f64>,
    pub labels: Vec<ClassLabel>,
    pub features: Vec<FeatureVector>,
}

impl PreparedScene {
    pub fn phases(&self) -> ScenePhases {
        ScenePhases {
            start_time: self.start_time,
            t_start: self.t_start,
            t_move: self.t_move,
        }
    }
}

/// Preprocesses and extracts the full catalog for one scene.
pub fn prepare_scene(scene: &Scene, extractor: &FeatureExtractor) -> Result<PreparedScene, PipelineError> {
    let series = preprocess_scene(scene)?;
    let features = extractor.extract_all(&series);
    Ok(PreparedScene {
        id: scene.id.clone(),
        subject_id: scene.subject_id.clone(),
        wearing_location: scene.wearing_location,
        start_time: scene.start_time(),
        t_start: scene.labels.t_start,
        t_move: scene.labels.t_move,
        times: series.times,
        labels: frame_labels(scene),
        features,
    })
}

/// Prepares all scenes in parallel; output order matches input order.
pub fn prepare_scenes(scenes: &[Scene], extractor: &FeatureExtractor) -> Result<Vec<PreparedScene>, PipelineError> {
    scenes.par_iter().map(|s| prepare_scene(s, extractor)).collect()
}

/// Training mode: pool every wearing location or specialize to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainingMode {
    LocationAgnostic,
    LocationSpecific(WearingLocation),
}

impl TrainingMode {
    pub fn mode_str(&self) -> &'static str {
        match self {
            TrainingMode::LocationAgnostic => "location_agnostic",
            TrainingMode::LocationSpecific(_) => "location_specific",
        }
    }

    pub fn location(&self) -> Option<WearingLocation> {
        match self {
            TrainingMode::LocationAgnostic => None,
            TrainingMode::LocationSpecific(l) => Some(*l),
        }
    }

    /// Keeps the scenes this mode trains and evaluates on.
    pub fn filter<'a>(&self, scenes: &'a [PreparedScene]) -> Vec<&'a PreparedScene> {
        scenes
            .iter()
            .filter(|s| match self {
                TrainingMode::LocationAgnostic => true,
                TrainingMode::LocationSpecific(l) => s.wearing_location == *l,
            })
            .collect()
    }
}

/// Classifier hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum ModelParams {
    Gbt(GbtParams),
    LinearSvm { penalty_c: f64 },
}

impl ModelParams {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelParams::Gbt(_) => "gbt",
            ModelParams::LinearSvm { .. } => "linear_svm",
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::Gbt(GbtParams::default())
    }
}

/// Two-stage selection configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Top-k per filter going into the union (candidate cap = 4k).
    pub k_top: usize,
    pub bins: usize,
    /// Fraction of training subjects held out for the wrapper's scene F1.
    pub validation_fraction: f64,
    /// Classifier used inside the wrapper; kept small since the wrapper
    /// trains once per candidate removal. Hyperparameters stay fixed for
    /// the whole selection.
    pub wrapper_model: ModelParams,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k_top: 10,
            bins: MI_BINS,
            validation_fraction: 0.3,
            wrapper_model: ModelParams::Gbt(GbtParams {
                n_trees: 30,
                max_depth: 3,
                learning_rate: 0.2,
                ..GbtParams::default()
            }),
        }
    }
}

/// Full training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelParams,
    pub mode: TrainingMode,
    /// Rebalance targets per class, class-index order (waiting, starting,
    /// moving).
    pub class_targets: [usize; 3],
    pub selection: Option<SelectionConfig>,
    /// Internal out-of-fold split for calibration.
    pub calibration_folds: usize,
    /// Detector settings used when the wrapper evaluates scene F1 (and
    /// recorded as the model's suggested defaults).
    pub detector: DetectorConfig,
    pub scoring: ScoreOptions,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelParams::default(),
            mode: TrainingMode::LocationAgnostic,
            class_targets: [3000, 3000, 3000],
            selection: None,
            calibration_folds: 3,
            detector: DetectorConfig::default(),
            scoring: ScoreOptions::default(),
            seed: 42,
        }
    }
}

/// Gathered frame rows for training: owned copies of the selected frames.
struct FrameTable {
    rows: Vec<Vec<f64>>,
    labels: Vec<ClassLabel>,
}

/// Collects all valid frames of the given scenes, full catalog width.
fn collect_frames(scenes: &[&PreparedScene]) -> FrameTable {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for scene in scenes {
        for (fv, label) in scene.features.iter().zip(&scene.labels) {
            if fv.valid {
                rows.push(fv.values.clone());
                labels.push(*label);
            }
        }
    }
    FrameTable { rows, labels }
}

fn gather_columns(rows: &[Vec<f64>], columns: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect()
}

fn train_core(x: &[Vec<f64>], y: &[ClassLabel], params: &ModelParams, seed: u64) -> Result<CoreModel, TrainError> {
    match params {
        ModelParams::Gbt(p) => {
            let p = GbtParams { seed, ..p.clone() };
            Ok(CoreModel::Gbt(train_gbt(x, y, &p)?))
        }
        ModelParams::LinearSvm { penalty_c } => Ok(CoreModel::LinearSvm(train_linear_svm(x, y, *penalty_c, seed)?)),
    }
}

/// Fits per-class sigmoids on out-of-fold raw scores from an internal
/// stratified split of the training frames.
fn calibrate(
    x: &[Vec<f64>],
    y: &[ClassLabel],
    params: &ModelParams,
    folds: usize,
    seed: u64,
) -> Result<CalibrationModel, TrainError> {
    let folds = folds.max(2);
    // stratified fold assignment: within each class, cycle fold slots in a
    // seeded random order
    let mut assignment = vec![0usize; y.len()];
    for class in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        use rand::seq::SliceRandom;
        members.shuffle(&mut rng_for_stream(seed, 0xCA11B + class.index() as u64));
        for (slot, &i) in members.iter().enumerate() {
            assignment[i] = slot % folds;
        }
    }

    let mut oof_scores: Vec<[f64; 3]> = vec![[0.0; 3]; y.len()];
    for fold in 0..folds {
        let train_idx: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != fold).collect();
        let test_idx: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == fold).collect();
        if train_idx.is_empty() || test_idx.is_empty() {
            continue;
        }
        let xt: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<ClassLabel> = train_idx.iter().map(|&i| y[i]).collect();
        let core = train_core(&xt, &yt, params, rng_for_stream(seed, 0xF0 + fold as u64).next_u64())?;
        for &i in &test_idx {
            oof_scores[i] = core.raw_scores(&x[i])?;
        }
    }

    let mut per_class = [SigmoidParams { a: -1.0, b: 0.0 }; 3];
    for class in ClassLabel::ALL {
        let scores: Vec<f64> = oof_scores.iter().map(|s| s[class.index()]).collect();
        let labels: Vec<bool> = y.iter().map(|l| *l == class).collect();
        per_class[class.index()] = fit_platt(&scores, &labels)?;
    }
    Ok(CalibrationModel { per_class })
}

use rand::RngCore;

/// Runs the detector over a prepared scene, reusing its feature matrix.
pub fn run_prepared(scene: &PreparedScene, model: &ClassifierModel, config: DetectorConfig) -> Result<SceneRun, DetectError> {
    let mut detector = Detector::new(model, config)?;
    let mut states = Vec::new();
    let mut skipped = 0;
    for (fv, &t) in scene.features.iter().zip(&scene.times) {
        if !fv.valid {
            skipped += 1;
            continue;
        }
        states.push(detector.push(fv, t)?);
    }
    Ok(SceneRun {
        states,
        skipped_warmup: skipped,
        firing: detector.detection_time(),
    })
}

/// Scene F1 of a model over prepared scenes, using in-span crossings of the
/// smoothed moving probability.
fn scene_f1(
    scenes: &[&PreparedScene],
    model: &ClassifierModel,
    detector: DetectorConfig,
    scoring: &ScoreOptions,
) -> Result<f64, PipelineError> {
    let mut scores = Vec::with_capacity(scenes.len());
    for scene in scenes {
        let run = run_prepared(scene, model, detector)?;
        let phases = scene.phases();
        let span_start = scoring.span_start(&phases);
        let firing = run
            .states
            .iter()
            .find(|s| s.t >= span_start && s.smoothed_p_moving >= detector.threshold)
            .map(|s| s.t);
        scores.push(score_phases(&phases, firing, scoring));
    }
    Ok(summarize(&scores).f1)
}

/// Splits subjects into wrapper-train and wrapper-validation groups.
fn subject_split<'a>(
    scenes: &[&'a PreparedScene],
    validation_fraction: f64,
    seed: u64,
) -> (Vec<&'a PreparedScene>, Vec<&'a PreparedScene>) {
    let mut subjects: Vec<&str> = scenes.iter().map(|s| s.subject_id.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    use rand::seq::SliceRandom;
    let mut shuffled: Vec<&str> = subjects.clone();
    shuffled.shuffle(&mut rng_for_stream(seed, 0x5B11));
    let n_val = (((shuffled.len() as f64) * validation_fraction).round() as usize)
        .clamp(1, shuffled.len().saturating_sub(1).max(1));
    let val_set: std::collections::BTreeSet<&str> = shuffled[..n_val].iter().cloned().collect();
    let mut train = Vec::new();
    let mut val = Vec::new();
    for &scene in scenes {
        if val_set.contains(scene.subject_id.as_str()) {
            val.push(scene);
        } else {
            train.push(scene);
        }
    }
    (train, val)
}

/// Runs the two-stage selection on the training scenes, returning the
/// surviving feature subset.
pub fn select_features(
    scenes: &[&PreparedScene],
    config: &TrainConfig,
    selection: &SelectionConfig,
    catalog: &FeatureCatalog,
) -> Result<SelectedFeatures, PipelineError> {
    let (wrap_train, wrap_val) = subject_split(scenes, selection.validation_fraction, config.seed);
    if wrap_train.is_empty() || wrap_val.is_empty() {
        return Err(PipelineError::Config(
            "selection needs at least two subjects (wrapper train/validation split)".into(),
        ));
    }
    let table = collect_frames(&wrap_train);
    if table.rows.is_empty() {
        return Err(PipelineError::NoValidFrames);
    }
    let spec = RebalanceSpec {
        seed: rng_for_stream(config.seed, 0x5E1).next_u64(),
        targets: ClassLabel::ALL
            .iter()
            .map(|&c| (c, config.class_targets[c.index()]))
            .collect(),
    };
    let picked = rebalance(&table.labels, &spec)?;
    let rows: Vec<Vec<f64>> = picked.iter().map(|&i| table.rows[i].clone()).collect();
    let labels: Vec<ClassLabel> = picked.iter().map(|&i| table.labels[i]).collect();
    let y_codes: Vec<usize> = labels.iter().map(|l| l.index()).collect();

    // stage one: four filter rankings on the rebalanced frames
    let filter_seed = rng_for_stream(config.seed, 0xF117).next_u64();
    let rankings: Vec<FilterRanking> = vec![
        rank_mifs(&rows, &y_codes, selection.bins)?,
        rank_mrmr(&rows, &y_codes, selection.k_top, selection.bins)?,
        rank_model(&rows, &y_codes, ModelFilter::ElasticNet, filter_seed)?,
        rank_model(&rows, &y_codes, ModelFilter::Gbt, filter_seed)?,
    ];
    let candidates = union_top_k(&rankings, selection.k_top);
    let provenance = union_provenance(&rankings, selection.k_top);

    // stage two: backward wrapper on validation-scene F1 with fixed
    // classifier hyperparameters
    let wrapper_seed = rng_for_stream(config.seed, 0x3A7).next_u64();
    let evaluator = |subset: &[usize]| -> Result<f64, SelectionError> {
        let x_sub = gather_columns(&rows, subset);
        let core = train_core(&x_sub, &labels, &selection.wrapper_model, wrapper_seed)
            .map_err(|e| SelectionError::Evaluator(e.to_string()))?;
        let calibration = calibrate(&x_sub, &labels, &selection.wrapper_model, config.calibration_folds, wrapper_seed)
            .map_err(|e| SelectionError::Evaluator(e.to_string()))?;
        let model = ClassifierModel {
            format_version: MODEL_FORMAT_VERSION,
            core,
            calibration,
            selected_features: subset.to_vec(),
            feature_names: subset.iter().map(|&i| catalog.specs[i].name()).collect(),
            training: TrainingProvenance {
                mode: config.mode.mode_str().into(),
                wearing_location: config.mode.location(),
                seed: wrapper_seed,
                class_targets: config.class_targets,
                selection: true,
                wrapper_f1: None,
            },
        };
        scene_f1(&wrap_val, &model, config.detector, &config.scoring).map_err(|e| SelectionError::Evaluator(e.to_string()))
    };
    Ok(backward_select(&candidates, provenance, evaluator)?)
}

/// Trains the full detector model on the given scenes: rebalance, optional
/// two-stage selection, classifier fit, out-of-fold calibration.
pub fn train_pipeline(scenes: &[PreparedScene], config: &TrainConfig) -> Result<ClassifierModel, PipelineError> {
    let catalog = crate::features::feature_catalog();
    let in_mode = config.mode.filter(scenes);
    if in_mode.is_empty() {
        return Err(PipelineError::NoScenes {
            mode: config.mode.mode_str().into(),
        });
    }

    let selected = match &config.selection {
        Some(selection) => select_features(&in_mode, config, selection, &catalog)?,
        None => SelectedFeatures {
            indices: (0..catalog.len()).collect(),
            provenance: Default::default(),
            wrapper_f1: 0.0,
        },
    };

    let table = collect_frames(&in_mode);
    if table.rows.is_empty() {
        return Err(PipelineError::NoValidFrames);
    }
    let spec = RebalanceSpec {
        seed: rng_for_stream(config.seed, 0xBA1).next_u64(),
        targets: ClassLabel::ALL
            .iter()
            .map(|&c| (c, config.class_targets[c.index()]))
            .collect(),
    };
    let picked = rebalance(&table.labels, &spec)?;
    let labels: Vec<ClassLabel> = picked.iter().map(|&i| table.labels[i]).collect();
    let rows: Vec<Vec<f64>> = picked
        .iter()
        .map(|&i| selected.indices.iter().map(|&c| table.rows[i][c]).collect())
        .collect();

    let train_seed = rng_for_stream(config.seed, 0x7EA1).next_u64();
    let core = train_core(&rows, &labels, &config.model, train_seed)?;
    let calibration = calibrate(&rows, &labels, &config.model, config.calibration_folds, train_seed)?;

    Ok(ClassifierModel {
        format_version: MODEL_FORMAT_VERSION,
        core,
        calibration,
        feature_names: selected.indices.iter().map(|&i| catalog.specs[i].name()).collect(),
        selected_features: selected.indices,
        training: TrainingProvenance {
            mode: config.mode.mode_str().into(),
            wearing_location: config.mode.location(),
            seed: config.seed,
            class_targets: config.class_targets,
            selection: config.selection.is_some(),
            wrapper_f1: config.selection.as_ref().map(|_| selected.wrapper_f1),
        },
    })
}
