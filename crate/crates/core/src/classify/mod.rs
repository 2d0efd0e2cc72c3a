//! Three-class frame classifiers and probability calibration.
//!
//! Two model families share one interface: a primal linear SVM
//! ([`svm::LinearSvmModel`]) and gradient-boosted trees ([`gbt::GbtModel`]).
//! Raw per-class scores pass through per-class sigmoid calibration and are
//! normalized into [`ClassProbabilities`] over waiting/starting/moving.

pub mod gbt;
pub mod platt;
pub mod svm;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::WearingLocation;

pub use gbt::{train_gbt, GbtModel, GbtParams};
pub use platt::{fit_platt, SigmoidParams};
pub use svm::{train_linear_svm, LinearSvmModel};

/// Version stamp of the model file layout.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set invalid: {reason}")]
    BadTrainingSet { reason: String },
    #[error("parameter `{name}` invalid: {reason}")]
    BadParameter { name: &'static str, reason: String },
    #[error("need at least two classes in the training labels")]
    SingleClass,
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model file {path}: {message}")]
    ModelFile { path: String, message: String },
}

/// Calibrated probabilities over the three classes; always sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbabilities {
    pub p_waiting: f64,
    pub p_starting: f64,
    pub p_moving: f64,
}

impl ClassProbabilities {
    pub fn as_array(&self) -> [f64; 3] {
        [self.p_waiting, self.p_starting, self.p_moving]
    }
}

/// Per-class sigmoid calibration parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    /// (A, B) per class in class-index order.
    pub per_class: [SigmoidParams; 3],
}

impl CalibrationModel {
    /// Identity-ish calibration for tests and uncalibrated experiments:
    /// a steep sigmoid around 0 per class.
    pub fn placeholder() -> CalibrationModel {
        CalibrationModel {
            per_class: [SigmoidParams { a: -1.0, b: 0.0 }; 3],
        }
    }

    /// Applies the per-class sigmoids and normalizes to sum 1.
    pub fn probabilities(&self, raw_scores: [f64; 3]) -> ClassProbabilities {
        let mut p = [0.0; 3];
        for c in 0..3 {
            p[c] = self.per_class[c].probability(raw_scores[c]);
        }
        let sum: f64 = p.iter().sum();
        if sum > 0.0 {
            for v in p.iter_mut() {
                *v /= sum;
            }
        } else {
            p = [1.0 / 3.0; 3];
        }
        ClassProbabilities {
            p_waiting: p[0],
            p_starting: p[1],
            p_moving: p[2],
        }
    }
}

/// The trainable core of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CoreModel {
    LinearSvm(LinearSvmModel),
    Gbt(GbtModel),
}

impl CoreModel {
    pub fn raw_scores(&self, x: &[f64]) -> Result<[f64; 3], TrainError> {
        match self {
            CoreModel::LinearSvm(m) => m.raw_scores(x),
            CoreModel::Gbt(m) => m.raw_scores(x),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            CoreModel::LinearSvm(m) => m.n_features(),
            CoreModel::Gbt(m) => m.n_features,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CoreModel::LinearSvm(_) => "linear_svm",
            CoreModel::Gbt(_) => "gbt",
        }
    }
}

/// Training provenance stamped into every model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingProvenance {
    /// `location_agnostic` or `location_specific`.
    pub mode: String,
    /// Set when trained location-specific.
    pub wearing_location: Option<WearingLocation>,
    pub seed: u64,
    /// Per-class rebalance targets actually used, class-index order.
    pub class_targets: [usize; 3],
    /// Whether two-stage feature selection ran.
    pub selection: bool,
    /// Achieved wrapper F1 when selection ran.
    pub wrapper_f1: Option<f64>,
}

/// Complete trained detector model: classifier core, calibration, the
/// catalog feature subset it consumes, and how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format_version: u32,
    pub core: CoreModel,
    pub calibration: CalibrationModel,
    /// Catalog indices of the features the core consumes, ascending.
    pub selected_features: Vec<usize>,
    /// Names of those features, for reports and sanity checks.
    pub feature_names: Vec<String>,
    pub training: TrainingProvenance,
}

impl ClassifierModel {
    /// Raw per-class scores on a selected-subset vector.
    pub fn raw_scores(&self, x: &[f64]) -> Result<[f64; 3], TrainError> {
        self.core.raw_scores(x)
    }

    /// Calibrated, normalized probabilities on a selected-subset vector.
    pub fn calibrated_probs(&self, x: &[f64]) -> Result<ClassProbabilities, TrainError> {
        Ok(self.calibration.probabilities(self.core.raw_scores(x)?))
    }

    /// Gathers the model's feature subset out of a full catalog vector.
    pub fn gather_features(&self, full: &[f64]) -> Vec<f64> {
        self.selected_features.iter().map(|&i| full[i]).collect()
    }

    /// Calibrated probabilities straight from a full catalog vector.
    pub fn probs_from_catalog(&self, full: &[f64]) -> Result<ClassProbabilities, TrainError> {
        self.calibrated_probs(&self.gather_features(full))
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| TrainError::ModelFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        fs::write(path, json + "\n").map_err(|e| TrainError::ModelFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<ClassifierModel, TrainError> {
        let text = fs::read_to_string(path).map_err(|e| TrainError::ModelFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let model: ClassifierModel = serde_json::from_str(&text).map_err(|e| TrainError::ModelFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(TrainError::ModelFile {
                path: path.display().to_string(),
                message: format!(
                    "format version {} unsupported (expected {MODEL_FORMAT_VERSION})",
                    model.format_version
                ),
            });
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ClassLabel;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn tiny_model() -> ClassifierModel {
        let x = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![1.0, 1.0], vec![1.1, 1.0], vec![2.0, 0.5], vec![2.1, 0.5]];
        let y = vec![
            ClassLabel::Waiting,
            ClassLabel::Waiting,
            ClassLabel::Starting,
            ClassLabel::Starting,
            ClassLabel::Moving,
            ClassLabel::Moving,
        ];
        let core = CoreModel::Gbt(
            train_gbt(
                &x,
                &y,
                &GbtParams {
                    n_trees: 5,
                    max_depth: 2,
                    ..GbtParams::default()
                },
            )
            .unwrap(),
        );
        ClassifierModel {
            format_version: MODEL_FORMAT_VERSION,
            core,
            calibration: CalibrationModel::placeholder(),
            selected_features: vec![3, 17],
            feature_names: vec!["a".into(), "b".into()],
            training: TrainingProvenance {
                mode: "location_agnostic".into(),
                wearing_location: None,
                seed: 0,
                class_targets: [2, 2, 2],
                selection: false,
                wrapper_f1: None,
            },
        }
    }

    #[test]
    fn equal_scores_with_identical_calibration_give_uniform_probs() {
        let calib = CalibrationModel::placeholder();
        let p = calib.probabilities([0.7, 0.7, 0.7]);
        assert!((p.p_waiting - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.p_starting - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.p_moving - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_raw_score_saturates_its_probability() {
        let calib = CalibrationModel::placeholder();
        let p = calib.probabilities([0.0, 0.0, 1e6]);
        assert!(p.p_moving > 0.999, "p_moving = {}", p.p_moving);
    }

    #[test]
    fn probabilities_stay_normalized_on_random_inputs() {
        let calib = CalibrationModel {
            per_class: [
                SigmoidParams { a: -2.0, b: 0.3 },
                SigmoidParams { a: -0.5, b: -0.2 },
                SigmoidParams { a: -4.0, b: 1.0 },
            ],
        };
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(101);
        for _ in 0..10_000 {
            let raw = [
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
            ];
            let p = calib.probabilities(raw).as_array();
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn model_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = tiny_model();
        model.save(&path).unwrap();
        let loaded = ClassifierModel::load(&path).unwrap();
        assert_eq!(model, loaded);
        assert_eq!(loaded.core.kind_name(), "gbt");
    }

    #[test]
    fn wrong_format_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut model = tiny_model();
        model.format_version = 99;
        let json = serde_json::to_string(&model).unwrap();
        std::fs::write(&path, json).unwrap();
        assert!(matches!(ClassifierModel::load(&path), Err(TrainError::ModelFile { .. })));
    }

    #[test]
    fn gather_features_picks_selected_indices() {
        let model = tiny_model();
        let full: Vec<f64> = (0..156).map(|i| i as f64).collect();
        assert_eq!(model.gather_features(&full), vec![3.0, 17.0]);
    }
}
