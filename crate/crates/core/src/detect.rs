//! Online starting-movement detector.
//!
//! Frames stream through the trained classifier; the *moving* probability is
//! smoothed with a running average of the last `M` frames and compared
//! against the threshold `s`. The first crossing latches the detection time
//! `t_d` until a reset. While fewer than `M` frames have been seen the
//! average runs over what is available, so smoothing adds no second warm-up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{ClassProbabilities, ClassifierModel, TrainError};
use crate::features::{FeatureExtractor, FeatureVector};
use crate::preprocess::{preprocess_scene, PreprocessError};
use crate::scene::Scene;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("threshold {0} outside (0, 1)")]
    BadThreshold(f64),
    #[error("smoothing length must be at least 1")]
    BadSmoothing,
    #[error("warm-up feature vector pushed at frame {frame_index}")]
    WarmupFrame { frame_index: usize },
    #[error("out-of-order timestamp {t} after {last}")]
    OutOfOrder { t: f64, last: f64 },
    #[error(transparent)]
    Model(#[from] TrainError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// Detector decision parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Decision threshold on the smoothed moving probability.
    pub threshold: f64,
    /// Running-average length in frames; 1 disables smoothing.
    pub smoothing_len: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        // smoothing off by default; its measured effect is negligible
        DetectorConfig {
            threshold: 0.5,
            smoothing_len: 1,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(DetectError::BadThreshold(self.threshold));
        }
        if self.smoothing_len < 1 {
            return Err(DetectError::BadSmoothing);
        }
        Ok(())
    }
}

/// Per-frame detector output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionState {
    pub frame_index: usize,
    pub t: f64,
    pub probs: ClassProbabilities,
    pub smoothed_p_moving: f64,
    pub fired: bool,
    pub t_d: Option<f64>,
}

/// Streaming detector over one scene; single-owner, reset between streams.
#[derive(Debug)]
pub struct Detector<'m> {
    model: &'m ClassifierModel,
    config: DetectorConfig,
    window: Vec<f64>,
    fired: bool,
    t_d: Option<f64>,
    last_t: Option<f64>,
}

impl<'m> Detector<'m> {
    pub fn new(model: &'m ClassifierModel, config: DetectorConfig) -> Result<Detector<'m>, DetectError> {
        config.validate()?;
        Ok(Detector {
            model,
            config,
            window: Vec::with_capacity(config.smoothing_len),
            fired: false,
            t_d: None,
        last_t: None,
        })
    }

    /// Feeds one valid feature vector in scene-time order.
    pub fn push(&mut self, features: &FeatureVector, t: f64) -> Result<DetectionState, DetectError> {
        if !features.valid {
            return Err(DetectError::WarmupFrame {
                frame_index: features.frame_index,
            });
        }
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(DetectError::OutOfOrder { t, last });
            }
        }
        self.last_t = Some(t);

        let probs = self.model.probs_from_catalog(&features.values)?;
        if self.window.len() == self.config.smoothing_len {
            self.window.remove(0);
        }
        self.window.push(probs.p_moving);
        let smoothed = self.window.iter().sum::<f64>() / self.window.len() as f64;

        if !self.fired && smoothed >= self.config.threshold {
            self.fired = true;
            self.t_d = Some(t);
        }
        Ok(DetectionState {
            frame_index: features.frame_index,
            t,
            probs,
            smoothed_p_moving: smoothed,
            fired: self.fired,
            t_d: self.t_d,
        })
    }

    /// Clears the smoothing buffer and the latched firing.
    pub fn reset(&mut self) {
        self.window.clear();
        self.fired = false;
        self.t_d = None;
        self.last_t = None;
    }

    pub fn fired(&self) -> bool {
        self.fired
    }

    pub fn detection_time(&self) -> Option<f64> {
        self.t_d
    }
}

/// Full detector trajectory over one scene.
#[derive(Debug, Clone)]
pub struct SceneRun {
    /// One state per valid (post-warm-up) frame, in order.
    pub states: Vec<DetectionState>,
    /// Frames skipped during feature warm-up.
    pub skipped_warmup: usize,
    /// Latched detection time, if the detector fired.
    pub firing: Option<f64>,
}

/// Runs preprocessing, feature extraction and the detector over a scene.
pub fn run_scene(
    scene: &Scene,
    model: &ClassifierModel,
    config: DetectorConfig,
    extractor: &FeatureExtractor,
) -> Result<SceneRun, DetectError> {
    let series = preprocess_scene(scene)?;
    let mut detector = Detector::new(model, config)?;
    let mut states = Vec::new();
    let mut skipped = 0;
    for i in 0..series.len() {
        let features = extractor.extract(&series, i);
        if !features.valid {
            skipped += 1;
            continue;
        }
        states.push(detector.push(&features, series.times[i])?);
    }
    Ok(SceneRun {
        states,
        skipped_warmup: skipped,
        firing: detector.detection_time(),
    })
}
