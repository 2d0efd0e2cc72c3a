//! Scene recordings: timestamped IMU samples, phase labels, subject metadata.
//!
//! A scene is one waiting → (starting) → moving episode and is the unit of
//! evaluation. Phase boundaries are stored as times; per-frame class labels
//! are always derived from them via [`frame_labels`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SAMPLE_DT;

/// Relative tolerance on the nominal 20 ms sample spacing.
pub const SPACING_TOLERANCE: f64 = 0.10;

/// One inertial sample: gravity-compensated body-frame acceleration,
/// body-frame angular velocity, and the body→tangential orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    /// Timestamp in seconds, strictly increasing within a scene.
    pub t: f64,
    /// Linear (gravity-compensated) acceleration in the body frame, m/s².
    pub acc_body: [f64; 3],
    /// Angular velocity in the body frame, rad/s.
    pub gyro_body: [f64; 3],
    /// Unit quaternion (w, x, y, z) rotating the body frame into the local
    /// tangential frame.
    pub orientation: [f64; 4],
}

/// Labeled phase boundaries of a scene.
///
/// `t_start` marks the beginning of the *starting* phase (first visible body
/// movement leading to a start) and is optional; `t_move` marks the first
/// movement of the bicycle wheel, i.e. the beginning of *moving*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLabels {
    pub t_start: Option<f64>,
    pub t_move: f64,
}

/// Device wearing location, kept as scene metadata for grouping and for
/// training location-specific classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WearingLocation {
    TrouserPocket,
    Backpack,
    JacketChest,
    BicycleRack,
}

impl WearingLocation {
    pub const ALL: [WearingLocation; 4] = [
        WearingLocation::TrouserPocket,
        WearingLocation::Backpack,
        WearingLocation::JacketChest,
        WearingLocation::BicycleRack,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            WearingLocation::TrouserPocket => "trouser_pocket",
            WearingLocation::Backpack => "backpack",
            WearingLocation::JacketChest => "jacket_chest",
            WearingLocation::BicycleRack => "bicycle_rack",
        }
    }
}

impl std::str::FromStr for WearingLocation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trouser_pocket" => Ok(WearingLocation::TrouserPocket),
            "backpack" => Ok(WearingLocation::Backpack),
            "jacket_chest" => Ok(WearingLocation::JacketChest),
            "bicycle_rack" => Ok(WearingLocation::BicycleRack),
            other => Err(format!("unknown wearing location `{other}`")),
        }
    }
}

impl std::fmt::Display for WearingLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-frame class of the three-class detection problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Waiting,
    Starting,
    Moving,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Waiting, ClassLabel::Starting, ClassLabel::Moving];

    /// Dense class index used for matrices and per-class model slots.
    pub fn index(&self) -> usize {
        match self {
            ClassLabel::Waiting => 0,
            ClassLabel::Starting => 1,
            ClassLabel::Moving => 2,
        }
    }

    pub fn from_index(i: usize) -> ClassLabel {
        Self::ALL[i]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::Waiting => "waiting",
            ClassLabel::Starting => "starting",
            ClassLabel::Moving => "moving",
        }
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One recording: IMU samples plus labeled phase boundaries and metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub subject_id: String,
    pub wearing_location: WearingLocation,
    pub samples: Vec<ImuSample>,
    pub labels: PhaseLabels,
}

/// Scene invariant violation, reported with the scene id and the broken rule.
#[derive(Debug, Error)]
#[error("scene `{scene_id}`: {rule}")]
pub struct SceneValidationError {
    pub scene_id: String,
    pub rule: String,
}

impl Scene {
    /// Renormalizes all orientation quaternions in place.
    ///
    /// Fails for quaternions whose norm is non-finite or too close to zero
    /// to carry a direction.
    pub fn renormalize_orientations(&mut self) -> Result<(), SceneValidationError> {
        for (i, s) in self.samples.iter_mut().enumerate() {
            let q = &mut s.orientation;
            let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            if !norm.is_finite() || norm < 1e-9 {
                return Err(SceneValidationError {
                    scene_id: self.id.clone(),
                    rule: format!("sample {i}: orientation quaternion norm {norm} cannot be normalized"),
                });
            }
            for c in q.iter_mut() {
                *c /= norm;
            }
        }
        Ok(())
    }

    /// Checks all scene invariants: quaternion norms, strictly increasing
    /// timestamps at the nominal rate, and phase boundaries inside the
    /// recording with a waiting→moving transition present.
    pub fn validate(&self) -> Result<(), SceneValidationError> {
        let fail = |rule: String| {
            Err(SceneValidationError {
                scene_id: self.id.clone(),
                rule,
            })
        };

        if self.samples.is_empty() {
            return fail("scene has no samples".into());
        }
        for (i, s) in self.samples.iter().enumerate() {
            let q = s.orientation;
            let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return fail(format!("sample {i}: orientation quaternion norm {norm} deviates from 1"));
            }
            if !s.t.is_finite() {
                return fail(format!("sample {i}: non-finite timestamp"));
            }
        }
        for i in 1..self.samples.len() {
            let dt = self.samples[i].t - self.samples[i - 1].t;
            if dt <= 0.0 {
                return fail(format!("sample {i}: timestamps not strictly increasing (dt = {dt})"));
            }
            if (dt - SAMPLE_DT).abs() > SPACING_TOLERANCE * SAMPLE_DT {
                return fail(format!(
                    "sample {i}: spacing {dt:.6} s outside ±{:.0}% of nominal {SAMPLE_DT} s",
                    SPACING_TOLERANCE * 100.0
                ));
            }
        }

        let first_t = self.samples.first().unwrap().t;
        let last_t = self.samples.last().unwrap().t;
        let t_move = self.labels.t_move;
        if !(first_t..=last_t).contains(&t_move) {
            return fail(format!("t_move {t_move} outside sample range [{first_t}, {last_t}]"));
        }
        if let Some(t_start) = self.labels.t_start {
            if t_start > t_move {
                return fail(format!("t_start {t_start} after t_move {t_move}"));
            }
        }
        if !self.samples.iter().any(|s| s.t < t_move) {
            return fail("no sample before t_move (missing waiting phase)".into());
        }
        if !self.samples.iter().any(|s| s.t >= t_move) {
            return fail("no sample at/after t_move (missing moving phase)".into());
        }
        Ok(())
    }

    /// Time of the first sample.
    pub fn start_time(&self) -> f64 {
        self.samples.first().map(|s| s.t).unwrap_or(0.0)
    }

    /// Beginning of the *starting* phase, falling back to `t_move` when no
    /// starting phase was labeled.
    pub fn phase_ii_start(&self) -> f64 {
        self.labels.t_start.unwrap_or(self.labels.t_move)
    }
}

/// Derives one class label per sample from the phase boundaries:
/// waiting before `t_start`, starting within `[t_start, t_move)`, moving at
/// and after `t_move`. Without a labeled `t_start` the boundary is `t_move`.
pub fn frame_labels(scene: &Scene) -> Vec<ClassLabel> {
    let t_move = scene.labels.t_move;
    let t_start = scene.labels.t_start;
    scene
        .samples
        .iter()
        .map(|s| {
            if s.t >= t_move {
                ClassLabel::Moving
            } else {
                match t_start {
                    Some(ts) if s.t >= ts => ClassLabel::Starting,
                    _ => ClassLabel::Waiting,
                }
            }
        })
        .collect()
}
