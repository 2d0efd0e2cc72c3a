//! Starting-movement detection for cyclists from body-worn inertial sensors.
//!
//! The pipeline turns raw 50 Hz accelerometer/gyroscope streams into a
//! three-class frame classifier (*waiting*, *starting*, *moving*) and an
//! online detector that fires when the smoothed *moving* probability crosses
//! a threshold:
//!
//! 1. [`scene`] / [`dataset`] — scene recordings, phase labels, JSONL storage.
//! 2. [`preprocess`] — rotation into the local tangential frame and the four
//!    attitude-invariant channels.
//! 3. [`features`] — multi-scale sliding-window features (energy/min/max,
//!    orthogonal-polynomial coefficients, normalized DFT magnitudes).
//! 4. [`selection`] — two-stage feature selection (filter ranking + backward
//!    wrapper on scene F1).
//! 5. [`classify`] — linear SVM and gradient-boosted trees with per-class
//!    sigmoid calibration.
//! 6. [`detect`] — running-average smoothing, threshold decision, detection
//!    time.
//! 7. [`evaluate`] — scene-wise TP/FP/FN scoring, subject-wise
//!    cross-validation, parameter sweeps, Pareto frontiers.
//! 8. [`synth`] — deterministic synthetic scene generator for end-to-end
//!    testing without a recorded dataset.

pub mod classify;
pub mod dataset;
pub mod detect;
pub mod evaluate;
pub mod features;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod scene;
pub mod selection;
pub mod synth;

pub use scene::{ClassLabel, ImuSample, PhaseLabels, Scene, WearingLocation};

/// Nominal sensor sampling rate in Hz. Window lengths, warm-up and
/// detection-time arithmetic all assume this fixed rate.
pub const SAMPLE_RATE_HZ: f64 = 50.0;

/// Nominal sample spacing in seconds.
pub const SAMPLE_DT: f64 = 1.0 / SAMPLE_RATE_HZ;
