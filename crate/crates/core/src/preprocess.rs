//! Rotation of body-frame sensor vectors into the local tangential frame and
//! reduction to four attitude-invariant channels.
//!
//! The tangential frame is leveled with the ground plane, z-axis toward the
//! sky. Instead of resolving the device heading (no compass), each sensor
//! vector is reduced to its ground-plane magnitude and its z projection,
//! which are invariant under any yaw of the device.

use thiserror::Error;

use crate::scene::Scene;
use crate::SAMPLE_RATE_HZ;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("quaternion norm {norm} deviates from 1 beyond 1e-6")]
    NonUnitQuaternion { norm: f64 },
}

/// The four derived signal values of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFrame {
    /// Ground-plane magnitude of linear acceleration, m/s² (≥ 0).
    pub acc_xy_mag: f64,
    /// Vertical linear acceleration, m/s².
    pub acc_z: f64,
    /// Ground-plane magnitude of angular velocity, rad/s (≥ 0).
    pub gyro_xy_mag: f64,
    /// Angular velocity about the vertical axis, rad/s.
    pub gyro_z: f64,
}

impl ChannelFrame {
    /// Channel value by catalog channel index (see [`crate::features::Channel`]).
    pub fn get(&self, channel: usize) -> f64 {
        match channel {
            0 => self.acc_xy_mag,
            1 => self.acc_z,
            2 => self.gyro_xy_mag,
            3 => self.gyro_z,
            _ => panic!("channel index {channel} out of range"),
        }
    }
}

/// Derived channels for a whole scene, aligned 1:1 with its samples.
#[derive(Debug, Clone)]
pub struct ChannelSeries {
    pub rate: f64,
    pub frames: Vec<ChannelFrame>,
    /// Sample timestamps, copied from the scene for downstream time lookup.
    pub times: Vec<f64>,
}

impl ChannelSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// One channel as a contiguous series, by catalog channel index.
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.get(channel)).collect()
    }
}

/// Rotates a body-frame vector into the tangential frame: q ⊗ v ⊗ q⁻¹.
///
/// `q` is (w, x, y, z) and must be unit within 1e-6.
pub fn rotate_to_tangential(v: [f64; 3], q: [f64; 4]) -> Result<[f64; 3], PreprocessError> {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(PreprocessError::NonUnitQuaternion { norm });
    }
    let (w, qv) = (q[0], [q[1], q[2], q[3]]);
    // v' = v + w·(2 qv × v) + qv × (2 qv × v)
    let t = scale(cross(qv, v), 2.0);
    let rotated = add(add(v, scale(t, w)), cross(qv, t));
    Ok(rotated)
}

/// Reduces a tangential-frame acc/gyro pair to the four invariant channels.
pub fn derive_channels(acc_t: [f64; 3], gyro_t: [f64; 3]) -> ChannelFrame {
    ChannelFrame {
        acc_xy_mag: acc_t[0].hypot(acc_t[1]),
        acc_z: acc_t[2],
        gyro_xy_mag: gyro_t[0].hypot(gyro_t[1]),
        gyro_z: gyro_t[2],
    }
}

/// Rotates and reduces every sample of a scene.
pub fn preprocess_scene(scene: &Scene) -> Result<ChannelSeries, PreprocessError> {
    let mut frames = Vec::with_capacity(scene.samples.len());
    let mut times = Vec::with_capacity(scene.samples.len());
    for s in &scene.samples {
        let acc_t = rotate_to_tangential(s.acc_body, s.orientation)?;
        let gyro_t = rotate_to_tangential(s.gyro_body, s.orientation)?;
        frames.push(derive_channels(acc_t, gyro_t));
        times.push(s.t);
    }
    Ok(ChannelSeries {
        rate: SAMPLE_RATE_HZ,
        frames,
        times,
    })
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Quaternion for a rotation of `angle` radians about the z-axis, (w,x,y,z).
pub fn yaw_quaternion(angle: f64) -> [f64; 4] {
    [(angle / 2.0).cos(), 0.0, 0.0, (angle / 2.0).sin()]
}

/// Hamilton product a ⊗ b, both (w,x,y,z).
pub fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}
