//! On-disk scene dataset format: one `.scene.jsonl` file per scene.
//!
//! The first line carries the scene header, every following line one sample:
//!
//! ```text
//! {"scene":{"id":"…","subject_id":"…","wearing_location":"…","t_start":null,"t_move":3.0}}
//! {"t":0.0,"acc":[0.0,0.0,0.0],"gyro":[0.0,0.0,0.0],"q":[1.0,0.0,0.0,0.0]}
//! ```
//!
//! Times are seconds as decimal floats. Quaternions are renormalized on load;
//! scenes violating any invariant are rejected rather than repaired.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{ImuSample, PhaseLabels, Scene, SceneValidationError, WearingLocation};

/// File extension of scene files.
pub const SCENE_EXTENSION: &str = ".scene.jsonl";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Validation(#[from] SceneValidationError),
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneHeader {
    scene: SceneMeta,
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneMeta {
    id: String,
    subject_id: String,
    wearing_location: WearingLocation,
    t_start: Option<f64>,
    t_move: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleLine {
    t: f64,
    acc: [f64; 3],
    gyro: [f64; 3],
    q: [f64; 4],
}

/// Reads a single scene file, renormalizes quaternions and validates.
pub fn load_scene(path: &Path) -> Result<Scene, DatasetError> {
    let io_err = |source| DatasetError::Io { path: path.to_path_buf(), source };
    let file = fs::File::open(path).map_err(io_err)?;
    let reader = BufReader::new(file);

    let mut lines = reader.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| DatasetError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "empty file, expected scene header".into(),
    })?;
    let header_line = header_line.map_err(io_err)?;
    let header: SceneHeader = serde_json::from_str(&header_line).map_err(|e| DatasetError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("bad scene header: {e}"),
    })?;

    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let s: SampleLine = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("bad sample: {e}"),
        })?;
        samples.push(ImuSample {
            t: s.t,
            acc_body: s.acc,
            gyro_body: s.gyro,
            orientation: s.q,
        });
    }

    let mut scene = Scene {
        id: header.scene.id,
        subject_id: header.scene.subject_id,
        wearing_location: header.scene.wearing_location,
        samples,
        labels: PhaseLabels {
            t_start: header.scene.t_start,
            t_move: header.scene.t_move,
        },
    };
    scene.renormalize_orientations()?;
    scene.validate()?;
    Ok(scene)
}

/// Loads every `.scene.jsonl` file under `path`, returning scenes sorted by id.
pub fn load_dataset(path: &Path) -> Result<Vec<Scene>, DatasetError> {
    let io_err = |source| DatasetError::Io { path: path.to_path_buf(), source };
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io_err)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(SCENE_EXTENSION)))
        .collect();
    files.sort();

    let mut scenes = files.iter().map(|f| load_scene(f)).collect::<Result<Vec<_>, _>>()?;
    scenes.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(scenes)
}

/// Writes one scene as `.scene.jsonl` into `dir`, named after the scene id.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<PathBuf, DatasetError> {
    let path = dir.join(format!("{}{}", scene.id, SCENE_EXTENSION));
    let io_err = |source| DatasetError::Io { path: path.clone(), source };
    let file = fs::File::create(&path).map_err(io_err)?;
    let mut w = BufWriter::new(file);

    let header = SceneHeader {
        scene: SceneMeta {
            id: scene.id.clone(),
            subject_id: scene.subject_id.clone(),
            wearing_location: scene.wearing_location,
            t_start: scene.labels.t_start,
            t_move: scene.labels.t_move,
        },
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| DatasetError::Parse {
        path: path.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    w.write_all(b"\n").map_err(io_err)?;
    for s in &scene.samples {
        let line = SampleLine {
            t: s.t,
            acc: s.acc_body,
            gyro: s.gyro_body,
            q: s.orientation,
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| DatasetError::Parse {
            path: path.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(path)
}

/// Writes all scenes into `dir` (created if missing).
pub fn write_dataset(scenes: &[Scene], dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|source| DatasetError::Io { path: dir.to_path_buf(), source })?;
    for scene in scenes {
        write_scene(scene, dir)?;
    }
    Ok(())
}
