//! COLMAP sparse model I/O (text and binary) and the dataset manifest.
//!
//! Internally pixel centers sit at integer coordinates; COLMAP places them at
//! `+0.5`, so feature coordinates and principal points are shifted by half a
//! pixel at this boundary.

mod binary;
mod manifest;
mod model;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

pub use self::manifest::{
    load_dataset, Dataset, Manifest, ManifestIntrinsics, ManifestPose, ManifestView, PoseSource,
    MANIFEST_VERSION,
};
pub use self::model::{Feature, Point3D, SparseCloud, TrackEntry};
use crate::scene::{CameraIntrinsics, CameraPose, Mat3, SceneError, Vec3, ViewMeta};

pub(crate) const HALF_PIXEL: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum ColmapError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{file} at byte {offset}: {message}")]
    BinaryParse { file: String, offset: u64, message: String },
    #[error("camera {camera_id}: unsupported camera model {model} (only PINHOLE and SIMPLE_PINHOLE)")]
    UnsupportedModel { camera_id: u32, model: String },
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFormat {
    Text,
    Binary,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RawCamera {
    pub id: u32,
    pub intrinsics: CameraIntrinsics<f64>,
}

pub(crate) fn model_name(id: i32) -> &'static str {
    match id {
        0 => "SIMPLE_PINHOLE",
        1 => "PINHOLE",
        2 => "SIMPLE_RADIAL",
        3 => "RADIAL",
        4 => "OPENCV",
        5 => "OPENCV_FISHEYE",
        6 => "FULL_OPENCV",
        7 => "FOV",
        8 => "SIMPLE_RADIAL_FISHEYE",
        9 => "RADIAL_FISHEYE",
        10 => "THIN_PRISM_FISHEYE",
        _ => "UNKNOWN",
    }
}

pub(crate) fn camera_from_params(
    camera_id: u32,
    model: &str,
    width: u32,
    height: u32,
    params: &[f64],
) -> Result<CameraIntrinsics<f64>, ColmapError> {
    let (fx, fy, cx, cy) = match (model, params) {
        ("SIMPLE_PINHOLE", [f, cx, cy]) => (*f, *f, *cx, *cy),
        ("PINHOLE", [fx, fy, cx, cy]) => (*fx, *fy, *cx, *cy),
        ("SIMPLE_PINHOLE" | "PINHOLE", _) => {
            return Err(ColmapError::Parse {
                file: String::new(),
                line: 0,
                message: format!("{model} with {} parameters", params.len()),
            })
        }
        _ => return Err(ColmapError::UnsupportedModel { camera_id, model: model.to_string() }),
    };
    Ok(CameraIntrinsics::new(fx, fy, cx - HALF_PIXEL, cy - HALF_PIXEL, width, height)?)
}

pub(crate) fn camera_params(k: &CameraIntrinsics<f64>) -> [f64; 4] {
    [k.fx, k.fy, k.cx + HALF_PIXEL, k.cy + HALF_PIXEL]
}

pub(crate) fn pose_from_colmap(q: [f64; 4], t: [f64; 3]) -> Result<CameraPose<f64>, SceneError> {
    CameraPose::new(Mat3::from_quaternion(q), Vec3::from_array(t))
}

pub(crate) fn pose_to_colmap(pose: &CameraPose<f64>) -> ([f64; 4], [f64; 3]) {
    (pose.rotation.to_quaternion(), pose.translation.to_array())
}

pub(crate) fn read_file(path: &Path) -> Result<String, ColmapError> {
    std::fs::read_to_string(path).map_err(|source| ColmapError::Io { path: path.display().to_string(), source })
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, ColmapError> {
    std::fs::read(path).map_err(|source| ColmapError::Io { path: path.display().to_string(), source })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ColmapError> {
    std::fs::write(path, bytes).map_err(|source| ColmapError::Io { path: path.display().to_string(), source })
}

/// Detects the on-disk format of a model directory; binary wins when both exist.
pub fn detect_format(dir: &Path) -> Option<ModelFormat> {
    if dir.join("cameras.bin").is_file() {
        Some(ModelFormat::Binary)
    } else if dir.join("cameras.txt").is_file() {
        Some(ModelFormat::Text)
    } else {
        None
    }
}

/// Loads a COLMAP sparse model and validates track/feature cross links.
pub fn load_colmap_model(dir: &Path) -> Result<(SparseCloud, Vec<ViewMeta>), ColmapError> {
    let format = detect_format(dir).ok_or_else(|| ColmapError::Io {
        path: dir.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no cameras.txt or cameras.bin"),
    })?;
    let (points, views, features) = match format {
        ModelFormat::Text => {
            let cams = text::read_cameras(dir)?;
            let (views, features) = text::read_images(dir, &cams)?;
            (text::read_points(dir)?, views, features)
        }
        ModelFormat::Binary => {
            let cams = binary::read_cameras(dir)?;
            let (views, features) = binary::read_images(dir, &cams)?;
            (binary::read_points(dir)?, views, features)
        }
    };
    let cloud = SparseCloud { points, features };
    let ids: BTreeSet<u32> = views.iter().map(|v| v.view_id).collect();
    cloud.validate(Some(&ids))?;
    Ok((cloud, views))
}

fn cameras_of(views: &[ViewMeta]) -> Result<BTreeMap<u32, RawCamera>, ColmapError> {
    let mut cams: BTreeMap<u32, RawCamera> = BTreeMap::new();
    for v in views {
        match cams.get(&v.camera_id) {
            Some(c) if c.intrinsics != v.intrinsics => {
                return Err(ColmapError::Integrity(format!(
                    "camera {} shared by views with different intrinsics",
                    v.camera_id
                )))
            }
            Some(_) => {}
            None => {
                cams.insert(v.camera_id, RawCamera { id: v.camera_id, intrinsics: v.intrinsics });
            }
        }
    }
    Ok(cams)
}

pub fn save_colmap_model(
    cloud: &SparseCloud,
    views: &[ViewMeta],
    dir: &Path,
    format: ModelFormat,
) -> Result<(), ColmapError> {
    let ids: BTreeSet<u32> = views.iter().map(|v| v.view_id).collect();
    cloud.validate(Some(&ids))?;
    let cams = cameras_of(views)?;
    std::fs::create_dir_all(dir).map_err(|source| ColmapError::Io { path: dir.display().to_string(), source })?;
    match format {
        ModelFormat::Text => text::write_model(dir, &cams, cloud, views),
        ModelFormat::Binary => binary::write_model(dir, &cams, cloud, views),
    }
}
