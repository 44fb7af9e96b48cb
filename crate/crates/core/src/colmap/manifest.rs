use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_colmap_model, read_file, write_file, ColmapError, SparseCloud};
use crate::scene::{CameraIntrinsics, CameraPose, DepthImage, InstanceMap, Mat3, RgbImage, Vec3, ViewImage};

pub const MANIFEST_VERSION: u32 = 1;

fn default_depth_scale() -> f64 {
    0.001
}

/// Which artifact is authoritative for camera calibration. Exactly one is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseSource {
    Manifest,
    Colmap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl From<CameraIntrinsics<f64>> for ManifestIntrinsics {
    fn from(k: CameraIntrinsics<f64>) -> Self {
        Self { fx: k.fx, fy: k.fy, cx: k.cx, cy: k.cy, width: k.width, height: k.height }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestPose {
    /// World-to-camera rotation, row-major.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<CameraPose<f64>> for ManifestPose {
    fn from(p: CameraPose<f64>) -> Self {
        Self { rotation: p.rotation.rows, translation: p.translation.to_array() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestView {
    pub view_id: u32,
    pub image: String,
    /// 16-bit PNG in millimeters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    /// 8-bit instance-id PNG (synthetic ground truth, used by the oracle backend).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<ManifestIntrinsics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<ManifestPose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub pose_source: PoseSource,
    /// Scene units per millimeter of stored depth.
    #[serde(default = "default_depth_scale")]
    pub depth_scale: f64,
    /// COLMAP model directory, relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colmap: Option<String>,
    pub views: Vec<ManifestView>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ColmapError> {
        let text = read_file(path)?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| ColmapError::Manifest(format!("{}: {e}", path.display())))?;
        m.check()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), ColmapError> {
        self.check()?;
        let text = serde_json::to_string_pretty(self).map_err(|e| ColmapError::Manifest(e.to_string()))?;
        write_file(path, text.as_bytes())
    }

    fn check(&self) -> Result<(), ColmapError> {
        if self.version != MANIFEST_VERSION {
            return Err(ColmapError::Manifest(format!("unsupported manifest version {}", self.version)));
        }
        if !(self.depth_scale > 0.0) {
            return Err(ColmapError::Manifest("depth_scale must be positive".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in &self.views {
            if !seen.insert(v.view_id) {
                return Err(ColmapError::Manifest(format!("duplicate view_id {}", v.view_id)));
            }
            let has_calib = (v.intrinsics.is_some(), v.pose.is_some());
            match (self.pose_source, has_calib) {
                (PoseSource::Manifest, (true, true)) | (PoseSource::Colmap, (false, false)) => {}
                (PoseSource::Manifest, _) => {
                    return Err(ColmapError::Manifest(format!(
                        "view {} lacks intrinsics/pose but pose_source is manifest",
                        v.view_id
                    )))
                }
                (PoseSource::Colmap, _) => {
                    return Err(ColmapError::Manifest(format!(
                        "view {} carries calibration but pose_source is colmap (mixing sources is rejected)",
                        v.view_id
                    )))
                }
            }
        }
        if self.pose_source == PoseSource::Colmap && self.colmap.is_none() {
            return Err(ColmapError::Manifest("pose_source colmap requires a colmap directory".into()));
        }
        Ok(())
    }
}

/// Fully loaded dataset: views with pixels, optional instance maps and sparse cloud.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub views: Vec<ViewImage>,
    pub instances: BTreeMap<u32, InstanceMap>,
    pub cloud: Option<SparseCloud>,
}

impl Dataset {
    pub fn view(&self, view_id: u32) -> Option<&ViewImage> {
        self.views.iter().find(|v| v.view_id == view_id)
    }
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, ColmapError> {
    let manifest = Manifest::load(manifest_path)?;
    let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let model = match &manifest.colmap {
        Some(dir) => Some(load_colmap_model(&root.join(dir))?),
        None => None,
    };
    let colmap_views: BTreeMap<u32, _> = model
        .as_ref()
        .map(|(_, vs)| vs.iter().map(|v| (v.view_id, v.clone())).collect())
        .unwrap_or_default();
    let mut views = Vec::with_capacity(manifest.views.len());
    let mut instances = BTreeMap::new();
    for mv in &manifest.views {
        let (intrinsics, pose) = match manifest.pose_source {
            PoseSource::Manifest => {
                let (Some(k), Some(p)) = (mv.intrinsics, mv.pose) else {
                    unreachable!("checked by Manifest::check")
                };
                (
                    CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy, k.width, k.height)?,
                    CameraPose::new(Mat3::from_rows(p.rotation), Vec3::from_array(p.translation))?,
                )
            }
            PoseSource::Colmap => {
                let meta = colmap_views.get(&mv.view_id).ok_or_else(|| {
                    ColmapError::Integrity(format!("view {} missing from the COLMAP model", mv.view_id))
                })?;
                (meta.intrinsics, meta.pose)
            }
        };
        let rgb = RgbImage::load_png(&root.join(&mv.image))?;
        let depth = match &mv.depth {
            Some(p) => Some(DepthImage::load_png_mm(&root.join(p), manifest.depth_scale)?),
            None => None,
        };
        if let Some(p) = &mv.instance {
            instances.insert(mv.view_id, InstanceMap::load_png(&root.join(p))?);
        }
        views.push(ViewImage::new(mv.view_id, rgb, depth, intrinsics, pose)?);
    }
    if let Some((cloud, _)) = &model {
        let ids = views.iter().map(|v| v.view_id).collect();
        cloud.validate(Some(&ids))?;
    }
    Ok(Dataset { root, manifest, views, instances, cloud: model.map(|(c, _)| c) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(id: u32, calib: bool) -> ManifestView {
        ManifestView {
            view_id: id,
            image: format!("{id}.png"),
            depth: None,
            instance: None,
            intrinsics: calib.then_some(ManifestIntrinsics { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0, width: 1, height: 1 }),
            pose: calib.then_some(CameraPose::identity().into()),
        }
    }

    #[test]
    fn mixing_pose_sources_is_rejected() {
        let m = Manifest {
            version: 1,
            pose_source: PoseSource::Colmap,
            depth_scale: 0.001,
            colmap: Some("sparse".into()),
            views: vec![view(1, false), view(2, true)],
        };
        assert!(matches!(m.check(), Err(ColmapError::Manifest(_))));
        let m = Manifest { pose_source: PoseSource::Manifest, views: vec![view(1, true), view(2, false)], ..m };
        assert!(m.check().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let j = r#"{"version":1,"pose_source":"manifest","views":[],"extra":1}"#;
        assert!(serde_json::from_str::<Manifest>(j).is_err());
        let j = r#"{"version":1,"pose_source":"manifest","views":[]}"#;
        let m: Manifest = serde_json::from_str(j).unwrap();
        assert_eq!(m.depth_scale, 0.001);
    }
}
