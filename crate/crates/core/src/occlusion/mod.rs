//! Flags views whose segmenter mask disagrees with the object's projected
//! sparse geometry, which happens when the object is mostly hidden.

pub mod alpha;
pub mod blur;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use self::alpha::{alpha_shape, rasterize_triangles};
use self::blur::smooth_mask;
use crate::colmap::SparseCloud;
use crate::scene::{mask_iou, project_unbounded, Mask, MaskBits, MaskStatus, SceneError, ViewImage};

#[derive(Debug, thiserror::Error)]
pub enum OcclusionError {
    #[error("only {found} object points project into view {view_id}; need 3")]
    InsufficientPoints { view_id: u32, found: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcclusionConfig {
    /// Alpha-shape radius in pixels; a multiple of the median nearest-neighbour
    /// spacing of the projected points when unset.
    pub alpha: Option<f64>,
    pub gaussian_sigma_px: f64,
    pub mask_threshold: f64,
    pub iou_discard_below: f64,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self { alpha: None, gaussian_sigma_px: 5.0, mask_threshold: 0.5, iou_discard_below: 0.5 }
    }
}

/// Projects every object point in front of the camera.
pub fn project_cloud(cloud: &SparseCloud, view: &ViewImage) -> Vec<[f64; 2]> {
    cloud
        .points
        .values()
        .filter_map(|p| project_unbounded(p.xyz, &view.intrinsics, &view.pose))
        .map(|pr| [pr.u, pr.v])
        .collect()
}

/// Mask the object would have if nothing covered it: alpha shape of the
/// projected object points, smoothed.
pub fn estimate_mask_from_cloud(cloud: &SparseCloud, view: &ViewImage, cfg: &OcclusionConfig) -> Result<MaskBits, OcclusionError> {
    let pts = project_cloud(cloud, view);
    let inside = pts.iter().filter(|p| view.intrinsics.contains(p[0], p[1])).count();
    if inside < 3 {
        return Err(OcclusionError::InsufficientPoints { view_id: view.view_id, found: inside });
    }
    let (tris, _) = alpha_shape(&pts, cfg.alpha);
    let raw = rasterize_triangles(&pts, &tris, view.width(), view.height());
    Ok(smooth_mask(&raw, cfg.gaussian_sigma_px, cfg.mask_threshold))
}

pub fn occlusion_iou(segmented: &MaskBits, estimated: &MaskBits) -> Result<f64, OcclusionError> {
    Ok(mask_iou(segmented, estimated)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Keep,
    Discard,
    /// Too few object points in view to judge; the mask drops to unprocessed.
    Skipped,
    /// Mask was not accepted to begin with.
    NotApplicable,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FilterEntry {
    pub view_id: u32,
    pub iou: Option<f64>,
    pub decision: Decision,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub entries: Vec<FilterEntry>,
}

impl FilterReport {
    pub fn discarded(&self) -> Vec<u32> {
        self.entries.iter().filter(|e| e.decision == Decision::Discard).map(|e| e.view_id).collect()
    }
}

/// Compares each accepted mask with the geometry estimate and marks the ones
/// below the IoU threshold as occluded. Mask pixels are never modified.
pub fn filter_views(
    masks: &mut BTreeMap<u32, Mask>,
    object_cloud: &SparseCloud,
    views: &[ViewImage],
    cfg: &OcclusionConfig,
) -> Result<FilterReport, OcclusionError> {
    use rayon::prelude::*;
    let by_id: BTreeMap<u32, &ViewImage> = views.iter().map(|v| (v.view_id, v)).collect();
    let judged: Vec<(u32, Option<Result<f64, OcclusionError>>)> = masks
        .par_iter()
        .map(|(id, m)| {
            if !m.is_accepted() {
                return (*id, None);
            }
            let Some(view) = by_id.get(id) else { return (*id, None) };
            let iou = estimate_mask_from_cloud(object_cloud, view, cfg).and_then(|est| occlusion_iou(&m.bits, &est));
            (*id, Some(iou))
        })
        .collect();
    let mut report = FilterReport::default();
    for (view_id, r) in judged {
        let entry = match r {
            None => FilterEntry { view_id, iou: None, decision: Decision::NotApplicable },
            Some(Err(OcclusionError::InsufficientPoints { .. })) => {
                masks.get_mut(&view_id).expect("judged mask").status = MaskStatus::Unprocessed;
                FilterEntry { view_id, iou: None, decision: Decision::Skipped }
            }
            Some(Err(e)) => return Err(e),
            Some(Ok(iou)) => {
                let decision = if iou < cfg.iou_discard_below { Decision::Discard } else { Decision::Keep };
                if decision == Decision::Discard {
                    masks.get_mut(&view_id).expect("judged mask").status = MaskStatus::DiscardedOccluded;
                }
                FilterEntry { view_id, iou: Some(iou), decision }
            }
        };
        report.entries.push(entry);
    }
    Ok(report)
}
