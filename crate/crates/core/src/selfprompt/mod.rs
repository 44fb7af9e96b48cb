//! Turns a text query into point prompts: detect a box, segment it, then pick
//! well-spread points from a band away from the mask edge.

pub mod distance;
pub mod kmeans;

use serde::{Deserialize, Serialize};

use self::distance::distance_transform;
use crate::scene::{Mask, MaskBits, ViewImage};
use crate::segmenter::{BoxProvider, PointPrompt, PromptSet, ScoredBox, SegmentError, Segmenter};

#[derive(Debug, thiserror::Error)]
pub enum SelfPromptError {
    #[error("detector found no box for {0:?}")]
    NotFound(String),
    #[error("segmenter returned an empty mask for the detected box")]
    EmptyMask,
    #[error("no pixels with edge distance in [{lo}, {hi}] (max distance {max_dist:.2}); try band_lo <= {suggest:.2}")]
    BandEmpty { lo: f64, hi: f64, max_dist: f64, suggest: f64 },
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfPromptConfig {
    pub k: usize,
    pub band_lo: f64,
    /// Defaults to max(4, 5% of the largest edge distance).
    pub band_hi: Option<f64>,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for SelfPromptConfig {
    fn default() -> Self {
        Self { k: 5, band_lo: 2.0, band_hi: None, kmeans_iters: 50, seed: 0 }
    }
}

/// Per-pixel distance to the nearest pixel outside the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl DistanceMap {
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }
}

pub fn distance_map(mask: &MaskBits) -> DistanceMap {
    DistanceMap { width: mask.width, height: mask.height, data: distance_transform(mask) }
}

/// Segments the highest-scoring box. Ties keep the detector's order.
pub fn box_to_mask(
    seg: &mut (impl Segmenter + ?Sized),
    view: &ViewImage,
    boxes: &[ScoredBox],
) -> Result<Mask, SelfPromptError> {
    let best = boxes
        .iter()
        .fold(None::<&ScoredBox>, |acc, b| match acc {
            Some(a) if a.score >= b.score => Some(a),
            _ => Some(b),
        })
        .ok_or_else(|| SelfPromptError::NotFound(String::new()))?;
    match seg.segment(view, &PromptSet::from_box(best.bbox)) {
        Ok(mut m) => {
            m.score = best.score;
            Ok(m)
        }
        Err(SegmentError::EmptyMask) => Err(SelfPromptError::EmptyMask),
        Err(e) => Err(e.into()),
    }
}

pub fn resolved_band_hi(cfg: &SelfPromptConfig, max_dist: f64) -> f64 {
    cfg.band_hi.unwrap_or_else(|| (0.05 * max_dist).max(4.0))
}

/// Pixel centers whose edge distance lies in `[lo, hi]`, row-major.
pub fn edge_band_points(dist: &DistanceMap, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>, SelfPromptError> {
    let mut out = Vec::new();
    for y in 0..dist.height {
        for x in 0..dist.width {
            let d = dist.get(x, y) as f64;
            if d > 0.0 && d >= lo && d <= hi {
                out.push((x as f64, y as f64));
            }
        }
    }
    if out.is_empty() {
        let max_dist = dist.max() as f64;
        return Err(SelfPromptError::BandEmpty { lo, hi, max_dist, suggest: max_dist.min(hi).max(1.0) });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct KMeansPrompts {
    pub prompts: PromptSet,
    /// Fewer band points than k: every point became a prompt.
    pub saturated: bool,
}

/// Positive prompts at the medoids of a k-means clustering of `points`.
pub fn kmeans_prompts(points: &[(f64, f64)], k: usize, iters: usize, seed: u64) -> KMeansPrompts {
    let pts: Vec<[f64; 2]> = points.iter().map(|(u, v)| [*u, *v]).collect();
    let km = kmeans::kmeans(&pts, k, iters, seed);
    let mut medoids = km.medoids;
    medoids.sort_unstable();
    medoids.dedup();
    let prompts = medoids.iter().map(|i| PointPrompt::positive(pts[*i][0], pts[*i][1])).collect();
    KMeansPrompts { prompts: PromptSet::from_points(prompts), saturated: points.len() < k }
}

/// Full chain on a single view.
#[derive(Debug, Clone)]
pub struct ViewPrompts {
    pub view_id: u32,
    pub detector_score: f64,
    pub mask: Mask,
    pub prompts: PromptSet,
    pub saturated: bool,
}

pub fn self_prompt_view(
    backend: &mut (impl Segmenter + BoxProvider + ?Sized),
    view: &ViewImage,
    text: &str,
    cfg: &SelfPromptConfig,
) -> Result<ViewPrompts, SelfPromptError> {
    let boxes = backend.detect_boxes(view, text)?;
    if boxes.is_empty() {
        return Err(SelfPromptError::NotFound(text.to_string()));
    }
    let mask = box_to_mask(backend, view, &boxes).map_err(|e| match e {
        SelfPromptError::NotFound(_) => SelfPromptError::NotFound(text.to_string()),
        e => e,
    })?;
    let dist = distance_map(&mask.bits);
    let hi = resolved_band_hi(cfg, dist.max() as f64);
    let band = edge_band_points(&dist, cfg.band_lo, hi)?;
    let kp = kmeans_prompts(&band, cfg.k, cfg.kmeans_iters, cfg.seed);
    if kp.saturated {
        log::warn!("view {}: only {} band points for k = {}", view.view_id, band.len(), cfg.k);
    }
    Ok(ViewPrompts { view_id: view.view_id, detector_score: mask.score, mask, prompts: kp.prompts, saturated: kp.saturated })
}

pub struct SceneJob<'a, B> {
    pub name: String,
    pub views: &'a [ViewImage],
    pub backend: B,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SceneReport {
    pub scene: String,
    pub view_id: Option<u32>,
    pub detector_score: Option<f64>,
    pub prompts: Vec<[f64; 2]>,
    /// Present when the scene was skipped.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BatchReport {
    pub scenes: Vec<SceneReport>,
}

impl BatchReport {
    pub fn skipped(&self) -> impl Iterator<Item = &SceneReport> {
        self.scenes.iter().filter(|s| s.error.is_some())
    }
}

fn prompt_scene<B: Segmenter + BoxProvider>(
    job: &mut SceneJob<'_, B>,
    text: &str,
    cfg: &SelfPromptConfig,
) -> Result<ViewPrompts, SelfPromptError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in job.views.iter().enumerate() {
        let boxes = job.backend.detect_boxes(v, text)?;
        if let Some(top) = boxes.iter().map(|b| b.score).reduce(f64::max) {
            if best.is_none_or(|(_, s)| top > s) {
                best = Some((i, top));
            }
        }
    }
    let (i, _) = best.ok_or_else(|| SelfPromptError::NotFound(text.to_string()))?;
    self_prompt_view(&mut job.backend, &job.views[i], text, cfg)
}

/// Runs the chain on the best-scoring view of each scene. Failures skip the
/// scene and are recorded; transport failures still abort the whole batch.
pub fn self_prompt_dataset<B: Segmenter + BoxProvider + Send>(
    jobs: &mut [SceneJob<'_, B>],
    text: &str,
    cfg: &SelfPromptConfig,
) -> Result<(BatchReport, Vec<Option<ViewPrompts>>), SelfPromptError> {
    use rayon::prelude::*;
    let results: Vec<_> = jobs.par_iter_mut().map(|job| (job.name.clone(), prompt_scene(job, text, cfg))).collect();
    let mut report = BatchReport::default();
    let mut out = Vec::new();
    for (scene, r) in results {
        match r {
            Ok(vp) => {
                report.scenes.push(SceneReport {
                    scene,
                    view_id: Some(vp.view_id),
                    detector_score: Some(vp.detector_score),
                    prompts: vp.prompts.points.iter().map(|p| [p.u, p.v]).collect(),
                    error: None,
                });
                out.push(Some(vp));
            }
            Err(SelfPromptError::Segment(e)) if e.is_transport() => return Err(e.into()),
            Err(e) => {
                report.scenes.push(SceneReport { scene, view_id: None, detector_score: None, prompts: vec![], error: Some(e.to_string()) });
                out.push(None);
            }
        }
    }
    Ok((report, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(w: u32, cx: f64, cy: f64, r: f64) -> MaskBits {
        MaskBits::from_fn(w, w, |x, y| ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt() <= r)
    }

    #[test]
    fn band_points_are_inside_and_far_from_edge() {
        let m = disk(64, 32.0, 32.0, 20.0);
        let d = distance_map(&m);
        let band = edge_band_points(&d, 2.0, 6.0).unwrap();
        for (u, v) in &band {
            assert!(m.get(*u as u32, *v as u32));
            assert!(d.get(*u as u32, *v as u32) >= 2.0);
        }
    }

    #[test]
    fn thin_mask_band_is_empty() {
        let m = MaskBits::from_fn(20, 20, |_, y| y == 10);
        let d = distance_map(&m);
        match edge_band_points(&d, 2.0, 0.5) {
            Err(SelfPromptError::BandEmpty { max_dist, .. }) => assert_eq!(max_dist, 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prompts_saturate_on_few_points() {
        let kp = kmeans_prompts(&[(1.0, 1.0), (5.0, 5.0), (9.0, 1.0)], 5, 10, 0);
        assert!(kp.saturated);
        assert_eq!(kp.prompts.points.len(), 3);
    }
}
