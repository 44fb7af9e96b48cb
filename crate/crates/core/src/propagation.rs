//! Carries a single-view prompt to every view through the tracks of the sparse
//! cloud: the mask in one view claims 3D points, and those points' features in
//! the next view become its prompts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::colmap::{Feature, SparseCloud};
use crate::scene::{Mask, MaskBits, ViewImage};
use crate::segmenter::{PointPrompt, PromptSet, SegmentError, Segmenter};
use crate::selfprompt::kmeans::kmeans;

#[derive(Debug, thiserror::Error)]
pub enum PropagationError {
    #[error("view {0} is not part of the dataset")]
    UnknownView(u32),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error("object cannot be initialized in view {view_id}: {in_mask} of {total} features fall inside the mask")]
    Uninitializable { view_id: u32, total: usize, in_mask: usize },
    #[error("segmenter failed after {} views: {source}", partial.visit_order.len())]
    Aborted { source: SegmentError, partial: Box<Propagation> },
    #[error("object {0} has no points")]
    EmptyObject(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VisitOrder {
    Input,
    /// Next view is the one sharing the most tracks with the current point lists.
    #[default]
    Covisibility,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub prompts_per_view: usize,
    /// Points hit by fewer accepted masks are dropped at the end.
    pub min_track_hits: usize,
    pub visit_order: VisitOrder,
    /// Masks are shrunk by this much before claiming points.
    pub erosion_px: u32,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            prompts_per_view: 5,
            min_track_hits: 2,
            visit_order: VisitOrder::Covisibility,
            erosion_px: 2,
            kmeans_iters: 50,
            seed: 0,
        }
    }
}

/// 3D points claimed by one object, with the view that first claimed each.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectPointList {
    pub object_id: u32,
    pub points: BTreeMap<u64, u32>,
}

impl ObjectPointList {
    pub fn new(object_id: u32) -> Self {
        Self { object_id, points: BTreeMap::new() }
    }

    pub fn contains(&self, id: u64) -> bool {
        self.points.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ids(&self) -> BTreeSet<u64> {
        self.points.keys().copied().collect()
    }
}

/// Seed prompts of one object.
#[derive(Debug, Clone)]
pub struct ObjectSeed {
    pub object_id: u32,
    pub view_id: u32,
    pub prompts: PromptSet,
}

#[derive(Debug, Clone, Default)]
pub struct Propagation {
    /// Per object, in seed order: one mask per view.
    pub masks: Vec<BTreeMap<u32, Mask>>,
    pub objects: Vec<ObjectPointList>,
    pub visit_order: Vec<u32>,
}

fn feature_pixel(f: &Feature, mask: &MaskBits) -> Option<(u32, u32)> {
    let (x, y) = (f.u.round(), f.v.round());
    if x < 0.0 || y < 0.0 || x >= mask.width as f64 || y >= mask.height as f64 {
        return None;
    }
    Some((x as u32, y as u32))
}

fn in_mask(f: &Feature, mask: &MaskBits) -> bool {
    feature_pixel(f, mask).is_some_and(|(x, y)| mask.get(x, y))
}

/// Point ids whose features in `view_id` fall inside the eroded mask.
pub fn points_in_mask(cloud: &SparseCloud, view_id: u32, mask: &MaskBits, erosion_px: u32) -> BTreeSet<u64> {
    let core = mask.eroded(erosion_px);
    cloud.observations(view_id).filter(|(_, f)| in_mask(f, &core)).map(|(p, _)| p).collect()
}

/// Adds the points claimed by `mask` to `list`, returning how many were new.
pub fn grow_from_mask(cloud: &SparseCloud, list: &mut ObjectPointList, mask: &Mask, erosion_px: u32) -> usize {
    if !mask.is_accepted() {
        return 0;
    }
    let before = list.len();
    for p in points_in_mask(cloud, mask.view_id, &mask.bits, erosion_px) {
        list.points.entry(p).or_insert(mask.view_id);
    }
    list.len() - before
}

/// Segments the seed view and claims the points under its mask.
pub fn init_object(
    cloud: &SparseCloud,
    view: &ViewImage,
    seed: &ObjectSeed,
    seg: &mut (impl Segmenter + ?Sized),
    cfg: &PropagationConfig,
) -> Result<(Mask, ObjectPointList), PropagationError> {
    let total = || cloud.observations(view.view_id).count();
    let mask = match seg.segment(view, &seed.prompts) {
        Ok(m) => m,
        // nothing segmented, e.g. a click on empty background
        Err(SegmentError::EmptyMask) => {
            return Err(PropagationError::Uninitializable { view_id: view.view_id, total: total(), in_mask: 0 })
        }
        Err(e) => return Err(e.into()),
    };
    let mut list = ObjectPointList::new(seed.object_id);
    grow_from_mask(cloud, &mut list, &mask, cfg.erosion_px);
    if list.is_empty() {
        let total = total();
        let in_mask = cloud.observations(view.view_id).filter(|(_, f)| in_mask(f, &mask.bits)).count();
        return Err(PropagationError::Uninitializable { view_id: view.view_id, total, in_mask });
    }
    Ok((mask, list))
}

/// Positive prompts at spread-out features of `view_id` that track into `list`.
pub fn select_prompts(cloud: &SparseCloud, list: &ObjectPointList, view_id: u32, cfg: &PropagationConfig) -> PromptSet {
    let mut pts: Vec<[f64; 2]> = cloud
        .observations(view_id)
        .filter(|(p, _)| list.contains(*p))
        .map(|(_, f)| [f.u, f.v])
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.is_empty() {
        return PromptSet::default();
    }
    let seed = cfg.seed ^ (view_id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let km = kmeans(&pts, cfg.prompts_per_view, cfg.kmeans_iters, seed);
    let mut medoids = km.medoids;
    medoids.sort_unstable();
    medoids.dedup();
    PromptSet::from_points(medoids.into_iter().map(|i| PointPrompt::positive(pts[i][0], pts[i][1])).collect())
}

fn shared_tracks(cloud: &SparseCloud, view_id: u32, lists: &[ObjectPointList]) -> usize {
    cloud.observations(view_id).filter(|(p, _)| lists.iter().any(|l| l.contains(*p))).count()
}

fn next_view(cloud: &SparseCloud, remaining: &[u32], lists: &[ObjectPointList], order: VisitOrder) -> usize {
    match order {
        VisitOrder::Input => 0,
        VisitOrder::Covisibility => {
            let mut best = 0;
            let mut best_key = (0usize, std::cmp::Reverse(u32::MAX));
            for (i, v) in remaining.iter().enumerate() {
                let key = (shared_tracks(cloud, *v, lists), std::cmp::Reverse(*v));
                if i == 0 || key > best_key {
                    best = i;
                    best_key = key;
                }
            }
            best
        }
    }
}

/// Drops points claimed by fewer than `min_hits` accepted masks.
pub fn prune_by_hits(cloud: &SparseCloud, list: &mut ObjectPointList, masks: &BTreeMap<u32, Mask>, cfg: &PropagationConfig) {
    let mut hits: BTreeMap<u64, usize> = BTreeMap::new();
    for m in masks.values().filter(|m| m.is_accepted()) {
        for p in points_in_mask(cloud, m.view_id, &m.bits, cfg.erosion_px) {
            *hits.entry(p).or_default() += 1;
        }
    }
    list.points.retain(|p, _| hits.get(p).copied().unwrap_or(0) >= cfg.min_track_hits);
}

/// Propagates every seeded object across `views`. Views where an object has
/// no trackable features, or where the segmenter returns nothing usable, get
/// an unprocessed mask. Transport failures abort with the partial result.
pub fn propagate(
    cloud: &SparseCloud,
    views: &[ViewImage],
    seeds: &[ObjectSeed],
    seg: &mut (impl Segmenter + ?Sized),
    cfg: &PropagationConfig,
) -> Result<Propagation, PropagationError> {
    let by_id: BTreeMap<u32, &ViewImage> = views.iter().map(|v| (v.view_id, v)).collect();
    let mut out = Propagation::default();
    for s in seeds {
        let view = by_id.get(&s.view_id).ok_or(PropagationError::UnknownView(s.view_id))?;
        let (mask, list) = init_object(cloud, view, s, seg, cfg)?;
        out.masks.push(BTreeMap::from([(s.view_id, mask)]));
        out.objects.push(list);
    }
    let mut remaining: Vec<u32> = views.iter().map(|v| v.view_id).collect();
    while !remaining.is_empty() {
        let view_id = remaining.remove(next_view(cloud, &remaining, &out.objects, cfg.visit_order));
        out.visit_order.push(view_id);
        let view = by_id[&view_id];
        for (o, s) in seeds.iter().enumerate() {
            if s.view_id == view_id {
                continue;
            }
            let prompts = select_prompts(cloud, &out.objects[o], view_id, cfg);
            let mask = if prompts.is_empty() {
                Mask::unprocessed(view_id, view.width(), view.height())
            } else {
                match seg.segment(view, &prompts) {
                    Ok(m) => m,
                    Err(e) if e.is_transport() => {
                        return Err(PropagationError::Aborted { source: e, partial: Box::new(out) });
                    }
                    Err(e) => {
                        log::warn!("object {} view {view_id}: {e}", s.object_id);
                        Mask::unprocessed(view_id, view.width(), view.height())
                    }
                }
            };
            grow_from_mask(cloud, &mut out.objects[o], &mask, cfg.erosion_px);
            out.masks[o].insert(view_id, mask);
        }
    }
    for (list, masks) in out.objects.iter_mut().zip(&out.masks) {
        prune_by_hits(cloud, list, masks, cfg);
    }
    Ok(out)
}

/// The object's sub-cloud, tracks and features intact.
pub fn export_object_cloud(cloud: &SparseCloud, list: &ObjectPointList) -> Result<SparseCloud, PropagationError> {
    if list.is_empty() {
        return Err(PropagationError::EmptyObject(list.object_id));
    }
    Ok(cloud.restrict(&list.ids()))
}
