#![allow(dead_code)]

use std::collections::BTreeMap;

use objfield::propagation::ObjectSeed;
use objfield::scene::{Mask, MaskBits, ViewImage};
use objfield::segmenter::{OracleBackend, PointPrompt, PromptSet};
use objfield::selfprompt::distance_map;
use objfield::synth::{fabricate_sparse_cloud, oracle::instance_mask, preset, render_scene, FabricatedCloud, RenderedView, SceneSpec};

pub struct Scene {
    pub spec: SceneSpec,
    pub rendered: Vec<RenderedView>,
    pub views: Vec<ViewImage>,
    pub fab: FabricatedCloud,
}

impl Scene {
    pub fn from_spec(spec: SceneSpec, n_points: usize, noise_px: f64, seed: u64) -> Self {
        let rendered = render_scene(&spec).unwrap();
        let views: Vec<ViewImage> = rendered.iter().map(|r| r.view.clone()).collect();
        let fab = fabricate_sparse_cloud(&spec, &views, n_points, noise_px, seed).unwrap();
        Self { spec, rendered, views, fab }
    }

    pub fn preset(name: &str, noise_px: f64, seed: u64) -> Self {
        Self::from_spec(preset(name).unwrap(), 3000, noise_px, seed)
    }

    pub fn oracle(&self) -> OracleBackend {
        OracleBackend::new(self.rendered.iter().map(|r| (r.view.view_id, r.instances.clone())).collect())
    }

    pub fn gt(&self, view_id: u32, instance: u32) -> MaskBits {
        let r = self.rendered.iter().find(|r| r.view.view_id == view_id).unwrap();
        instance_mask(&r.instances, instance)
    }

    pub fn gt_masks(&self, instance: u32) -> BTreeMap<u32, Mask> {
        self.rendered
            .iter()
            .map(|r| (r.view.view_id, Mask::new(r.view.view_id, instance_mask(&r.instances, instance), 1.0)))
            .collect()
    }

    /// One click at the deepest interior pixel of the view where the object
    /// is largest, like a user would place it.
    pub fn click_seed(&self, instance: u32) -> ObjectSeed {
        let best = self.rendered.iter().max_by_key(|r| instance_mask(&r.instances, instance).count()).unwrap();
        let gt = instance_mask(&best.instances, instance);
        let (u, v) = deepest_pixel(&gt);
        ObjectSeed {
            object_id: instance,
            view_id: best.view.view_id,
            prompts: PromptSet::from_points(vec![PointPrompt::positive(u, v)]),
        }
    }
}

pub fn deepest_pixel(mask: &MaskBits) -> (f64, f64) {
    let d = distance_map(mask);
    let i = (0..d.data.len()).max_by(|a, b| d.data[*a].total_cmp(&d.data[*b]).then(b.cmp(a))).unwrap();
    ((i as u32 % d.width) as f64, (i as u32 / d.width) as f64)
}

pub fn centroid(mask: &MaskBits) -> (f64, f64) {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for (x, y) in mask.iter_set() {
        sx += x as f64;
        sy += y as f64;
        n += 1.0;
    }
    (sx / n, sy / n)
}

/// Weighted silhouette centroid from a per-pixel opacity image.
pub fn alpha_centroid(alpha: &[f32], width: u32) -> (f64, f64) {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for (i, a) in alpha.iter().enumerate() {
        let a = *a as f64;
        sx += a * (i as u32 % width) as f64;
        sy += a * (i as u32 / width) as f64;
        n += a;
    }
    (sx / n, sy / n)
}
