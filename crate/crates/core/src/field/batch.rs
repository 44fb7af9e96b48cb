use std::collections::BTreeMap;
use std::marker::PhantomData;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::aabb::Aabb;
use super::loss::RayBatch;
use super::FieldError;
use crate::colmap::SparseCloud;
use crate::scalar::Scalar;
use crate::scene::{pixel_direction, Mask, Ray, Vec3, ViewImage};

/// Where depth targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DepthSupervision {
    None,
    /// Projected sparse points at their feature pixels.
    Sparse,
    /// Per-pixel depth maps.
    Dense,
    /// Dense when every training view has a depth map, else sparse.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub batch_rays: usize,
    /// Share of each batch drawn from outside the masks with a black target.
    pub out_of_mask_fraction: f64,
    pub depth: DepthSupervision,
    /// Share of each batch drawn from sparse depth rays in sparse mode.
    pub sparse_depth_fraction: f64,
    /// Rays never start closer to the camera than this.
    pub near: f64,
    pub far: f64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            batch_rays: 4096,
            out_of_mask_fraction: 0.25,
            depth: DepthSupervision::Auto,
            sparse_depth_fraction: 0.1,
            near: 0.05,
            far: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Supervised {
    ray: Ray<f64>,
    target: [f32; 3],
    depth: Option<f64>,
}

/// Endless stream of ray batches over the accepted views, every ray already
/// clipped to the box.
#[derive(Debug, Clone)]
pub struct BatchSampler<T> {
    in_mask: Vec<Supervised>,
    out_of_mask: Vec<Ray<f64>>,
    sparse: Vec<Supervised>,
    depth: DepthSupervision,
    cfg: BatchConfig,
    rng: ChaCha8Rng,
    _scalar: PhantomData<T>,
}

fn camera_ray(view: &ViewImage, u: f64, v: f64, cfg: &BatchConfig) -> Ray<f64> {
    Ray { origin: view.pose.center(), direction: pixel_direction(u, v, &view.intrinsics, &view.pose), near: cfg.near, far: cfg.far }
}

/// Converts depth along the optical axis into the ray parameter.
fn axial_to_t(z: f64, ray: &Ray<f64>, forward: Vec3<f64>) -> f64 {
    z / ray.direction.dot(forward)
}

pub fn accepted_views<'a>(views: &'a [ViewImage], masks: &'a BTreeMap<u32, Mask>) -> Vec<(&'a ViewImage, &'a Mask)> {
    views.iter().filter_map(|v| masks.get(&v.view_id).filter(|m| m.is_accepted()).map(|m| (v, m))).collect()
}

impl<T: Scalar> BatchSampler<T> {
    pub fn new(
        views: &[ViewImage],
        masks: &BTreeMap<u32, Mask>,
        cloud: &SparseCloud,
        aabb: &Aabb<f64>,
        cfg: &BatchConfig,
        seed: u64,
    ) -> Result<Self, FieldError> {
        let train = accepted_views(views, masks);
        if train.is_empty() {
            return Err(FieldError::NoAcceptedViews);
        }
        let depth = match cfg.depth {
            DepthSupervision::Auto if train.iter().all(|(v, _)| v.depth.is_some()) => DepthSupervision::Dense,
            DepthSupervision::Auto => DepthSupervision::Sparse,
            d => d,
        };
        let mut s = Self {
            in_mask: Vec::new(),
            out_of_mask: Vec::new(),
            sparse: Vec::new(),
            depth,
            cfg: cfg.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            _scalar: PhantomData,
        };
        for (view, mask) in &train {
            let forward = view.pose.forward();
            for y in 0..view.height() {
                for x in 0..view.width() {
                    let Some(ray) = aabb.clip(&camera_ray(view, x as f64, y as f64, cfg)) else { continue };
                    if mask.bits.get(x, y) {
                        let d = match (depth, &view.depth) {
                            (DepthSupervision::Dense, Some(dm)) if dm.get(x, y) > 0.0 => {
                                Some(axial_to_t(dm.get(x, y) as f64, &ray, forward))
                            }
                            _ => None,
                        };
                        s.in_mask.push(Supervised { ray, target: view.rgb.get(x, y), depth: d });
                    } else {
                        s.out_of_mask.push(ray);
                    }
                }
            }
            if depth == DepthSupervision::Sparse {
                for (pid, f) in cloud.observations(view.view_id) {
                    let (px, py) = (f.u.round(), f.v.round());
                    if px < 0.0 || py < 0.0 || px >= view.width() as f64 || py >= view.height() as f64 {
                        continue;
                    }
                    let (px, py) = (px as u32, py as u32);
                    if !mask.bits.get(px, py) {
                        continue;
                    }
                    let Some(ray) = aabb.clip(&camera_ray(view, f.u, f.v, cfg)) else { continue };
                    let z = view.pose.world_to_camera(cloud.points[&pid].xyz).z;
                    if z <= 0.0 {
                        continue;
                    }
                    let t = axial_to_t(z, &ray, forward);
                    s.sparse.push(Supervised { ray, target: view.rgb.get(px, py), depth: Some(t) });
                }
            }
        }
        if s.in_mask.is_empty() {
            return Err(FieldError::NoAcceptedViews);
        }
        Ok(s)
    }

    pub fn depth_mode(&self) -> DepthSupervision {
        self.depth
    }

    pub fn pool_sizes(&self) -> (usize, usize, usize) {
        (self.in_mask.len(), self.out_of_mask.len(), self.sparse.len())
    }

    fn push(batch: &mut RayBatch<T>, s: &Supervised) {
        batch.push(cast_ray(&s.ray), s.target.map(|c| T::lit(c as f64)), s.depth.map(T::lit));
    }

    pub fn next_batch(&mut self) -> RayBatch<T> {
        let n = self.cfg.batch_rays;
        let n_out = if self.out_of_mask.is_empty() { 0 } else { (n as f64 * self.cfg.out_of_mask_fraction).round() as usize };
        let n_sparse = if self.sparse.is_empty() { 0 } else { (n as f64 * self.cfg.sparse_depth_fraction).round() as usize };
        let n_in = n.saturating_sub(n_out + n_sparse);
        let mut batch = RayBatch::default();
        for _ in 0..n_in {
            let i = self.rng.gen_range(0..self.in_mask.len());
            Self::push(&mut batch, &self.in_mask[i]);
        }
        for _ in 0..n_out {
            let i = self.rng.gen_range(0..self.out_of_mask.len());
            batch.push(cast_ray(&self.out_of_mask[i]), [T::zero(); 3], None);
        }
        for _ in 0..n_sparse {
            let i = self.rng.gen_range(0..self.sparse.len());
            Self::push(&mut batch, &self.sparse[i]);
        }
        batch
    }
}

impl<T: Scalar> Iterator for BatchSampler<T> {
    type Item = RayBatch<T>;

    fn next(&mut self) -> Option<RayBatch<T>> {
        Some(self.next_batch())
    }
}

fn cast_ray<T: Scalar>(r: &Ray<f64>) -> Ray<T> {
    Ray { origin: r.origin.cast(), direction: r.direction.cast(), near: T::lit(r.near), far: T::lit(r.far) }
}

/// Keeps the rays that intersect the box, with intervals clipped to it.
pub fn prune_rays<T: Scalar>(batch: &RayBatch<T>, aabb: &Aabb<T>) -> RayBatch<T> {
    let mut out = RayBatch::default();
    for i in 0..batch.len() {
        if let Some(r) = aabb.clip(&batch.rays[i]) {
            out.rays.push(r);
            out.target.push(batch.target[i]);
            out.depth.push(batch.depth[i]);
            out.weight.push(batch.weight[i]);
        }
    }
    out
}
