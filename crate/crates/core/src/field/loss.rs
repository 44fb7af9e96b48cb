use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::render::OPACITY_EPS;
use super::voxel::{sample_positions, Stencil, VoxelField};
use crate::scalar::{sigmoid, softplus, Scalar};
use crate::scene::Ray;

/// Supervised rays. `depth` holds the target ray parameter where known.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RayBatch<T> {
    pub rays: Vec<Ray<T>>,
    pub target: Vec<[T; 3]>,
    pub depth: Vec<Option<T>>,
    pub weight: Vec<T>,
}

impl<T: Scalar> RayBatch<T> {
    pub fn push(&mut self, ray: Ray<T>, target: [T; 3], depth: Option<T>) {
        self.rays.push(ray);
        self.target.push(target);
        self.depth.push(depth);
        self.weight.push(T::one());
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            rays: keep.iter().map(|i| self.rays[*i]).collect(),
            target: keep.iter().map(|i| self.target[*i]).collect(),
            depth: keep.iter().map(|i| self.depth[*i]).collect(),
            weight: keep.iter().map(|i| self.weight[*i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig<T> {
    pub lambda_d: T,
    pub n_samples: usize,
    /// Stratified jitter of sample positions, seeded per ray; midpoints when `None`.
    pub jitter_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    pub total: T,
    pub l_rgb: T,
    pub l_depth: T,
    pub grad_density: Vec<T>,
    pub grad_color: Vec<T>,
}

struct SampleState<T> {
    stencil: Stencil<T>,
    t: T,
    delta: T,
    dsoftplus: T,
    color: [T; 3],
    trans_after: T,
    w: T,
}

struct Contribution<T> {
    stencil: Stencil<T>,
    d_density: T,
    d_color: [T; 3],
}

struct ChunkOut<T> {
    rgb: T,
    depth: T,
    contributions: Vec<Contribution<T>>,
}

/// Mixes a training seed with a ray index into an independent stream seed.
pub fn ray_seed(seed: u64, ray: u64) -> u64 {
    let mut z = seed ^ ray.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn forward_ray<T: Scalar>(
    field: &VoxelField<T>,
    ray: &Ray<T>,
    cfg: &LossConfig<T>,
    ray_index: usize,
    states: &mut Vec<SampleState<T>>,
) -> ([T; 3], T, T) {
    states.clear();
    let mut color = [T::zero(); 3];
    let (mut wt, mut opacity) = (T::zero(), T::zero());
    let Some((near, delta)) = sample_positions(&field.aabb, ray, cfg.n_samples) else {
        return (color, T::zero(), T::zero());
    };
    let mut rng = cfg.jitter_seed.map(|s| ChaCha8Rng::seed_from_u64(ray_seed(s, ray_index as u64)));
    let mut trans = T::one();
    for j in 0..cfg.n_samples {
        let u = match rng.as_mut() {
            Some(r) => T::lit(r.gen::<f64>()),
            None => T::lit(0.5),
        };
        let t = near + (T::lit(j as f64) + u) * delta;
        let Some(stencil) = field.stencil(ray.at(t)) else { continue };
        let (raw_d, raw_c) = field.interpolate(&stencil);
        let sigma = softplus(raw_d);
        let c = raw_c.map(sigmoid);
        let alpha = T::one() - (-sigma * delta).exp();
        let w = trans * alpha;
        trans *= T::one() - alpha ;
        for k in 0..3 {
            color[k] += w * c[k];
        }
        wt += w * t;
        opacity += w;
        states.push(SampleState { stencil, t, delta, dsoftplus: sigmoid(raw_d), color: c, trans_after: trans, w });
    }
    let depth = wt / opacity.max(T::lit(OPACITY_EPS));
    (color, depth, opacity)
}

/// Weighted mean color loss over all rays plus `lambda_d` times the weighted
/// mean depth loss over depth-bearing rays, with exact gradients with respect
/// to the pre-activation grids.
pub fn loss<T: Scalar>(field: &VoxelField<T>, batch: &RayBatch<T>, cfg: &LossConfig<T>) -> LossOutput<T> {
    let w_rgb: T = batch.weight.iter().copied().sum();
    let w_depth: T = batch.weight.iter().zip(&batch.depth).filter(|(_, d)| d.is_some()).map(|(w, _)| *w).sum();
    let eps = T::lit(OPACITY_EPS);
    const CHUNK: usize = 256;
    let chunks: Vec<ChunkOut<T>> = (0..batch.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut out = ChunkOut { rgb: T::zero(), depth: T::zero(), contributions: Vec::new() };
            let mut states = Vec::with_capacity(cfg.n_samples);
            let mut g = Vec::with_capacity(cfg.n_samples);
            for &r in idx {
                let (color, depth, opacity) = forward_ray(field, &batch.rays[r], cfg, r, &mut states);
                let wr = batch.weight[r];
                let mut d_color = [T::zero(); 3];
                for k in 0..3 {
                    let e = color[k] - batch.target[r][k];
                    out.rgb += wr * e * e;
                    if w_rgb > T::zero() {
                        d_color[k] = T::lit(2.0) * wr * e / w_rgb;
                    }
                }
                let mut d_depth = T::zero();
                if let Some(target) = batch.depth[r] {
                    let e = depth - target;
                    out.depth += wr * e * e;
                    if w_depth > T::zero() {
                        d_depth = cfg.lambda_d * T::lit(2.0) * wr * e / w_depth;
                    }
                }
                let m = opacity.max(eps);
                let clamped = if opacity > eps { T::one() } else { T::zero() };
                g.clear();
                for s in &states {
                    let dw = d_color[0] * s.color[0]
                        + d_color[1] * s.color[1]
                        + d_color[2] * s.color[2]
                        + d_depth * (s.t - clamped * depth) / m;
                    g.push(dw);
                }
                // suffix = Σ_{k>j} g_k w_k
                let mut suffix = T::zero();
                for (s, gj) in states.iter().zip(&g).rev() {
                    let d_sigma = s.delta * (*gj * s.trans_after - suffix);
                    suffix += *gj * s.w;
                    let mut dc = [T::zero(); 3];
                    for k in 0..3 {
                        dc[k] = s.w * d_color[k] * s.color[k] * (T::one() - s.color[k]);
                    }
                    out.contributions.push(Contribution { stencil: s.stencil, d_density: d_sigma * s.dsoftplus, d_color: dc });
                }
            }
            out
        })
        .collect();
    let mut grad_density = vec![T::zero(); field.density.len()];
    let mut grad_color = vec![T::zero(); field.color.len()];
    let (mut rgb, mut depth) = (T::zero(), T::zero());
    for ch in &chunks {
        rgb += ch.rgb;
        depth += ch.depth;
        for c in &ch.contributions {
            for (i, w) in c.stencil.index.iter().zip(&c.stencil.weight) {
                let i = *i as usize;
                grad_density[i] += *w * c.d_density;
                grad_color[3 * i] += *w * c.d_color[0];
                grad_color[3 * i + 1] += *w * c.d_color[1];
                grad_color[3 * i + 2] += *w * c.d_color[2];
            }
        }
    }
    let l_rgb = if w_rgb > T::zero() { rgb / w_rgb } else { T::zero() };
    let l_depth = if w_depth > T::zero() { depth / w_depth } else { T::zero() };
    LossOutput { total: l_rgb + cfg.lambda_d * l_depth, l_rgb, l_depth, grad_density, grad_color }
}
