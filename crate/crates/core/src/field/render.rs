use rayon::prelude::*;

use super::voxel::{RadianceField, Sample};
use crate::scalar::Scalar;
use crate::scene::{pixel_direction, CameraIntrinsics, CameraPose, DepthImage, Ray, RgbImage, ViewImage};

/// Accumulated opacity below which depth is not normalized further.
pub const OPACITY_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayRender<T> {
    pub color: [T; 3],
    /// Expected ray parameter of termination, normalized by opacity.
    pub depth: T,
    pub opacity: T,
}

/// Alpha-composites samples front to back over a black background.
pub fn composite<T: Scalar>(samples: &[Sample<T>]) -> RayRender<T> {
    let mut trans = T::one();
    let mut color = [T::zero(); 3];
    let mut weighted_t = T::zero();
    let mut opacity = T::zero();
    for s in samples {
        let alpha = T::one() - (-s.sigma * s.delta).exp();
        let w = trans * alpha;
        for c in 0..3 {
            color[c] += w * s.color[c];
        }
        weighted_t += w * s.t;
        opacity += w;
        trans *= T::one() - alpha ;
    }
    let depth = weighted_t / opacity.max(T::lit(OPACITY_EPS));
    RayRender { color, depth, opacity }
}

/// Renders one ray with `n_samples` midpoint samples over its intersection
/// with the field's bounds. A ray that misses renders transparent black.
pub fn render_ray<T: Scalar, F: RadianceField<T> + ?Sized>(field: &F, ray: &Ray<T>, n_samples: usize) -> RayRender<T> {
    let mut samples = Vec::with_capacity(n_samples);
    field.ray_samples(ray, n_samples, &mut samples);
    composite(&samples)
}

/// Rendered image plus per-pixel opacity.
#[derive(Debug, Clone)]
pub struct FieldRender {
    pub view: ViewImage,
    pub alpha: Vec<f32>,
}

/// Renders every pixel center. Depth is stored along the optical axis like
/// ground-truth depth maps; transparent pixels get depth 0.
pub fn render_view<T: Scalar, F: RadianceField<T> + ?Sized>(
    field: &F,
    intrinsics: &CameraIntrinsics<f64>,
    pose: &CameraPose<f64>,
    view_id: u32,
    n_samples: usize,
    near: f64,
) -> FieldRender {
    let (w, h) = (intrinsics.width, intrinsics.height);
    let forward = pose.forward();
    let center = pose.center();
    let rows: Vec<Vec<([f32; 3], f32, f32)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut samples = Vec::with_capacity(n_samples);
            (0..w)
                .map(|x| {
                    let d = pixel_direction(x as f64, y as f64, intrinsics, pose);
                    let ray = Ray { origin: center.cast::<T>(), direction: d.cast::<T>(), near: T::lit(near), far: T::lit(1e30) };
                    samples.clear();
                    field.ray_samples(&ray, n_samples, &mut samples);
                    let r = composite(&samples);
                    let a = r.opacity.as_f64() as f32;
                    let z = if a > 0.0 { (r.depth.as_f64() * d.dot(forward)) as f32 } else { 0.0 };
                    (r.color.map(|c| c.as_f64() as f32), z, a)
                })
                .collect()
        })
        .collect();
    let mut rgb = RgbImage::filled(w, h, [0.0; 3]);
    let mut depth = DepthImage::zeros(w, h);
    let mut alpha = vec![0.0; (w * h) as usize];
    for (y, row) in rows.into_iter().enumerate() {
        for (x, (c, z, a)) in row.into_iter().enumerate() {
            let i = y * w as usize + x;
            rgb.data[i] = c;
            depth.data[i] = z;
            alpha[i] = a;
        }
    }
    let view = ViewImage { view_id, rgb, depth: Some(depth), intrinsics: *intrinsics, pose: *pose };
    FieldRender { view, alpha }
}

/// `10·log10(1 / MSE)` over all pixels and channels.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> f64 {
    let n = a.data.len().min(b.data.len()) * 3;
    let mse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(p, q)| (0..3).map(|c| (p[c] as f64 - q[c] as f64).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n.max(1) as f64;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (1.0 / mse).log10()
}
