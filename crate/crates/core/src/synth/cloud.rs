use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::scene::{Background, SceneObject, SceneSpec, Shape};
use super::SynthError;
use crate::colmap::{Feature, Point3D, SparseCloud, TrackEntry};
use crate::scene::{project_point, Vec3, ViewImage};

/// Visibility tolerance between the traced hit and the sampled point.
pub const VISIBILITY_TOL: f64 = 1e-3;

/// Fabricated reconstruction plus the ground-truth instance of every point.
#[derive(Debug, Clone)]
pub struct FabricatedCloud {
    pub cloud: SparseCloud,
    pub instance_of: BTreeMap<u64, u32>,
}

impl FabricatedCloud {
    pub fn points_of(&self, instance_id: u32) -> impl Iterator<Item = u64> + '_ {
        self.instance_of.iter().filter(move |(_, i)| **i == instance_id).map(|(p, _)| *p)
    }
}

fn sample_box_surface(rng: &mut ChaCha8Rng, lo: Vec3<f64>, hi: Vec3<f64>) -> Vec3<f64> {
    let e = hi - lo;
    let areas = [e.y * e.z, e.y * e.z, e.x * e.z, e.x * e.z, e.x * e.y, e.x * e.y];
    let total: f64 = areas.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    let mut face = 5;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            face = i;
            break;
        }
        pick -= a;
    }
    let axis = face / 2;
    let mut p = [0.0; 3];
    for (i, v) in p.iter_mut().enumerate() {
        *v = if i == axis {
            if face % 2 == 0 { lo[i] } else { hi[i] }
        } else {
            lo[i] + rng.gen::<f64>() * e[i]
        };
    }
    Vec3::from_array(p)
}

fn sample_object(rng: &mut ChaCha8Rng, obj: &SceneObject) -> Vec3<f64> {
    match obj.shape {
        Shape::Sphere { radius } => {
            let v = Vec3::new(
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            );
            obj.center() + v.normalized() * radius
        }
        Shape::Cuboid { .. } => {
            let (lo, hi) = obj.bounds();
            sample_box_surface(rng, lo, hi)
        }
    }
}

/// Samples surface points, tracks each into every view that sees it unoccluded
/// (traced hit within [`VISIBILITY_TOL`] of the point), perturbs feature
/// coordinates by Gaussian noise of `noise_px` pixels and drops points seen by
/// fewer than two views. With a background present, half of the samples land
/// on it; object samples are split by surface area.
pub fn fabricate_sparse_cloud(
    spec: &SceneSpec,
    views: &[ViewImage],
    n_points: usize,
    noise_px: f64,
    seed: u64,
) -> Result<FabricatedCloud, SynthError> {
    if n_points == 0 {
        return Err(SynthError::InvalidSpec("n_points must be positive".into()));
    }
    let noise = Normal::new(0.0, noise_px.max(0.0)).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let room = match spec.background {
        Background::RoomBox { min, max, albedo } => Some((Vec3::from_array(min), Vec3::from_array(max), albedo)),
        Background::None => None,
    };
    let n_bg = if room.is_some() { if spec.objects.is_empty() { n_points } else { n_points / 2 } } else { 0 };
    let n_obj = n_points - n_bg;
    let total_area: f64 = spec.objects.iter().map(SceneObject::surface_area).sum();

    let mut samples: Vec<(Vec3<f64>, u32, [f64; 3])> = Vec::with_capacity(n_points);
    if let Some((lo, hi, albedo)) = room {
        for _ in 0..n_bg {
            samples.push((sample_box_surface(&mut rng, lo, hi), 0, albedo));
        }
    }
    for _ in 0..n_obj {
        let mut pick = rng.gen::<f64>() * total_area;
        let obj = spec
            .objects
            .iter()
            .find(|o| {
                let a = o.surface_area();
                if pick < a {
                    true
                } else {
                    pick -= a;
                    false
                }
            })
            .or(spec.objects.last());
        if let Some(obj) = obj {
            samples.push((sample_object(&mut rng, obj), obj.instance_id, obj.albedo));
        }
    }

    let mut cloud = SparseCloud::default();
    for v in views {
        cloud.features.insert(v.view_id, Vec::new());
    }
    let mut instance_of = BTreeMap::new();
    let mut next_id = 1u64;
    for (p, instance, albedo) in samples {
        let mut obs: Vec<(u32, f64, f64)> = Vec::new();
        for v in views {
            let Some(proj) = project_point(p, &v.intrinsics, &v.pose) else { continue };
            let c = v.pose.center();
            let dist = (p - c).norm();
            let visible = spec.trace(c, (p - c) * (1.0 / dist)).is_some_and(|h| (h.t - dist).abs() <= VISIBILITY_TOL);
            if !visible {
                continue;
            }
            let (u, w) = if noise_px > 0.0 {
                (proj.u + noise.sample(&mut rng), proj.v + noise.sample(&mut rng))
            } else {
                (proj.u, proj.v)
            };
            if v.intrinsics.contains(u, w) {
                obs.push((v.view_id, u, w));
            }
        }
        if obs.len() < 2 {
            continue;
        }
        let id = next_id;
        next_id += 1;
        let mut track = Vec::with_capacity(obs.len());
        for (view_id, u, v) in obs {
            let feats = cloud.features.entry(view_id).or_default();
            track.push(TrackEntry { view_id, feature_index: feats.len() as u32 });
            feats.push(Feature { u, v, point_id: Some(id) });
        }
        cloud.points.insert(
            id,
            Point3D { xyz: p, rgb: albedo.map(|a| (a.clamp(0.0, 1.0) * 255.0).round() as u8), error: 0.0, track },
        );
        instance_of.insert(id, instance);
    }
    Ok(FabricatedCloud { cloud, instance_of })
}
