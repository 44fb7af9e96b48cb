use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EditError;
use crate::field::{uniform_samples, Aabb, RadianceField, Sample, VoxelField};
use crate::scalar::Scalar;
use crate::scene::{Mat3, Mask, Ray, Vec3};

/// Affine recoloring `c' = clamp(M·c + b, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorMap {
    pub matrix: [[f64; 3]; 3],
    pub offset: [f64; 3],
}

impl Default for ColorMap {
    fn default() -> Self {
        Self { matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], offset: [0.0; 3] }
    }
}

impl ColorMap {
    pub fn apply<T: Scalar>(&self, c: [T; 3]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for (i, o) in out.iter_mut().enumerate() {
            let v = (0..3).fold(T::lit(self.offset[i]), |acc, j| acc + T::lit(self.matrix[i][j]) * c[j]);
            *o = v.max(T::zero()).min(T::one());
        }
        out
    }
}

/// Places an object field in the world: `x_world = s·R·x_obj + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3<f64>,
    pub translation: Vec3<f64>,
    pub scale: f64,
    pub color: ColorMap,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zero(), scale: 1.0, color: ColorMap::default() }
    }
}

impl RigidTransform {
    pub fn new(rotation: Mat3<f64>, translation: Vec3<f64>, scale: f64, color: ColorMap) -> Result<Self, EditError> {
        if !rotation.is_rotation(1e-6) {
            return Err(EditError::DegenerateTransform("rotation is not orthonormal".into()));
        }
        if !(scale.is_finite() && scale > 0.0) || !translation.is_finite() {
            return Err(EditError::DegenerateTransform(format!("scale {scale}, translation {translation:?}")));
        }
        Ok(Self { rotation, translation, scale, color })
    }

    pub fn translation(t: Vec3<f64>) -> Self {
        Self { translation: t, ..Self::default() }
    }

    pub fn apply(&self, p: Vec3<f64>) -> Vec3<f64> {
        self.rotation.mul_vec(p) * self.scale + self.translation
    }

    pub fn to_object(&self, p: Vec3<f64>) -> Vec3<f64> {
        self.rotation.transpose().mul_vec(p - self.translation) * (1.0 / self.scale)
    }

    /// World-space box around the transformed object box.
    pub fn world_bounds(&self, b: &Aabb<f64>) -> Aabb<f64> {
        let mut lo = Vec3::splat(f64::INFINITY);
        let mut hi = Vec3::splat(f64::NEG_INFINITY);
        for c in 0..8 {
            let corner = Vec3::new(
                if c & 1 == 0 { b.min.x } else { b.max.x },
                if c & 2 == 0 { b.min.y } else { b.max.y },
                if c & 4 == 0 { b.min.z } else { b.max.z },
            );
            let w = self.apply(corner);
            lo = lo.min(w);
            hi = hi.max(w);
        }
        Aabb { min: lo, max: hi }
    }
}

/// Background plus a transformed object, rendered as one medium: densities
/// add and colors blend by density. Each part is sampled over its own box so
/// an empty object leaves the background render untouched.
pub struct Composite<'a, T> {
    pub background: Option<&'a VoxelField<T>>,
    pub object: &'a VoxelField<T>,
    pub transform: RigidTransform,
    object_world: Aabb<T>,
    bounds: Aabb<T>,
}

impl<'a, T: Scalar> Composite<'a, T> {
    pub fn new(background: Option<&'a VoxelField<T>>, object: &'a VoxelField<T>, transform: RigidTransform) -> Self {
        let object_world = transform.world_bounds(&object.aabb.cast()).cast::<T>();
        let bounds = background.map_or(object_world, |b| b.aabb.union(&object_world));
        Self { background, object, transform, object_world, bounds }
    }

    pub fn object_bounds(&self) -> Aabb<T> {
        self.object_world
    }

    fn object_query(&self, p: Vec3<T>, dir: Vec3<T>) -> (T, [T; 3]) {
        let q = self.transform.to_object(p.cast()).cast::<T>();
        let d = self.transform.rotation.transpose().mul_vec(dir.cast()).cast::<T>();
        let (sigma, c) = self.object.query(q, d);
        (sigma / T::lit(self.transform.scale), self.transform.color.apply(c))
    }

    fn object_samples(&self, ray: &Ray<T>, n: usize, out: &mut Vec<Sample<T>>) {
        let s = T::lit(self.transform.scale);
        let rt = self.transform.rotation.transpose().cast::<T>();
        let local = Ray {
            origin: self.transform.to_object(ray.origin.cast()).cast::<T>(),
            direction: rt.mul_vec(ray.direction),
            near: ray.near / s,
            far: ray.far / s,
        };
        let start = out.len();
        self.object.ray_samples(&local, n, out);
        for smp in &mut out[start..] {
            smp.t *= s;
            smp.delta *= s;
            smp.sigma /= s;
            smp.color = self.transform.color.apply(smp.color);
        }
    }
}

impl<T: Scalar> RadianceField<T> for Composite<'_, T> {
    fn bounds(&self) -> Aabb<T> {
        self.bounds
    }

    fn query(&self, p: Vec3<T>, dir: Vec3<T>) -> (T, [T; 3]) {
        let (sb, cb) = self.background.map_or((T::zero(), [T::zero(); 3]), |b| b.query(p, dir));
        let (so, co) = self.object_query(p, dir);
        let sigma = sb + so;
        if sigma <= T::zero() {
            return (T::zero(), cb);
        }
        let mut c = [T::zero(); 3];
        for i in 0..3 {
            c[i] = (sb * cb[i] + so * co[i]) / sigma;
        }
        (sigma, c)
    }

    fn ray_samples(&self, ray: &Ray<T>, n: usize, out: &mut Vec<Sample<T>>) {
        let mut bg = Vec::with_capacity(n);
        if let Some(b) = self.background {
            uniform_samples(b, ray, n, &mut bg);
        }
        let mut obj = Vec::with_capacity(n);
        self.object_samples(ray, n, &mut obj);
        let (mut i, mut j) = (0, 0);
        while i < bg.len() || j < obj.len() {
            if j >= obj.len() || (i < bg.len() && bg[i].t <= obj[j].t) {
                out.push(bg[i]);
                i += 1;
            } else {
                out.push(obj[j]);
                j += 1;
            }
        }
    }
}

/// Training masks for the background with the object cut out: accepted masks
/// are inverted, the rest pass through untouched.
pub fn removal_masks(masks: &BTreeMap<u32, Mask>) -> BTreeMap<u32, Mask> {
    masks
        .iter()
        .map(|(id, m)| {
            let mut m = m.clone();
            if m.is_accepted() {
                m.bits = m.bits.complement();
            }
            (*id, m)
        })
        .collect()
}

/// JSON edit description consumed by the command line editor. Paths are
/// relative to the script's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditScript {
    pub background_ckpt: Option<PathBuf>,
    pub object_ckpt: PathBuf,
    /// Rotation vector (axis times angle in radians).
    #[serde(default)]
    pub rotation: [f64; 3],
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub color_map: ColorMap,
}

fn one() -> f64 {
    1.0
}

impl EditScript {
    pub fn transform(&self) -> Result<RigidTransform, EditError> {
        RigidTransform::new(
            Mat3::from_rotation_vector(Vec3::from_array(self.rotation)),
            Vec3::from_array(self.translation),
            self.scale,
            self.color_map,
        )
    }

    pub fn resolve(&self, base: &Path) -> (Option<PathBuf>, PathBuf) {
        (self.background_ckpt.as_ref().map(|p| base.join(p)), base.join(&self.object_ckpt))
    }
}
