use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::scene::{CameraIntrinsics, CameraPose, Vec3};

const HIT_EPS: f64 = 1e-9;
const AMBIENT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius: f64 },
    /// Axis-aligned box with full edge lengths `size`.
    Cuboid { size: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape: Shape,
    pub center: [f64; 3],
    pub albedo: [f64; 3],
    pub instance_id: u32,
}

impl SceneObject {
    pub fn sphere(center: [f64; 3], radius: f64, albedo: [f64; 3], instance_id: u32) -> Self {
        Self { shape: Shape::Sphere { radius }, center, albedo, instance_id }
    }

    pub fn cuboid(center: [f64; 3], size: [f64; 3], albedo: [f64; 3], instance_id: u32) -> Self {
        Self { shape: Shape::Cuboid { size }, center, albedo, instance_id }
    }

    pub fn center(&self) -> Vec3<f64> {
        Vec3::from_array(self.center)
    }

    /// World-space bounds.
    pub fn bounds(&self) -> (Vec3<f64>, Vec3<f64>) {
        let c = self.center();
        let h = match self.shape {
            Shape::Sphere { radius } => Vec3::splat(radius),
            Shape::Cuboid { size } => Vec3::from_array(size) * 0.5,
        };
        (c - h, c + h)
    }

    pub fn contains(&self, p: Vec3<f64>) -> bool {
        match self.shape {
            Shape::Sphere { radius } => (p - self.center()).norm() <= radius,
            Shape::Cuboid { .. } => {
                let (lo, hi) = self.bounds();
                (0..3).all(|i| p[i] >= lo[i] && p[i] <= hi[i])
            }
        }
    }

    pub fn surface_area(&self) -> f64 {
        match self.shape {
            Shape::Sphere { radius } => 4.0 * std::f64::consts::PI * radius * radius,
            Shape::Cuboid { size: [a, b, c] } => 2.0 * (a * b + b * c + a * c),
        }
    }

    /// Nearest intersection with `t > eps`: `(t, outward normal)`.
    fn intersect(&self, o: Vec3<f64>, d: Vec3<f64>) -> Option<(f64, Vec3<f64>)> {
        match self.shape {
            Shape::Sphere { radius } => {
                let oc = o - self.center();
                let b = oc.dot(d);
                let c = oc.dot(oc) - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = [-b - sq, -b + sq].into_iter().find(|t| *t > HIT_EPS)?;
                Some((t, (o + d * t - self.center()) * (1.0 / radius)))
            }
            Shape::Cuboid { .. } => {
                let (lo, hi) = self.bounds();
                let (t0, t1, axis0, axis1) = slab(o, d, lo, hi)?;
                let (t, axis) = if t0 > HIT_EPS {
                    (t0, axis0)
                } else if t1 > HIT_EPS {
                    (t1, axis1)
                } else {
                    return None;
                };
                let p = o + d * t;
                let mut n = [0.0; 3];
                n[axis] = if (p[axis] - hi[axis]).abs() < (p[axis] - lo[axis]).abs() { 1.0 } else { -1.0 };
                Some((t, Vec3::from_array(n)))
            }
        }
    }
}

/// Slab test returning entry/exit distances and the axes that bound them.
pub(crate) fn slab(
    o: Vec3<f64>,
    d: Vec3<f64>,
    lo: Vec3<f64>,
    hi: Vec3<f64>,
) -> Option<(f64, f64, usize, usize)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    let (mut a0, mut a1) = (0, 0);
    for i in 0..3 {
        if d[i] == 0.0 {
            if o[i] < lo[i] || o[i] > hi[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[i];
        let (mut ta, mut tb) = ((lo[i] - o[i]) * inv, (hi[i] - o[i]) * inv);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        if ta > t0 {
            t0 = ta;
            a0 = i;
        }
        if tb < t1 {
            t1 = tb;
            a1 = i;
        }
    }
    (t0 <= t1).then_some((t0, t1, a0, a1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Background {
    None,
    /// Closed room seen from inside; it renders as background (instance 0).
    RoomBox { min: [f64; 3], max: [f64; 3], albedo: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<SceneObject>,
    pub background: Background,
    pub intrinsics: CameraIntrinsics<f64>,
    pub cameras: Vec<CameraPose<f64>>,
    /// Unit vector pointing from surfaces toward the light.
    pub light: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub normal: Vec3<f64>,
    /// 0 for background.
    pub instance_id: u32,
    pub albedo: [f64; 3],
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if o.instance_id == 0 || !ids.insert(o.instance_id) {
                return Err(SynthError::InvalidSpec(format!(
                    "instance id {} must be unique and positive",
                    o.instance_id
                )));
            }
        }
        self.intrinsics.validate()?;
        for (i, c) in self.cameras.iter().enumerate() {
            let eye = c.center();
            if self.objects.iter().any(|o| o.contains(eye)) {
                return Err(SynthError::InvalidSpec(format!("camera {i} is inside an object")));
            }
        }
        if (Vec3::from_array(self.light).norm() - 1.0).abs() > 1e-6 {
            return Err(SynthError::InvalidSpec("light must be a unit vector".into()));
        }
        Ok(())
    }

    /// Same scene without the object `instance_id`.
    pub fn without(&self, instance_id: u32) -> SceneSpec {
        SceneSpec {
            objects: self.objects.iter().filter(|o| o.instance_id != instance_id).copied().collect(),
            ..self.clone()
        }
    }

    pub fn object(&self, instance_id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.instance_id == instance_id)
    }

    /// Nearest surface hit along a unit direction.
    pub fn trace(&self, o: Vec3<f64>, d: Vec3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for obj in &self.objects {
            if let Some((t, normal)) = obj.intersect(o, d) {
                if best.is_none_or(|b| t < b.t) {
                    best = Some(Hit { t, normal, instance_id: obj.instance_id, albedo: obj.albedo });
                }
            }
        }
        if let Background::RoomBox { min, max, albedo } = self.background {
            let (lo, hi) = (Vec3::from_array(min), Vec3::from_array(max));
            if let Some((_, t1, _, axis)) = slab(o, d, lo, hi) {
                if t1 > HIT_EPS && best.is_none_or(|b| t1 < b.t) {
                    let p = o + d * t1;
                    let mut n = [0.0; 3];
                    n[axis] = if (p[axis] - hi[axis]).abs() < (p[axis] - lo[axis]).abs() { -1.0 } else { 1.0 };
                    best = Some(Hit { t: t1, normal: Vec3::from_array(n), instance_id: 0, albedo });
                }
            }
        }
        best
    }

    /// Lambertian shading with a single directional light plus ambient term.
    pub fn shade(&self, hit: &Hit) -> [f32; 3] {
        let l = Vec3::from_array(self.light);
        let lambert = hit.normal.dot(l).max(0.0);
        let k = AMBIENT + (1.0 - AMBIENT) * lambert;
        hit.albedo.map(|a| (a * k).clamp(0.0, 1.0) as f32)
    }
}
