use serde::{Deserialize, Serialize};

use super::FieldError;
use crate::colmap::SparseCloud;
use crate::scalar::Scalar;
use crate::scene::{Ray, Vec3};

/// Axis-aligned box, closed on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Result<Self, FieldError> {
        let ok = (0..3).all(|i| min[i].is_finite() && max[i].is_finite() && min[i] < max[i]);
        if !ok {
            return Err(FieldError::DegenerateAabb(format!("min {min:?} max {max:?}")));
        }
        Ok(Self { min, max })
    }

    pub fn extent(&self) -> Vec3<T> {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn volume(&self) -> T {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn union(&self, o: &Self) -> Self {
        Self { min: self.min.min(o.min), max: self.max.max(o.max) }
    }

    /// Parameter interval where the line `origin + t·dir` is inside the box.
    pub fn intersect(&self, origin: Vec3<T>, dir: Vec3<T>) -> Option<(T, T)> {
        let mut t0 = T::neg_infinity();
        let mut t1 = T::infinity();
        for i in 0..3 {
            if dir[i] == T::zero() {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = T::one() / dir[i];
            let (mut a, mut b) = ((self.min[i] - origin[i]) * inv, (self.max[i] - origin[i]) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// The ray with its interval narrowed to the box; `None` if nothing is left.
    pub fn clip(&self, ray: &Ray<T>) -> Option<Ray<T>> {
        let (t0, t1) = self.intersect(ray.origin, ray.direction)?;
        let near = t0.max(ray.near);
        let far = t1.min(ray.far);
        (near < far).then(|| ray.with_interval(near, far))
    }

    pub fn cast<U: Scalar>(&self) -> Aabb<U> {
        Aabb { min: self.min.cast(), max: self.max.cast() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AabbConfig {
    /// Fraction of points dropped at each end of every axis.
    pub outlier_trim: f64,
    /// Padding on each side as a fraction of the trimmed extent.
    pub pad: f64,
}

impl Default for AabbConfig {
    fn default() -> Self {
        Self { outlier_trim: 0.01, pad: 0.1 }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Bounds of the object's points after trimming outliers per axis, padded.
pub fn object_aabb(cloud: &SparseCloud, cfg: &AabbConfig) -> Result<Aabb<f64>, FieldError> {
    if cloud.len() < 2 {
        return Err(FieldError::DegenerateAabb(format!("{} points", cloud.len())));
    }
    let mut lo = Vec3::zero();
    let mut hi = Vec3::zero();
    for axis in 0..3 {
        let mut v: Vec<f64> = cloud.points.values().map(|p| p.xyz[axis]).collect();
        v.sort_by(f64::total_cmp);
        let (a, b) = (quantile(&v, cfg.outlier_trim), quantile(&v, 1.0 - cfg.outlier_trim));
        let pad = (b - a) * cfg.pad;
        match axis {
            0 => (lo.x, hi.x) = (a - pad, b + pad),
            1 => (lo.y, hi.y) = (a - pad, b + pad),
            _ => (lo.z, hi.z) = (a - pad, b + pad),
        }
    }
    Aabb::new(lo, hi)
}
