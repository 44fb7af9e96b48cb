use std::path::Path;

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::selfprompt::distance::distance_transform;

/// Row-major binary raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskBits {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl MaskBits {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![false; (width * height) as usize] }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![true; (width * height) as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity((width * height) as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize]
    }

    /// Out-of-bounds coordinates read as `false`.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 && self.get(x as u32, y as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let i = (y * self.width + x) as usize;
        self.data[i] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|b| *b)
    }

    pub fn same_shape(&self, o: &Self) -> bool {
        self.width == o.width && self.height == o.height
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }

    pub fn intersection_count(&self, o: &Self) -> usize {
        self.data.iter().zip(&o.data).filter(|(a, b)| **a && **b).count()
    }

    pub fn union_count(&self, o: &Self) -> usize {
        self.data.iter().zip(&o.data).filter(|(a, b)| **a || **b).count()
    }

    pub fn complement(&self) -> Self {
        Self { width: self.width, height: self.height, data: self.data.iter().map(|b| !b).collect() }
    }

    pub fn union(&self, o: &Self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&o.data).map(|(a, b)| *a || *b).collect(),
        }
    }

    /// Keeps pixels whose Euclidean distance to the nearest outside pixel
    /// (image border counts as outside) exceeds `px`.
    pub fn eroded(&self, px: u32) -> Self {
        if px == 0 {
            return self.clone();
        }
        let dist = distance_transform(self);
        let limit = px as f32;
        Self {
            width: self.width,
            height: self.height,
            data: dist.iter().map(|d| *d > limit).collect(),
        }
    }

    /// Adds pixels within Euclidean distance `px` of the mask.
    pub fn dilated(&self, px: u32) -> Self {
        if px == 0 {
            return self.clone();
        }
        // distance from each background pixel to the nearest mask pixel
        let inv = self.complement();
        let dist = crate::selfprompt::distance::distance_transform_unbounded(&inv);
        let limit = px as f32;
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&dist).map(|(b, d)| *b || *d <= limit).collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), SceneError> {
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        });
        buf.save(path).map_err(|e| SceneError::image(path, e))
    }

    pub fn load_png(path: &Path) -> Result<Self, SceneError> {
        let img = image::open(path).map_err(|e| SceneError::image(path, e))?.to_luma8();
        let (w, h) = img.dimensions();
        Ok(Self { width: w, height: h, data: img.pixels().map(|p| p.0[0] >= 128).collect() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskStatus {
    Accepted,
    DiscardedOccluded,
    Unprocessed,
}

/// Object mask for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub view_id: u32,
    pub bits: MaskBits,
    pub score: f64,
    pub status: MaskStatus,
}

impl Mask {
    pub fn new(view_id: u32, bits: MaskBits, score: f64) -> Self {
        Self { view_id, bits, score: score.clamp(0.0, 1.0), status: MaskStatus::Accepted }
    }

    pub fn unprocessed(view_id: u32, width: u32, height: u32) -> Self {
        Self { view_id, bits: MaskBits::empty(width, height), score: 0.0, status: MaskStatus::Unprocessed }
    }

    pub fn is_accepted(&self) -> bool {
        self.status == MaskStatus::Accepted
    }
}

/// Intersection over union; `0` when both masks are empty.
pub fn mask_iou(a: &MaskBits, b: &MaskBits) -> Result<f64, SceneError> {
    if !a.same_shape(b) {
        return Err(SceneError::DimensionMismatch(format!(
            "masks {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let union = a.union_count(b);
    if union == 0 {
        return Ok(0.0);
    }
    Ok(a.intersection_count(b) as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erosion_shrinks_and_zero_is_identity() {
        let m = MaskBits::from_fn(20, 20, |x, y| (3..17).contains(&x) && (3..17).contains(&y));
        assert_eq!(m.eroded(0), m);
        let e = m.eroded(2);
        assert_eq!(e.count(), 10 * 10);
        assert!(e.iter_set().all(|(x, y)| m.get(x, y)));
    }

    #[test]
    fn dilation_grows() {
        let mut m = MaskBits::empty(9, 9);
        m.set(4, 4, true);
        let d = m.dilated(1);
        assert_eq!(d.count(), 5);
        assert_eq!(m.dilated(2).count(), 13);
    }

    #[test]
    fn complement_is_involution() {
        let m = MaskBits::from_fn(7, 5, |x, y| (x * 3 + y) % 4 == 0);
        assert_eq!(m.complement().complement(), m);
    }

    #[test]
    fn iou_cases() {
        let a = MaskBits::from_fn(10, 10, |x, _| x < 5);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &a.complement()).unwrap(), 0.0);
        let e = MaskBits::empty(10, 10);
        assert_eq!(mask_iou(&e, &e).unwrap(), 0.0);
        assert!(mask_iou(&a, &MaskBits::empty(9, 10)).is_err());
    }
}
