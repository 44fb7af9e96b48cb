use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use super::camera::{CameraIntrinsics, CameraPose};
use super::SceneError;

/// Linear RGB image with channels in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[f32; 3]>,
}

impl RgbImage {
    pub fn filled(width: u32, height: u32, value: [f32; 3]) -> Self {
        Self { width, height, data: vec![value; (width * height) as usize] }
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [f32; 3] {
        self.data[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, v: [f32; 3]) {
        let i = self.index(x, y);
        self.data[i] = v;
    }

    pub fn save_png(&self, path: &Path) -> Result<(), SceneError> {
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_fn(self.width, self.height, |x, y| {
            Rgb(self.get(x, y).map(to_u8))
        });
        buf.save(path).map_err(|e| SceneError::image(path, e))
    }

    pub fn load_png(path: &Path) -> Result<Self, SceneError> {
        let img = image::open(path).map_err(|e| SceneError::image(path, e))?.to_rgb8();
        let (w, h) = img.dimensions();
        let data = img.pixels().map(|p| p.0.map(|c| c as f32 / 255.0)).collect();
        Ok(Self { width: w, height: h, data })
    }
}

pub(crate) fn to_u8(c: f32) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Depth along the optical axis in scene units; `0` marks a missing sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0.0; (width * height) as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[(y * self.width + x) as usize]
    }

    /// 16-bit PNG in millimeters; `scale` converts one millimeter to scene units.
    pub fn save_png_mm(&self, path: &Path, scale: f64) -> Result<(), SceneError> {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(self.width, self.height, |x, y| {
            let mm = (self.get(x, y) as f64 / scale).round();
            Luma([mm.clamp(0.0, u16::MAX as f64) as u16])
        });
        buf.save(path).map_err(|e| SceneError::image(path, e))
    }

    pub fn load_png_mm(path: &Path, scale: f64) -> Result<Self, SceneError> {
        let img = image::open(path).map_err(|e| SceneError::image(path, e))?.to_luma16();
        let (w, h) = img.dimensions();
        let data = img.pixels().map(|p| (p.0[0] as f64 * scale) as f32).collect();
        Ok(Self { width: w, height: h, data })
    }
}

/// Per-pixel integer instance labels; `0` is background.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMap {
    pub width: u32,
    pub height: u32,
    pub ids: Vec<u32>,
}

impl InstanceMap {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self { width, height, ids: vec![0; (width * height) as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.ids[(y * self.width + x) as usize]
    }

    pub fn save_png(&self, path: &Path) -> Result<(), SceneError> {
        if let Some(id) = self.ids.iter().find(|&&id| id > 255) {
            return Err(SceneError::Io {
                path: path.display().to_string(),
                message: format!("instance id {id} does not fit an 8-bit map"),
            });
        }
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_fn(self.width, self.height, |x, y| Luma([self.get(x, y) as u8]));
        buf.save(path).map_err(|e| SceneError::image(path, e))
    }

    pub fn load_png(path: &Path) -> Result<Self, SceneError> {
        let img = image::open(path).map_err(|e| SceneError::image(path, e))?.to_luma8();
        let (w, h) = img.dimensions();
        Ok(Self { width: w, height: h, ids: img.pixels().map(|p| p.0[0] as u32).collect() })
    }
}

/// One calibrated input view.
#[derive(Debug, Clone)]
pub struct ViewImage {
    pub view_id: u32,
    pub rgb: RgbImage,
    pub depth: Option<DepthImage>,
    pub intrinsics: CameraIntrinsics<f64>,
    pub pose: CameraPose<f64>,
}

impl ViewImage {
    pub fn new(
        view_id: u32,
        rgb: RgbImage,
        depth: Option<DepthImage>,
        intrinsics: CameraIntrinsics<f64>,
        pose: CameraPose<f64>,
    ) -> Result<Self, SceneError> {
        if rgb.width != intrinsics.width || rgb.height != intrinsics.height {
            return Err(SceneError::DimensionMismatch(format!(
                "view {view_id}: rgb {}x{} vs intrinsics {}x{}",
                rgb.width, rgb.height, intrinsics.width, intrinsics.height
            )));
        }
        if let Some(d) = &depth {
            if d.width != rgb.width || d.height != rgb.height {
                return Err(SceneError::DimensionMismatch(format!(
                    "view {view_id}: depth {}x{} vs rgb {}x{}",
                    d.width, d.height, rgb.width, rgb.height
                )));
            }
        }
        Ok(Self { view_id, rgb, depth, intrinsics, pose })
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }
}

/// View calibration without pixels, as read from a sparse model.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMeta {
    pub view_id: u32,
    pub camera_id: u32,
    pub name: String,
    pub intrinsics: CameraIntrinsics<f64>,
    pub pose: CameraPose<f64>,
}

impl From<&ViewImage> for ViewMeta {
    fn from(v: &ViewImage) -> Self {
        Self {
            view_id: v.view_id,
            camera_id: 1,
            name: format!("view_{:04}.png", v.view_id),
            intrinsics: v.intrinsics,
            pose: v.pose,
        }
    }
}
