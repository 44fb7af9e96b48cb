//! Geometric primitives, cameras, images and masks shared by every stage.

mod camera;
mod geometry;
mod image;
mod mask;

use std::path::Path;

pub use self::camera::{
    pixel_direction, project_point, project_unbounded, ray_for_pixel, CameraIntrinsics, CameraPose,
    Projection, Ray,
};
pub use self::geometry::{Mat3, Vec3};
pub use self::image::{DepthImage, InstanceMap, RgbImage, ViewImage, ViewMeta};
pub(crate) use self::image::to_u8;
pub use self::mask::{mask_iou, Mask, MaskBits, MaskStatus};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid ray: {0}")]
    InvalidRay(String),
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    PixelOutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl SceneError {
    pub(crate) fn image(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io { path: path.display().to_string(), message: e.to_string() }
    }
}
