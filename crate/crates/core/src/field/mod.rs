//! Explicit voxel radiance field: volume rendering, depth-supervised training
//! on segmented views, and checkpoints.

mod aabb;
mod adam;
mod batch;
pub mod checkpoint;
mod loss;
mod render;
mod train;
mod voxel;

use std::path::Path;

pub use self::aabb::{object_aabb, Aabb, AabbConfig};
pub use self::adam::Adam;
pub use self::batch::{accepted_views, prune_rays, BatchConfig, BatchSampler, DepthSupervision};
pub use self::checkpoint::{load_field, save_field};
pub use self::loss::{loss, ray_seed, LossConfig, LossOutput, RayBatch};
pub use self::render::{composite, psnr, render_ray, render_view, FieldRender, RayRender, OPACITY_EPS};
pub use self::train::{masked_psnr, masked_target, train, train_in_box, write_log, LogEntry, TrainConfig, Trained};
pub use self::voxel::{sample_positions, uniform_samples, RadianceField, Sample, Stencil, VoxelField};

use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("degenerate bounding box: {0}")]
    DegenerateAabb(String),
    #[error("no accepted views to train on")]
    NoAcceptedViews,
    #[error("need at least 2 accepted views, have {0}")]
    NotEnoughViews(usize),
    #[error("invalid field configuration: {0}")]
    Config(String),
    #[error("training diverged at iteration {iter}")]
    Divergence { iter: usize, last_good: Box<VoxelField<f64>> },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl FieldError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}

impl<T: Scalar> VoxelField<T> {
    pub fn cast<U: Scalar>(&self) -> VoxelField<U> {
        VoxelField {
            aabb: self.aabb.cast(),
            resolution: self.resolution,
            density: self.density.iter().map(|v| U::lit(v.as_f64())).collect(),
            color: self.color.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}
