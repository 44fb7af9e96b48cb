//! Prompt-driven multi-view object segmentation over a sparse SfM cloud, and
//! object-level voxel radiance fields trained from the resulting masks.
//!
//! The geometric and rendering core is generic over [`scalar::Scalar`]
//! (`f32` or `f64`); the aliases below fix the common choices.

pub mod colmap;
pub mod editor;
pub mod field;
pub mod occlusion;
pub mod pipeline;
pub mod propagation;
pub mod scalar;
pub mod scene;
pub mod segmenter;
pub mod selfprompt;
pub mod synth;

pub type Vec3d = scene::Vec3<f64>;
pub type Mat3d = scene::Mat3<f64>;
pub type Rayd = scene::Ray<f64>;
pub type Aabbd = field::Aabb<f64>;
/// Double precision field, used for gradient checks and checkpoints in tests.
pub type VoxelField64 = field::VoxelField<f64>;
/// Single precision field, used for training.
pub type VoxelField32 = field::VoxelField<f32>;
