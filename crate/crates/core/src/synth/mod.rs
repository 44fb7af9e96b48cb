//! Analytic ground-truth scenes: rendering, fabricated sparse clouds and
//! oracle segmentation.

mod cloud;
pub mod oracle;
mod presets;
mod render;
mod scene;

pub use self::cloud::{fabricate_sparse_cloud, FabricatedCloud, VISIBILITY_TOL};
pub use self::presets::{preset, ring_cameras, PRESETS};
pub use self::render::{render_camera, render_scene, RenderedView};
pub use self::scene::{Background, Hit, SceneObject, SceneSpec, Shape};

use crate::scene::SceneError;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}
