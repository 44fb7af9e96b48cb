//! Scene edits on trained fields: object removal, composition, camera paths.

mod compose;
mod path;

pub use self::compose::{removal_masks, ColorMap, Composite, EditScript, RigidTransform};
pub use self::path::{camera_path, CameraPathKind, WORLD_UP};

#[derive(Debug, thiserror::Error)]
pub enum EditError {
    #[error("invalid camera path: {0}")]
    InvalidPath(String),
    #[error("degenerate transform: {0}")]
    DegenerateTransform(String),
}
