use super::scene::{Background, SceneObject, SceneSpec};
use super::SynthError;
use crate::editor::{camera_path, CameraPathKind};
use crate::scene::{CameraIntrinsics, CameraPose, Vec3};

pub const PRESETS: &[&str] = &["sphere", "two-spheres", "occluded-sphere", "room-sphere", "small-object"];

const SIZE: u32 = 128;
const FOCAL: f64 = 120.0;

fn light() -> [f64; 3] {
    Vec3::new(0.4, -0.3, 0.85).normalized().to_array()
}

/// `n` cameras on a ring of `radius` around `target`, elevation oscillating by
/// `arc_deg` around `elevation_deg` (zero arc gives a flat ring).
pub fn ring_cameras(n: usize, radius: f64, elevation_deg: f64, arc_deg: f64, target: Vec3<f64>) -> Vec<CameraPose<f64>> {
    (0..n)
        .map(|i| {
            let phase = i as f64 / n as f64 * std::f64::consts::TAU;
            let el = elevation_deg + arc_deg * (2.0 * phase).sin();
            let kind = CameraPathKind::Orbit {
                center: target.to_array(),
                radius,
                elevation_deg: el,
                start_deg: phase.to_degrees(),
                sweep_deg: 0.0,
                n: 1,
            };
            camera_path(&kind).expect("valid ring parameters")[0]
        })
        .collect()
}

fn intrinsics() -> CameraIntrinsics<f64> {
    CameraIntrinsics::centered(FOCAL, SIZE, SIZE)
}

/// Named scenes used by the CLI and the test-suites.
pub fn preset(name: &str) -> Result<SceneSpec, SynthError> {
    let origin = Vec3::zero();
    let spec = match name {
        "sphere" => SceneSpec {
            objects: vec![SceneObject::sphere([0.0, 0.0, 0.0], 1.0, [0.9, 0.35, 0.2], 1)],
            background: Background::None,
            intrinsics: intrinsics(),
            cameras: ring_cameras(20, 4.0, 20.0, 10.0, origin),
            light: light(),
        },
        "two-spheres" => SceneSpec {
            objects: vec![
                SceneObject::sphere([-0.9, 0.0, 0.0], 0.7, [0.9, 0.3, 0.2], 1),
                SceneObject::sphere([0.9, 0.25, 0.1], 0.6, [0.2, 0.4, 0.9], 2),
            ],
            background: Background::RoomBox { min: [-7.0, -7.0, -1.5], max: [7.0, 7.0, 5.0], albedo: [0.6, 0.6, 0.55] },
            intrinsics: intrinsics(),
            cameras: ring_cameras(30, 4.5, 25.0, 8.0, origin),
            light: light(),
        },
        "occluded-sphere" => SceneSpec {
            objects: vec![
                SceneObject::sphere([0.0, 0.0, 0.0], 1.0, [0.9, 0.35, 0.2], 1),
                SceneObject::cuboid([2.387, 0.251, -0.575], [0.1, 2.0, 1.65], [0.3, 0.8, 0.3], 2),
            ],
            background: Background::None,
            intrinsics: intrinsics(),
            cameras: ring_cameras(30, 4.0, 0.0, 0.0, origin),
            light: light(),
        },
        "room-sphere" => SceneSpec {
            objects: vec![SceneObject::sphere([0.0, 0.0, -0.5], 0.5, [0.9, 0.35, 0.2], 1)],
            background: Background::RoomBox { min: [-3.0, -3.0, -1.0], max: [3.0, 3.0, 2.0], albedo: [0.7, 0.65, 0.5] },
            intrinsics: intrinsics(),
            cameras: ring_cameras(24, 2.2, 30.0, 5.0, Vec3::new(0.0, 0.0, -0.5)),
            light: light(),
        },
        "small-object" => SceneSpec {
            objects: vec![SceneObject::sphere([0.0, 0.0, 0.0], 0.3, [0.9, 0.35, 0.2], 1)],
            background: Background::RoomBox { min: [-4.0, -4.0, -1.0], max: [4.0, 4.0, 3.0], albedo: [0.6, 0.6, 0.6] },
            intrinsics: intrinsics(),
            cameras: ring_cameras(20, 1.5, 20.0, 5.0, origin),
            light: light(),
        },
        other => return Err(SynthError::UnknownPreset(other.to_string())),
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            preset(name).unwrap();
        }
        assert!(preset("nope").is_err());
    }
}
