use serde::{Deserialize, Serialize};

use super::EditError;
use crate::scene::{CameraPose, Vec3};

/// World up axis for generated camera paths.
pub const WORLD_UP: [f64; 3] = [0.0, 0.0, 1.0];

fn default_sweep() -> f64 {
    360.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CameraPathKind {
    /// Turntable around `center`; azimuth step is `sweep_deg / n`.
    Orbit {
        center: [f64; 3],
        radius: f64,
        #[serde(default)]
        elevation_deg: f64,
        #[serde(default)]
        start_deg: f64,
        #[serde(default = "default_sweep")]
        sweep_deg: f64,
        n: usize,
    },
    /// Walkthrough along a polyline, equally spaced by arc length, looking at `target`.
    Line { keypoints: Vec<[f64; 3]>, target: [f64; 3], n: usize },
}

pub fn camera_path(kind: &CameraPathKind) -> Result<Vec<CameraPose<f64>>, EditError> {
    let up = Vec3::from_array(WORLD_UP);
    match kind {
        CameraPathKind::Orbit { center, radius, elevation_deg, start_deg, sweep_deg, n } => {
            if *n == 0 || !(*radius > 0.0) || elevation_deg.abs() >= 89.0 {
                return Err(EditError::InvalidPath(format!(
                    "orbit needs n > 0, radius > 0, |elevation| < 89 (n={n}, radius={radius}, elevation={elevation_deg})"
                )));
            }
            let c = Vec3::from_array(*center);
            let el = elevation_deg.to_radians();
            (0..*n)
                .map(|i| {
                    let az = (start_deg + sweep_deg * i as f64 / *n as f64).to_radians();
                    let eye = c + Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * *radius;
                    CameraPose::look_at(eye, c, up).map_err(|e| EditError::InvalidPath(e.to_string()))
                })
                .collect()
        }
        CameraPathKind::Line { keypoints, target, n } => {
            if *n == 0 || keypoints.is_empty() {
                return Err(EditError::InvalidPath("line needs n > 0 and at least one keypoint".into()));
            }
            let pts: Vec<Vec3<f64>> = keypoints.iter().map(|k| Vec3::from_array(*k)).collect();
            let seg: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
            let total: f64 = seg.iter().sum();
            let t = Vec3::from_array(*target);
            (0..*n)
                .map(|i| {
                    let s = if *n == 1 { 0.0 } else { total * i as f64 / (*n - 1) as f64 };
                    let eye = point_at(&pts, &seg, s);
                    CameraPose::look_at(eye, t, up).map_err(|e| EditError::InvalidPath(e.to_string()))
                })
                .collect()
        }
    }
}

fn point_at(pts: &[Vec3<f64>], seg: &[f64], mut s: f64) -> Vec3<f64> {
    for (i, len) in seg.iter().enumerate() {
        if s <= *len || i + 1 == seg.len() {
            let f = if *len > 0.0 { (s / len).min(1.0) } else { 0.0 };
            return pts[i] + (pts[i + 1] - pts[i]) * f;
        }
        s -= len;
    }
    pts[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_quarter_spacing_looking_at_origin() {
        let poses = camera_path(&CameraPathKind::Orbit {
            center: [0.0; 3],
            radius: 3.0,
            elevation_deg: 0.0,
            start_deg: 0.0,
            sweep_deg: 360.0,
            n: 4,
        })
        .unwrap();
        assert_eq!(poses.len(), 4);
        for (i, p) in poses.iter().enumerate() {
            let c = p.center();
            assert!((c.norm() - 3.0).abs() < 1e-9);
            let az = c.y.atan2(c.x).to_degrees().rem_euclid(360.0);
            assert!((az - 90.0 * i as f64).abs() < 1e-9);
            // optical axis points at the origin
            assert!((p.forward() - (-c).normalized()).norm() < 1e-12);
        }
    }

    #[test]
    fn orbit_radius_with_elevation() {
        let poses = camera_path(&CameraPathKind::Orbit {
            center: [0.0; 3],
            radius: 2.5,
            elevation_deg: 35.0,
            start_deg: 10.0,
            sweep_deg: 360.0,
            n: 17,
        })
        .unwrap();
        assert!(poses.iter().all(|p| (p.center().norm() - 2.5).abs() < 1e-9));
    }

    #[test]
    fn line_is_equally_spaced() {
        let poses = camera_path(&CameraPathKind::Line {
            keypoints: vec![[-2.0, -3.0, 1.0], [2.0, -3.0, 1.0]],
            target: [0.0; 3],
            n: 5,
        })
        .unwrap();
        let xs: Vec<f64> = poses.iter().map(|p| p.center().x).collect();
        for (i, x) in xs.iter().enumerate() {
            assert!((x - (-2.0 + i as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_params() {
        assert!(camera_path(&CameraPathKind::Line { keypoints: vec![], target: [0.0; 3], n: 3 }).is_err());
        assert!(camera_path(&CameraPathKind::Orbit {
            center: [0.0; 3],
            radius: 0.0,
            elevation_deg: 0.0,
            start_deg: 0.0,
            sweep_deg: 360.0,
            n: 3
        })
        .is_err());
    }
}
