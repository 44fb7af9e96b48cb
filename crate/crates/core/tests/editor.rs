mod common;

use std::collections::BTreeMap;

use common::{alpha_centroid, Scene};
use objfield::editor::{camera_path, removal_masks, CameraPathKind, ColorMap, Composite, EditScript, RigidTransform};
use objfield::field::{render_view, Aabb, BatchConfig, BatchSampler, FieldRender, RadianceField, VoxelField};
use objfield::scene::{project_point, CameraIntrinsics, CameraPose, Mask, Mat3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EMPTY: f64 = -1e4;

fn logit(c: f64) -> f64 {
    (c / (1.0 - c)).ln()
}

/// Red ball of radius 0.5 at the origin.
fn ball() -> VoxelField<f64> {
    let aabb = Aabb::new(Vec3::splat(-0.6), Vec3::splat(0.6)).unwrap();
    let mut f = VoxelField::new(aabb, [24; 3], EMPTY, 0.0).unwrap();
    for k in 0..24 {
        for j in 0..24 {
            for i in 0..24 {
                let idx = f.index(i, j, k);
                if f.grid_point(i, j, k).norm() < 0.5 {
                    f.density[idx] = 8.0;
                }
                f.color[3 * idx..3 * idx + 3].copy_from_slice(&[logit(0.9), logit(0.1), logit(0.1)]);
            }
        }
    }
    f
}

/// Grey floor slab under the ball.
fn floor() -> VoxelField<f64> {
    let aabb = Aabb::new(Vec3::new(-3.0, -3.0, -1.5), Vec3::new(3.0, 3.0, -0.6)).unwrap();
    let mut f = VoxelField::new(aabb, [16, 16, 6], 4.0, 0.0).unwrap();
    f.color.iter_mut().for_each(|c| *c = logit(0.6));
    f
}

fn camera() -> (CameraIntrinsics<f64>, CameraPose<f64>) {
    let pose = CameraPose::look_at(Vec3::new(0.0, -4.0, 1.5), Vec3::zero(), Vec3::new(0.0, 0.0, 1.0)).unwrap();
    (CameraIntrinsics::centered(90.0, 96, 96), pose)
}

fn render<F: RadianceField<f64>>(f: &F) -> FieldRender {
    let (k, pose) = camera();
    render_view(f, &k, &pose, 0, 96, 0.05)
}

fn max_diff(a: &FieldRender, b: &FieldRender) -> f64 {
    let rgb = a.view.rgb.data.iter().zip(&b.view.rgb.data).flat_map(|(x, y)| (0..3).map(move |c| (x[c] - y[c]).abs()));
    let depth = a.view.depth.as_ref().unwrap().data.iter().zip(&b.view.depth.as_ref().unwrap().data).map(|(x, y)| (x - y).abs());
    let alpha = a.alpha.iter().zip(&b.alpha).map(|(x, y)| (x - y).abs());
    rgb.chain(depth).chain(alpha).fold(0.0f32, f32::max) as f64
}

#[test]
fn zero_density_object_changes_nothing() {
    let bg = floor();
    let empty = VoxelField::new(ball().aabb, [8; 3], EMPTY, 0.0).unwrap();
    let t = RigidTransform::new(Mat3::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 0.3), Vec3::new(0.2, 0.1, 0.0), 1.3, ColorMap::default())
        .unwrap();
    let d = max_diff(&render(&bg), &render(&Composite::new(Some(&bg), &empty, t)));
    assert!(d <= 1e-6, "{d}");
}

#[test]
fn identity_without_background_is_the_object() {
    let obj = ball();
    let d = max_diff(&render(&obj), &render(&Composite::new(None, &obj, RigidTransform::default())));
    assert!(d <= 1e-6, "{d}");
}

#[test]
fn translation_moves_the_silhouette_by_the_projected_offset() {
    let obj = ball();
    let (k, pose) = camera();
    let t = Vec3::new(0.45, 0.0, 0.3);
    let before = render(&Composite::new(None, &obj, RigidTransform::default()));
    let after = render(&Composite::new(None, &obj, RigidTransform::translation(t)));
    let (x0, y0) = alpha_centroid(&before.alpha, 96);
    let (x1, y1) = alpha_centroid(&after.alpha, 96);
    let p0 = project_point(Vec3::zero(), &k, &pose).unwrap();
    let p1 = project_point(t, &k, &pose).unwrap();
    let (du, dv) = (p1.u - p0.u, p1.v - p0.v);
    assert!(du.abs() > 5.0);
    assert!(((x1 - x0) - du).abs() < 1.0 && ((y1 - y0) - dv).abs() < 1.0, "moved ({}, {}) expected ({du}, {dv})", x1 - x0, y1 - y0);
}

#[test]
fn channel_swap_turns_the_red_ball_green() {
    let (obj, bg) = (ball(), floor());
    let swap = ColorMap { matrix: [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], offset: [0.0; 3] };
    let t = RigidTransform { color: swap, ..Default::default() };
    let plain = render(&bg);
    let edited = render(&Composite::new(Some(&bg), &obj, t));
    let (k, pose) = camera();
    let c = project_point(Vec3::zero(), &k, &pose).unwrap();
    let px = edited.view.rgb.get(c.u.round() as u32, c.v.round() as u32);
    assert!(px[1] > 0.8 && px[0] < 0.2, "{px:?}");
    // a corner far from the ball keeps the background colour
    assert_eq!(edited.view.rgb.get(2, 93), plain.view.rgb.get(2, 93));
}

#[test]
fn composite_queries_invert_the_transform() {
    let obj = ball();
    let t = RigidTransform::new(Mat3::from_rotation_vector(Vec3::new(0.3, -0.2, 0.9)), Vec3::new(1.0, 2.0, -0.5), 1.7, ColorMap::default())
        .unwrap();
    let comp = Composite::new(None, &obj, t);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dir = Vec3::new(0.0, 0.0, 1.0);
    for _ in 0..200 {
        let x = Vec3::new(rng.gen_range(-0.55..0.55), rng.gen_range(-0.55..0.55), rng.gen_range(-0.55..0.55));
        let (s_obj, c_obj) = obj.query(x, dir);
        let (s, c) = comp.query(t.apply(x), dir);
        assert!((s - s_obj / t.scale).abs() <= 1e-9 * s_obj.max(1.0));
        if s > 0.0 {
            for i in 0..3 {
                assert!((c[i] - c_obj[i]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn degenerate_transforms_are_rejected() {
    let shear = Mat3::from_rows([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    assert!(RigidTransform::new(shear, Vec3::zero(), 1.0, ColorMap::default()).is_err());
    let mirror = Mat3::from_rows([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    assert!(RigidTransform::new(mirror, Vec3::zero(), 1.0, ColorMap::default()).is_err());
    for s in [0.0, -1.0, f64::NAN] {
        assert!(RigidTransform::new(Mat3::identity(), Vec3::zero(), s, ColorMap::default()).is_err());
    }
}

#[test]
fn edit_scripts_parse_with_defaults() {
    let s: EditScript = serde_json::from_str(r#"{"background_ckpt": null, "object_ckpt": "obj.ckpt", "translation": [1, 0, 0]}"#).unwrap();
    assert_eq!(s.scale, 1.0);
    let t = s.transform().unwrap();
    assert_eq!(t.translation, Vec3::new(1.0, 0.0, 0.0));
    assert_eq!(t.rotation, Mat3::identity());
    let (bg, obj) = s.resolve(std::path::Path::new("/data"));
    assert_eq!((bg, obj), (None, "/data/obj.ckpt".into()));
    assert!(serde_json::from_str::<EditScript>(r#"{"object_ckpt": "o", "scael": 2}"#).is_err());
    let bad: EditScript = serde_json::from_str(r#"{"object_ckpt": "o", "scale": -2}"#).unwrap();
    assert!(bad.transform().is_err());
}

#[test]
fn orbit_poses_are_evenly_spaced_and_look_inward() {
    let kind = CameraPathKind::Orbit { center: [0.0; 3], radius: 3.0, elevation_deg: 0.0, start_deg: 0.0, sweep_deg: 360.0, n: 4 };
    let poses = camera_path(&kind).unwrap();
    assert_eq!(poses.len(), 4);
    for (i, p) in poses.iter().enumerate() {
        let c = p.center();
        assert!((c.norm() - 3.0).abs() < 1e-9);
        assert!((p.forward() + c.normalized()).norm() < 1e-9);
        let next = poses[(i + 1) % 4].center();
        assert!(c.dot(next).abs() < 1e-9);
    }
}

#[test]
fn line_poses_are_equally_spaced() {
    let kind = CameraPathKind::Line { keypoints: vec![[0.0, -4.0, 1.0], [4.0, -4.0, 1.0]], target: [0.0; 3], n: 5 };
    let poses = camera_path(&kind).unwrap();
    assert_eq!(poses.len(), 5);
    for (i, p) in poses.iter().enumerate() {
        assert!((p.center() - Vec3::new(i as f64, -4.0, 1.0)).norm() < 1e-9);
    }
    assert!(camera_path(&CameraPathKind::Line { keypoints: vec![], target: [0.0; 3], n: 3 }).is_err());
}

#[test]
fn removal_masks_invert_only_accepted_views() {
    let scene = Scene::preset("room-sphere", 0.5, 50);
    let mut masks = scene.gt_masks(1);
    let skipped = *masks.keys().next().unwrap();
    masks.get_mut(&skipped).unwrap().status = objfield::scene::MaskStatus::DiscardedOccluded;
    let inv = removal_masks(&masks);
    assert_eq!(inv[&skipped], masks[&skipped]);
    for (id, m) in masks.iter().filter(|(_, m)| m.is_accepted()) {
        assert_eq!(inv[id].bits, m.bits.complement());
    }
    assert_eq!(removal_masks(&inv), masks);
}

#[test]
fn background_batches_never_touch_object_pixels() {
    let scene = Scene::preset("room-sphere", 0.5, 51);
    let masks: BTreeMap<u32, Mask> = scene.gt_masks(1);
    let inv = removal_masks(&masks);
    let room = Aabb::new(Vec3::new(-3.1, -3.1, -1.1), Vec3::new(3.1, 3.1, 2.1)).unwrap();
    let cfg = BatchConfig { out_of_mask_fraction: 0.0, batch_rays: 2048, ..Default::default() };
    let mut sampler = BatchSampler::<f64>::new(&scene.views, &inv, &scene.fab.cloud, &room, &cfg, 3).unwrap();
    let by_center: Vec<_> = scene.views.iter().map(|v| (v.pose.center(), v)).collect();
    for _ in 0..5 {
        let b = sampler.next_batch();
        for ray in &b.rays {
            let view = by_center.iter().find(|(c, _)| (*c - ray.origin).norm() < 1e-9).unwrap().1;
            let p = project_point(ray.origin + ray.direction, &view.intrinsics, &view.pose).unwrap();
            let (x, y) = (p.u.round() as u32, p.v.round() as u32);
            assert!(!masks[&view.view_id].bits.get(x, y), "object pixel ({x}, {y}) in view {}", view.view_id);
        }
    }
}
