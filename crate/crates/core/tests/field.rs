use std::collections::BTreeMap;

use objfield::colmap::SparseCloud;
use objfield::field::{
    loss, prune_rays, render_ray, render_view, Aabb, BatchConfig, BatchSampler, DepthSupervision, FieldError,
    LossConfig, RadianceField, RayBatch, TrainConfig, VoxelField,
};
use objfield::scene::{CameraIntrinsics, CameraPose, Mask, Ray, Vec3};
use objfield::synth::{fabricate_sparse_cloud, oracle::instance_mask, preset, render_scene};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_box() -> Aabb<f64> {
    Aabb::new(Vec3::zero(), Vec3::splat(1.0)).unwrap()
}

/// Raw density giving softplus(raw) = sigma.
fn inv_softplus(sigma: f64) -> f64 {
    sigma.exp_m1().ln()
}

/// Raw color giving sigmoid(raw) = c, for c strictly inside (0, 1).
fn logit(c: f64) -> f64 {
    (c / (1.0 - c)).ln()
}

fn homogeneous(sigma: f64, color: [f64; 3]) -> VoxelField<f64> {
    let mut f = VoxelField::new(unit_box(), [4, 4, 4], inv_softplus(sigma), 0.0).unwrap();
    for (i, v) in f.color.iter_mut().enumerate() {
        *v = logit(color[i % 3]);
    }
    f
}

fn axis_ray() -> Ray<f64> {
    Ray::new(Vec3::new(0.5, 0.5, -1.0), Vec3::new(0.0, 0.0, 1.0), 0.0, 10.0).unwrap()
}

#[test]
fn homogeneous_medium_matches_closed_form() {
    let f = homogeneous(2.0, [0.999, 0.5, 0.25]);
    let r = render_ray(&f, &axis_ray(), 256);
    let a = 1.0 - (-2.0f64).exp();
    assert!((r.opacity - a).abs() < 1e-3);
    assert!((r.color[0] - 0.999 * a).abs() < 1e-3);
    assert!((r.color[1] - 0.5 * a).abs() < 1e-3);
    // doubling the sample count barely moves a smooth integral
    let r2 = render_ray(&f, &axis_ray(), 512);
    assert!((r2.color[0] - r.color[0]).abs() < 1e-3);
}

#[test]
fn empty_field_renders_nothing() {
    let f = VoxelField::new(unit_box(), [3, 3, 3], -80.0, 0.0).unwrap();
    let r = render_ray(&f, &axis_ray(), 64);
    assert!(r.opacity < 1e-12);
    assert!(r.color.iter().all(|c| *c < 1e-12));
}

#[test]
fn opaque_slab_depth_converges_to_its_surface() {
    // density only in the back half, starting at z = 0.5
    let aabb = Aabb::new(Vec3::zero(), Vec3::splat(1.0)).unwrap();
    let mut f = VoxelField::new(aabb, [2, 2, 201], -80.0, 0.0).unwrap();
    for k in 100..201 {
        for j in 0..2 {
            for i in 0..2 {
                let idx = f.index(i, j, k);
                f.density[idx] = 1e4;
            }
        }
    }
    let r = render_ray(&f, &axis_ray(), 4096);
    // ray starts at z = -1, so the surface is at t = 1.5
    assert!((r.depth - 1.5).abs() < 5e-3, "{}", r.depth);
    assert!((r.opacity - 1.0).abs() < 1e-9);
}

#[test]
fn miss_is_transparent() {
    let f = homogeneous(2.0, [0.5; 3]);
    let away = Ray::new(Vec3::new(0.5, 0.5, -1.0), Vec3::new(0.0, 0.0, -1.0), 0.0, 10.0).unwrap();
    let r = render_ray(&f, &away, 64);
    assert_eq!(r.opacity, 0.0);
    let k = CameraIntrinsics::centered(20.0, 16, 12);
    let pose = CameraPose::look_at(Vec3::new(0.5, 0.5, -3.0), Vec3::new(0.5, 0.5, -6.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
    let img = render_view(&f, &k, &pose, 0, 32, 0.05);
    assert!(img.alpha.iter().all(|a| *a == 0.0));
    assert!(img.view.rgb.data.iter().all(|p| *p == [0.0; 3]));
}

fn random_field(rng: &mut ChaCha8Rng, res: usize) -> VoxelField<f64> {
    let aabb = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
    let mut f = VoxelField::new(aabb, [res; 3], 0.0, 0.0).unwrap();
    for v in &mut f.density {
        *v = rng.gen_range(-1.0..2.5);
    }
    for v in &mut f.color {
        *v = rng.gen_range(-2.0..2.0);
    }
    f
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> RayBatch<f64> {
    let mut b = RayBatch::default();
    for i in 0..n {
        let origin = Vec3::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), -3.0);
        let target = Vec3::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), 0.0);
        let ray = Ray::new(origin, target - origin, 0.1, 20.0).unwrap();
        let depth = (i % 2 == 0).then(|| rng.gen_range(2.0..4.0));
        b.push(ray, [rng.gen(), rng.gen(), rng.gen()], depth);
    }
    b
}

fn check_gradients(lambda_d: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = random_field(&mut rng, 4);
    let batch = random_batch(&mut rng, 8);
    let cfg = LossConfig { lambda_d, n_samples: 48, jitter_seed: None };
    let out = loss(&field, &batch, &cfg);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for grid in 0..2 {
        let n = if grid == 0 { field.density.len() } else { field.color.len() };
        for i in 0..n {
            let eval = |delta: f64| {
                let mut f = field.clone();
                if grid == 0 {
                    f.density[i] += delta;
                } else {
                    f.color[i] += delta;
                }
                loss(&f, &batch, &cfg).total
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let an = if grid == 0 { out.grad_density[i] } else { out.grad_color[i] };
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "worst relative gradient error {worst}");
}

#[test]
fn gradients_match_finite_differences_without_depth() {
    check_gradients(0.0, 11);
}

#[test]
fn gradients_match_finite_differences_with_depth() {
    check_gradients(0.1, 12);
}

#[test]
fn zero_lambda_ignores_depth() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let field = random_field(&mut rng, 4);
    let batch = random_batch(&mut rng, 8);
    let out = loss(&field, &batch, &LossConfig { lambda_d: 0.0, n_samples: 32, jitter_seed: None });
    assert_eq!(out.total, out.l_rgb);
    assert!(out.l_depth > 0.0);
}

#[test]
fn matching_targets_give_zero_loss() {
    let f = homogeneous(1.5, [0.3, 0.6, 0.9]);
    let r = render_ray(&f, &axis_ray(), 32);
    let mut b = RayBatch::default();
    b.push(axis_ray(), r.color, Some(r.depth));
    let out = loss(&f, &b, &LossConfig { lambda_d: 0.1, n_samples: 32, jitter_seed: None });
    assert!(out.total.abs() < 1e-20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn opacity_and_transmittance_are_well_behaved(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = random_field(&mut rng, 5);
        let batch = random_batch(&mut rng, 4);
        for ray in &batch.rays {
            let mut samples = Vec::new();
            field.ray_samples(ray, 64, &mut samples);
            let mut trans = 1.0f64;
            for s in &samples {
                let next = trans * (-s.sigma * s.delta).exp();
                prop_assert!(next <= trans);
                trans = next;
            }
            let r = render_ray(&field, ray, 64);
            prop_assert!((0.0..=1.0).contains(&r.opacity));
        }
    }

    #[test]
    fn pruning_keeps_exactly_the_intersecting_rays(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let aabb = Aabb::new(Vec3::new(-0.5, -0.4, -0.3), Vec3::new(0.6, 0.5, 0.4)).unwrap();
        let mut batch = RayBatch::default();
        for _ in 0..64 {
            let o = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            batch.push(Ray::new(o, d, 0.0, 100.0).unwrap(), [0.5; 3], None);
        }
        let kept = prune_rays(&batch, &aabb);
        // independent oracle: march each ray finely and look for a sample inside the box
        let mut expected = 0;
        for r in &batch.rays {
            let inside = (0..20_000).any(|i| aabb.contains(r.at(i as f64 * 0.005)));
            let ambiguous = (0..20_000).any(|i| {
                let p = r.at(i as f64 * 0.005);
                (0..3).all(|a| p[a] > aabb.min[a] - 0.01 && p[a] < aabb.max[a] + 0.01)
            }) != inside;
            prop_assume!(!ambiguous);
            expected += inside as usize;
        }
        prop_assert_eq!(kept.len(), expected);
        for r in &kept.rays {
            let p = r.at(0.5 * (r.near + r.far));
            prop_assert!((0..3).all(|a| p[a] >= aabb.min[a] - 1e-9 && p[a] <= aabb.max[a] + 1e-9));
        }
    }
}

#[test]
fn parallel_ray_outside_a_face_is_dropped() {
    let aabb = unit_box();
    let mut b = RayBatch::default();
    b.push(Ray::new(Vec3::new(2.0, 0.5, -1.0), Vec3::new(0.0, 0.0, 1.0), 0.0, 10.0).unwrap(), [0.0; 3], None);
    b.push(Ray::new(Vec3::new(0.5, 0.5, -1.0), Vec3::new(0.0, 0.0, 1.0), 0.0, 10.0).unwrap(), [0.0; 3], None);
    let kept = prune_rays(&b, &aabb);
    assert_eq!(kept.len(), 1);
    assert!((kept.rays[0].near - 1.0).abs() < 1e-12 && (kept.rays[0].far - 2.0).abs() < 1e-12);
}

#[test]
fn pruned_loss_equals_loss_over_intersecting_rays() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let field = random_field(&mut rng, 6);
    let mut all = RayBatch::default();
    for _ in 0..200 {
        let o = Vec3::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), -4.0);
        let d = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 1.0);
        all.push(Ray::new(o, d, 0.0, 50.0).unwrap(), [rng.gen(), rng.gen(), rng.gen()], Some(rng.gen_range(3.0..5.0)));
    }
    let hits: Vec<usize> = (0..all.len()).filter(|i| field.aabb.intersect(all.rays[*i].origin, all.rays[*i].direction).is_some()).collect();
    let intersecting = all.select(&hits);
    let kept = prune_rays(&all, &field.aabb);
    let cfg = LossConfig { lambda_d: 0.1, n_samples: 64, jitter_seed: None };
    let a = loss(&field, &kept, &cfg).total;
    let b = loss(&field, &intersecting, &cfg).total;
    assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
}

fn sphere_data(n_views: usize) -> (Vec<objfield::scene::ViewImage>, BTreeMap<u32, Mask>, SparseCloud) {
    let mut spec = preset("sphere").unwrap();
    spec.cameras.truncate(n_views);
    let rendered = render_scene(&spec).unwrap();
    let views: Vec<_> = rendered.iter().map(|r| r.view.clone()).collect();
    let fab = fabricate_sparse_cloud(&spec, &views, 800, 0.0, 1).unwrap();
    let masks = rendered
        .iter()
        .map(|r| (r.view.view_id, Mask::new(r.view.view_id, instance_mask(&r.instances, 1), 1.0)))
        .collect();
    (views, masks, fab.cloud)
}

#[test]
fn batches_mix_out_of_mask_rays_at_the_configured_rate() {
    let (views, masks, cloud) = sphere_data(4);
    let aabb = objfield::field::object_aabb(&cloud, &Default::default()).unwrap();
    let cfg = BatchConfig { batch_rays: 512, depth: DepthSupervision::None, ..Default::default() };
    let mut s = BatchSampler::<f64>::new(&views, &masks, &cloud, &aabb, &cfg, 9).unwrap();
    for _ in 0..100 {
        let b = s.next_batch();
        let black = b.target.iter().filter(|t| **t == [0.0; 3]).count() as f64 / b.len() as f64;
        assert!((black - 0.25).abs() <= 0.05, "{black}");
        assert!(b.rays.iter().all(|r| r.near < r.far));
    }
}

#[test]
fn sparse_depth_rays_sit_on_feature_pixels() {
    let (mut views, masks, cloud) = sphere_data(4);
    for v in &mut views {
        v.depth = None;
    }
    let aabb = objfield::field::object_aabb(&cloud, &Default::default()).unwrap();
    let cfg = BatchConfig { batch_rays: 256, sparse_depth_fraction: 0.5, ..Default::default() };
    let mut s = BatchSampler::<f64>::new(&views, &masks, &cloud, &aabb, &cfg, 2).unwrap();
    assert_eq!(s.depth_mode(), DepthSupervision::Sparse);
    let b = s.next_batch();
    let mut n_depth = 0;
    for (ray, d) in b.rays.iter().zip(&b.depth) {
        let Some(t) = d else { continue };
        n_depth += 1;
        // the depth target lands on a cloud point seen at that feature
        let p = ray.at(*t);
        let nearest = cloud.points.values().map(|q| (q.xyz - p).norm()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-9, "{nearest}");
    }
    assert_eq!(n_depth, 128);
}

#[test]
fn dense_depth_targets_hit_the_rendered_surface() {
    let (views, masks, cloud) = sphere_data(3);
    let aabb = objfield::field::object_aabb(&cloud, &Default::default()).unwrap();
    let cfg = BatchConfig { batch_rays: 256, ..Default::default() };
    let mut s = BatchSampler::<f64>::new(&views, &masks, &cloud, &aabb, &cfg, 4).unwrap();
    assert_eq!(s.depth_mode(), DepthSupervision::Dense);
    let b = s.next_batch();
    for (ray, d) in b.rays.iter().zip(&b.depth) {
        if let Some(t) = d {
            // unit sphere at the origin; depth maps are stored in f32
            assert!((ray.at(*t).norm() - 1.0).abs() < 1e-5);
        }
    }
}

#[test]
fn batches_need_accepted_views() {
    let (views, mut masks, cloud) = sphere_data(2);
    for m in masks.values_mut() {
        m.status = objfield::scene::MaskStatus::DiscardedOccluded;
    }
    let aabb = objfield::field::object_aabb(&cloud, &Default::default()).unwrap();
    let r = BatchSampler::<f64>::new(&views, &masks, &cloud, &aabb, &BatchConfig::default(), 0);
    assert!(matches!(r, Err(FieldError::NoAcceptedViews)));
}

fn quick_config() -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.iters = 6;
    cfg.resolution = 16;
    cfg.samples_per_ray = 24;
    cfg.batch.batch_rays = 128;
    cfg
}

#[test]
fn zero_iterations_return_the_initial_field() {
    let (views, masks, cloud) = sphere_data(3);
    let mut cfg = quick_config();
    cfg.iters = 0;
    let out = objfield::field::train::<f32>(&views, &masks, &cloud, &cfg).unwrap();
    assert!(out.field.density.iter().all(|v| *v == -5.0));
    assert!(out.field.color.iter().all(|v| *v == 0.0));
    assert_eq!(out.log.len(), 1);
}

#[test]
fn training_is_deterministic() {
    let (views, masks, cloud) = sphere_data(3);
    let cfg = quick_config();
    let a = objfield::field::train::<f32>(&views, &masks, &cloud, &cfg).unwrap();
    let b = objfield::field::train::<f32>(&views, &masks, &cloud, &cfg).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.field, b.field);
    assert!(a.field.is_finite());
}

#[test]
fn nan_targets_abort_with_the_last_good_field() {
    let (mut views, masks, cloud) = sphere_data(3);
    for v in &mut views {
        for p in &mut v.rgb.data {
            *p = [f32::NAN; 3];
        }
    }
    match objfield::field::train::<f32>(&views, &masks, &cloud, &quick_config()) {
        Err(FieldError::Divergence { iter, last_good }) => {
            assert_eq!(iter, 0);
            assert!(last_good.is_finite());
        }
        other => panic!("expected divergence, got {:?}", other.map(|t| t.log)),
    }
}

#[test]
fn training_needs_two_views() {
    let (views, mut masks, cloud) = sphere_data(3);
    masks.retain(|id, _| *id == 1);
    let r = objfield::field::train::<f32>(&views, &masks, &cloud, &quick_config());
    assert!(matches!(r, Err(FieldError::NotEnoughViews(1))));
}

#[test]
fn checkpoint_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f: VoxelField<f32> = random_field(&mut rng, 5).cast();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.bin");
    objfield::field::save_field(&f, &p).unwrap();
    let g: VoxelField<f32> = objfield::field::load_field(&p).unwrap();
    assert_eq!(f, g);
}
