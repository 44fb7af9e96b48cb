//! Trains the sphere preset and prints the held-out PSNR trajectory.
//! Usage: pilot_train [iters] [lr_density] [lr_color] [samples] [batch]

use std::collections::BTreeMap;
use std::time::Instant;

use objfield::field::{train, TrainConfig};
use objfield::scene::Mask;
use objfield::synth::{fabricate_sparse_cloud, oracle::instance_mask, preset, render_camera, render_scene};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let mut spec = preset("sphere").unwrap();
    let rendered = render_scene(&spec).unwrap();
    let holdout_pose = objfield::synth::ring_cameras(1, 4.0, 35.0, 0.0, objfield::scene::Vec3::zero())[0];
    let holdout = render_camera(&spec, &holdout_pose, 999).unwrap();
    spec.cameras.push(holdout_pose);
    let mut views: Vec<_> = rendered.iter().map(|r| r.view.clone()).collect();
    let fab = fabricate_sparse_cloud(&spec, &views, 2000, 0.5, 7).unwrap();
    views.push(holdout.view.clone());
    let mut masks = BTreeMap::new();
    for r in rendered.iter().chain(std::iter::once(&holdout)) {
        masks.insert(r.view.view_id, Mask::new(r.view.view_id, instance_mask(&r.instances, 1), 1.0));
    }
    let mut cfg = TrainConfig::default();
    cfg.iters = arg(1, 2000.0) as usize;
    cfg.lr_density = arg(2, 0.1);
    cfg.lr_color = arg(3, 0.1);
    cfg.samples_per_ray = arg(4, 128.0) as usize;
    cfg.batch.batch_rays = arg(5, 4096.0) as usize;
    cfg.holdout_view = Some(999);
    let t = Instant::now();
    let out = train::<f32>(&views, &masks, &fab.cloud, &cfg).unwrap();
    for e in &out.log {
        println!("{}", serde_json::to_string(e).unwrap());
    }
    eprintln!("elapsed {:.1}s", t.elapsed().as_secs_f64());
}
