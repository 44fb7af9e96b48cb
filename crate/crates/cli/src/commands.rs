use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use objfield::colmap::{load_dataset, Dataset};
use objfield::editor::{camera_path, removal_masks, CameraPathKind, Composite, EditScript};
use objfield::field::{
    load_field, object_aabb, render_view, save_field, train, train_in_box, write_log, AabbConfig, FieldError, RadianceField,
    Trained, VoxelField,
};
use objfield::pipeline::{segment_objects, PipelineConfig};
use objfield::propagation::ObjectSeed;
use objfield::scene::{CameraPose, ViewImage};
use objfield::segmenter::{OracleBackend, PointPrompt, PromptSet, SegmenterHandle};
use objfield::selfprompt::{self_prompt_dataset, SceneJob};

use crate::store::{self, MaskIndex, UsageError};
use crate::{BackendKind, Cli, Command, OrbitArgs, SegArgs};

const BRIDGE_TIMEOUT: Duration = Duration::from_secs(60);

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    let cfg = cfg.with_seed(seed);
    match cli.command {
        Command::Synth { preset, out } => {
            let n = store::write_synthetic(&preset, &cfg.synth, cfg.synth_seed(), &out)?;
            println!("wrote {n} views to {}", out.display());
            Ok(())
        }
        Command::Segment { seg, prompts, view } => {
            let data = dataset(&seg.dataset)?;
            let points = prompts.iter().map(|p| PointPrompt::parse(p)).collect::<Result<Vec<_>, _>>()?;
            let view_id = view.unwrap_or(data.views[0].view_id);
            if data.view(view_id).is_none() {
                bail!(UsageError(format!("view {view_id} is not in the dataset")));
            }
            let mut backend = backend(&seg, &data, None)?;
            let seed = ObjectSeed { object_id: seg.object_id, view_id, prompts: PromptSet::from_points(points) };
            run_segmentation(&cfg, &data, seed, &mut backend, &seg, None)
        }
        Command::Selfprompt { seg, text } => {
            let data = dataset(&seg.dataset)?;
            let backend = backend(&seg, &data, Some(&text))?;
            let mut jobs = [SceneJob { name: "dataset".into(), views: &data.views, backend }];
            let (report, mut out) = self_prompt_dataset(&mut jobs, &text, &cfg.selfprompt)?;
            let Some(vp) = out.pop().flatten() else {
                let why = report.scenes.first().and_then(|s| s.error.clone()).unwrap_or_default();
                bail!(objfield::selfprompt::SelfPromptError::NotFound(format!("{text} ({why})")));
            };
            println!("view {}: {} prompts from the {:?} box", vp.view_id, vp.prompts.points.len(), text);
            let [job] = jobs;
            let mut backend = job.backend;
            let seed = ObjectSeed { object_id: seg.object_id, view_id: vp.view_id, prompts: vp.prompts };
            run_segmentation(&cfg, &data, seed, &mut backend, &seg, Some(text))
        }
        Command::Train { dataset: ds, masks, out, iters, removal } => {
            let data = dataset(&ds)?;
            let cloud = data.cloud.as_ref().context("dataset has no sparse model")?;
            let (index, masks) = store::read_masks(&masks)?;
            let mut tcfg = cfg.train.clone();
            if let Some(n) = iters {
                tcfg.iters = n;
            }
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let result = if removal {
                tcfg.batch.out_of_mask_fraction = 0.0;
                let scene_box = object_aabb(cloud, &AabbConfig { outlier_trim: 0.0, ..tcfg.aabb })?;
                train_in_box::<f32>(&data.views, &removal_masks(&masks), cloud, &scene_box, &tcfg)
            } else {
                train::<f32>(&data.views, &masks, &store::object_cloud(cloud, &index), &tcfg)
            };
            let Trained { field, log } = match result {
                Err(FieldError::Divergence { iter, last_good }) => {
                    let p = out.join("last_good.ckpt");
                    save_field(&last_good.cast::<f32>(), &p)?;
                    return Err(FieldError::Divergence { iter, last_good }).context(format!("last good field saved to {}", p.display()));
                }
                r => r?,
            };
            save_field(&field, &out.join("field.ckpt"))?;
            write_log(&log, &out.join("log.jsonl"))?;
            let last = log.last().expect("log has the final iteration");
            println!("trained {} iterations, final rgb loss {:.5}", last.iter, last.l_rgb);
            Ok(())
        }
        Command::Render { checkpoint, dataset: ds, out, orbit } => {
            let data = dataset(&ds)?;
            let field: VoxelField<f32> = load_field(&checkpoint)?;
            let center = field.aabb.cast::<f64>().center();
            render_orbit(&field, &data.views[0], center.to_array(), &orbit, &out, cfg.train.samples_per_ray)
        }
        Command::Edit { script, dataset: ds, out, orbit } => {
            let data = dataset(&ds)?;
            let text = std::fs::read_to_string(&script).with_context(|| format!("reading {}", script.display()))?;
            let edit: EditScript = serde_json::from_str(&text).with_context(|| format!("parsing {}", script.display()))?;
            let (bg_path, obj_path) = edit.resolve(script.parent().unwrap_or(Path::new(".")));
            let object: VoxelField<f32> = load_field(&obj_path)?;
            let background: Option<VoxelField<f32>> = bg_path.map(|p| load_field(&p)).transpose()?;
            let comp = Composite::new(background.as_ref(), &object, edit.transform()?);
            let center = match &background {
                Some(b) => b.aabb.cast::<f64>().center(),
                None => comp.object_bounds().cast::<f64>().center(),
            };
            render_orbit(&comp, &data.views[0], center.to_array(), &orbit, &out, cfg.train.samples_per_ray)
        }
    }
}

fn dataset(p: &Path) -> Result<Dataset> {
    let path = store::manifest_path(p);
    let data = load_dataset(&path).with_context(|| format!("loading {}", path.display()))?;
    if data.views.is_empty() {
        bail!(objfield::colmap::ColmapError::Integrity("dataset has no views".into()));
    }
    Ok(data)
}

fn backend(args: &SegArgs, data: &Dataset, label: Option<&str>) -> Result<SegmenterHandle> {
    match args.backend {
        BackendKind::Oracle => {
            if data.instances.len() != data.views.len() {
                bail!(objfield::colmap::ColmapError::Integrity(
                    "the oracle backend needs an instance map for every view".into()
                ));
            }
            let mut oracle = OracleBackend::new(data.instances.clone());
            if let Some(text) = label {
                oracle = oracle.with_label(text, args.object_id);
            }
            Ok(SegmenterHandle::oracle(oracle))
        }
        BackendKind::Bridge => {
            let Some(endpoint) = &args.bridge_endpoint else {
                bail!(UsageError("--backend bridge needs --bridge-endpoint".into()));
            };
            Ok(SegmenterHandle::bridge(endpoint, BRIDGE_TIMEOUT)?)
        }
    }
}

fn run_segmentation(
    cfg: &PipelineConfig,
    data: &Dataset,
    seed: ObjectSeed,
    backend: &mut SegmenterHandle,
    args: &SegArgs,
    text: Option<String>,
) -> Result<()> {
    let cloud = data.cloud.as_ref().context("dataset has no sparse model")?;
    let index = MaskIndex {
        object_id: seed.object_id,
        seed_view: seed.view_id,
        prompts: seed.prompts.points.clone(),
        text,
        visit_order: vec![],
        discarded: vec![],
        points: vec![],
        views: vec![],
    };
    let seg = segment_objects(cloud, &data.views, &[seed], backend, &cfg.propagation, &cfg.occlusion)?;
    let index = store::write_masks(&args.out, &seg, index)?;
    let accepted = index.views.iter().filter(|v| v.status == objfield::scene::MaskStatus::Accepted).count();
    println!(
        "object {}: {} points, {accepted} of {} views accepted, discarded {:?}",
        index.object_id,
        index.points.len(),
        index.views.len(),
        index.discarded
    );
    Ok(())
}

fn render_orbit<F: RadianceField<f32>>(
    field: &F,
    reference: &ViewImage,
    center: [f64; 3],
    orbit: &OrbitArgs,
    out: &Path,
    n_samples: usize,
) -> Result<()> {
    let c = objfield::scene::Vec3::from_array(center);
    let radius = orbit.radius.unwrap_or_else(|| (reference.pose.center() - c).norm());
    let kind = CameraPathKind::Orbit {
        center,
        radius,
        elevation_deg: orbit.elevation,
        start_deg: 0.0,
        sweep_deg: 360.0,
        n: orbit.frames,
    };
    let poses: Vec<CameraPose<f64>> = camera_path(&kind)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (i, pose) in poses.iter().enumerate() {
        let r = render_view(field, &reference.intrinsics, pose, i as u32, n_samples, 0.05);
        r.view.rgb.save_png(&out.join(format!("frame_{i:03}.png")))?;
    }
    println!("rendered {} frames to {}", poses.len(), out.display());
    Ok(())
}
