use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aabb::{object_aabb, Aabb, AabbConfig};
use super::adam::Adam;
use super::batch::{BatchConfig, BatchSampler};
use super::loss::{loss, LossConfig};
use super::render::{psnr, render_view};
use super::voxel::VoxelField;
use super::FieldError;
use crate::colmap::SparseCloud;
use crate::scalar::Scalar;
use crate::scene::{Mask, RgbImage, ViewImage};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iters: usize,
    pub lambda_d: f64,
    pub lr_density: f64,
    pub lr_color: f64,
    pub samples_per_ray: usize,
    /// Grid points per axis.
    pub resolution: usize,
    pub density_init: f64,
    pub aabb: AabbConfig,
    pub batch: BatchConfig,
    /// Excluded from training and scored every `eval_every` iterations.
    pub holdout_view: Option<u32>,
    /// Defaults to a tenth of `iters`.
    pub eval_every: Option<usize>,
    pub jitter: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iters: 2000,
            lambda_d: 0.1,
            lr_density: 0.1,
            lr_color: 0.1,
            samples_per_ray: 128,
            resolution: 64,
            density_init: -5.0,
            aabb: AabbConfig::default(),
            batch: BatchConfig::default(),
            holdout_view: None,
            eval_every: None,
            jitter: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iter: usize,
    pub l_rgb: f64,
    pub l_depth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub field: VoxelField<T>,
    pub log: Vec<LogEntry>,
}

pub fn write_log(log: &[LogEntry], path: &Path) -> Result<(), FieldError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| FieldError::io(path, e))?);
    for e in log {
        let line = serde_json::to_string(e).expect("log entry serializes");
        writeln!(f, "{line}").map_err(|e| FieldError::io(path, e))?;
    }
    f.flush().map_err(|e| FieldError::io(path, e))
}

/// Ground truth restricted to the mask, black elsewhere.
pub fn masked_target(view: &ViewImage, mask: &Mask) -> RgbImage {
    let mut out = view.rgb.clone();
    for (px, m) in out.data.iter_mut().zip(&mask.bits.data) {
        if !*m {
            *px = [0.0; 3];
        }
    }
    out
}

/// PSNR of the field rendered at `view` against the masked ground truth.
pub fn masked_psnr<T: Scalar>(field: &VoxelField<T>, view: &ViewImage, mask: &Mask, n_samples: usize, near: f64) -> f64 {
    let r = render_view(field, &view.intrinsics, &view.pose, view.view_id, n_samples, near);
    psnr(&r.view.rgb, &masked_target(view, mask))
}

/// Fits a field to the accepted masks, in the box around `cloud`.
pub fn train<T: Scalar>(
    views: &[ViewImage],
    masks: &BTreeMap<u32, Mask>,
    cloud: &SparseCloud,
    cfg: &TrainConfig,
) -> Result<Trained<T>, FieldError> {
    let aabb = object_aabb(cloud, &cfg.aabb)?;
    train_in_box(views, masks, cloud, &aabb, cfg)
}

pub fn train_in_box<T: Scalar>(
    views: &[ViewImage],
    masks: &BTreeMap<u32, Mask>,
    cloud: &SparseCloud,
    aabb: &Aabb<f64>,
    cfg: &TrainConfig,
) -> Result<Trained<T>, FieldError> {
    if cfg.samples_per_ray == 0 || cfg.batch.batch_rays == 0 {
        return Err(FieldError::Config("samples_per_ray and batch_rays must be positive".into()));
    }
    let mut train_masks = masks.clone();
    let holdout = cfg.holdout_view.and_then(|id| {
        train_masks.remove(&id);
        let view = views.iter().find(|v| v.view_id == id)?;
        Some((view, masks.get(&id)?))
    });
    if cfg.holdout_view.is_some() && holdout.is_none() {
        return Err(FieldError::Config(format!("held-out view {:?} has no view or mask", cfg.holdout_view)));
    }
    let n_accepted = train_masks.values().filter(|m| m.is_accepted()).count();
    if n_accepted < 2 {
        return Err(FieldError::NotEnoughViews(n_accepted));
    }
    let mut sampler = BatchSampler::<T>::new(views, &train_masks, cloud, aabb, &cfg.batch, cfg.seed)?;
    let r = cfg.resolution;
    let mut field = VoxelField::new(aabb.cast(), [r, r, r], T::lit(cfg.density_init), T::zero())?;
    let mut adam_d = Adam::new(field.density.len(), T::lit(cfg.lr_density));
    let mut adam_c = Adam::new(field.color.len(), T::lit(cfg.lr_color));
    let eval_every = cfg.eval_every.unwrap_or(cfg.iters / 10).max(1);
    let mut log = Vec::new();
    for it in 0..=cfg.iters {
        let batch = sampler.next_batch();
        let lcfg = LossConfig {
            lambda_d: T::lit(cfg.lambda_d),
            n_samples: cfg.samples_per_ray,
            jitter_seed: cfg.jitter.then(|| cfg.seed.wrapping_add(it as u64).wrapping_mul(0x2545_f491_4f6c_dd1d)),
        };
        let out = loss(&field, &batch, &lcfg);
        let finite = out.total.is_finite()
            && out.grad_density.iter().all(|g| g.is_finite())
            && out.grad_color.iter().all(|g| g.is_finite());
        if !finite {
            return Err(FieldError::Divergence { iter: it, last_good: Box::new(field.cast()) });
        }
        if it % eval_every == 0 || it == cfg.iters {
            let psnr = holdout.map(|(v, m)| masked_psnr(&field, v, m, cfg.samples_per_ray, cfg.batch.near));
            let entry = LogEntry { iter: it, l_rgb: out.l_rgb.as_f64(), l_depth: out.l_depth.as_f64(), psnr };
            log::info!("{}", serde_json::to_string(&entry).unwrap_or_default());
            log.push(entry);
        }
        if it == cfg.iters {
            break;
        }
        adam_d.step(&mut field.density, &out.grad_density);
        adam_c.step(&mut field.color, &out.grad_color);
    }
    Ok(Trained { field, log })
}
