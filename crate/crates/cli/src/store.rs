//! On-disk layouts owned by the command line: synthetic datasets and mask sets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use objfield::colmap::{save_colmap_model, Manifest, ManifestView, ModelFormat, PoseSource, SparseCloud, MANIFEST_VERSION};
use objfield::pipeline::{SynthConfig, Segmentation};
use objfield::scene::{Mask, MaskBits, MaskStatus, ViewMeta};
use objfield::segmenter::PointPrompt;
use objfield::synth::{fabricate_sparse_cloud, preset, render_scene};
use serde::{Deserialize, Serialize};

/// Bad flag values that clap cannot catch.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const MANIFEST: &str = "manifest.json";
pub const MASK_INDEX: &str = "index.json";
const DEPTH_SCALE: f64 = 0.001;

/// Accepts either the manifest itself or its directory.
pub fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST)
    } else {
        p.to_path_buf()
    }
}

/// Same convention for mask sets.
pub fn mask_index_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MASK_INDEX)
    } else {
        p.to_path_buf()
    }
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

/// Renders `name` and writes images, depth, instance maps, a binary COLMAP
/// model and the manifest under `out`.
pub fn write_synthetic(name: &str, cfg: &SynthConfig, seed: u64, out: &Path) -> Result<usize> {
    let spec = preset(name)?;
    let rendered = render_scene(&spec)?;
    let views: Vec<_> = rendered.iter().map(|r| r.view.clone()).collect();
    let fab = fabricate_sparse_cloud(&spec, &views, cfg.n_points, cfg.noise_px, seed)?;
    for d in ["images", "depth", "instances"] {
        mkdir(&out.join(d))?;
    }
    let metas: Vec<ViewMeta> = views.iter().map(ViewMeta::from).collect();
    save_colmap_model(&fab.cloud, &metas, &out.join("sparse"), ModelFormat::Binary)?;
    let mut entries = Vec::new();
    for (r, meta) in rendered.iter().zip(&metas) {
        let image = format!("images/{}", meta.name);
        let depth = format!("depth/{}", meta.name);
        let instance = format!("instances/{}", meta.name);
        r.view.rgb.save_png(&out.join(&image))?;
        r.view.depth.as_ref().expect("synthetic views carry depth").save_png_mm(&out.join(&depth), DEPTH_SCALE)?;
        r.instances.save_png(&out.join(&instance))?;
        entries.push(ManifestView {
            view_id: r.view.view_id,
            image,
            depth: Some(depth),
            instance: Some(instance),
            intrinsics: None,
            pose: None,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        pose_source: PoseSource::Colmap,
        depth_scale: DEPTH_SCALE,
        colmap: Some("sparse".into()),
        views: entries,
    };
    manifest.save(&out.join(MANIFEST))?;
    Ok(views.len())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskEntry {
    pub view_id: u32,
    pub status: MaskStatus,
    pub score: f64,
    pub file: String,
    /// Mask vs point-cloud estimate, when the occlusion filter judged the view.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
}

/// Everything `train` needs from a segmentation run, next to the mask PNGs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskIndex {
    pub object_id: u32,
    pub seed_view: u32,
    pub prompts: Vec<PointPrompt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub visit_order: Vec<u32>,
    pub discarded: Vec<u32>,
    /// Sparse point ids attributed to the object.
    pub points: Vec<u64>,
    pub views: Vec<MaskEntry>,
}

pub fn write_masks(out: &Path, seg: &Segmentation, mut index: MaskIndex) -> Result<MaskIndex> {
    mkdir(out)?;
    let ious: BTreeMap<u32, Option<f64>> = seg.reports[0].entries.iter().map(|e| (e.view_id, e.iou)).collect();
    index.visit_order = seg.propagation.visit_order.clone();
    index.discarded = seg.reports[0].discarded();
    index.points = seg.object_clouds[0].points.keys().copied().collect();
    index.views.clear();
    for (id, m) in seg.masks(0) {
        let file = format!("view_{id:04}.png");
        m.bits.save_png(&out.join(&file))?;
        index.views.push(MaskEntry { view_id: *id, status: m.status, score: m.score, file, iou: ious.get(id).copied().flatten() });
    }
    let text = serde_json::to_string_pretty(&index)?;
    let path = out.join(MASK_INDEX);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(index)
}

pub fn read_masks(path: &Path) -> Result<(MaskIndex, BTreeMap<u32, Mask>)> {
    let path = mask_index_path(path);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let index: MaskIndex = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut masks = BTreeMap::new();
    for e in &index.views {
        let bits = MaskBits::load_png(&dir.join(&e.file))?;
        masks.insert(e.view_id, Mask { view_id: e.view_id, bits, score: e.score, status: e.status });
    }
    Ok((index, masks))
}

/// The object's sub-cloud as recorded in the index.
pub fn object_cloud(cloud: &SparseCloud, index: &MaskIndex) -> SparseCloud {
    cloud.restrict(&index.points.iter().copied().collect())
}
