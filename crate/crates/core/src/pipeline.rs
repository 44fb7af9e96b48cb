//! End-to-end configuration and the segmentation driver shared by the command
//! line and the tests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::colmap::SparseCloud;
use crate::field::TrainConfig;
use crate::occlusion::{filter_views, FilterReport, OcclusionConfig, OcclusionError};
use crate::propagation::{export_object_cloud, propagate, ObjectSeed, Propagation, PropagationConfig, PropagationError};
use crate::scene::{Mask, ViewImage};
use crate::segmenter::Segmenter;
use crate::selfprompt::SelfPromptConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_points: usize,
    pub noise_px: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n_points: 3000, noise_px: 0.5 }
    }
}

/// Every tunable of the pipeline. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub propagation: PropagationConfig,
    pub occlusion: OcclusionConfig,
    pub selfprompt: SelfPromptConfig,
    pub train: TrainConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl PipelineConfig {
    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| ConfigError::Parse { path: path.display().to_string(), message })
    }

    /// Derives every stage's seed from one master seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.propagation.seed = seed.wrapping_add(1);
        self.selfprompt.seed = seed.wrapping_add(2);
        self.train.seed = seed.wrapping_add(3);
        self
    }

    pub fn synth_seed(&self) -> u64 {
        self.seed.wrapping_add(4)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SegmentationError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Occlusion(#[from] OcclusionError),
}

/// Masks and point lists for each object after propagation and occlusion filtering.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub propagation: Propagation,
    pub object_clouds: Vec<SparseCloud>,
    pub reports: Vec<FilterReport>,
}

impl Segmentation {
    pub fn masks(&self, object: usize) -> &BTreeMap<u32, Mask> {
        &self.propagation.masks[object]
    }
}

pub fn segment_objects(
    cloud: &SparseCloud,
    views: &[ViewImage],
    seeds: &[ObjectSeed],
    seg: &mut (impl Segmenter + ?Sized),
    prop: &PropagationConfig,
    occ: &OcclusionConfig,
) -> Result<Segmentation, SegmentationError> {
    let mut propagation = propagate(cloud, views, seeds, seg, prop)?;
    let mut object_clouds = Vec::new();
    let mut reports = Vec::new();
    for (list, masks) in propagation.objects.iter().zip(propagation.masks.iter_mut()) {
        let oc = export_object_cloud(cloud, list)?;
        reports.push(filter_views(masks, &oc, views, occ)?);
        object_clouds.push(oc);
    }
    Ok(Segmentation { propagation, object_clouds, reports })
}
