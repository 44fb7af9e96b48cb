//! Promptable segmentation and text-to-box detection behind pluggable backends.

mod prompt;
pub mod protocol;
pub mod rle;

use std::collections::BTreeMap;
use std::time::Duration;

pub use self::prompt::{BoxPrompt, PointPrompt, Polarity, PromptSet, ScoredBox};
use self::protocol::BridgeClient;
use crate::scene::{InstanceMap, Mask, ViewImage};
use crate::synth::oracle::{oracle_boxes, oracle_segment};

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("segmenter returned an empty mask")]
    EmptyMask,
    #[error("no ground truth instance map for view {0}")]
    MissingGroundTruth(u32),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("bridge transport: {0}")]
    Transport(String),
    #[error("bridge timed out after {0:?}")]
    Timeout(Duration),
    #[error("bridge protocol: {0}")]
    Protocol(String),
}

impl SegmentError {
    /// Transport and protocol failures abort a pipeline run; the rest are per-view outcomes.
    pub fn is_transport(&self) -> bool {
        matches!(self, Self::Transport(_) | Self::Timeout(_) | Self::Protocol(_))
    }
}

/// Image + prompts → mask.
pub trait Segmenter {
    fn segment(&mut self, view: &ViewImage, prompts: &PromptSet) -> Result<Mask, SegmentError>;
}

/// Image + text → score-sorted boxes.
pub trait BoxProvider {
    fn detect_boxes(&mut self, view: &ViewImage, text: &str) -> Result<Vec<ScoredBox>, SegmentError>;
}

/// Ground-truth backed segmenter/detector for synthetic data.
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    pub instances: BTreeMap<u32, InstanceMap>,
    /// Text label → instance id for detection.
    pub labels: BTreeMap<String, u32>,
    /// Positive dilates, negative erodes every returned mask by this many pixels.
    pub boundary_noise_px: i32,
}

impl OracleBackend {
    pub fn new(instances: BTreeMap<u32, InstanceMap>) -> Self {
        Self { instances, labels: BTreeMap::new(), boundary_noise_px: 0 }
    }

    pub fn with_label(mut self, text: &str, instance_id: u32) -> Self {
        self.labels.insert(text.to_string(), instance_id);
        self
    }

    fn map(&self, view_id: u32) -> Result<&InstanceMap, SegmentError> {
        self.instances.get(&view_id).ok_or(SegmentError::MissingGroundTruth(view_id))
    }
}

impl Segmenter for OracleBackend {
    fn segment(&mut self, view: &ViewImage, prompts: &PromptSet) -> Result<Mask, SegmentError> {
        let bits = oracle_segment(self.map(view.view_id)?, prompts)?;
        let bits = match self.boundary_noise_px {
            n if n > 0 => bits.dilated(n as u32),
            n if n < 0 => bits.eroded(n.unsigned_abs()),
            _ => bits,
        };
        if bits.is_empty() {
            return Err(SegmentError::EmptyMask);
        }
        Ok(Mask::new(view.view_id, bits, 1.0))
    }
}

impl BoxProvider for OracleBackend {
    fn detect_boxes(&mut self, view: &ViewImage, text: &str) -> Result<Vec<ScoredBox>, SegmentError> {
        if text.trim().is_empty() {
            return Err(SegmentError::InvalidPrompt("empty detection text".into()));
        }
        let id = *self.labels.get(text).ok_or_else(|| SegmentError::UnknownLabel(text.to_string()))?;
        Ok(oracle_boxes(self.map(view.view_id)?, id))
    }
}

pub enum Backend {
    Oracle(OracleBackend),
    Bridge(BridgeClient),
}

/// A segmentation/detection backend plus its connection settings. One request
/// is in flight per handle.
pub struct SegmenterHandle {
    pub backend: Backend,
    pub endpoint: Option<String>,
    pub timeout: Duration,
}

impl SegmenterHandle {
    pub fn oracle(backend: OracleBackend) -> Self {
        Self { backend: Backend::Oracle(backend), endpoint: None, timeout: Duration::from_secs(30) }
    }

    pub fn bridge(endpoint: &str, timeout: Duration) -> Result<Self, SegmentError> {
        let transport = protocol::open_endpoint(endpoint, timeout)?;
        let client = BridgeClient::handshake(transport, timeout)?;
        Ok(Self { backend: Backend::Bridge(client), endpoint: Some(endpoint.to_string()), timeout })
    }

    pub fn from_transport(transport: Box<dyn protocol::LineTransport>, timeout: Duration) -> Result<Self, SegmentError> {
        let client = BridgeClient::handshake(transport, timeout)?;
        Ok(Self { backend: Backend::Bridge(client), endpoint: None, timeout })
    }
}

impl Segmenter for SegmenterHandle {
    fn segment(&mut self, view: &ViewImage, prompts: &PromptSet) -> Result<Mask, SegmentError> {
        if prompts.is_empty() {
            return Err(SegmentError::InvalidPrompt("empty prompt set".into()));
        }
        prompts.validate(view.width(), view.height())?;
        match &mut self.backend {
            Backend::Oracle(o) => o.segment(view, prompts),
            Backend::Bridge(c) => {
                let (bits, score) = c.segment(&view.rgb, prompts)?;
                if bits.is_empty() {
                    return Err(SegmentError::EmptyMask);
                }
                Ok(Mask::new(view.view_id, bits, score))
            }
        }
    }
}

impl BoxProvider for SegmenterHandle {
    fn detect_boxes(&mut self, view: &ViewImage, text: &str) -> Result<Vec<ScoredBox>, SegmentError> {
        if text.trim().is_empty() {
            return Err(SegmentError::InvalidPrompt("empty detection text".into()));
        }
        match &mut self.backend {
            Backend::Oracle(o) => o.detect_boxes(view, text),
            Backend::Bridge(c) => c.detect(&view.rgb, text),
        }
    }
}
