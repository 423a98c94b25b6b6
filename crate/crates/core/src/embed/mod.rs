//! Feature extractors mapping fixed-length beats to embedding vectors.
//!
//! An [`EmbedderKind`] is a registered strategy that produces a fitted
//! [`Embedder`] from labeled training beats (or ignores them, for
//! training-free kinds).

pub mod mlp;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentSpec;
use crate::dsp::{normalize, resample_fourier, DspError, Normalization};
use crate::registry::{Registry, UnknownStrategy};

pub use mlp::{gradient_check, mlp_train, Activation, MlpHyper, MlpModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid embedder settings: {0}")]
    InvalidSettings(String),
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
}

/// Embedder block of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderSettings {
    pub kind: String,
    pub hidden_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub augment: AugmentSpec,
}

impl Default for EmbedderSettings {
    fn default() -> Self {
        Self {
            kind: "mlp".into(),
            hidden_dim: 64,
            lr: 0.05,
            epochs: 40,
            batch: 32,
            augment: AugmentSpec::default(),
        }
    }
}

/// A fitted feature extractor.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, beat: &[f64]) -> Result<Vec<f64>, EmbedError>;
}

pub trait EmbedderKind: Send + Sync {
    fn needs_training(&self) -> bool;
    /// `beats` all have the input length; `labels` index training subjects.
    fn fit(
        &self,
        beats: &[Vec<f64>],
        labels: &[usize],
        input_len: usize,
        settings: &EmbedderSettings,
        seed: u64,
    ) -> Result<Box<dyn Embedder>, EmbedError>;
}

/// Fourier-resample to `target_len`, then z-score.
pub fn morphology_embed(beat: &[f64], target_len: usize) -> Result<Vec<f64>, EmbedError> {
    if target_len < 8 {
        return Err(EmbedError::InvalidSettings("target_len must be >= 8".into()));
    }
    let r = if beat.len() == target_len {
        beat.to_vec()
    } else {
        resample_fourier(beat, target_len)
    };
    Ok(normalize(&r, Normalization::Zscore)?)
}

pub struct MorphologyEmbedder {
    pub target_len: usize,
}

impl Embedder for MorphologyEmbedder {
    fn name(&self) -> &str {
        "morphology"
    }
    fn dim(&self) -> usize {
        self.target_len
    }
    fn embed(&self, beat: &[f64]) -> Result<Vec<f64>, EmbedError> {
        morphology_embed(beat, self.target_len)
    }
}

struct MorphologyKind;

impl EmbedderKind for MorphologyKind {
    fn needs_training(&self) -> bool {
        false
    }
    fn fit(
        &self,
        _: &[Vec<f64>],
        _: &[usize],
        input_len: usize,
        _: &EmbedderSettings,
        _: u64,
    ) -> Result<Box<dyn Embedder>, EmbedError> {
        Ok(Box::new(MorphologyEmbedder { target_len: input_len }))
    }
}

pub struct MlpEmbedder {
    pub model: MlpModel,
    pub losses: Vec<f64>,
}

impl Embedder for MlpEmbedder {
    fn name(&self) -> &str {
        "mlp"
    }
    fn dim(&self) -> usize {
        self.model.hidden_dim
    }
    fn embed(&self, beat: &[f64]) -> Result<Vec<f64>, EmbedError> {
        self.model.embed(beat)
    }
}

struct MlpKind;

impl EmbedderKind for MlpKind {
    fn needs_training(&self) -> bool {
        true
    }
    fn fit(
        &self,
        beats: &[Vec<f64>],
        labels: &[usize],
        _: usize,
        s: &EmbedderSettings,
        seed: u64,
    ) -> Result<Box<dyn Embedder>, EmbedError> {
        let hp = MlpHyper {
            hidden_dim: s.hidden_dim,
            lr: s.lr,
            epochs: s.epochs,
            batch: s.batch,
            seed,
        };
        let (model, losses) = mlp_train(beats, labels, &hp)?;
        Ok(Box::new(MlpEmbedder { model, losses }))
    }
}

pub fn embedder_registry() -> &'static Registry<dyn EmbedderKind> {
    static REG: OnceLock<Registry<dyn EmbedderKind>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn EmbedderKind> = Registry::new("embedder");
        r.register("morphology", Box::new(MorphologyKind));
        r.register("mlp", Box::new(MlpKind));
        r
    })
}
