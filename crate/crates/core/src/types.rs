//! Domain vocabulary shared across the pipeline.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RecordingError {
    #[error("recording has no channels")]
    NoChannels,
    #[error("channel {0} is empty")]
    EmptyChannel(usize),
    #[error("channel lengths differ ({0} vs {1})")]
    RaggedChannels(usize, usize),
    #[error("sampling rate must be positive, got {0}")]
    BadSamplingRate(f64),
}

/// A multi-channel sampled ECG with subject/session/day provenance.
///
/// Channels hold millivolts and all share one length.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub session_id: String,
    pub day_index: u32,
    pub record_index: u32,
    pub fs: f64,
    channels: Vec<Vec<f64>>,
}

impl Recording {
    pub fn new(
        subject_id: impl Into<String>,
        session_id: impl Into<String>,
        day_index: u32,
        record_index: u32,
        fs: f64,
        channels: Vec<Vec<f64>>,
    ) -> Result<Self, RecordingError> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(RecordingError::BadSamplingRate(fs));
        }
        let first = channels.first().ok_or(RecordingError::NoChannels)?;
        if first.is_empty() {
            return Err(RecordingError::EmptyChannel(0));
        }
        for ch in &channels[1..] {
            if ch.len() != first.len() {
                return Err(RecordingError::RaggedChannels(first.len(), ch.len()));
            }
        }
        Ok(Self {
            subject_id: subject_id.into(),
            session_id: session_id.into(),
            day_index,
            record_index,
            fs,
            channels,
        })
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> Option<&[f64]> {
        self.channels.get(i).map(Vec::as_slice)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    /// Keeps only channel `i`.
    pub fn select_channel(mut self, i: usize) -> Option<Self> {
        if i >= self.channels.len() {
            return None;
        }
        let ch = self.channels.swap_remove(i);
        self.channels = vec![ch];
        Some(self)
    }
}

/// Whether the evaluated identities were seen by the embedder in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Closed,
    Open,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Closed => "closed",
            Setting::Open => "open",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub regime: String,
    pub setting: Setting,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.regime, self.setting)
    }
}

/// Single-seed metric values for one (regime, setting) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub rank1: f64,
    pub rank5: f64,
    pub eer: f64,
    pub auc: f64,
    pub dprime: f64,
    pub tar_at_far: f64,
}

impl MetricValues {
    pub const NAMES: [&'static str; 6] = ["rank1", "rank5", "eer", "auc", "dprime", "tar_at_far"];

    pub fn as_array(&self) -> [f64; 6] {
        [self.rank1, self.rank5, self.eer, self.auc, self.dprime, self.tar_at_far]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            rank1: a[0],
            rank5: a[1],
            eer: a[2],
            auc: a[3],
            dprime: a[4],
            tar_at_far: a[5],
        }
    }
}

/// Subject bookkeeping for one regime application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SubjectCounts {
    pub total: usize,
    pub used: usize,
    pub excluded: usize,
}

/// Output of one seed for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub key: CellKey,
    pub seed: u64,
    pub metrics: MetricValues,
    pub subjects: SubjectCounts,
    pub n_probes: usize,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub rank1: MeanStd,
    pub rank5: MeanStd,
    pub eer: MeanStd,
    pub auc: MeanStd,
    pub dprime: MeanStd,
    pub tar_at_far: MeanStd,
}

impl MetricSummary {
    pub fn as_array(&self) -> [MeanStd; 6] {
        [self.rank1, self.rank5, self.eer, self.auc, self.dprime, self.tar_at_far]
    }

    pub fn from_array(a: [MeanStd; 6]) -> Self {
        Self {
            rank1: a[0],
            rank5: a[1],
            eer: a[2],
            auc: a[3],
            dprime: a[4],
            tar_at_far: a[5],
        }
    }
}

/// Run metadata. Timestamps are wall-clock seconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMeta {
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub started_unix: Option<u64>,
    pub finished_unix: Option<u64>,
}

/// Across-seed aggregate of every computed cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub cells: BTreeMap<CellKey, MetricSummary>,
    pub subjects: BTreeMap<CellKey, SubjectCounts>,
    pub per_seed: Vec<SeedRecord>,
    pub warnings: Vec<String>,
    pub meta: RunMeta,
}
