//! Fixed-length beat windows around R-peaks and blind sliding windows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Recording;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("window of {window} samples longer than signal of {len}")]
    WindowLongerThanSignal { window: usize, len: usize },
    #[error("invalid segmentation parameters: {0}")]
    InvalidParameters(String),
}

/// Where a segment came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Provenance {
    pub subject_id: String,
    pub session_id: String,
    pub day_index: u32,
    pub record_index: u32,
}

impl Provenance {
    pub fn of(rec: &Recording) -> Self {
        Self {
            subject_id: rec.subject_id.clone(),
            session_id: rec.session_id.clone(),
            day_index: rec.day_index,
            record_index: rec.record_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Anchor {
    /// R-peak sample index in the source signal
    Peak(usize),
    /// first sample of a blind window
    WindowStart(usize),
}

impl Anchor {
    pub fn index(self) -> usize {
        match self {
            Anchor::Peak(i) | Anchor::WindowStart(i) => i,
        }
    }
}

/// A beat (`Anchor::Peak`) or blind window (`Anchor::WindowStart`).
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f64>,
    pub anchor: Anchor,
    /// sequential over the kept segments of one record
    pub position: usize,
    pub provenance: Provenance,
}

impl Segment {
    /// Source sample range `[start, end)`.
    pub fn span(&self, fs: f64, pre_s: f64) -> (usize, usize) {
        match self.anchor {
            Anchor::Peak(p) => {
                let start = p - (pre_s * fs).round() as usize;
                (start, start + self.samples.len())
            }
            Anchor::WindowStart(s) => (s, s + self.samples.len()),
        }
    }
}

/// Index of the largest `|x|` within `±half_window_s` of `peak`; earliest on
/// ties.
pub fn align_peak(x: &[f64], peak: usize, half_window_s: f64, fs: f64) -> usize {
    assert!(peak < x.len(), "peak {peak} outside signal of {}", x.len());
    let h = (half_window_s * fs).round() as usize;
    let lo = peak.saturating_sub(h);
    let hi = (peak + h).min(x.len() - 1);
    let mut best = lo;
    for i in lo..=hi {
        if x[i].abs() > x[best].abs() {
            best = i;
        }
    }
    best
}

/// One segment of `round((pre_s+post_s)·fs)` samples per peak whose window
/// fits, with the peak at `round(pre_s·fs)`. `align` is the alignment
/// half-window in seconds.
pub fn segment_beats(
    x: &[f64],
    fs: f64,
    peaks: &[usize],
    pre_s: f64,
    post_s: f64,
    align: Option<f64>,
    provenance: &Provenance,
) -> Vec<Segment> {
    let pre = (pre_s * fs).round() as usize;
    let len = ((pre_s + post_s) * fs).round() as usize;
    let mut out = Vec::with_capacity(peaks.len());
    for &p in peaks {
        if p >= x.len() {
            continue;
        }
        let p = match align {
            Some(h) => align_peak(x, p, h, fs),
            None => p,
        };
        if p < pre || p - pre + len > x.len() {
            continue;
        }
        let start = p - pre;
        out.push(Segment {
            samples: x[start..start + len].to_vec(),
            anchor: Anchor::Peak(p),
            position: out.len(),
            provenance: provenance.clone(),
        });
    }
    out
}

/// Windows at `0, S, 2S, …` while they fit: `floor((len − W)/S) + 1` of them.
pub fn segment_blind(
    x: &[f64],
    fs: f64,
    window_s: f64,
    stride_s: f64,
    provenance: &Provenance,
) -> Result<Vec<Segment>, SegmentError> {
    if !(stride_s > 0.0 && stride_s <= window_s) {
        return Err(SegmentError::InvalidParameters(format!(
            "need 0 < stride_s ({stride_s}) <= window_s ({window_s})"
        )));
    }
    let w = (window_s * fs).round() as usize;
    let s = ((stride_s * fs).round() as usize).max(1);
    if w == 0 || w > x.len() {
        return Err(SegmentError::WindowLongerThanSignal {
            window: w,
            len: x.len(),
        });
    }
    let count = (x.len() - w) / s + 1;
    Ok((0..count)
        .map(|k| Segment {
            samples: x[k * s..k * s + w].to_vec(),
            anchor: Anchor::WindowStart(k * s),
            position: k,
            provenance: provenance.clone(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMode {
    #[default]
    Beat,
    Blind,
}

/// Segmentation block of a run configuration. Only the fields of the chosen
/// mode may be set; [`SegmentationSettings::validated`] fills their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationSettings {
    #[serde(default)]
    pub mode: SegmentMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_peak: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_half_window_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride_s: Option<f64>,
}

impl SegmentationSettings {
    pub fn validated(&self) -> Result<Self, String> {
        match self.mode {
            SegmentMode::Beat => {
                if self.window_s.is_some() || self.stride_s.is_some() {
                    return Err("beat mode does not take window_s/stride_s".into());
                }
                let pre_s = self.pre_s.unwrap_or(0.2);
                let post_s = self.post_s.unwrap_or(0.4);
                let half = self.align_half_window_s.unwrap_or(0.05);
                if !(pre_s >= 0.0 && post_s >= 0.0 && pre_s + post_s > 0.0) {
                    return Err(format!(
                        "need pre_s, post_s >= 0 and pre_s + post_s > 0 (got {pre_s}, {post_s})"
                    ));
                }
                if !(half >= 0.0) {
                    return Err("align_half_window_s must be >= 0".into());
                }
                Ok(Self {
                    mode: SegmentMode::Beat,
                    pre_s: Some(pre_s),
                    post_s: Some(post_s),
                    align_peak: Some(self.align_peak.unwrap_or(true)),
                    align_half_window_s: Some(half),
                    window_s: None,
                    stride_s: None,
                })
            }
            SegmentMode::Blind => {
                if self.pre_s.is_some()
                    || self.post_s.is_some()
                    || self.align_peak.is_some()
                    || self.align_half_window_s.is_some()
                {
                    return Err("blind mode does not take pre_s/post_s/align settings".into());
                }
                let window_s = self.window_s.unwrap_or(5.0);
                let stride_s = self.stride_s.unwrap_or(window_s);
                if !(stride_s > 0.0 && stride_s <= window_s) {
                    return Err(format!("need 0 < stride_s <= window_s (got {stride_s}, {window_s})"));
                }
                Ok(Self {
                    mode: SegmentMode::Blind,
                    window_s: Some(window_s),
                    stride_s: Some(stride_s),
                    ..Self::default()
                })
            }
        }
    }

    /// Seconds before the anchor a segment starts (0 in blind mode).
    pub fn pre_s(&self) -> f64 {
        self.pre_s.unwrap_or(0.0)
    }
}
