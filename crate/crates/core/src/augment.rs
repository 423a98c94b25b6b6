//! Training-time augmentation of segments.
//!
//! Every augmented copy draws from its own RNG stream keyed by the base seed,
//! the segment's provenance and anchor, and the copy index, so the output
//! does not depend on input order or scheduling.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::resample_fourier;
use crate::seeding::{hash_str, rng_for};
use crate::segment::Segment;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("invalid augmentation op: {0}")]
    InvalidOp(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentOp {
    /// multiply by `s ~ U[low, high]`
    AmplitudeScale {
        low: f64,
        high: f64,
    },
    GaussianNoise {
        sigma: f64,
    },
    /// shift by `k ~ U{-K..=K}` samples, `K = round(max_shift_s·fs)`, zero fill
    TimeShift {
        max_shift_s: f64,
    },
    /// keep a random contiguous `fraction` and resample back to full length
    RandomCrop {
        fraction: f64,
    },
}

impl AugmentOp {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let ok = match *self {
            AugmentOp::AmplitudeScale { low, high } => low > 0.0 && low <= high && high.is_finite(),
            AugmentOp::GaussianNoise { sigma } => sigma >= 0.0 && sigma.is_finite(),
            AugmentOp::TimeShift { max_shift_s } => max_shift_s >= 0.0 && max_shift_s.is_finite(),
            AugmentOp::RandomCrop { fraction } => fraction > 0.0 && fraction <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(AugmentError::InvalidOp(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSpec {
    pub ops: Vec<AugmentOp>,
    /// augmented copies per original
    pub multiplier: usize,
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        self.ops.iter().try_for_each(AugmentOp::validate)
    }
}

/// Applies one op to a segment sampled at `fs`.
pub fn apply_augmentation(seg: &Segment, op: &AugmentOp, fs: f64, seed: u64) -> Segment {
    let mut rng = rng_for(seed, "augment-op", &[]);
    let x = &seg.samples;
    let n = x.len();
    let samples = match *op {
        AugmentOp::AmplitudeScale { low, high } => {
            let s = if low == high { low } else { rng.random_range(low..=high) };
            x.iter().map(|v| v * s).collect()
        }
        AugmentOp::GaussianNoise { sigma } => {
            if sigma == 0.0 {
                x.clone()
            } else {
                let normal = Normal::new(0.0, sigma).expect("valid sigma");
                x.iter().map(|v| v + normal.sample(&mut rng)).collect()
            }
        }
        AugmentOp::TimeShift { max_shift_s } => {
            let kmax = (max_shift_s * fs).round() as i64;
            let k = if kmax == 0 { 0 } else { rng.random_range(-kmax..=kmax) };
            time_shift(x, k)
        }
        AugmentOp::RandomCrop { fraction } => {
            let keep = ((fraction * n as f64).round() as usize).clamp(2.min(n), n);
            if keep == n || n < 2 {
                x.clone()
            } else {
                let start = rng.random_range(0..=n - keep);
                resample_fourier(&x[start..start + keep], n)
            }
        }
    };
    Segment { samples, ..seg.clone() }
}

/// `out[i] = x[i − k]` with zeros where the source falls outside `x`.
pub fn time_shift(x: &[f64], k: i64) -> Vec<f64> {
    let n = x.len() as i64;
    (0..n)
        .map(|i| {
            let j = i - k;
            if (0..n).contains(&j) {
                x[j as usize]
            } else {
                0.0
            }
        })
        .collect()
}

fn item_key(seg: &Segment) -> u64 {
    let p = &seg.provenance;
    hash_str(&format!(
        "{}\u{1f}{}\u{1f}{}\u{1f}{}\u{1f}{:?}",
        p.subject_id, p.session_id, p.day_index, p.record_index, seg.anchor
    ))
}

/// Originals followed by `multiplier` copies of each (in input order), each
/// copy passing through every op in sequence.
pub fn augment_training_set(segments: &[Segment], spec: &AugmentSpec, fs: f64, seed: u64) -> Vec<Segment> {
    let mut out = segments.to_vec();
    if spec.multiplier == 0 || spec.ops.is_empty() {
        return out;
    }
    for seg in segments {
        let key = item_key(seg);
        for copy in 0..spec.multiplier as u64 {
            let mut cur = seg.clone();
            for (k, op) in spec.ops.iter().enumerate() {
                let s = crate::seeding::derive_seed(seed, "augment", &[key, copy, k as u64]);
                cur = apply_augmentation(&cur, op, fs, s);
            }
            out.push(cur);
        }
    }
    out
}
