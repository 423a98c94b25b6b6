//! R-peak detection.
//!
//! The Pan-Tompkins detector runs at the caller's sampling rate with all
//! windows given in milliseconds. Detectors are registered by name in
//! [`detector_registry`].

use std::sync::OnceLock;

use thiserror::Error;

use crate::dsp::{apply_filter, DspError, FilterSpec};
use crate::registry::{Registry, UnknownStrategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RpeakError {
    #[error("fewer than 2 R-peaks detected")]
    NoPeaksDetected,
    #[error("sampling rate {0} Hz below the 100 Hz minimum")]
    SamplingRateTooLow(f64),
    #[error("signal shorter than 2 s ({0} samples)")]
    SignalTooShort(usize),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
}

/// Strictly increasing R-peak sample indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakList {
    pub indices: Vec<usize>,
    pub fs: f64,
    pub detector: String,
}

pub trait PeakDetector: Send + Sync {
    fn detect(&self, x: &[f64], fs: f64) -> Result<PeakList, RpeakError>;
}

pub const REFRACTORY_S: f64 = 0.2;

pub struct PanTompkins;

impl PeakDetector for PanTompkins {
    fn detect(&self, x: &[f64], fs: f64) -> Result<PeakList, RpeakError> {
        pan_tompkins(x, fs)
    }
}

pub fn detector_registry() -> &'static Registry<dyn PeakDetector> {
    static REG: OnceLock<Registry<dyn PeakDetector>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn PeakDetector> = Registry::new("rpeak detector");
        r.register("pan_tompkins", Box::new(PanTompkins));
        r
    })
}

/// Band-pass, derivative, squaring and moving-window integration.
/// Returned signal is aligned with `x` (derivative delay compensated,
/// integration window centred).
pub fn pan_tompkins_feature(x: &[f64], fs: f64) -> Result<Vec<f64>, RpeakError> {
    let filtered = apply_filter(&FilterSpec::butterworth_bandpass(2, 5.0, 15.0), x, fs)?;
    let n = filtered.len();
    let at = |i: isize| filtered[i.clamp(0, n as isize - 1) as usize];
    // y[n] = (2x[n] + x[n-1] - x[n-3] - 2x[n-4]) / 8, shifted by its 2-sample delay
    let squared: Vec<f64> = (0..n as isize)
        .map(|i| {
            let d = (2.0 * at(i + 2) + at(i + 1) - at(i - 1) - 2.0 * at(i - 2)) / 8.0;
            d * d
        })
        .collect();
    let mut w = ((0.150 * fs).round() as usize).max(1);
    if w.is_multiple_of(2) {
        w += 1;
    }
    let half = w / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + squared[i];
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect())
}

struct Levels {
    spki: f64,
    npki: f64,
}

impl Levels {
    fn threshold(&self) -> f64 {
        self.npki + 0.25 * (self.spki - self.npki)
    }
}

/// Classic dual-threshold QRS detector.
///
/// Thresholds start from the first 2 s after signal onset (SPKI = 0.25·max,
/// NPKI = 0.5·mean of the integrated signal). Each detection is moved to the
/// largest sample of `x` within ±50 ms.
pub fn pan_tompkins(x: &[f64], fs: f64) -> Result<PeakList, RpeakError> {
    if fs < 100.0 {
        return Err(RpeakError::SamplingRateTooLow(fs));
    }
    if (x.len() as f64) < 2.0 * fs {
        return Err(RpeakError::SignalTooShort(x.len()));
    }
    let mwi = pan_tompkins_feature(x, fs)?;
    let global_max = mwi.iter().cloned().fold(0.0, f64::max);
    if !(global_max > 0.0) || !global_max.is_finite() {
        return Err(RpeakError::NoPeaksDetected);
    }

    // learning window starts where activity starts so leading silence does
    // not seed zero thresholds
    let onset = mwi.iter().position(|&v| v > 1e-3 * global_max).unwrap_or(0);
    let learn_end = (onset + (2.0 * fs) as usize).min(mwi.len());
    let learn = &mwi[onset..learn_end];
    let mut lv = Levels {
        spki: 0.25 * learn.iter().cloned().fold(0.0, f64::max),
        npki: 0.5 * learn.iter().sum::<f64>() / learn.len() as f64,
    };

    let refractory = (REFRACTORY_S * fs).round() as usize;
    // crest of the integrated signal: largest value within half a refractory
    // period on each side (earliest on ties), which skips ripple on the flanks
    let reach = refractory / 2;
    let candidates: Vec<usize> = (1..mwi.len() - 1)
        .filter(|&i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(mwi.len() - 1);
            mwi[i] > 0.0 && mwi[lo..i].iter().all(|&v| v < mwi[i]) && mwi[i + 1..=hi].iter().all(|&v| v <= mwi[i])
        })
        .collect();

    let mut qrs: Vec<usize> = Vec::new();
    let mut noise: Vec<usize> = Vec::new();
    let rr_avg = |q: &[usize]| -> Option<f64> {
        if q.len() < 2 {
            return None;
        }
        let k = q.len().min(9);
        let tail = &q[q.len() - k..];
        Some((tail[k - 1] - tail[0]) as f64 / (k - 1) as f64)
    };

    let search_back = |now: usize, qrs: &mut Vec<usize>, noise: &mut Vec<usize>, lv: &mut Levels| loop {
        let (Some(rr), Some(&last)) = (rr_avg(qrs), qrs.last()) else {
            return;
        };
        if (now - last) as f64 <= 1.66 * rr {
            return;
        }
        let half_thr = lv.threshold() / 2.0;
        let best = noise
            .iter()
            .copied()
            .filter(|&c| c > last + refractory && c < now && mwi[c] > half_thr)
            .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]).then(b.cmp(&a)));
        match best {
            Some(c) => {
                lv.spki = 0.25 * mwi[c] + 0.75 * lv.spki;
                qrs.push(c);
                noise.retain(|&v| v > c);
            }
            None => return,
        }
    };

    for &c in &candidates {
        search_back(c, &mut qrs, &mut noise, &mut lv);
        if let Some(&last) = qrs.last() {
            if c < last + refractory {
                continue;
            }
        }
        let p = mwi[c];
        if p > lv.threshold() {
            lv.spki = 0.125 * p + 0.875 * lv.spki;
            qrs.push(c);
            noise.clear();
        } else {
            lv.npki = 0.125 * p + 0.875 * lv.npki;
            noise.push(c);
        }
    }
    search_back(mwi.len(), &mut qrs, &mut noise, &mut lv);

    let half = (0.050 * fs).round() as usize;
    let mut peaks: Vec<usize> = Vec::with_capacity(qrs.len());
    for q in qrs {
        let lo = q.saturating_sub(half);
        let hi = (q + half).min(x.len() - 1);
        let m = (lo..=hi)
            .max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a)))
            .expect("non-empty window");
        match peaks.last().copied() {
            Some(prev) if m <= prev => {}
            Some(prev) if m - prev < refractory => {
                if x[m] > x[prev] {
                    *peaks.last_mut().unwrap() = m;
                }
            }
            _ => peaks.push(m),
        }
    }
    if peaks.len() < 2 {
        return Err(RpeakError::NoPeaksDetected);
    }
    Ok(PeakList {
        indices: peaks,
        fs,
        detector: "pan_tompkins".into(),
    })
}

/// Sensitivity and precision of `detected` against `truth` with a ±`tol`
/// sample matching window (greedy one-to-one matching in time order).
pub fn match_peaks(truth: &[usize], detected: &[usize], tol: usize) -> (f64, f64) {
    let mut used = vec![false; detected.len()];
    let mut tp = 0usize;
    let mut j0 = 0usize;
    for &t in truth {
        while j0 < detected.len() && detected[j0] + tol < t {
            j0 += 1;
        }
        let mut j = j0;
        while j < detected.len() && detected[j] <= t + tol {
            if !used[j] {
                used[j] = true;
                tp += 1;
                break;
            }
            j += 1;
        }
    }
    let sens = if truth.is_empty() {
        1.0
    } else {
        tp as f64 / truth.len() as f64
    };
    let prec = if detected.is_empty() {
        1.0
    } else {
        tp as f64 / detected.len() as f64
    };
    (sens, prec)
}
