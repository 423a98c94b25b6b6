//! Parametric synthetic ECG datasets with ground-truth R-peaks.
//!
//! Each subject owns a five-component Gaussian beat model (P, Q, R, S, T).
//! Every session perturbs that model multiplicatively with a
//! session-specific draw scaled by `morphology_drift`; when `drift_rate`
//! is non-zero an additional persistent per-subject drift direction grows
//! linearly with the session's day index (`drift_rate · day / 30`), giving
//! progressive template aging on top of session-to-session variation.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{f32le_bytes, write_manifest, DatasetIndex, IngestError, RecordMeta, SignalFormat};
use crate::seeding::{derive_seed, hash_str, rng_for};
use crate::types::Recording;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("unknown preset `{0}` (known: fallacy30, aging4, ablation)")]
    UnknownPreset(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    /// mV
    pub amplitude: f64,
    /// seconds relative to the R peak
    pub center_offset: f64,
    /// seconds
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMorphology {
    pub p: Wave,
    pub q: Wave,
    pub r: Wave,
    pub s: Wave,
    pub t: Wave,
    pub heart_rate_bpm: f64,
    /// Keys the subject's session perturbations and aging direction.
    pub drift_seed: u64,
}

impl SubjectMorphology {
    pub fn waves(&self) -> [Wave; 5] {
        [self.p, self.q, self.r, self.s, self.t]
    }

    pub fn is_valid(&self) -> bool {
        let w = self.waves();
        w.iter().all(|x| x.width > 0.0)
            && self.r.amplitude > 0.0
            && self.r.center_offset == 0.0
            && w.windows(2).all(|p| p[0].center_offset < p[1].center_offset)
            && self.heart_rate_bpm > 0.0
    }

    fn scaled(&self, factors: &[f64; 16]) -> Self {
        let f = |w: Wave, i: usize| Wave {
            amplitude: w.amplitude * factors[i],
            center_offset: w.center_offset * factors[i + 1],
            width: w.width * factors[i + 2],
        };
        Self {
            p: f(self.p, 0),
            q: f(self.q, 3),
            r: Wave {
                center_offset: 0.0,
                ..f(self.r, 6)
            },
            s: f(self.s, 9),
            t: f(self.t, 12),
            heart_rate_bpm: self.heart_rate_bpm * factors[15],
            drift_seed: self.drift_seed,
        }
    }
}

/// Acquisition conditions of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEffects {
    pub session_id: String,
    #[serde(default)]
    pub day_index: u32,
    /// scale of the per-parameter multiplicative perturbation
    #[serde(default)]
    pub morphology_drift: f64,
    /// mV
    #[serde(default)]
    pub noise_sigma: f64,
    /// mV
    #[serde(default)]
    pub baseline_amp: f64,
    /// Hz
    #[serde(default = "default_wander_hz")]
    pub baseline_freq: f64,
    #[serde(default = "one")]
    pub amplitude_scale: f64,
    /// aging per 30 days; 0 disables day-dependent drift
    #[serde(default)]
    pub drift_rate: f64,
    /// std of the independent per-beat multiplicative jitter on each wave
    /// amplitude
    #[serde(default)]
    pub beat_variability: f64,
}

fn default_wander_hz() -> f64 {
    0.25
}
fn one() -> f64 {
    1.0
}

impl SessionEffects {
    pub fn clean(session_id: &str, day_index: u32) -> Self {
        Self {
            session_id: session_id.into(),
            day_index,
            morphology_drift: 0.0,
            noise_sigma: 0.0,
            baseline_amp: 0.0,
            baseline_freq: default_wander_hz(),
            amplitude_scale: 1.0,
            drift_rate: 0.0,
            beat_variability: 0.0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(self.noise_sigma >= 0.0 && self.amplitude_scale > 0.0 && self.morphology_drift >= 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "session {}: need noise_sigma >= 0, amplitude_scale > 0, morphology_drift >= 0",
                self.session_id
            )));
        }
        if !(0.0..0.5).contains(&self.beat_variability) {
            return Err(SynthError::InvalidSpec(format!(
                "session {}: beat_variability must be in [0, 0.5)",
                self.session_id
            )));
        }
        if self.morphology_drift >= 0.9 || self.drift_rate < 0.0 {
            return Err(SynthError::InvalidSpec(format!(
                "session {}: morphology_drift must be < 0.9 and drift_rate >= 0",
                self.session_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub sessions: Vec<SessionEffects>,
    pub duration_s: f64,
    pub fs: f64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_subjects < 2 {
            return Err(SynthError::InvalidSpec("need at least 2 subjects".into()));
        }
        if self.sessions.is_empty() {
            return Err(SynthError::InvalidSpec("need at least 1 session".into()));
        }
        if !(self.duration_s > 0.0 && self.fs > 0.0) {
            return Err(SynthError::InvalidSpec("duration_s and fs must be positive".into()));
        }
        let mut ids: Vec<_> = self.sessions.iter().map(|s| &s.session_id).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.sessions.len() {
            return Err(SynthError::InvalidSpec("session ids must be unique".into()));
        }
        self.sessions.iter().try_for_each(SessionEffects::validate)
    }

    /// Built-in datasets: `fallacy30`, `aging4`, `ablation`.
    pub fn preset(name: &str) -> Result<Self, SynthError> {
        let base = |id: &str, day: u32| SessionEffects {
            morphology_drift: 0.15,
            noise_sigma: 0.05,
            baseline_amp: 0.1,
            ..SessionEffects::clean(id, day)
        };
        let sessions = match crate::registry::canonical_name(name).as_str() {
            "fallacy30" => vec![base("s1", 0), base("s2", 14)],
            "aging4" => [("s1", 0), ("s2", 10), ("s3", 20), ("s4", 40)]
                .iter()
                .map(|&(id, day)| SessionEffects {
                    morphology_drift: 0.12,
                    drift_rate: 0.06,
                    ..base(id, day)
                })
                .collect(),
            // noise-dominated: small session drift, per-beat variability on
            "ablation" => [("s1", 0, 0.8), ("s2", 7, 1.25)]
                .iter()
                .map(|&(id, day, gain)| SessionEffects {
                    noise_sigma: 0.08,
                    amplitude_scale: gain,
                    morphology_drift: 0.08,
                    beat_variability: 0.1,
                    ..base(id, day)
                })
                .collect(),
            _ => return Err(SynthError::UnknownPreset(name.to_string())),
        };
        Ok(Self {
            n_subjects: 30,
            sessions,
            duration_s: 60.0,
            fs: 360.0,
        })
    }
}

/// Deterministic subject parameters drawn from fixed physiological ranges.
pub fn make_subject_params(seed: u64) -> SubjectMorphology {
    let mut rng = rng_for(seed, "subject-morphology", &[]);
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let p = Wave {
        amplitude: u(0.08, 0.25),
        center_offset: u(-0.25, -0.15),
        width: u(0.02, 0.04),
    };
    let q = Wave {
        amplitude: u(-0.25, -0.05),
        center_offset: u(-0.04, -0.03),
        width: u(0.006, 0.01),
    };
    let r = Wave {
        amplitude: u(0.8, 1.4),
        center_offset: 0.0,
        width: u(0.01, 0.016),
    };
    let s = Wave {
        amplitude: u(-0.4, -0.1),
        center_offset: u(0.03, 0.045),
        width: u(0.006, 0.01),
    };
    let t = Wave {
        amplitude: u(0.15, 0.45),
        center_offset: u(0.2, 0.32),
        width: u(0.035, 0.07),
    };
    let heart_rate_bpm = u(55.0, 90.0);
    SubjectMorphology {
        p,
        q,
        r,
        s,
        t,
        heart_rate_bpm,
        drift_seed: derive_seed(seed, "drift", &[]),
    }
}

fn wave_sum(waves: &[Wave; 5], dt: f64) -> f64 {
    waves
        .iter()
        .map(|w| w.amplitude * (-(dt - w.center_offset).powi(2) / (2.0 * w.width * w.width)).exp())
        .sum()
}

/// Sample index of the R centre inside a beat of `n` samples.
pub fn r_index(n: usize) -> usize {
    (0.4 * n as f64).round() as usize
}

/// One beat of `round(rr·fs)` samples with the R centre at 40 % of the beat
/// (rounded to a sample).
pub fn synthesize_beat(theta: &SubjectMorphology, fs: f64, rr: f64) -> Vec<f64> {
    let n = (rr * fs).round() as usize;
    let t_r = r_index(n) as f64 / fs;
    let waves = theta.waves();
    (0..n).map(|i| wave_sum(&waves, i as f64 / fs - t_r)).collect()
}

/// Session-perturbed morphology: `θ·(1 + δ·u_session)·(1 + a·v_subject)`
/// with `a = drift_rate·day/30`.
pub fn session_morphology(theta: &SubjectMorphology, effects: &SessionEffects) -> SubjectMorphology {
    let mut su = rng_for(theta.drift_seed, "session", &[hash_str(&effects.session_id)]);
    let mut av = rng_for(theta.drift_seed, "aging", &[]);
    let aging = effects.drift_rate * f64::from(effects.day_index) / 30.0;
    let mut factors = [1.0; 16];
    for f in factors.iter_mut() {
        let u: f64 = su.random_range(-1.0..=1.0);
        let v: f64 = av.random_range(-1.0..=1.0);
        *f = ((1.0 + effects.morphology_drift * u) * (1.0 + aging * v)).max(0.05);
    }
    theta.scaled(&factors)
}

/// A synthetic record and its ground-truth R-peak sample indices.
pub struct SynthRecord {
    pub recording: Recording,
    pub true_peaks: Vec<usize>,
}

/// Beat schedule with ±3 % uniform RR jitter; returns R-peak indices.
fn beat_schedule(hr_bpm: f64, fs: f64, n_total: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed, "rr-jitter", &[]);
    let rr_mean = 60.0 / hr_bpm;
    let mut peaks = Vec::new();
    let mut start = 0usize;
    while start < n_total {
        let rr = rr_mean * (1.0 + rng.random_range(-0.03..=0.03));
        let n = ((rr * fs).round() as usize).max(1);
        let r = start + r_index(n);
        if r < n_total {
            peaks.push(r);
        }
        start += n;
    }
    peaks
}

/// Renders a record. `seed` drives RR jitter, noise and wander phase; the
/// session perturbation comes from `theta.drift_seed` and the session id.
pub fn synthesize_record(
    subject_id: &str,
    theta: &SubjectMorphology,
    effects: &SessionEffects,
    duration_s: f64,
    fs: f64,
    seed: u64,
) -> SynthRecord {
    let (clean, peaks) = render_clean(theta, effects, duration_s, fs, seed);
    let mut noise_rng = rng_for(seed, "noise", &[]);
    let mut phase_rng = rng_for(seed, "wander-phase", &[]);
    let phase: f64 = phase_rng.random_range(0.0..std::f64::consts::TAU);
    let normal = Normal::new(0.0, effects.noise_sigma.max(0.0)).expect("finite sigma");
    let samples: Vec<f64> = clean
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let t = i as f64 / fs;
            let wander = effects.baseline_amp * (std::f64::consts::TAU * effects.baseline_freq * t + phase).sin();
            let noise = if effects.noise_sigma > 0.0 {
                normal.sample(&mut noise_rng)
            } else {
                0.0
            };
            v + wander + noise
        })
        .collect();
    let recording = Recording::new(
        subject_id,
        effects.session_id.clone(),
        effects.day_index,
        0,
        fs,
        vec![samples],
    )
    .expect("synthetic record is well formed");
    SynthRecord {
        recording,
        true_peaks: peaks,
    }
}

/// Noise- and wander-free signal (amplitude scale applied) plus peaks.
pub fn render_clean(
    theta: &SubjectMorphology,
    effects: &SessionEffects,
    duration_s: f64,
    fs: f64,
    seed: u64,
) -> (Vec<f64>, Vec<usize>) {
    let morph = session_morphology(theta, effects);
    let waves = morph.waves();
    let n_total = ((duration_s * fs).round() as usize).max(1);
    let peaks = beat_schedule(morph.heart_rate_bpm, fs, n_total, seed);
    let support = waves
        .iter()
        .map(|w| w.center_offset.abs() + 8.0 * w.width)
        .fold(0.0, f64::max);
    let reach = (support * fs).ceil() as isize;
    let mut x = vec![0.0; n_total];
    let mut jitter_rng = rng_for(seed, "beat-variability", &[]);
    let jitter = Normal::new(0.0, effects.beat_variability).expect("finite sigma");
    for &p in &peaks {
        let mut waves = waves;
        if effects.beat_variability > 0.0 {
            for w in waves.iter_mut() {
                w.amplitude *= (1.0 + jitter.sample(&mut jitter_rng)).max(0.0);
            }
        }
        let lo = (p as isize - reach).max(0) as usize;
        let hi = ((p as isize + reach) as usize).min(n_total - 1);
        for (i, v) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *v += wave_sum(&waves, (i as f64 - p as f64) / fs);
        }
    }
    for v in x.iter_mut() {
        *v *= effects.amplitude_scale;
    }
    (x, peaks)
}

pub fn subject_name(i: usize) -> String {
    format!("S{:02}", i + 1)
}

/// All records of a dataset, in (subject, session) order, kept in memory.
pub fn generate_records(spec: &SynthSpec, seed: u64) -> Result<Vec<SynthRecord>, SynthError> {
    spec.validate()?;
    let per_subject: Vec<Vec<SynthRecord>> = (0..spec.n_subjects)
        .into_par_iter()
        .map(|i| {
            let theta = make_subject_params(derive_seed(seed, "subject", &[i as u64]));
            spec.sessions
                .iter()
                .enumerate()
                .map(|(j, eff)| {
                    let rec_seed = derive_seed(seed, "record", &[i as u64, j as u64]);
                    synthesize_record(&subject_name(i), &theta, eff, spec.duration_s, spec.fs, rec_seed)
                })
                .collect()
        })
        .collect();
    Ok(per_subject.into_iter().flatten().collect())
}

#[derive(Serialize)]
struct PeaksFile<'a> {
    peaks: &'a [usize],
}

/// Writes f32le signals, ground-truth peak files and `manifest.json` to
/// `out`, returning the index (with absolute paths).
pub fn generate_dataset(spec: &SynthSpec, seed: u64, out: &Path) -> Result<DatasetIndex, SynthError> {
    let records = generate_records(spec, seed)?;
    std::fs::create_dir_all(out).map_err(|e| IngestError::io(out, e))?;
    let mut metas = Vec::with_capacity(records.len());
    for r in &records {
        let rec = &r.recording;
        let stem = format!("{}_{}", rec.subject_id, rec.session_id);
        let sig: PathBuf = out.join(format!("{stem}.f32"));
        std::fs::write(&sig, f32le_bytes(rec.channels()[0].as_slice())).map_err(|e| IngestError::io(&sig, e))?;
        let truth = out.join(format!("{stem}.peaks.json"));
        let body = serde_json::to_string(&PeaksFile { peaks: &r.true_peaks }).expect("serializable");
        std::fs::write(&truth, body + "\n").map_err(|e| IngestError::io(&truth, e))?;
        metas.push(RecordMeta {
            subject_id: rec.subject_id.clone(),
            session_id: rec.session_id.clone(),
            day_index: rec.day_index,
            record_index: rec.record_index,
            path: sig,
            format: SignalFormat::F32le,
            fs: Some(rec.fs),
            channel_selector: None,
        });
    }
    let index = DatasetIndex::new(metas)?;
    let manifest = out.join("manifest.json");
    std::fs::write(&manifest, write_manifest(&index, out)).map_err(|e| IngestError::io(&manifest, e))?;
    Ok(index)
}

/// Reads a `{peaks:[...]}` ground-truth file.
pub fn read_peaks(path: &Path) -> Result<Vec<usize>, IngestError> {
    #[derive(Deserialize)]
    struct P {
        peaks: Vec<usize>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    serde_json::from_str::<P>(&text)
        .map(|p| p.peaks)
        .map_err(|e| IngestError::Schema(e.to_string()))
}
