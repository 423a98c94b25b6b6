//! Per-seed evaluation: prepared segments in, one metric record out.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{
    aggregate_runs, map_regime, slice_seconds, Portion, RecordPart, RegimeError, RegimeSpec, Side, SplitPlan,
    SubjectSplit,
};
use crate::augment::augment_training_set;
use crate::biometric::{
    build_template, fuse_probes, generate_pairs, score_matrix, similarity_registry, BiometricError,
};
use crate::config::{ConfigError, DatasetSource, RunConfig};
use crate::dsp::{normalize, preprocess, resample_fourier, DspError};
use crate::embed::{embedder_registry, EmbedError};
use crate::ingest::{load_record, parse_manifest_in, DatasetIndex, IngestError, RecordMeta, SignalFormat};
use crate::metrics::{auc, dprime, eer, rank_accuracy, tar_at_far, MetricsError};
use crate::registry::UnknownStrategy;
use crate::rpeak::{detector_registry, RpeakError};
use crate::seeding::{derive_seed, hash_str, rng_for};
use crate::segment::{segment_beats, segment_blind, Anchor, Provenance, Segment, SegmentError, SegmentMode};
use crate::synth::{generate_records, SynthError};
use crate::types::{MetricValues, MetricsReport, Recording, RunMeta, SeedRecord, Setting};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Regime(#[from] RegimeError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("record {record}: {source}")]
    Dsp { record: String, source: DspError },
    #[error("record {record}: {source}")]
    Rpeak { record: String, source: RpeakError },
    #[error("record {record}: {source}")]
    Segment { record: String, source: SegmentError },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Biometric(#[from] BiometricError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
    #[error("leakage between enrollment and probe data: {0}")]
    Leakage(String),
    #[error("not enough data: {0}")]
    NotEnoughData(String),
}

/// Recordings loaded in index order.
pub struct Dataset {
    pub index: DatasetIndex,
    pub recordings: Vec<Recording>,
}

impl Dataset {
    pub fn load(index: DatasetIndex) -> Result<Self, IngestError> {
        let recordings = index
            .records
            .par_iter()
            .map(load_record)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { index, recordings })
    }

    /// Wraps in-memory recordings; record paths are placeholders.
    pub fn from_recordings(recordings: Vec<Recording>) -> Result<Self, IngestError> {
        let metas = recordings
            .iter()
            .map(|r| RecordMeta {
                subject_id: r.subject_id.clone(),
                session_id: r.session_id.clone(),
                day_index: r.day_index,
                record_index: r.record_index,
                path: format!(
                    "memory/{}_{}_{}_{}",
                    r.subject_id, r.session_id, r.day_index, r.record_index
                )
                .into(),
                format: SignalFormat::F32le,
                fs: Some(r.fs),
                channel_selector: None,
            })
            .collect();
        let index = DatasetIndex::new(metas)?;
        // the index sorts its records; reorder recordings to match
        let mut slots: HashMap<(String, String, u32, u32), Recording> = recordings
            .into_iter()
            .map(|r| {
                (
                    (r.subject_id.clone(), r.session_id.clone(), r.day_index, r.record_index),
                    r,
                )
            })
            .collect();
        let recordings = index
            .records
            .iter()
            .map(|m| {
                slots
                    .remove(&(m.subject_id.clone(), m.session_id.clone(), m.day_index, m.record_index))
                    .expect("every meta came from a recording")
            })
            .collect();
        Ok(Self { index, recordings })
    }

    /// Loads a manifest from disk or generates a synthetic dataset.
    pub fn open(source: &DatasetSource) -> Result<Self, EvalError> {
        match source {
            DatasetSource::Manifest(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
                let index = parse_manifest_in(&text, path.parent())?;
                Ok(Self::load(index)?)
            }
            DatasetSource::Synthetic(s) => {
                let spec = s.resolve()?;
                let recs = generate_records(&spec, s.seed)?;
                Ok(Self::from_recordings(recs.into_iter().map(|r| r.recording).collect())?)
            }
        }
    }

    pub fn durations_s(&self) -> Vec<f64> {
        self.recordings.iter().map(Recording::duration_s).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum PartKey {
    Whole(usize),
    Range(usize, u64, u64),
}

fn part_key(p: &RecordPart) -> PartKey {
    match p.portion {
        Portion::Whole | Portion::BeatSplit { .. } => PartKey::Whole(p.record),
        Portion::TimeRange { start_s, end_s } => PartKey::Range(p.record, start_s.to_bits(), end_s.to_bits()),
    }
}

/// Segments of one record (or record slice), resampled to the target
/// length and normalized. Anchors are in whole-record sample coordinates.
#[derive(Debug, Clone)]
pub struct PreparedPart {
    pub segments: Vec<Segment>,
    /// first and one-past-last sample of the source slice
    pub bounds: (usize, usize),
    pub dropped: usize,
}

/// Prepared segments for every part any plan refers to.
pub struct PreparedParts {
    parts: HashMap<PartKey, PreparedPart>,
    /// sampling rate of prepared segment samples
    pub segment_fs: f64,
}

fn record_label(rec: &Recording) -> String {
    format!(
        "{}/{}/d{}/r{}",
        rec.subject_id, rec.session_id, rec.day_index, rec.record_index
    )
}

pub fn prepare_part(rec: &Recording, range: Option<[f64; 2]>, cfg: &RunConfig) -> Result<PreparedPart, EvalError> {
    let label = record_label(rec);
    let (slice, offset, bounds) = match range {
        None => (rec.clone(), 0, (0, rec.len())),
        Some(r) => {
            let (a, b) = super::sample_range(rec.fs, rec.len(), r);
            (slice_seconds(rec, r), a, (a, b))
        }
    };
    let clean = preprocess(&slice, &cfg.preprocess).map_err(|source| EvalError::Dsp {
        record: label.clone(),
        source,
    })?;
    let prov = Provenance::of(rec);
    let seg = &cfg.segmentation;
    let raw = match seg.mode {
        SegmentMode::Beat => {
            let peaks = detector_registry()
                .get("pan_tompkins")
                .expect("built-in detector")
                .detect(&clean.samples, clean.fs)
                .map_err(|source| EvalError::Rpeak {
                    record: label.clone(),
                    source,
                })?;
            let align = seg
                .align_peak
                .unwrap_or(true)
                .then(|| seg.align_half_window_s.unwrap_or(0.05));
            segment_beats(
                &clean.samples,
                clean.fs,
                &peaks.indices,
                seg.pre_s.unwrap_or(0.2),
                seg.post_s.unwrap_or(0.4),
                align,
                &prov,
            )
        }
        SegmentMode::Blind => segment_blind(
            &clean.samples,
            clean.fs,
            seg.window_s.unwrap_or(5.0),
            seg.stride_s.unwrap_or(5.0),
            &prov,
        )
        .map_err(|source| EvalError::Segment {
            record: label.clone(),
            source,
        })?,
    };
    let target = cfg.preprocess.target_len;
    let mut segments = Vec::with_capacity(raw.len());
    let mut dropped = 0;
    for s in raw {
        let resampled = if s.samples.len() == target || s.samples.len() < 2 {
            s.samples.clone()
        } else {
            resample_fourier(&s.samples, target)
        };
        match normalize(&resampled, cfg.preprocess.normalization) {
            Ok(samples) if samples.len() == target => {
                let anchor = match s.anchor {
                    Anchor::Peak(p) => Anchor::Peak(p + offset),
                    Anchor::WindowStart(w) => Anchor::WindowStart(w + offset),
                };
                segments.push(Segment {
                    samples,
                    anchor,
                    position: segments.len(),
                    provenance: s.provenance,
                });
            }
            _ => dropped += 1,
        }
    }
    Ok(PreparedPart {
        segments,
        bounds,
        dropped,
    })
}

impl PreparedParts {
    pub fn build(dataset: &Dataset, plans: &[SplitPlan], cfg: &RunConfig) -> Result<Self, EvalError> {
        let mut keys: Vec<(PartKey, RecordPart)> = Vec::new();
        let mut seen = HashSet::new();
        for plan in plans {
            for s in plan.subjects.iter().chain(&plan.training_subjects) {
                for p in s.enroll.iter().chain(&s.probe) {
                    let k = part_key(p);
                    if seen.insert(k) {
                        keys.push((k, *p));
                    }
                }
            }
        }
        let built: Vec<PreparedPart> = keys
            .par_iter()
            .map(|(_, p)| {
                let range = match p.portion {
                    Portion::TimeRange { start_s, end_s } => Some([start_s, end_s]),
                    _ => None,
                };
                prepare_part(&dataset.recordings[p.record], range, cfg)
            })
            .collect::<Result<_, _>>()?;
        let seg = &cfg.segmentation;
        let seconds = match seg.mode {
            SegmentMode::Beat => seg.pre_s.unwrap_or(0.2) + seg.post_s.unwrap_or(0.4),
            SegmentMode::Blind => seg.window_s.unwrap_or(5.0),
        };
        Ok(Self {
            parts: keys.into_iter().map(|(k, _)| k).zip(built).collect(),
            segment_fs: cfg.preprocess.target_len as f64 / seconds,
        })
    }

    fn get(&self, p: &RecordPart) -> &PreparedPart {
        &self.parts[&part_key(p)]
    }
}

/// Where enrollment or probe material came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum RegionKind {
    /// whole record or time slice, samples `[start, end)`
    Range { start: usize, end: usize },
    /// one beat of a beat-level split, identified by its R-peak sample
    Beat { anchor: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Region {
    pub subject_id: String,
    pub record: usize,
    pub kind: RegionKind,
}

fn regions_conflict(a: &RegionKind, b: &RegionKind) -> bool {
    use RegionKind::*;
    match (a, b) {
        (Range { start: s1, end: e1 }, Range { start: s2, end: e2 }) => s1 < e2 && s2 < e1,
        (Beat { anchor: x }, Beat { anchor: y }) => x == y,
        (Range { start, end }, Beat { anchor }) | (Beat { anchor }, Range { start, end }) => {
            (start..end).contains(&anchor)
        }
    }
}

/// Everything needed to audit one seed's split after the fact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitTrace {
    pub training_subjects: Vec<String>,
    pub gallery_subjects: Vec<String>,
    pub probe_subjects: Vec<String>,
    pub enroll_regions: Vec<Region>,
    pub probe_regions: Vec<Region>,
    pub training_regions: Vec<Region>,
    /// SHA-256 over every probe segment's samples, in probe order
    pub probe_digest: String,
    pub n_training_segments: usize,
    pub n_training_augmented: usize,
}

impl SplitTrace {
    /// Enrollment and probe regions never meet for a subject, and in the
    /// open setting no training subject is evaluated.
    pub fn check_leakage(&self, setting: Setting) -> Result<(), String> {
        for e in &self.enroll_regions {
            for p in &self.probe_regions {
                if e.subject_id == p.subject_id && e.record == p.record && regions_conflict(&e.kind, &p.kind) {
                    return Err(format!(
                        "subject {} record {}: {:?} vs {:?}",
                        e.subject_id, e.record, e.kind, p.kind
                    ));
                }
            }
        }
        if setting == Setting::Open {
            for t in &self.training_subjects {
                if self.gallery_subjects.contains(t) || self.probe_subjects.contains(t) {
                    return Err(format!("training subject {t} is also evaluated"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub record: SeedRecord,
    pub trace: SplitTrace,
}

/// Segments of one side of a subject's split, chronological, with regions.
fn side_segments(
    split: &SubjectSplit,
    side: Side,
    parts: &PreparedParts,
    seed: u64,
) -> (Vec<Vec<Segment>>, Vec<Region>) {
    let list = match side {
        Side::Enroll => &split.enroll,
        Side::Probe => &split.probe,
    };
    let mut groups = Vec::new();
    let mut regions = Vec::new();
    for p in list {
        let prepared = parts.get(p);
        match p.portion {
            Portion::BeatSplit { enroll_fraction, .. } => {
                let n = prepared.segments.len();
                let mut order: Vec<usize> = (0..n).collect();
                let s = derive_seed(seed, "beat-split", &[hash_str(&split.subject_id), p.record as u64]);
                order.shuffle(&mut rng_for(s, "shuffle", &[]));
                let cut = (enroll_fraction * n as f64).round() as usize;
                let mut chosen: Vec<usize> = match side {
                    Side::Enroll => order[..cut].to_vec(),
                    Side::Probe => order[cut..].to_vec(),
                };
                chosen.sort_unstable();
                let segs: Vec<Segment> = chosen.iter().map(|&i| prepared.segments[i].clone()).collect();
                regions.extend(segs.iter().map(|s| Region {
                    subject_id: split.subject_id.clone(),
                    record: p.record,
                    kind: RegionKind::Beat {
                        anchor: s.anchor.index(),
                    },
                }));
                groups.push(segs);
            }
            _ => {
                regions.push(Region {
                    subject_id: split.subject_id.clone(),
                    record: p.record,
                    kind: RegionKind::Range {
                        start: prepared.bounds.0,
                        end: prepared.bounds.1,
                    },
                });
                groups.push(prepared.segments.clone());
            }
        }
    }
    (groups, regions)
}

/// Plans for every requested regime, computed with `seed`.
pub fn plans_for(cfg: &RunConfig, dataset: &Dataset, seed: u64) -> Result<Vec<SplitPlan>, RegimeError> {
    let durations = dataset.durations_s();
    cfg.regime
        .iter()
        .map(|spec| map_regime(&dataset.index, &durations, spec, seed))
        .collect()
}

/// One seed of one regime cell.
pub fn run_evaluation(
    cfg: &RunConfig,
    dataset: &Dataset,
    parts: &PreparedParts,
    spec: &RegimeSpec,
    seed: u64,
) -> Result<SeedOutcome, EvalError> {
    let plan = map_regime(&dataset.index, &dataset.durations_s(), spec, seed)?;
    let key = spec.validated()?.key();
    let cell_hash = hash_str(&key.to_string());
    let mut warnings: Vec<String> = plan
        .excluded
        .iter()
        .map(|(s, why)| format!("subject {s} excluded: {why}"))
        .collect();
    let mut counts = plan.counts();

    // evaluation material
    struct Eval {
        subject: String,
        enroll: Vec<Segment>,
        probes: Vec<Vec<Segment>>,
        sessions: Vec<String>,
    }
    let mut evals = Vec::new();
    let mut enroll_regions = Vec::new();
    let mut probe_regions = Vec::new();
    for s in &plan.subjects {
        let (eg, er) = side_segments(s, Side::Enroll, parts, seed);
        let (pg, pr) = side_segments(s, Side::Probe, parts, seed);
        let enroll: Vec<Segment> = eg.into_iter().flatten().collect();
        let probes: Vec<Vec<Segment>> = pg.into_iter().filter(|g| !g.is_empty()).collect();
        if enroll.is_empty() || probes.is_empty() {
            warnings.push(format!(
                "subject {} excluded: no usable segments on one side",
                s.subject_id
            ));
            counts.used -= 1;
            counts.excluded += 1;
            continue;
        }
        let mut sessions: Vec<String> = enroll.iter().map(|x| x.provenance.session_id.clone()).collect();
        sessions.dedup();
        enroll_regions.extend(er);
        probe_regions.extend(pr);
        evals.push(Eval {
            subject: s.subject_id.clone(),
            enroll,
            probes,
            sessions,
        });
    }
    if evals.len() < 2 {
        return Err(EvalError::NotEnoughData(format!(
            "{key}: {} evaluable subjects, need 2",
            evals.len()
        )));
    }

    // embedder
    let kind = embedder_registry().get(&cfg.embedder.kind)?;
    let mut training_regions = Vec::new();
    let (mut n_train, mut n_aug) = (0, 0);
    let (beats, labels) = if kind.needs_training() {
        let mut beats = Vec::new();
        let mut labels = Vec::new();
        for (label, s) in plan.training_subjects.iter().enumerate() {
            let (g, r) = side_segments(s, Side::Enroll, parts, seed);
            training_regions.extend(r);
            let originals: Vec<Segment> = g.into_iter().flatten().collect();
            n_train += originals.len();
            let aug_seed = derive_seed(seed, "augment", &[cell_hash]);
            let expanded = augment_training_set(&originals, &cfg.embedder.augment, parts.segment_fs, aug_seed);
            n_aug += expanded.len() - originals.len();
            for seg in expanded {
                beats.push(seg.samples);
                labels.push(label);
            }
        }
        (beats, labels)
    } else {
        (Vec::new(), Vec::new())
    };
    let embedder = kind.fit(
        &beats,
        &labels,
        cfg.preprocess.target_len,
        &cfg.embedder,
        derive_seed(seed, "embedder", &[cell_hash]),
    )?;
    let embed_all = |segs: &[Segment]| -> Result<Vec<Vec<f64>>, EmbedError> {
        segs.par_iter().map(|s| embedder.embed(&s.samples)).collect()
    };

    // gallery and probes
    let metric = similarity_registry().get(&cfg.evaluation.metric)?;
    let ev = &cfg.evaluation;
    let mut gallery = Vec::with_capacity(evals.len());
    let mut probes: Vec<(Vec<f64>, String)> = Vec::new();
    let mut hasher = Sha256::new();
    for e in &evals {
        let emb = embed_all(&e.enroll)?;
        gallery.push(build_template(
            &e.subject,
            &emb,
            e.sessions.clone(),
            ev.template_fusion,
            ev.template_size,
            metric,
        )?);
        for group in &e.probes {
            for s in group {
                for v in &s.samples {
                    hasher.update(v.to_le_bytes());
                }
            }
            let emb = embed_all(group)?;
            for v in fuse_probes(&emb, ev.probe_fusion_k) {
                probes.push((v, e.subject.clone()));
            }
        }
    }
    let dim = gallery[0].vector.len();
    if let Some(bad) = gallery
        .iter()
        .map(|t| t.vector.len())
        .chain(probes.iter().map(|p| p.0.len()))
        .find(|&d| d != dim)
    {
        return Err(EmbedError::DimensionMismatch {
            expected: dim,
            got: bad,
        }
        .into());
    }

    let m = score_matrix(&gallery, &probes, metric)?;
    let rank1 = rank_accuracy(&m, 1)?;
    let rank5 = rank_accuracy(&m, 5)?;
    let pairs = generate_pairs(&m, ev.pair_sampling, derive_seed(seed, "pairs", &[cell_hash]))?;
    let tar = tar_at_far(&pairs, ev.far_target)?;
    if let Some(w) = &tar.granularity_warning {
        warnings.push(w.clone());
    }
    let metrics = MetricValues {
        rank1,
        rank5,
        eer: eer(&pairs)?,
        auc: auc(&pairs)?,
        dprime: dprime(&pairs)?,
        tar_at_far: tar.tar,
    };

    let trace = SplitTrace {
        training_subjects: if kind.needs_training() {
            plan.training_subject_ids().iter().map(|s| s.to_string()).collect()
        } else {
            Vec::new()
        },
        gallery_subjects: gallery.iter().map(|t| t.subject_id.clone()).collect(),
        probe_subjects: evals.iter().map(|e| e.subject.clone()).collect(),
        enroll_regions,
        probe_regions,
        training_regions,
        probe_digest: hex::encode(hasher.finalize()),
        n_training_segments: n_train,
        n_training_augmented: n_aug,
    };
    trace.check_leakage(plan.setting).map_err(EvalError::Leakage)?;

    Ok(SeedOutcome {
        record: SeedRecord {
            key,
            seed,
            metrics,
            subjects: counts,
            n_probes: m.n_probes(),
            n_genuine: pairs.genuine.len(),
            n_impostor: pairs.impostor.len(),
            warnings,
        },
        trace,
    })
}

/// Every (regime, seed) cell of a configuration, in (regime, seed) order.
/// Work is spread over the current rayon pool; results do not depend on its
/// size.
pub fn run_cells(cfg: &RunConfig, dataset: &Dataset) -> Result<Vec<SeedOutcome>, EvalError> {
    let plans = plans_for(cfg, dataset, cfg.seeds[0])?;
    let parts = PreparedParts::build(dataset, &plans, cfg)?;
    let jobs: Vec<(&RegimeSpec, u64)> = cfg
        .regime
        .iter()
        .flat_map(|r| cfg.seeds.iter().map(move |&s| (r, s)))
        .collect();
    jobs.par_iter()
        .map(|&(spec, seed)| run_evaluation(cfg, dataset, &parts, spec, seed))
        .collect()
}

/// Loads the dataset, runs every cell on a pool of `jobs` workers (all cores
/// when `None`) and aggregates across seeds.
pub fn run_benchmark(cfg: &RunConfig, jobs: Option<usize>) -> Result<MetricsReport, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    pool.install(|| {
        let started = unix_now();
        let dataset = Dataset::open(&cfg.dataset)?;
        let records: Vec<SeedRecord> = run_cells(cfg, &dataset)?.into_iter().map(|o| o.record).collect();
        let mut report = aggregate_runs(&records)?;
        report.meta = RunMeta {
            config_digest: cfg.digest(),
            seeds: cfg.seeds.clone(),
            started_unix: started,
            finished_unix: unix_now(),
        };
        Ok(report)
    })
}

fn unix_now() -> Option<u64> {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs())
}
