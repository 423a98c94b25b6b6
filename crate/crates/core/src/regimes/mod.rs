//! Evaluation regimes: how a dataset's records become enrollment and probe
//! material, and the per-seed evaluation pipeline built on top.
//!
//! Each regime is a [`Regime`] strategy registered by name in
//! [`regime_registry`]. Given one subject's records in chronological order
//! it either returns the enrollment and probe parts or a reason to exclude
//! the subject.

pub mod pipeline;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::DatasetIndex;
use crate::registry::{canonical_name, Registry, UnknownStrategy};
use crate::seeding::rng_for;
use crate::types::{
    CellKey, MeanStd, MetricSummary, MetricsReport, Recording, RunMeta, SeedRecord, Setting, SubjectCounts,
};

pub use pipeline::{
    run_benchmark, run_cells, run_evaluation, Dataset, EvalError, PreparedParts, SeedOutcome, SplitTrace,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegimeError {
    #[error("regime {regime} unsatisfiable: none of {total} subjects qualifies ({reasons})")]
    RegimeUnsatisfiable {
        regime: String,
        total: usize,
        reasons: String,
    },
    #[error("need at least 2 subjects to partition, got {0}")]
    TooFewSubjects(usize),
    #[error("enrollment range {enroll:?} overlaps probe range {probe:?}")]
    OverlappingRanges { enroll: [f64; 2], probe: [f64; 2] },
    #[error("range {range:?} outside record of {duration_s} s")]
    RangeOutOfBounds { range: [f64; 2], duration_s: f64 },
    #[error("invalid regime parameters: {0}")]
    InvalidParameters(String),
    #[error("seed records disagree on cells: {0}")]
    KeyMismatch(String),
    #[error("no seed records to aggregate")]
    NoRecords,
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
}

fn closed() -> Setting {
    Setting::Closed
}
fn half() -> f64 {
    0.5
}

/// One requested regime application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub name: String,
    #[serde(default = "closed")]
    pub setting: Setting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enroll_session: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_session: Option<String>,
    /// seconds, `[start, end)`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enroll_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_range: Option<[f64; 2]>,
    /// fraction of subjects used for embedder training in the open setting
    #[serde(default = "half")]
    pub open_ratio: f64,
}

impl RegimeSpec {
    pub fn named(name: &str, setting: Setting) -> Self {
        Self {
            name: name.to_string(),
            setting,
            enroll_session: None,
            probe_session: None,
            enroll_range: None,
            probe_range: None,
            open_ratio: 0.5,
        }
    }

    pub fn key(&self) -> CellKey {
        CellKey {
            regime: self.name.clone(),
            setting: self.setting,
        }
    }

    /// Canonical name plus parameter checks.
    pub fn validated(&self) -> Result<Self, RegimeError> {
        let name = resolve_regime_name(&self.name)?;
        let out = Self { name, ..self.clone() };
        if !(out.open_ratio > 0.0 && out.open_ratio < 1.0) {
            return Err(RegimeError::InvalidParameters(format!(
                "open_ratio {} not in (0,1)",
                out.open_ratio
            )));
        }
        let has_sessions = out.enroll_session.is_some() || out.probe_session.is_some();
        let has_ranges = out.enroll_range.is_some() || out.probe_range.is_some();
        if has_sessions && out.name != "cross_session" {
            return Err(RegimeError::InvalidParameters(format!(
                "enroll_session/probe_session only apply to cross_session, not {}",
                out.name
            )));
        }
        if has_ranges && out.name != "custom_split" {
            return Err(RegimeError::InvalidParameters(format!(
                "enroll_range/probe_range only apply to custom_split, not {}",
                out.name
            )));
        }
        if out.name == "custom_split" {
            let (Some(e), Some(p)) = (out.enroll_range, out.probe_range) else {
                return Err(RegimeError::InvalidParameters(
                    "custom_split needs enroll_range and probe_range".into(),
                ));
            };
            for r in [e, p] {
                if !(r[0] >= 0.0 && r[1] > r[0]) {
                    return Err(RegimeError::InvalidParameters(format!("bad range {r:?}")));
                }
            }
            if ranges_overlap(e, p) {
                return Err(RegimeError::OverlappingRanges { enroll: e, probe: p });
            }
        }
        if let (Some(a), Some(b)) = (&out.enroll_session, &out.probe_session) {
            if a == b {
                return Err(RegimeError::InvalidParameters(format!(
                    "enroll_session and probe_session are both `{a}`"
                )));
            }
        }
        Ok(out)
    }
}

fn ranges_overlap(a: [f64; 2], b: [f64; 2]) -> bool {
    a[0] < b[1] && b[0] < a[1]
}

/// Canonical regime name, accepting long-form spellings such as
/// `single-shot-long-term` or `leave_last_out_short_term`.
pub fn resolve_regime_name(name: &str) -> Result<String, RegimeError> {
    let c = canonical_name(name)
        .replace("single_shot", "ss")
        .replace("leave_last_out", "llo")
        .replace(' ', "_");
    regime_registry().get(&c)?;
    Ok(c)
}

/// Which slice of a record a part refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Portion {
    Whole,
    /// seconds, `[start, end)`
    TimeRange {
        start_s: f64,
        end_s: f64,
    },
    /// seeded beat-level split of the whole record
    BeatSplit {
        side: Side,
        enroll_fraction: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Side {
    Enroll,
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecordPart {
    /// position in [`DatasetIndex::records`]
    pub record: usize,
    pub portion: Portion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectSplit {
    pub subject_id: String,
    pub enroll: Vec<RecordPart>,
    pub probe: Vec<RecordPart>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitPlan {
    pub regime: String,
    pub setting: Setting,
    /// evaluation subjects with their parts, sorted by subject id
    pub subjects: Vec<SubjectSplit>,
    /// subjects whose enrollment data trains the embedder
    pub training_subjects: Vec<SubjectSplit>,
    pub excluded: Vec<(String, String)>,
    pub total_subjects: usize,
}

impl SplitPlan {
    pub fn counts(&self) -> SubjectCounts {
        SubjectCounts {
            total: self.total_subjects,
            used: self.total_subjects - self.excluded.len(),
            excluded: self.excluded.len(),
        }
    }

    pub fn evaluation_subjects(&self) -> Vec<&str> {
        self.subjects.iter().map(|s| s.subject_id.as_str()).collect()
    }

    pub fn training_subject_ids(&self) -> Vec<&str> {
        self.training_subjects.iter().map(|s| s.subject_id.as_str()).collect()
    }
}

/// Record summary a regime sees: position in the index plus timing.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordRef {
    pub record: usize,
    pub session_id: String,
    pub day_index: u32,
    pub record_index: u32,
    pub duration_s: f64,
}

type Parts = (Vec<RecordPart>, Vec<RecordPart>);

pub trait Regime: Send + Sync {
    /// `records` are one subject's, in chronological order.
    fn split(&self, records: &[RecordRef], spec: &RegimeSpec) -> Result<Parts, String>;
}

fn whole(r: &RecordRef) -> RecordPart {
    RecordPart {
        record: r.record,
        portion: Portion::Whole,
    }
}

fn need(records: &[RecordRef], n: usize, what: &str) -> Result<(), String> {
    if records.len() < n {
        return Err(format!("needs {n} {what}, has {}", records.len()));
    }
    Ok(())
}

pub const SINGLE_SESSION_ENROLL_FRACTION: f64 = 0.7;

struct SingleSession;
impl Regime for SingleSession {
    fn split(&self, records: &[RecordRef], _: &RegimeSpec) -> Result<Parts, String> {
        need(records, 1, "record")?;
        let part = |side| RecordPart {
            record: records[0].record,
            portion: Portion::BeatSplit {
                side,
                enroll_fraction: SINGLE_SESSION_ENROLL_FRACTION,
            },
        };
        Ok((vec![part(Side::Enroll)], vec![part(Side::Probe)]))
    }
}

struct SingleCrossSession;
impl Regime for SingleCrossSession {
    fn split(&self, records: &[RecordRef], _: &RegimeSpec) -> Result<Parts, String> {
        need(records, 2, "records")?;
        Ok((vec![whole(&records[0])], vec![whole(&records[1])]))
    }
}

fn first_day(records: &[RecordRef]) -> Vec<&RecordRef> {
    let d0 = records.iter().map(|r| r.day_index).min().unwrap_or(0);
    records.iter().filter(|r| r.day_index == d0).collect()
}

struct SsShortTerm;
impl Regime for SsShortTerm {
    fn split(&self, records: &[RecordRef], _: &RegimeSpec) -> Result<Parts, String> {
        let day = first_day(records);
        if day.len() < 2 {
            return Err(format!("needs 2 records on its first day, has {}", day.len()));
        }
        Ok((vec![whole(day[0])], day[1..].iter().map(|r| whole(r)).collect()))
    }
}

struct LloShortTerm;
impl Regime for LloShortTerm {
    fn split(&self, records: &[RecordRef], _: &RegimeSpec) -> Result<Parts, String> {
        let day = first_day(records);
        if day.len() < 2 {
            return Err(format!("needs 2 records on its first day, has {}", day.len()));
        }
        let (last, rest) = day.split_last().expect("non-empty");
        Ok((rest.iter().map(|r| whole(r)).collect(), vec![whole(last)]))
    }
}

fn days(records: &[RecordRef]) -> BTreeSet<u32> {
    records.iter().map(|r| r.day_index).collect()
}

struct SsLongTerm;
impl Regime for SsLongTerm {
    fn split(&self, records: &[RecordRef], _: &RegimeSpec) -> Result<Parts, String> {
        let d = days(records);
        if d.len() < 2 {
            return Err(format!("needs records on 2 distinct days, has {}", d.len()));
        }
        let d0 = *d.first().unwrap();
        let (e, p): (Vec<_>, Vec<_>) = records.iter().partition(|r| r.day_index == d0);
        Ok((e.into_iter().map(whole).collect(), p.into_iter().map(whole).collect()))
    }
}

struct LloLongTerm;
impl Regime for LloLongTerm {
    fn split(&self, records: &[RecordRef], _: &RegimeSpec) -> Result<Parts, String> {
        let d = days(records);
        if d.len() < 2 {
            return Err(format!("needs records on 2 distinct days, has {}", d.len()));
        }
        let last = *d.last().unwrap();
        let (p, e): (Vec<_>, Vec<_>) = records.iter().partition(|r| r.day_index == last);
        Ok((e.into_iter().map(whole).collect(), p.into_iter().map(whole).collect()))
    }
}

/// Named sessions, defaulting to the subject's first and second sessions in
/// chronological order.
struct CrossSession;
impl Regime for CrossSession {
    fn split(&self, records: &[RecordRef], spec: &RegimeSpec) -> Result<Parts, String> {
        let mut sessions: Vec<&str> = Vec::new();
        for r in records {
            if !sessions.contains(&r.session_id.as_str()) {
                sessions.push(&r.session_id);
            }
        }
        let enroll = match &spec.enroll_session {
            Some(s) => s.as_str(),
            None => sessions.first().copied().ok_or("has no sessions")?,
        };
        let probe = match &spec.probe_session {
            Some(s) => s.as_str(),
            None => sessions
                .iter()
                .copied()
                .find(|s| *s != enroll)
                .ok_or_else(|| "has a single session".to_string())?,
        };
        let pick = |s: &str| -> Vec<RecordPart> { records.iter().filter(|r| r.session_id == s).map(whole).collect() };
        let (e, p) = (pick(enroll), pick(probe));
        if e.is_empty() || p.is_empty() {
            return Err(format!("lacks session `{}`", if e.is_empty() { enroll } else { probe }));
        }
        Ok((e, p))
    }
}

/// Disjoint time ranges of the subject's first record.
struct CustomSplit;
impl Regime for CustomSplit {
    fn split(&self, records: &[RecordRef], spec: &RegimeSpec) -> Result<Parts, String> {
        need(records, 1, "record")?;
        let (Some(e), Some(p)) = (spec.enroll_range, spec.probe_range) else {
            return Err("custom_split without ranges".into());
        };
        let r = &records[0];
        for range in [e, p] {
            if range[1] > r.duration_s + 1e-9 {
                return Err(format!("range {range:?} exceeds its {} s record", r.duration_s));
            }
        }
        let part = |range: [f64; 2]| RecordPart {
            record: r.record,
            portion: Portion::TimeRange {
                start_s: range[0],
                end_s: range[1],
            },
        };
        Ok((vec![part(e)], vec![part(p)]))
    }
}

pub fn regime_registry() -> &'static Registry<dyn Regime> {
    static REG: OnceLock<Registry<dyn Regime>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn Regime> = Registry::new("regime");
        r.register("single_session", Box::new(SingleSession));
        r.register("single_cross_session", Box::new(SingleCrossSession));
        r.register("ss_short_term", Box::new(SsShortTerm));
        r.register("llo_short_term", Box::new(LloShortTerm));
        r.register("ss_long_term", Box::new(SsLongTerm));
        r.register("llo_long_term", Box::new(LloLongTerm));
        r.register("cross_session", Box::new(CrossSession));
        r.register("custom_split", Box::new(CustomSplit));
        r
    })
}

/// Seeded shuffle, then the first `round(ratio·N)` subjects train and the
/// rest are evaluated. Both sides keep at least one subject.
pub fn subject_partition(
    subjects: &[String],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), RegimeError> {
    if subjects.len() < 2 {
        return Err(RegimeError::TooFewSubjects(subjects.len()));
    }
    let mut s = subjects.to_vec();
    s.sort();
    s.shuffle(&mut rng_for(seed, "subject-partition", &[]));
    let cut = ((ratio * s.len() as f64).round() as usize).clamp(1, s.len() - 1);
    let eval = s.split_off(cut);
    let (mut train, mut eval) = (s, eval);
    train.sort();
    eval.sort();
    Ok((train, eval))
}

/// Slices `[t0, t1)` and `[t2, t3)` (seconds) out of a recording at
/// `round(t·fs)`.
pub fn temporal_windows(
    rec: &Recording,
    enroll: [f64; 2],
    probe: [f64; 2],
) -> Result<(Recording, Recording), RegimeError> {
    let dur = rec.duration_s();
    for r in [enroll, probe] {
        if !(r[0] >= 0.0 && r[1] > r[0] && r[1] <= dur + 1e-9) {
            return Err(RegimeError::RangeOutOfBounds {
                range: r,
                duration_s: dur,
            });
        }
    }
    if ranges_overlap(enroll, probe) {
        return Err(RegimeError::OverlappingRanges { enroll, probe });
    }
    Ok((slice_seconds(rec, enroll), slice_seconds(rec, probe)))
}

pub(crate) fn sample_range(fs: f64, len: usize, r: [f64; 2]) -> (usize, usize) {
    let a = ((r[0] * fs).round() as usize).min(len);
    let b = ((r[1] * fs).round() as usize).min(len);
    (a, b)
}

pub(crate) fn slice_seconds(rec: &Recording, r: [f64; 2]) -> Recording {
    let (a, b) = sample_range(rec.fs, rec.len(), r);
    let channels = rec.channels().iter().map(|c| c[a..b].to_vec()).collect();
    Recording::new(
        rec.subject_id.clone(),
        rec.session_id.clone(),
        rec.day_index,
        rec.record_index,
        rec.fs,
        channels,
    )
    .expect("non-empty slice of a valid recording")
}

/// Applies a regime to every subject. `durations_s` is aligned with
/// `index.records`.
pub fn map_regime(
    index: &DatasetIndex,
    durations_s: &[f64],
    spec: &RegimeSpec,
    seed: u64,
) -> Result<SplitPlan, RegimeError> {
    let spec = spec.validated()?;
    let regime = regime_registry().get(&spec.name)?;
    let by_subject = index.by_subject();
    let mut qualified = Vec::new();
    let mut excluded = Vec::new();
    for (subject, idxs) in &by_subject {
        let mut refs: Vec<RecordRef> = idxs
            .iter()
            .map(|&i| {
                let m = &index.records[i];
                RecordRef {
                    record: i,
                    session_id: m.session_id.clone(),
                    day_index: m.day_index,
                    record_index: m.record_index,
                    duration_s: durations_s[i],
                }
            })
            .collect();
        refs.sort_by(|a, b| {
            (a.day_index, a.record_index, &a.session_id).cmp(&(b.day_index, b.record_index, &b.session_id))
        });
        match regime.split(&refs, &spec) {
            Ok((enroll, probe)) => qualified.push(SubjectSplit {
                subject_id: subject.to_string(),
                enroll,
                probe,
            }),
            Err(reason) => excluded.push((subject.to_string(), reason)),
        }
    }
    let total = by_subject.len();
    if qualified.is_empty() {
        let reasons = excluded
            .iter()
            .take(3)
            .map(|(s, r)| format!("{s} {r}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(RegimeError::RegimeUnsatisfiable {
            regime: spec.name.clone(),
            total,
            reasons,
        });
    }
    let (training_subjects, subjects) = match spec.setting {
        Setting::Closed => (qualified.clone(), qualified),
        Setting::Open => {
            let ids: Vec<String> = qualified.iter().map(|s| s.subject_id.clone()).collect();
            let (train, _) = subject_partition(&ids, spec.open_ratio, seed)?;
            qualified.into_iter().partition(|s| train.contains(&s.subject_id))
        }
    };
    Ok(SplitPlan {
        regime: spec.name.clone(),
        setting: spec.setting,
        subjects,
        training_subjects,
        excluded,
        total_subjects: total,
    })
}

fn mean_std(v: &[f64]) -> MeanStd {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

/// Mean and sample standard deviation per cell and metric. Every seed must
/// report the same set of cells.
pub fn aggregate_runs(records: &[SeedRecord]) -> Result<MetricsReport, RegimeError> {
    if records.is_empty() {
        return Err(RegimeError::NoRecords);
    }
    let mut by_seed: BTreeMap<u64, BTreeSet<&CellKey>> = BTreeMap::new();
    let mut by_cell: BTreeMap<&CellKey, Vec<&SeedRecord>> = BTreeMap::new();
    for r in records {
        by_seed.entry(r.seed).or_default().insert(&r.key);
        by_cell.entry(&r.key).or_default().push(r);
    }
    let reference = by_seed.values().next().expect("non-empty");
    for (seed, keys) in &by_seed {
        if keys != reference {
            let diff: Vec<String> = keys.symmetric_difference(reference).map(|k| k.to_string()).collect();
            return Err(RegimeError::KeyMismatch(format!("seed {seed}: {}", diff.join(", "))));
        }
    }
    let mut cells = BTreeMap::new();
    let mut subjects = BTreeMap::new();
    let mut warnings = Vec::new();
    for (key, recs) in &by_cell {
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|m| recs.iter().map(|r| r.metrics.as_array()[m]).collect())
            .collect();
        let summary: [MeanStd; 6] = std::array::from_fn(|m| mean_std(&cols[m]));
        cells.insert((*key).clone(), MetricSummary::from_array(summary));
        subjects.insert((*key).clone(), recs[0].subjects);
        for r in recs {
            for w in &r.warnings {
                let line = format!("{key}: {w}");
                if !warnings.contains(&line) {
                    warnings.push(line);
                }
            }
        }
    }
    let mut per_seed = records.to_vec();
    per_seed.sort_by(|a, b| (&a.key, a.seed).cmp(&(&b.key, b.seed)));
    Ok(MetricsReport {
        cells,
        subjects,
        per_seed,
        warnings,
        meta: RunMeta {
            config_digest: String::new(),
            seeds: by_seed.keys().copied().collect(),
            started_unix: None,
            finished_unix: None,
        },
    })
}
