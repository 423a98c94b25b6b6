//! Dataset manifests and raw signal loaders.

pub mod wfdb;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Recording, RecordingError};

pub use wfdb::{
    adc_to_physical, decode_wfdb_samples, encode_format16, encode_format212, parse_wfdb_header, WfdbError, WfdbFormat,
    WfdbHeader,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("manifest schema error: {0}")]
    Schema(String),
    #[error("duplicate record key (subject {subject}, session {session}, day {day}, record {record_index})")]
    DuplicateRecordKey {
        subject: String,
        session: String,
        day: u32,
        record_index: u32,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format mismatch: {0}")]
    FormatMismatch(String),
    #[error(transparent)]
    Wfdb(#[from] WfdbError),
    #[error(transparent)]
    Recording(#[from] RecordingError),
}

impl IngestError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalFormat {
    F32le,
    Csv,
    Wfdb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordMeta {
    pub subject_id: String,
    pub session_id: String,
    pub day_index: u32,
    pub record_index: u32,
    pub path: PathBuf,
    pub format: SignalFormat,
    pub fs: Option<f64>,
    pub channel_selector: Option<usize>,
}

impl RecordMeta {
    fn sort_key(&self) -> (&str, u32, u32, &str, &Path) {
        (
            &self.subject_id,
            self.day_index,
            self.record_index,
            &self.session_id,
            &self.path,
        )
    }
}

/// Records sorted by `(subject, day, record_index)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetIndex {
    pub records: Vec<RecordMeta>,
}

impl DatasetIndex {
    pub fn new(mut records: Vec<RecordMeta>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        let mut paths = HashSet::new();
        for r in &records {
            if let Some(fs) = r.fs {
                if !(fs > 0.0 && fs.is_finite()) {
                    return Err(IngestError::Schema(format!(
                        "fs must be positive for {}, got {fs}",
                        r.path.display()
                    )));
                }
            }
            if r.format != SignalFormat::Wfdb && r.fs.is_none() {
                return Err(IngestError::Schema(format!(
                    "fs is required for {:?} record {}",
                    r.format,
                    r.path.display()
                )));
            }
            if !seen.insert((r.subject_id.clone(), r.session_id.clone(), r.day_index, r.record_index)) {
                return Err(IngestError::DuplicateRecordKey {
                    subject: r.subject_id.clone(),
                    session: r.session_id.clone(),
                    day: r.day_index,
                    record_index: r.record_index,
                });
            }
            if !paths.insert((r.path.clone(), r.channel_selector)) {
                return Err(IngestError::Schema(format!("path {} listed twice", r.path.display())));
            }
        }
        records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Ok(Self { records })
    }

    /// Subject ids in ascending order.
    pub fn subjects(&self) -> Vec<String> {
        let mut v: Vec<String> = self.records.iter().map(|r| r.subject_id.clone()).collect();
        v.dedup();
        v
    }

    /// Indices into `records`, grouped per subject in chronological order.
    pub fn by_subject(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            m.entry(r.subject_id.as_str()).or_default().push(i);
        }
        m
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DayField {
    Index(u32),
    Date(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum IdField {
    Text(String),
    Number(u64),
}

impl IdField {
    fn into_string(self) -> String {
        match self {
            IdField::Text(s) => s,
            IdField::Number(n) => n.to_string(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    subject: IdField,
    #[serde(default)]
    session: Option<IdField>,
    #[serde(default)]
    day: Option<DayField>,
    #[serde(default)]
    record_index: Option<u32>,
    path: String,
    format: SignalFormat,
    #[serde(default)]
    fs: Option<f64>,
    #[serde(default)]
    channel: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    records: Vec<ManifestEntry>,
}

/// Parses a manifest; relative paths stay relative.
pub fn parse_manifest(text: &str) -> Result<DatasetIndex, IngestError> {
    parse_manifest_in(text, None)
}

/// Parses a manifest, resolving relative record paths against `base`.
pub fn parse_manifest_in(text: &str, base: Option<&Path>) -> Result<DatasetIndex, IngestError> {
    let manifest: Manifest = serde_json::from_str(text).map_err(|e| IngestError::Schema(e.to_string()))?;

    // dates become day offsets from each subject's first date
    let mut first_date: HashMap<String, NaiveDate> = HashMap::new();
    let mut parsed = Vec::with_capacity(manifest.records.len());
    for e in manifest.records {
        let subject = e.subject.clone().into_string();
        let date = match &e.day {
            Some(DayField::Date(s)) => Some(
                NaiveDate::parse_from_str(s, "%Y-%m-%d")
                    .map_err(|err| IngestError::Schema(format!("bad date `{s}`: {err}")))?,
            ),
            _ => None,
        };
        if let Some(d) = date {
            first_date
                .entry(subject.clone())
                .and_modify(|f| *f = (*f).min(d))
                .or_insert(d);
        }
        parsed.push((subject, date, e));
    }

    let mut next_index: HashMap<(String, u32), u32> = HashMap::new();
    let mut records = Vec::with_capacity(parsed.len());
    for (subject, date, e) in parsed {
        let day_index = match (&e.day, date) {
            (Some(DayField::Index(d)), _) => {
                if first_date.contains_key(&subject) {
                    return Err(IngestError::Schema(format!(
                        "subject {subject} mixes date strings and day indices"
                    )));
                }
                *d
            }
            (_, Some(d)) => (d - first_date[&subject]).num_days() as u32,
            _ => 0,
        };
        let counter = next_index.entry((subject.clone(), day_index)).or_insert(0);
        let record_index = match e.record_index {
            Some(i) => i,
            None => *counter,
        };
        *counter = (*counter).max(record_index + 1);
        let path = PathBuf::from(&e.path);
        let path = match base {
            Some(b) if path.is_relative() => b.join(path),
            _ => path,
        };
        records.push(RecordMeta {
            subject_id: subject,
            session_id: e.session.map(IdField::into_string).unwrap_or_else(|| "s1".into()),
            day_index,
            record_index,
            path,
            format: e.format,
            fs: e.fs,
            channel_selector: e.channel,
        });
    }
    DatasetIndex::new(records)
}

/// Serializes an index back to manifest JSON with paths relative to `base`.
pub fn write_manifest(index: &DatasetIndex, base: &Path) -> String {
    let entries: Vec<serde_json::Value> = index
        .records
        .iter()
        .map(|r| {
            let path = r.path.strip_prefix(base).unwrap_or(&r.path);
            let mut v = serde_json::json!({
                "subject": r.subject_id,
                "session": r.session_id,
                "day": r.day_index,
                "record_index": r.record_index,
                "path": path.to_string_lossy(),
                "format": r.format,
            });
            if let Some(fs) = r.fs {
                v["fs"] = fs.into();
            }
            if let Some(c) = r.channel_selector {
                v["channel"] = c.into();
            }
            v
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&serde_json::json!({ "records": entries })).unwrap();
    s.push('\n');
    s
}

pub fn read_f32le(path: &Path) -> Result<Vec<f64>, IngestError> {
    let bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(IngestError::FormatMismatch(format!(
            "{}: {} bytes is not a multiple of 4",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

pub fn f32le_bytes(x: &[f64]) -> Vec<u8> {
    x.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

pub fn read_csv_samples(path: &Path) -> Result<Vec<f64>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| IngestError::FormatMismatch(format!("{}:{}: not a number: `{l}`", path.display(), i + 1)))
        })
        .collect()
}

/// Loads one record and applies its channel selector (default channel 0).
pub fn load_record(meta: &RecordMeta) -> Result<Recording, IngestError> {
    let (fs, channels) = match meta.format {
        SignalFormat::F32le => (meta.fs.unwrap_or(0.0), vec![read_f32le(&meta.path)?]),
        SignalFormat::Csv => (meta.fs.unwrap_or(0.0), vec![read_csv_samples(&meta.path)?]),
        SignalFormat::Wfdb => {
            let hea = if meta.path.extension().is_some_and(|e| e == "hea") {
                meta.path.clone()
            } else {
                meta.path.with_extension("hea")
            };
            let (header, signals) = wfdb::read_wfdb_record(&hea)?;
            (header.fs, signals)
        }
    };
    if channels.iter().any(Vec::is_empty) {
        return Err(IngestError::FormatMismatch(format!(
            "{} holds no samples",
            meta.path.display()
        )));
    }
    let rec = Recording::new(
        meta.subject_id.clone(),
        meta.session_id.clone(),
        meta.day_index,
        meta.record_index,
        fs,
        channels,
    )?;
    let sel = meta.channel_selector.unwrap_or(0);
    let n = rec.n_channels();
    rec.select_channel(sel).ok_or_else(|| {
        IngestError::FormatMismatch(format!(
            "{}: channel {sel} requested, record has {n}",
            meta.path.display()
        ))
    })
}
