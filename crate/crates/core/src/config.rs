//! Run configuration: parsing, defaulting and consistency checks.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::biometric::{similarity_registry, EvaluationSettings, TemplateSize};
use crate::dsp::{normalize_filter_spec, PreprocessSettings};
use crate::embed::{embedder_registry, EmbedderSettings};
use crate::regimes::{RegimeError, RegimeSpec};
use crate::segment::SegmentationSettings;
use crate::synth::SynthSpec;
use crate::types::Setting;

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

const TOP_LEVEL_KEYS: [&str; 7] = [
    "dataset",
    "preprocess",
    "segmentation",
    "embedder",
    "regime",
    "evaluation",
    "seeds",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown field: {0}")]
    UnknownField(String),
    #[error("inconsistent settings: {0}")]
    InconsistentSettings(String),
    #[error("seeds must not be empty")]
    EmptySeeds,
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// manifest JSON path
    Manifest(PathBuf),
    /// generated in memory
    Synthetic(SyntheticSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SynthSpec>,
    #[serde(default)]
    pub seed: u64,
    /// overrides the preset's subject count
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_subjects: Option<usize>,
    /// overrides the preset's record duration
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

impl SyntheticSource {
    pub fn preset(name: &str, seed: u64) -> Self {
        Self {
            preset: Some(name.to_string()),
            spec: None,
            seed,
            n_subjects: None,
            duration_s: None,
        }
    }

    /// The generator spec after overrides.
    pub fn resolve(&self) -> Result<SynthSpec, ConfigError> {
        let mut spec = match (&self.preset, &self.spec) {
            (Some(p), None) => SynthSpec::preset(p).map_err(|e| ConfigError::Schema(e.to_string()))?,
            (None, Some(s)) => s.clone(),
            _ => {
                return Err(ConfigError::InconsistentSettings(
                    "synthetic dataset needs exactly one of `preset` and `spec`".into(),
                ))
            }
        };
        if let Some(n) = self.n_subjects {
            spec.n_subjects = n;
        }
        if let Some(d) = self.duration_s {
            spec.duration_s = d;
        }
        spec.validate()
            .map_err(|e| ConfigError::InconsistentSettings(e.to_string()))?;
        Ok(spec)
    }
}

/// A fully defaulted, validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub preprocess: PreprocessSettings,
    pub segmentation: SegmentationSettings,
    pub embedder: EmbedderSettings,
    pub regime: Vec<RegimeSpec>,
    pub evaluation: EvaluationSettings,
    pub seeds: Vec<u64>,
}

impl RunConfig {
    /// Defaults around a dataset and regime list, validated.
    pub fn new(dataset: DatasetSource, regime: Vec<RegimeSpec>) -> Result<Self, ConfigError> {
        let raw = serde_json::json!({ "dataset": dataset, "regime": regime });
        validate_config(&raw)
    }

    /// SHA-256 (hex) of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Keeps only the regime cells matching the given name and/or setting.
    pub fn restrict(&mut self, regime: Option<&str>, setting: Option<Setting>) -> Result<(), ConfigError> {
        if let Some(name) = regime {
            let name = crate::regimes::resolve_regime_name(name).map_err(|e| ConfigError::Schema(e.to_string()))?;
            let mut kept: Vec<RegimeSpec> = self.regime.iter().filter(|r| r.name == name).cloned().collect();
            if kept.is_empty() {
                kept.push(RegimeSpec::named(&name, setting.unwrap_or(Setting::Closed)));
            }
            self.regime = kept;
        }
        if let Some(s) = setting {
            let mut seen = Vec::new();
            for mut r in std::mem::take(&mut self.regime) {
                r.setting = s;
                if !seen.contains(&r) {
                    seen.push(r);
                }
            }
            self.regime = seen;
        }
        Ok(())
    }
}

fn parse_block<T: DeserializeOwned>(key: &str, v: &Value) -> Result<T, ConfigError> {
    serde_json::from_value(v.clone()).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown field") || msg.contains("unknown variant") && key == "dataset" {
            ConfigError::UnknownField(format!("{key}: {msg}"))
        } else {
            ConfigError::Schema(format!("{key}: {msg}"))
        }
    })
}

fn regime_error(e: RegimeError) -> ConfigError {
    match e {
        RegimeError::InvalidParameters(_) | RegimeError::OverlappingRanges { .. } => {
            ConfigError::InconsistentSettings(e.to_string())
        }
        other => ConfigError::Schema(format!("regime: {other}")),
    }
}

fn parse_regimes(v: &Value) -> Result<Vec<RegimeSpec>, ConfigError> {
    let items: Vec<&Value> = match v {
        Value::Array(a) => a.iter().collect(),
        other => vec![other],
    };
    if items.is_empty() {
        return Err(ConfigError::Schema("regime: list is empty".into()));
    }
    let mut out: Vec<RegimeSpec> = Vec::new();
    for item in items {
        let spec = match item {
            Value::String(name) => RegimeSpec::named(name, Setting::Closed),
            obj @ Value::Object(_) => parse_block("regime", obj)?,
            other => {
                return Err(ConfigError::Schema(format!(
                    "regime: expected name or object, got {other}"
                )))
            }
        };
        let spec = spec.validated().map_err(regime_error)?;
        if out.iter().any(|r| r.key() == spec.key()) {
            return Err(ConfigError::InconsistentSettings(format!(
                "regime cell {} listed twice",
                spec.key()
            )));
        }
        out.push(spec);
    }
    Ok(out)
}

/// Parses, defaults and checks a configuration tree.
pub fn validate_config(raw: &Value) -> Result<RunConfig, ConfigError> {
    let obj = raw
        .as_object()
        .ok_or_else(|| ConfigError::Schema("top level must be an object".into()))?;
    if let Some(k) = obj.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownField(k.clone()));
    }
    let get = |k: &str| obj.get(k).filter(|v| !v.is_null());

    let dataset: DatasetSource = match get("dataset") {
        None => return Err(ConfigError::Schema("missing `dataset`".into())),
        Some(Value::String(p)) => DatasetSource::Manifest(PathBuf::from(p)),
        Some(v) => parse_block("dataset", v)?,
    };
    if let DatasetSource::Synthetic(s) = &dataset {
        s.resolve()?;
    }

    let mut preprocess: PreprocessSettings =
        get("preprocess").map_or(Ok(Default::default()), |v| parse_block("preprocess", v))?;
    preprocess.filters = preprocess
        .filters
        .iter()
        .map(normalize_filter_spec)
        .collect::<Result<_, _>>()
        .map_err(|e| ConfigError::InconsistentSettings(format!("preprocess: {e}")))?;
    if preprocess.target_len < 8 {
        return Err(ConfigError::InconsistentSettings(
            "preprocess: target_len must be >= 8".into(),
        ));
    }

    let segmentation: SegmentationSettings =
        get("segmentation").map_or(Ok(Default::default()), |v| parse_block("segmentation", v))?;
    let segmentation = segmentation
        .validated()
        .map_err(|e| ConfigError::InconsistentSettings(format!("segmentation: {e}")))?;

    let embedder: EmbedderSettings = get("embedder").map_or(Ok(Default::default()), |v| parse_block("embedder", v))?;
    if !embedder_registry().contains(&embedder.kind) {
        return Err(ConfigError::Schema(format!(
            "embedder: unknown kind `{}`",
            embedder.kind
        )));
    }
    if embedder.hidden_dim == 0 || embedder.epochs == 0 || embedder.batch == 0 || !(embedder.lr > 0.0) {
        return Err(ConfigError::InconsistentSettings(
            "embedder: hidden_dim, epochs and batch must be >= 1 and lr > 0".into(),
        ));
    }
    embedder
        .augment
        .validate()
        .map_err(|e| ConfigError::InconsistentSettings(format!("embedder.augment: {e}")))?;

    let regime = match get("regime") {
        None => return Err(ConfigError::Schema("missing `regime`".into())),
        Some(v) => parse_regimes(v)?,
    };

    let evaluation: EvaluationSettings =
        get("evaluation").map_or(Ok(Default::default()), |v| parse_block("evaluation", v))?;
    if !similarity_registry().contains(&evaluation.metric) {
        return Err(ConfigError::Schema(format!(
            "evaluation: unknown metric `{}`",
            evaluation.metric
        )));
    }
    if evaluation.probe_fusion_k == 0 {
        return Err(ConfigError::InconsistentSettings(
            "evaluation: probe_fusion_k must be >= 1".into(),
        ));
    }
    if evaluation.template_size == TemplateSize::First(0) {
        return Err(ConfigError::InconsistentSettings(
            "evaluation: template_size must be >= 1".into(),
        ));
    }
    if !(evaluation.far_target > 0.0 && evaluation.far_target <= 1.0) {
        return Err(ConfigError::InconsistentSettings(
            "evaluation: far_target must be in (0, 1]".into(),
        ));
    }
    let evaluation = EvaluationSettings {
        metric: crate::registry::canonical_name(&evaluation.metric),
        ..evaluation
    };
    let embedder = EmbedderSettings {
        kind: crate::registry::canonical_name(&embedder.kind),
        ..embedder
    };

    let seeds: Vec<u64> = get("seeds").map_or(Ok(DEFAULT_SEEDS.to_vec()), |v| parse_block("seeds", v))?;
    if seeds.is_empty() {
        return Err(ConfigError::EmptySeeds);
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(ConfigError::InconsistentSettings("seeds contain duplicates".into()));
    }

    Ok(RunConfig {
        dataset,
        preprocess,
        segmentation,
        embedder,
        regime,
        evaluation,
        seeds,
    })
}

/// Reads and validates a config file. A relative manifest path is resolved
/// against the config file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: Value =
        serde_json::from_str(&text).map_err(|e| ConfigError::Schema(format!("{}: {e}", path.display())))?;
    let mut cfg = validate_config(&raw)?;
    if let DatasetSource::Manifest(m) = &mut cfg.dataset {
        if m.is_relative() {
            if let Some(dir) = path.parent() {
                *m = dir.join(&*m);
            }
        }
    }
    Ok(cfg)
}
