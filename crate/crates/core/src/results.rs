//! Results files: versioned JSON, the flat CSV table and text reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::types::{CellKey, MeanStd, MetricSummary, MetricsReport, RunMeta, SeedRecord, Setting, SubjectCounts};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "regime,setting,Rank-1,Rank-5,EER,AUC,D-prime,TAR@FAR";
const METRIC_LABELS: [&str; 6] = ["Rank-1", "Rank-5", "EER", "AUC", "D-prime", "TAR@FAR"];

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("results schema version {found} is not supported (expected {supported})")]
    SchemaVersionMismatch { found: u64, supported: u32 },
    #[error("malformed results file: {0}")]
    Malformed(String),
    #[error("no cell matches `{0}`")]
    NoSuchCell(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub regime: String,
    pub setting: Setting,
    pub subjects: SubjectCounts,
    pub metrics: MetricSummary,
}

impl CellResult {
    pub fn key(&self) -> CellKey {
        CellKey {
            regime: self.regime.clone(),
            setting: self.setting,
        }
    }
}

/// On-disk form of a [`MetricsReport`]. Carries no timestamps, so equal
/// reports serialize to equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellResult>,
    pub per_seed: Vec<SeedRecord>,
    pub warnings: Vec<String>,
}

impl ResultsFile {
    pub fn from_report(report: &MetricsReport) -> Self {
        let cells = report
            .cells
            .iter()
            .map(|(k, m)| CellResult {
                regime: k.regime.clone(),
                setting: k.setting,
                subjects: report.subjects.get(k).copied().unwrap_or_default(),
                metrics: m.clone(),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: report.meta.config_digest.clone(),
            seeds: report.meta.seeds.clone(),
            cells,
            per_seed: report.per_seed.clone(),
            warnings: report.warnings.clone(),
        }
    }

    pub fn to_report(&self) -> MetricsReport {
        MetricsReport {
            cells: self.cells.iter().map(|c| (c.key(), c.metrics.clone())).collect(),
            subjects: self.cells.iter().map(|c| (c.key(), c.subjects)).collect(),
            per_seed: self.per_seed.clone(),
            warnings: self.warnings.clone(),
            meta: RunMeta {
                config_digest: self.config_digest.clone(),
                seeds: self.seeds.clone(),
                started_unix: None,
                finished_unix: None,
            },
        }
    }

    /// Pretty JSON with a trailing newline. Floats use the shortest decimal
    /// form that parses back to the same `f64`.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ResultsError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ResultsError::Malformed(e.to_string()))?;
        let found = v
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| ResultsError::Malformed("missing schema_version".into()))?;
        if found != u64::from(SCHEMA_VERSION) {
            return Err(ResultsError::SchemaVersionMismatch {
                found,
                supported: SCHEMA_VERSION,
            });
        }
        serde_json::from_value(v).map_err(|e| ResultsError::Malformed(e.to_string()))
    }

    /// One row per cell, each metric as `mean±std`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let vals: Vec<String> = c
                .metrics
                .as_array()
                .iter()
                .map(|m| format!("{}±{}", m.mean, m.std))
                .collect();
            let _ = writeln!(out, "{},{},{}", c.regime, c.setting, vals.join(","));
        }
        out
    }

    /// Finds a cell by `regime` or `regime:setting` (closed when omitted).
    pub fn cell(&self, selector: &str) -> Option<&CellResult> {
        let (name, setting) = parse_selector(selector)?;
        self.cells.iter().find(|c| c.regime == name && c.setting == setting)
    }
}

fn parse_selector(selector: &str) -> Option<(String, Setting)> {
    let (name, setting) = match selector.rsplit_once(':') {
        Some((n, "open")) => (n, Setting::Open),
        Some((n, "closed")) => (n, Setting::Closed),
        Some(_) => return None,
        None => (selector, Setting::Closed),
    };
    let name = crate::regimes::resolve_regime_name(name).ok()?;
    Some((name, setting))
}

/// Parses a CSV table back into `(regime, setting, [(mean, std); 6])` rows.
pub fn parse_csv(text: &str) -> Result<Vec<(String, String, [MeanStd; 6])>, ResultsError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(ResultsError::Malformed("unexpected CSV header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(ResultsError::Malformed(format!("row has {} fields: {l}", f.len())));
            }
            let mut vals = [MeanStd { mean: 0.0, std: 0.0 }; 6];
            for (i, cell) in f[2..].iter().enumerate() {
                let (m, s) = cell
                    .split_once('±')
                    .ok_or_else(|| ResultsError::Malformed(format!("bad value `{cell}`")))?;
                let num = |t: &str| {
                    t.parse::<f64>()
                        .map_err(|e| ResultsError::Malformed(format!("`{t}`: {e}")))
                };
                vals[i] = MeanStd {
                    mean: num(m)?,
                    std: num(s)?,
                };
            }
            Ok((f[0].to_string(), f[1].to_string(), vals))
        })
        .collect()
}

/// Side-by-side table of every cell across the given runs.
pub fn comparison_table(runs: &[(String, ResultsFile)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:<22} {:<7} {}",
        "run",
        "regime",
        "setting",
        METRIC_LABELS.map(|l| format!("{l:>17}")).join(" ")
    );
    for (name, r) in runs {
        for c in &r.cells {
            let vals: Vec<String> = c
                .metrics
                .as_array()
                .iter()
                .map(|m| format!("{:>17}", format!("{:.4}±{:.4}", m.mean, m.std)))
                .collect();
            let _ = writeln!(
                out,
                "{:<24} {:<22} {:<7} {}",
                name,
                c.regime,
                c.setting.to_string(),
                vals.join(" ")
            );
        }
    }
    out
}

/// Metric means of cell `b` minus those of cell `a`, each selector looked up
/// across all runs in order.
pub fn delta(runs: &[(String, ResultsFile)], a: &str, b: &str) -> Result<[f64; 6], ResultsError> {
    let find = |sel: &str| {
        runs.iter()
            .find_map(|(_, r)| r.cell(sel))
            .ok_or_else(|| ResultsError::NoSuchCell(sel.to_string()))
    };
    let (ca, cb) = (find(a)?, find(b)?);
    let (ma, mb) = (ca.metrics.as_array(), cb.metrics.as_array());
    Ok(std::array::from_fn(|i| mb[i].mean - ma[i].mean))
}

pub fn delta_table(a: &str, b: &str, d: &[f64; 6]) -> String {
    let mut out = format!("delta ({b}) - ({a})\n");
    for (label, v) in METRIC_LABELS.iter().zip(d) {
        let _ = writeln!(out, "{label:<8} {v:+.6}");
    }
    out
}
