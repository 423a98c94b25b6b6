//! Templates, probe fusion, similarity scoring and genuine/impostor pairs.

use std::fmt;
use std::sync::OnceLock;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::registry::{Registry, UnknownStrategy};
use crate::seeding::rng_for;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiometricError {
    #[error("no enrollment embeddings")]
    EmptyEnrollment,
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("constant vector has no correlation")]
    ConstantVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no genuine pairs: no probe's subject is in the gallery")]
    NoGenuinePairs,
    #[error("no impostor pairs")]
    NoImpostorPairs,
    #[error("empty gallery or probe set")]
    EmptyInput,
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateFusion {
    #[default]
    Mean,
    /// medoid member
    Representative,
}

/// How many enrollment embeddings (earliest first) feed a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemplateSize {
    #[default]
    All,
    First(usize),
}

impl Serialize for TemplateSize {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TemplateSize::All => s.serialize_str("all"),
            TemplateSize::First(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for TemplateSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(0) => Err(serde::de::Error::custom("template_size must be positive")),
            Raw::N(n) => Ok(TemplateSize::First(n as usize)),
            Raw::S(s) if s == "all" => Ok(TemplateSize::All),
            Raw::S(s) => Err(serde::de::Error::custom(format!(
                "template_size must be a positive integer or \"all\", got \"{s}\""
            ))),
        }
    }
}

impl fmt::Display for TemplateSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateSize::All => f.write_str("all"),
            TemplateSize::First(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSampling {
    #[default]
    Balanced,
    All,
}

/// Evaluation block of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    pub metric: String,
    pub template_size: TemplateSize,
    pub template_fusion: TemplateFusion,
    pub probe_fusion_k: usize,
    pub pair_sampling: PairSampling,
    pub far_target: f64,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            metric: "cosine".into(),
            template_size: TemplateSize::All,
            template_fusion: TemplateFusion::Mean,
            probe_fusion_k: 3,
            pair_sampling: PairSampling::Balanced,
            far_target: 0.001,
        }
    }
}

/// Higher is more similar.
pub trait SimilarityMetric: Send + Sync {
    fn score(&self, a: &[f64], b: &[f64]) -> Result<f64, BiometricError>;
}

fn same_dim(a: &[f64], b: &[f64]) -> Result<(), BiometricError> {
    if a.len() != b.len() {
        return Err(BiometricError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub struct Cosine;
pub struct Euclidean;
pub struct Pearson;

impl SimilarityMetric for Cosine {
    fn score(&self, a: &[f64], b: &[f64]) -> Result<f64, BiometricError> {
        same_dim(a, b)?;
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 || nb == 0.0 {
            return Err(BiometricError::ZeroVector);
        }
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        Ok((dot / (na * nb)).clamp(-1.0, 1.0))
    }
}

impl SimilarityMetric for Euclidean {
    /// Negated distance.
    fn score(&self, a: &[f64], b: &[f64]) -> Result<f64, BiometricError> {
        same_dim(a, b)?;
        Ok(-a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
    }
}

impl SimilarityMetric for Pearson {
    fn score(&self, a: &[f64], b: &[f64]) -> Result<f64, BiometricError> {
        same_dim(a, b)?;
        let center = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| x - m).collect::<Vec<_>>()
        };
        let (ca, cb) = (center(a), center(b));
        Cosine.score(&ca, &cb).map_err(|_| BiometricError::ConstantVector)
    }
}

pub fn similarity_registry() -> &'static Registry<dyn SimilarityMetric> {
    static REG: OnceLock<Registry<dyn SimilarityMetric>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn SimilarityMetric> = Registry::new("similarity metric");
        r.register("cosine", Box::new(Cosine));
        r.register("euclidean", Box::new(Euclidean));
        r.register("pearson", Box::new(Pearson));
        r
    })
}

pub fn similarity(a: &[f64], b: &[f64], metric: &str) -> Result<f64, BiometricError> {
    similarity_registry().get(metric)?.score(a, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub vector: Vec<f64>,
    pub subject_id: String,
    pub fusion: TemplateFusion,
    pub n_beats: usize,
    pub sessions: Vec<String>,
}

fn mean_vector(vs: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; vs[0].len()];
    for v in vs {
        for (a, b) in m.iter_mut().zip(v) {
            *a += b;
        }
    }
    let n = vs.len() as f64;
    m.iter_mut().for_each(|a| *a /= n);
    m
}

/// Fuses the first `size` embeddings (chronological order) into one vector.
pub fn fuse_template(
    embeddings: &[Vec<f64>],
    fusion: TemplateFusion,
    size: TemplateSize,
    metric: &dyn SimilarityMetric,
) -> Result<Vec<f64>, BiometricError> {
    if embeddings.is_empty() {
        return Err(BiometricError::EmptyEnrollment);
    }
    let d = embeddings[0].len();
    if let Some(bad) = embeddings.iter().find(|e| e.len() != d) {
        return Err(BiometricError::DimensionMismatch(d, bad.len()));
    }
    let n = match size {
        TemplateSize::All => embeddings.len(),
        TemplateSize::First(n) => n.min(embeddings.len()),
    };
    let sel = &embeddings[..n];
    match fusion {
        TemplateFusion::Mean => Ok(mean_vector(sel)),
        TemplateFusion::Representative => {
            let mut best = (0usize, f64::INFINITY);
            for i in 0..n {
                let mut total = 0.0;
                for j in 0..n {
                    if i != j {
                        total += 1.0 - metric.score(&sel[i], &sel[j])?;
                    }
                }
                if total < best.1 {
                    best = (i, total);
                }
            }
            Ok(sel[best.0].clone())
        }
    }
}

pub fn build_template(
    subject_id: &str,
    embeddings: &[Vec<f64>],
    sessions: Vec<String>,
    fusion: TemplateFusion,
    size: TemplateSize,
    metric: &dyn SimilarityMetric,
) -> Result<Template, BiometricError> {
    let vector = fuse_template(embeddings, fusion, size, metric)?;
    let n_beats = match size {
        TemplateSize::All => embeddings.len(),
        TemplateSize::First(n) => n.min(embeddings.len()),
    };
    Ok(Template {
        vector,
        subject_id: subject_id.to_string(),
        fusion,
        n_beats,
        sessions,
    })
}

/// Mean of consecutive groups of `k`; a short trailing group is dropped
/// unless it is the only group.
pub fn fuse_probes(embeddings: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    assert!(k >= 1, "probe fusion size must be >= 1");
    if embeddings.is_empty() {
        return Vec::new();
    }
    if embeddings.len() < k {
        return vec![mean_vector(embeddings)];
    }
    embeddings.chunks_exact(k).map(mean_vector).collect()
}

/// Probes × gallery similarities; gallery columns sorted by subject id.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub scores: Vec<f64>,
    pub probe_subjects: Vec<String>,
    pub gallery_subjects: Vec<String>,
}

impl ScoreMatrix {
    pub fn n_probes(&self) -> usize {
        self.probe_subjects.len()
    }
    pub fn n_gallery(&self) -> usize {
        self.gallery_subjects.len()
    }
    pub fn get(&self, p: usize, g: usize) -> f64 {
        self.scores[p * self.n_gallery() + g]
    }
    pub fn row(&self, p: usize) -> &[f64] {
        let g = self.n_gallery();
        &self.scores[p * g..(p + 1) * g]
    }
    /// Column of the probe's own subject, if enrolled.
    pub fn true_column(&self, p: usize) -> Option<usize> {
        self.gallery_subjects.binary_search(&self.probe_subjects[p]).ok()
    }
}

pub fn score_matrix(
    gallery: &[Template],
    probes: &[(Vec<f64>, String)],
    metric: &dyn SimilarityMetric,
) -> Result<ScoreMatrix, BiometricError> {
    if gallery.is_empty() || probes.is_empty() {
        return Err(BiometricError::EmptyInput);
    }
    let mut cols: Vec<&Template> = gallery.iter().collect();
    cols.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    let rows: Vec<Vec<f64>> = probes
        .par_iter()
        .map(|(v, _)| cols.iter().map(|t| metric.score(v, &t.vector)).collect())
        .collect::<Result<_, _>>()?;
    Ok(ScoreMatrix {
        scores: rows.concat(),
        probe_subjects: probes.iter().map(|(_, s)| s.clone()).collect(),
        gallery_subjects: cols.iter().map(|t| t.subject_id.clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScores {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub sampling: PairSampling,
    pub seed: u64,
}

impl PairScores {
    pub fn new(genuine: Vec<f64>, impostor: Vec<f64>) -> Self {
        Self {
            genuine,
            impostor,
            sampling: PairSampling::All,
            seed: 0,
        }
    }
}

/// Genuine cells are those whose column is the probe's own subject; in
/// balanced mode as many impostor cells as genuine ones are drawn without
/// replacement.
pub fn generate_pairs(m: &ScoreMatrix, mode: PairSampling, seed: u64) -> Result<PairScores, BiometricError> {
    let mut genuine = Vec::new();
    let mut candidates = Vec::new();
    for p in 0..m.n_probes() {
        let t = m.true_column(p);
        for g in 0..m.n_gallery() {
            if Some(g) == t {
                genuine.push(m.get(p, g));
            } else {
                candidates.push(m.get(p, g));
            }
        }
    }
    if genuine.is_empty() {
        return Err(BiometricError::NoGenuinePairs);
    }
    if candidates.is_empty() {
        return Err(BiometricError::NoImpostorPairs);
    }
    let impostor = match mode {
        PairSampling::All => candidates,
        PairSampling::Balanced => {
            let amount = genuine.len().min(candidates.len());
            let mut rng = rng_for(seed, "pair-sampling", &[]);
            let mut idx = index::sample(&mut rng, candidates.len(), amount).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| candidates[i]).collect()
        }
    };
    Ok(PairScores {
        genuine,
        impostor,
        sampling: mode,
        seed,
    })
}
