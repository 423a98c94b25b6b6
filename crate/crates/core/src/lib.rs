//! Benchmarking toolkit for ECG-based biometric identification and
//! verification.
//!
//! The pipeline runs ingestion, filtering, R-peak detection, segmentation,
//! embedding, template fusion, regime-mapped enrollment/probe splits and
//! metric computation. Every interchangeable algorithm family (filters,
//! detectors, embedders, similarity metrics, evaluation regimes) sits behind
//! a trait and is looked up by name in a [`registry::Registry`], so the
//! run configuration selects strategies at runtime.

// `!(a > b)` guards deliberately treat NaN as failing
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod biometric;
pub mod cli;
pub mod config;
pub mod dsp;
pub mod embed;
pub mod ingest;
pub mod metrics;
pub mod regimes;
pub mod registry;
pub mod represent;
pub mod results;
pub mod rpeak;
pub mod seeding;
pub mod segment;
pub mod synth;
pub mod types;

pub use config::{validate_config, RunConfig};
pub use types::{MetricsReport, Recording};
