//! Filtering, resampling and normalization primitives plus the
//! preprocessing orchestrator.
//!
//! Filter kinds are strategies: each implements [`FilterKind`] and is
//! registered by name in [`filter_registry`]. A [`FilterSpec`] from the run
//! configuration names its kind and carries only the parameters that kind
//! understands.

pub mod fir;
pub mod iir;
pub mod resample;
pub mod window;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::{Registry, UnknownStrategy};
use crate::types::Recording;

pub use fir::{design_fir_bandpass, FirFilter};
pub use iir::{design_butterworth, design_notch, Band, Biquad, BiquadCascade};
pub use resample::resample_fourier;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("band {low_hz}-{high_hz} Hz outside (0, fs/2) for fs={fs}")]
    BandOutOfRange { low_hz: f64, high_hz: f64, fs: f64 },
    #[error("signal too short: need more than {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("zero variance segment")]
    ZeroVariance,
    #[error("invalid filter spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    #[default]
    ZeroPhase,
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Zscore,
    Minmax,
    /// keep millivolts
    None,
}

/// Filter description as written in a run configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notch_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_mode: Option<PhaseMode>,
}

impl FilterSpec {
    pub fn butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64) -> Self {
        Self {
            kind: "butterworth_bandpass".into(),
            order: Some(order),
            low_hz: Some(low_hz),
            high_hz: Some(high_hz),
            phase_mode: Some(PhaseMode::ZeroPhase),
            ..Self::default()
        }
    }

    pub fn notch(notch_hz: f64, q: f64) -> Self {
        Self {
            kind: "notch".into(),
            notch_hz: Some(notch_hz),
            q: Some(q),
            phase_mode: Some(PhaseMode::ZeroPhase),
            ..Self::default()
        }
    }

    pub fn window(kind: &str, window_len: usize) -> Self {
        Self {
            kind: kind.into(),
            window_len: Some(window_len),
            ..Self::default()
        }
    }

    fn present_fields(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        macro_rules! check {
            ($($f:ident),*) => { $( if self.$f.is_some() { v.push(stringify!($f)); } )* };
        }
        check!(
            order,
            low_hz,
            high_hz,
            cut_hz,
            notch_hz,
            q,
            window_len,
            poly_order,
            transition_hz,
            phase_mode
        );
        v
    }

    fn only(&self, allowed: &[&str]) -> Result<(), DspError> {
        for f in self.present_fields() {
            if !allowed.contains(&f) {
                return Err(DspError::InvalidSpec(format!(
                    "`{f}` is not a parameter of filter kind `{}`",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    fn phase(&self) -> PhaseMode {
        self.phase_mode.unwrap_or_default()
    }
}

/// A filter ready to run on signals sampled at a fixed rate.
pub trait SignalFilter: Send + Sync {
    /// Length-preserving filtering.
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, DspError>;
}

/// A family of filters selectable by name.
pub trait FilterKind: Send + Sync {
    /// Fills defaults and rejects parameters foreign to the kind.
    fn normalize(&self, spec: &FilterSpec) -> Result<FilterSpec, DspError>;
    fn build(&self, spec: &FilterSpec, fs: f64) -> Result<Box<dyn SignalFilter>, DspError>;
}

/// Runs `pass` forward-backward and backward-forward over an odd
/// extension of `x` and averages both, giving a zero-phase result that is
/// exactly time-reversal symmetric.
fn zero_phase(x: &[f64], padlen: usize, pass: impl Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>, DspError> {
    let n = x.len();
    if n <= padlen {
        return Err(DspError::SignalTooShort { needed: padlen, got: n });
    }
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    ext.extend((1..=padlen).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=padlen).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let rev = |v: Vec<f64>| -> Vec<f64> { v.into_iter().rev().collect() };
    let fwd_bwd = rev(pass(&rev(pass(&ext))));
    let bwd_fwd = pass(&rev(pass(&rev(ext.clone()))));
    Ok(fwd_bwd[padlen..padlen + n]
        .iter()
        .zip(&bwd_fwd[padlen..padlen + n])
        .map(|(a, b)| 0.5 * (a + b))
        .collect())
}

struct IirFilter {
    cascade: BiquadCascade,
    phase: PhaseMode,
}

impl SignalFilter for IirFilter {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, DspError> {
        match self.phase {
            PhaseMode::Causal => Ok(self.cascade.filter(x)),
            PhaseMode::ZeroPhase => zero_phase(x, 3 * self.cascade.len(), |v| self.cascade.filter(v)),
        }
    }
}

struct FirApply {
    fir: FirFilter,
    phase: PhaseMode,
}

impl SignalFilter for FirApply {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, DspError> {
        match self.phase {
            PhaseMode::Causal => Ok(self.fir.filter(x)),
            PhaseMode::ZeroPhase => zero_phase(x, 3 * self.fir.taps.len(), |v| self.fir.filter(v)),
        }
    }
}

/// `(signal, window_len, poly_order)`
type WindowFn = fn(&[f64], usize, usize) -> Result<Vec<f64>, DspError>;

struct WindowApply {
    f: WindowFn,
    window_len: usize,
    poly_order: usize,
}

impl SignalFilter for WindowApply {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, DspError> {
        (self.f)(x, self.window_len, self.poly_order)
    }
}

struct ButterworthBandpass;
impl FilterKind for ButterworthBandpass {
    fn normalize(&self, spec: &FilterSpec) -> Result<FilterSpec, DspError> {
        spec.only(&["order", "low_hz", "high_hz", "phase_mode"])?;
        Ok(FilterSpec {
            kind: "butterworth_bandpass".into(),
            order: Some(spec.order.unwrap_or(3)),
            low_hz: Some(spec.low_hz.unwrap_or(0.5)),
            high_hz: Some(spec.high_hz.unwrap_or(40.0)),
            phase_mode: Some(spec.phase()),
            ..FilterSpec::default()
        })
    }
    fn build(&self, spec: &FilterSpec, fs: f64) -> Result<Box<dyn SignalFilter>, DspError> {
        let s = self.normalize(spec)?;
        let band = Band::Bandpass {
            low_hz: s.low_hz.unwrap(),
            high_hz: s.high_hz.unwrap(),
        };
        Ok(Box::new(IirFilter {
            cascade: design_butterworth(s.order.unwrap(), band, fs)?,
            phase: s.phase(),
        }))
    }
}

struct ButterworthPass {
    kind: &'static str,
    highpass: bool,
    default_cut: f64,
}
impl FilterKind for ButterworthPass {
    fn normalize(&self, spec: &FilterSpec) -> Result<FilterSpec, DspError> {
        spec.only(&["order", "cut_hz", "phase_mode"])?;
        Ok(FilterSpec {
            kind: self.kind.into(),
            order: Some(spec.order.unwrap_or(3)),
            cut_hz: Some(spec.cut_hz.unwrap_or(self.default_cut)),
            phase_mode: Some(spec.phase()),
            ..FilterSpec::default()
        })
    }
    fn build(&self, spec: &FilterSpec, fs: f64) -> Result<Box<dyn SignalFilter>, DspError> {
        let s = self.normalize(spec)?;
        let cut_hz = s.cut_hz.unwrap();
        let band = if self.highpass {
            Band::Highpass { cut_hz }
        } else {
            Band::Lowpass { cut_hz }
        };
        Ok(Box::new(IirFilter {
            cascade: design_butterworth(s.order.unwrap(), band, fs)?,
            phase: s.phase(),
        }))
    }
}

struct FirBandpass;
impl FilterKind for FirBandpass {
    fn normalize(&self, spec: &FilterSpec) -> Result<FilterSpec, DspError> {
        spec.only(&["low_hz", "high_hz", "transition_hz", "phase_mode"])?;
        let low = spec.low_hz.unwrap_or(0.5);
        Ok(FilterSpec {
            kind: "fir_bandpass".into(),
            low_hz: Some(low),
            high_hz: Some(spec.high_hz.unwrap_or(40.0)),
            transition_hz: Some(spec.transition_hz.unwrap_or(low)),
            phase_mode: Some(spec.phase()),
            ..FilterSpec::default()
        })
    }
    fn build(&self, spec: &FilterSpec, fs: f64) -> Result<Box<dyn SignalFilter>, DspError> {
        let s = self.normalize(spec)?;
        Ok(Box::new(FirApply {
            fir: design_fir_bandpass(s.low_hz.unwrap(), s.high_hz.unwrap(), s.transition_hz.unwrap(), fs)?,
            phase: s.phase(),
        }))
    }
}

struct Notch;
impl FilterKind for Notch {
    fn normalize(&self, spec: &FilterSpec) -> Result<FilterSpec, DspError> {
        spec.only(&["notch_hz", "q", "phase_mode"])?;
        Ok(FilterSpec {
            kind: "notch".into(),
            notch_hz: Some(spec.notch_hz.unwrap_or(50.0)),
            q: Some(spec.q.unwrap_or(30.0)),
            phase_mode: Some(spec.phase()),
            ..FilterSpec::default()
        })
    }
    fn build(&self, spec: &FilterSpec, fs: f64) -> Result<Box<dyn SignalFilter>, DspError> {
        let s = self.normalize(spec)?;
        Ok(Box::new(IirFilter {
            cascade: design_notch(s.notch_hz.unwrap(), s.q.unwrap(), fs)?,
            phase: s.phase(),
        }))
    }
}

struct WindowKind {
    kind: &'static str,
    default_len: usize,
    poly: Option<usize>,
}
impl FilterKind for WindowKind {
    fn normalize(&self, spec: &FilterSpec) -> Result<FilterSpec, DspError> {
        if self.poly.is_some() {
            spec.only(&["window_len", "poly_order"])?;
        } else {
            spec.only(&["window_len"])?;
        }
        let window_len = spec.window_len.unwrap_or(self.default_len);
        if window_len == 0 || window_len.is_multiple_of(2) {
            return Err(DspError::InvalidSpec(format!(
                "{} window_len must be odd, got {window_len}",
                self.kind
            )));
        }
        let poly_order = self.poly.map(|d| spec.poly_order.unwrap_or(d));
        if let Some(p) = poly_order {
            if p >= window_len {
                return Err(DspError::InvalidSpec(format!(
                    "poly_order {p} must be < window_len {window_len}"
                )));
            }
        }
        Ok(FilterSpec {
            kind: self.kind.into(),
            window_len: Some(window_len),
            poly_order,
            ..FilterSpec::default()
        })
    }
    fn build(&self, spec: &FilterSpec, _fs: f64) -> Result<Box<dyn SignalFilter>, DspError> {
        let s = self.normalize(spec)?;
        let f: WindowFn = match self.kind {
            "moving_average" => |x, w, _| window::moving_average(x, w),
            "median" => |x, w, _| window::median(x, w),
            _ => window::savitzky_golay,
        };
        Ok(Box::new(WindowApply {
            f,
            window_len: s.window_len.unwrap(),
            poly_order: s.poly_order.unwrap_or(0),
        }))
    }
}

/// Built-in filter kinds.
pub fn filter_registry() -> &'static Registry<dyn FilterKind> {
    static REG: OnceLock<Registry<dyn FilterKind>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn FilterKind> = Registry::new("filter kind");
        r.register("butterworth_bandpass", Box::new(ButterworthBandpass));
        r.register(
            "butterworth_highpass",
            Box::new(ButterworthPass {
                kind: "butterworth_highpass",
                highpass: true,
                default_cut: 0.5,
            }),
        );
        r.register(
            "butterworth_lowpass",
            Box::new(ButterworthPass {
                kind: "butterworth_lowpass",
                highpass: false,
                default_cut: 40.0,
            }),
        );
        r.register("fir_bandpass", Box::new(FirBandpass));
        r.register("notch", Box::new(Notch));
        r.register(
            "moving_average",
            Box::new(WindowKind {
                kind: "moving_average",
                default_len: 5,
                poly: None,
            }),
        );
        r.register(
            "median",
            Box::new(WindowKind {
                kind: "median",
                default_len: 5,
                poly: None,
            }),
        );
        r.register(
            "savitzky_golay",
            Box::new(WindowKind {
                kind: "savitzky_golay",
                default_len: 11,
                poly: Some(3),
            }),
        );
        r
    })
}

pub fn normalize_filter_spec(spec: &FilterSpec) -> Result<FilterSpec, DspError> {
    filter_registry().get(&spec.kind)?.normalize(spec)
}

pub fn build_filter(spec: &FilterSpec, fs: f64) -> Result<Box<dyn SignalFilter>, DspError> {
    filter_registry().get(&spec.kind)?.build(spec, fs)
}

pub fn apply_filter(spec: &FilterSpec, x: &[f64], fs: f64) -> Result<Vec<f64>, DspError> {
    build_filter(spec, fs)?.apply(x)
}

/// Per-segment scaling. Z-score uses the population standard deviation.
pub fn normalize(x: &[f64], method: Normalization) -> Result<Vec<f64>, DspError> {
    if x.len() < 2 {
        return Err(DspError::SignalTooShort {
            needed: 1,
            got: x.len(),
        });
    }
    match method {
        Normalization::Zscore => {
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if !(sd > 1e-12 * mean.abs().max(1.0)) {
                return Err(DspError::ZeroVariance);
            }
            let mut y: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
            // second pass removes rounding residue so |mean| and |std-1| stay below 1e-9
            let m2 = y.iter().sum::<f64>() / n;
            let s2 = (y.iter().map(|v| (v - m2).powi(2)).sum::<f64>() / n).sqrt();
            for v in y.iter_mut() {
                *v = (*v - m2) / s2;
            }
            Ok(y)
        }
        Normalization::Minmax => {
            let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(DspError::ZeroVariance);
            }
            Ok(x.iter().map(|v| (v - lo) / (hi - lo)).collect())
        }
        Normalization::None => Ok(x.to_vec()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSettings {
    pub filters: Vec<FilterSpec>,
    pub normalization: Normalization,
    /// Length every segment is resampled to before embedding.
    pub target_len: usize,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        Self {
            filters: vec![FilterSpec::butterworth_bandpass(3, 0.5, 40.0)],
            normalization: Normalization::Zscore,
            target_len: 128,
        }
    }
}

/// A filtered single-channel signal and the steps that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanSignal {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub steps: Vec<String>,
}

/// Channel select (channel 0 of the recording), then each configured filter
/// in order. Segmentation and per-segment normalization happen downstream.
pub fn preprocess(rec: &Recording, cfg: &PreprocessSettings) -> Result<CleanSignal, DspError> {
    let mut samples = rec.channels()[0].clone();
    let mut steps = vec!["channel:0".to_string()];
    for spec in &cfg.filters {
        let spec = normalize_filter_spec(spec)?;
        samples = build_filter(&spec, rec.fs)?.apply(&samples)?;
        steps.push(serde_json::to_string(&spec).unwrap_or_else(|_| spec.kind.clone()));
    }
    Ok(CleanSignal {
        samples,
        fs: rec.fs,
        steps,
    })
}
