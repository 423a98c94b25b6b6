use ecgbench::dsp::*;
use ecgbench::types::Recording;
use std::f64::consts::PI;

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

#[test]
fn zscore_example() {
    let y = normalize(&[1.0, 2.0, 3.0], Normalization::Zscore).unwrap();
    let s = (2.0f64 / 3.0).sqrt();
    for (a, b) in y.iter().zip([-1.0 / s, 0.0, 1.0 / s]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((y[2] - 1.22474).abs() < 1e-5);
}

#[test]
fn minmax_example() {
    assert_eq!(normalize(&[2.0, 4.0], Normalization::Minmax).unwrap(), vec![0.0, 1.0]);
}

#[test]
fn constant_segment_has_zero_variance() {
    assert_eq!(normalize(&[3.0; 3], Normalization::Zscore), Err(DspError::ZeroVariance));
    assert_eq!(normalize(&[3.0; 3], Normalization::Minmax), Err(DspError::ZeroVariance));
}

#[test]
fn notch_removes_powerline_tone() {
    let fs = 500.0;
    let x: Vec<f64> = (0..5000).map(|i| (2.0 * PI * 50.0 * i as f64 / fs).sin()).collect();
    let cfg = PreprocessSettings {
        filters: vec![FilterSpec::notch(50.0, 30.0)],
        ..PreprocessSettings::default()
    };
    let rec = Recording::new("s", "a", 0, 0, fs, vec![x.clone()]).unwrap();
    let out = preprocess(&rec, &cfg).unwrap();
    assert_eq!(out.samples.len(), x.len());
    assert!(rms(&out.samples) < 0.1 * rms(&x), "rms {}", rms(&out.samples));
}

#[test]
fn default_preprocess_preserves_length() {
    let x: Vec<f64> = (0..3000).map(|i| (i as f64 * 0.01).sin()).collect();
    let rec = Recording::new("s", "a", 0, 0, 500.0, vec![x]).unwrap();
    let out = preprocess(&rec, &PreprocessSettings::default()).unwrap();
    assert_eq!(out.samples.len(), 3000);
    assert_eq!(out.steps.len(), 2);
}

#[test]
fn band_edge_at_nyquist_rejected() {
    let rec = Recording::new("s", "a", 0, 0, 80.0, vec![vec![0.0; 1000]]).unwrap();
    let err = preprocess(&rec, &PreprocessSettings::default()).unwrap_err();
    assert!(matches!(err, DspError::BandOutOfRange { .. }));
}

#[test]
fn zero_phase_needs_enough_samples() {
    let spec = FilterSpec::butterworth_bandpass(3, 0.5, 40.0);
    let err = apply_filter(&spec, &[0.0; 21], 500.0).unwrap_err();
    assert_eq!(err, DspError::SignalTooShort { needed: 21, got: 21 });
    assert!(apply_filter(&spec, &[0.0; 22], 500.0).is_ok());
}

#[test]
fn foreign_parameters_rejected() {
    let mut spec = FilterSpec::notch(50.0, 30.0);
    spec.window_len = Some(3);
    assert!(matches!(normalize_filter_spec(&spec), Err(DspError::InvalidSpec(_))));
    let spec = FilterSpec {
        kind: "wavelet".into(),
        ..FilterSpec::default()
    };
    assert!(matches!(normalize_filter_spec(&spec), Err(DspError::Unknown(_))));
}

#[test]
fn normalization_is_idempotent() {
    let spec = FilterSpec {
        kind: "savitzky-golay".into(),
        ..FilterSpec::default()
    };
    let a = normalize_filter_spec(&spec).unwrap();
    assert_eq!(a.window_len, Some(11));
    assert_eq!(normalize_filter_spec(&a).unwrap(), a);
}
