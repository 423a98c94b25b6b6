//! Hamming-windowed sinc band-pass FIR.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::DspError;

#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Tap count `round(3.3·fs/transition_hz)`, forced odd.
pub fn fir_length(fs: f64, transition_hz: f64) -> usize {
    let n = (3.3 * fs / transition_hz).round() as usize;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n.max(1)
    }
}

pub fn design_fir_bandpass(low_hz: f64, high_hz: f64, transition_hz: f64, fs: f64) -> Result<FirFilter, DspError> {
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0) {
        return Err(DspError::BandOutOfRange { low_hz, high_hz, fs });
    }
    if !(transition_hz > 0.0 && transition_hz.is_finite()) {
        return Err(DspError::InvalidSpec(format!(
            "transition_hz must be positive, got {transition_hz}"
        )));
    }
    let n = fir_length(fs, transition_hz);
    let (f1, f2) = (low_hz / fs, high_hz / fs);
    let mid = (n - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let m = i as f64 - mid;
            let ideal = 2.0 * f2 * sinc(2.0 * f2 * m) - 2.0 * f1 * sinc(2.0 * f1 * m);
            let w = if n == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()
            };
            ideal * w
        })
        .collect();
    let mut fir = FirFilter { taps: taps.clone() };
    let g = fir.magnitude((low_hz + high_hz) / 2.0, fs);
    for t in taps.iter_mut() {
        *t /= g;
    }
    fir.taps = taps;
    Ok(fir)
}

impl FirFilter {
    pub fn magnitude(&self, freq_hz: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / fs;
        self.taps
            .iter()
            .enumerate()
            .map(|(i, &h)| h * Complex64::from_polar(1.0, -w * i as f64))
            .sum::<Complex64>()
            .norm()
    }

    /// Causal convolution; samples before the start are taken equal to `x[0]`.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let first = x.first().copied().unwrap_or(0.0);
        (0..x.len())
            .map(|n| {
                self.taps
                    .iter()
                    .enumerate()
                    .map(|(k, &h)| h * if n >= k { x[n - k] } else { first })
                    .sum()
            })
            .collect()
    }
}
