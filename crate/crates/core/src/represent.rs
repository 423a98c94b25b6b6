//! 2D encodings of 1D segments: magnitude spectrogram, Gramian angular
//! field and recurrence plot, plus an 8-bit PGM dump for inspection.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::{num_complex::Complex, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepresentError {
    #[error("window of {win_len} samples longer than signal of {len}")]
    WindowTooLong { win_len: usize, len: usize },
    #[error("hop and window length must be positive")]
    BadHop,
    #[error("signal is constant")]
    ConstantSignal,
    #[error("need at least 2 samples")]
    TooShort,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Axes {
    Spectrogram {
        freqs_hz: Vec<f64>,
        frame_times_s: Vec<f64>,
    },
    /// rows and columns are sample indices
    Samples,
}

/// Row-major real image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub encoding: String,
    pub axes: Axes,
}

impl Image2D {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Binary PGM (P5) after min-max scaling to 0..=255. A flat image maps
    /// to zeros.
    pub fn write_pgm(&self, mut w: impl Write) -> std::io::Result<()> {
        let lo = self.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        write!(w, "P5\n{} {}\n255\n", self.cols, self.rows)?;
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| {
                if span > 0.0 {
                    ((v - lo) / span * 255.0).round() as u8
                } else {
                    0
                }
            })
            .collect();
        w.write_all(&bytes)
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    // periodic form, the usual choice for spectral analysis
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Hann-windowed magnitude STFT: `win_len/2 + 1` frequency rows by
/// `floor((len − win_len)/hop) + 1` frame columns.
pub fn stft_spectrogram(x: &[f64], fs: f64, win_len: usize, hop: usize) -> Result<Image2D, RepresentError> {
    if hop == 0 || win_len == 0 {
        return Err(RepresentError::BadHop);
    }
    if win_len > x.len() {
        return Err(RepresentError::WindowTooLong { win_len, len: x.len() });
    }
    let rows = win_len / 2 + 1;
    let cols = (x.len() - win_len) / hop + 1;
    let window = hann(win_len);
    let fft = FftPlanner::new().plan_fft_forward(win_len);
    let mut data = vec![0.0; rows * cols];
    let mut buf = vec![Complex::new(0.0, 0.0); win_len];
    for c in 0..cols {
        let frame = &x[c * hop..c * hop + win_len];
        for (b, (&v, &w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            *b = Complex::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for r in 0..rows {
            data[r * cols + c] = buf[r].norm();
        }
    }
    Ok(Image2D {
        rows,
        cols,
        data,
        encoding: "stft".into(),
        axes: Axes::Spectrogram {
            freqs_hz: (0..rows).map(|r| r as f64 * fs / win_len as f64).collect(),
            frame_times_s: (0..cols).map(|c| (c * hop) as f64 / fs).collect(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GafMode {
    Summation,
    Difference,
}

/// Gramian angular field of `x` after min-max scaling to `[-1, 1]`.
pub fn gaf(x: &[f64], mode: GafMode) -> Result<Image2D, RepresentError> {
    if x.len() < 2 {
        return Err(RepresentError::TooShort);
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(RepresentError::ConstantSignal);
    }
    let phi: Vec<f64> = x
        .iter()
        .map(|&v| (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0).acos())
        .collect();
    let n = x.len();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push(match mode {
                GafMode::Summation => (phi[i] + phi[j]).cos(),
                GafMode::Difference => (phi[i] - phi[j]).sin(),
            });
        }
    }
    Ok(Image2D {
        rows: n,
        cols: n,
        data,
        encoding: match mode {
            GafMode::Summation => "gasf".into(),
            GafMode::Difference => "gadf".into(),
        },
        axes: Axes::Samples,
    })
}

/// Binary recurrence plot of the scalar series (no delay embedding):
/// `R[i][j] = 1` iff `|x_i − x_j| ≤ epsilon`.
pub fn recurrence_plot(x: &[f64], epsilon: f64) -> Image2D {
    let n = x.len();
    let mut data = Vec::with_capacity(n * n);
    for &a in x {
        for &b in x {
            data.push(if (a - b).abs() <= epsilon { 1.0 } else { 0.0 });
        }
    }
    Image2D {
        rows: n,
        cols: n,
        data,
        encoding: "recurrence".into(),
        axes: Axes::Samples,
    }
}
