//! Second-order-section IIR filters: Butterworth design by analog prototype
//! and bilinear transform, plus the powerline notch.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::DspError;

pub const MAX_ORDER: usize = 8;

/// One section in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b0 + self.b1 * z_inv + self.b2 * z2) / (1.0 + self.a1 * z_inv + self.a2 * z2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
    pub gain: f64,
}

impl BiquadCascade {
    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / fs;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(self.gain, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64, fs: f64) -> f64 {
        self.response(freq_hz, fs).norm()
    }

    /// Filter length used for edge padding: `2·sections + 1`.
    pub fn len(&self) -> usize {
        2 * self.sections.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    /// Causal filtering, state initialized to the steady state of a
    /// constant input equal to `x[0]`.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().map(|v| v * self.gain).collect();
        let mut level = y.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            let g = s.dc_gain();
            let mut z2 = (s.b2 - s.a2 * g) * level;
            let mut z1 = (s.b1 - s.a1 * g) * level + z2;
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b0 * input + z1;
                z1 = s.b1 * input - s.a1 * out + z2;
                z2 = s.b2 * input - s.a2 * out;
                *v = out;
            }
            level *= g;
        }
        y
    }
}

/// Pass band for [`design_butterworth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    Bandpass { low_hz: f64, high_hz: f64 },
    Highpass { cut_hz: f64 },
    Lowpass { cut_hz: f64 },
}

fn in_band(f: f64, fs: f64) -> bool {
    f.is_finite() && f > 0.0 && f < fs / 2.0
}

/// Designs a digital Butterworth filter as a stable biquad cascade.
///
/// Poles of the normalized analog lowpass prototype are moved to the
/// requested band with the standard analog frequency transformations at
/// pre-warped edge frequencies and mapped to the z-plane by the bilinear
/// transform. Gain is normalized to unity at the centre of the pass band
/// (bandpass), at Nyquist (highpass) or at DC (lowpass).
pub fn design_butterworth(order: usize, band: Band, fs: f64) -> Result<BiquadCascade, DspError> {
    if order == 0 || order > MAX_ORDER {
        return Err(DspError::InvalidSpec(format!(
            "butterworth order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(DspError::InvalidSpec(format!("bad sampling rate {fs}")));
    }
    let k = 2.0 * fs;
    let warp = |f: f64| k * (PI * f / fs).tan();
    let proto: Vec<Complex64> = (0..order)
        .map(|i| {
            let theta = PI * (2 * i + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect();

    let (analog_poles, zero_kind, ref_freq) = match band {
        Band::Bandpass { low_hz, high_hz } => {
            if !(in_band(low_hz, fs) && in_band(high_hz, fs) && low_hz < high_hz) {
                return Err(DspError::BandOutOfRange { low_hz, high_hz, fs });
            }
            let (w1, w2) = (warp(low_hz), warp(high_hz));
            let bw = w2 - w1;
            let w0sq = w1 * w2;
            let mut poles = Vec::with_capacity(2 * order);
            for p in &proto {
                let half = p * bw / 2.0;
                let root = (half * half - w0sq).sqrt();
                poles.push(half + root);
                poles.push(half - root);
            }
            let center = fs / PI * (w0sq.sqrt() / k).atan();
            (poles, ZeroKind::Bandpass, center)
        }
        Band::Highpass { cut_hz } => {
            if !in_band(cut_hz, fs) {
                return Err(DspError::BandOutOfRange {
                    low_hz: cut_hz,
                    high_hz: cut_hz,
                    fs,
                });
            }
            let wc = warp(cut_hz);
            (proto.iter().map(|p| wc / p).collect(), ZeroKind::Highpass, fs / 2.0)
        }
        Band::Lowpass { cut_hz } => {
            if !in_band(cut_hz, fs) {
                return Err(DspError::BandOutOfRange {
                    low_hz: cut_hz,
                    high_hz: cut_hz,
                    fs,
                });
            }
            let wc = warp(cut_hz);
            (proto.iter().map(|p| p * wc).collect(), ZeroKind::Lowpass, 0.0)
        }
    };

    let z_poles: Vec<Complex64> = analog_poles.iter().map(|s| (k + s) / (k - s)).collect();
    let sections = pair_poles(&z_poles, zero_kind);
    let mut cascade = BiquadCascade { sections, gain: 1.0 };
    cascade.gain = 1.0 / cascade.magnitude(ref_freq, fs);
    debug_assert!(cascade.is_stable());
    Ok(cascade)
}

#[derive(Clone, Copy)]
enum ZeroKind {
    Bandpass,
    Highpass,
    Lowpass,
}

fn pair_poles(poles: &[Complex64], zeros: ZeroKind) -> Vec<Biquad> {
    const IM_TOL: f64 = 1e-10;
    let mut sections = Vec::new();
    let mut reals: Vec<f64> = Vec::new();
    for p in poles {
        if p.im > IM_TOL {
            sections.push((-2.0 * p.re, p.norm_sqr()));
        } else if p.im.abs() <= IM_TOL {
            reals.push(p.re);
        }
    }
    reals.sort_by(|a, b| a.total_cmp(b));
    let mut first_order = None;
    let mut it = reals.chunks(2);
    for pair in &mut it {
        match pair {
            [a, b] => sections.push((-(a + b), a * b)),
            [a] => first_order = Some(*a),
            _ => unreachable!(),
        }
    }
    let mut out: Vec<Biquad> = sections
        .into_iter()
        .map(|(a1, a2)| {
            let (b0, b1, b2) = match zeros {
                ZeroKind::Bandpass => (1.0, 0.0, -1.0),
                ZeroKind::Highpass => (1.0, -2.0, 1.0),
                ZeroKind::Lowpass => (1.0, 2.0, 1.0),
            };
            Biquad { b0, b1, b2, a1, a2 }
        })
        .collect();
    if let Some(p) = first_order {
        let (b0, b1) = match zeros {
            ZeroKind::Lowpass => (1.0, 1.0),
            _ => (1.0, -1.0),
        };
        out.push(Biquad {
            b0,
            b1,
            b2: 0.0,
            a1: -p,
            a2: 0.0,
        });
    }
    out
}

/// Second-order IIR notch at `notch_hz` with quality factor `q`.
pub fn design_notch(notch_hz: f64, q: f64, fs: f64) -> Result<BiquadCascade, DspError> {
    if !in_band(notch_hz, fs) {
        return Err(DspError::BandOutOfRange {
            low_hz: notch_hz,
            high_hz: notch_hz,
            fs,
        });
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(DspError::InvalidSpec(format!("notch q must be positive, got {q}")));
    }
    let w0 = 2.0 * PI * notch_hz / fs;
    let bw = w0 / q;
    let g = 1.0 / (1.0 + (bw / 2.0).tan());
    let c = w0.cos();
    Ok(BiquadCascade {
        sections: vec![Biquad {
            b0: g,
            b1: -2.0 * g * c,
            b2: g,
            a1: -2.0 * g * c,
            a2: 2.0 * g - 1.0,
        }],
        gain: 1.0,
    })
}
