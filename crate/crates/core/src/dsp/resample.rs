use num_complex::Complex64;
use rustfft::FftPlanner;

/// Fourier-domain resampling to `target_len` samples.
///
/// The spectrum is truncated or zero-padded symmetrically; an even-length
/// Nyquist bin is folded when shrinking and split when growing. Output is
/// scaled by `target_len/len` so amplitudes are preserved.
pub fn resample_fourier(x: &[f64], target_len: usize) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 2 && target_len >= 2, "resample needs at least 2 samples");
    if n == target_len {
        return x.to_vec();
    }
    let m = target_len;
    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spec);

    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let common = n.min(m);
    // unambiguous positive and negative bins
    let half = (common - 1) / 2;
    out[..=half].copy_from_slice(&spec[..=half]);
    for k in 1..=half {
        out[m - k] = spec[n - k];
    }
    if common.is_multiple_of(2) {
        let ny = common / 2;
        if m < n {
            out[ny] = spec[ny] + spec[n - ny];
        } else {
            out[ny] = spec[ny] * 0.5;
            out[m - ny] = spec[ny] * 0.5;
        }
    }
    planner.plan_fft_inverse(m).process(&mut out);
    // inverse is unnormalized: divide by m, then scale by m/n
    out.iter().map(|c| c.re / n as f64).collect()
}
