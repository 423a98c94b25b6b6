//! Symmetric window filters: moving average, median and Savitzky-Golay.

use nalgebra::DMatrix;

use super::DspError;

fn check_odd(window_len: usize, what: &str) -> Result<usize, DspError> {
    if window_len == 0 || window_len.is_multiple_of(2) {
        return Err(DspError::InvalidSpec(format!(
            "{what} window_len must be odd and positive, got {window_len}"
        )));
    }
    Ok(window_len / 2)
}

fn replicate(x: &[f64], i: isize) -> f64 {
    let last = x.len() as isize - 1;
    x[i.clamp(0, last) as usize]
}

pub fn moving_average(x: &[f64], window_len: usize) -> Result<Vec<f64>, DspError> {
    let h = check_odd(window_len, "moving_average")? as isize;
    let w = window_len as f64;
    Ok((0..x.len() as isize)
        .map(|i| (-h..=h).map(|k| replicate(x, i + k)).sum::<f64>() / w)
        .collect())
}

pub fn median(x: &[f64], window_len: usize) -> Result<Vec<f64>, DspError> {
    let h = check_odd(window_len, "median")? as isize;
    let mut buf = Vec::with_capacity(window_len);
    Ok((0..x.len() as isize)
        .map(|i| {
            buf.clear();
            buf.extend((-h..=h).map(|k| replicate(x, i + k)));
            buf.sort_by(|a, b| a.total_cmp(b));
            buf[h as usize]
        })
        .collect())
}

/// Least-squares projection rows for a centred window: row `j` maps the
/// window samples to the coefficient of `t^j`, `t = -h..=h`.
pub fn savgol_projection(window_len: usize, poly_order: usize) -> DMatrix<f64> {
    let h = (window_len / 2) as f64;
    let a = DMatrix::from_fn(window_len, poly_order + 1, |r, c| (r as f64 - h).powi(c as i32));
    let ata = a.transpose() * &a;
    let inv = ata
        .try_inverse()
        .expect("Vandermonde normal matrix is invertible for poly_order < window_len");
    inv * a.transpose()
}

/// Savitzky-Golay smoothing. Interior samples use the centred convolution;
/// the first and last `window_len/2` samples evaluate the polynomial fitted
/// to the first/last full window, so inputs that are polynomials of degree
/// `<= poly_order` are reproduced exactly.
pub fn savitzky_golay(x: &[f64], window_len: usize, poly_order: usize) -> Result<Vec<f64>, DspError> {
    let h = check_odd(window_len, "savitzky_golay")?;
    if poly_order >= window_len {
        return Err(DspError::InvalidSpec(format!(
            "poly_order {poly_order} must be < window_len {window_len}"
        )));
    }
    if x.len() < window_len {
        return Err(DspError::SignalTooShort {
            needed: window_len,
            got: x.len(),
        });
    }
    let proj = savgol_projection(window_len, poly_order);
    let smooth: Vec<f64> = proj.row(0).iter().copied().collect();
    let n = x.len();
    let mut y = vec![0.0; n];
    for i in h..n - h {
        y[i] = smooth.iter().zip(&x[i - h..=i + h]).map(|(c, v)| c * v).sum();
    }
    let fit = |window: &[f64]| -> Vec<f64> {
        (0..=poly_order)
            .map(|j| proj.row(j).iter().zip(window).map(|(c, v)| c * v).sum())
            .collect()
    };
    let eval = |coef: &[f64], t: f64| coef.iter().rev().fold(0.0, |acc, c| acc * t + c);
    let head = fit(&x[..window_len]);
    let tail = fit(&x[n - window_len..]);
    for i in 0..h {
        y[i] = eval(&head, i as f64 - h as f64);
        y[n - 1 - i] = eval(&tail, h as f64 - i as f64);
    }
    Ok(y)
}
