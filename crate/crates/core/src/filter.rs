use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Second-order Butterworth high-pass, applied causally in place.
pub fn butterworth_highpass(x: &mut [f64], cutoff_hz: f64, sample_rate: u32) -> Result<()> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::validation(
            "high-pass",
            format!("cutoff {cutoff_hz} Hz must lie in (0, {nyquist})"),
        ));
    }
    // bilinear transform with Q = 1/sqrt(2)
    let w0 = 2.0 * PI * cutoff_hz / sample_rate as f64;
    let (sin, cos) = w0.sin_cos();
    let alpha = sin / (2.0 * FRAC_1_SQRT_2);
    let a0 = 1.0 + alpha;
    let b0 = (1.0 + cos) / 2.0 / a0;
    let b1 = -(1.0 + cos) / a0;
    let b2 = b0;
    let a1 = -2.0 * cos / a0;
    let a2 = (1.0 - alpha) / a0;

    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for v in x.iter_mut() {
        let x0 = *v;
        let y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x0;
        y2 = y1;
        y1 = y0;
        *v = y0;
    }
    Ok(())
}

/// Hann-windowed sinc evaluated at `x` samples, zero beyond `half_width`.
pub fn windowed_sinc(x: f64, half_width: f64) -> f64 {
    if x.abs() >= half_width {
        return 0.0;
    }
    let window = 0.5 * (1.0 + (PI * x / half_width).cos());
    if x.abs() < 1e-12 {
        window
    } else {
        window * (PI * x).sin() / (PI * x)
    }
}

/// Band-limited shift: `out[n] = x(n - shift)` for `n < out_len`, with
/// integer shifts reduced to plain copies.
pub fn shift_signal(x: &[f64], shift: f64, out_len: usize, half_width: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    let whole = shift.round();
    if (shift - whole).abs() < 1e-12 {
        let k = whole as i64;
        for (n, slot) in out.iter_mut().enumerate() {
            let src = n as i64 - k;
            if src >= 0 && (src as usize) < x.len() {
                *slot = x[src as usize];
            }
        }
        return out;
    }
    let w = half_width as f64;
    for (m, &v) in x.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let centre = m as f64 + shift;
        let lo = (centre - w).ceil().max(0.0) as usize;
        let hi = (centre + w).floor();
        if hi < 0.0 {
            continue;
        }
        let hi = (hi as usize).min(out_len.saturating_sub(1));
        for (n, slot) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *slot += v * windowed_sinc(n as f64 - centre, w);
        }
    }
    out
}
