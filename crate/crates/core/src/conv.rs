//! FFT-based linear convolution.
//!
//! Short inputs are convolved with a single zero-padded transform; long
//! inputs go through overlap-add with a block size picked from a simple
//! operation-count model. Both paths produce the full linear convolution
//! of length `len(x) + len(h) - 1`.

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

/// Operands with at most this many nonzero samples are applied directly.
const SPARSE_TAPS: usize = 1;

/// Smallest transform the planner will consider.
const MIN_FFT: usize = 64;

/// Largest overlap-add transform. Bigger blocks stop paying off once the
/// working set falls out of cache.
const MAX_BLOCK_FFT: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// One transform covering the whole output.
    SingleShot { fft_len: usize },
    /// Overlap-add with `fft_len`-point transforms, `hop` input samples each.
    OverlapAdd { fft_len: usize, hop: usize },
}

fn fft_cost(n: usize) -> f64 {
    let n = n as f64;
    n * n.log2()
}

/// Picks the cheaper of single-shot and the best overlap-add block size.
pub fn plan(signal_len: usize, kernel_len: usize) -> Strategy {
    let out_len = signal_len + kernel_len - 1;
    let single = out_len.next_power_of_two().max(MIN_FFT);
    // forward x, inverse y, plus the kernel transform
    let single_cost = 3.0 * fft_cost(single);

    let mut best = Strategy::SingleShot { fft_len: single };
    let mut best_cost = single_cost;
    let mut n = (2 * kernel_len).next_power_of_two().max(MIN_FFT);
    while n <= MAX_BLOCK_FFT && n < single {
        let hop = n - kernel_len + 1;
        let blocks = signal_len.div_ceil(hop) as f64;
        let cost = fft_cost(n) * (2.0 * blocks + 1.0) + blocks * n as f64;
        if cost < best_cost {
            best_cost = cost;
            best = Strategy::OverlapAdd { fft_len: n, hop };
        }
        n *= 2;
    }
    best
}

struct Transforms {
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    len: usize,
}

impl Transforms {
    fn new(len: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        Transforms {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex<f64>> {
        let mut buf = vec![0.0; self.len];
        buf[..x.len()].copy_from_slice(x);
        let mut out = self.forward.make_output_vec();
        self.forward
            .process(&mut buf, &mut out)
            .expect("buffer sizes come from the plan");
        out
    }

    /// Inverse transform including the 1/N normalization.
    fn time(&self, spec: &mut [Complex<f64>]) -> Vec<f64> {
        // realfft requires purely real DC and Nyquist bins
        spec[0].im = 0.0;
        if let Some(last) = spec.last_mut() {
            last.im = 0.0;
        }
        let mut out = self.inverse.make_output_vec();
        self.inverse
            .process(spec, &mut out)
            .expect("buffer sizes come from the plan");
        let scale = 1.0 / self.len as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }
}

/// Full linear convolution of `x` and `h`.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    // pure delays (unit impulses, anechoic nearest-sample IRs) stay exact
    for (sparse, other) in [(h, x), (x, h)] {
        if sparse.iter().filter(|v| **v != 0.0).take(SPARSE_TAPS + 1).count() <= SPARSE_TAPS {
            return sparse_convolve(other, sparse);
        }
    }
    // the longer operand is streamed
    let (signal, kernel) = if x.len() >= h.len() { (x, h) } else { (h, x) };
    match plan(signal.len(), kernel.len()) {
        Strategy::SingleShot { fft_len } => single_shot(signal, kernel, fft_len),
        Strategy::OverlapAdd { fft_len, hop } => overlap_add(signal, kernel, fft_len, hop),
    }
}

fn sparse_convolve(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len() + taps.len() - 1];
    for (offset, &w) in taps.iter().enumerate().filter(|(_, w)| **w != 0.0) {
        for (dst, v) in y[offset..offset + x.len()].iter_mut().zip(x) {
            *dst += w * v;
        }
    }
    y
}

fn single_shot(x: &[f64], h: &[f64], fft_len: usize) -> Vec<f64> {
    let t = Transforms::new(fft_len);
    let hs = t.spectrum(h);
    let mut xs = t.spectrum(x);
    for (a, b) in xs.iter_mut().zip(&hs) {
        *a *= b;
    }
    let mut y = t.time(&mut xs);
    y.truncate(x.len() + h.len() - 1);
    y
}

fn overlap_add(x: &[f64], h: &[f64], fft_len: usize, hop: usize) -> Vec<f64> {
    let out_len = x.len() + h.len() - 1;
    let t = Transforms::new(fft_len);
    let hs = t.spectrum(h);
    let mut y = vec![0.0; out_len];
    let mut buf = vec![0.0; fft_len];
    let mut spec = t.forward.make_output_vec();
    let mut block = t.inverse.make_output_vec();
    let scale = 1.0 / fft_len as f64;
    for start in (0..x.len()).step_by(hop) {
        let chunk = &x[start..(start + hop).min(x.len())];
        buf.fill(0.0);
        buf[..chunk.len()].copy_from_slice(chunk);
        t.forward
            .process(&mut buf, &mut spec)
            .expect("buffer sizes come from the plan");
        for (a, b) in spec.iter_mut().zip(&hs) {
            *a *= b;
        }
        spec[0].im = 0.0;
        if let Some(last) = spec.last_mut() {
            last.im = 0.0;
        }
        t.inverse
            .process(&mut spec, &mut block)
            .expect("buffer sizes come from the plan");
        let valid = (chunk.len() + h.len() - 1).min(out_len - start);
        for (dst, v) in y[start..start + valid].iter_mut().zip(&block) {
            *dst += v * scale;
        }
    }
    y
}

/// Full linear cross-correlation `r[k] = sum_n a[n] b[n + k]` for lags
/// `k` in `-(len(a)-1) ..= len(b)-1`; element 0 holds the most negative lag.
pub fn cross_correlate(a: &[f64], b: &[f64]) -> Vec<f64> {
    let reversed: Vec<f64> = a.iter().rev().copied().collect();
    convolve(&reversed, b)
}
