#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use realfft::num_complex::Complex;
use realfft::RealFftPlanner;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

/// Direct-form linear convolution.
pub fn direct_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (j, &hj) in h.iter().enumerate() {
        if hj == 0.0 {
            continue;
        }
        for (dst, &xi) in y[j..j + x.len()].iter_mut().zip(x) {
            *dst += hj * xi;
        }
    }
    y
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Voiced-speech stand-in: a gliding harmonic series under a syllabic
/// envelope, separated by pauses, over a faint noise floor.
pub fn speech_like(seed: u64, fs: u32, seconds: f64) -> Vec<f64> {
    let mut r = rng(seed);
    let n = (seconds * fs as f64) as usize;
    let f0 = r.gen_range(90.0..220.0);
    let rate = r.gen_range(3.0..5.0);
    let mut phase = 0.0;
    (0..n)
        .map(|i| {
            let t = i as f64 / fs as f64;
            let f = f0 * (1.0 + 0.15 * (2.0 * PI * 0.5 * t).sin());
            phase += 2.0 * PI * f / fs as f64;
            let voiced: f64 = (1..=12).map(|k| (k as f64 * phase).sin() / k as f64).sum();
            let syllable = (PI * rate * t).sin().powi(2);
            let active = if (t % 1.5) < 1.1 && t > 0.2 && t < seconds - 0.2 { 1.0 } else { 0.0 };
            0.2 * voiced * syllable * active + 1e-4 * r.gen_range(-1.0..1.0)
        })
        .collect()
}

pub struct Spectrum {
    pub bins: Vec<Complex<f64>>,
    pub n: usize,
}

pub fn spectrum(x: &[f64], n: usize) -> Spectrum {
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let mut buf = vec![0.0; n];
    buf[..x.len()].copy_from_slice(x);
    let mut bins = fwd.make_output_vec();
    fwd.process(&mut buf, &mut bins).unwrap();
    Spectrum { bins, n }
}

/// Energy of `a - g b` over energy of `g b` within `[lo, hi]` Hz, with `g`
/// the least-squares gain, in dB.
pub fn in_band_residual_db(a: &[f64], b: &[f64], fs: u32, lo: f64, hi: f64) -> f64 {
    let n = a.len().max(b.len()).next_power_of_two() * 2;
    let sa = spectrum(a, n);
    let sb = spectrum(b, n);
    let band = |k: usize| {
        let f = k as f64 * fs as f64 / n as f64;
        f >= lo && f <= hi
    };
    let (mut ab, mut bb) = (0.0, 0.0);
    for k in (0..sa.bins.len()).filter(|k| band(*k)) {
        ab += (sa.bins[k] * sb.bins[k].conj()).re;
        bb += sb.bins[k].norm_sqr();
    }
    let g = ab / bb;
    let (mut num, mut den) = (0.0, 0.0);
    for k in (0..sa.bins.len()).filter(|k| band(*k)) {
        num += (sa.bins[k] - sb.bins[k] * g).norm_sqr();
        den += (sb.bins[k] * g).norm_sqr();
    }
    10.0 * (num / den).log10()
}

/// Circular band-limited delay by `d` samples via a linear phase ramp.
pub fn phase_shift(x: &[f64], d: f64) -> Vec<f64> {
    let n = x.len();
    assert!(n % 2 == 0);
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = x.to_vec();
    let mut spec = fwd.make_output_vec();
    fwd.process(&mut buf, &mut spec).unwrap();
    let last = spec.len() - 1;
    for (k, c) in spec.iter_mut().enumerate() {
        let w = -2.0 * PI * k as f64 * d / n as f64;
        *c *= Complex::new(w.cos(), w.sin());
    }
    // the Nyquist bin of a real signal cannot carry a fractional phase
    spec[last] = Complex::new(0.0, 0.0);
    spec[0].im = 0.0;
    let mut out = inv.make_output_vec();
    inv.process(&mut spec, &mut out).unwrap();
    out.iter().map(|v| v / n as f64).collect()
}
