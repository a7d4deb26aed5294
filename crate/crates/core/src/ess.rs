//! Exponential sine sweep excitation, its inverse filter, and deconvolution
//! of recorded sweeps into measured impulse responses.
//!
//! The sweep is `A sin(K (exp(t / L) - 1))` with `L = T / ln(w2 / w1)` and
//! `K = w1 L`. Its inverse is the time-reversed sweep weighted by
//! `exp(-t / L)`, which undoes the sweep's pink spectrum. Convolving a
//! recording with the inverse puts the linear response at lag `N - 1`
//! (`N` = sweep length) and pushes every harmonic distortion product to
//! earlier lags, where extraction discards it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::conv::convolve;
use crate::error::{Error, Result};
use crate::signal::{db10, AudioSignal, ImpulseResponse, Provenance};

/// Minimum peak-over-median energy ratio for a sweep to count as found, dB.
pub const SWEEP_DETECTION_DB: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub f_start: f64,
    pub f_end: f64,
    /// Seconds.
    pub duration: f64,
    pub amplitude: f64,
    /// Raised-cosine fade-in, seconds.
    pub fade_in: f64,
    /// Raised-cosine fade-out, seconds.
    pub fade_out: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            f_start: 20.0,
            f_end: 20_000.0,
            duration: 10.0,
            amplitude: 0.5,
            fade_in: 0.5,
            fade_out: 0.5,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.f_start > 0.0 && self.f_start < self.f_end) {
            return Err(Error::validation(
                "sweep",
                format!("need 0 < f_start < f_end, got {} and {}", self.f_start, self.f_end),
            ));
        }
        if self.f_end >= nyquist {
            return Err(Error::validation(
                "sweep",
                format!("f_end {} Hz must be below Nyquist ({nyquist} Hz)", self.f_end),
            ));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::validation("sweep", "duration must be positive"));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err(Error::validation(
                "sweep",
                format!("amplitude {} outside (0, 1]", self.amplitude),
            ));
        }
        if !(self.fade_in >= 0.0 && self.fade_out >= 0.0)
            || self.fade_in + self.fade_out > self.duration
        {
            return Err(Error::validation(
                "sweep",
                "fades must be non-negative and fit within the duration",
            ));
        }
        Ok(())
    }

    /// `L`: time for the instantaneous frequency to grow by a factor of e.
    pub fn rate_constant(&self) -> f64 {
        self.duration / (self.f_end / self.f_start).ln()
    }

    pub fn num_samples(&self, sample_rate: u32) -> usize {
        (self.duration * sample_rate as f64).round() as usize
    }

    /// Instantaneous frequency in Hz at `t` seconds.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f_start * (t / self.rate_constant()).exp()
    }

    /// Seconds, relative to the linear response, at which the `k`-th
    /// harmonic's response appears (always negative for `k >= 2`).
    pub fn harmonic_lag(&self, k: u32) -> f64 {
        -self.rate_constant() * (k as f64).ln()
    }
}

fn raw_sweep(spec: &SweepSpec, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let l = spec.rate_constant();
    let k = 2.0 * PI * spec.f_start * l;
    let n = spec.num_samples(sample_rate);
    let fade_in = (spec.fade_in * fs).round() as usize;
    let fade_out = (spec.fade_out * fs).round() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let mut v = spec.amplitude * (k * ((t / l).exp() - 1.0)).sin();
            if i < fade_in {
                v *= 0.5 * (1.0 - (PI * i as f64 / fade_in as f64).cos());
            }
            let from_end = n - 1 - i;
            if from_end < fade_out {
                v *= 0.5 * (1.0 - (PI * from_end as f64 / fade_out as f64).cos());
            }
            v
        })
        .collect()
}

pub fn generate_ess(spec: &SweepSpec, sample_rate: u32) -> Result<AudioSignal> {
    spec.validate(sample_rate)?;
    AudioSignal::mono(sample_rate, raw_sweep(spec, sample_rate))
}

fn inverse_samples(spec: &SweepSpec, sample_rate: u32) -> Result<Vec<f64>> {
    let sweep = raw_sweep(spec, sample_rate);
    let fs = sample_rate as f64;
    let l = spec.rate_constant();
    let mut inv: Vec<f64> = sweep
        .iter()
        .rev()
        .enumerate()
        .map(|(i, v)| v * (-(i as f64) / fs / l).exp())
        .collect();
    // value of (sweep * inverse) at lag N-1; scaling by it puts the
    // deconvolved peak at unity
    let n = sweep.len();
    let zero_lag: f64 = (0..n).map(|i| sweep[i] * inv[n - 1 - i]).sum();
    if !(zero_lag > 0.0) {
        return Err(Error::validation("sweep", "inverse filter has no energy"));
    }
    inv.iter_mut().for_each(|v| *v /= zero_lag);
    Ok(inv)
}

/// Farina inverse filter: time-reversed sweep with +6 dB/octave
/// compensation, scaled so that `sweep * inverse` peaks at 1.
pub fn inverse_filter(spec: &SweepSpec, sample_rate: u32) -> Result<AudioSignal> {
    spec.validate(sample_rate)?;
    AudioSignal::mono(sample_rate, inverse_samples(spec, sample_rate)?)
}

/// Full linear deconvolution of a recording.
#[derive(Debug, Clone)]
pub struct LinearResponse {
    pub samples: Vec<f64>,
    /// Index corresponding to zero delay of the linear response.
    pub zero_lag: usize,
}

impl LinearResponse {
    /// Causal part, starting at zero delay.
    pub fn causal(&self) -> &[f64] {
        &self.samples[self.zero_lag..]
    }
}

/// Convolves `recording` with the inverse filter. Linear in the recording.
pub fn deconvolve_full(recording: &[f64], spec: &SweepSpec, sample_rate: u32) -> Result<LinearResponse> {
    spec.validate(sample_rate)?;
    let inv = inverse_samples(spec, sample_rate)?;
    if recording.len() < inv.len() {
        return Err(Error::validation(
            "recording",
            format!(
                "{} samples is shorter than the sweep ({} samples)",
                recording.len(),
                inv.len()
            ),
        ));
    }
    Ok(LinearResponse {
        samples: convolve(recording, &inv),
        zero_lag: inv.len() - 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvolveConfig {
    /// Seconds of response to keep, counted from the start of the guard.
    pub ir_length: f64,
    /// Seconds kept before the detected direct-path peak.
    pub pre_peak_guard: f64,
    /// Scale so the direct-path peak equals 1.
    pub normalize: bool,
}

impl DeconvolveConfig {
    pub fn new(ir_length: f64) -> Self {
        DeconvolveConfig {
            ir_length,
            pre_peak_guard: 0.005,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvolutionInfo {
    /// Factor the raw response was multiplied by (1 when not normalized).
    pub scale: f64,
    /// Delay of the detected peak relative to zero lag, samples.
    pub peak_delay: i64,
    /// Peak energy over median energy of the full response, dB.
    pub peak_to_median_db: f64,
}

pub fn deconvolve_ir(recording: &AudioSignal, spec: &SweepSpec, ir_length: f64) -> Result<ImpulseResponse> {
    deconvolve_ir_with(recording, spec, &DeconvolveConfig::new(ir_length)).map(|(ir, _)| ir)
}

/// Recovers the impulse response from a recorded sweep: deconvolve, locate
/// the direct-path peak, and cut `ir_length` seconds starting
/// `pre_peak_guard` before it.
pub fn deconvolve_ir_with(
    recording: &AudioSignal,
    spec: &SweepSpec,
    config: &DeconvolveConfig,
) -> Result<(ImpulseResponse, DeconvolutionInfo)> {
    let fs = recording.sample_rate();
    let rec = recording.expect_mono("recording")?;
    if !(config.ir_length > 0.0) || !(config.pre_peak_guard >= 0.0) {
        return Err(Error::validation(
            "deconvolution",
            "ir_length must be positive and the guard non-negative",
        ));
    }
    let full = deconvolve_full(rec, spec, fs)?;
    let x = &full.samples;

    let peak = crate::signal::peak_index(x);
    let peak_energy = x[peak] * x[peak];
    if peak_energy == 0.0 {
        return Err(Error::NoSignal("recording is silent"));
    }
    // lags past the end of the recording only hold the inverse filter's
    // run-out and would drag the median down
    let mut energies: Vec<f64> = x[..rec.len()].iter().map(|v| v * v).collect();
    let mid = energies.len() / 2;
    let (_, median, _) = energies.select_nth_unstable_by(mid, f64::total_cmp);
    let peak_to_median_db = if *median > 0.0 {
        db10(peak_energy / *median)
    } else {
        f64::INFINITY
    };
    if peak_to_median_db < SWEEP_DETECTION_DB {
        return Err(Error::SweepNotFound {
            peak_db: peak_to_median_db,
            required_db: SWEEP_DETECTION_DB,
        });
    }

    let guard = (config.pre_peak_guard * fs as f64).round() as usize;
    let len = ((config.ir_length * fs as f64).round() as usize).max(1);
    let start = peak.saturating_sub(guard);
    let mut samples = vec![0.0; len];
    let available = x.len().saturating_sub(start).min(len);
    samples[..available].copy_from_slice(&x[start..start + available]);

    let scale = if config.normalize { 1.0 / x[peak] } else { 1.0 };
    if config.normalize {
        samples.iter_mut().for_each(|v| *v *= scale);
    }
    let direct = peak - start;
    let mut ir = ImpulseResponse::new(fs, samples, Provenance::Measured)?;
    if direct < ir.len() {
        ir = ir.with_direct_path(direct)?;
    }
    Ok((
        ir,
        DeconvolutionInfo {
            scale,
            peak_delay: peak as i64 - full.zero_lag as i64,
            peak_to_median_db,
        },
    ))
}
