//! Multi-microphone processing: GCC-PHAT delay estimation, delay-and-sum
//! beamforming and oracle channel selection.

use std::collections::BTreeMap;

use realfft::num_complex::Complex;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::shift_signal;
use crate::signal::{energy, AudioSignal};

/// Cross-spectrum bins below this fraction of the largest magnitude are
/// zeroed instead of whitened.
pub const PHAT_FLOOR: f64 = 1e-8;

/// Default delay search bound, seconds.
pub const DEFAULT_MAX_DELAY: f64 = 0.010;

/// Steering estimates with a lower peak-to-second-peak ratio are flagged.
pub const CONFIDENCE_THRESHOLD: f64 = 2.0;

/// Half-width of the fractional-shift kernel, samples.
pub const SHIFT_HALF_WIDTH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Integer-lag argmax.
    #[default]
    None,
    /// Three-point parabola through the peak and its neighbours.
    Parabolic,
    /// Maximum of the band-limited correlation, evaluated from its spectrum.
    Sinc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdoaEstimate {
    /// Positive when `b` lags `a`, seconds.
    pub delay: f64,
    pub delay_samples: f64,
    /// Correlation peak relative to a perfect match, in `[0, 1]`.
    pub peak_value: f64,
    /// Peak over the largest value outside the peak's immediate neighbourhood.
    pub confidence: f64,
}

struct PhatCorrelation {
    /// Whitened cross-spectrum `conj(A) B / |conj(A) B|`.
    spectrum: Vec<Complex<f64>>,
    /// Circular correlation, lag `k` at index `k mod n`.
    values: Vec<f64>,
    n: usize,
    /// Fraction of the full spectrum that survived the floor.
    active_fraction: f64,
}

impl PhatCorrelation {
    fn new(a: &[f64], b: &[f64]) -> Self {
        let n = (a.len() + b.len()).next_power_of_two();
        let mut planner = RealFftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let transform = |x: &[f64]| {
            let mut buf = vec![0.0; n];
            buf[..x.len()].copy_from_slice(x);
            let mut out = fwd.make_output_vec();
            fwd.process(&mut buf, &mut out).expect("sizes from plan");
            out
        };
        let sa = transform(a);
        let sb = transform(b);
        let mut cross: Vec<Complex<f64>> = sa.iter().zip(&sb).map(|(x, y)| x.conj() * y).collect();
        let max = cross.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let floor = PHAT_FLOOR * max;
        // DC and Nyquist appear once in the full spectrum, the rest twice
        let mut active = 0.0;
        let last = cross.len() - 1;
        for (k, c) in cross.iter_mut().enumerate() {
            let mag = c.norm();
            if mag > floor && mag > 0.0 {
                *c /= mag;
                active += if k == 0 || k == last { 1.0 } else { 2.0 };
            } else {
                *c = Complex::new(0.0, 0.0);
            }
        }
        let spectrum = cross.clone();
        cross[0].im = 0.0;
        cross[last].im = 0.0;
        let mut values = inv.make_output_vec();
        inv.process(&mut cross, &mut values).expect("sizes from plan");
        let scale = 1.0 / n as f64;
        values.iter_mut().for_each(|v| *v *= scale);
        PhatCorrelation {
            spectrum,
            values,
            n,
            active_fraction: active / n as f64,
        }
    }

    fn at(&self, lag: i64) -> f64 {
        self.values[lag.rem_euclid(self.n as i64) as usize]
    }

    /// Band-limited correlation at a fractional lag.
    fn eval(&self, lag: f64) -> f64 {
        let last = self.spectrum.len() - 1;
        let step = 2.0 * std::f64::consts::PI * lag / self.n as f64;
        let mut acc = self.spectrum[0].re;
        for (k, c) in self.spectrum.iter().enumerate().take(last).skip(1) {
            let (s, co) = (step * k as f64).sin_cos();
            acc += 2.0 * (c.re * co - c.im * s);
        }
        acc += self.spectrum[last].re * (step * last as f64).cos();
        acc / self.n as f64
    }
}

/// Delay of `b` relative to `a` from the PHAT-weighted cross-correlation,
/// searched within `±max_delay` seconds.
pub fn gcc_phat(
    a: &AudioSignal,
    b: &AudioSignal,
    max_delay: f64,
    interpolation: Interpolation,
) -> Result<TdoaEstimate> {
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: a.sample_rate(),
            right: b.sample_rate(),
        });
    }
    let fs = a.sample_rate() as f64;
    let xa = a.expect_mono("gcc-phat input")?;
    let xb = b.expect_mono("gcc-phat input")?;
    gcc_phat_samples(xa, xb, fs, max_delay, interpolation)
}

pub(crate) fn gcc_phat_samples(
    xa: &[f64],
    xb: &[f64],
    fs: f64,
    max_delay: f64,
    interpolation: Interpolation,
) -> Result<TdoaEstimate> {
    if energy(xa) == 0.0 || energy(xb) == 0.0 {
        return Err(Error::NoSignal("gcc-phat input is silent"));
    }
    let shorter = xa.len().min(xb.len());
    if !(max_delay >= 0.0) || max_delay * fs >= shorter as f64 / 2.0 {
        return Err(Error::validation(
            "max delay",
            format!("{max_delay} s must be non-negative and under half the signal length"),
        ));
    }
    let corr = PhatCorrelation::new(xa, xb);
    let bound = (max_delay * fs).floor() as i64;
    let mut best = 0i64;
    for lag in -bound..=bound {
        if corr.at(lag) > corr.at(best) {
            best = lag;
        }
    }
    let peak = corr.at(best);
    let second = (-bound..=bound)
        .filter(|l| (l - best).abs() > 1)
        .map(|l| corr.at(l))
        .fold(0.0, f64::max);

    let mut lag = best as f64;
    if best.abs() < bound {
        match interpolation {
            Interpolation::None => {}
            Interpolation::Parabolic => {
                let (ym, y0, yp) = (corr.at(best - 1), corr.at(best), corr.at(best + 1));
                let denom = ym - 2.0 * y0 + yp;
                if denom < 0.0 {
                    lag += 0.5 * (ym - yp) / denom;
                }
            }
            Interpolation::Sinc => lag = golden_max(|t| corr.eval(t), lag - 1.0, lag + 1.0),
        }
    }
    let peak_value = if corr.active_fraction > 0.0 {
        (peak / corr.active_fraction).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(TdoaEstimate {
        delay: lag / fs,
        delay_samples: lag,
        peak_value,
        confidence: if second > 0.0 { peak / second } else { f64::INFINITY },
    })
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-6 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMethod {
    /// Delays rounded to whole samples.
    #[default]
    Integer,
    /// Windowed-sinc fractional shifts.
    Sinc,
}

fn shifted_average(
    channels: &AudioSignal,
    shifts: &[f64],
    out_len: usize,
    method: ShiftMethod,
) -> Result<AudioSignal> {
    let mut out = vec![0.0; out_len];
    let weight = 1.0 / channels.num_channels() as f64;
    for (x, &s) in channels.channels().iter().zip(shifts) {
        let s = match method {
            ShiftMethod::Integer => s.round(),
            ShiftMethod::Sinc => s,
        };
        let shifted = shift_signal(x, s, out_len, SHIFT_HALF_WIDTH);
        for (o, v) in out.iter_mut().zip(&shifted) {
            *o += weight * v;
        }
    }
    AudioSignal::mono(channels.sample_rate(), out)
}

/// Advances every channel by its arrival delay (seconds) and averages.
/// Channels are aligned to the most-delayed one, so the output is longer
/// than the input by the delay spread.
pub fn delay_and_sum(channels: &AudioSignal, delays: &[f64], method: ShiftMethod) -> Result<AudioSignal> {
    if delays.len() != channels.num_channels() {
        return Err(Error::validation(
            "delays",
            format!("{} delays for {} channels", delays.len(), channels.num_channels()),
        ));
    }
    if channels.is_empty() {
        return Err(Error::validation("channels", "empty signal"));
    }
    let fs = channels.sample_rate() as f64;
    let limit = channels.duration();
    if let Some(d) = delays.iter().find(|d| !d.is_finite() || d.abs() >= limit) {
        return Err(Error::validation(
            "delays",
            format!("delay {d} s is not bounded by the signal duration {limit} s"),
        ));
    }
    let latest = delays.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let earliest = delays.iter().copied().fold(f64::INFINITY, f64::min);
    let shifts: Vec<f64> = delays.iter().map(|d| (latest - d) * fs).collect();
    let spread = match method {
        ShiftMethod::Integer => shifts.iter().map(|s| s.round()).fold(0.0, f64::max) as usize,
        ShiftMethod::Sinc => ((latest - earliest) * fs).ceil() as usize,
    };
    shifted_average(channels, &shifts, channels.len() + spread, method)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringOptions {
    pub reference: usize,
    pub max_delay: f64,
    pub interpolation: Interpolation,
    pub shift: ShiftMethod,
}

impl Default for SteeringOptions {
    fn default() -> Self {
        SteeringOptions {
            reference: 0,
            max_delay: DEFAULT_MAX_DELAY,
            interpolation: Interpolation::None,
            shift: ShiftMethod::Integer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringReport {
    pub reference: usize,
    /// One estimate per channel relative to the reference; the reference's
    /// own entry is `None`.
    pub estimates: Vec<Option<TdoaEstimate>>,
    /// Channels whose estimate fell below [`CONFIDENCE_THRESHOLD`].
    pub low_confidence: Vec<usize>,
}

/// Estimates each channel's delay against the reference with GCC-PHAT and
/// delay-and-sums on the reference channel's timeline.
pub fn steer_and_sum(channels: &AudioSignal, reference: usize) -> Result<AudioSignal> {
    let opts = SteeringOptions {
        reference,
        ..SteeringOptions::default()
    };
    steer_and_sum_with(channels, &opts).map(|(s, _)| s)
}

pub fn steer_and_sum_with(
    channels: &AudioSignal,
    opts: &SteeringOptions,
) -> Result<(AudioSignal, SteeringReport)> {
    if channels.num_channels() < 2 {
        return Err(Error::validation("channels", "steering needs at least two channels"));
    }
    if opts.reference >= channels.num_channels() {
        return Err(Error::validation(
            "reference channel",
            format!("{} out of range for {} channels", opts.reference, channels.num_channels()),
        ));
    }
    let fs = channels.sample_rate() as f64;
    let reference = channels.channel(opts.reference);
    let mut estimates = Vec::with_capacity(channels.num_channels());
    let mut shifts = Vec::with_capacity(channels.num_channels());
    let mut low_confidence = Vec::new();
    for (i, x) in channels.channels().iter().enumerate() {
        if i == opts.reference {
            estimates.push(None);
            shifts.push(0.0);
            continue;
        }
        let est = gcc_phat_samples(reference, x, fs, opts.max_delay, opts.interpolation)?;
        if est.confidence < CONFIDENCE_THRESHOLD {
            low_confidence.push(i);
        }
        shifts.push(-est.delay_samples);
        estimates.push(Some(est));
    }
    let out = shifted_average(channels, &shifts, channels.len(), opts.shift)?;
    Ok((
        out,
        SteeringReport {
            reference: opts.reference,
            estimates,
            low_confidence,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub channel: String,
    pub score: f64,
}

/// Channel with the lowest score; ties go to the lexicographically first id.
pub fn oracle_select(scores: &BTreeMap<String, f64>) -> Result<Selection> {
    if let Some((ch, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::validation("score", format!("channel {ch} has non-finite score {s}")));
    }
    // BTreeMap iterates in id order and `<` keeps the first of equal scores
    let mut best: Option<(&String, f64)> = None;
    for (ch, &s) in scores {
        if best.map_or(true, |(_, b)| s < b) {
            best = Some((ch, s));
        }
    }
    best.map(|(ch, s)| Selection {
        channel: ch.clone(),
        score: s,
    })
    .ok_or(Error::validation("scores", "empty score table"))
}

/// Groups `(utterance, channel, score)` rows and selects per utterance.
pub fn oracle_select_table<'a, I>(rows: I) -> Result<BTreeMap<String, Selection>>
where
    I: IntoIterator<Item = (&'a str, &'a str, f64)>,
{
    let mut grouped: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (utt, ch, score) in rows {
        if grouped
            .entry(utt.to_string())
            .or_default()
            .insert(ch.to_string(), score)
            .is_some()
        {
            return Err(Error::validation(
                "scores",
                format!("duplicate entry for utterance {utt}, channel {ch}"),
            ));
        }
    }
    grouped
        .into_iter()
        .map(|(utt, table)| oracle_select(&table).map(|s| (utt, s)))
        .collect()
}
