//! Contamination of close-talking speech: `y = x * h + n` per channel.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{db10, energy, rms, AudioSignal, ImpulseResponse};

/// Length of the crossfade used when noise has to be looped, seconds.
pub const NOISE_CROSSFADE: f64 = 0.010;

/// Analysis frame and hop for level statistics, seconds.
pub const FRAME_LENGTH: f64 = 0.025;
pub const FRAME_HOP: f64 = 0.010;

/// Magnitude treated as digital full scale (largest 16-bit code).
pub const FULL_SCALE: f64 = 32767.0 / 32768.0;

/// Consecutive full-scale samples that flag clipping.
pub const CLIP_RUN: usize = 3;

/// Reported when the noise floor is digital silence.
pub const MAX_REPORTED_SNR_DB: f64 = 200.0;

/// Peak level used by peak normalization, dBFS.
pub const PEAK_NORMALIZATION_DBFS: f64 = -1.0;

/// Full linear convolution of mono speech with an impulse response.
pub fn convolve(x: &AudioSignal, h: &ImpulseResponse) -> Result<AudioSignal> {
    if x.sample_rate() != h.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: x.sample_rate(),
            right: h.sample_rate(),
        });
    }
    let samples = x.expect_mono("convolution input")?;
    if samples.is_empty() {
        return Err(Error::validation("convolution input", "empty signal"));
    }
    AudioSignal::mono(x.sample_rate(), crate::conv::convolve(samples, h.samples()))
}

/// Which part of the reverberant signal the SNR is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrReference {
    #[default]
    FullUtterance,
    /// Only frames classified as active (see [`validate_clean`]).
    ActiveSpeech,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixOptions {
    pub target_snr_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub reference: SnrReference,
    /// Draw an independent noise offset for every channel.
    #[serde(default)]
    pub per_channel_offsets: bool,
}

impl MixOptions {
    pub fn new(target_snr_db: f64, seed: u64) -> Self {
        MixOptions {
            target_snr_db,
            seed,
            reference: SnrReference::FullUtterance,
            per_channel_offsets: false,
        }
    }
}

/// Gains actually applied to the noise, one per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixReport {
    pub gains: Vec<f64>,
    pub offsets: Vec<usize>,
}

/// Adds `noise` to `y` at `target_snr_db`, starting at a seed-determined
/// noise offset.
pub fn mix_noise(y: &AudioSignal, noise: &AudioSignal, target_snr_db: f64, seed: u64) -> Result<AudioSignal> {
    mix_noise_with(y, noise, &MixOptions::new(target_snr_db, seed)).map(|(s, _)| s)
}

pub fn mix_noise_with(
    y: &AudioSignal,
    noise: &AudioSignal,
    opts: &MixOptions,
) -> Result<(AudioSignal, MixReport)> {
    if y.sample_rate() != noise.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: y.sample_rate(),
            right: noise.sample_rate(),
        });
    }
    if !opts.target_snr_db.is_finite() {
        return Err(Error::validation("target SNR", "must be finite"));
    }
    if noise.num_channels() != 1 && noise.num_channels() != y.num_channels() {
        return Err(Error::validation(
            "noise",
            format!(
                "noise has {} channels; need 1 or {}",
                noise.num_channels(),
                y.num_channels()
            ),
        ));
    }
    if noise.channels().iter().any(|c| energy(c) == 0.0) {
        return Err(Error::NoSignal("noise is silent"));
    }
    let fs = y.sample_rate();
    let len = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shared_offset = noise_offset(&mut rng, noise.len(), len);
    let mut out = Vec::with_capacity(y.num_channels());
    let mut report = MixReport {
        gains: Vec::new(),
        offsets: Vec::new(),
    };
    for (ch, clean) in y.channels().iter().enumerate() {
        let level = reference_rms(clean, fs, opts.reference);
        if !(level > 0.0) {
            return Err(Error::NoSignal("reverberant signal is silent"));
        }
        let source = noise.channel(if noise.num_channels() == 1 { 0 } else { ch });
        let offset = if opts.per_channel_offsets && ch > 0 {
            noise_offset(&mut rng, noise.len(), len)
        } else {
            shared_offset
        };
        let segment = noise_segment(source, len, offset, fs);
        let noise_level = reference_rms(&segment, fs, opts.reference);
        if !(noise_level > 0.0) {
            return Err(Error::NoSignal("noise segment is silent"));
        }
        let gain = level / (noise_level * 10f64.powf(opts.target_snr_db / 20.0));
        out.push(clean.iter().zip(&segment).map(|(s, n)| s + gain * n).collect());
        report.gains.push(gain);
        report.offsets.push(offset);
    }
    Ok((AudioSignal::new(fs, out)?, report))
}

/// Offset into the noise. Noise at least as long as the target is cropped
/// without wrapping; shorter noise is looped.
fn noise_offset(rng: &mut ChaCha8Rng, noise_len: usize, target_len: usize) -> usize {
    if noise_len >= target_len {
        rng.gen_range(0..=noise_len - target_len)
    } else {
        rng.gen_range(0..noise_len)
    }
}

/// `len` samples of `noise` starting at `offset`, looping with an
/// equal-power crossfade at the seam when the noise runs out.
pub fn noise_segment(noise: &[f64], len: usize, offset: usize, sample_rate: u32) -> Vec<f64> {
    if offset + len <= noise.len() {
        return noise[offset..offset + len].to_vec();
    }
    let fade = ((NOISE_CROSSFADE * sample_rate as f64).round() as usize).min(noise.len() / 2);
    let loop_len = noise.len() - fade;
    let mut looped = noise[..loop_len].to_vec();
    for (i, v) in looped.iter_mut().take(fade).enumerate() {
        let theta = FRAC_PI_2 * (i as f64 + 0.5) / fade as f64;
        *v = noise[i] * theta.sin() + noise[loop_len + i] * theta.cos();
    }
    (0..len).map(|i| looped[(offset + i) % loop_len]).collect()
}

fn reference_rms(x: &[f64], sample_rate: u32, reference: SnrReference) -> f64 {
    match reference {
        SnrReference::FullUtterance => rms(x),
        SnrReference::ActiveSpeech => {
            let frames = FrameLevels::new(x, sample_rate);
            frames.active_energy().map_or(0.0, f64::sqrt)
        }
    }
}

/// Mean-square energy of overlapping analysis frames.
struct FrameLevels {
    energies: Vec<f64>,
}

impl FrameLevels {
    fn new(x: &[f64], sample_rate: u32) -> Self {
        let frame = ((FRAME_LENGTH * sample_rate as f64).round() as usize).max(1);
        let hop = ((FRAME_HOP * sample_rate as f64).round() as usize).max(1);
        let energies = if x.len() <= frame {
            vec![energy(x) / x.len().max(1) as f64]
        } else {
            (0..=(x.len() - frame) / hop)
                .map(|k| energy(&x[k * hop..k * hop + frame]) / frame as f64)
                .collect()
        };
        FrameLevels { energies }
    }

    /// Mean energy of the quietest tenth of the frames.
    fn floor(&self) -> f64 {
        let mut sorted = self.energies.clone();
        sorted.sort_by(f64::total_cmp);
        let n = (sorted.len() / 10).max(1);
        sorted[..n].iter().sum::<f64>() / n as f64
    }

    fn max(&self) -> f64 {
        self.energies.iter().copied().fold(0.0, f64::max)
    }

    /// Frames above the midpoint (in dB) between the floor and the loudest
    /// frame count as active.
    fn active_energy(&self) -> Option<f64> {
        let max = self.max();
        if max == 0.0 {
            return None;
        }
        let threshold = (self.floor() * max).sqrt();
        let active: Vec<f64> = self
            .energies
            .iter()
            .copied()
            .filter(|&e| e >= threshold)
            .collect();
        Some(active.iter().sum::<f64>() / active.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// Active-speech energy over noise-floor energy, dB. `None` when the
    /// signal is digitally silent.
    pub estimated_snr_db: Option<f64>,
    pub clipping: bool,
    pub dc_offset: f64,
    pub min_snr_db: f64,
    pub passed: bool,
}

/// Screens a close-talking recording: SNR from frame energies (active
/// frames vs. the quietest decile), full-scale runs, and DC offset.
pub fn validate_clean(x: &AudioSignal, min_snr_db: f64) -> Result<QualityReport> {
    if x.is_empty() {
        return Err(Error::validation("clean signal", "empty"));
    }
    let mut snr: Option<f64> = None;
    let mut first = true;
    let mut clipping = false;
    let mut dc_sum = 0.0;
    for ch in x.channels() {
        let frames = FrameLevels::new(ch, x.sample_rate());
        let ch_snr = frames.active_energy().map(|active| {
            let floor = frames.floor();
            if floor == 0.0 {
                MAX_REPORTED_SNR_DB
            } else {
                db10(active / floor).min(MAX_REPORTED_SNR_DB)
            }
        });
        // the worst channel decides; a silent channel makes the estimate undefined
        snr = match (first, snr, ch_snr) {
            (true, _, s) => s,
            (false, Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        };
        first = false;
        clipping |= has_clip_run(ch);
        dc_sum += ch.iter().sum::<f64>() / ch.len() as f64;
    }
    let dc_offset = dc_sum / x.num_channels() as f64;
    let passed = !clipping && snr.is_some_and(|s| s >= min_snr_db);
    Ok(QualityReport {
        estimated_snr_db: snr,
        clipping,
        dc_offset,
        min_snr_db,
        passed,
    })
}

fn has_clip_run(x: &[f64]) -> bool {
    let mut run = 0;
    for v in x {
        if v.abs() >= FULL_SCALE {
            run += 1;
            if run >= CLIP_RUN {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Joint scaling of all channels so the loudest peak sits at -1 dBFS.
    Peak,
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub signal: Arc<AudioSignal>,
    pub target_snr_db: f64,
    pub reference: SnrReference,
    pub per_channel_offsets: bool,
}

/// One contaminated utterance: a clean signal rendered through one IR per
/// output channel.
#[derive(Debug, Clone)]
pub struct ContaminationJob {
    pub clean: Arc<AudioSignal>,
    pub irs: Vec<Arc<ImpulseResponse>>,
    pub noise: Option<NoiseSpec>,
    pub seed: u64,
    pub normalization: Normalization,
}

#[derive(Debug, Clone)]
pub struct JobOutput {
    pub signal: AudioSignal,
    /// Noise gain per channel, when noise was mixed.
    pub noise_gains: Option<Vec<f64>>,
    /// Joint normalization gain (1 when disabled).
    pub normalization_gain: f64,
}

pub fn run_job(job: &ContaminationJob) -> Result<AudioSignal> {
    run_job_detailed(job).map(|o| o.signal)
}

pub fn run_job_detailed(job: &ContaminationJob) -> Result<JobOutput> {
    if job.irs.is_empty() {
        return Err(Error::validation("job", "at least one impulse response required"));
    }
    let fs = job.clean.sample_rate();
    if let Some(ir) = job.irs.iter().find(|ir| ir.sample_rate() != fs) {
        return Err(Error::SampleRateMismatch {
            left: fs,
            right: ir.sample_rate(),
        });
    }
    let clean = job.clean.expect_mono("clean signal")?;
    if clean.is_empty() {
        return Err(Error::validation("clean signal", "empty"));
    }
    let out_len = clean.len() + job.irs.iter().map(|h| h.len()).max().unwrap_or(1) - 1;
    let channels: Vec<Vec<f64>> = job
        .irs
        .iter()
        .map(|h| {
            let mut y = crate::conv::convolve(clean, h.samples());
            y.resize(out_len, 0.0);
            y
        })
        .collect();
    let reverberant = AudioSignal::new(fs, channels)?;

    let (mut signal, noise_gains) = match &job.noise {
        Some(noise) => {
            let opts = MixOptions {
                target_snr_db: noise.target_snr_db,
                seed: job.seed,
                reference: noise.reference,
                per_channel_offsets: noise.per_channel_offsets,
            };
            let (mixed, report) = mix_noise_with(&reverberant, &noise.signal, &opts)?;
            (mixed, Some(report.gains))
        }
        None => (reverberant, None),
    };

    let mut normalization_gain = 1.0;
    if job.normalization == Normalization::Peak {
        let peak = signal
            .channels()
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            normalization_gain = 10f64.powf(PEAK_NORMALIZATION_DBFS / 20.0) / peak;
            let scaled = signal
                .channels()
                .iter()
                .map(|c| c.iter().map(|v| v * normalization_gain).collect())
                .collect();
            signal = AudioSignal::new(fs, scaled)?;
        }
    }
    Ok(JobOutput {
        signal,
        noise_gains,
        normalization_gain,
    })
}
