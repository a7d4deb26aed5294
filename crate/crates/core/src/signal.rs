use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample rates accepted at pipeline I/O boundaries.
pub const PIPELINE_SAMPLE_RATES: [u32; 2] = [16_000, 48_000];

/// Planar multichannel audio. Every channel has the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    sample_rate: u32,
    channels: Vec<Vec<f64>>,
}

impl AudioSignal {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::validation("signal", "sample rate must be positive"));
        }
        if channels.is_empty() {
            return Err(Error::validation("signal", "at least one channel required"));
        }
        let len = channels[0].len();
        if let Some(i) = channels.iter().position(|c| c.len() != len) {
            return Err(Error::validation(
                "signal",
                format!(
                    "channel {i} has {} samples, channel 0 has {len}",
                    channels[i].len()
                ),
            ));
        }
        Ok(AudioSignal {
            sample_rate,
            channels,
        })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![samples])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// The single channel of a mono signal.
    pub fn expect_mono(&self, what: &'static str) -> Result<&[f64]> {
        if self.channels.len() != 1 {
            return Err(Error::validation(
                what,
                format!("expected mono audio, got {} channels", self.channels.len()),
            ));
        }
        Ok(&self.channels[0])
    }

    pub fn require_pipeline_rate(&self) -> Result<()> {
        if PIPELINE_SAMPLE_RATES.contains(&self.sample_rate) {
            Ok(())
        } else {
            Err(Error::validation(
                "signal",
                format!(
                    "sample rate {} Hz not supported for pipeline I/O (use 16000 or 48000)",
                    self.sample_rate
                ),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Measured,
    ImageMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    sample_rate: u32,
    samples: Vec<f64>,
    provenance: Provenance,
    direct_path_index: Option<usize>,
}

impl ImpulseResponse {
    pub fn new(sample_rate: u32, samples: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::validation("impulse response", "sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::validation("impulse response", "empty"));
        }
        let energy = energy(&samples);
        if !(energy.is_finite() && energy > 0.0) {
            return Err(Error::validation(
                "impulse response",
                format!("energy must be finite and nonzero, got {energy}"),
            ));
        }
        Ok(ImpulseResponse {
            sample_rate,
            samples,
            provenance,
            direct_path_index: None,
        })
    }

    pub fn with_direct_path(mut self, index: usize) -> Result<Self> {
        if index >= self.samples.len() {
            return Err(Error::validation(
                "impulse response",
                format!("direct path index {index} beyond length {}", self.samples.len()),
            ));
        }
        self.direct_path_index = Some(index);
        Ok(self)
    }

    /// Unit impulse of the given length.
    pub fn delta(sample_rate: u32, len: usize, delay: usize) -> Result<Self> {
        let mut samples = vec![0.0; len.max(delay + 1)];
        samples[delay] = 1.0;
        Self::new(sample_rate, samples, Provenance::Measured)?.with_direct_path(delay)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn direct_path_index(&self) -> Option<usize> {
        self.direct_path_index
    }

    /// Stored direct-path index, or the position of the largest magnitude.
    pub fn direct_path_or_peak(&self) -> usize {
        self.direct_path_index.unwrap_or_else(|| peak_index(&self.samples))
    }

    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }
}

pub(crate) fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (energy(x) / x.len() as f64).sqrt()
}

/// Index of the first sample with the largest magnitude.
pub(crate) fn peak_index(x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > best_val {
            best_val = v.abs();
            best = i;
        }
    }
    best
}

pub(crate) fn db10(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}
