//! WAV reading and writing, and impulse response files with JSON sidecars.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{AudioSignal, ImpulseResponse, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    #[default]
    Pcm16,
    Pcm24,
    Float32,
}

impl std::str::FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(SampleFormat::Pcm16),
            "pcm24" => Ok(SampleFormat::Pcm24),
            "float32" => Ok(SampleFormat::Float32),
            _ => Err(Error::validation("sample format", format!("unknown format {s:?}"))),
        }
    }
}

fn wav_err(path: &Path) -> impl FnOnce(hound::Error) -> Error + '_ {
    move |source| match source {
        hound::Error::IoError(e) => Error::io(path, e),
        source => Error::Wav {
            path: path.to_path_buf(),
            source,
        },
    }
}

/// Reads integer PCM (8 to 32 bit) or 32-bit float WAV into `[-1, 1)` samples.
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let reader = hound::WavReader::open(path).map_err(wav_err(path))?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err(path))?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err(path))?
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch.max(1)); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (ch, v) in channels.iter_mut().zip(frame) {
            ch.push(*v);
        }
    }
    AudioSignal::new(spec.sample_rate, channels)
}

/// Writes `signal` in the given format. Integer formats round to nearest
/// and saturate at full scale.
pub fn write_wav(path: &Path, signal: &AudioSignal, format: SampleFormat) -> Result<()> {
    let (bits, sample_format) = match format {
        SampleFormat::Pcm16 => (16, hound::SampleFormat::Int),
        SampleFormat::Pcm24 => (24, hound::SampleFormat::Int),
        SampleFormat::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: signal.num_channels() as u16,
        sample_rate: signal.sample_rate(),
        bits_per_sample: bits,
        sample_format,
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = hound::WavWriter::new(BufWriter::new(file), spec).map_err(wav_err(path))?;
    let full = (1i64 << (bits - 1)) as f64;
    for i in 0..signal.len() {
        for ch in signal.channels() {
            let v = ch[i];
            match format {
                SampleFormat::Float32 => writer.write_sample(v as f32),
                _ => writer.write_sample((v * full).round().clamp(-full, full - 1.0) as i32),
            }
            .map_err(wav_err(path))?;
        }
    }
    writer.finalize().map_err(wav_err(path))
}

/// Sidecar stored next to an impulse response WAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrMetadata {
    pub provenance: Provenance,
    pub sample_rate: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_path_index: Option<usize>,
    /// Free-form description of how the IR was obtained.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

pub fn sidecar_path(wav: &Path) -> PathBuf {
    wav.with_extension("json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a 32-bit float WAV plus its JSON sidecar.
pub fn write_ir(path: &Path, ir: &ImpulseResponse, details: serde_json::Value) -> Result<()> {
    let signal = AudioSignal::mono(ir.sample_rate(), ir.samples().to_vec())?;
    write_wav(path, &signal, SampleFormat::Float32)?;
    let meta = IrMetadata {
        provenance: ir.provenance(),
        sample_rate: ir.sample_rate(),
        direct_path_index: ir.direct_path_index(),
        details,
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a mono IR. Without a sidecar the IR is taken as measured.
pub fn read_ir(path: &Path) -> Result<ImpulseResponse> {
    let signal = read_wav(path)?;
    let samples = signal.expect_mono("impulse response file")?.to_vec();
    let side = sidecar_path(path);
    let meta: Option<IrMetadata> = if side.exists() { Some(read_json(&side)?) } else { None };
    let provenance = meta.as_ref().map_or(Provenance::Measured, |m| m.provenance);
    let ir = ImpulseResponse::new(signal.sample_rate(), samples, provenance)?;
    match meta.and_then(|m| m.direct_path_index) {
        Some(d) => ir.with_direct_path(d),
        None => Ok(ir),
    }
}
