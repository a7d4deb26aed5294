//! C ABI over `forge-core`.
//!
//! Signals and impulse responses cross the boundary as opaque handles that
//! the caller releases with the matching `*_free` function. Every fallible
//! call returns a [`ForgeStatus`]; on failure `forge_last_error` holds a
//! message for the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use forge_core::array::{gcc_phat, Interpolation};
use forge_core::contaminate::{convolve, mix_noise};
use forge_core::ess::{deconvolve_ir, generate_ess, inverse_filter, SweepSpec};
use forge_core::metrics::{direct_to_reverberant_db, estimate_t60, T60Method};
use forge_core::rir::{reflectivity_from_t60, synthesize_rir, FractionalDelay, ImageSynthesisConfig, MaxOrder};
use forge_core::{
    AudioSignal, Directivity, Error, ImpulseResponse, MicSpec, Orientation, Provenance, RoomSpec, SourceSpec, Vec3,
    WallReflectivity,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForgeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SampleRateMismatch = 3,
    UnreachableT60 = 4,
    ImageBudget = 5,
    SweepNotFound = 6,
    NoSignal = 7,
    InsufficientDecay = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&Error> for ForgeStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Validation { .. } | Error::Manifest(_) => ForgeStatus::InvalidArgument,
            Error::SampleRateMismatch { .. } => ForgeStatus::SampleRateMismatch,
            Error::UnreachableT60 { .. } => ForgeStatus::UnreachableT60,
            Error::ImageBudget { .. } => ForgeStatus::ImageBudget,
            Error::SweepNotFound { .. } => ForgeStatus::SweepNotFound,
            Error::NoSignal(_) => ForgeStatus::NoSignal,
            Error::InsufficientDecay { .. } => ForgeStatus::InsufficientDecay,
            Error::Io { .. } | Error::Wav { .. } | Error::Json { .. } | Error::Csv(_) => ForgeStatus::Io,
            Error::Shared(inner) => ForgeStatus::from(&**inner),
        }
    }
}

/// Opaque multichannel signal.
pub struct ForgeSignal(AudioSignal);

/// Opaque impulse response.
pub struct ForgeIr(ImpulseResponse);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForgeDirectivity {
    Omnidirectional = 0,
    Cardioid = 1,
    Subcardioid = 2,
    Hypercardioid = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForgeInterpolation {
    None = 0,
    Parabolic = 1,
    Sinc = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForgeT60Method {
    T20 = 0,
    T30 = 1,
}

/// Image-method synthesis parameters. Lengths in metres, angles in degrees.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ForgeRirParams {
    pub room_dimensions: [f64; 3],
    /// Per-wall pressure reflection coefficients, ordered
    /// `x=0, x=Lx, y=0, y=Ly, z=0, z=Lz`. Ignored when `t60 > 0`.
    pub wall_reflectivity: [f64; 6],
    /// Target reverberation time in seconds; `<= 0` selects `wall_reflectivity`.
    pub t60: f64,
    pub source_position: [f64; 3],
    pub source_azimuth_deg: f64,
    pub source_elevation_deg: f64,
    pub source_directivity: ForgeDirectivity,
    pub mic_position: [f64; 3],
    pub sample_rate: u32,
    /// Seconds.
    pub ir_length: f64,
    /// Reflection order limit; negative means every image inside the IR.
    pub max_order: i32,
    /// Band-limited fractional-delay placement instead of nearest sample.
    pub sinc: bool,
    /// Post-synthesis high-pass cutoff; 0 disables it.
    pub highpass_hz: f64,
}

/// Exponential sine sweep parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ForgeSweepParams {
    pub f_start: f64,
    pub f_end: f64,
    pub duration: f64,
    pub amplitude: f64,
    pub fade_in: f64,
    pub fade_out: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ForgeTdoa {
    /// Seconds; positive when `b` lags `a`.
    pub delay: f64,
    pub delay_samples: f64,
    pub peak_value: f64,
    pub confidence: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn forge_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

struct Failure(ForgeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(ForgeStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ForgeStatus::NullPointer, format!("{what} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ForgeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ForgeStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            ForgeStatus::Panic
        }
    }
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(src: &[f64], out: *mut f64, capacity: usize) -> Result<(), Failure> {
    if capacity < src.len() {
        return Err(Failure(
            ForgeStatus::BufferTooSmall,
            format!("buffer holds {capacity} samples, need {}", src.len()),
        ));
    }
    if !src.is_empty() {
        if out.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

/// Builds a signal from `num_channels * num_frames` interleaved samples.
#[no_mangle]
pub unsafe extern "C" fn forge_signal_new(
    sample_rate: u32,
    num_channels: usize,
    num_frames: usize,
    interleaved: *const f64,
    out: *mut *mut ForgeSignal,
) -> ForgeStatus {
    guard(|| {
        let total = num_channels
            .checked_mul(num_frames)
            .ok_or_else(|| Failure(ForgeStatus::InvalidArgument, "signal size overflows".into()))?;
        let data = slice(interleaved, total, "samples")?;
        let channels = (0..num_channels)
            .map(|c| (0..num_frames).map(|i| data[i * num_channels + c]).collect())
            .collect();
        emit(out, ForgeSignal(AudioSignal::new(sample_rate, channels)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn forge_signal_free(signal: *mut ForgeSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// Sample rate in Hz, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn forge_signal_sample_rate(signal: *const ForgeSignal) -> u32 {
    signal.as_ref().map_or(0, |s| s.0.sample_rate())
}

#[no_mangle]
pub unsafe extern "C" fn forge_signal_num_channels(signal: *const ForgeSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.num_channels())
}

/// Frames per channel.
#[no_mangle]
pub unsafe extern "C" fn forge_signal_len(signal: *const ForgeSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.len())
}

/// Copies one channel into `out`, which must hold `forge_signal_len` samples.
#[no_mangle]
pub unsafe extern "C" fn forge_signal_copy_channel(
    signal: *const ForgeSignal,
    channel: usize,
    out: *mut f64,
    capacity: usize,
) -> ForgeStatus {
    guard(|| {
        let s = &reference(signal, "signal")?.0;
        if channel >= s.num_channels() {
            return Err(Failure(
                ForgeStatus::InvalidArgument,
                format!("channel {channel} of {}", s.num_channels()),
            ));
        }
        copy_out(s.channel(channel), out, capacity)
    })
}

/// Wraps measured samples as an impulse response.
#[no_mangle]
pub unsafe extern "C" fn forge_ir_new(
    sample_rate: u32,
    samples: *const f64,
    len: usize,
    out: *mut *mut ForgeIr,
) -> ForgeStatus {
    guard(|| {
        let h = slice(samples, len, "samples")?.to_vec();
        emit(out, ForgeIr(ImpulseResponse::new(sample_rate, h, Provenance::Measured)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn forge_ir_free(ir: *mut ForgeIr) {
    if !ir.is_null() {
        drop(Box::from_raw(ir));
    }
}

#[no_mangle]
pub unsafe extern "C" fn forge_ir_sample_rate(ir: *const ForgeIr) -> u32 {
    ir.as_ref().map_or(0, |h| h.0.sample_rate())
}

#[no_mangle]
pub unsafe extern "C" fn forge_ir_len(ir: *const ForgeIr) -> usize {
    ir.as_ref().map_or(0, |h| h.0.len())
}

/// Index of the direct-path arrival, or -1 when unknown.
#[no_mangle]
pub unsafe extern "C" fn forge_ir_direct_path_index(ir: *const ForgeIr) -> i64 {
    ir.as_ref()
        .and_then(|h| h.0.direct_path_index())
        .map_or(-1, |i| i as i64)
}

#[no_mangle]
pub unsafe extern "C" fn forge_ir_copy_samples(ir: *const ForgeIr, out: *mut f64, capacity: usize) -> ForgeStatus {
    guard(|| copy_out(reference(ir, "impulse response")?.0.samples(), out, capacity))
}

/// Defaults: a 6 x 4.5 x 2.7 m room with T60 0.5 s, omnidirectional source,
/// 16 kHz, 0.5 s, automatic order, nearest-sample placement.
#[no_mangle]
pub extern "C" fn forge_rir_params_default() -> ForgeRirParams {
    let config = ImageSynthesisConfig::default();
    ForgeRirParams {
        room_dimensions: [6.0, 4.5, 2.7],
        wall_reflectivity: [0.9; 6],
        t60: 0.5,
        source_position: [2.0, 2.0, 1.5],
        source_azimuth_deg: 0.0,
        source_elevation_deg: 0.0,
        source_directivity: ForgeDirectivity::Omnidirectional,
        mic_position: [4.0, 2.5, 1.5],
        sample_rate: config.sample_rate,
        ir_length: config.ir_length,
        max_order: -1,
        sinc: false,
        highpass_hz: config.highpass_hz,
    }
}

fn room_from(p: &ForgeRirParams) -> Result<RoomSpec, Failure> {
    let reflectivity = if p.t60 > 0.0 {
        WallReflectivity::T60(p.t60)
    } else {
        WallReflectivity::Coefficients(p.wall_reflectivity)
    };
    Ok(RoomSpec::new(Vec3::from(p.room_dimensions), reflectivity)?)
}

/// Uniform wall reflection coefficient for a target T60.
#[no_mangle]
pub unsafe extern "C" fn forge_reflectivity_from_t60(
    room_dimensions: *const [f64; 3],
    t60: f64,
    out_beta: *mut f64,
) -> ForgeStatus {
    guard(|| {
        let dims = *reference(room_dimensions, "room dimensions")?;
        let room = RoomSpec::new(Vec3::from(dims), WallReflectivity::T60(t60))?;
        let beta = reflectivity_from_t60(&room, t60)?;
        if out_beta.is_null() {
            return Err(null("output"));
        }
        *out_beta = beta;
        Ok(())
    })
}

/// Synthesizes a room impulse response with the image method.
#[no_mangle]
pub unsafe extern "C" fn forge_rir_synthesize(params: *const ForgeRirParams, out: *mut *mut ForgeIr) -> ForgeStatus {
    guard(|| {
        let p = reference(params, "params")?;
        let room = room_from(p)?;
        let directivity = match p.source_directivity {
            ForgeDirectivity::Omnidirectional => Directivity::Omnidirectional,
            ForgeDirectivity::Cardioid => Directivity::Cardioid,
            ForgeDirectivity::Subcardioid => Directivity::Subcardioid,
            ForgeDirectivity::Hypercardioid => Directivity::Hypercardioid,
        };
        let source = SourceSpec::new(
            Vec3::from(p.source_position),
            Orientation::from_degrees(p.source_azimuth_deg, p.source_elevation_deg),
            directivity,
        )?;
        let mic = MicSpec::new("mic", Vec3::from(p.mic_position));
        let config = ImageSynthesisConfig {
            sample_rate: p.sample_rate,
            max_order: if p.max_order < 0 {
                MaxOrder::Auto
            } else {
                MaxOrder::Fixed(p.max_order as u32)
            },
            ir_length: p.ir_length,
            fractional_delay: if p.sinc {
                FractionalDelay::Sinc
            } else {
                FractionalDelay::NearestSample
            },
            highpass_hz: p.highpass_hz,
            ..ImageSynthesisConfig::default()
        };
        emit(out, ForgeIr(synthesize_rir(&room, &source, &mic, &config)?))
    })
}

/// Convolves every channel of `signal` with `ir`; output length is
/// `len + ir_len - 1`.
#[no_mangle]
pub unsafe extern "C" fn forge_convolve(
    signal: *const ForgeSignal,
    ir: *const ForgeIr,
    out: *mut *mut ForgeSignal,
) -> ForgeStatus {
    guard(|| {
        let y = convolve(&reference(signal, "signal")?.0, &reference(ir, "impulse response")?.0)?;
        emit(out, ForgeSignal(y))
    })
}

/// Adds `noise` to `signal` at `snr_db`, with a seeded random noise offset.
#[no_mangle]
pub unsafe extern "C" fn forge_mix_noise(
    signal: *const ForgeSignal,
    noise: *const ForgeSignal,
    snr_db: f64,
    seed: u64,
    out: *mut *mut ForgeSignal,
) -> ForgeStatus {
    guard(|| {
        let y = mix_noise(&reference(signal, "signal")?.0, &reference(noise, "noise")?.0, snr_db, seed)?;
        emit(out, ForgeSignal(y))
    })
}

/// 20 Hz to 20 kHz over 10 s at amplitude 0.5 with 0.5 s fades.
#[no_mangle]
pub extern "C" fn forge_sweep_params_default() -> ForgeSweepParams {
    let s = SweepSpec::default();
    ForgeSweepParams {
        f_start: s.f_start,
        f_end: s.f_end,
        duration: s.duration,
        amplitude: s.amplitude,
        fade_in: s.fade_in,
        fade_out: s.fade_out,
    }
}

fn sweep_from(p: &ForgeSweepParams) -> SweepSpec {
    SweepSpec {
        f_start: p.f_start,
        f_end: p.f_end,
        duration: p.duration,
        amplitude: p.amplitude,
        fade_in: p.fade_in,
        fade_out: p.fade_out,
    }
}

#[no_mangle]
pub unsafe extern "C" fn forge_ess_generate(
    params: *const ForgeSweepParams,
    sample_rate: u32,
    out: *mut *mut ForgeSignal,
) -> ForgeStatus {
    guard(|| {
        let sweep = generate_ess(&sweep_from(reference(params, "params")?), sample_rate)?;
        emit(out, ForgeSignal(sweep))
    })
}

#[no_mangle]
pub unsafe extern "C" fn forge_ess_inverse_filter(
    params: *const ForgeSweepParams,
    sample_rate: u32,
    out: *mut *mut ForgeSignal,
) -> ForgeStatus {
    guard(|| {
        let inverse = inverse_filter(&sweep_from(reference(params, "params")?), sample_rate)?;
        emit(out, ForgeSignal(inverse))
    })
}

/// Recovers an `ir_length`-second impulse response from a mono sweep
/// recording, normalized to a unit direct path.
#[no_mangle]
pub unsafe extern "C" fn forge_ess_deconvolve(
    recording: *const ForgeSignal,
    params: *const ForgeSweepParams,
    ir_length: f64,
    out: *mut *mut ForgeIr,
) -> ForgeStatus {
    guard(|| {
        let spec = sweep_from(reference(params, "params")?);
        let ir = deconvolve_ir(&reference(recording, "recording")?.0, &spec, ir_length)?;
        emit(out, ForgeIr(ir))
    })
}

/// Delay of `b` relative to `a` by GCC-PHAT, searched within `max_delay` seconds.
#[no_mangle]
pub unsafe extern "C" fn forge_gcc_phat(
    a: *const ForgeSignal,
    b: *const ForgeSignal,
    max_delay: f64,
    interpolation: ForgeInterpolation,
    out: *mut ForgeTdoa,
) -> ForgeStatus {
    guard(|| {
        let interpolation = match interpolation {
            ForgeInterpolation::None => Interpolation::None,
            ForgeInterpolation::Parabolic => Interpolation::Parabolic,
            ForgeInterpolation::Sinc => Interpolation::Sinc,
        };
        let e = gcc_phat(&reference(a, "a")?.0, &reference(b, "b")?.0, max_delay, interpolation)?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = ForgeTdoa {
            delay: e.delay,
            delay_samples: e.delay_samples,
            peak_value: e.peak_value,
            confidence: e.confidence,
        };
        Ok(())
    })
}

/// Reverberation time in seconds from Schroeder backward integration.
#[no_mangle]
pub unsafe extern "C" fn forge_estimate_t60(
    ir: *const ForgeIr,
    method: ForgeT60Method,
    out_seconds: *mut f64,
) -> ForgeStatus {
    guard(|| {
        let method = match method {
            ForgeT60Method::T20 => T60Method::T20,
            ForgeT60Method::T30 => T60Method::T30,
        };
        let t60 = estimate_t60(&reference(ir, "impulse response")?.0, method)?;
        if out_seconds.is_null() {
            return Err(null("output"));
        }
        *out_seconds = t60;
        Ok(())
    })
}

/// Direct-to-reverberant ratio in dB with a direct window of `window_ms`.
#[no_mangle]
pub unsafe extern "C" fn forge_direct_to_reverberant_db(
    ir: *const ForgeIr,
    window_ms: f64,
    out_db: *mut f64,
) -> ForgeStatus {
    guard(|| {
        let drr = direct_to_reverberant_db(&reference(ir, "impulse response")?.0, window_ms)?;
        if out_db.is_null() {
            return Err(null("output"));
        }
        *out_db = drr;
        Ok(())
    })
}
