//! Shoebox room impulse responses by the image-source method, with each
//! image weighted by the source's directivity pattern.
//!
//! Directive images: reflecting the source across a wall also reflects its
//! boresight, so an image that is mirrored an odd number of times along an
//! axis has that component of its orientation vector negated. The gain of an
//! image is then the pattern evaluated at the angle between its mirrored
//! boresight and the image-to-microphone ray. This is one way to formalize a
//! directive image source; it reduces to the classic method for omni sources.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustics::{
    angle_from, directivity_gain, MicSpec, RoomSpec, SourceSpec, Vec3, WallReflectivity,
};
use crate::error::{Error, Result};
use crate::filter::{butterworth_highpass, windowed_sinc};
use crate::signal::{ImpulseResponse, Provenance};

/// Sabine/Eyring constant `24 ln(10) / c` at 343 m/s, in s/m.
pub const EYRING_CONSTANT: f64 = 0.161;

pub const DEFAULT_IMAGE_BUDGET: u64 = 10_000_000;

/// Half-width in samples of the windowed-sinc fractional delay kernel.
pub const SINC_HALF_WIDTH: usize = 32;

/// Number of fixed accumulation groups; keeps parallel summation order
/// independent of the thread count.
const ACCUMULATION_GROUPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxOrder {
    /// Every image whose arrival falls inside the IR.
    Auto,
    Fixed(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionalDelay {
    #[default]
    NearestSample,
    Sinc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageSynthesisConfig {
    pub sample_rate: u32,
    pub max_order: MaxOrder,
    /// Seconds.
    pub ir_length: f64,
    pub fractional_delay: FractionalDelay,
    /// High-pass cutoff applied after synthesis; 0 disables it.
    pub highpass_hz: f64,
    /// Multiply each reflection by `-beta` instead of `beta`.
    pub sign_alternating: bool,
    pub image_budget: u64,
}

impl Default for ImageSynthesisConfig {
    fn default() -> Self {
        ImageSynthesisConfig {
            sample_rate: 16_000,
            max_order: MaxOrder::Auto,
            ir_length: 0.5,
            fractional_delay: FractionalDelay::NearestSample,
            highpass_hz: 0.0,
            sign_alternating: false,
            image_budget: DEFAULT_IMAGE_BUDGET,
        }
    }
}

impl ImageSynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::validation("synthesis config", "sample rate must be positive"));
        }
        if !(self.ir_length > 0.0 && self.ir_length.is_finite()) {
            return Err(Error::validation(
                "synthesis config",
                format!("ir_length must be positive, got {}", self.ir_length),
            ));
        }
        if !(self.highpass_hz >= 0.0 && self.highpass_hz < self.sample_rate as f64 / 2.0) {
            return Err(Error::validation(
                "synthesis config",
                format!("highpass_hz {} must lie in [0, fs/2)", self.highpass_hz),
            ));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        ((self.ir_length * self.sample_rate as f64).round() as usize).max(1)
    }
}

/// Uniform reflection coefficient that gives `room` the reverberation time
/// `t60` under Eyring's formula.
pub fn reflectivity_from_t60(room: &RoomSpec, t60: f64) -> Result<f64> {
    if !(t60 > 0.0) {
        return Err(Error::validation("t60", format!("must be positive, got {t60}")));
    }
    let alpha = 1.0 - (-EYRING_CONSTANT * room.volume() / (room.surface_area() * t60)).exp();
    if !(alpha < 1.0) {
        return Err(Error::UnreachableT60 { t60 });
    }
    Ok((1.0 - alpha).sqrt())
}

/// Reflection coefficients `[x=0, x=Lx, y=0, y=Ly, z=0, z=Lz]`.
pub fn wall_coefficients(room: &RoomSpec) -> Result<[f64; 6]> {
    match room.reflectivity() {
        WallReflectivity::Coefficients(b) => Ok(b),
        WallReflectivity::T60(t60) => Ok([reflectivity_from_t60(room, t60)?; 6]),
    }
}

/// Image coordinate along one axis for image index `i`.
fn image_coord(i: i64, src: f64, len: f64) -> f64 {
    if i.rem_euclid(2) == 0 {
        i as f64 * len + src
    } else {
        (i + 1) as f64 * len - src
    }
}

/// Reflections off the (near, far) wall of an axis for image index `i`.
fn wall_hits(i: i64) -> (i32, i32) {
    let a = i.unsigned_abs() as i32;
    if i >= 0 {
        (a / 2, (a + 1) / 2)
    } else {
        ((a + 1) / 2, a / 2)
    }
}

#[derive(Debug, Clone, Copy)]
struct Image {
    position: Vec3,
    boresight: Vec3,
    gain: f64,
    order: u32,
}

struct ImageLattice {
    src: Vec3,
    dims: Vec3,
    betas: [f64; 6],
    boresight: Vec3,
    sign_alternating: bool,
    max_order: Option<u32>,
    /// Images farther than this from the mic are skipped.
    max_distance: f64,
    mic: Vec3,
    range: [i64; 3],
}

impl ImageLattice {
    fn image(&self, i: i64, j: i64, k: i64) -> Option<Image> {
        let order = (i.unsigned_abs() + j.unsigned_abs() + k.unsigned_abs()) as u32;
        if self.max_order.is_some_and(|m| order > m) {
            return None;
        }
        let position = Vec3::new(
            image_coord(i, self.src.x, self.dims.x),
            image_coord(j, self.src.y, self.dims.y),
            image_coord(k, self.src.z, self.dims.z),
        );
        if position.distance(self.mic) > self.max_distance {
            return None;
        }
        let (x0, x1) = wall_hits(i);
        let (y0, y1) = wall_hits(j);
        let (z0, z1) = wall_hits(k);
        let b = &self.betas;
        let mut gain = b[0].powi(x0)
            * b[1].powi(x1)
            * b[2].powi(y0)
            * b[3].powi(y1)
            * b[4].powi(z0)
            * b[5].powi(z1);
        if self.sign_alternating && order % 2 == 1 {
            gain = -gain;
        }
        let flip = |idx: i64, v: f64| if idx.rem_euclid(2) == 1 { -v } else { v };
        let boresight = Vec3::new(
            flip(i, self.boresight.x),
            flip(j, self.boresight.y),
            flip(k, self.boresight.z),
        );
        Some(Image {
            position,
            boresight,
            gain,
            order,
        })
    }

    fn x_indices(&self) -> std::ops::RangeInclusive<i64> {
        -self.range[0]..=self.range[0]
    }

    fn for_each_in_plane(&self, i: i64, mut f: impl FnMut(Image)) {
        for j in -self.range[1]..=self.range[1] {
            for k in -self.range[2]..=self.range[2] {
                if let Some(img) = self.image(i, j, k) {
                    f(img);
                }
            }
        }
    }
}

/// Summary of one synthesis run, suitable for a metadata sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisInfo {
    pub image_count: u64,
    pub effective_max_order: u32,
    pub wall_coefficients: [f64; 6],
}

/// Synthesizes the impulse response from `source` to `mic` in `room`.
pub fn synthesize_rir(
    room: &RoomSpec,
    source: &SourceSpec,
    mic: &MicSpec,
    config: &ImageSynthesisConfig,
) -> Result<ImpulseResponse> {
    synthesize_rir_with_info(room, source, mic, config).map(|(ir, _)| ir)
}

pub fn synthesize_rir_with_info(
    room: &RoomSpec,
    source: &SourceSpec,
    mic: &MicSpec,
    config: &ImageSynthesisConfig,
) -> Result<(ImpulseResponse, SynthesisInfo)> {
    config.validate()?;
    source.directivity.validate()?;
    room.check_inside("source", source.position)?;
    room.check_inside("microphone", mic.position)?;
    if source.position.distance(mic.position) == 0.0 {
        return Err(Error::validation(
            "geometry",
            "source and microphone positions coincide",
        ));
    }
    let betas = wall_coefficients(room)?;
    let fs = config.sample_rate as f64;
    let c = room.speed_of_sound();
    let n = config.num_samples();
    let guard = match config.fractional_delay {
        FractionalDelay::NearestSample => 0.5,
        FractionalDelay::Sinc => SINC_HALF_WIDTH as f64,
    };
    let max_distance = (n as f64 - 1.0 + guard) * c / fs;
    let dims = room.dimensions();
    let range = {
        let axis = |len: f64| -> i64 {
            let by_distance = (max_distance / len).ceil() as i64 + 1;
            match config.max_order {
                MaxOrder::Auto => by_distance,
                MaxOrder::Fixed(m) => by_distance.min(m as i64),
            }
        };
        [axis(dims.x), axis(dims.y), axis(dims.z)]
    };
    let lattice = ImageLattice {
        src: source.position,
        dims,
        betas,
        boresight: source.orientation.unit_vector(),
        sign_alternating: config.sign_alternating,
        max_order: match config.max_order {
            MaxOrder::Auto => None,
            MaxOrder::Fixed(m) => Some(m),
        },
        max_distance,
        mic: mic.position,
        range,
    };

    // coarse bound first so huge requests fail before any enumeration
    let sphere_estimate = 4.0 / 3.0 * PI * max_distance.powi(3) / room.volume();
    if sphere_estimate > 2.0 * config.image_budget as f64 && config.max_order == MaxOrder::Auto {
        return Err(Error::ImageBudget {
            required: sphere_estimate as u64,
            budget: config.image_budget,
        });
    }
    let (image_count, effective_max_order) = lattice
        .x_indices()
        .into_par_iter()
        .map(|i| {
            let mut count = 0u64;
            let mut order = 0u32;
            lattice.for_each_in_plane(i, |img| {
                count += 1;
                order = order.max(img.order);
            });
            (count, order)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1.max(b.1)));
    if image_count > config.image_budget {
        return Err(Error::ImageBudget {
            required: image_count,
            budget: config.image_budget,
        });
    }

    let xs: Vec<i64> = lattice.x_indices().collect();
    let group_len = xs.len().div_ceil(ACCUMULATION_GROUPS);
    let partials: Vec<Result<Vec<f64>>> = xs
        .par_chunks(group_len)
        .map(|group| {
            let mut acc = vec![0.0; n];
            let mut err = None;
            for &i in group {
                lattice.for_each_in_plane(i, |img| {
                    if err.is_some() || img.gain == 0.0 {
                        return;
                    }
                    match place_image(&mut acc, &img, mic.position, source, c, fs, config) {
                        Ok(()) => {}
                        Err(e) => err = Some(e),
                    }
                });
            }
            match err {
                Some(e) => Err(e),
                None => Ok(acc),
            }
        })
        .collect();
    let mut samples = vec![0.0; n];
    for partial in partials {
        for (dst, v) in samples.iter_mut().zip(partial?) {
            *dst += v;
        }
    }

    if config.highpass_hz > 0.0 {
        butterworth_highpass(&mut samples, config.highpass_hz, config.sample_rate)?;
    }

    let direct_distance = source.position.distance(mic.position);
    let direct = (fs * direct_distance / c).round() as usize;
    let mut ir = ImpulseResponse::new(config.sample_rate, samples, Provenance::ImageMethod)
        .map_err(|_| {
            Error::validation(
                "synthesis",
                "impulse response has no energy (direct path beyond ir_length or fully attenuated)",
            )
        })?;
    if direct < ir.len() {
        ir = ir.with_direct_path(direct)?;
    }
    Ok((
        ir,
        SynthesisInfo {
            image_count,
            effective_max_order,
            wall_coefficients: betas,
        },
    ))
}

fn place_image(
    acc: &mut [f64],
    img: &Image,
    mic: Vec3,
    source: &SourceSpec,
    c: f64,
    fs: f64,
    config: &ImageSynthesisConfig,
) -> Result<()> {
    let ray = mic - img.position;
    let dist = ray.norm();
    let angle = angle_from(img.boresight, ray)?;
    let amp = img.gain * directivity_gain(&source.directivity, angle)? / (4.0 * PI * dist);
    let t = dist / c * fs;
    match config.fractional_delay {
        FractionalDelay::NearestSample => {
            let idx = t.round() as usize;
            if idx < acc.len() {
                acc[idx] += amp;
            }
        }
        FractionalDelay::Sinc => {
            let w = SINC_HALF_WIDTH as f64;
            let lo = (t - w).ceil().max(0.0) as usize;
            let hi = ((t + w).floor() as usize).min(acc.len().saturating_sub(1));
            for (idx, slot) in acc.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *slot += amp * windowed_sinc(idx as f64 - t, w);
            }
        }
    }
    Ok(())
}
