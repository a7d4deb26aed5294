//! Energy decay, reverberation time, direct-to-reverberant ratio and
//! impulse response comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{db10, ImpulseResponse};

/// Lowest level a decay curve reports, dB.
pub const DECAY_FLOOR_DB: f64 = -300.0;

/// Reported DRR when the IR has no energy outside the direct window.
pub const MAX_DRR_DB: f64 = 120.0;

pub const DEFAULT_DRR_WINDOW_MS: f64 = 2.5;

/// Lowest level included in the decay-curve distance, dB.
pub const COMPARE_RANGE_DB: f64 = -60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub sample_rate: u32,
    /// Level per sample relative to total energy, dB.
    pub level_db: Vec<f64>,
}

impl DecayCurve {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let fs = self.sample_rate as f64;
        (0..self.level_db.len()).map(move |i| i as f64 / fs)
    }

    /// Lowest level above the floor.
    pub fn min_level_db(&self) -> f64 {
        self.level_db
            .iter()
            .copied()
            .filter(|l| *l > DECAY_FLOOR_DB)
            .fold(0.0, f64::min)
    }
}

/// Schroeder backward integration of `h^2`.
pub fn schroeder_curve(ir: &ImpulseResponse) -> Result<DecayCurve> {
    decay_of(ir.samples(), ir.sample_rate())
}

fn decay_of(h: &[f64], sample_rate: u32) -> Result<DecayCurve> {
    let mut tail = vec![0.0; h.len()];
    let mut acc = 0.0;
    for (slot, v) in tail.iter_mut().zip(h).rev() {
        acc += v * v;
        *slot = acc;
    }
    if !(acc > 0.0) {
        return Err(Error::NoSignal("impulse response has zero energy"));
    }
    let mut level_db = Vec::with_capacity(h.len());
    let mut prev = 0.0f64;
    for (i, e) in tail.iter().enumerate() {
        let l = if i == 0 {
            0.0
        } else if *e > 0.0 {
            db10(e / acc).max(DECAY_FLOOR_DB).min(prev)
        } else {
            DECAY_FLOOR_DB
        };
        level_db.push(l);
        prev = l;
    }
    Ok(DecayCurve {
        sample_rate,
        level_db,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T60Method {
    #[default]
    T20,
    T30,
}

impl T60Method {
    /// Lower end of the fitted segment, dB.
    pub fn fit_end_db(self) -> f64 {
        match self {
            T60Method::T20 => -25.0,
            T60Method::T30 => -35.0,
        }
    }
}

impl std::str::FromStr for T60Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t20" => Ok(T60Method::T20),
            "t30" => Ok(T60Method::T30),
            _ => Err(Error::validation("T60 method", format!("unknown method {s:?}"))),
        }
    }
}

const FIT_START_DB: f64 = -5.0;

/// Decay curve from the direct path onwards with the direct-path sample
/// itself left out.
fn reverberant_decay(ir: &ImpulseResponse) -> Result<DecayCurve> {
    let start = ir.direct_path_or_peak();
    let mut h = ir.samples()[start..].to_vec();
    h[0] = 0.0;
    decay_of(&h, ir.sample_rate())
}

/// Reverberation time from a line fit to the decay curve between -5 dB
/// and -25 dB (T20) or -35 dB (T30), extrapolated to -60 dB.
pub fn estimate_t60(ir: &ImpulseResponse, method: T60Method) -> Result<f64> {
    let curve = reverberant_decay(ir)?;
    let end = method.fit_end_db();
    let reached = curve.min_level_db();
    if reached > end {
        return Err(Error::InsufficientDecay {
            reached_db: reached,
            required_db: end,
        });
    }
    let first = curve.level_db.iter().position(|l| *l <= FIT_START_DB).unwrap_or(0);
    let last = curve.level_db.iter().rposition(|l| *l >= end).unwrap_or(first);
    let fs = curve.sample_rate as f64;
    let points: Vec<(f64, f64)> = (first..=last).map(|i| (i as f64 / fs, curve.level_db[i])).collect();
    if points.len() < 2 {
        return Err(Error::InsufficientDecay {
            reached_db: reached,
            required_db: end,
        });
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_l = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(t, l)| (t - mean_t) * (l - mean_l)).sum();
    let sxx: f64 = points.iter().map(|(t, _)| (t - mean_t).powi(2)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::validation("decay curve", "fitted slope is not negative"));
    }
    Ok(-60.0 / slope)
}

/// Energy within `±window_ms` of the direct path over the remaining energy.
pub fn direct_to_reverberant_db(ir: &ImpulseResponse, window_ms: f64) -> Result<f64> {
    if !(window_ms >= 0.0) {
        return Err(Error::validation("DRR window", format!("{window_ms} ms")));
    }
    let h = ir.samples();
    let d = ir.direct_path_or_peak();
    let w = (window_ms * 1e-3 * ir.sample_rate() as f64).round() as usize;
    let lo = d.saturating_sub(w);
    let hi = (d + w).min(h.len() - 1);
    if lo == 0 && hi == h.len() - 1 {
        return Err(Error::validation("DRR window", "window covers the whole impulse response"));
    }
    let sq = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>();
    let direct = sq(&h[lo..=hi]);
    let rest = sq(&h[..lo]) + sq(&h[hi + 1..]);
    if rest == 0.0 {
        return Ok(MAX_DRR_DB);
    }
    Ok(db10(direct / rest).min(MAX_DRR_DB))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrComparison {
    /// `T60(a) - T60(b)`; `None` when either decay is too short to fit.
    pub t60_delta: Option<f64>,
    /// `DRR(a) - DRR(b)`, dB.
    pub drr_delta_db: f64,
    /// RMS difference of the direct-path-aligned decay curves over the
    /// range where both lie above -60 dB.
    pub decay_distance_db: f64,
    /// Direct-path index of `b` minus that of `a`, samples.
    pub direct_offset_samples: i64,
}

pub fn compare_irs(a: &ImpulseResponse, b: &ImpulseResponse) -> Result<IrComparison> {
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: a.sample_rate(),
            right: b.sample_rate(),
        });
    }
    let t60 = |ir| estimate_t60(ir, T60Method::T20).ok();
    let t60_delta = t60(a).zip(t60(b)).map(|(x, y)| x - y);
    let drr = |ir| direct_to_reverberant_db(ir, DEFAULT_DRR_WINDOW_MS);
    let drr_delta_db = drr(a)? - drr(b)?;

    let da = a.direct_path_or_peak();
    let db = b.direct_path_or_peak();
    let ca = decay_of(&a.samples()[da..], a.sample_rate())?;
    let cb = decay_of(&b.samples()[db..], b.sample_rate())?;
    let diffs: Vec<f64> = ca
        .level_db
        .iter()
        .zip(&cb.level_db)
        .take_while(|(x, y)| **x >= COMPARE_RANGE_DB && **y >= COMPARE_RANGE_DB)
        .map(|(x, y)| x - y)
        .collect();
    let decay_distance_db = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    Ok(IrComparison {
        t60_delta,
        drr_delta_db,
        decay_distance_db,
        direct_offset_samples: db as i64 - da as i64,
    })
}
