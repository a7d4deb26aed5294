//! Room, source and microphone descriptions shared by every other module,
//! plus the geometry used to evaluate source directivity.
//!
//! Conventions: positions are in meters in a right-handed frame whose origin
//! is a room corner, so the room occupies `[0, Lx] x [0, Ly] x [0, Lz]`.
//! Source orientation is given as azimuth (radians, in the x-y plane measured
//! from +x towards +y) and elevation (radians above the horizontal plane).

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Sanity bounds for the speed of sound in air, m/s.
pub const SPEED_OF_SOUND_RANGE: (f64, f64) = (300.0, 360.0);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Wall absorption description: explicit reflection coefficients or a
/// reverberation time from which a uniform coefficient is derived.
///
/// Per-wall coefficients are ordered `[x=0, x=Lx, y=0, y=Ly, z=0, z=Lz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallReflectivity {
    Coefficients([f64; 6]),
    T60(f64),
}

/// Shoebox room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRoom")]
pub struct RoomSpec {
    dimensions: Vec3,
    reflectivity: WallReflectivity,
    speed_of_sound: f64,
}

#[derive(Deserialize)]
struct RawRoom {
    dimensions: Vec3,
    reflectivity: WallReflectivity,
    #[serde(default = "default_speed_of_sound")]
    speed_of_sound: f64,
}

fn default_speed_of_sound() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

impl TryFrom<RawRoom> for RoomSpec {
    type Error = Error;
    fn try_from(raw: RawRoom) -> Result<Self> {
        RoomSpec::with_speed_of_sound(raw.dimensions, raw.reflectivity, raw.speed_of_sound)
    }
}

impl RoomSpec {
    pub fn new(dimensions: Vec3, reflectivity: WallReflectivity) -> Result<Self> {
        Self::with_speed_of_sound(dimensions, reflectivity, DEFAULT_SPEED_OF_SOUND)
    }

    pub fn with_speed_of_sound(
        dimensions: Vec3,
        reflectivity: WallReflectivity,
        speed_of_sound: f64,
    ) -> Result<Self> {
        let d = dimensions;
        if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0) || !d.is_finite() {
            return Err(Error::validation(
                "room",
                format!("dimensions must be finite and strictly positive, got {:?}", d.to_array()),
            ));
        }
        match reflectivity {
            WallReflectivity::Coefficients(betas) => {
                if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
                    return Err(Error::validation(
                        "room",
                        format!("reflection coefficient {b} outside [0, 1]"),
                    ));
                }
            }
            WallReflectivity::T60(t60) => {
                if !(t60 > 0.0 && t60.is_finite()) {
                    return Err(Error::validation(
                        "room",
                        format!("target T60 must be strictly positive, got {t60}"),
                    ));
                }
            }
        }
        let (lo, hi) = SPEED_OF_SOUND_RANGE;
        if !(lo..=hi).contains(&speed_of_sound) {
            return Err(Error::validation(
                "room",
                format!("speed of sound {speed_of_sound} m/s outside [{lo}, {hi}]"),
            ));
        }
        Ok(RoomSpec {
            dimensions,
            reflectivity,
            speed_of_sound,
        })
    }

    pub fn dimensions(&self) -> Vec3 {
        self.dimensions
    }

    pub fn reflectivity(&self) -> WallReflectivity {
        self.reflectivity
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn volume(&self) -> f64 {
        let d = self.dimensions;
        d.x * d.y * d.z
    }

    pub fn surface_area(&self) -> f64 {
        let d = self.dimensions;
        2.0 * (d.x * d.y + d.x * d.z + d.y * d.z)
    }

    /// True when `p` lies strictly inside the room.
    pub fn contains(&self, p: Vec3) -> bool {
        let d = self.dimensions;
        p.is_finite() && p.x > 0.0 && p.y > 0.0 && p.z > 0.0 && p.x < d.x && p.y < d.y && p.z < d.z
    }

    pub(crate) fn check_inside(&self, what: &'static str, p: Vec3) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::validation(
                what,
                format!(
                    "position {:?} is not strictly inside room {:?}",
                    p.to_array(),
                    self.dimensions.to_array()
                ),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Orientation {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Orientation {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Orientation { azimuth, elevation }
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Orientation::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    /// Boresight unit vector.
    pub fn unit_vector(self) -> Vec3 {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        Vec3::new(ce * ca, ce * sa, se)
    }
}

/// Frequency-independent radiation pattern of a source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum Directivity {
    Omnidirectional,
    Cardioid,
    Subcardioid,
    Hypercardioid,
    /// Piecewise-linear gain over angle. Entries are `(angle_rad, gain)`
    /// with strictly increasing angles in `[0, pi]` and gains in `[0, 1]`.
    Custom { table: Vec<(f64, f64)> },
}

impl Directivity {
    /// Omni weight `a` of the first-order pattern `a + (1 - a) cos(angle)`.
    pub fn first_order_weight(&self) -> Option<f64> {
        match self {
            Directivity::Omnidirectional => Some(1.0),
            Directivity::Cardioid => Some(0.5),
            Directivity::Subcardioid => Some(0.7),
            Directivity::Hypercardioid => Some(0.25),
            Directivity::Custom { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Directivity::Custom { table } = self else {
            return Ok(());
        };
        if table.is_empty() {
            return Err(Error::validation("directivity", "custom table is empty"));
        }
        for (i, &(angle, gain)) in table.iter().enumerate() {
            if !(0.0..=PI).contains(&angle) {
                return Err(Error::validation(
                    "directivity",
                    format!("table angle {angle} at entry {i} outside [0, pi]"),
                ));
            }
            if !(0.0..=1.0).contains(&gain) {
                return Err(Error::validation(
                    "directivity",
                    format!("table gain {gain} at entry {i} outside [0, 1]"),
                ));
            }
            if i > 0 && angle <= table[i - 1].0 {
                return Err(Error::validation(
                    "directivity",
                    format!("table angles not strictly increasing at entry {i}"),
                ));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Directivity::Omnidirectional => "omnidirectional",
            Directivity::Cardioid => "cardioid",
            Directivity::Subcardioid => "subcardioid",
            Directivity::Hypercardioid => "hypercardioid",
            Directivity::Custom { .. } => "custom",
        }
    }
}

impl std::str::FromStr for Directivity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "omni" | "omnidirectional" => Ok(Directivity::Omnidirectional),
            "cardioid" => Ok(Directivity::Cardioid),
            "subcardioid" => Ok(Directivity::Subcardioid),
            "hypercardioid" => Ok(Directivity::Hypercardioid),
            other => Err(Error::validation(
                "directivity",
                format!("unknown pattern {other:?}"),
            )),
        }
    }
}

/// Radiation gain of `pattern` at `angle` radians off boresight.
///
/// Custom tables are interpolated linearly and held constant beyond their
/// first and last entries.
pub fn directivity_gain(pattern: &Directivity, angle: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&angle) {
        return Err(Error::validation(
            "angle",
            format!("{angle} rad outside [0, pi]"),
        ));
    }
    match pattern {
        Directivity::Omnidirectional => Ok(1.0),
        Directivity::Custom { table } => {
            pattern.validate()?;
            Ok(interpolate_table(table, angle))
        }
        _ => {
            let a = pattern.first_order_weight().unwrap_or(1.0);
            Ok((a + (1.0 - a) * angle.cos()).max(0.0))
        }
    }
}

fn interpolate_table(table: &[(f64, f64)], angle: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if angle <= first.0 {
        return first.1;
    }
    if angle >= last.0 {
        return last.1;
    }
    let upper = table.partition_point(|&(a, _)| a <= angle);
    let (a0, g0) = table[upper - 1];
    let (a1, g1) = table[upper];
    g0 + (g1 - g0) * (angle - a0) / (a1 - a0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub position: Vec3,
    pub orientation: Orientation,
    pub directivity: Directivity,
}

impl SourceSpec {
    pub fn new(position: Vec3, orientation: Orientation, directivity: Directivity) -> Result<Self> {
        directivity.validate()?;
        if !position.is_finite() {
            return Err(Error::validation("source", "position is not finite"));
        }
        Ok(SourceSpec {
            position,
            orientation,
            directivity,
        })
    }

    pub fn omni(position: Vec3) -> Self {
        SourceSpec {
            position,
            orientation: Orientation::default(),
            directivity: Directivity::Omnidirectional,
        }
    }
}

/// Angle in `[0, pi]` between the source boresight and the ray from the
/// source to `receiver`.
pub fn angle_between(source: &SourceSpec, receiver: Vec3) -> Result<f64> {
    angle_from(source.orientation.unit_vector(), receiver - source.position)
}

/// Angle between a boresight vector and a ray, both arbitrary length.
pub(crate) fn angle_from(boresight: Vec3, ray: Vec3) -> Result<f64> {
    let len = ray.norm();
    if !(len > 0.0) {
        return Err(Error::validation(
            "geometry",
            "receiver coincides with the source",
        ));
    }
    let cos = boresight.dot(ray) / (boresight.norm() * len);
    Ok(cos.clamp(-1.0, 1.0).acos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicSpec {
    pub id: String,
    pub position: Vec3,
}

impl MicSpec {
    pub fn new(id: impl Into<String>, position: Vec3) -> Self {
        MicSpec {
            id: id.into(),
            position,
        }
    }
}

/// Checks that ids are unique and every mic sits strictly inside `room`.
pub fn validate_array(room: &RoomSpec, mics: &[MicSpec]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for mic in mics {
        if !seen.insert(mic.id.as_str()) {
            return Err(Error::validation(
                "microphone array",
                format!("duplicate microphone id {:?}", mic.id),
            ));
        }
        room.check_inside("microphone", mic.position)?;
    }
    Ok(())
}
