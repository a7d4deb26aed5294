//! Simulated distant-speech corpus generation.
//!
//! Dry close-talking speech is convolved with room impulse responses and
//! mixed with noise, `y = x * h + n`, per microphone. Impulse responses come
//! either from a directivity-aware image-source model ([`rir`]) or from
//! exponential sine sweep measurements ([`ess`]). [`array`] and [`metrics`]
//! provide the beamforming, channel selection and reverberation measures used
//! to validate the generated data.

pub mod acoustics;
pub mod array;
pub mod audio;
pub mod contaminate;
pub mod conv;
pub mod corpus;
pub mod error;
pub mod ess;
pub mod filter;
pub mod manifest;
pub mod metrics;
pub mod rir;
pub mod signal;

pub use acoustics::{
    angle_between, directivity_gain, Directivity, MicSpec, Orientation, RoomSpec, SourceSpec,
    Vec3, WallReflectivity,
};
pub use error::{Error, Result};
pub use signal::{AudioSignal, ImpulseResponse, Provenance};
