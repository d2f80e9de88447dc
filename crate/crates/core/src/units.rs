//! Hz <-> rad/s conversions.

use std::f64::consts::TAU;

/// Angular frequency (rad/s) from an ordinary frequency in Hz.
#[inline]
pub fn hz_to_rad(f_hz: f64) -> f64 {
    TAU * f_hz
}

/// Ordinary frequency in Hz from an angular frequency (rad/s).
#[inline]
pub fn rad_to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// Shorthand for `hz_to_rad(mhz * 1e6)`.
#[inline]
pub fn mhz(mhz: f64) -> f64 {
    hz_to_rad(mhz * 1e6)
}

/// Shorthand for `hz_to_rad(ghz * 1e9)`.
#[inline]
pub fn ghz(ghz: f64) -> f64 {
    hz_to_rad(ghz * 1e9)
}

/// Serde adapter storing an angular frequency as Hz on the wire.
pub mod serde_hz {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(omega: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(super::rad_to_hz(*omega))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d).map(super::hz_to_rad)
    }
}
