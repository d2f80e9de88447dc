//! Circuit quantities to model parameters.
//!
//! * hopping rate `t_ij = 2 Z0 C_ij (omega_r + delta_i)(omega_r + delta_j)`,
//! * port escape rate `kappa = 4 Z0^2 C_out^2 omega_r^3`,
//! * resonator frequency `omega_r = 1 / (2 sqrt((L_m + L_k) C_tot))`.
//!
//! Kinetic inductance enters through a pluggable [`InductanceModel`]; the
//! bundled [`PowerLawInductance`] is a two-parameter fit in the center-pin
//! width.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no inductance model configured")]
    ModelMissing,
}

fn invalid(name: &'static str, reason: impl Into<String>) -> CircuitError {
    CircuitError::InvalidParameter { name, reason: reason.into() }
}

/// Circuit description of one resonator array. SI units throughout; the
/// design frequency is angular (rad/s) in memory and Hz on the wire.
/// Quantities that are not known may be left at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    #[serde(rename = "z0_ohm", default = "default_z0")]
    pub z0: f64,
    #[serde(rename = "omega_r_hz", with = "crate::units::serde_hz", default)]
    pub omega_r: f64,
    #[serde(rename = "c_couple_f", default)]
    pub c_couple: f64,
    #[serde(rename = "c_out_f", default)]
    pub c_out: f64,
    #[serde(rename = "l_m_h", default)]
    pub l_m: f64,
    #[serde(rename = "l_k_h", default)]
    pub l_k: f64,
    #[serde(rename = "c_tot_f", default)]
    pub c_tot: f64,
    #[serde(rename = "center_pin_width_m", default)]
    pub center_pin_width: f64,
    #[serde(rename = "gap_m", default)]
    pub gap: f64,
}

fn default_z0() -> f64 {
    50.0
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            z0: default_z0(),
            omega_r: 0.0,
            c_couple: 0.0,
            c_out: 0.0,
            l_m: 0.0,
            l_k: 0.0,
            c_tot: 0.0,
            center_pin_width: 0.0,
            gap: 0.0,
        }
    }
}

impl DeviceParams {
    /// Every field finite and non-negative, `Z0 > 0`.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let fields = [
            ("z0_ohm", self.z0),
            ("omega_r_hz", self.omega_r),
            ("c_couple_f", self.c_couple),
            ("c_out_f", self.c_out),
            ("l_m_h", self.l_m),
            ("l_k_h", self.l_k),
            ("c_tot_f", self.c_tot),
            ("center_pin_width_m", self.center_pin_width),
            ("gap_m", self.gap),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.z0 == 0.0 {
            return Err(invalid("z0_ohm", "must be > 0"));
        }
        Ok(())
    }

    /// True when `L_k` is not at least two orders of magnitude below `L_m`.
    pub fn kinetic_inductance_large(&self) -> bool {
        self.l_m > 0.0 && self.l_k > 0.01 * self.l_m
    }
}

/// Hopping rate between two coupled resonators with frequency shifts
/// `delta_i`, `delta_j` (all rad/s).
pub fn hopping_rate(p: &DeviceParams, delta_i: f64, delta_j: f64) -> f64 {
    2.0 * p.z0 * p.c_couple * ((p.omega_r + delta_i) * (p.omega_r + delta_j))
}

/// Coupling capacitance giving hopping rate `t` at `omega_r`.
pub fn coupling_for_hop(z0: f64, omega_r: f64, t: f64) -> f64 {
    t / (2.0 * z0 * omega_r * omega_r)
}

/// Photon escape rate into a port.
pub fn escape_rate(p: &DeviceParams) -> f64 {
    4.0 * p.z0 * p.z0 * p.c_out * p.c_out * p.omega_r.powi(3)
}

/// Output coupling capacitance giving escape rate `kappa` at `omega_r`.
pub fn c_out_for_kappa(z0: f64, omega_r: f64, kappa: f64) -> f64 {
    (kappa / (4.0 * z0 * z0 * omega_r.powi(3))).sqrt()
}

/// `1 / (2 sqrt(L C))`.
pub fn lc_frequency(l_total: f64, c_tot: f64) -> f64 {
    1.0 / (2.0 * (l_total * c_tot).sqrt())
}

/// Total capacitance that puts a resonator with inductance `l_total` at `omega_r`.
pub fn c_tot_for_frequency(omega_r: f64, l_total: f64) -> f64 {
    1.0 / (4.0 * omega_r * omega_r * l_total)
}

/// Resonator frequency from the magnetic and kinetic inductances.
pub fn resonator_frequency(p: &DeviceParams) -> Result<f64, CircuitError> {
    if !(p.l_m + p.l_k > 0.0) {
        return Err(invalid("l_m_h", "total inductance must be > 0"));
    }
    if !(p.c_tot > 0.0) {
        return Err(invalid("c_tot_f", "must be > 0"));
    }
    Ok(lc_frequency(p.l_m + p.l_k, p.c_tot))
}

/// Kinetic inductance (H) of a resonator as a function of center-pin width
/// and gap (m).
pub trait InductanceModel: Send + Sync {
    fn kinetic_inductance(&self, width: f64, gap: f64) -> f64;
}

/// `L_k = length * alpha / a^beta`: per-unit-length power law in the
/// center-pin width, independent of the gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLawInductance {
    /// Prefactor (H m^(beta - 1)).
    pub alpha: f64,
    /// Width exponent, > 0 for an inductance that falls with width.
    pub beta: f64,
    /// Resonator length (m).
    #[serde(rename = "length_m")]
    pub length: f64,
}

impl Default for PowerLawInductance {
    /// Thin-film scale: about 4 nH/m at a 10 um pin, a 1/a law, and the
    /// length of a 7 GHz half-wave resonator.
    fn default() -> Self {
        PowerLawInductance { alpha: 4e-14, beta: 1.0, length: 8.5e-3 }
    }
}

impl InductanceModel for PowerLawInductance {
    fn kinetic_inductance(&self, width: f64, _gap: f64) -> f64 {
        self.length * self.alpha / width.powf(self.beta)
    }
}

/// Width-independent kinetic inductance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantInductance(pub f64);

impl InductanceModel for ConstantInductance {
    fn kinetic_inductance(&self, _width: f64, _gap: f64) -> f64 {
        self.0
    }
}

/// Frequency difference (Hz) between a nominal resonator of width `a` and one
/// with width `a - dw` and gap `gap + dgap`, for every width in `widths`.
///
/// At each width the total capacitance is set so the nominal resonator sits
/// at `baseline.omega_r` with inductance `L_m + L_k(a, gap)`; `L_m`, `Z0` and
/// `C_tot` are then held fixed and only `L_k` differs between the two.
pub fn width_disorder_curve(
    model: Option<&dyn InductanceModel>,
    widths: &[f64],
    dw: f64,
    dgap: f64,
    baseline: &DeviceParams,
) -> Result<Vec<(f64, f64)>, CircuitError> {
    let model = model.ok_or(CircuitError::ModelMissing)?;
    baseline.validate()?;
    if !(dw >= 0.0 && dw.is_finite()) {
        return Err(invalid("dw", "must be >= 0"));
    }
    if !(dgap >= 0.0 && dgap.is_finite()) {
        return Err(invalid("dgap", "must be >= 0"));
    }
    if !(baseline.omega_r > 0.0) {
        return Err(invalid("omega_r_hz", "must be > 0"));
    }
    if !(baseline.l_m > 0.0) {
        return Err(invalid("l_m_h", "must be > 0"));
    }
    widths
        .iter()
        .map(|&a| {
            if !(a > dw) {
                return Err(invalid("widths", format!("width {a} must exceed dw = {dw}")));
            }
            let l_nominal = baseline.l_m + model.kinetic_inductance(a, baseline.gap);
            let c_tot = c_tot_for_frequency(baseline.omega_r, l_nominal);
            let l_shifted = baseline.l_m + model.kinetic_inductance(a - dw, baseline.gap + dgap);
            let shifted = lc_frequency(l_shifted, c_tot);
            Ok((a, (baseline.omega_r - shifted).abs() / TAU))
        })
        .collect()
}
