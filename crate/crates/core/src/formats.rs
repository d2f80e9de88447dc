//! File schemas. Everything written here is in Hz.
//!
//! Numbers are printed with Rust's shortest round-trip formatting, so the
//! same values always produce the same bytes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disorder::{DisorderEstimate, EstimateFlag, EstimatorMethod, ModeHistogram};
use crate::spectrum::{degenerate_pair_supports, ModeSpectrum};
use crate::transmission::{PeakFlag, PeakList, TransmissionTrace};
use crate::units::{hz_to_rad, rad_to_hz};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("empty input")]
    Empty,
}

fn csv_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Csv { line, msg: msg.into() }
}

/// `bin_center_Hz,count,normalized`
pub fn histogram_csv(h: &ModeHistogram) -> String {
    let mut out = String::from("bin_center_Hz,count,normalized\n");
    for ((c, n), x) in h.bin_centers().iter().zip(&h.counts).zip(&h.normalized) {
        let _ = writeln!(out, "{},{},{}", rad_to_hz(*c), n, x);
    }
    out
}

/// `freq_Hz,s21_mag`
pub fn trace_csv(trace: &TransmissionTrace) -> String {
    let mut out = String::from("freq_Hz,s21_mag\n");
    for (w, m) in trace.omega.iter().zip(&trace.magnitude) {
        let _ = writeln!(out, "{},{}", rad_to_hz(*w), m);
    }
    out
}

/// Split a CSV line into trimmed fields.
fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(',').map(str::trim)
}

fn is_header(line: &str) -> bool {
    fields(line).next().is_some_and(|f| !f.is_empty() && f.parse::<f64>().is_err())
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parse a two-column `freq_Hz,s21_mag` trace. A header row is optional.
pub fn parse_trace_csv(text: &str, source: &str) -> Result<TransmissionTrace, FormatError> {
    let mut omega = Vec::new();
    let mut mag = Vec::new();
    for (k, (line_no, line)) in data_lines(text).enumerate() {
        if k == 0 && is_header(line) {
            continue;
        }
        let cols: Vec<&str> = fields(line).collect();
        if cols.len() != 2 {
            return Err(csv_err(line_no, format!("expected 2 columns, found {}", cols.len())));
        }
        let f: f64 = cols[0].parse().map_err(|_| csv_err(line_no, format!("bad frequency `{}`", cols[0])))?;
        let m: f64 = cols[1].parse().map_err(|_| csv_err(line_no, format!("bad magnitude `{}`", cols[1])))?;
        omega.push(hz_to_rad(f));
        mag.push(m);
    }
    if omega.is_empty() {
        return Err(FormatError::Empty);
    }
    TransmissionTrace::external(omega, mag, source).map_err(|e| csv_err(0, e.to_string()))
}

/// Peak sets in Hz, one device per row; rows may have different lengths.
pub fn peak_sets_csv(sets: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for set in sets {
        let row: Vec<String> = set.iter().map(|w| rad_to_hz(*w).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parse peak sets (Hz, one device per row) into rad/s. Empty fields are
/// ignored so ragged rows padded with commas are accepted; a non-numeric
/// first row is treated as a header.
pub fn parse_peak_sets_csv(text: &str) -> Result<Vec<Vec<f64>>, FormatError> {
    let mut sets = Vec::new();
    for (k, (line_no, line)) in data_lines(text).enumerate() {
        if k == 0 && is_header(line) {
            continue;
        }
        let row = fields(line)
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(hz_to_rad)
                    .ok_or_else(|| csv_err(line_no, format!("bad value `{f}`")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        sets.push(row);
    }
    if sets.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(sets)
}

/// `width_m,delta_f_Hz`
pub fn curve_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("width_m,delta_f_Hz\n");
    for (a, df) in curve {
        let _ = writeln!(out, "{a},{df}");
    }
    out
}

/// Eigenvectors, one mode per row, with its frequency first.
pub fn eigenvector_csv(spectrum: &ModeSpectrum) -> String {
    let n = spectrum.n_modes();
    let mut out = String::from("mode,freq_Hz");
    for i in 0..n {
        let _ = write!(out, ",site_{i}");
    }
    out.push('\n');
    for (j, (w, v)) in spectrum.frequencies().iter().zip(spectrum.vectors()).enumerate() {
        let _ = write!(out, "{j},{}", rad_to_hz(*w));
        for x in v {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

/// JSON form of a disorder estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateJson {
    #[serde(rename = "sigma_hat_Hz")]
    pub sigma_hat_hz: f64,
    #[serde(rename = "std_error_Hz")]
    pub std_error_hz: f64,
    pub method: EstimatorMethod,
    pub n_devices: usize,
    pub flags: Vec<EstimateFlag>,
    /// Signed variance before the square root.
    #[serde(rename = "raw_variance_Hz2")]
    pub raw_variance_hz2: f64,
    /// Disorder in units of the hopping rate, when `t` is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_over_t: Option<f64>,
}

impl EstimateJson {
    pub fn new(e: &DisorderEstimate, t: Option<f64>) -> Self {
        EstimateJson {
            sigma_hat_hz: rad_to_hz(e.sigma_hat),
            std_error_hz: rad_to_hz(e.std_error),
            method: e.method,
            n_devices: e.n_devices,
            flags: e.flags.clone(),
            raw_variance_hz2: e.raw_variance / (std::f64::consts::TAU * std::f64::consts::TAU),
            sigma_over_t: t.filter(|&t| t > 0.0).map(|t| e.sigma_hat / t),
        }
    }
}

/// One doublet in the mode report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubletJson {
    pub modes: [usize; 2],
    #[serde(rename = "freq_Hz")]
    pub freq_hz: f64,
    pub supports: [Vec<usize>; 2],
    pub shared_sites: Vec<usize>,
    pub disjoint: bool,
}

/// JSON form of a mode spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrumJson {
    #[serde(rename = "omega_r_Hz")]
    pub omega_r_hz: f64,
    #[serde(rename = "t_Hz")]
    pub t_hz: f64,
    pub disordered: bool,
    #[serde(rename = "frequencies_Hz")]
    pub frequencies_hz: Vec<f64>,
    #[serde(rename = "distinct_frequencies_Hz")]
    pub distinct_frequencies_hz: Vec<f64>,
    pub degeneracy: Vec<usize>,
    pub degeneracy_groups: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub doublets: Vec<DoubletJson>,
    pub vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivities: Option<Vec<Vec<f64>>>,
}

impl ModeSpectrumJson {
    pub fn new(s: &ModeSpectrum, with_sensitivities: bool) -> Self {
        let f = s.frequencies();
        let doublets = degenerate_pair_supports(s)
            .map(|ds| {
                ds.into_iter()
                    .map(|d| DoubletJson {
                        modes: d.modes,
                        freq_hz: rad_to_hz(d.frequency),
                        disjoint: d.is_disjoint(),
                        supports: [
                            d.supports[0].iter().map(|x| x.0).collect(),
                            d.supports[1].iter().map(|x| x.0).collect(),
                        ],
                        shared_sites: d.shared.iter().map(|x| x.0).collect(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        ModeSpectrumJson {
            omega_r_hz: rad_to_hz(s.omega_r()),
            t_hz: rad_to_hz(s.hop()),
            disordered: s.is_disordered(),
            frequencies_hz: f.iter().map(|w| rad_to_hz(*w)).collect(),
            distinct_frequencies_hz: s.degeneracy_groups().iter().map(|g| rad_to_hz(f[g[0]])).collect(),
            degeneracy: s.group_sizes(),
            degeneracy_groups: s.degeneracy_groups().to_vec(),
            doublets,
            vectors: s.vectors().to_vec(),
            sensitivities: with_sensitivities.then(|| s.sensitivities().to_vec()),
        }
    }
}

/// JSON form of one extracted peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakJson {
    #[serde(rename = "freq_Hz")]
    pub freq_hz: f64,
    pub height: f64,
    #[serde(rename = "width_Hz")]
    pub width_hz: f64,
    pub prominence: f64,
    pub flags: Vec<PeakFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakListJson {
    pub n_peaks: usize,
    pub peaks: Vec<PeakJson>,
}

impl PeakListJson {
    pub fn new(list: &PeakList) -> Self {
        PeakListJson {
            n_peaks: list.len(),
            peaks: list
                .peaks
                .iter()
                .map(|p| PeakJson {
                    freq_hz: rad_to_hz(p.omega),
                    height: p.height,
                    width_hz: rad_to_hz(p.width),
                    prominence: p.prominence,
                    flags: p.flags.clone(),
                })
                .collect(),
        }
    }
}
