//! Synthetic transmission spectra and peak extraction.
//!
//! The trace model is a sum of single-pole mode responses,
//!
//! ```text
//! S21(w) = sum_j psi_j(in) psi_j(out) (kappa/2) / (kappa_j/2 + i (w - Omega_j))
//! kappa_j = kappa (psi_j(in)^2 + psi_j(out)^2) + kappa_int
//! ```
//!
//! so a mode with no amplitude on either port resonator contributes nothing,
//! and a mode with little amplitude there gives a small peak.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disorder::{
    estimate_sigma_high_t, estimate_sigma_low_t, DisorderError, DisorderEstimate, DisorderModel, EstimatorMethod,
    LowTOptions,
};
use crate::signal::{self, PeakOptions};
use crate::spectrum::{diagonalize, HamiltonianSpec, ModeSpectrum, SpectrumError};
use crate::topology::{build_kagome_star, CouplingGraph, SiteId, INPUT_PORT, OUTPUT_PORT};

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 20_001;

/// Default internal loss as a fraction of `kappa`.
pub const DEFAULT_KAPPA_INT_RATIO: f64 = 0.1;

/// Default relative prominence for [`find_peaks`]. Weakly coupled modes sit
/// on the tails of their neighbours, so this is kept low; the width cap does
/// the work of rejecting interference humps.
pub const DEFAULT_PROMINENCE: f64 = 0.02;

/// Width cap for [`find_peaks`] as a multiple of the widest possible single
/// line. The margin covers the broadening of the half-prominence width by
/// neighbouring tails.
pub const WIDTH_MARGIN: f64 = 2.0;

/// Default peak floor relative to the trace maximum. Interference between
/// mode tails leaves shallow maxima far below any line.
pub const DEFAULT_FLOOR: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransmissionError {
    #[error("port `{0}` is not set")]
    PortNotSet(String),
    #[error("site {site} out of range for a spectrum with {n} modes")]
    PortOutOfRange { site: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
}

/// Uniform frequency grid (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl FrequencyGrid {
    /// Covers every mode of `spectrum` with `pad` on each side.
    pub fn around(spectrum: &ModeSpectrum, pad: f64, n_points: usize) -> Self {
        let f = spectrum.frequencies();
        let lo = f.first().copied().unwrap_or(0.0);
        let hi = f.last().copied().unwrap_or(0.0);
        FrequencyGrid { lo: lo - pad, hi: hi + pad, n_points }
    }

    /// Default grid: all modes plus `5 kappa` padding, 20 001 points.
    pub fn default_for(spectrum: &ModeSpectrum, kappa: f64) -> Self {
        Self::around(spectrum, 5.0 * kappa, DEFAULT_GRID_POINTS)
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n_points - 1) as f64;
        (0..self.n_points).map(|k| self.lo + k as f64 * step).collect()
    }

    fn validate(&self) -> Result<(), TransmissionError> {
        if self.n_points < 3 || !(self.hi > self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(TransmissionError::InvalidParameter("grid needs >= 3 points and hi > lo".into()));
        }
        Ok(())
    }
}

/// |S21| sampled on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionTrace {
    /// Grid (rad/s).
    pub omega: Vec<f64>,
    /// Linear |S21|.
    pub magnitude: Vec<f64>,
    /// Port escape rate (rad/s); zero for external traces.
    pub kappa: f64,
    /// Internal loss rate (rad/s).
    pub kappa_int: f64,
    pub input: Option<SiteId>,
    pub output: Option<SiteId>,
    /// Where the trace came from, e.g. `"synthetic"` or a file name.
    pub source: String,
}

impl TransmissionTrace {
    /// External trace without model metadata. Checks the invariants.
    pub fn external(omega: Vec<f64>, magnitude: Vec<f64>, source: &str) -> Result<Self, TransmissionError> {
        let trace = TransmissionTrace {
            omega,
            magnitude,
            kappa: 0.0,
            kappa_int: 0.0,
            input: None,
            output: None,
            source: source.to_string(),
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), TransmissionError> {
        if self.omega.len() != self.magnitude.len() {
            return Err(TransmissionError::InvalidParameter("grid and magnitude lengths differ".into()));
        }
        if self.omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(TransmissionError::InvalidParameter("grid must be strictly ascending".into()));
        }
        if self.magnitude.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(TransmissionError::InvalidParameter("magnitudes must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Options for [`synthesize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Internal loss (rad/s); `None` means `kappa / 10`.
    pub kappa_int: Option<f64>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { kappa_int: None }
    }
}

/// Port products `a_j = psi_j(in) psi_j(out)` and linewidths `kappa_j`.
fn mode_couplings(
    spectrum: &ModeSpectrum,
    kappa: f64,
    kappa_int: f64,
    input: SiteId,
    output: SiteId,
) -> Vec<(f64, f64, f64)> {
    spectrum
        .vectors()
        .iter()
        .zip(spectrum.frequencies())
        .map(|(v, &w)| {
            let (a, b) = (v[input.0], v[output.0]);
            (w, a * b, kappa * (a * a + b * b) + kappa_int)
        })
        .collect()
}

/// Complex S21 at a single frequency, as `(re, im)`.
fn s21_at(modes: &[(f64, f64, f64)], kappa: f64, w: f64) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for &(wj, aj, kj) in modes {
        if aj == 0.0 {
            continue;
        }
        // a (k/2) / (kj/2 + i d) = a (k/2) (kj/2 - i d) / ((kj/2)^2 + d^2)
        let d = w - wj;
        let g = 0.5 * kj;
        let scale = aj * 0.5 * kappa / (g * g + d * d);
        re += scale * g;
        im -= scale * d;
    }
    (re, im)
}

/// Synthesize |S21| between `input` and `output` on `grid`.
pub fn synthesize(
    spectrum: &ModeSpectrum,
    kappa: f64,
    input: Option<SiteId>,
    output: Option<SiteId>,
    grid: &FrequencyGrid,
    opts: &SynthesisOptions,
) -> Result<TransmissionTrace, TransmissionError> {
    let input = input.ok_or_else(|| TransmissionError::PortNotSet(INPUT_PORT.into()))?;
    let output = output.ok_or_else(|| TransmissionError::PortNotSet(OUTPUT_PORT.into()))?;
    let n = spectrum.n_modes();
    for s in [input, output] {
        if s.0 >= n {
            return Err(TransmissionError::PortOutOfRange { site: s.0, n });
        }
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(TransmissionError::InvalidParameter(format!("kappa must be > 0, got {kappa}")));
    }
    let kappa_int = opts.kappa_int.unwrap_or(DEFAULT_KAPPA_INT_RATIO * kappa);
    if !(kappa_int >= 0.0 && kappa_int.is_finite()) {
        return Err(TransmissionError::InvalidParameter("kappa_int must be >= 0".into()));
    }
    grid.validate()?;
    let modes = mode_couplings(spectrum, kappa, kappa_int, input, output);
    let omega = grid.points();
    let magnitude = omega
        .iter()
        .map(|&w| {
            let (re, im) = s21_at(&modes, kappa, w);
            re.hypot(im)
        })
        .collect();
    Ok(TransmissionTrace {
        omega,
        magnitude,
        kappa,
        kappa_int,
        input: Some(input),
        output: Some(output),
        source: "synthetic".into(),
    })
}

/// [`synthesize`] using the graph's `input` and `output` ports.
pub fn synthesize_for_graph(
    spectrum: &ModeSpectrum,
    graph: &CouplingGraph,
    kappa: f64,
    grid: &FrequencyGrid,
    opts: &SynthesisOptions,
) -> Result<TransmissionTrace, TransmissionError> {
    synthesize(spectrum, kappa, graph.port(INPUT_PORT), graph.port(OUTPUT_PORT), grid, opts)
}

/// Per-peak quality flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakFlag {
    /// Other maxima closer than the minimum separation were absorbed.
    Merged,
    /// Sub-grid refinement failed; position is the grid sample.
    Unrefined,
}

/// One extracted peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Position (rad/s).
    pub omega: f64,
    pub height: f64,
    /// Full width at half prominence (rad/s).
    pub width: f64,
    pub prominence: f64,
    pub flags: Vec<PeakFlag>,
}

/// Peaks of one trace, ascending in frequency.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakList {
    pub peaks: Vec<Peak>,
}

impl PeakList {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.omega).collect()
    }

    /// Index of the peak nearest to `omega`.
    pub fn nearest(&self, omega: f64) -> Option<usize> {
        (0..self.peaks.len()).min_by(|&a, &b| {
            (self.peaks[a].omega - omega).abs().total_cmp(&(self.peaks[b].omega - omega).abs())
        })
    }
}

/// Peak detection settings in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSearch {
    /// Minimum prominence as a fraction of peak height.
    pub prominence: f64,
    /// Peaks closer than this are merged (rad/s).
    pub min_separation: f64,
    /// Peaks wider than this at half prominence are ignored (rad/s).
    pub max_width: Option<f64>,
    /// Peaks lower than this fraction of the trace maximum are ignored.
    pub floor: f64,
}

impl PeakSearch {
    /// Defaults scaled to a port escape rate, assuming distinct ports and the
    /// default internal loss: separation `kappa`, width cap `2.2 kappa`.
    pub fn for_kappa(kappa: f64) -> Self {
        let widest = kappa * (1.0 + DEFAULT_KAPPA_INT_RATIO);
        PeakSearch {
            prominence: DEFAULT_PROMINENCE,
            min_separation: kappa,
            max_width: Some(WIDTH_MARGIN * widest),
            floor: DEFAULT_FLOOR,
        }
    }

    /// Defaults from a synthetic trace's metadata. Traces without a `kappa`
    /// get no width cap and no separation floor.
    pub fn for_trace(trace: &TransmissionTrace) -> Self {
        if !(trace.kappa > 0.0) {
            return PeakSearch { prominence: DEFAULT_PROMINENCE, min_separation: 0.0, max_width: None, floor: DEFAULT_FLOOR };
        }
        let ports = if trace.input == trace.output { 2.0 } else { 1.0 };
        let widest = ports * trace.kappa + trace.kappa_int;
        PeakSearch { max_width: Some(WIDTH_MARGIN * widest), ..PeakSearch::for_kappa(trace.kappa) }
    }
}

/// Extract peaks from a trace.
pub fn find_peaks(trace: &TransmissionTrace, search: &PeakSearch) -> PeakList {
    let opts = PeakOptions {
        prominence: search.prominence,
        min_separation: search.min_separation,
        max_width: search.max_width,
        min_height: search.floor * trace.magnitude.iter().copied().fold(0.0, f64::max),
    };
    let peaks = signal::find_peaks(&trace.omega, &trace.magnitude, &opts)
        .into_iter()
        .map(|p| {
            let mut flags = Vec::new();
            if p.merged {
                flags.push(PeakFlag::Merged);
            }
            if !p.refined {
                flags.push(PeakFlag::Unrefined);
            }
            Peak { omega: p.x, height: p.height, width: p.width, prominence: p.prominence, flags }
        })
        .collect();
    PeakList { peaks }
}

/// End-to-end pipeline settings. Frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripParams {
    pub omega_r: f64,
    pub t: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub kappa_int: Option<f64>,
    pub n_devices: usize,
    pub method: EstimatorMethod,
    pub seed: u64,
    /// Realization index of the first device.
    pub first_device: u64,
    pub grid_points: usize,
}

impl RoundTripParams {
    pub fn new(t: f64, sigma: f64, kappa: f64, n_devices: usize, method: EstimatorMethod) -> Self {
        RoundTripParams {
            omega_r: 0.0,
            t,
            sigma,
            kappa,
            kappa_int: None,
            n_devices,
            method,
            seed: 0,
            first_device: 0,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// What happened to one synthetic device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceOutcome {
    pub n_peaks: usize,
    /// Distinct mode frequencies that couple to both ports.
    pub expected_peaks: usize,
    /// Peak frequencies (rad/s).
    pub peaks: Vec<f64>,
    /// True mode frequencies (rad/s).
    pub modes: Vec<f64>,
    /// Index of the mode with the largest overlap with the ideal flat-band
    /// state.
    pub flat_band_mode: usize,
    /// Whether that mode has the smallest on-resonance |S21| of all modes.
    pub flat_band_smallest: bool,
}

/// Estimate together with per-device bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripResult {
    /// `None` if fewer devices than the estimator needs survived.
    pub estimate: Option<DisorderEstimate>,
    /// Why no estimate was produced.
    pub error: Option<DisorderError>,
    pub devices: Vec<DeviceOutcome>,
    /// Total shortfall of detected peaks against `expected_peaks`.
    pub missing_peaks: usize,
    /// Devices passed to the estimator.
    pub devices_used: usize,
}

/// Degeneracy groups whose summed port product is non-zero.
fn bright_groups(spectrum: &ModeSpectrum, modes: &[(f64, f64, f64)]) -> usize {
    spectrum
        .degeneracy_groups()
        .iter()
        .filter(|g| g.iter().map(|&j| modes[j].1).sum::<f64>().abs() > BRIGHT_TOL)
        .count()
}

/// Port product below which a mode counts as dark.
const BRIGHT_TOL: f64 = 1e-9;

/// Simulate `n_devices` disordered kagome stars, synthesize and search their
/// traces, and feed the peaks to the chosen estimator.
///
/// High-t keeps only devices with all twelve peaks; low-t keeps devices with
/// at least the default minimum number of peaks. Devices dropped this way are
/// visible in `devices` and `missing_peaks`.
pub fn round_trip_sigma(p: &RoundTripParams) -> Result<RoundTripResult, TransmissionError> {
    let graph = build_kagome_star();
    let n = graph.n_sites();
    let model = DisorderModel::new(p.sigma, p.seed, p.n_devices.max(1));
    model.validate(n)?;
    let ideal = diagonalize(&HamiltonianSpec::new(&graph, p.omega_r, p.t), None)?;
    let flat = ideal.vectors()[0].clone();
    let synth = SynthesisOptions { kappa_int: p.kappa_int };

    let devices: Vec<DeviceOutcome> = (0..p.n_devices as u64)
        .into_par_iter()
        .map(|k| {
            let deltas = model.sample(p.first_device + k, n);
            let spec = HamiltonianSpec::new(&graph, p.omega_r, p.t).with_deltas(deltas);
            let spectrum = diagonalize(&spec, None)?;
            let pad = 5.0 * p.kappa;
            let grid = FrequencyGrid::around(&spectrum, pad, p.grid_points);
            let trace = synthesize_for_graph(&spectrum, &graph, p.kappa, &grid, &synth)?;
            let peaks = find_peaks(&trace, &PeakSearch::for_trace(&trace)).frequencies();

            let flat_band_mode = (0..n)
                .max_by(|&a, &b| {
                    let oa: f64 = spectrum.vectors()[a].iter().zip(&flat).map(|(x, y)| x * y).sum();
                    let ob: f64 = spectrum.vectors()[b].iter().zip(&flat).map(|(x, y)| x * y).sum();
                    oa.abs().total_cmp(&ob.abs())
                })
                .unwrap_or(0);
            let kappa_int = trace.kappa_int;
            let modes = mode_couplings(&spectrum, p.kappa, kappa_int, trace.input.unwrap(), trace.output.unwrap());
            let amp: Vec<f64> = spectrum
                .frequencies()
                .iter()
                .map(|&w| {
                    let (re, im) = s21_at(&modes, p.kappa, w);
                    re.hypot(im)
                })
                .collect();
            let flat_band_smallest = (0..n).all(|j| j == flat_band_mode || amp[j] > amp[flat_band_mode]);
            Ok(DeviceOutcome {
                n_peaks: peaks.len(),
                expected_peaks: bright_groups(&spectrum, &modes),
                peaks,
                modes: spectrum.frequencies().to_vec(),
                flat_band_mode,
                flat_band_smallest,
            })
        })
        .collect::<Result<_, TransmissionError>>()?;

    let missing_peaks = devices.iter().map(|d| d.expected_peaks.saturating_sub(d.n_peaks)).sum();
    let low_opts = LowTOptions::default();
    let usable: Vec<Vec<f64>> = devices
        .iter()
        .filter(|d| match p.method {
            EstimatorMethod::HighT => d.n_peaks == n,
            EstimatorMethod::LowT => d.n_peaks >= low_opts.min_peaks && d.n_peaks <= n,
        })
        .map(|d| d.peaks.clone())
        .collect();
    let devices_used = usable.len();
    let outcome = match p.method {
        EstimatorMethod::HighT => estimate_sigma_high_t(&usable, &ideal),
        EstimatorMethod::LowT => estimate_sigma_low_t(&usable, p.t, &low_opts),
    };
    let (estimate, error) = match outcome {
        Ok(e) => (Some(e), None),
        Err(DisorderError::NonPhysical(e)) => (Some(*e.clone()), Some(DisorderError::NonPhysical(e))),
        Err(e) => (None, Some(e)),
    };
    Ok(RoundTripResult { estimate, error, devices, missing_peaks, devices_used })
}
