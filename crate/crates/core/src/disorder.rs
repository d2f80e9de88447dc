//! Disorder ensembles and disorder estimators.
//!
//! * [`mode_histogram`] tallies the mode frequencies of many Gaussian disorder
//!   realizations.
//! * [`estimate_sigma_low_t`] uses the trace identity
//!   `Var(Omega) = Var(delta) + Var(Omega_ideal)`: the spread of the measured
//!   peaks minus the spread of the ideal spectrum is the site disorder. It is
//!   accurate when `sigma` is comparable to or larger than `t`.
//! * [`estimate_sigma_high_t`] uses the first-order shifts
//!   `Omega_j ~ Omega_j^0 + sum_i S[j][i] delta_i`, whose variance across
//!   devices is `sigma^2 sum_i S[j][i]^2`. It needs `sigma << t` so the peak
//!   order identifies each mode.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::gaussian_vector;
use crate::signal::{find_peaks, PeakOptions};
use crate::spectrum::{diagonalize, eigenfrequencies, population_variance, HamiltonianSpec, ModeSpectrum, SpectrumError};
use crate::topology::{build_kagome_star, CouplingGraph};

/// Realizations per parallel work unit. Fixed so that floating-point sums
/// are reduced in the same order whatever the thread count.
pub const CHUNK: usize = 1024;

/// Default number of histogram bins.
pub const DEFAULT_BINS: usize = 801;

/// Default minimum number of peaks per device for the low-t estimator.
pub const DEFAULT_MIN_PEAKS: usize = 8;

/// Above this `sigma_hat / t` the high-t estimate is flagged: mode order is
/// no longer a reliable label.
pub const ORDERING_WARN_RATIO: f64 = 0.1;

/// Above this `sigma_hat / t` the high-t estimator refuses.
pub const ORDERING_REFUSE_RATIO: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisorderError {
    #[error("invalid disorder model: {0}")]
    InvalidModel(String),
    #[error("histogram grid is empty or degenerate")]
    EmptyGrid,
    #[error("device {device} has {found} peaks, at least {required} required")]
    TooFewPeaks { device: usize, found: usize, required: usize },
    #[error("device {device} has {found} peaks, expected {expected}")]
    PeakCountMismatch { device: usize, found: usize, expected: usize },
    #[error("ideal degeneracy pattern {0:?} is not four singlets and four doublets")]
    DegeneracyMismatch(Vec<usize>),
    #[error("{found} devices supplied, at least {required} required")]
    TooFewDevices { found: usize, required: usize },
    #[error("estimated sigma/t = {ratio:.3} is too large for order-based mode matching")]
    OrderingInvalid { ratio: f64 },
    #[error("non-physical estimate: disorder-subtracted variance {} is negative", .0.raw_variance)]
    NonPhysical(Box<DisorderEstimate>),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Gaussian site disorder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderModel {
    /// Standard deviation of the site shifts (rad/s).
    pub sigma: f64,
    pub seed: u64,
    pub n_realizations: usize,
    /// Optional deterministic per-site offsets added to every draw (rad/s).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offsets: Vec<f64>,
}

impl DisorderModel {
    pub fn new(sigma: f64, seed: u64, n_realizations: usize) -> Self {
        DisorderModel { sigma, seed, n_realizations, offsets: Vec::new() }
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Self {
        self.offsets = offsets;
        self
    }

    pub fn validate(&self, n_sites: usize) -> Result<(), DisorderError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(DisorderError::InvalidModel(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.n_realizations == 0 {
            return Err(DisorderError::InvalidModel("n_realizations must be >= 1".into()));
        }
        if !self.offsets.is_empty() && self.offsets.len() != n_sites {
            return Err(DisorderError::InvalidModel(format!(
                "{} offsets for {n_sites} sites",
                self.offsets.len()
            )));
        }
        Ok(())
    }

    /// Site shifts of realization `index` for a graph with `n_sites` sites.
    /// Depends only on `(seed, index, site)`.
    pub fn sample(&self, index: u64, n_sites: usize) -> Vec<f64> {
        let mut d = gaussian_vector(self.seed, index, n_sites, self.sigma);
        for (x, o) in d.iter_mut().zip(&self.offsets) {
            *x += o;
        }
        d
    }
}

/// Twelve-site draws of realization `index`.
pub fn sample_deltas(model: &DisorderModel, index: u64) -> Vec<f64> {
    model.sample(index, crate::topology::KAGOME_STAR_SITES)
}

/// Uniform histogram binning over `[lo, hi)` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramGrid {
    pub lo: f64,
    pub hi: f64,
    pub n_bins: usize,
}

impl HistogramGrid {
    /// `omega_r +- max(5 sigma, 4 t)` with 801 bins.
    pub fn default_for(omega_r: f64, t: f64, sigma: f64) -> Self {
        let half = (5.0 * sigma).max(4.0 * t);
        HistogramGrid { lo: omega_r - half, hi: omega_r + half, n_bins: DEFAULT_BINS }
    }

    pub fn validate(&self) -> Result<(), DisorderError> {
        if self.n_bins == 0 || !(self.hi > self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(DisorderError::EmptyGrid);
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.n_bins as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n_bins).map(|k| self.lo + k as f64 * self.bin_width()).collect()
    }

    fn bin_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        let k = ((x - self.lo) / self.bin_width()) as usize;
        Some(k.min(self.n_bins - 1))
    }
}

/// Tally of mode frequencies over a disorder ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `counts / max(counts)`.
    pub normalized: Vec<f64>,
    pub sigma: f64,
    pub t: f64,
    pub omega_r: f64,
    pub n_realizations: usize,
    pub n_modes: usize,
    /// Frequencies below the first edge.
    pub underflow: u64,
    /// Frequencies at or above the last edge.
    pub overflow: u64,
    /// Sum of all tallied frequencies, offset by `omega_r` (rad/s).
    pub offset_sum: f64,
    /// Sum of squared offsets from `omega_r`.
    pub offset_sum_sq: f64,
}

/// Least-squares Gaussian `a exp(-(x - mu)^2 / (2 s^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl ModeHistogram {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// All tallies, including out-of-range ones.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Mean of every tallied frequency (rad/s).
    pub fn mean_frequency(&self) -> f64 {
        self.omega_r + self.offset_sum / (self.n_realizations * self.n_modes) as f64
    }

    /// Standard deviation of every tallied frequency (rad/s).
    pub fn frequency_std(&self) -> f64 {
        let n = (self.n_realizations * self.n_modes) as f64;
        let m = self.offset_sum / n;
        (self.offset_sum_sq / n - m * m).max(0.0).sqrt()
    }

    /// Gaussian fit to the binned counts: Gauss-Newton on the three
    /// parameters, started from the histogram moments.
    pub fn fit_gaussian(&self) -> Option<GaussianFit> {
        let x = self.bin_centers();
        let y: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        fit_gaussian(&x, &y)
    }

    /// Positions of resolved maxima (rad/s): local maxima with a relative
    /// prominence of at least `prominence` and a height of at least
    /// `floor * max(counts)`, which keeps isolated counts in the tails out.
    pub fn resolved_maxima(&self, prominence: f64, floor: f64) -> Vec<f64> {
        let y: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        let max = y.iter().copied().fold(0.0, f64::max);
        let opts = PeakOptions { prominence, min_separation: 0.0, max_width: None, min_height: floor * max };
        find_peaks(&self.bin_centers(), &y, &opts).into_iter().map(|p| p.x).collect()
    }
}

/// Least-squares fit of `a exp(-(x - mu)^2 / (2 s^2))` to samples.
pub fn fit_gaussian(x: &[f64], y: &[f64]) -> Option<GaussianFit> {
    let total: f64 = y.iter().sum();
    if !(total > 0.0) || x.len() < 3 {
        return None;
    }
    let mu0 = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / total;
    let var0 = x.iter().zip(y).map(|(a, b)| (a - mu0).powi(2) * b).sum::<f64>() / total;
    let a0 = y.iter().copied().fold(0.0, f64::max);
    if !(var0 > 0.0) {
        return None;
    }
    let mut p = [a0, mu0, var0.sqrt()];
    let residual = |p: &[f64; 3]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| (yi - p[0] * (-(xi - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp()).powi(2))
            .sum()
    };
    let mut cost = residual(&p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&xi, &yi) in x.iter().zip(y) {
            let u = (xi - p[1]) / p[2];
            let e = (-0.5 * u * u).exp();
            let f = p[0] * e;
            let j = [e, f * u / p[2], f * u * u / p[2]];
            let r = yi - f;
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] *= 1.0 + lambda;
            }
            let Some(step) = solve3(m, jtr) else { break };
            let trial = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).abs()];
            let c = residual(&trial);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some(GaussianFit { amplitude: p[0], center: p[1], width: p[2] })
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = b[r];
        }
        *o = det(&mk) / d;
    }
    Some(out)
}

#[derive(Clone)]
struct Tally {
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
    sum: f64,
    sum_sq: f64,
}

/// Normal-mode histogram over `model.n_realizations` disorder draws.
///
/// Realizations are processed in parallel in fixed chunks of [`CHUNK`];
/// partial tallies are combined in chunk order, so the result is
/// bit-identical for any thread count.
pub fn mode_histogram(
    graph: &CouplingGraph,
    omega_r: f64,
    t: f64,
    model: &DisorderModel,
    grid: &HistogramGrid,
) -> Result<ModeHistogram, DisorderError> {
    grid.validate()?;
    let n = graph.n_sites();
    model.validate(n)?;
    HamiltonianSpec::new(graph, omega_r, t).validate()?;

    let n_chunks = model.n_realizations.div_ceil(CHUNK);
    let partials: Vec<Result<Tally, DisorderError>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally =
                Tally { counts: vec![0; grid.n_bins], underflow: 0, overflow: 0, sum: 0.0, sum_sq: 0.0 };
            let start = c * CHUNK;
            let end = (start + CHUNK).min(model.n_realizations);
            for r in start..end {
                let spec = HamiltonianSpec::new(graph, 0.0, t).with_deltas(model.sample(r as u64, n));
                for off in eigenfrequencies(&spec)? {
                    let w = off + omega_r;
                    match grid.bin_of(w) {
                        Some(k) => tally.counts[k] += 1,
                        None if w < grid.lo => tally.underflow += 1,
                        None => tally.overflow += 1,
                    }
                    tally.sum += off;
                    tally.sum_sq += off * off;
                }
            }
            Ok(tally)
        })
        .collect();

    let mut total = Tally { counts: vec![0; grid.n_bins], underflow: 0, overflow: 0, sum: 0.0, sum_sq: 0.0 };
    for p in partials {
        let p = p?;
        for (a, b) in total.counts.iter_mut().zip(&p.counts) {
            *a += b;
        }
        total.underflow += p.underflow;
        total.overflow += p.overflow;
        total.sum += p.sum;
        total.sum_sq += p.sum_sq;
    }
    let max = total.counts.iter().copied().max().unwrap_or(0);
    let normalized = total
        .counts
        .iter()
        .map(|&c| if max > 0 { c as f64 / max as f64 } else { 0.0 })
        .collect();
    Ok(ModeHistogram {
        bin_edges: grid.edges(),
        counts: total.counts,
        normalized,
        sigma: model.sigma,
        t,
        omega_r,
        n_realizations: model.n_realizations,
        n_modes: n,
        underflow: total.underflow,
        overflow: total.overflow,
        offset_sum: total.sum,
        offset_sum_sq: total.sum_sq,
    })
}

/// Which estimator produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMethod {
    /// Variance subtraction, for `sigma >~ t`.
    LowT,
    /// First-order sensitivities, for `sigma << t`.
    HighT,
}

/// Quality flags attached to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateFlag {
    /// Disorder-subtracted variance was negative; `sigma_hat` reported as 0.
    NonPhysical,
    /// Some devices had fewer than the full set of peaks.
    MissingPeaks,
    /// `sigma_hat / t` is large enough that peak order may not label modes.
    OrderingUnreliable,
    /// Only one device; no scatter-based uncertainty available.
    SingleDevice,
}

/// Result of a disorder estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderEstimate {
    /// Estimated disorder (rad/s).
    pub sigma_hat: f64,
    /// Uncertainty from the scatter of individual estimates (rad/s).
    pub std_error: f64,
    pub method: EstimatorMethod,
    pub n_devices: usize,
    pub flags: Vec<EstimateFlag>,
    /// Signed variance estimate before the square root (rad^2/s^2).
    pub raw_variance: f64,
}

/// Options for [`estimate_sigma_low_t`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowTOptions {
    /// Minimum number of peaks per device.
    pub min_peaks: usize,
    /// Require every device to show all modes.
    pub strict: bool,
}

impl Default for LowTOptions {
    fn default() -> Self {
        LowTOptions { min_peaks: DEFAULT_MIN_PEAKS, strict: false }
    }
}

/// Ideal kagome-star spectrum at `omega_r = 0` with hopping `t`.
pub fn kagome_ideal(t: f64) -> Result<ModeSpectrum, DisorderError> {
    let g = build_kagome_star();
    Ok(diagonalize(&HamiltonianSpec::new(&g, 0.0, t), None)?)
}

/// Low-t estimate on the kagome star with hopping `t` (rad/s).
///
/// Peak frequencies are in rad/s; any common offset cancels.
pub fn estimate_sigma_low_t(
    peak_sets: &[Vec<f64>],
    t: f64,
    opts: &LowTOptions,
) -> Result<DisorderEstimate, DisorderError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(DisorderError::InvalidInput(format!("t must be >= 0, got {t}")));
    }
    estimate_sigma_low_t_with(peak_sets, kagome_ideal(t)?.frequencies(), opts)
}

/// Low-t estimate against an arbitrary ideal spectrum.
///
/// Per device `d` with `m` observed peaks, the ideal modes are matched to the
/// peaks by the order-preserving choice of `m` ideal frequencies that best
/// fits the centered peaks, and
/// `v_d = m/(m-1) * (Var(peaks) - Var(matched ideal))`. With all modes
/// observed the bracket equals the population variance of the device's site
/// shifts exactly, so the `m/(m-1)` factor makes `v_d` unbiased for
/// `sigma^2`. The estimate is `sigma_hat^2 = mean_d v_d`.
pub fn estimate_sigma_low_t_with(
    peak_sets: &[Vec<f64>],
    ideal: &[f64],
    opts: &LowTOptions,
) -> Result<DisorderEstimate, DisorderError> {
    let n = ideal.len();
    if peak_sets.is_empty() {
        return Err(DisorderError::TooFewDevices { found: 0, required: 1 });
    }
    let required = if opts.strict { n } else { opts.min_peaks.clamp(2, n) };
    let mut ideal_sorted = ideal.to_vec();
    ideal_sorted.sort_by(f64::total_cmp);

    let mut flags = Vec::new();
    let mut per_device = Vec::with_capacity(peak_sets.len());
    for (d, peaks) in peak_sets.iter().enumerate() {
        check_finite(peaks, d)?;
        let m = peaks.len();
        if m > n {
            return Err(DisorderError::PeakCountMismatch { device: d, found: m, expected: n });
        }
        if m < required {
            return Err(DisorderError::TooFewPeaks { device: d, found: m, required });
        }
        if m < n && !flags.contains(&EstimateFlag::MissingPeaks) {
            flags.push(EstimateFlag::MissingPeaks);
        }
        let mut p = peaks.clone();
        p.sort_by(f64::total_cmp);
        let matched = match_ideal_subset(&p, &ideal_sorted);
        let bessel = m as f64 / (m as f64 - 1.0);
        per_device.push(bessel * (population_variance(&p) - population_variance(&matched)));
    }

    let d = per_device.len() as f64;
    let raw = per_device.iter().sum::<f64>() / d;
    let signed: Vec<f64> = per_device.iter().map(|v| v.signum() * v.abs().sqrt()).collect();
    let std_error = sample_sd(&signed);
    if per_device.len() == 1 {
        flags.push(EstimateFlag::SingleDevice);
    }
    let mut est = DisorderEstimate {
        sigma_hat: raw.max(0.0).sqrt(),
        std_error,
        method: EstimatorMethod::LowT,
        n_devices: per_device.len(),
        flags,
        raw_variance: raw,
    };
    if raw < 0.0 {
        est.flags.push(EstimateFlag::NonPhysical);
        est.flags.sort();
        return Err(DisorderError::NonPhysical(Box::new(est)));
    }
    est.flags.sort();
    Ok(est)
}

fn check_finite(peaks: &[f64], device: usize) -> Result<(), DisorderError> {
    if peaks.iter().any(|p| !p.is_finite()) {
        return Err(DisorderError::InvalidInput(format!("device {device} has a non-finite peak")));
    }
    Ok(())
}

fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Ordered subset of `ideal` (both sorted) with `peaks.len()` entries whose
/// centered values are closest to the centered peaks in least squares.
fn match_ideal_subset(peaks: &[f64], ideal: &[f64]) -> Vec<f64> {
    let m = peaks.len();
    if m == ideal.len() {
        return ideal.to_vec();
    }
    let pm = peaks.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = peaks.iter().map(|p| p - pm).collect();
    let mut best: (f64, Vec<usize>) = (f64::INFINITY, Vec::new());
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        let om = idx.iter().map(|&k| ideal[k]).sum::<f64>() / m as f64;
        let cost: f64 = idx.iter().zip(&centered).map(|(&k, c)| (ideal[k] - om - c).powi(2)).sum();
        if cost < best.0 {
            best = (cost, idx.clone());
        }
        if !next_combination(&mut idx, ideal.len()) {
            break;
        }
    }
    best.1.iter().map(|&k| ideal[k]).collect()
}

/// Advance `idx` to the next increasing combination of `0..n`.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let m = idx.len();
    for i in (0..m).rev() {
        if idx[i] < n - m + i {
            idx[i] += 1;
            for j in i + 1..m {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Per-group first-order variance factor `f_G` with
/// `E[(Omega_j - Omega_bar)^2 - (mean)^2] = f_G sigma^2` for members of `G`.
///
/// `w_i = sum_{j in G} psi_j(i)^2` is independent of the basis chosen inside
/// the group; the branch shifts of a degenerate group are the eigenvalues of
/// its projected perturbation, whose summed squares average to
/// `sigma^2 sum_i w_i^2`. Centering each device on its mean frequency (which
/// shifts by the mean site shift) removes `sigma^2 / n` per member.
pub fn group_variance_factor(ideal: &ModeSpectrum, group: &[usize]) -> f64 {
    let n = ideal.n_modes() as f64;
    let w = ideal.group_site_weights(group);
    w.iter().map(|x| x * x).sum::<f64>() / group.len() as f64 - 1.0 / n
}

/// High-t estimate from devices that each show all twelve peaks.
///
/// Peaks are centered on each device's mean and assigned to ideal modes by
/// rank. For each degeneracy group the centered values are pooled across
/// devices and members, their sample variance divided by
/// [`group_variance_factor`] gives a per-group `sigma^2`. The reported
/// `sigma_hat` is the degeneracy-weighted mean of the per-group `sigma`
/// values; `std_error` is their weighted spread.
pub fn estimate_sigma_high_t(
    peak_sets: &[Vec<f64>],
    ideal: &ModeSpectrum,
) -> Result<DisorderEstimate, DisorderError> {
    let n = ideal.n_modes();
    let sizes = ideal.group_sizes();
    let singlets = sizes.iter().filter(|&&s| s == 1).count();
    let doublets = sizes.iter().filter(|&&s| s == 2).count();
    if singlets != 4 || doublets != 4 || sizes.len() != 8 {
        return Err(DisorderError::DegeneracyMismatch(sizes));
    }
    if peak_sets.len() < 2 {
        return Err(DisorderError::TooFewDevices { found: peak_sets.len(), required: 2 });
    }
    let mut centered = Vec::with_capacity(peak_sets.len());
    for (d, peaks) in peak_sets.iter().enumerate() {
        check_finite(peaks, d)?;
        if peaks.len() != n {
            return Err(DisorderError::PeakCountMismatch { device: d, found: peaks.len(), expected: n });
        }
        let mut p = peaks.clone();
        p.sort_by(f64::total_cmp);
        let mean = p.iter().sum::<f64>() / n as f64;
        centered.push(p.into_iter().map(|x| x - mean).collect::<Vec<f64>>());
    }

    let mut group_sigmas = Vec::with_capacity(sizes.len());
    let mut raw = 0.0;
    for group in ideal.degeneracy_groups() {
        let pooled: Vec<f64> = centered.iter().flat_map(|c| group.iter().map(move |&j| c[j])).collect();
        let var = sample_sd(&pooled).powi(2);
        let f = group_variance_factor(ideal, group);
        let s2 = var / f;
        raw += group.len() as f64 * s2 / n as f64;
        group_sigmas.push((group.len() as f64, s2.sqrt()));
    }
    let sigma_hat = group_sigmas.iter().map(|(g, s)| g * s).sum::<f64>() / n as f64;
    let spread = group_sigmas.iter().map(|(g, s)| g * (s - sigma_hat).powi(2)).sum::<f64>() / n as f64;

    let mut flags = Vec::new();
    let t = ideal.hop();
    if t > 0.0 {
        let ratio = sigma_hat / t;
        if ratio > ORDERING_REFUSE_RATIO {
            return Err(DisorderError::OrderingInvalid { ratio });
        }
        if ratio > ORDERING_WARN_RATIO {
            flags.push(EstimateFlag::OrderingUnreliable);
        }
    }
    Ok(DisorderEstimate {
        sigma_hat,
        std_error: spread.sqrt(),
        method: EstimatorMethod::HighT,
        n_devices: peak_sets.len(),
        flags,
        raw_variance: raw,
    })
}

/// Exact mode frequencies (rad/s) of `n_devices` disordered devices; device
/// `k` uses realization `first + k` of `model`.
pub fn synthetic_peak_sets(
    graph: &CouplingGraph,
    omega_r: f64,
    t: f64,
    model: &DisorderModel,
    first: u64,
    n_devices: usize,
) -> Result<Vec<Vec<f64>>, DisorderError> {
    model.validate(graph.n_sites())?;
    (0..n_devices as u64)
        .into_par_iter()
        .map(|k| {
            let spec = HamiltonianSpec::new(graph, 0.0, t).with_deltas(model.sample(first + k, graph.n_sites()));
            Ok(eigenfrequencies(&spec)?.into_iter().map(|w| w + omega_r).collect())
        })
        .collect()
}

/// Monte Carlo summary of one estimator at one disorder level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorStats {
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    /// `sd / sigma`; infinite for `sigma = 0`.
    pub rel_sd: f64,
    /// Trials that produced an estimate (non-physical ones count as 0).
    pub n_ok: usize,
    /// Trials where the estimator refused.
    pub n_failed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossoverRow {
    pub sigma: f64,
    pub sigma_over_t: f64,
    pub low_t: EstimatorStats,
    pub high_t: EstimatorStats,
}

/// Monte Carlo setup for [`estimator_crossover_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverSetup {
    pub n_devices: usize,
    pub n_trials: usize,
    pub seed: u64,
    /// Relative error of the hopping rate handed to the estimators. The
    /// devices are simulated with the true `t`.
    pub hop_error: f64,
}

impl CrossoverSetup {
    pub fn new(n_devices: usize, n_trials: usize) -> Self {
        CrossoverSetup { n_devices, n_trials, seed: 0, hop_error: 0.0 }
    }
}

/// Bias and scatter of both estimators on synthetic kagome-star ensembles
/// across a grid of disorder levels.
///
/// With exact peaks and an exact `t` the variance subtraction is itself
/// exact up to sampling; its weakness at `sigma << t` is that it subtracts two
/// nearly equal numbers, so a small error in the assumed `t` (see
/// `hop_error`) dominates. The sensitivity estimator does not use `t` beyond
/// its ordering check.
pub fn estimator_crossover_report(
    t: f64,
    sigma_grid: &[f64],
    setup: &CrossoverSetup,
) -> Result<Vec<CrossoverRow>, DisorderError> {
    let CrossoverSetup { n_devices, n_trials, seed, hop_error } = *setup;
    let g = build_kagome_star();
    let t_assumed = t * (1.0 + hop_error);
    let ideal = kagome_ideal(t_assumed)?;
    sigma_grid
        .iter()
        .map(|&sigma| {
            let model = DisorderModel::new(sigma, seed, 1);
            let mut low = Vec::new();
            let mut high = Vec::new();
            let (mut low_failed, mut high_failed) = (0, 0);
            for trial in 0..n_trials {
                let sets = synthetic_peak_sets(&g, 0.0, t, &model, (trial * n_devices) as u64, n_devices)?;
                match estimate_sigma_low_t(&sets, t_assumed, &LowTOptions::default()) {
                    Ok(e) => low.push(e.sigma_hat),
                    Err(DisorderError::NonPhysical(e)) => low.push(e.sigma_hat),
                    Err(_) => low_failed += 1,
                }
                match estimate_sigma_high_t(&sets, &ideal) {
                    Ok(e) => high.push(e.sigma_hat),
                    Err(_) => high_failed += 1,
                }
            }
            Ok(CrossoverRow {
                sigma,
                sigma_over_t: if t > 0.0 { sigma / t } else { f64::INFINITY },
                low_t: stats(&low, sigma, low_failed),
                high_t: stats(&high, sigma, high_failed),
            })
        })
        .collect()
}

fn stats(xs: &[f64], truth: f64, n_failed: usize) -> EstimatorStats {
    let mean = if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let sd = sample_sd(xs);
    EstimatorStats {
        mean,
        bias: mean - truth,
        sd,
        rel_sd: if truth > 0.0 { sd / truth } else { f64::INFINITY },
        n_ok: xs.len(),
        n_failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mhz;

    #[test]
    fn model_validation() {
        assert!(DisorderModel::new(-1.0, 0, 1).validate(12).is_err());
        assert!(DisorderModel::new(1.0, 0, 0).validate(12).is_err());
        assert!(DisorderModel::new(1.0, 0, 1).with_offsets(vec![0.0; 3]).validate(12).is_err());
        assert_eq!(sample_deltas(&DisorderModel::new(0.0, 9, 1), 5), vec![0.0; 12]);
    }

    #[test]
    fn offsets_are_added() {
        let m = DisorderModel::new(0.0, 1, 1).with_offsets((0..12).map(f64::from).collect());
        assert_eq!(sample_deltas(&m, 3)[4], 4.0);
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut idx = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut idx, 6) {
            count += 1;
        }
        assert_eq!(count, 20);
    }

    #[test]
    fn subset_matching_recovers_dropped_modes() {
        let ideal = kagome_ideal(1.0).unwrap().frequencies().to_vec();
        let shift = 5.0;
        let peaks: Vec<f64> = ideal.iter().enumerate().filter(|(k, _)| *k != 0 && *k != 11).map(|(_, w)| w + shift).collect();
        let matched = match_ideal_subset(&peaks, &ideal);
        assert_eq!(matched, ideal[1..11].to_vec());
    }

    #[test]
    fn zero_disorder_gives_zero() {
        let t = mhz(0.8);
        let ideal = kagome_ideal(t).unwrap();
        let sets = vec![ideal.frequencies().iter().map(|w| w + 7.0).collect::<Vec<_>>(); 3];
        let low = estimate_sigma_low_t(&sets, t, &LowTOptions::default()).unwrap();
        assert!(low.sigma_hat < 1e-6 * t, "{}", low.sigma_hat);
        let high = estimate_sigma_high_t(&sets, &ideal).unwrap();
        assert!(high.sigma_hat < 1e-6 * t, "{}", high.sigma_hat);
    }

    #[test]
    fn variance_factors() {
        let ideal = kagome_ideal(1.0).unwrap();
        let groups = ideal.degeneracy_groups();
        // flat band: six sites at 1/6, so 6 * (1/6)^2 - 1/12
        let f0 = group_variance_factor(&ideal, &groups[0]);
        assert!((f0 - (1.0 / 6.0 - 1.0 / 12.0)).abs() < 1e-12);
        for g in groups {
            let f = group_variance_factor(&ideal, g);
            assert!(f > 0.0 && f < 1.0);
        }
    }

    #[test]
    fn low_t_errors() {
        let t = 1.0;
        let short = vec![vec![0.0, 1.0, 2.0]];
        assert!(matches!(
            estimate_sigma_low_t(&short, t, &LowTOptions::default()),
            Err(DisorderError::TooFewPeaks { device: 0, found: 3, required: 8 })
        ));
        let eleven = vec![(0..11).map(f64::from).collect::<Vec<_>>()];
        assert!(matches!(
            estimate_sigma_low_t(&eleven, t, &LowTOptions { strict: true, ..Default::default() }),
            Err(DisorderError::TooFewPeaks { found: 11, required: 12, .. })
        ));
        assert!(matches!(
            estimate_sigma_low_t(&[], t, &LowTOptions::default()),
            Err(DisorderError::TooFewDevices { .. })
        ));
    }

    #[test]
    fn negative_variance_is_reported_not_clamped() {
        // Peaks squeezed tighter than the ideal spectrum.
        let ideal = kagome_ideal(1.0).unwrap();
        let squeezed: Vec<f64> = ideal.frequencies().iter().map(|w| 0.5 * w).collect();
        match estimate_sigma_low_t(&[squeezed], 1.0, &LowTOptions::default()) {
            Err(DisorderError::NonPhysical(e)) => {
                assert!(e.raw_variance < 0.0);
                assert_eq!(e.sigma_hat, 0.0);
                assert!(e.flags.contains(&EstimateFlag::NonPhysical));
            }
            other => panic!("expected NonPhysical, got {other:?}"),
        }
    }

    #[test]
    fn high_t_errors() {
        let ideal = kagome_ideal(1.0).unwrap();
        let twelve = ideal.frequencies().to_vec();
        assert!(matches!(
            estimate_sigma_high_t(&[twelve.clone(), twelve[..11].to_vec()], &ideal),
            Err(DisorderError::PeakCountMismatch { device: 1, found: 11, expected: 12 })
        ));
        assert!(matches!(
            estimate_sigma_high_t(&[twelve.clone()], &ideal),
            Err(DisorderError::TooFewDevices { .. })
        ));
        let dimer = crate::topology::build_custom(2, &[(0, 1)], &Default::default()).unwrap();
        let ds = diagonalize(&HamiltonianSpec::new(&dimer, 0.0, 1.0), None).unwrap();
        assert!(matches!(
            estimate_sigma_high_t(&[vec![0.0, 1.0], vec![0.0, 1.0]], &ds),
            Err(DisorderError::DegeneracyMismatch(_))
        ));
    }

    #[test]
    fn gaussian_fit_recovers_parameters() {
        let x: Vec<f64> = (0..201).map(|k| -10.0 + 0.1 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * (-(v - 0.7_f64).powi(2) / (2.0 * 1.9 * 1.9)).exp()).collect();
        let f = fit_gaussian(&x, &y).unwrap();
        assert!((f.amplitude - 3.0).abs() < 1e-6);
        assert!((f.center - 0.7).abs() < 1e-6);
        assert!((f.width - 1.9).abs() < 1e-6);
    }

    #[test]
    fn zero_sigma_histogram() {
        let g = build_kagome_star();
        let model = DisorderModel::new(0.0, 1, 50);
        let grid = HistogramGrid::default_for(0.0, 1.0, 0.0);
        let h = mode_histogram(&g, 0.0, 1.0, &model, &grid).unwrap();
        assert_eq!(h.total(), 600);
        let occupied: Vec<u64> = h.counts.iter().copied().filter(|&c| c > 0).collect();
        assert!(occupied.len() <= 8);
        let singles = occupied.iter().filter(|&&c| c == 50).count();
        let doubles = occupied.iter().filter(|&&c| c == 100).count();
        assert_eq!((singles, doubles), (4, 4));
        assert_eq!(h.normalized.iter().copied().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn histogram_rejects_empty_grid() {
        let g = build_kagome_star();
        let grid = HistogramGrid { lo: 1.0, hi: 1.0, n_bins: 10 };
        assert_eq!(
            mode_histogram(&g, 0.0, 1.0, &DisorderModel::new(0.1, 1, 1), &grid),
            Err(DisorderError::EmptyGrid)
        );
    }
}
