//! Tight-binding normal modes of a coupled-resonator array.
//!
//! In the one-photon sector the array Hamiltonian is the real symmetric
//! matrix `H = diag(omega_r + delta_i) + t * A`, with `A` the adjacency matrix
//! of the coupling graph. The zero-point term and the factor of hbar are
//! constant offsets and are dropped.
//!
//! Mode-frequency sensitivities `S[j][i] = dOmega_j / d delta_i` follow from
//! first-order perturbation theory: for a non-degenerate mode they equal
//! `psi_j(i)^2`. Inside a degenerate group the derivative depends on the
//! direction of the perturbation, so the group's eigenvectors are first
//! rotated into the basis that diagonalizes the projected perturbation
//! (degenerate perturbation theory); after that rotation `psi_j(i)^2` again
//! gives the slopes of the split branches.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::linalg::{canonical_sign, dot, jacobi_eigen, LinalgError, SymMatrix};
use crate::topology::{CouplingGraph, SiteId};

/// Relative degeneracy tolerance: modes closer than `hop * DEFAULT_DEGENERACY_REL`
/// are grouped.
pub const DEFAULT_DEGENERACY_REL: f64 = 1e-8;

/// Squared amplitude below which a site is outside a mode's support.
pub const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("expected {expected} per-site values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("spectrum was computed from a different Hamiltonian")]
    StaleSpectrum,
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

/// Everything needed to assemble the array Hamiltonian.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec<'g> {
    pub graph: &'g CouplingGraph,
    /// Bare resonator frequency (rad/s).
    pub omega_r: f64,
    /// Per-site frequency shifts (rad/s).
    pub deltas: Vec<f64>,
    /// Uniform nearest-neighbour hopping rate (rad/s).
    pub hop: f64,
    /// Offset added to the boundary (outer) resonators (rad/s).
    pub systematic_edge_shift: f64,
    /// Optional per-edge hopping values replacing `hop`.
    pub hop_overrides: BTreeMap<(SiteId, SiteId), f64>,
}

impl<'g> HamiltonianSpec<'g> {
    /// Disorder-free specification.
    pub fn new(graph: &'g CouplingGraph, omega_r: f64, hop: f64) -> Self {
        HamiltonianSpec {
            graph,
            omega_r,
            deltas: vec![0.0; graph.n_sites()],
            hop,
            systematic_edge_shift: 0.0,
            hop_overrides: BTreeMap::new(),
        }
    }

    pub fn with_deltas(mut self, deltas: Vec<f64>) -> Self {
        self.deltas = deltas;
        self
    }

    pub fn with_edge_shift(mut self, shift: f64) -> Self {
        self.systematic_edge_shift = shift;
        self
    }

    pub fn with_hop_override(mut self, a: SiteId, b: SiteId, hop: f64) -> Self {
        self.hop_overrides.insert((a.min(b), a.max(b)), hop);
        self
    }

    pub fn is_disordered(&self) -> bool {
        self.deltas.iter().any(|&d| d != 0.0)
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        let n = self.graph.n_sites();
        if self.deltas.len() != n {
            return Err(SpectrumError::DimensionMismatch { expected: n, found: self.deltas.len() });
        }
        if !self.omega_r.is_finite() {
            return Err(SpectrumError::InvalidParameter("omega_r must be finite".into()));
        }
        if !(self.hop >= 0.0 && self.hop.is_finite()) {
            return Err(SpectrumError::InvalidParameter(format!("hop must be >= 0, got {}", self.hop)));
        }
        if self.deltas.iter().any(|d| !d.is_finite()) || !self.systematic_edge_shift.is_finite() {
            return Err(SpectrumError::InvalidParameter("non-finite disorder".into()));
        }
        for (&(a, b), &h) in &self.hop_overrides {
            if !self.graph.has_edge(a, b) {
                return Err(SpectrumError::InvalidParameter(format!("hop override on non-edge ({a}, {b})")));
            }
            if !h.is_finite() {
                return Err(SpectrumError::InvalidParameter("non-finite hop override".into()));
            }
        }
        Ok(())
    }

    /// Default degeneracy tolerance, `hop * 1e-8`.
    pub fn default_degeneracy_tol(&self) -> f64 {
        if self.hop > 0.0 {
            self.hop * DEFAULT_DEGENERACY_REL
        } else {
            self.omega_r.abs().max(1.0) * 1e-14
        }
    }

    /// Stable hash of the assembled matrix, used to pair a spectrum with its spec.
    pub fn fingerprint(&self) -> Result<u64, SpectrumError> {
        let h = assemble_offset(self)?;
        let mut hash = FNV_OFFSET;
        fnv_mix(&mut hash, h.dim() as u64);
        fnv_mix(&mut hash, self.omega_r.to_bits());
        for v in h.as_slice() {
            fnv_mix(&mut hash, v.to_bits());
        }
        Ok(hash)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

fn fnv_mix(hash: &mut u64, word: u64) {
    for byte in word.to_le_bytes() {
        *hash ^= u64::from(byte);
        *hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
}

/// `H - omega_r * I`. Diagonalizing the offset matrix keeps the mode
/// splittings (~t) from being swamped by rounding on the ~omega_r diagonal.
fn assemble_offset(spec: &HamiltonianSpec) -> Result<SymMatrix, SpectrumError> {
    spec.validate()?;
    let g = spec.graph;
    let mut h = SymMatrix::zeros(g.n_sites());
    for (i, &d) in spec.deltas.iter().enumerate() {
        h.set(i, i, d);
    }
    if spec.systematic_edge_shift != 0.0 {
        for s in g.edge_sites() {
            h.set(s.0, s.0, h.get(s.0, s.0) + spec.systematic_edge_shift);
        }
    }
    for &(a, b) in g.edges() {
        let t = spec.hop_overrides.get(&(a, b)).copied().unwrap_or(spec.hop);
        h.set_sym(a.0, b.0, t);
    }
    Ok(h)
}

/// Assemble the single-excitation Hamiltonian (rad/s).
pub fn assemble(spec: &HamiltonianSpec) -> Result<SymMatrix, SpectrumError> {
    let mut h = assemble_offset(spec)?;
    for i in 0..h.dim() {
        h.set(i, i, h.get(i, i) + spec.omega_r);
    }
    Ok(h)
}

/// Ascending eigenfrequencies only (rad/s). Cheaper than [`diagonalize`].
pub fn eigenfrequencies(spec: &HamiltonianSpec) -> Result<Vec<f64>, SpectrumError> {
    let h = assemble_offset(spec)?;
    let eig = jacobi_eigen(&h, false)?;
    Ok(eig.values.into_iter().map(|v| v + spec.omega_r).collect())
}

/// Normal modes of one Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    frequencies: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    groups: Vec<Vec<usize>>,
    sensitivities: Vec<Vec<f64>>,
    omega_r: f64,
    hop: f64,
    disordered: bool,
    fingerprint: u64,
}

impl ModeSpectrum {
    /// Ascending mode frequencies (rad/s).
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// `vectors()[j][i]` is the amplitude of mode `j` on site `i`.
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Partition of mode indices into degeneracy groups, ascending in frequency.
    pub fn degeneracy_groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// `S[j][i] = dOmega_j / d delta_i`.
    pub fn sensitivities(&self) -> &[Vec<f64>] {
        &self.sensitivities
    }

    pub fn omega_r(&self) -> f64 {
        self.omega_r
    }

    pub fn hop(&self) -> f64 {
        self.hop
    }

    pub fn is_disordered(&self) -> bool {
        self.disordered
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// Number of distinct frequencies.
    pub fn n_distinct(&self) -> usize {
        self.groups.len()
    }

    /// Sizes of the degeneracy groups, ascending in frequency.
    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Squared amplitude of mode `j` summed over `sites`.
    pub fn weight_on(&self, mode: usize, sites: &[SiteId]) -> f64 {
        sites.iter().map(|s| self.vectors[mode][s.0].powi(2)).sum()
    }

    /// Basis-independent site weights of a degeneracy group:
    /// `w_i = sum_{j in group} psi_j(i)^2`.
    pub fn group_site_weights(&self, group: &[usize]) -> Vec<f64> {
        let n = self.frequencies.len();
        (0..n)
            .map(|i| group.iter().map(|&j| self.vectors[j][i].powi(2)).sum())
            .collect()
    }

    /// Population variance of the mode frequencies (rad^2/s^2).
    pub fn frequency_variance(&self) -> f64 {
        population_variance(&self.frequencies)
    }
}

pub(crate) fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Generic, deterministic probe direction used to split degenerate groups of
/// a disorder-free spectrum.
pub fn default_probe(n: usize) -> Vec<f64> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    (0..n).map(|i| ((i as f64 + 1.0) * GOLDEN).fract() - 0.5).collect()
}

/// Full eigen-decomposition, degeneracy grouping and sensitivities.
///
/// `degeneracy_tol` (rad/s) defaults to `hop * 1e-8`. Spectra with any
/// non-zero site disorder are treated as fully non-degenerate.
pub fn diagonalize(spec: &HamiltonianSpec, degeneracy_tol: Option<f64>) -> Result<ModeSpectrum, SpectrumError> {
    let h = assemble_offset(spec)?;
    let eig = jacobi_eigen(&h, true)?;
    let tol = degeneracy_tol.unwrap_or_else(|| spec.default_degeneracy_tol());
    let disordered = spec.is_disordered();

    let groups = if disordered {
        (0..eig.values.len()).map(|j| vec![j]).collect()
    } else {
        group_by_gap(&eig.values, tol)
    };

    let probe = if disordered { spec.deltas.clone() } else { default_probe(h.dim()) };
    let mut vectors = eig.vectors;
    adapt_degenerate_groups(&mut vectors, &groups, &probe)?;
    let sensitivities = squared_amplitudes(&vectors);

    Ok(ModeSpectrum {
        frequencies: eig.values.iter().map(|v| v + spec.omega_r).collect(),
        vectors,
        groups,
        sensitivities,
        omega_r: spec.omega_r,
        hop: spec.hop,
        disordered,
        fingerprint: spec.fingerprint()?,
    })
}

fn group_by_gap(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (j, &v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if v - values[*g.last().unwrap()] <= tol => g.push(j),
            _ => groups.push(vec![j]),
        }
    }
    groups
}

/// Rotate every degenerate group into the basis diagonalizing the projected
/// perturbation `diag(direction)`. Rotated members are ordered by ascending
/// first-order shift, so they line up with the split branches.
fn adapt_degenerate_groups(
    vectors: &mut [Vec<f64>],
    groups: &[Vec<usize>],
    direction: &[f64],
) -> Result<(), SpectrumError> {
    for group in groups.iter().filter(|g| g.len() > 1) {
        let g = group.len();
        let mut projected = SymMatrix::zeros(g);
        for a in 0..g {
            for b in a..g {
                let va = &vectors[group[a]];
                let vb = &vectors[group[b]];
                let m: f64 = direction.iter().zip(va.iter().zip(vb)).map(|(p, (x, y))| p * x * y).sum();
                projected.set_sym(a, b, m);
            }
        }
        let local = jacobi_eigen(&projected, true)?;
        let old: Vec<Vec<f64>> = group.iter().map(|&j| vectors[j].clone()).collect();
        for (k, &j) in group.iter().enumerate() {
            let coeffs = &local.vectors[k];
            let mut v: Vec<f64> = (0..old[0].len())
                .map(|i| coeffs.iter().zip(&old).map(|(c, o)| c * o[i]).sum())
                .collect();
            canonical_sign(&mut v);
            vectors[j] = v;
        }
    }
    Ok(())
}

fn squared_amplitudes(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    vectors.iter().map(|v| v.iter().map(|x| x * x).collect()).collect()
}

fn check_fresh(spec: &HamiltonianSpec, spectrum: &ModeSpectrum) -> Result<(), SpectrumError> {
    if spec.fingerprint()? != spectrum.fingerprint {
        return Err(SpectrumError::StaleSpectrum);
    }
    Ok(())
}

/// Sensitivity matrix `S[j][i] = dOmega_j / d delta_i` for a spectrum produced
/// by [`diagonalize`] on the same spec.
pub fn sensitivities(spec: &HamiltonianSpec, spectrum: &ModeSpectrum) -> Result<Vec<Vec<f64>>, SpectrumError> {
    check_fresh(spec, spectrum)?;
    Ok(squared_amplitudes(&spectrum.vectors))
}

/// Sensitivities adapted to a specific perturbation direction.
///
/// Degenerate groups are re-split along `direction`, so that
/// `Omega_j(eps) ~ Omega_j + eps * sum_i S[j][i] * direction[i]` for each
/// branch of the split group.
pub fn sensitivities_along(
    spec: &HamiltonianSpec,
    spectrum: &ModeSpectrum,
    direction: &[f64],
) -> Result<Vec<Vec<f64>>, SpectrumError> {
    check_fresh(spec, spectrum)?;
    if direction.len() != spectrum.n_modes() {
        return Err(SpectrumError::DimensionMismatch { expected: spectrum.n_modes(), found: direction.len() });
    }
    let mut vectors = spectrum.vectors.clone();
    adapt_degenerate_groups(&mut vectors, &spectrum.groups, direction)?;
    Ok(squared_amplitudes(&vectors))
}

/// Site supports of the two members of a doublet in its most separated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubletSupport {
    /// Mode indices of the doublet.
    pub modes: [usize; 2],
    /// Common frequency (rad/s).
    pub frequency: f64,
    /// Basis vectors chosen for the two members.
    pub basis: [Vec<f64>; 2],
    /// Sites with non-negligible sensitivity for each member.
    pub supports: [BTreeSet<SiteId>; 2],
    /// Sites in both supports.
    pub shared: BTreeSet<SiteId>,
    /// `max_i |b1(i) * b2(i)|` in the chosen basis; zero iff the supports are
    /// disjoint.
    pub max_overlap: f64,
}

impl DoubletSupport {
    pub fn is_disjoint(&self) -> bool {
        self.shared.is_empty()
    }
}

/// For each doublet of a disorder-free spectrum, find the orthonormal basis of
/// the doublet that minimizes `max_i |b1(i) b2(i)|` and report the site
/// supports of the two members in that basis.
///
/// If the two members of a doublet respond to disjoint sets of site shifts,
/// that basis exposes it: the overlap is then zero and `shared` is empty.
pub fn degenerate_pair_supports(spectrum: &ModeSpectrum) -> Result<Vec<DoubletSupport>, SpectrumError> {
    if spectrum.disordered {
        return Err(SpectrumError::NotApplicable(
            "doublet supports are defined for disorder-free spectra only".into(),
        ));
    }
    let mut out = Vec::new();
    for group in spectrum.groups.iter().filter(|g| g.len() == 2) {
        let u = &spectrum.vectors[group[0]];
        let v = &spectrum.vectors[group[1]];
        let (phi, max_overlap) = minimize_overlap(u, v);
        let (c, s) = (phi.cos(), phi.sin());
        let b1: Vec<f64> = u.iter().zip(v).map(|(x, y)| c * x + s * y).collect();
        let b2: Vec<f64> = u.iter().zip(v).map(|(x, y)| -s * x + c * y).collect();
        let support = |b: &[f64]| -> BTreeSet<SiteId> {
            b.iter()
                .enumerate()
                .filter(|(_, x)| x.powi(2) > SUPPORT_TOL)
                .map(|(i, _)| SiteId(i))
                .collect()
        };
        let s1 = support(&b1);
        let s2 = support(&b2);
        let shared = s1.intersection(&s2).copied().collect();
        out.push(DoubletSupport {
            modes: [group[0], group[1]],
            frequency: spectrum.frequencies[group[0]],
            basis: [b1, b2],
            supports: [s1, s2],
            shared,
            max_overlap,
        });
    }
    Ok(out)
}

fn basis_overlap(u: &[f64], v: &[f64], phi: f64) -> f64 {
    let (c, s) = (phi.cos(), phi.sin());
    u.iter()
        .zip(v)
        .map(|(x, y)| ((c * x + s * y) * (-s * x + c * y)).abs())
        .fold(0.0, f64::max)
}

/// Minimize the basis overlap over rotation angles in `[0, pi/2)` (the
/// objective has that period): coarse scan followed by golden-section
/// refinement around the best sample.
fn minimize_overlap(u: &[f64], v: &[f64]) -> (f64, f64) {
    const SAMPLES: usize = 4096;
    let period = std::f64::consts::FRAC_PI_2;
    let step = period / SAMPLES as f64;
    let (mut best_phi, mut best) = (0.0, f64::INFINITY);
    for k in 0..SAMPLES {
        let phi = k as f64 * step;
        let f = basis_overlap(u, v, phi);
        if f < best {
            best = f;
            best_phi = phi;
        }
    }
    let (mut lo, mut hi) = (best_phi - step, best_phi + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if basis_overlap(u, v, a) < basis_overlap(u, v, b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let phi = 0.5 * (lo + hi);
    let f = basis_overlap(u, v, phi);
    if f < best {
        (phi, f)
    } else {
        (best_phi, best)
    }
}

/// Largest deviation of `V V^T` from the identity.
pub fn orthonormality_error(vectors: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, va) in vectors.iter().enumerate() {
        for (b, vb) in vectors.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot(va, vb) - target).abs());
        }
    }
    worst
}
