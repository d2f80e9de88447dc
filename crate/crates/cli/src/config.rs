//! Run configuration: JSON file + command-line overrides + defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kagome_core::circuit::{DeviceParams, PowerLawInductance};
use kagome_core::topology::{build_custom, build_kagome_star, GraphFile};
use kagome_core::{CouplingGraph, EstimatorMethod};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Where the coupling graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    #[default]
    Kagome,
    File {
        path: PathBuf,
    },
    Inline {
        n_sites: usize,
        edges: Vec<[usize; 2]>,
        #[serde(default)]
        ports: BTreeMap<String, usize>,
    },
}

impl GraphSource {
    pub fn load(&self) -> Result<CouplingGraph, CliError> {
        match self {
            GraphSource::Kagome => Ok(build_kagome_star()),
            GraphSource::File { path } => {
                let text = read(path)?;
                let file: GraphFile = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                CouplingGraph::try_from(file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
            }
            GraphSource::Inline { n_sites, edges, ports } => {
                let edges: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                build_custom(*n_sites, &edges, ports).map_err(|e| CliError::Config(format!("graph: {e}")))
            }
        }
    }
}

fn d_omega_r() -> f64 {
    7.0e9
}
fn d_t() -> f64 {
    31.0e6
}
fn d_realizations() -> usize {
    100_000
}
fn d_sigmas() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}
fn d_bins() -> usize {
    kagome_core::disorder::DEFAULT_BINS
}
fn d_kappa() -> f64 {
    0.05e6
}
fn d_grid() -> usize {
    kagome_core::transmission::DEFAULT_GRID_POINTS
}
fn d_method() -> EstimatorMethod {
    EstimatorMethod::LowT
}
fn d_min_peaks() -> usize {
    kagome_core::disorder::DEFAULT_MIN_PEAKS
}
fn d_widths() -> Vec<f64> {
    vec![5e-6, 10e-6, 15e-6, 20e-6, 25e-6, 30e-6, 35e-6, 40e-6, 45e-6, 50e-6]
}
fn d_dw() -> f64 {
    600e-9
}
fn d_dgap() -> f64 {
    1200e-9
}

/// Every parameter of every command. Frequencies in Hz, lengths in m.
/// Unused fields are ignored by commands that do not need them but are
/// still echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand this configuration was resolved for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default)]
    pub graph: GraphSource,
    #[serde(default = "d_omega_r")]
    pub omega_r_hz: f64,
    #[serde(default = "d_t")]
    pub t_hz: f64,
    #[serde(default)]
    pub sigma_hz: f64,
    /// Explicit site shifts; overrides `sigma_hz` for single realizations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas_hz: Option<Vec<f64>>,
    /// Extra shift on every edge site.
    #[serde(default)]
    pub edge_shift_hz: f64,
    #[serde(default)]
    pub seed: u64,
    /// Realization index used by single-device commands.
    #[serde(default)]
    pub realization: u64,
    #[serde(default = "d_realizations")]
    pub realizations: usize,

    // histogram
    #[serde(default = "d_sigmas")]
    pub sigmas_over_t: Vec<f64>,
    #[serde(default = "d_bins")]
    pub bins: usize,

    // modes
    #[serde(default)]
    pub eigenvectors: bool,
    #[serde(default)]
    pub sensitivities: bool,

    // spectrum
    #[serde(default = "d_kappa")]
    pub kappa_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_int_hz: Option<f64>,
    #[serde(default = "d_grid")]
    pub grid_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prominence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation_hz: Option<f64>,

    // estimate
    #[serde(default)]
    pub peaks: Vec<PathBuf>,
    #[serde(default = "d_method")]
    pub method: EstimatorMethod,
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "d_min_peaks")]
    pub min_peaks: usize,

    // params
    #[serde(default)]
    pub device: DeviceParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inductance: Option<PowerLawInductance>,
    #[serde(default = "d_widths")]
    pub widths_m: Vec<f64>,
    #[serde(default = "d_dw")]
    pub dw_m: f64,
    #[serde(default = "d_dgap")]
    pub dgap_m: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Relative paths in a config file are taken relative to the file.
fn anchor(path: &Path, base: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = read(path)?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut cfg.peaks {
            *p = anchor(p, base);
        }
        if let GraphSource::File { path } = &mut cfg.graph {
            *path = anchor(path, base);
        }
        Ok(cfg)
    }

    /// Make every path absolute so a manifest works from any directory.
    pub fn absolutize(&mut self) {
        for p in &mut self.peaks {
            *p = absolute(p);
        }
        if let GraphSource::File { path } = &mut self.graph {
            *path = absolute(path);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |what: &str| Err(CliError::Config(what.to_string()));
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !self.omega_r_hz.is_finite() {
            return bad("omega_r_hz must be finite");
        }
        if !finite_nonneg(self.t_hz) {
            return bad("t_hz must be >= 0");
        }
        if !finite_nonneg(self.sigma_hz) {
            return bad("sigma_hz must be >= 0");
        }
        if !self.edge_shift_hz.is_finite() {
            return bad("edge_shift_hz must be finite");
        }
        if self.deltas_hz.as_ref().is_some_and(|d| d.iter().any(|x| !x.is_finite())) {
            return bad("deltas_hz must be finite");
        }
        if self.realizations == 0 {
            return bad("realizations must be >= 1");
        }
        if self.bins == 0 {
            return bad("bins must be >= 1");
        }
        if !finite_pos(self.kappa_hz) {
            return bad("kappa_hz must be > 0");
        }
        if self.kappa_int_hz.is_some_and(|k| !finite_nonneg(k)) {
            return bad("kappa_int_hz must be >= 0");
        }
        if self.grid_points < 3 {
            return bad("grid_points must be >= 3");
        }
        if self.prominence.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
            return bad("prominence must be in [0, 1]");
        }
        if self.min_separation_hz.is_some_and(|s| !finite_nonneg(s)) {
            return bad("min_separation_hz must be >= 0");
        }
        if self.min_peaks < 2 {
            return bad("min_peaks must be >= 2");
        }
        Ok(())
    }
}
